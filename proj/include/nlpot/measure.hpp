#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nlpot/common.hpp"
#include "nlpot/geometry.hpp"

namespace nlpot {

struct Atom {
    Point location;
    double mass = 0.0;
};

/// Piecewise-constant density (mass per unit volume) on the cells of a grid.
struct GridDensity {
    Grid grid;
    std::vector<double> values;  // one per cell, cell_linear order

    GridDensity() = default;
    GridDensity(Grid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
        require(values.size() == grid.cell_count(), "density needs one value per cell");
        for (double x : values) require(std::isfinite(x) && x >= 0.0, "density values must be finite and >= 0");
    }

    double mass() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * grid.cell_volume();
    }
    double max_value() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }

    /// Mass of the closed ball B̄_r(x): cells fully inside count exactly, cut cells
    /// use the exact ball/box intersection volume.
    double ball_mass(const Point& x, double r) const {
        if (r <= 0.0) return 0.0;
        const int n = grid.dim();
        const Box& b = grid.box();
        Index lo{}, hi{};
        for (int a = 0; a < n; ++a) {
            const double h = grid.spacing(a);
            lo[a] = std::clamp(static_cast<int>(std::floor((x[a] - r - b.lo[a]) / h)), 0, grid.cells(a));
            hi[a] = std::clamp(static_cast<int>(std::floor((x[a] + r - b.lo[a]) / h)) + 1, 0, grid.cells(a));
        }
        const double r2 = r * r;
        const double vol = grid.cell_volume();
        double s = 0.0;
        for_each_index(n, lo, hi, [&](const Index& i) {
            const double rho = values[grid.cell_linear(i)];
            if (rho == 0.0) return;
            const Box c = grid.cell_box(i);
            if (geometry::detail::nearest_sq(x, c.lo, c.hi, n) >= r2) return;
            if (geometry::detail::farthest_sq(x, c.lo, c.hi, n) <= r2) {
                s += rho * vol;
                return;
            }
            s += rho * geometry::ball_box_volume(x, r, c.lo, c.hi);
        });
        return s;
    }

    /// Exact mass of the intersection with an axis-aligned box.
    double box_mass(const Point& lo, const Point& hi) const {
        const int n = grid.dim();
        const Box& b = grid.box();
        Index ilo{}, ihi{};
        for (int a = 0; a < n; ++a) {
            const double h = grid.spacing(a);
            ilo[a] = std::clamp(static_cast<int>(std::floor((lo[a] - b.lo[a]) / h)), 0, grid.cells(a));
            ihi[a] = std::clamp(static_cast<int>(std::floor((hi[a] - b.lo[a]) / h)) + 1, 0, grid.cells(a));
        }
        double s = 0.0;
        for_each_index(n, ilo, ihi, [&](const Index& i) {
            const double rho = values[grid.cell_linear(i)];
            if (rho == 0.0) return;
            const Box c = grid.cell_box(i);
            double v = 1.0;
            for (int a = 0; a < n; ++a) v *= std::max(0.0, std::min(hi[a], c.hi[a]) - std::max(lo[a], c.lo[a]));
            s += rho * v;
        });
        return s;
    }
};

/// Finite nonnegative Radon measure: atoms plus grid densities. Immutable in
/// use; the combinators below return new measures.
class RadonMeasure {
public:
    RadonMeasure() = default;
    explicit RadonMeasure(int dim, std::string label = {}) : dim_(dim), label_(std::move(label)) {
        (void)Point(dim);
    }
    RadonMeasure(int dim, std::vector<Atom> atoms, std::vector<GridDensity> layers, std::string label = {})
        : dim_(dim), atoms_(std::move(atoms)), layers_(std::move(layers)), label_(std::move(label)) {
        (void)Point(dim);
        for (const auto& a : atoms_) {
            require(a.location.dim() == dim_, "atom dimension mismatch");
            require(std::isfinite(a.mass) && a.mass >= 0.0, "atom masses must be finite and >= 0");
        }
        for (const auto& l : layers_) require(l.grid.dim() == dim_, "density dimension mismatch");
    }

    static RadonMeasure dirac(const Point& at, double mass, std::string label = "dirac") {
        return RadonMeasure(at.dim(), {Atom{at, mass}}, {}, std::move(label));
    }
    static RadonMeasure density(GridDensity d, std::string label = "density") {
        int n = d.grid.dim();
        return RadonMeasure(n, {}, {std::move(d)}, std::move(label));
    }
    /// Constant density `rho` on `box`.
    static RadonMeasure uniform(const Box& box, double rho, std::string label = "uniform") {
        Index one{};
        one.fill(1);
        return density(GridDensity(Grid(box, one), {rho}), std::move(label));
    }

    int dim() const { return dim_; }
    const std::vector<Atom>& atoms() const { return atoms_; }
    const std::vector<GridDensity>& layers() const { return layers_; }
    const std::string& label() const { return label_; }
    bool has_density() const {
        for (const auto& l : layers_)
            if (l.max_value() > 0.0) return true;
        return false;
    }
    bool empty() const { return atoms_.empty() && !has_density(); }

    RadonMeasure with_label(std::string label) const {
        RadonMeasure m = *this;
        m.label_ = std::move(label);
        return m;
    }

private:
    int dim_ = 0;
    std::vector<Atom> atoms_;
    std::vector<GridDensity> layers_;
    std::string label_;
};

/// μ(B̄_r(x)) for the closed ball.
inline double ball_mass(const RadonMeasure& m, const Point& center, double radius) {
    require(radius >= 0.0, "ball_mass: radius must be >= 0");
    const double r2 = radius * radius;
    double s = 0.0;
    for (const auto& a : m.atoms())
        if (distance_sq(a.location, center) <= r2) s += a.mass;
    for (const auto& l : m.layers()) s += l.ball_mass(center, radius);
    return s;
}

inline double total_mass(const RadonMeasure& m) {
    double s = 0.0;
    for (const auto& a : m.atoms()) s += a.mass;
    for (const auto& l : m.layers()) s += l.mass();
    return s;
}

inline RadonMeasure scaled(const RadonMeasure& m, double c) {
    require(std::isfinite(c) && c >= 0.0, "scale factor must be finite and >= 0");
    std::vector<Atom> atoms = m.atoms();
    for (auto& a : atoms) a.mass *= c;
    std::vector<GridDensity> layers = m.layers();
    for (auto& l : layers)
        for (auto& v : l.values) v *= c;
    return RadonMeasure(m.dim(), std::move(atoms), std::move(layers), m.label());
}

/// Sum of two measures; density layers on identical grids are merged.
inline RadonMeasure sum(const RadonMeasure& a, const RadonMeasure& b) {
    require(a.dim() == b.dim(), "sum: dimension mismatch");
    std::vector<Atom> atoms = a.atoms();
    atoms.insert(atoms.end(), b.atoms().begin(), b.atoms().end());
    std::vector<GridDensity> layers = a.layers();
    for (const auto& l : b.layers()) {
        auto it = std::find_if(layers.begin(), layers.end(), [&](const GridDensity& x) { return x.grid == l.grid; });
        if (it == layers.end()) {
            layers.push_back(l);
        } else {
            for (std::size_t k = 0; k < l.values.size(); ++k) it->values[k] += l.values[k];
        }
    }
    return RadonMeasure(a.dim(), std::move(atoms), std::move(layers), a.label() + "+" + b.label());
}

/// Restriction to a sub-box. Atoms outside are dropped; each density cell keeps
/// exactly the mass it has inside `sub` (cut cells are rescaled, which is exact
/// for sub-boxes aligned with the density grid).
inline RadonMeasure restrict(const RadonMeasure& m, const Box& sub) {
    require(sub.dim() == m.dim(), "restrict: dimension mismatch");
    std::vector<Atom> atoms;
    for (const auto& a : m.atoms())
        if (sub.contains(a.location)) atoms.push_back(a);
    std::vector<GridDensity> layers;
    for (const auto& l : m.layers()) {
        std::vector<double> v = l.values;
        const double vol = l.grid.cell_volume();
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (v[k] == 0.0) continue;
            Box c = l.grid.cell_box(l.grid.cell_index(k));
            double inside = 1.0;
            for (int a = 0; a < m.dim(); ++a)
                inside *= std::max(0.0, std::min(sub.hi[a], c.hi[a]) - std::max(sub.lo[a], c.lo[a]));
            v[k] *= inside / vol;
        }
        layers.emplace_back(l.grid, std::move(v));
    }
    return RadonMeasure(m.dim(), std::move(atoms), std::move(layers), m.label() + "|restricted");
}

/// μ̄ = scale · μ_L / μ_L(B_{10 diam(box)}(0)) restricted to the box, plus μ.
/// scale = 1 is the normalised Lebesgue part; scale = M the capped variant.
inline RadonMeasure make_bar_mu(const RadonMeasure& mu, double scale, const Box& box) {
    require(std::isfinite(scale) && scale >= 0.0, "make_bar_mu: scale must be >= 0");
    require(box.dim() == mu.dim(), "make_bar_mu: dimension mismatch");
    const double radius = 10.0 * box.diameter();
    const Point origin(box.dim());
    require(geometry::detail::farthest_sq(origin, box.lo, box.hi, box.dim()) <= radius * radius,
            "make_bar_mu: box must lie inside B_{10 diam}(0)");
    if (scale == 0.0) return mu;
    const double rho = scale / ball_volume(box.dim(), radius);
    return sum(mu, RadonMeasure::uniform(box, rho, "lebesgue")).with_label("bar(" + mu.label() + ")");
}

}  // namespace nlpot
