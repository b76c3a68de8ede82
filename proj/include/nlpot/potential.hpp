#pragma once

// Truncated Wolff potentials
//   W_{α,s}^T[μ](x) = ∫_0^T (μ(B̄_t(x)) / t^{N-αs})^{1/(s-1)} dt/t
// and the centred maximal function.
//
// Quadrature runs in τ = ln t on K equal cells of [ln t_min, ln T]. Inside a
// cell the density part of μ(B̄_t) is frozen at the cell midpoint while the atom
// part is kept exact: the cell is split at every atom distance and each piece
// integrates e^{-βτ} in closed form. Purely atomic measures are therefore
// integrated exactly, down to t = 0.

#include <span>
#include <vector>

#include "nlpot/ball_mass_fft.hpp"
#include "nlpot/field.hpp"
#include "nlpot/measure.hpp"

namespace nlpot {

struct WolffParams {
    double alpha = 1.0;
    double s = 2.0;
    double T = 1.0;

    /// W_{1,p}^T, the p-Laplace potential.
    static WolffParams p_laplace(double p, double T) { return {1.0, p, T}; }
    /// W_{2k/(k+1), k+1}^T, the k-Hessian potential.
    static WolffParams hessian(int k, double T) {
        require(k >= 1, "hessian preset needs k >= 1");
        return {2.0 * k / (k + 1.0), k + 1.0, T};
    }

    double exponent() const { return 1.0 / (s - 1.0); }

    void validate(int n) const {
        require(std::isfinite(s) && s > 1.0, "Wolff parameter s must be > 1");
        require(std::isfinite(alpha) && alpha >= 0.0, "Wolff parameter alpha must be >= 0");
        require(alpha * s <= n * (1.0 + 1e-12), "Wolff parameters need alpha*s <= N");
        require(std::isfinite(T) && T > 0.0, "Wolff truncation T must be > 0");
    }
};

struct WolffOptions {
    int nodes = 4096;          // τ-cells on [ln t_min, ln T]
    double tminFactor = 1e-6;  // t_min = tminFactor · T
    unsigned threads = 0;      // 0 = hardware concurrency
};

struct WolffEvaluation {
    double value = 0.0;
    /// Upper bound for the omitted ∫_0^{t_min} of the density part.
    double tailBound = 0.0;
};

namespace detail {

class WolffRule {
public:
    WolffRule(const WolffParams& p, int n, const WolffOptions& o) : dim_(n) {
        p.validate(n);
        require(o.nodes >= 1, "Wolff quadrature needs at least one node");
        require(o.tminFactor > 0.0 && o.tminFactor < 1.0, "tminFactor must lie in (0, 1)");
        q_ = p.exponent();
        as_ = std::min(p.alpha * p.s, static_cast<double>(n));
        beta_ = (n - as_) * q_;
        cells_ = o.nodes;
        tmin_ = o.tminFactor * p.T;
        tau0_ = std::log(tmin_);
        tauT_ = std::log(p.T);
        dtau_ = (tauT_ - tau0_) / cells_;
        full_.resize(cells_);
        for (int k = 0; k < cells_; ++k) full_[k] = weight(tau(k), tau(k + 1));
    }

    int cells() const { return cells_; }
    double tau0() const { return tau0_; }
    double tauT() const { return tauT_; }
    double tau(int k) const { return k == cells_ ? tauT_ : tau0_ + k * dtau_; }
    double t_mid(int k) const { return std::exp(tau0_ + (k + 0.5) * dtau_); }

    /// ∫_a^b e^{-βτ} dτ.
    double weight(double a, double b) const {
        if (b <= a) return 0.0;
        if (beta_ == 0.0) return b - a;
        return std::exp(-beta_ * a) * -std::expm1(-beta_ * (b - a)) / beta_;
    }
    /// weight over the whole cell k.
    double cell_weight(int k) const { return full_[k]; }
    double power(double mass) const {
        if (mass <= 0.0) return 0.0;
        if (q_ == 1.0) return mass;
        if (q_ == 0.5) return std::sqrt(mass);
        return std::pow(mass, q_);
    }

    double tail_bound(double rho) const {
        if (rho <= 0.0) return 0.0;
        if (as_ == 0.0) return kInf;
        const double e = as_ * q_;
        return std::pow(rho * unit_ball_volume(dim_), q_) * std::pow(tmin_, e) / e;
    }

private:
    int dim_;
    double q_, as_, beta_;
    int cells_;
    double tmin_, tau0_, tauT_, dtau_;
    std::vector<double> full_;
};

// Running state of one evaluation point: atoms sorted by log-distance are
// consumed as τ sweeps upward.
struct WolffState {
    std::size_t cursor = 0;
    double atomMass = 0.0;
    double value = 0.0;
    bool infinite = false;

    // Integrates the atom-only part exactly up to τ = cutoff.
    void begin(const WolffRule& rule, const double* logd, const double* mass, std::size_t n, double cutoff) {
        while (cursor < n && logd[cursor] == -kInf) {
            infinite = true;
            atomMass += mass[cursor++];
        }
        if (infinite) return;
        while (cursor < n && logd[cursor] < cutoff) {
            atomMass += mass[cursor];
            const double a = logd[cursor++];
            const double b = cursor < n ? std::min(logd[cursor], cutoff) : cutoff;
            value += rule.power(atomMass) * rule.weight(a, b);
        }
    }

    // τ-cell k with density ball mass `density` frozen at its midpoint.
    void step(const WolffRule& rule, int k, double density, const double* logd, const double* mass, std::size_t n) {
        if (infinite) return;
        const double b = rule.tau(k + 1);
        if (cursor == n || logd[cursor] >= b) {
            const double mass = atomMass + density;
            if (mass > 0.0) value += rule.power(mass) * rule.cell_weight(k);
            return;
        }
        double a = rule.tau(k);
        while (cursor < n && logd[cursor] < b) {
            const double c = logd[cursor];
            value += rule.power(atomMass + density) * rule.weight(a, c);
            atomMass += mass[cursor++];
            a = c;
        }
        value += rule.power(atomMass + density) * rule.weight(a, b);
    }
};

// Largest density among the cells whose closed box contains x.
inline double local_density(const GridDensity& d, const Point& x) {
    const Grid& g = d.grid;
    if (!g.box().contains(x)) return 0.0;
    Index lo{}, hi{};
    for (int a = 0; a < g.dim(); ++a) {
        const double u = (x[a] - g.box().lo[a]) / g.spacing(a);
        const int c = static_cast<int>(std::floor(u));
        lo[a] = std::clamp(u == c ? c - 1 : c, 0, g.cells(a) - 1);
        hi[a] = std::clamp(c, 0, g.cells(a) - 1) + 1;
    }
    double m = 0.0;
    for_each_index(g.dim(), lo, hi, [&](const Index& i) { m = std::max(m, d.values[g.cell_linear(i)]); });
    return m;
}

// Adds `layer` refined onto the cells of `g` if its cells are unions of cells of
// g; returns false (leaving `fine` untouched) otherwise.
inline bool refine_onto(const GridDensity& layer, const Grid& g, std::vector<double>& fine) {
    const Grid& lg = layer.grid;
    if (lg.dim() != g.dim()) return false;
    Index ratio{}, offset{};
    for (int a = 0; a < g.dim(); ++a) {
        const double r = lg.spacing(a) / g.spacing(a);
        const double o = (lg.box().lo[a] - g.box().lo[a]) / g.spacing(a);
        const long ri = std::lround(r), oi = std::lround(o);
        if (ri < 1 || std::abs(r - ri) > 1e-9 * r || std::abs(o - oi) > 1e-9 * (1.0 + std::abs(o))) return false;
        if (oi < 0 || oi + ri * lg.cells(a) > g.cells(a)) return false;
        ratio[a] = static_cast<int>(ri);
        offset[a] = static_cast<int>(oi);
    }
    for (std::size_t c = 0; c < g.cell_count(); ++c) {
        Index i = g.cell_index(c);
        Index j{};
        bool inside = true;
        for (int a = 0; a < g.dim(); ++a) {
            const int k = i[a] - offset[a];
            if (k < 0 || k >= ratio[a] * lg.cells(a)) {
                inside = false;
                break;
            }
            j[a] = k / ratio[a];
        }
        if (inside) fine[c] += layer.values[lg.cell_linear(j)];
    }
    return true;
}

// Shared evaluator. When `nodeGrid` is given, `points` are its nodes and density
// layers aligned with it go through the FFT correlator.
inline std::vector<WolffEvaluation> wolff_engine(const RadonMeasure& m, const WolffParams& params,
                                                 const std::vector<Point>& points, const Grid* nodeGrid,
                                                 const WolffOptions& opt) {
    const int n = m.dim();
    const WolffRule rule(params, n, opt);
    const std::size_t np = points.size();
    const unsigned threads = resolve_threads(opt.threads);

    std::vector<const Atom*> atoms;
    for (const auto& a : m.atoms())
        if (a.mass > 0.0) atoms.push_back(&a);
    const std::size_t na = atoms.size();

    std::vector<double> logd(np * na), amass(np * na);
    parallel_for(np, threads, [&](std::size_t i) {
        std::vector<std::pair<double, double>> v(na);
        for (std::size_t j = 0; j < na; ++j)
            v[j] = {0.5 * std::log(distance_sq(points[i], atoms[j]->location)), atoms[j]->mass};
        std::sort(v.begin(), v.end());
        for (std::size_t j = 0; j < na; ++j) {
            logd[i * na + j] = v[j].first;
            amass[i * na + j] = v[j].second;
        }
    });

    std::vector<double> fine;
    std::vector<const GridDensity*> direct;
    for (const auto& l : m.layers()) {
        if (l.max_value() <= 0.0) continue;
        if (nodeGrid) {
            if (fine.empty()) fine.assign(nodeGrid->cell_count(), 0.0);
            if (refine_onto(l, *nodeGrid, fine)) continue;
        }
        direct.push_back(&l);
    }
    const bool useFine = !fine.empty() && *std::max_element(fine.begin(), fine.end()) > 0.0;
    const bool hasDensity = useFine || !direct.empty();

    std::vector<WolffState> state(np);
    std::vector<WolffEvaluation> out(np);
    parallel_for(np, threads, [&](std::size_t i) {
        state[i].begin(rule, &logd[i * na], &amass[i * na], na, hasDensity ? rule.tau0() : rule.tauT());
        double rho = 0.0;
        for (const auto& l : m.layers()) rho += local_density(l, points[i]);
        out[i].tailBound = hasDensity ? rule.tail_bound(rho) : 0.0;
    });

    if (hasDensity) {
        std::unique_ptr<BallMassCorrelator> corr;
        std::vector<BallMassCorrelator::Workspace> ws;
        const std::size_t batch = std::max<std::size_t>(threads, 16);
        std::vector<double> dfine;
        if (useFine) {
            corr = std::make_unique<BallMassCorrelator>(*nodeGrid, fine);
            for (unsigned w = 0; w < std::min<std::size_t>(threads, batch); ++w) ws.push_back(corr->make_workspace());
            dfine.resize(batch * np);
        }
        for (int k0 = 0; k0 < rule.cells(); k0 += static_cast<int>(batch)) {
            const int kn = std::min<int>(static_cast<int>(batch), rule.cells() - k0);
            if (useFine) {
                parallel_for(ws.size(), static_cast<unsigned>(ws.size()), [&](std::size_t w) {
                    for (int j = static_cast<int>(w); j < kn; j += static_cast<int>(ws.size()))
                        corr->ball_masses(rule.t_mid(k0 + j), ws[w], std::span<double>(&dfine[j * np], np));
                });
            }
            parallel_for(np, threads, [&](std::size_t i) {
                for (int j = 0; j < kn; ++j) {
                    const int k = k0 + j;
                    double d = useFine ? dfine[j * np + i] : 0.0;
                    if (!direct.empty()) {
                        const double t = rule.t_mid(k);
                        for (const GridDensity* l : direct) d += l->ball_mass(points[i], t);
                    }
                    state[i].step(rule, k, d, &logd[i * na], &amass[i * na], na);
                }
            });
        }
    }

    for (std::size_t i = 0; i < np; ++i) {
        const bool inf = state[i].infinite || out[i].tailBound == kInf;
        out[i].value = inf ? kInf : state[i].value;
    }
    return out;
}

}  // namespace detail

inline WolffEvaluation wolff_point_detailed(const RadonMeasure& m, const WolffParams& params, const Point& x,
                                            const WolffOptions& opt = {}) {
    require(x.dim() == m.dim(), "wolff_point: dimension mismatch");
    for (int a = 0; a < x.dim(); ++a) require(std::isfinite(x[a]), "wolff_point: point must be finite");
    WolffOptions o = opt;
    o.threads = 1;
    return detail::wolff_engine(m, params, {x}, nullptr, o).front();
}

inline double wolff_point(const RadonMeasure& m, const WolffParams& params, const Point& x,
                          const WolffOptions& opt = {}) {
    return wolff_point_detailed(m, params, x, opt).value;
}

struct WolffFieldEvaluation {
    ScalarField field;
    double maxTailBound = 0.0;
};

inline WolffFieldEvaluation wolff_field_detailed(const RadonMeasure& m, const WolffParams& params, const Grid& grid,
                                                 const WolffOptions& opt = {}) {
    require(grid.dim() == m.dim(), "wolff_field: dimension mismatch");
    std::vector<Point> pts(grid.node_count());
    for (std::size_t k = 0; k < pts.size(); ++k) pts[k] = grid.node(k);
    auto ev = detail::wolff_engine(m, params, pts, &grid, opt);
    WolffFieldEvaluation out{ScalarField(grid), 0.0};
    for (std::size_t k = 0; k < ev.size(); ++k) {
        out.field[k] = ev[k].value;
        if (std::isfinite(ev[k].value)) out.maxTailBound = std::max(out.maxTailBound, ev[k].tailBound);
    }
    return out;
}

/// W_{α,s}^T[μ] at every node of `grid`; +∞ at nodes carrying an atom.
inline ScalarField wolff_field(const RadonMeasure& m, const WolffParams& params, const Grid& grid,
                               const WolffOptions& opt = {}) {
    return wolff_field_detailed(m, params, grid, opt).field;
}

/// Cell density of the absolutely continuous measure f·dx for a nodal field f.
///
/// Cells without +∞ corners get the mean of their corner values. Around a +∞
/// node z the field is modelled as A|x - z|^{-a}, with a fitted from the finite
/// values one and two steps away along each axis (the worst direction wins);
/// each cell touching z receives its exact mean of that model. a >= N means
/// the singularity is not integrable and is reported as a numerical failure.
inline GridDensity density_from_field(const ScalarField& f) {
    const Grid& g = f.grid;
    const int n = g.dim();
    for (double v : f.values) require(!std::isnan(v) && v >= 0.0, "field density must be >= 0");

    struct Singular {
        double A = 0.0, a = 0.0;
    };
    std::vector<std::pair<std::size_t, Singular>> sing;
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (std::isfinite(f[k])) continue;
        const Index z = g.node_index(k);
        Singular s;
        bool fitted = false;
        double amax = 0.0;
        std::vector<std::pair<double, double>> fits;  // (f1, h)
        for (int ax = 0; ax < n; ++ax) {
            for (int dir : {-1, 1}) {
                Index i1 = z, i2 = z;
                i1[ax] += dir;
                i2[ax] += 2 * dir;
                if (i2[ax] < 0 || i2[ax] > g.cells(ax)) continue;
                const double f1 = f.at(i1), f2 = f.at(i2);
                if (!std::isfinite(f1) || !std::isfinite(f2) || f1 <= 0.0 || f2 <= 0.0) continue;
                amax = std::max(amax, std::log2(f1 / f2));
                fits.emplace_back(f1, g.spacing(ax));
                fitted = true;
            }
        }
        if (!fitted) throw NumericalFailure("density_from_field: cannot fit the profile around an infinite node");
        if (amax >= n)
            throw NumericalFailure("density_from_field: singular profile exponent " + std::to_string(amax) +
                                   " >= N is not integrable");
        s.a = amax;
        for (const auto& [f1, h] : fits) s.A = std::max(s.A, f1 * std::pow(h, amax));
        sing.emplace_back(k, s);
    }

    std::vector<double> rho(g.cell_count(), 0.0);
    std::vector<char> singular(g.cell_count(), 0);
    for (const auto& [k, s] : sing) {
        const Index z = g.node_index(k);
        const Point zp = g.node(z);
        Index lo{}, hi{};
        for (int a = 0; a < n; ++a) {
            lo[a] = std::max(z[a] - 1, 0);
            hi[a] = std::min(z[a] + 1, g.cells(a));
        }
        for_each_index(n, lo, hi, [&](const Index& c) {
            const Box b = g.cell_box(c);
            const std::size_t lc = g.cell_linear(c);
            rho[lc] += s.A * geometry::power_integral_box(zp, s.a, b.lo, b.hi) / g.cell_volume();
            singular[lc] = 1;
        });
    }
    for (std::size_t c = 0; c < g.cell_count(); ++c) {
        if (singular[c]) continue;
        const Index i = g.cell_index(c);
        Index hi{};
        for (int a = 0; a < n; ++a) hi[a] = i[a] + 2;
        double s = 0.0;
        for_each_index(n, i, hi, [&](const Index& v) { s += f.at(v); });
        rho[c] = s / static_cast<double>(1 << n);
    }
    return GridDensity(g, std::move(rho));
}

/// Wolff potential of the measure with density f.
inline ScalarField wolff_of_field(const ScalarField& f, const WolffParams& params, const Grid& grid,
                                  const WolffOptions& opt = {}) {
    return wolff_field(RadonMeasure::density(density_from_field(f), "field"), params, grid, opt);
}

/// Largest distance from x to the support of m.
inline double support_radius(const RadonMeasure& m, const Point& x) {
    double r = 0.0;
    for (const auto& a : m.atoms())
        if (a.mass > 0.0) r = std::max(r, distance(a.location, x));
    for (const auto& l : m.layers())
        if (l.max_value() > 0.0)
            r = std::max(r, std::sqrt(geometry::detail::farthest_sq(x, l.grid.box().lo, l.grid.box().hi, m.dim())));
    return r;
}

/// sup_{0 < r <= rMax} μ(B̄_r(x)) / |B_r|. Candidates are the atom distances and,
/// when a density is present, 1024 log-spaced radii on [1e-6 rMax, rMax]. For
/// purely atomic measures the ratio decreases between atom distances, so the
/// candidate set is exact.
inline double maximal_point(const RadonMeasure& m, const Point& x, double rMax) {
    require(rMax > 0.0, "maximal_point: rMax must be > 0");
    const int n = m.dim();
    std::vector<std::pair<double, double>> atoms;
    for (const auto& a : m.atoms()) {
        if (a.mass <= 0.0) continue;
        const double d = distance(a.location, x);
        if (d == 0.0) return kInf;
        atoms.emplace_back(d, a.mass);
    }
    std::sort(atoms.begin(), atoms.end());
    const bool dens = m.has_density();
    auto density_mass = [&](double r) {
        double s = 0.0;
        for (const auto& l : m.layers()) s += l.ball_mass(x, r);
        return s;
    };
    double best = 0.0;
    double cum = 0.0;
    for (std::size_t j = 0; j < atoms.size(); ++j) {
        cum += atoms[j].second;
        if (j + 1 < atoms.size() && atoms[j + 1].first == atoms[j].first) continue;
        const double r = atoms[j].first;
        if (r > rMax) break;
        best = std::max(best, (cum + (dens ? density_mass(r) : 0.0)) / ball_volume(n, r));
    }
    if (dens) {
        constexpr int scan = 1024;
        const double lo = std::log(1e-6 * rMax), hi = std::log(rMax);
        for (int k = 0; k < scan; ++k) {
            const double r = std::exp(lo + (hi - lo) * k / (scan - 1));
            best = std::max(best, ball_mass(m, x, r) / ball_volume(n, r));
        }
    }
    return best;
}

inline double maximal_point(const RadonMeasure& m, const Point& x) {
    const double r = support_radius(m, x);
    return maximal_point(m, x, r > 0.0 ? r : 1.0);
}

}  // namespace nlpot
