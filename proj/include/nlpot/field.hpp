#pragma once

#include <vector>

#include "nlpot/common.hpp"

namespace nlpot {

/// Extended-real nodal values on a grid. +∞ is carried as IEEE +inf and only
/// arises at finitely many nodes (atom locations).
struct ScalarField {
    Grid grid;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(Grid g, double fill = 0.0) : grid(std::move(g)), values(grid.node_count(), fill) {}
    ScalarField(Grid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
        require(values.size() == grid.node_count(), "field needs one value per node");
    }

    template <typename F>
    static ScalarField sample(const Grid& g, F&& f) {
        ScalarField out(g);
        for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] = f(g.node(k));
        return out;
    }

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t k) { return values[k]; }
    double operator[](std::size_t k) const { return values[k]; }
    double at(const Index& i) const { return values[grid.node_linear(i)]; }

    double max() const {
        double m = -kInf;
        for (double v : values) m = std::max(m, v);
        return m;
    }
    double min() const {
        double m = kInf;
        for (double v : values) m = std::min(m, v);
        return m;
    }
    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
    /// Σ value · dual-cell volume over all nodes (trapezoidal integral).
    double integral() const {
        double s = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) s += values[k] * grid.dual_volume(grid.node_index(k));
        return s;
    }
};

inline ScalarField operator+(const ScalarField& a, const ScalarField& b) {
    require(a.grid == b.grid, "field grids differ");
    ScalarField out = a;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += b[k];
    return out;
}

inline ScalarField operator*(double c, const ScalarField& a) {
    ScalarField out = a;
    for (auto& v : out.values) v = (v == kInf && c == 0.0) ? 0.0 : c * v;
    return out;
}

inline double max_abs_diff(const ScalarField& a, const ScalarField& b) {
    require(a.grid == b.grid, "field grids differ");
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace nlpot
