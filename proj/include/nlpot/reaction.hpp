#pragma once

// Exponential remainder H_l(r) = e^r - Σ_{j<l} r^j/j! and the structural
// inequalities the fixed-point argument relies on.

#include <cmath>

#include "nlpot/common.hpp"
#include "nlpot/field.hpp"

namespace nlpot::reaction {

struct ReactionParams {
    int l = 1;

    ReactionParams() = default;
    explicit ReactionParams(int cutoff) : l(cutoff) { require(l >= 1, "reaction cutoff l must be >= 1"); }
};

/// Σ_{j>=l} r^j/j! summed forward; accurate when r < l (no cancellation).
inline double h_l_series(int l, double r) {
    if (r == 0.0) return 0.0;
    double term = 1.0;
    for (int j = 1; j <= l; ++j) term *= r / j;
    double sum = term;
    for (int j = l + 1; term >= 1e-18 * sum; ++j) {
        term *= r / j;
        sum += term;
        if (j > l + 10000) break;
    }
    return sum;
}

/// e^r minus the Neumaier-compensated partial sum Σ_{j<l} r^j/j!.
inline double h_l_subtract(int l, double r) {
    double s = 0.0, comp = 0.0, term = 1.0;
    for (int j = 0; j < l; ++j) {
        if (j > 0) term *= r / j;
        double t = s + term;
        comp += std::abs(s) >= std::abs(term) ? (s - t) + term : (term - t) + s;
        s = t;
    }
    double e = std::exp(r);
    if (!std::isfinite(e)) return kInf;
    return std::max((e - s) - comp, 0.0);
}

/// H_l(r) for r >= 0 (r = +∞ maps to +∞).
inline double h_l(const ReactionParams& p, double r) {
    require(!std::isnan(r) && r >= 0.0, "h_l: argument must be >= 0");
    if (r == kInf) return kInf;
    return r < p.l ? h_l_series(p.l, r) : h_l_subtract(p.l, r);
}

/// log H_l(r), finite even where H_l(r) overflows a double.
inline double log_h_l(const ReactionParams& p, double r) {
    if (r == 0.0) return -kInf;
    if (r == kInf) return kInf;
    double h = h_l(p, r);
    if (std::isfinite(h) && h > 0.0) return std::log(h);
    // log(e^r - P) = r + log1p(-P e^{-r}), P the partial sum.
    double pe = 0.0;
    for (int j = 0; j < p.l; ++j) pe += std::exp(j * std::log(r) - std::lgamma(j + 1.0) - r);
    return r + std::log1p(-pe);
}

inline ScalarField h_l_applied(const ReactionParams& p, const ScalarField& f) {
    ScalarField out = f;
    for (auto& v : out.values) v = h_l(p, v);
    return out;
}

struct ThetaScaling {
    bool holds = true;
    /// H_l(t/θ) θ^l / H_l(t); 1 when t = 0.
    double ratio = 1.0;
};

/// Checks θ^{-l} H_l(t) <= H_l(t/θ) for 0 < θ <= 1, t >= 0, in log space so
/// overflow on either side cannot flip the comparison.
inline ThetaScaling check_theta_scaling(const ReactionParams& p, double theta, double t) {
    require(theta > 0.0 && theta <= 1.0, "theta must lie in (0, 1]");
    require(t >= 0.0, "t must be >= 0");
    if (t == 0.0) return {};
    const double log_ratio = log_h_l(p, t / theta) + p.l * std::log(theta) - log_h_l(p, t);
    return {log_ratio >= -1e-12, std::exp(log_ratio)};
}

}  // namespace nlpot::reaction
