#pragma once

// Monotone Picard scheme for -Δ_p u = H_l(u) + μ and the constants that control
// it: the smallness threshold M, the pair (δ₀, C₁) and the absorption check
// W[H_l(2K W[μ̄])] <= W[μ̄].

#include <optional>
#include <string>
#include <vector>

#include "nlpot/pde.hpp"
#include "nlpot/potential.hpp"
#include "nlpot/reaction.hpp"
#include "nlpot/report.hpp"

namespace nlpot {

struct IterationConfig {
    int N = 2;
    double p = 2.0;
    int l = 2;
    double K = 1.0;
    double delta0 = 0.5;
    double C1 = 1.0;
    int maxIter = 200;
    /// Defaults to 1e-8 · (1 + sup u₀).
    std::optional<double> tolSup;
    double blowupFactor = 1e6;
    double capSlackFraction = 0.1;
    /// Wolff truncation R; defaults to 2 · diam(box).
    std::optional<double> R;
    /// Use scale 1 for the Lebesgue part of μ̄ instead of M.
    bool lemmaScale = false;
    double absorptionTol = 0.05;

    void validate() const {
        require(N >= 2 && N <= kMaxDim, "dimension N out of range");
        require(p >= 2.0 && p <= N, "p must lie in [2, N]");
        require(l >= 1 && l > p - 1.0, "reaction cutoff needs l > p - 1");
        require(std::isfinite(K) && K > 0.0, "K must be > 0");
        require(std::isfinite(delta0) && delta0 > 0.0, "delta0 must be > 0");
        require(std::isfinite(C1) && C1 > 0.0, "C1 must be > 0");
        require(maxIter >= 1, "maxIter must be >= 1");
        require(!tolSup || *tolSup > 0.0, "tolSup must be > 0");
        require(blowupFactor > 1.0, "blowupFactor must be > 1");
        require(capSlackFraction >= 0.0, "capSlackFraction must be >= 0");
        require(!R || *R > 0.0, "R must be > 0");
    }

    /// W_{N/p, p}^R.
    WolffParams wolff(const Box& box) const { return {N / p, p, R.value_or(2.0 * box.diameter())}; }
};

/// M = min{(δ₀/2K)^{2(p-1)l/(l-p+1)}, C₁^{-2(p-1)²/(l-p+1)}}.
inline double smallness_M(const IterationConfig& cfg) {
    require(cfg.l > cfg.p - 1.0, "smallness_M needs l > p - 1");
    require(cfg.K > 0.0 && cfg.delta0 > 0.0 && cfg.C1 > 0.0, "smallness_M needs K, delta0, C1 > 0");
    const double gap = cfg.l - cfg.p + 1.0;
    const double a = std::pow(cfg.delta0 / (2.0 * cfg.K), 2.0 * (cfg.p - 1.0) * cfg.l / gap);
    const double b = std::pow(cfg.C1, -2.0 * (cfg.p - 1.0) * (cfg.p - 1.0) / gap);
    return std::min(a, b);
}

struct PotentialConstants {
    double delta0 = 0.0;
    double C1 = 0.0;
    int dyadicExponent = 0;  // δ₀ = 2^{-k}
};

namespace detail {

// C₁ needed by one measure at exponent δ, or +∞ when exp(δ W[μ̄]) is not integrable.
inline double required_C1(const ScalarField& wbar, double delta, const WolffParams& params, const WolffOptions& opt) {
    ScalarField f = wbar;
    for (auto& v : f.values) v = v == kInf ? kInf : std::exp(delta * v);
    ScalarField wf;
    try {
        wf = wolff_of_field(f, params, wbar.grid, opt);
    } catch (const NumericalFailure&) {
        return kInf;
    }
    double c = wf.max();
    for (std::size_t k = 0; k < wf.size(); ++k)
        if (std::isfinite(wbar[k]) && wbar[k] > 0.0) c = std::max(c, wf[k] / wbar[k]);
    return std::isfinite(c) ? c : kInf;
}

}  // namespace detail

/// Largest dyadic δ₀ = 2^{-k}, 0 <= k <= 20, for which exp(δ₀ W[μ̄]) has a
/// finite Wolff potential for every suite member, with the smallest C₁ such
/// that sup W[exp(δ₀ W[μ̄])] <= C₁ and W[exp(δ₀ W[μ̄])] <= C₁ W[μ̄] on the grid.
/// μ̄ carries the unit Lebesgue part.
inline PotentialConstants estimate_constants(const std::vector<RadonMeasure>& suite, const Grid& grid,
                                             const WolffParams& params, const WolffOptions& opt = {}) {
    require(!suite.empty(), "estimate_constants needs at least one measure");
    std::vector<ScalarField> wbar;
    for (const auto& m : suite) {
        require(total_mass(m) <= 1.0 + 1e-12, "estimate_constants: suite measures must have total mass <= 1");
        wbar.push_back(wolff_field(make_bar_mu(m, 1.0, grid.box()), params, grid, opt));
    }
    auto c1_at = [&](int k) {
        const double delta = std::ldexp(1.0, -k);
        double c = 0.0;
        for (const auto& w : wbar) {
            c = std::max(c, detail::required_C1(w, delta, params, opt));
            if (!std::isfinite(c)) break;
        }
        return c;
    };
    constexpr int kMax = 20;
    double c = c1_at(0);
    if (std::isfinite(c)) return {1.0, c, 0};
    double cHi = c1_at(kMax);
    if (!std::isfinite(cHi))
        throw NumericalFailure("estimate_constants: no delta0 >= 2^-20 passes; check the suite normalization");
    int lo = 0, hi = kMax;  // lo fails, hi passes
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        const double cm = c1_at(mid);
        if (std::isfinite(cm)) {
            hi = mid;
            cHi = cm;
        } else {
            lo = mid;
        }
    }
    return {std::ldexp(1.0, -hi), cHi, hi};
}

/// Builds μ̄ for the iteration: Lebesgue part of scale M (or 1 in lemma mode).
inline RadonMeasure iteration_bar_mu(const RadonMeasure& mu, const IterationConfig& cfg, const Box& box) {
    return make_bar_mu(mu, cfg.lemmaScale ? 1.0 : smallness_M(cfg), box);
}

/// Checks W[H_l(2K W[μ̄])] <= W[μ̄] on the nodes where W[μ̄] is finite and reports
/// the largest ratio of the two sides.
inline VerificationReport check_absorption(const RadonMeasure& mu, const IterationConfig& cfg, const Grid& grid,
                                           const WolffOptions& opt = {}) {
    cfg.validate();
    require(grid.dim() == cfg.N && mu.dim() == cfg.N, "check_absorption: dimension mismatch");
    const double M = smallness_M(cfg);
    const WolffParams params = cfg.wolff(grid.box());
    const ScalarField wbar = wolff_field(iteration_bar_mu(mu, cfg, grid.box()), params, grid, opt);
    const ScalarField reaction = reaction::h_l_applied(reaction::ReactionParams(cfg.l), 2.0 * cfg.K * wbar);
    VerificationReport rep;
    ScalarField left;
    try {
        left = wolff_of_field(reaction, params, grid, opt);
    } catch (const NumericalFailure& e) {
        // H_l(2K W[μ̄]) is not integrable near an atom: the left side is +∞.
        left = ScalarField(grid, kInf);
        rep.notes.push_back(e.what());
    }
    double ratio = 0.0;
    for (std::size_t k = 0; k < wbar.size(); ++k) {
        if (!std::isfinite(wbar[k])) continue;
        const double r = wbar[k] > 0.0 ? left[k] / wbar[k] : (left[k] > 0.0 ? kInf : 0.0);
        ratio = std::max(ratio, r);
    }
    rep.lemmaName = "absorption";
    rep.inputs = "N=" + std::to_string(cfg.N) + ", p=" + std::to_string(cfg.p) + ", l=" + std::to_string(cfg.l) +
                 ", measure=" + mu.label();
    rep.add("M", M);
    rep.add("mass", total_mass(mu));
    rep.add("mass_over_M", total_mass(mu) / M);
    rep.add("max_ratio", ratio);
    rep.add("max_left", left.max());
    if (total_mass(mu) > M * (1.0 + 1e-12)) rep.notes.push_back("total mass exceeds M; the inequality is not claimed");
    rep.boundName = "1";
    rep.decide(ratio, 1.0, cfg.absorptionTol);
    return rep;
}

enum class IterationOutcome { Converged, Diverged, MaxIterReached };

inline std::string to_string(IterationOutcome o) {
    switch (o) {
        case IterationOutcome::Converged: return "converged";
        case IterationOutcome::Diverged: return "diverged";
        default: return "maxIterReached";
    }
}

struct IterationStep {
    int m = 0;
    double supIncrement = 0.0;  // max |u_{m+1} - u_m|
    double minIncrement = 0.0;  // min (u_{m+1} - u_m)
    double reactionL1 = 0.0;    // ‖H_l(u_m)‖_{L¹}
    double reactionL1Change = 0.0;
    double capMargin = 0.0;  // min (cap + slack - u_{m+1}); negative when violated
    int solverIterations = 0;
};

struct IterationTrace {
    std::vector<IterationStep> steps;
    IterationOutcome outcome = IterationOutcome::MaxIterReached;
    double M = 0.0;
    double tolSup = 0.0;
    double capSlack = 0.0;
    bool capViolated = false;
    std::string reason;
};

struct IterationResult {
    ScalarField u;
    IterationTrace trace;
    ScalarField cap;  // 2K W[μ̄]
};

/// u₀ solves -Δ_p u₀ = μ; then -Δ_p u_{m+1} = H_l(u_m) + μ until the sup
/// increment drops below tolSup (converged), ‖H_l(u_m)‖_{L¹} exceeds
/// blowupFactor times its initial value or leaves the doubles (diverged), or
/// maxIter is reached. A monotonicity failure throws InvariantViolation; so does
/// a cap failure when μ(Ω) <= M, where the cap is a theorem.
inline IterationResult picard_solve(const RadonMeasure& mu, const IterationConfig& cfg, const Grid& grid,
                                    const WolffOptions& opt = {}, const SolveOptions& solveOpt = {}) {
    cfg.validate();
    require(grid.dim() == cfg.N && mu.dim() == cfg.N, "picard_solve: dimension mismatch");
    const reaction::ReactionParams rp(cfg.l);
    PlaplaceSolver solver(grid, cfg.p, solveOpt);
    const ScalarField rhsMu = mollify_rhs(mu, grid);

    IterationResult res;
    IterationTrace& tr = res.trace;
    tr.M = smallness_M(cfg);
    const bool capIsTheorem = total_mass(mu) <= tr.M * (1.0 + 1e-12);
    res.cap = 2.0 * cfg.K * wolff_field(iteration_bar_mu(mu, cfg, grid.box()), cfg.wolff(grid.box()), grid, opt);
    {
        std::vector<double> finite;
        for (double v : res.cap.values)
            if (std::isfinite(v)) finite.push_back(v);
        std::nth_element(finite.begin(), finite.begin() + finite.size() / 2, finite.end());
        tr.capSlack = finite.empty() ? 0.0 : cfg.capSlackFraction * finite[finite.size() / 2];
    }

    Solution s = solver.solve(rhsMu);
    ScalarField u = s.u;
    tr.tolSup = cfg.tolSup.value_or(1e-8 * (1.0 + u.max()));

    auto cap_margin = [&](const ScalarField& v) {
        double m = kInf;
        for (std::size_t k = 0; k < v.size(); ++k)
            if (std::isfinite(res.cap[k])) m = std::min(m, res.cap[k] + tr.capSlack - v[k]);
        return m;
    };
    if (cap_margin(u) < 0.0) {
        tr.capViolated = true;
        if (capIsTheorem) throw InvariantViolation("picard_solve: u_0 exceeds the cap 2K W[bar mu]");
    }

    ScalarField reaction = reaction::h_l_applied(rp, u);
    double l1First = reaction.integral();
    tr.outcome = IterationOutcome::MaxIterReached;
    for (int m = 0; m < cfg.maxIter; ++m) {
        IterationStep st;
        st.m = m;
        st.reactionL1 = reaction.integral();
        if (!reaction.all_finite() || !std::isfinite(st.reactionL1) ||
            (l1First > 0.0 && st.reactionL1 > cfg.blowupFactor * l1First)) {
            tr.outcome = IterationOutcome::Diverged;
            tr.reason = "reaction L1 norm blew up";
            break;
        }
        Solution next;
        try {
            next = solver.solve(reaction + rhsMu, cfg.p == 2.0 ? nullptr : &u);
        } catch (const NumericalFailure& e) {
            tr.outcome = IterationOutcome::Diverged;
            tr.reason = std::string("solver failure: ") + e.what();
            break;
        }
        const ScalarField& un = next.u;
        st.solverIterations = next.report.iterations;
        st.supIncrement = 0.0;
        st.minIncrement = kInf;
        for (std::size_t k = 0; k < un.size(); ++k) {
            const double d = un[k] - u[k];
            st.supIncrement = std::max(st.supIncrement, std::abs(d));
            st.minIncrement = std::min(st.minIncrement, d);
        }
        st.capMargin = cap_margin(un);
        const ScalarField reactionNext = reaction::h_l_applied(rp, un);
        st.reactionL1Change = 0.0;
        for (std::size_t k = 0; k < un.size(); ++k)
            st.reactionL1Change += std::abs(reactionNext[k] - reaction[k]) * grid.dual_volume(grid.node_index(k));
        tr.steps.push_back(st);

        if (st.minIncrement < -tr.tolSup)
            throw InvariantViolation("picard_solve: iterates decreased by " + std::to_string(-st.minIncrement) +
                                     " at step " + std::to_string(m));
        if (st.capMargin < 0.0) {
            tr.capViolated = true;
            if (capIsTheorem)
                throw InvariantViolation("picard_solve: u_" + std::to_string(m + 1) +
                                         " exceeds the cap by " + std::to_string(-st.capMargin));
        }
        u = un;
        reaction = reactionNext;
        if (l1First == 0.0) l1First = st.reactionL1;
        if (st.supIncrement < tr.tolSup) {
            tr.outcome = IterationOutcome::Converged;
            break;
        }
    }
    if (tr.outcome == IterationOutcome::MaxIterReached) tr.reason = "maxIter reached";
    res.u = std::move(u);
    return res;
}

/// Empirical (K₂, b) with u <= 2K₂ W^{2 diam}_{1,2}[μ] + b: K₂ is half the
/// least-squares slope of u against W over the upper quartile of W (nodes
/// closer than `exclusionRadius` to an atom skipped), and b the smallest
/// offset making the bound hold on all non-excluded nodes.
inline VerificationReport fit_hessian_bound(const ScalarField& u, const RadonMeasure& mu, double exclusionRadius,
                                            const WolffOptions& opt = {}) {
    const Grid& g = u.grid;
    require(g.dim() == 2, "the k = 1 Hessian coincidence is a two-dimensional statement");
    const ScalarField w = wolff_field(mu, WolffParams::hessian(1, 2.0 * g.box().diameter()), g, opt);
    std::vector<std::size_t> keep;
    for (std::size_t k = 0; k < g.node_count(); ++k) {
        if (g.is_boundary_node(g.node_index(k)) || !std::isfinite(w[k])) continue;
        bool near = false;
        const Point x = g.node(k);
        for (const auto& a : mu.atoms())
            if (a.mass > 0.0 && distance(a.location, x) < exclusionRadius) near = true;
        if (!near) keep.push_back(k);
    }
    require(!keep.empty(), "fit_hessian_bound: no nodes left after exclusion");
    std::vector<double> ws;
    for (auto k : keep) ws.push_back(w[k]);
    std::nth_element(ws.begin(), ws.begin() + (3 * ws.size()) / 4, ws.end());
    const double q3 = ws[(3 * ws.size()) / 4];
    double sw = 0.0, su = 0.0, sww = 0.0, swu = 0.0;
    std::size_t n = 0;
    for (auto k : keep) {
        if (w[k] < q3) continue;
        sw += w[k];
        su += u[k];
        sww += w[k] * w[k];
        swu += w[k] * u[k];
        ++n;
    }
    const double denom = n * sww - sw * sw;
    const double slope = denom > 0.0 ? (n * swu - sw * su) / denom : (sw > 0.0 ? su / sw : 0.0);
    const double k2 = 0.5 * std::max(slope, 0.0);
    double b = -kInf;
    for (auto k : keep) b = std::max(b, u[k] - 2.0 * k2 * w[k]);
    VerificationReport rep;
    rep.lemmaName = "hessian-coincidence";
    rep.inputs = "k=1, N=2, measure=" + mu.label() + ", nodes=" + std::to_string(keep.size());
    rep.add("K2", k2);
    rep.add("b", b);
    rep.add("exclusion_radius", exclusionRadius);
    rep.boundName = "finite";
    rep.bound = kInf;
    rep.passed = std::isfinite(k2) && std::isfinite(b);
    rep.margin = rep.passed ? kInf : -kInf;
    return rep;
}

}  // namespace nlpot
