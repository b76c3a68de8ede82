#pragma once

// Dirichlet problem -Δ_p u = ν on a box, u = 0 on the boundary, 2 <= p <= N.
//
// Unknowns live on interior nodes. The discrete energy is
//   J(u) = Σ_cells |c| (q_c + ε²)^{p/2} / p - Σ_nodes u_i m_i,
// where q_c is the squared gradient built from the cell's edge differences
// (each axis averaged over its 2^{N-1} parallel edges) and m_i the node mass.
// At p = 2 the Euler-Lagrange system is exactly the (2N+1)-point Laplacian.

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <optional>

#include "nlpot/field.hpp"
#include "nlpot/measure.hpp"
#include "nlpot/potential.hpp"
#include "nlpot/report.hpp"

namespace nlpot {

/// Nodal density (mass per dual-cell volume) approximating m on the grid.
/// Atoms spread to the 2^N surrounding nodes with multilinear weights; density
/// layers contribute their exact mass inside each node's dual cell. Σ value ·
/// dual_volume reproduces total_mass(m).
inline ScalarField mollify_rhs(const RadonMeasure& m, const Grid& grid) {
    require(m.dim() == grid.dim(), "mollify_rhs: dimension mismatch");
    const int n = grid.dim();
    const Box& box = grid.box();
    std::vector<double> mass(grid.node_count(), 0.0);
    for (const auto& a : m.atoms()) {
        require(box.contains(a.location, 1e-12 * box.diameter()), "mollify_rhs: atom outside the grid box");
        Index base{};
        double frac[kMaxDim];
        for (int ax = 0; ax < n; ++ax) {
            const double u = std::clamp((a.location[ax] - box.lo[ax]) / grid.spacing(ax), 0.0,
                                        static_cast<double>(grid.cells(ax)));
            int c = std::min(static_cast<int>(std::floor(u)), grid.cells(ax) - 1);
            base[ax] = c;
            frac[ax] = u - c;
        }
        for (int corner = 0; corner < (1 << n); ++corner) {
            Index i = base;
            double w = 1.0;
            for (int ax = 0; ax < n; ++ax) {
                const bool up = corner >> ax & 1;
                i[ax] += up;
                w *= up ? frac[ax] : 1.0 - frac[ax];
            }
            if (w != 0.0) mass[grid.node_linear(i)] += w * a.mass;
        }
    }
    for (const auto& l : m.layers()) {
        if (l.max_value() <= 0.0) continue;
        require(box.contains(l.grid.box(), 1e-12 * box.diameter()), "mollify_rhs: density layer outside the grid box");
        for (std::size_t k = 0; k < mass.size(); ++k) {
            const Index i = grid.node_index(k);
            const Point x = grid.node(i);
            Point lo(n), hi(n);
            for (int ax = 0; ax < n; ++ax) {
                lo[ax] = std::max(x[ax] - 0.5 * grid.spacing(ax), box.lo[ax]);
                hi[ax] = std::min(x[ax] + 0.5 * grid.spacing(ax), box.hi[ax]);
            }
            mass[k] += l.box_mass(lo, hi);
        }
    }
    ScalarField out(grid);
    for (std::size_t k = 0; k < mass.size(); ++k) out[k] = mass[k] / grid.dual_volume(grid.node_index(k));
    return out;
}

struct PdeProblem {
    Grid grid;
    double p = 2.0;
    /// Nodal density of the right-hand side.
    ScalarField rhs;

    static PdeProblem from_measure(const RadonMeasure& m, const Grid& g, double p) {
        return {g, p, mollify_rhs(m, g)};
    }
    static PdeProblem from_density(ScalarField rhs, double p) {
        Grid g = rhs.grid;
        return {g, p, std::move(rhs)};
    }
};

struct SolveOptions {
    double tol = 1e-10;       // relative gradient norm ‖∇J‖ / ‖m‖
    int maxIterations = 200;  // Newton steps (p > 2)
    double eps = 1e-10;       // gradient regularization
};

struct SolveReport {
    int iterations = 0;
    double residualNorm = 0.0;
    double energy = 0.0;
    double regularizationEps = 0.0;
    std::vector<double> energyHistory;
};

struct Solution {
    ScalarField u;
    SolveReport report;
};

/// Solver bound to one grid and exponent. At p = 2 the factorized Laplacian is
/// cached, so repeated right-hand sides cost one back-substitution each.
class PlaplaceSolver {
public:
    using SpMat = Eigen::SparseMatrix<double>;
    using Vec = Eigen::VectorXd;

    PlaplaceSolver(Grid grid, double p, SolveOptions opt = {}) : grid_(std::move(grid)), p_(p), opt_(opt) {
        const int n = grid_.dim();
        require(p_ >= 2.0 && p_ <= n, "p must lie in [2, N]");
        require(opt_.tol > 0.0, "solver tolerance must be > 0");
        require(opt_.eps > 0.0, "regularization eps must be > 0");
        for (int a = 0; a < n; ++a) require(grid_.cells(a) >= 2, "grid needs an interior node on every axis");

        unknown_.assign(grid_.node_count(), -1);
        for (std::size_t k = 0; k < grid_.node_count(); ++k)
            if (!grid_.is_boundary_node(grid_.node_index(k))) {
                unknown_[k] = static_cast<int>(nodes_.size());
                nodes_.push_back(k);
            }
        build_local_form();
        build_cells();
        laplace_ = assemble(Vec::Zero(static_cast<Eigen::Index>(nodes_.size())), true);
        poisson_.compute(laplace_);
        if (poisson_.info() != Eigen::Success) throw NumericalFailure("Laplacian factorization failed");
    }

    const Grid& grid() const { return grid_; }
    double p() const { return p_; }

    Solution solve(const RadonMeasure& m) const { return solve(mollify_rhs(m, grid_)); }

    /// Solves with a nodal rhs density; `warm` optionally seeds Newton (p > 2).
    Solution solve(const ScalarField& rhs, const ScalarField* warm = nullptr) const {
        require(rhs.grid == grid_, "rhs grid differs from solver grid");
        Vec b(static_cast<Eigen::Index>(nodes_.size()));
        for (std::size_t j = 0; j < nodes_.size(); ++j) {
            const double v = rhs[nodes_[j]];
            require(std::isfinite(v) && v >= 0.0, "rhs must be finite and >= 0");
            b[static_cast<Eigen::Index>(j)] = v * grid_.dual_volume(grid_.node_index(nodes_[j]));
        }
        return p_ == 2.0 ? solve_linear(b) : solve_newton(b, warm);
    }

private:
    void build_local_form() {
        const int n = grid_.dim();
        const int nc = 1 << n;
        local_ = Eigen::MatrixXd::Zero(nc, nc);
        const double w = 1.0 / static_cast<double>(1 << (n - 1));
        for (int a = 0; a < n; ++a) {
            const double h2 = grid_.spacing(a) * grid_.spacing(a);
            for (int c0 = 0; c0 < nc; ++c0) {
                if (c0 >> a & 1) continue;
                const int c1 = c0 | (1 << a);
                local_(c0, c0) += w / h2;
                local_(c1, c1) += w / h2;
                local_(c0, c1) -= w / h2;
                local_(c1, c0) -= w / h2;
            }
        }
    }

    void build_cells() {
        const int n = grid_.dim();
        const int nc = 1 << n;
        corners_.resize(grid_.cell_count() * nc);
        for (std::size_t c = 0; c < grid_.cell_count(); ++c) {
            const Index i = grid_.cell_index(c);
            for (int k = 0; k < nc; ++k) {
                Index v = i;
                for (int a = 0; a < n; ++a) v[a] += k >> a & 1;
                corners_[c * nc + k] = unknown_[grid_.node_linear(v)];
            }
        }
    }

    double phi(double q) const { return std::pow(q + opt_.eps * opt_.eps, 0.5 * p_) / p_; }
    double dphi(double q) const { return 0.5 * std::pow(q + opt_.eps * opt_.eps, 0.5 * p_ - 1.0); }
    double ddphi(double q) const { return 0.25 * (p_ - 2.0) * std::pow(q + opt_.eps * opt_.eps, 0.5 * p_ - 2.0); }

    // Cell-local values; boundary corners read as zero.
    Eigen::VectorXd gather(const Vec& u, std::size_t c) const {
        const int nc = 1 << grid_.dim();
        Eigen::VectorXd v(nc);
        for (int k = 0; k < nc; ++k) {
            const int j = corners_[c * nc + k];
            v[k] = j < 0 ? 0.0 : u[j];
        }
        return v;
    }

    double energy(const Vec& u, const Vec& b) const {
        const double vol = grid_.cell_volume();
        double e = 0.0;
        for (std::size_t c = 0; c < grid_.cell_count(); ++c) {
            const Eigen::VectorXd v = gather(u, c);
            e += vol * phi(v.dot(local_ * v));
        }
        return e - b.dot(u);
    }

    Vec gradient(const Vec& u, const Vec& b) const {
        const int nc = 1 << grid_.dim();
        const double vol = grid_.cell_volume();
        Vec g = -b;
        for (std::size_t c = 0; c < grid_.cell_count(); ++c) {
            const Eigen::VectorXd v = gather(u, c);
            const Eigen::VectorXd gv = local_ * v;
            const double s = 2.0 * vol * dphi(v.dot(gv));
            for (int k = 0; k < nc; ++k) {
                const int j = corners_[c * nc + k];
                if (j >= 0) g[j] += s * gv[k];
            }
        }
        return g;
    }

    // Hessian of J at u; `linear` gives the p = 2 operator Σ |c| G_c.
    SpMat assemble(const Vec& u, bool linear) const {
        const int nc = 1 << grid_.dim();
        const double vol = grid_.cell_volume();
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(grid_.cell_count() * nc * nc);
        for (std::size_t c = 0; c < grid_.cell_count(); ++c) {
            Eigen::MatrixXd h;
            if (linear) {
                h = vol * local_;
            } else {
                const Eigen::VectorXd v = gather(u, c);
                const Eigen::VectorXd gv = 2.0 * (local_ * v);
                const double q = 0.5 * v.dot(gv);
                h = vol * (2.0 * dphi(q) * local_ + ddphi(q) * gv * gv.transpose());
            }
            for (int r = 0; r < nc; ++r) {
                const int jr = corners_[c * nc + r];
                if (jr < 0) continue;
                for (int s = 0; s < nc; ++s) {
                    const int js = corners_[c * nc + s];
                    if (js >= 0) trip.emplace_back(jr, js, h(r, s));
                }
            }
        }
        const auto m = static_cast<Eigen::Index>(nodes_.size());
        SpMat a(m, m);
        a.setFromTriplets(trip.begin(), trip.end());
        return a;
    }

    ScalarField to_field(const Vec& u) const {
        ScalarField f(grid_);
        for (std::size_t j = 0; j < nodes_.size(); ++j) f[nodes_[j]] = u[static_cast<Eigen::Index>(j)];
        return f;
    }

    Solution solve_linear(const Vec& b) const {
        Vec u = poisson_.solve(b);
        if (poisson_.info() != Eigen::Success) throw NumericalFailure("Poisson back-substitution failed");
        const double bn = b.norm();
        SolveReport r;
        r.iterations = 1;
        r.residualNorm = bn > 0.0 ? (laplace_ * u - b).norm() / bn : (laplace_ * u - b).norm();
        r.energy = 0.5 * u.dot(laplace_ * u) - b.dot(u);
        r.regularizationEps = opt_.eps;
        r.energyHistory = {r.energy};
        return {to_field(u), r};
    }

    Solution solve_newton(const Vec& b, const ScalarField* warm) const {
        SolveReport r;
        r.regularizationEps = opt_.eps;
        const double bn = b.norm();
        Vec u = Vec::Zero(b.size());
        if (bn == 0.0) {
            r.energy = energy(u, b);
            r.energyHistory = {r.energy};
            return {to_field(u), r};
        }
        if (warm) {
            require(warm->grid == grid_, "warm start grid differs from solver grid");
            for (std::size_t j = 0; j < nodes_.size(); ++j) u[static_cast<Eigen::Index>(j)] = (*warm)[nodes_[j]];
        } else {
            // Scaled Poisson solution: the exact minimizer of J along that ray for ε → 0.
            const Vec up = poisson_.solve(b);
            double a = 0.0;
            for (std::size_t c = 0; c < grid_.cell_count(); ++c) {
                const Eigen::VectorXd v = gather(up, c);
                a += grid_.cell_volume() * std::pow(v.dot(local_ * v), 0.5 * p_);
            }
            const double lambda = std::pow(b.dot(up) / a, 1.0 / (p_ - 1.0));
            u = lambda * up;
        }

        Eigen::SimplicialLDLT<SpMat> ldlt;
        bool analyzed = false;
        double e = energy(u, b);
        r.energyHistory.push_back(e);
        for (int it = 0;; ++it) {
            const Vec g = gradient(u, b);
            r.residualNorm = g.norm() / bn;
            r.iterations = it;
            r.energy = e;
            if (r.residualNorm <= opt_.tol) break;
            if (it >= opt_.maxIterations)
                throw NumericalFailure("p-Laplace Newton did not converge; relative residual " +
                                       std::to_string(r.residualNorm));
            const SpMat h = assemble(u, false);
            if (!analyzed) {
                ldlt.analyzePattern(h);
                analyzed = true;
            }
            ldlt.factorize(h);
            if (ldlt.info() != Eigen::Success) throw NumericalFailure("p-Laplace Hessian factorization failed");
            const Vec d = ldlt.solve(-g);
            const double slope = g.dot(d);
            bool accepted = false;
            if (-slope > 1e-13 * (std::abs(e) + b.norm() * u.norm())) {
                double step = 1.0;
                for (int k = 0; k < 60 && !accepted; ++k, step *= 0.5) {
                    const Vec trial = u + step * d;
                    const double et = energy(trial, b);
                    if (et <= e + 1e-4 * step * slope) {
                        u = trial;
                        e = et;
                        accepted = true;
                    }
                }
            } else {
                // The predicted decrease is below the round-off of J; judge
                // steps by the gradient instead.
                const double gn = g.norm();
                double step = 1.0;
                for (int k = 0; k < 30 && !accepted; ++k, step *= 0.5) {
                    const Vec trial = u + step * d;
                    if (gradient(trial, b).norm() < gn) {
                        u = trial;
                        e = energy(trial, b);
                        accepted = true;
                    }
                }
            }
            if (!accepted)
                throw NumericalFailure("p-Laplace line search stalled; relative residual " +
                                       std::to_string(r.residualNorm));
            r.energyHistory.push_back(e);
        }
        return {to_field(u), r};
    }

    Grid grid_;
    double p_;
    SolveOptions opt_;
    std::vector<int> unknown_;
    std::vector<std::size_t> nodes_;
    std::vector<int> corners_;
    Eigen::MatrixXd local_;
    SpMat laplace_;
    Eigen::SimplicialLDLT<SpMat> poisson_;
};

inline Solution solve_plaplace(const PdeProblem& prob, double tol = 1e-10) {
    SolveOptions opt;
    opt.tol = tol;
    return PlaplaceSolver(prob.grid, prob.p, opt).solve(prob.rhs);
}

struct SandwichOptions {
    /// Nodes closer than this to an atom are skipped; default 4 · max spacing.
    std::optional<double> exclusionRadius;
    WolffOptions wolff;
};

/// Empirical K₁ for W^{d(x,∂Ω)/3}[μ]/K₁ <= u <= K₁ W^{2 diam}[μ] over interior
/// nodes away from atoms. Ratios use 0/0 = 1 and x/0 = +∞ for x > 0.
inline VerificationReport check_wolff_sandwich(const ScalarField& u, const RadonMeasure& m, double p,
                                               const SandwichOptions& opt = {}) {
    const Grid& g = u.grid;
    const double excl = opt.exclusionRadius.value_or(4.0 * g.max_spacing());
    const double diam = g.box().diameter();
    const WolffParams upper = WolffParams::p_laplace(p, 2.0 * diam);
    const ScalarField wUp = wolff_field(m, upper, g, opt.wolff);

    auto ratio = [](double a, double b) {
        if (b == 0.0) return a == 0.0 ? 1.0 : kInf;
        return a / b;
    };
    double kUpper = 0.0, kLower = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 0; k < g.node_count(); ++k) {
        const Index i = g.node_index(k);
        if (g.is_boundary_node(i)) continue;
        const Point x = g.node(i);
        bool nearAtom = false;
        for (const auto& a : m.atoms())
            if (a.mass > 0.0 && distance(a.location, x) < excl) nearAtom = true;
        if (nearAtom) continue;
        ++used;
        const double uk = std::max(u[k], 0.0);
        kUpper = std::max(kUpper, ratio(uk, wUp[k]));
        const double wLow = wolff_point(m, WolffParams::p_laplace(p, g.box().distance_to_boundary(x) / 3.0), x, opt.wolff);
        kLower = std::max(kLower, ratio(wLow, uk));
    }
    if (used == 0) kUpper = kLower = 1.0;
    VerificationReport r;
    r.lemmaName = "wolff-sandwich";
    r.inputs = "p=" + std::to_string(p) + ", measure=" + m.label() + ", nodes=" + std::to_string(used);
    r.add("K_upper", kUpper);
    r.add("K_lower", kLower);
    const double k1 = std::max(kUpper, kLower);
    r.add("K1", k1);
    r.add("exclusion_radius", excl);
    r.boundName = "finite";
    r.bound = kInf;
    r.passed = std::isfinite(k1);
    r.margin = r.passed ? kInf : -kInf;
    return r;
}

/// Discrete comparison: rhs1 <= rhs2 nodewise should give u1 <= u2.
inline VerificationReport check_comparison(const ScalarField& u1, const ScalarField& u2, const ScalarField& rhs1,
                                           const ScalarField& rhs2, double tol = 1e-8) {
    require(u1.grid == u2.grid && rhs1.grid == u1.grid && rhs2.grid == u1.grid, "comparison fields differ in grid");
    for (std::size_t k = 0; k < rhs1.size(); ++k)
        require(rhs2[k] >= rhs1[k], "check_comparison needs rhs2 >= rhs1 nodewise");
    double violation = 0.0;
    for (std::size_t k = 0; k < u1.size(); ++k) violation = std::max(violation, u1[k] - u2[k]);
    VerificationReport r;
    r.lemmaName = "comparison";
    r.inputs = "nodes=" + std::to_string(u1.size());
    r.add("max_violation", violation);
    r.boundName = "tol_comparison";
    r.decide(violation, tol, 0.0);
    return r;
}

}  // namespace nlpot
