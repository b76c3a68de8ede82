#pragma once

#include <chrono>
#include <cstdint>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "nlpot/io.hpp"
#include "nlpot/iterate.hpp"
#include "nlpot/pde.hpp"
#include "nlpot/verify.hpp"

namespace nlpot::cli {

using io::Config;
using io::ConfigError;
using io::json;
namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalFailure = 3, kInvariantViolation = 4 };

struct RunOptions {
    std::string command;
    fs::path config;
    fs::path out = "out";
    unsigned threads = 0;
    std::optional<std::uint64_t> seed;
};

/// Settings shared by all commands, read from the config file.
struct RunConfig {
    std::string command;
    int N = 2;
    double p = 2.0;
    int l = 2;
    int cells = 64;
    Box box;
    std::optional<double> T;  // unset: 2 diam
    RadonMeasure measure;
    std::uint64_t seed = 0;
    WolffOptions wolff;
    Config raw;

    Grid grid() const { return Grid::uniform(box, cells); }
    double truncation() const { return T.value_or(2.0 * box.diameter()); }
};

inline RunConfig read_run_config(const Config& c, const RunOptions& opt) {
    RunConfig r;
    r.raw = c;
    r.command = opt.command.empty() ? c.str("command", "") : opt.command;
    if (r.command.empty()) throw ConfigError("no command given (positional argument or 'command' key)");
    r.N = static_cast<int>(c.integer("N", 2));
    if (r.N < 2 || r.N > kMaxDim) throw ConfigError("N: must lie in [2, " + std::to_string(kMaxDim) + "]");
    r.p = c.num("p", r.N);
    if (!(r.p > 1.0 && r.p <= r.N)) throw ConfigError("p: must lie in (1, N]");
    r.l = static_cast<int>(c.integer("l", 2));
    if (r.l < 1) throw ConfigError("l: must be >= 1");
    r.cells = static_cast<int>(c.integer("cells", 64));
    if (r.cells < 2 || r.cells > 8192) throw ConfigError("cells: must lie in [2, 8192]");
    const double lo = c.num("box_lo", -1.0), hi = c.num("box_hi", 1.0);
    if (!(hi > lo)) throw ConfigError("box_lo/box_hi: need box_lo < box_hi");
    r.box = Box(Point::filled(r.N, lo), Point::filled(r.N, hi));
    const std::string t = c.str("T", "2diam");
    if (t == "2diam") r.T.reset();
    else if (t == "diam") r.T = r.box.diameter();
    else {
        r.T = io::parse_double(t, "T");
        if (!(*r.T > 0.0)) throw ConfigError("T: must be > 0");
    }
    r.measure = c.has("measure") ? io::load_measure(c.path("measure"), r.N) : RadonMeasure(r.N, "zero");
    for (const auto& a : r.measure.atoms())
        if (!r.box.contains(a.location, 1e-12)) throw ConfigError("measure: atom outside the box");
    r.seed = opt.seed ? *opt.seed : static_cast<std::uint64_t>(c.integer("seed", 0));
    r.wolff.nodes = static_cast<int>(c.integer("wolff_nodes", 4096));
    if (r.wolff.nodes < 16) throw ConfigError("wolff_nodes: must be >= 16");
    r.wolff.threads = opt.threads;
    return r;
}

/// Random atomic measures with total mass in (0.2, 1], deterministic in `seed`.
inline std::vector<RadonMeasure> random_suite(const Box& box, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<RadonMeasure> out;
    const int n = box.dim();
    for (int s = 0; s < count; ++s) {
        const int atoms = 1 + static_cast<int>(unit(rng) * 3.0);
        const double total = 0.2 + 0.8 * unit(rng);
        std::vector<Atom> v;
        double w = 0.0;
        for (int a = 0; a < atoms; ++a) {
            Point x(n);
            for (int ax = 0; ax < n; ++ax) x[ax] = box.lo[ax] + (0.1 + 0.8 * unit(rng)) * box.width(ax);
            v.push_back({x, 0.1 + unit(rng)});
            w += v.back().mass;
        }
        for (auto& a : v) a.mass *= total / w;
        out.emplace_back(n, v, std::vector<GridDensity>{}, "random" + std::to_string(s));
    }
    return out;
}

inline RadonMeasure unit_mass(const RadonMeasure& m, const Box& box) {
    const double mass = total_mass(m);
    if (mass <= 0.0) return RadonMeasure::dirac(box.center(), 1.0, "dirac");
    return scaled(m, 1.0 / mass).with_label(m.label());
}

struct Constants {
    double K = 0.0, delta0 = 0.0, C1 = 0.0;
    std::string source;  // "config", "auto" or "mixed"
};

/// K, δ₀, C₁ from the config, or calibrated when set to `auto`: δ₀ and C₁ by
/// estimate_constants, K as the largest sandwich constant, both over the unit
/// Dirac at the box center, the measure scaled to unit mass and
/// `suite_random` random atomic measures.
inline Constants resolve_constants(const RunConfig& rc, std::ostream& log) {
    const Config& c = rc.raw;
    auto is_auto = [&](const std::string& k) { return c.str(k, "auto") == "auto"; };
    Constants out;
    const bool autoK = is_auto("K"), autoD = is_auto("delta0"), autoC = is_auto("C1");
    if (!autoK) out.K = c.num("K");
    if (!autoD) out.delta0 = c.num("delta0");
    if (!autoC) out.C1 = c.num("C1");
    out.source = !(autoK || autoD || autoC) ? "config" : (autoK && autoD && autoC ? "auto" : "mixed");
    if (!(autoK || autoD || autoC)) return out;

    std::vector<RadonMeasure> suite{RadonMeasure::dirac(rc.box.center(), 1.0, "dirac")};
    if (total_mass(rc.measure) > 0.0) suite.push_back(unit_mass(rc.measure, rc.box));
    for (auto& m : random_suite(rc.box, static_cast<int>(c.integer("suite_random", 0)), rc.seed)) suite.push_back(m);
    const Grid cal = Grid::uniform(rc.box, static_cast<int>(c.integer("calibration_cells", std::min(rc.cells, 32))));
    if (autoD || autoC) {
        log << "calibrating delta0, C1 on " << suite.size() << " measures\n";
        const auto pc = estimate_constants(suite, cal, {rc.N / rc.p, rc.p, rc.truncation()}, rc.wolff);
        if (autoD) out.delta0 = pc.delta0;
        if (autoC) out.C1 = pc.C1;
    }
    if (autoK) {
        log << "calibrating K on " << suite.size() << " measures\n";
        PlaplaceSolver solver(cal, rc.p);
        SandwichOptions so;
        so.wolff = rc.wolff;
        for (const auto& m : suite) {
            const auto rep = check_wolff_sandwich(solver.solve(m).u, m, rc.p, so);
            if (!rep.passed) throw NumericalFailure("K calibration: sandwich constant is not finite for " + m.label());
            out.K = std::max(out.K, rep.get("K1"));
        }
    }
    return out;
}

inline IterationConfig iteration_config(const RunConfig& rc, const Constants& k) {
    const Config& c = rc.raw;
    IterationConfig ic;
    ic.N = rc.N;
    ic.p = rc.p;
    ic.l = rc.l;
    ic.K = k.K;
    ic.delta0 = k.delta0;
    ic.C1 = k.C1;
    ic.maxIter = static_cast<int>(c.integer("max_iter", 200));
    if (c.has("tol_sup")) ic.tolSup = c.num("tol_sup");
    ic.blowupFactor = c.num("blowup_factor", 1e6);
    ic.capSlackFraction = c.num("cap_slack", 0.1);
    ic.R = rc.T;
    ic.lemmaScale = c.flag("lemma_scale", false);
    try {
        ic.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    return ic;
}

inline json constants_json(const Constants& k, const IterationConfig& ic) {
    return json{{"K", io::number(k.K)},
                {"delta0", io::number(k.delta0)},
                {"C1", io::number(k.C1)},
                {"M", io::number(smallness_M(ic))},
                {"source", k.source}};
}

inline json trace_line(const IterationStep& s) {
    return json{{"m", s.m},
                {"sup_increment", io::number(s.supIncrement)},
                {"min_increment", io::number(s.minIncrement)},
                {"reaction_l1", io::number(s.reactionL1)},
                {"reaction_l1_change", io::number(s.reactionL1Change)},
                {"cap_margin", io::number(s.capMargin)},
                {"solver_iterations", s.solverIterations}};
}

inline void write_trace(const IterationTrace& t, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    for (const auto& s : t.steps) out << trace_line(s).dump() << "\n";
}

inline json iteration_summary(const IterationResult& r, const RadonMeasure& mu) {
    const auto& t = r.trace;
    double minMargin = kInf;
    for (const auto& s : t.steps) minMargin = std::min(minMargin, s.capMargin);
    return json{{"outcome", to_string(t.outcome)},
                {"steps", t.steps.size()},
                {"mass", io::number(total_mass(mu))},
                {"mass_over_M", io::number(total_mass(mu) / t.M)},
                {"tol_sup", io::number(t.tolSup)},
                {"cap_slack", io::number(t.capSlack)},
                {"cap_violated", t.capViolated},
                {"min_cap_margin", io::number(minMargin)},
                {"sup_u", io::number(r.u.max())},
                {"reason", t.reason}};
}

class Runner {
public:
    Runner(RunConfig rc, fs::path out, std::ostream& log) : rc_(std::move(rc)), out_(std::move(out)), log_(log) {}

    int run() {
        fs::create_directories(out_ / "fields");
        summary_ = json{{"command", rc_.command}, {"config", rc_.raw.entries()}, {"seed", rc_.seed}};
        int code = kOk;
        const std::string& cmd = rc_.command;
        if (cmd == "wolff") code = wolff();
        else if (cmd == "solve") code = solve();
        else if (cmd == "iterate") code = iterate();
        else if (cmd == "verify") code = verify();
        else if (cmd == "constants") code = constants();
        else if (cmd == "sweep") code = sweep();
        else throw ConfigError("unknown command '" + cmd + "'");
        summary_["exit_status"] = code;
        io::write_json(summary_, out_ / "summary.json");
        return code;
    }

private:
    int wolff() {
        const Config& c = rc_.raw;
        const std::string kind = c.str("potential", "p_laplace");
        WolffParams wp;
        if (kind == "p_laplace") wp = WolffParams::p_laplace(rc_.p, rc_.truncation());
        else if (kind == "iteration") wp = {rc_.N / rc_.p, rc_.p, rc_.truncation()};
        else if (kind == "hessian") wp = WolffParams::hessian(static_cast<int>(c.integer("k", 1)), rc_.truncation());
        else if (kind == "custom") wp = {c.num("alpha"), c.num("s"), rc_.truncation()};
        else throw ConfigError("potential: expected p_laplace, iteration, hessian or custom");
        try {
            wp.validate(rc_.N);
        } catch (const InvalidArgument& e) {
            throw ConfigError(e.what());
        }
        const Grid g = rc_.grid();
        const auto ev = wolff_field_detailed(rc_.measure, wp, g, rc_.wolff);
        io::write_field_csv(ev.field, out_ / "fields" / "wolff.csv");
        std::size_t infinite = 0;
        double maxFinite = 0.0;
        for (double v : ev.field.values) {
            if (std::isfinite(v)) maxFinite = std::max(maxFinite, v);
            else ++infinite;
        }
        summary_["params"] = json{{"alpha", wp.alpha}, {"s", wp.s}, {"T", wp.T}};
        summary_["mass"] = io::number(total_mass(rc_.measure));
        summary_["max_finite"] = io::number(maxFinite);
        summary_["infinite_nodes"] = infinite;
        summary_["max_tail_bound"] = io::number(ev.maxTailBound);
        if (c.has("probe")) {
            const auto v = c.list("probe");
            if (static_cast<int>(v.size()) != rc_.N) throw ConfigError("probe: needs N coordinates");
            Point x(rc_.N);
            for (int a = 0; a < rc_.N; ++a) x[a] = v[a];
            const Index i = g.nearest_node(x);
            std::vector<double> node;
            for (int a = 0; a < rc_.N; ++a) node.push_back(g.node(i)[a]);
            summary_["probe"] = json{{"point", v},
                                     {"nearest_node", node},
                                     {"node_value", io::number(ev.field.at(i))},
                                     {"point_value", io::number(wolff_point(rc_.measure, wp, x, rc_.wolff))}};
        }
        return kOk;
    }

    int solve() {
        const Grid g = rc_.grid();
        PlaplaceSolver solver(g, rc_.p, solve_options());
        const Solution s = solver.solve(rc_.measure);
        io::write_field_csv(s.u, out_ / "fields" / "u.csv");
        summary_["solver"] = json{{"iterations", s.report.iterations},
                                  {"residual_norm", io::number(s.report.residualNorm)},
                                  {"energy", io::number(s.report.energy)},
                                  {"regularization_eps", io::number(s.report.regularizationEps)}};
        summary_["sup_u"] = io::number(s.u.max());
        summary_["min_u"] = io::number(s.u.min());
        if (rc_.raw.flag("sandwich", false)) {
            SandwichOptions so;
            so.wolff = rc_.wolff;
            const auto rep = check_wolff_sandwich(s.u, rc_.measure, rc_.p, so);
            summary_["sandwich"] = io::to_json(rep);
            if (!rep.passed) return kInvariantViolation;
        }
        return kOk;
    }

    int iterate() {
        const Constants k = resolve_constants(rc_, log_);
        const IterationConfig ic = iteration_config(rc_, k);
        summary_["constants"] = constants_json(k, ic);
        const Grid g = rc_.grid();
        log_ << "picard on " << g.cells(0) << "^" << rc_.N << " cells, M = " << smallness_M(ic) << "\n";
        const IterationResult r = picard_solve(rc_.measure, ic, g, rc_.wolff, solve_options());
        io::write_field_csv(r.u, out_ / "fields" / "u.csv");
        io::write_field_csv(r.cap, out_ / "fields" / "cap.csv");
        write_trace(r.trace, out_ / "trace.jsonl");
        summary_["iteration"] = iteration_summary(r, rc_.measure);
        if (rc_.raw.flag("absorption", false)) summary_["absorption"] = io::to_json(check_absorption(rc_.measure, ic, g, rc_.wolff));
        return r.trace.capViolated ? kInvariantViolation : kOk;
    }

    int verify() {
        const Config& c = rc_.raw;
        const std::string target = c.str("target");
        const Grid g = rc_.grid();
        VerificationReport rep;
        if (target == "weak11") {
            Weak11Options o;
            if (c.has("C")) o.C = c.num("C");
            o.tol = c.num("tol", 0.05);
            o.threads = rc_.wolff.threads;
            std::vector<double> lambdas;
            if (c.has("lambdas")) lambdas = c.list("lambdas");
            else
                for (int i = 0; i <= 30; ++i) lambdas.push_back(0.35 * std::pow(10.0, i / 10.0));
            rep = verify_weak11(rc_.measure, g, lambdas, o);
        } else if (target == "brezis-merle") {
            BrezisMerleOptions o;
            if (c.has("D")) o.D = c.num("D");
            o.ballDomain = c.flag("ball_domain", false);
            o.bound = c.num("bound", 1.0);
            o.tol = c.num("tol", 0.05);
            o.wolff = rc_.wolff;
            const auto deltas = c.has("deltas") ? c.list("deltas") : std::vector<double>{0.5, 0.25, 0.1, 0.05};
            rep = verify_brezis_merle(rc_.measure, g, rc_.p, deltas, o);
            std::ofstream csv(out_ / "fields" / "brezis_merle.csv");
            csv << "delta,I,scaled\n";
            for (double d : deltas)
                csv << io::format_number(d) << "," << io::format_number(rep.get(detail::tagged("I", d))) << ","
                    << io::format_number(rep.get(detail::tagged("scaled", d))) << "\n";
        } else if (target == "absorption") {
            const Constants k = resolve_constants(rc_, log_);
            const IterationConfig ic = iteration_config(rc_, k);
            summary_["constants"] = constants_json(k, ic);
            rep = check_absorption(rc_.measure, ic, g, rc_.wolff);
        } else if (target == "sandwich") {
            const Solution s = PlaplaceSolver(g, rc_.p, solve_options()).solve(rc_.measure);
            SandwichOptions so;
            so.wolff = rc_.wolff;
            if (c.has("exclusion_radius")) so.exclusionRadius = c.num("exclusion_radius");
            rep = check_wolff_sandwich(s.u, rc_.measure, rc_.p, so);
        } else {
            throw ConfigError("target: expected weak11, brezis-merle, absorption or sandwich");
        }
        summary_["report"] = io::to_json(rep);
        return rep.passed ? kOk : kInvariantViolation;
    }

    int constants() {
        RunConfig rc = rc_;
        rc.raw.set("K", "auto");
        rc.raw.set("delta0", "auto");
        rc.raw.set("C1", "auto");
        const Constants k = resolve_constants(rc, log_);
        IterationConfig ic;
        ic.N = rc_.N;
        ic.p = rc_.p;
        ic.l = rc_.l;
        ic.K = k.K;
        ic.delta0 = k.delta0;
        ic.C1 = k.C1;
        summary_["constants"] = constants_json(k, ic);
        return kOk;
    }

    int sweep() {
        const Constants k = resolve_constants(rc_, log_);
        const IterationConfig ic = iteration_config(rc_, k);
        const double M = smallness_M(ic);
        summary_["constants"] = constants_json(k, ic);
        const auto factors = rc_.raw.has("factors") ? rc_.raw.list("factors") : std::vector<double>{0.25, 0.5, 1, 2, 10};
        const RadonMeasure base = unit_mass(rc_.measure, rc_.box);
        const Grid g = rc_.grid();
        json runs = json::array();
        int converged = 0;
        bool nonincreasing = true;
        bool prevConverged = true;
        int code = kOk;
        for (std::size_t i = 0; i < factors.size(); ++i) {
            const double f = factors[i];
            if (!(f > 0.0)) throw ConfigError("factors: must be > 0");
            const RadonMeasure mu = scaled(base, f * M).with_label(base.label());
            log_ << "sweep run " << i << ": mass = " << f << " M\n";
            const fs::path dir = out_ / ("run_" + std::to_string(i));
            fs::create_directories(dir);
            const IterationResult r = picard_solve(mu, ic, g, rc_.wolff, solve_options());
            write_trace(r.trace, dir / "trace.jsonl");
            json s = iteration_summary(r, mu);
            s["factor"] = f;
            io::write_json(s, dir / "summary.json");
            runs.push_back(s);
            const bool ok = r.trace.outcome == IterationOutcome::Converged;
            converged += ok;
            if (ok && !prevConverged) nonincreasing = false;
            prevConverged = ok;
            if (r.trace.capViolated && f <= 1.0) code = kInvariantViolation;
        }
        summary_["runs"] = runs;
        summary_["converged_count"] = converged;
        summary_["convergence_nonincreasing_in_mass"] = nonincreasing;
        return code;
    }

    SolveOptions solve_options() const {
        SolveOptions o;
        o.tol = rc_.raw.num("solver_tol", o.tol);
        o.maxIterations = static_cast<int>(rc_.raw.integer("solver_max_iter", o.maxIterations));
        return o;
    }

    RunConfig rc_;
    fs::path out_;
    std::ostream& log_;
    json summary_;
};

/// Runs one command; returns the process exit status.
inline int run(const RunOptions& opt, std::ostream& log = std::cerr) {
    try {
        Config c = opt.config.empty() ? Config{} : Config::load(opt.config);
        RunConfig rc = read_run_config(c, opt);
        const auto start = std::chrono::steady_clock::now();
        Runner runner(std::move(rc), opt.out, log);
        const int code = runner.run();
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        io::write_json(json{{"elapsed_seconds", secs}, {"threads", resolve_threads(opt.threads)}}, opt.out / "meta.json");
        return code;
    } catch (const InvalidArgument& e) {
        log << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const NumericalFailure& e) {
        log << "numerical failure: " << e.what() << "\n";
        return kNumericalFailure;
    } catch (const InvariantViolation& e) {
        log << "invariant violation: " << e.what() << "\n";
        return kInvariantViolation;
    } catch (const fs::filesystem_error& e) {
        log << "config error: " << e.what() << "\n";
        return kConfigError;
    }
}

inline int main(int argc, char** argv) {
    CLI::App app{"Nonlinear potential estimates: Wolff potentials, p-Laplace solves, Picard iteration, lemma checks"};
    RunOptions opt;
    std::string config;
    std::string out = "out";
    std::uint64_t seed = 0;
    app.add_option("command", opt.command, "wolff | solve | iterate | verify | constants | sweep")
        ->check(CLI::IsMember({"wolff", "solve", "iterate", "verify", "constants", "sweep"}));
    app.add_option("--config", config, "Run configuration (key = value lines)");
    app.add_option("--out", out, "Output directory");
    app.add_option("--threads", opt.threads, "Worker threads (0: all cores)");
    auto* seedOpt = app.add_option("--seed", seed, "Seed for randomized suites");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }
    opt.config = config;
    opt.out = out;
    if (seedOpt->count() > 0) opt.seed = seed;
    return run(opt);
}

}  // namespace nlpot::cli
