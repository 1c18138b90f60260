#pragma once

// Command-line front end. Commands: solve, simulate, lift, sweep, verify.
// Exit codes: 0 ok, 1 validation error, 2 solver non-convergence, 3 a gated
// check failed.

#include "ambictrl/analysis.hpp"
#include "ambictrl/error.hpp"
#include "ambictrl/hjb.hpp"
#include "ambictrl/io.hpp"
#include "ambictrl/model.hpp"
#include "ambictrl/simulate.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ambictrl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitConvergence = 2;
inline constexpr int kExitGate = 3;

struct RunConfig {
    std::string command;
    std::string instance_path;  ///< empty: built-in default instance
    std::optional<double> eps;  ///< default: the instance's aggregate eps
    std::vector<double> eps_grid;
    std::size_t cells = 4096;
    double paste_tol = 0.0;
    double s_tol = 0.0;
    double x0 = 0.0;
    double dt = 1e-3;
    std::optional<double> horizon;  ///< default: shortest T meeting the 1% tail budget
    std::size_t n_paths = 10000;
    std::optional<std::uint64_t> seed;
    std::optional<double> beta;  ///< default: the solved threshold
    std::string adversary = "feedback";
    std::string output_dir = ".";
    bool write_path = false;
    bool renormalize = false;
};

inline const std::vector<double>& default_eps_grid() {
    static const std::vector<double> grid{0.0, 0.05, 0.1, 0.2, 0.4};
    return grid;
}

/// Parses argv into a RunConfig. Returns an exit code when parsing ends the
/// run (help or a usage error).
inline std::optional<int> parse_args(int argc, const char* const* argv, RunConfig& cfg,
                                     std::ostream& out, std::ostream& err) {
    CLI::App app{"Robust threshold control for critically loaded multiclass queues"};
    app.add_option("--command", cfg.command, "solve | simulate | lift | sweep | verify")
        ->required()
        ->check(CLI::IsMember({"solve", "simulate", "lift", "sweep", "verify"}));
    app.add_option("--instance", cfg.instance_path, "instance JSON (default: built-in instance)");
    auto* eps_opt = app.add_option("--eps", cfg.eps, "aggregate ambiguity level");
    app.add_option("--eps-grid", cfg.eps_grid, "comma-separated eps grid for sweep")
        ->delimiter(',')
        ->excludes(eps_opt);
    app.add_option("--cells", cfg.cells, "solver mesh cells");
    app.add_option("--paste-tol", cfg.paste_tol, "pasting curvature tolerance (0: default)");
    app.add_option("--s-tol", cfg.s_tol, "bisection bracket tolerance (0: machine precision)");
    app.add_option("--x0", cfg.x0, "initial workload");
    app.add_option("--dt", cfg.dt, "time step");
    app.add_option("--horizon", cfg.horizon, "simulation horizon T");
    app.add_option("--paths", cfg.n_paths, "Monte Carlo paths");
    app.add_option("--seed", cfg.seed, "random seed (required for simulate and lift)");
    app.add_option("--beta", cfg.beta, "reflection threshold (default: solved threshold)");
    app.add_option("--adversary", cfg.adversary, "feedback | null | const:PSI");
    app.add_option("--out", cfg.output_dir, "output directory");
    app.add_flag("--write-path", cfg.write_path, "simulate: also write the first path as CSV");
    app.add_flag("--renormalize", cfg.renormalize, "rescale lambda to critical load");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        json j{{"error", {{"kind", "validation"}, {"field", "arguments"}, {"message", e.what()}}}};
        err << j.dump() << '\n';
        return kExitValidation;
    }
    return std::nullopt;
}

namespace detail {

struct Context {
    const RunConfig& cfg;
    MultiClassInstance instance;
    ReducedInstance reduced;
    std::string instance_hash;
    double eps = 0.0;
    SolverConfig solver;
    std::filesystem::path out;
};

inline AdversarySpec parse_adversary(const std::string& spec,
                                     std::shared_ptr<const ValueSolution> sol) {
    if (spec == "feedback") return AdversarySpec::feedback(std::move(sol));
    if (spec == "null") return AdversarySpec::null();
    if (spec.rfind("const:", 0) == 0) {
        try {
            std::size_t used = 0;
            const double psi = std::stod(spec.substr(6), &used);
            if (used == spec.size() - 6) return AdversarySpec::constant(psi);
        } catch (const std::exception&) {
        }
    }
    fail_validation("adversary", "adversary must be feedback, null or const:PSI");
}

inline Context make_context(const RunConfig& cfg) {
    if (cfg.command == "simulate" || cfg.command == "lift") {
        if (!cfg.seed) fail_validation("seed", "--seed is required for " + cfg.command);
    }
    Context ctx{cfg, {}, {}, {}, 0.0, {}, cfg.output_dir};
    if (cfg.instance_path.empty()) {
        ctx.instance = default_instance();
        ctx.instance_hash = hex64(fnv1a64(instance_to_json(ctx.instance).dump()));
    } else {
        LoadedInstance li = load_instance(cfg.instance_path);
        ctx.instance = std::move(li.instance);
        ctx.instance_hash = std::move(li.content_hash);
    }
    ReduceOptions ro;
    ro.renormalize_load = cfg.renormalize;
    ctx.instance = validate_instance(ctx.instance, ro);
    ctx.reduced = reduce_instance(ctx.instance);
    ctx.eps = cfg.eps.value_or(ctx.reduced.eps);
    if (!(ctx.eps >= 0.0) || !std::isfinite(ctx.eps)) fail_validation("eps", "eps must be nonnegative");
    if (cfg.cells < ctx.solver.min_cells) {
        fail_validation("cells", "cells must be at least " + std::to_string(ctx.solver.min_cells));
    }
    ctx.solver.cells = cfg.cells;
    if (cfg.paste_tol < 0.0) fail_validation("paste_tol", "paste_tol must be nonnegative");
    if (cfg.s_tol < 0.0) fail_validation("s_tol", "s_tol must be nonnegative");
    ctx.solver.paste_tol = cfg.paste_tol;
    ctx.solver.s_tol = cfg.s_tol;
    if (cfg.n_paths < 2) fail_validation("paths", "paths must be at least 2");
    std::error_code ec;
    std::filesystem::create_directories(ctx.out, ec);
    if (ec) fail_validation("out", "cannot create output directory " + cfg.output_dir);
    return ctx;
}

inline json config_json(const Context& ctx, double horizon = 0.0, double beta = 0.0) {
    const RunConfig& c = ctx.cfg;
    json j{{"command", c.command},
           {"instance", c.instance_path.empty() ? json("<built-in default>") : json(c.instance_path)},
           {"instance_hash", ctx.instance_hash},
           {"eps", ctx.eps},
           {"solver",
            {{"cells", ctx.solver.cells},
             {"paste_tol", resolved_paste_tol(ctx.reduced, ctx.solver)},
             {"s_tol", ctx.solver.s_tol}}},
           {"renormalize", c.renormalize}};
    if (c.command == "sweep") {
        j["eps_grid"] = c.eps_grid.empty() ? default_eps_grid() : c.eps_grid;
        j.erase("eps");
    }
    if (c.command == "simulate" || c.command == "lift") {
        j["sim"] = {{"x0", c.x0},
                    {"dt", c.dt},
                    {"T", horizon},
                    {"n_paths", c.command == "lift" ? std::size_t{1} : c.n_paths},
                    {"seed", *c.seed},
                    {"beta", beta},
                    {"adversary", c.adversary}};
    }
    return j;
}

inline void write_json(const std::filesystem::path& p, const json& j) {
    std::ofstream f(p, std::ios::binary);
    if (!f) fail_validation("out", "cannot write " + p.string());
    f << j.dump(2) << '\n';
}

inline std::ofstream open_csv(const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) fail_validation("out", "cannot write " + p.string());
    return f;
}

inline json check(double value, double tol, bool pass) {
    return json{{"value", value}, {"tol", tol}, {"pass", pass}};
}

inline int cmd_solve(Context& ctx, std::ostream& out) {
    const ValueSolution sol = shoot(ctx.reduced, ctx.eps, ctx.solver);
    const ResidualReport rep = verify_solution(sol);
    const UniquenessVerdict uv = uniqueness_check(ctx.reduced, ctx.eps);
    {
        auto f = open_csv(ctx.out / "value.csv");
        write_value_csv(f, sol);
    }
    json j{{"config", config_json(ctx)},
           {"solution", solution_json(sol)},
           {"residuals", residual_report_json(rep)},
           {"uniqueness", {{"unique", uv.unique()}, {"reason", uv.reason}}}};
    write_json(ctx.out / "solve.json", j);
    out << "s_star=" << sol.s_star << " beta=" << sol.beta << " beta_hat=" << sol.beta_hat << '\n';
    return kExitOk;
}

struct SimSetup {
    std::shared_ptr<const ValueSolution> sol;
    AdversarySpec adv;
    StrategySpec strat;
    double horizon = 0.0;
};

inline SimSetup sim_setup(const Context& ctx) {
    SimSetup s;
    s.sol = std::make_shared<const ValueSolution>(shoot(ctx.reduced, ctx.eps, ctx.solver));
    s.adv = parse_adversary(ctx.cfg.adversary, s.sol);
    s.strat = StrategySpec::reflecting(ctx.cfg.beta.value_or(s.sol->beta));
    if (ctx.cfg.horizon) {
        s.horizon = *ctx.cfg.horizon;
    } else {
        if (!(ctx.cfg.x0 >= 0.0 && ctx.cfg.x0 <= ctx.reduced.b)) fail_validation("x0", "x0 must lie in [0, b]");
        s.horizon = horizon_for_tail(ctx.reduced, s.adv, ctx.eps, s.sol->value_at(ctx.cfg.x0));
    }
    return s;
}

inline int cmd_simulate(Context& ctx, std::ostream& out) {
    const SimSetup s = sim_setup(ctx);
    McConfig mc{ctx.cfg.dt, s.horizon, ctx.cfg.n_paths, *ctx.cfg.seed, {}};
    const CostEstimate est = mc_estimate(ctx.reduced, s.strat, s.adv, ctx.cfg.x0, ctx.eps, mc);
    json j{{"config", config_json(ctx, est.horizon, s.strat.beta)},
           {"estimate", estimate_json(est)},
           {"value_at_x0", s.sol->value_at(ctx.cfg.x0)}};
    write_json(ctx.out / "estimate.json", j);
    if (ctx.cfg.write_path) {
        const SimPath p = simulate_path(ctx.reduced, s.strat, s.adv, ctx.cfg.x0, mc.dt, mc.horizon,
                                        path_seed(mc.seed, 0));
        auto f = open_csv(ctx.out / "path.csv");
        write_path_csv(f, p);
    }
    out << "mean=" << est.mean << " std_error=" << est.std_error << '\n';
    return kExitOk;
}

inline int cmd_lift(Context& ctx, std::ostream& out) {
    const SimSetup s = sim_setup(ctx);
    const SimPath p = simulate_path(ctx.reduced, s.strat, s.adv, ctx.cfg.x0, ctx.cfg.dt, s.horizon,
                                    *ctx.cfg.seed);
    const LiftedPath L = lift_path(p, ctx.reduced, ctx.instance, ctx.eps, *ctx.cfg.seed);
    {
        auto f = open_csv(ctx.out / "lifted_path.csv");
        write_lifted_csv(f, p, L);
    }
    constexpr double tol = 1e-10;
    const bool pass = L.holding_identity_err <= tol && L.idleness_identity_err <= tol &&
                      L.penalty_identity_err <= tol && L.cost_identity_err <= tol;
    json j{{"config", config_json(ctx, p.horizon, s.strat.beta)},
           {"cost_reduced", L.cost_reduced},
           {"cost_lifted", L.cost_lifted},
           {"checks",
            {{"holding_identity", check(L.holding_identity_err, tol, L.holding_identity_err <= tol)},
             {"idleness_identity", check(L.idleness_identity_err, tol, L.idleness_identity_err <= tol)},
             {"penalty_identity", check(L.penalty_identity_err, tol, L.penalty_identity_err <= tol)},
             {"cost_identity", check(L.cost_identity_err, tol, L.cost_identity_err <= tol)}}},
           {"pass", pass}};
    write_json(ctx.out / "lift.json", j);
    out << "cost_reduced=" << L.cost_reduced << " cost_lifted=" << L.cost_lifted << '\n';
    return pass ? kExitOk : kExitGate;
}

inline int cmd_sweep(Context& ctx, std::ostream& out) {
    const std::vector<double>& grid = ctx.cfg.eps_grid.empty() ? default_eps_grid() : ctx.cfg.eps_grid;
    SweepOptions opts;
    opts.solver = ctx.solver;
    const SweepReport rep = epsilon_sweep(ctx.reduced, grid, opts);
    {
        auto f = open_csv(ctx.out / "sweep.csv");
        write_sweep_csv(f, rep);
    }
    const double slack_tol = 1e-8 * rep.scale;
    const double margin = rep.min_margin();
    const double slack = rep.min_bound_slack();
    const bool margin_ok = !std::isfinite(margin) || margin > 0.0;
    const bool slack_ok = !std::isfinite(slack) || slack >= -slack_tol;
    const bool fit_ok = rep.fit_points < 2 || rep.fit_residual <= 0.25;
    const bool pass = margin_ok && slack_ok && fit_ok && rep.sandwich_ok();
    json j{{"config", config_json(ctx)},
           {"summary", sweep_json(rep)},
           {"checks",
            {{"monotone", check(margin, 0.0, margin_ok)},
             {"bound_slack", check(slack, -slack_tol, slack_ok)},
             {"fit_residual", check(rep.fit_residual, 0.25, fit_ok)},
             {"sandwich", {{"pass", rep.sandwich_ok()}}}}},
           {"pass", pass}};
    if (!std::isfinite(margin)) j["checks"]["monotone"]["value"] = nullptr;
    if (!std::isfinite(slack)) j["checks"]["bound_slack"]["value"] = nullptr;
    write_json(ctx.out / "sweep.json", j);
    out << "C_fit=" << rep.c_fit << " fit_residual=" << rep.fit_residual << '\n';
    return pass ? kExitOk : kExitGate;
}

inline int cmd_verify(Context& ctx, std::ostream& out) {
    const ValueSolution sol = shoot(ctx.reduced, ctx.eps, ctx.solver);
    const ResidualReport rep = verify_solution(sol);
    const UniquenessVerdict uv = uniqueness_check(ctx.reduced, ctx.eps);
    constexpr double boundary_tol = 1e-8, slope_tol = 1e-10;
    const double r = ctx.reduced.r;
    const bool thresholds_ok = !uv.unique() || sol.beta_hat == sol.beta;
    json checks{
        {"pasted", {{"value", to_string(sol.classification)}, {"pass", rep.pasted}}},
        {"hjb_residual", check(rep.hjb_residual_sup, rep.residual_tol, rep.hjb_residual_sup <= rep.residual_tol)},
        {"hjb_residual_differenced", check(rep.fd_residual_sup, rep.residual_tol, rep.fd_residual_sup <= rep.residual_tol)},
        {"v_prime_at_zero", check(rep.v_prime_at_zero, boundary_tol, rep.v_prime_at_zero <= boundary_tol)},
        {"v_prime_at_b", check(rep.v_prime_at_b_err, boundary_tol, rep.v_prime_at_b_err <= boundary_tol)},
        {"slope_on_rejection_band", check(rep.reflect_slope_sup, boundary_tol, rep.reflect_slope_sup <= boundary_tol)},
        {"v_prime_lower", check(rep.v_prime_min, -slope_tol, rep.v_prime_min >= -slope_tol)},
        {"v_prime_upper", check(rep.v_prime_max, r + slope_tol, rep.v_prime_max <= r + slope_tol)},
        {"hjb_inequality", check(rep.hjb_inequality_min, -rep.residual_tol, rep.hjb_inequality_min >= -rep.residual_tol)},
        {"unique_threshold", {{"unique", uv.unique()}, {"beta", sol.beta}, {"beta_hat", sol.beta_hat}, {"pass", thresholds_ok}}}};
    bool pass = true;
    for (const auto& [name, c] : checks.items()) pass = pass && c.at("pass").get<bool>();
    json j{{"config", config_json(ctx)},
           {"solution", solution_json(sol)},
           {"checks", checks},
           {"pass", pass}};
    write_json(ctx.out / "verify.json", j);
    out << (pass ? "verify: pass" : "verify: FAIL") << '\n';
    return pass ? kExitOk : kExitGate;
}

inline const char* kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Convergence: return "convergence";
    }
    return "unknown";
}

}  // namespace detail

/// Runs one command. Errors are reported as JSON on `err`.
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        detail::Context ctx = detail::make_context(cfg);
        if (cfg.command == "solve") return detail::cmd_solve(ctx, out);
        if (cfg.command == "simulate") return detail::cmd_simulate(ctx, out);
        if (cfg.command == "lift") return detail::cmd_lift(ctx, out);
        if (cfg.command == "sweep") return detail::cmd_sweep(ctx, out);
        if (cfg.command == "verify") return detail::cmd_verify(ctx, out);
        fail_validation("command", "unknown command " + cfg.command);
    } catch (const Error& e) {
        json j{{"error", {{"kind", detail::kind_name(e.kind())}, {"field", e.field()}, {"message", e.what()}}}};
        err << j.dump() << '\n';
        return e.kind() == ErrorKind::Convergence ? kExitConvergence : kExitValidation;
    }
}

inline int main(int argc, const char* const* argv, std::ostream& out = std::cout,
                std::ostream& err = std::cerr) {
    RunConfig cfg;
    if (auto code = parse_args(argc, argv, cfg, out, err)) return *code;
    return run(cfg, out, err);
}

}  // namespace ambictrl::cli
