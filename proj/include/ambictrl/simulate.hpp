#pragma once

// Monte Carlo engine for the reduced game: reflected Euler-Maruyama paths
// under a threshold strategy and a drift-perturbing adversary, discounted
// costs, and the lift of a reduced path to queue-length coordinates.

#include "ambictrl/error.hpp"
#include "ambictrl/hjb.hpp"
#include "ambictrl/model.hpp"
#include "ambictrl/parallel.hpp"
#include "ambictrl/skorokhod.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace ambictrl {

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of path `index` in a batch seeded with `seed`.
[[nodiscard]] constexpr std::uint64_t path_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return splitmix64(seed ^ index);
}

struct StrategySpec {
    double beta = 0.0;  ///< reflect on [0, beta]

    [[nodiscard]] static StrategySpec reflecting(double beta) { return {beta}; }
};

struct AdversarySpec {
    enum class Kind { Null, Constant, Feedback };
    Kind kind = Kind::Null;
    double psi0 = 0.0;
    std::shared_ptr<const ValueSolution> solution;

    [[nodiscard]] static AdversarySpec null() { return {}; }
    [[nodiscard]] static AdversarySpec constant(double psi0) { return {Kind::Constant, psi0, {}}; }
    [[nodiscard]] static AdversarySpec feedback(std::shared_ptr<const ValueSolution> sol) {
        return {Kind::Feedback, 0.0, std::move(sol)};
    }

    /// psi at workload x.
    [[nodiscard]] double psi(double x) const noexcept {
        switch (kind) {
            case Kind::Null: return 0.0;
            case Kind::Constant: return psi0;
            case Kind::Feedback:
                return solution->eps * solution->reduced.sigma * solution->slope_at(x);
        }
        return 0.0;
    }

    /// Bound on |psi| along any path.
    [[nodiscard]] double psi_bound() const noexcept {
        switch (kind) {
            case Kind::Null: return 0.0;
            case Kind::Constant: return std::abs(psi0);
            case Kind::Feedback:
                return solution->eps * solution->reduced.sigma * solution->reduced.r;
        }
        return 0.0;
    }

    [[nodiscard]] std::string label() const {
        switch (kind) {
            case Kind::Null: return "null";
            case Kind::Constant: return "const:" + std::to_string(psi0);
            case Kind::Feedback: return "feedback";
        }
        return "?";
    }
};

struct SimOptions {
    /// Each Brownian increment is the normalized sum of this many standard
    /// normals, so runs at dt and dt/k with refine k and 1 share a path.
    int refine = 1;
    /// Negate every normal draw.
    bool antithetic = false;
};

struct SimPath {
    double dt = 0.0;
    double horizon = 0.0;
    double x0 = 0.0;
    double beta = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> X, Y, R;
    std::vector<double> B;    ///< reference-measure Brownian motion, B = B^Q + int psi
    std::vector<double> BQ;   ///< Brownian motion under the adversary's measure
    std::vector<double> psi;  ///< psi_k, applied over [t_k, t_{k+1})
    std::size_t wide_steps = 0;

    [[nodiscard]] std::size_t steps() const noexcept { return X.empty() ? 0 : X.size() - 1; }
    [[nodiscard]] double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt; }
};

namespace detail {

inline bool same_reduced(const ReducedInstance& a, const ReducedInstance& b) {
    auto close = [](double u, double v) { return std::abs(u - v) <= 1e-12 * std::max(1.0, std::abs(u)); };
    if (!close(a.m, b.m) || !close(a.sigma, b.sigma) || !close(a.b, b.b) || !close(a.r, b.r) ||
        !close(a.discount, b.discount) || a.h_knots.size() != b.h_knots.size()) {
        return false;
    }
    for (std::size_t k = 0; k < a.h_knots.size(); ++k) {
        if (!close(a.h_knots[k].workload, b.h_knots[k].workload) ||
            !close(a.h_knots[k].cost, b.h_knots[k].cost)) {
            return false;
        }
    }
    return true;
}

inline std::size_t step_count(double dt, double horizon) {
    const double n = std::round(horizon / dt);
    if (n < 1.0) fail_validation("horizon", "horizon must be at least one step");
    return static_cast<std::size_t>(n);
}

}  // namespace detail

inline void validate_simulation(const ReducedInstance& red, const StrategySpec& strat,
                                const AdversarySpec& adv, double x0, double dt, double horizon) {
    if (!(strat.beta > 0.0 && strat.beta <= red.b * (1.0 + 1e-12))) {
        fail_validation("beta", "strategy threshold must lie in (0, b]");
    }
    if (!(x0 >= 0.0 && x0 <= red.b)) fail_validation("x0", "x0 must lie in [0, b]");
    if (!(dt > 0.0) || !std::isfinite(dt)) fail_validation("dt", "dt must be positive");
    if (dt > 1e-2 * red.b / red.sigma) fail_validation("dt", "dt exceeds 1e-2 b / sigma");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) fail_validation("horizon", "horizon must be positive");
    if (adv.kind == AdversarySpec::Kind::Feedback) {
        if (!adv.solution) fail_validation("adversary", "feedback adversary needs a value solution");
        if (!adv.solution->pasted()) fail_validation("adversary", "feedback solution is not pasted");
        if (!detail::same_reduced(adv.solution->reduced, red)) {
            fail_validation("adversary", "feedback solution was solved on a different instance");
        }
    }
    if (adv.kind == AdversarySpec::Kind::Constant && !std::isfinite(adv.psi0)) {
        fail_validation("adversary", "constant psi must be finite");
    }
}

[[nodiscard]] inline SimPath simulate_path(const ReducedInstance& red, const StrategySpec& strat,
                                           const AdversarySpec& adv, double x0, double dt,
                                           double horizon, std::uint64_t seed,
                                           const SimOptions& opts = {}) {
    validate_simulation(red, strat, adv, x0, dt, horizon);
    if (opts.refine < 1) fail_validation("refine", "refine must be at least 1");
    const std::size_t n = detail::step_count(dt, horizon);
    const double beta = std::min(strat.beta, red.b);

    SimPath p;
    p.dt = dt;
    p.horizon = static_cast<double>(n) * dt;
    p.x0 = x0;
    p.beta = beta;
    p.seed = seed;
    p.X.resize(n + 1);
    p.Y.resize(n + 1);
    p.R.resize(n + 1);
    p.B.resize(n + 1);
    p.BQ.resize(n + 1);
    p.psi.resize(n + 1);

    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sign = opts.antithetic ? -1.0 : 1.0;
    const double sqrt_dt = std::sqrt(dt);
    const double inv_sqrt_refine = 1.0 / std::sqrt(static_cast<double>(opts.refine));

    const ReflectStep first = reflect_step(0.0, x0, 0.0, beta);
    p.X[0] = first.x;
    p.Y[0] = first.d_lower;
    p.R[0] = first.d_upper;
    p.B[0] = p.BQ[0] = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double psi = adv.psi(p.X[k]);
        p.psi[k] = psi;
        double xi = 0.0;
        for (int j = 0; j < opts.refine; ++j) xi += normal(gen);
        xi *= sign * inv_sqrt_refine;
        if (!std::isfinite(xi)) fail_domain("non-finite normal draw");
        const double d_bq = sqrt_dt * xi;
        const double d_eta = (red.m + red.sigma * psi) * dt + red.sigma * d_bq;
        const ReflectStep st = reflect_step(p.X[k], d_eta, 0.0, beta);
        p.X[k + 1] = st.x;
        p.Y[k + 1] = p.Y[k] + st.d_lower;
        p.R[k + 1] = p.R[k] + st.d_upper;
        p.BQ[k + 1] = p.BQ[k] + d_bq;
        p.B[k + 1] = p.B[k] + d_bq + psi * dt;
        if (st.wide_step) ++p.wide_steps;
    }
    p.psi[n] = adv.psi(p.X[n]);
    return p;
}

/// Discounted cost: left-endpoint rule for the running terms, Stieltjes sum
/// for rejections with the time-0 jump at full weight.
[[nodiscard]] inline double discounted_cost(const ReducedInstance& red, const SimPath& path,
                                            double eps) {
    if (!(eps >= 0.0)) fail_validation("eps", "eps must be nonnegative");
    const std::size_t n = path.steps();
    double running = 0.0, rejection = red.r * path.R[0];
    for (std::size_t k = 0; k < n; ++k) {
        const double w = std::exp(-red.discount * path.time(k));
        double penalty = 0.0;
        if (path.psi[k] != 0.0) {
            if (eps == 0.0) fail_domain("adversary penalty undefined at eps = 0 with nonzero psi");
            penalty = path.psi[k] * path.psi[k] / (2.0 * eps);
        }
        running += w * (holding_cost_unchecked(red, path.X[k]) - penalty);
        rejection += std::exp(-red.discount * path.time(k + 1)) * red.r * (path.R[k + 1] - path.R[k]);
    }
    return running * path.dt + rejection;
}

/// Budget for truncating the infinite-horizon cost at T.
[[nodiscard]] inline double tail_bound(const ReducedInstance& red, const AdversarySpec& adv,
                                       double eps, double horizon) {
    const double psi_max = adv.psi_bound();
    double b = red.h_max() / red.discount +
               red.r * (std::abs(red.m) + red.sigma * psi_max + red.sigma) * (horizon + 1.0);
    if (eps > 0.0) b += psi_max * psi_max / (2.0 * eps * red.discount);
    return std::exp(-red.discount * horizon) * b;
}

/// Shortest horizon (on a 0.05 grid) whose tail bound is at most `fraction * scale`.
[[nodiscard]] inline double horizon_for_tail(const ReducedInstance& red, const AdversarySpec& adv,
                                             double eps, double scale, double fraction = 0.01) {
    if (!(scale > 0.0) || !(fraction > 0.0)) fail_validation("scale", "tail budget must be positive");
    double T = 0.05;
    while (tail_bound(red, adv, eps, T) > fraction * scale) {
        T += 0.05;
        if (T > 1e4) fail_convergence("no horizon meets the tail budget");
    }
    return T;
}

struct CostEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    double dt = 0.0;
    double horizon = 0.0;
    double tail_bound = 0.0;
    std::uint64_t seed = 0;
};

struct McConfig {
    double dt = 1e-3;
    double horizon = 7.0;
    std::size_t n_paths = 10000;
    std::uint64_t seed = 1;
    SimOptions sim{};
};

/// Per-path costs in path order.
[[nodiscard]] inline std::vector<double> mc_costs(const ReducedInstance& red,
                                                  const StrategySpec& strat,
                                                  const AdversarySpec& adv, double x0, double eps,
                                                  const McConfig& cfg) {
    if (cfg.n_paths < 2) fail_validation("n_paths", "n_paths must be at least 2");
    validate_simulation(red, strat, adv, x0, cfg.dt, cfg.horizon);
    if (adv.kind == AdversarySpec::Kind::Feedback &&
        std::abs(adv.solution->eps - eps) > 1e-12 * std::max(1.0, eps)) {
        fail_validation("eps", "cost eps differs from the feedback solution's eps");
    }
    std::vector<double> costs(cfg.n_paths);
    parallel_for(cfg.n_paths, [&](std::size_t i) {
        const SimPath p = simulate_path(red, strat, adv, x0, cfg.dt, cfg.horizon,
                                        path_seed(cfg.seed, i), cfg.sim);
        costs[i] = discounted_cost(red, p, eps);
    });
    return costs;
}

struct SampleStats {
    double mean = 0.0;
    double std_error = 0.0;
};

[[nodiscard]] inline SampleStats sample_stats(const std::vector<double>& v) {
    SampleStats s;
    const double n = static_cast<double>(v.size());
    if (v.empty()) return s;
    double sum = 0.0;
    for (double c : v) sum += c;
    s.mean = sum / n;
    if (v.size() < 2) return s;
    double ss = 0.0;
    for (double c : v) ss += (c - s.mean) * (c - s.mean);
    s.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return s;
}

[[nodiscard]] inline CostEstimate mc_estimate(const ReducedInstance& red, const StrategySpec& strat,
                                              const AdversarySpec& adv, double x0, double eps,
                                              const McConfig& cfg) {
    const std::vector<double> costs = mc_costs(red, strat, adv, x0, eps, cfg);
    const SampleStats st = sample_stats(costs);
    CostEstimate est;
    est.mean = st.mean;
    est.std_error = st.std_error;
    est.n_paths = cfg.n_paths;
    est.dt = cfg.dt;
    est.horizon = static_cast<double>(detail::step_count(cfg.dt, cfg.horizon)) * cfg.dt;
    est.tail_bound = tail_bound(red, adv, eps, est.horizon);
    est.seed = cfg.seed;
    return est;
}

/// Richardson-style bias estimate from runs at dt and 2 dt, assuming the
/// error scales like sqrt(dt) (discretely monitored reflection).
[[nodiscard]] inline double dt_bias_budget(double mean_dt, double mean_2dt) noexcept {
    return std::abs(mean_dt - mean_2dt) / (std::sqrt(2.0) - 1.0);
}

struct LiftedPath {
    std::size_t classes = 0;
    /// Row k holds the class vector at t_k.
    std::vector<std::vector<double>> X_hat, Y_hat, R_hat, B_hat, psi_hat;
    double cost_reduced = 0.0;
    double cost_lifted = 0.0;
    // Largest relative deviation of each identity over the mesh.
    double holding_identity_err = 0.0;
    double idleness_identity_err = 0.0;
    double penalty_identity_err = 0.0;
    double cost_identity_err = 0.0;
};

/// Lifts a reduced path to queue lengths. eps is the aggregate ambiguity the
/// path was played under; the class weights eps_hat are rescaled to match it.
[[nodiscard]] inline LiftedPath lift_path(const SimPath& path, const ReducedInstance& red,
                                          const MultiClassInstance& raw, double eps,
                                          std::uint64_t seed) {
    const MultiClassInstance inst = validate_instance(raw, {.renormalize_load = true});
    const std::size_t I = inst.class_count();
    if (I != red.class_count()) fail_validation("class_count", "instance and reduced instance disagree");
    const std::size_t n = path.steps();
    if (path.X.size() != n + 1 || path.psi.size() != n + 1 || path.B.size() != n + 1) {
        fail_validation("path", "path arrays disagree in length");
    }

    LiftedPath L;
    L.classes = I;
    std::vector<double> m_hat(I), sigma_hat(I), u(I), eps_hat(I);
    double s_weight = 0.0;
    for (std::size_t i = 0; i < I; ++i) {
        const double rho = inst.lambda[i] / inst.mu[i];
        m_hat[i] = inst.lambda_hat[i] - rho * inst.mu_hat[i];
        sigma_hat[i] = std::sqrt(2.0 * inst.lambda[i]);
        u[i] = red.theta_sigma[i] / red.sigma;
        eps_hat[i] = inst.eps_hat[i] * (eps / red.eps);
        s_weight += red.theta_sigma[i] * red.theta_sigma[i] * eps_hat[i];
    }

    // B_hat = u B + (I - u u^T) W with W independent of B.
    std::mt19937_64 gen(splitmix64(seed ^ 0xA5A5A5A5A5A5A5A5ULL));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sqrt_dt = std::sqrt(path.dt);
    std::vector<double> W(I, 0.0);

    const std::vector<double> x0_hat = gamma_lift(red, inst, path.x0);
    L.X_hat.resize(n + 1);
    L.Y_hat.resize(n + 1);
    L.R_hat.resize(n + 1);
    L.B_hat.resize(n + 1);
    L.psi_hat.resize(n + 1);
    const std::size_t is = red.i_star;
    for (std::size_t k = 0; k <= n; ++k) {
        if (k > 0) {
            for (std::size_t i = 0; i < I; ++i) W[i] += sqrt_dt * normal(gen);
        }
        double uw = 0.0;
        for (std::size_t i = 0; i < I; ++i) uw += u[i] * W[i];
        const double t = path.time(k);
        auto& xh = L.X_hat[k];
        xh = gamma_lift(red, inst, path.X[k]);
        auto& rh = L.R_hat[k];
        rh.assign(I, 0.0);
        rh[is] = path.R[k] * inst.mu[is];
        auto& bh = L.B_hat[k];
        bh.resize(I);
        auto& yh = L.Y_hat[k];
        yh.resize(I);
        auto& ph = L.psi_hat[k];
        ph.resize(I);
        for (std::size_t i = 0; i < I; ++i) {
            bh[i] = u[i] * path.B[k] + W[i] - u[i] * uw;
            yh[i] = xh[i] - x0_hat[i] - m_hat[i] * t - sigma_hat[i] * bh[i] + rh[i];
            ph[i] = s_weight > 0.0
                        ? red.sigma * path.psi[k] * red.theta_sigma[i] * eps_hat[i] / s_weight
                        : 0.0;
        }

        double hx = 0.0, ty = 0.0, pen_hat = 0.0;
        for (std::size_t i = 0; i < I; ++i) {
            hx += inst.h_hat[i] * xh[i];
            ty += red.theta[i] * yh[i];
            if (ph[i] != 0.0) pen_hat += ph[i] * ph[i] / (2.0 * eps_hat[i]);
        }
        const double h = holding_cost_unchecked(red, path.X[k]);
        const double pen = path.psi[k] != 0.0 ? path.psi[k] * path.psi[k] / (2.0 * eps) : 0.0;
        auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
        L.holding_identity_err = std::max(L.holding_identity_err, rel(hx, h));
        L.idleness_identity_err = std::max(L.idleness_identity_err, rel(ty, path.Y[k]));
        L.penalty_identity_err = std::max(L.penalty_identity_err, rel(pen_hat, pen));
    }

    // Multiclass cost from the lifted processes.
    double running = 0.0;
    double rejection = 0.0;
    for (std::size_t i = 0; i < I; ++i) rejection += inst.r_hat[i] * L.R_hat[0][i];
    for (std::size_t k = 0; k < n; ++k) {
        double hx = 0.0, pen_hat = 0.0, dr = 0.0;
        for (std::size_t i = 0; i < I; ++i) {
            hx += inst.h_hat[i] * L.X_hat[k][i];
            if (L.psi_hat[k][i] != 0.0) pen_hat += L.psi_hat[k][i] * L.psi_hat[k][i] / (2.0 * eps_hat[i]);
            dr += inst.r_hat[i] * (L.R_hat[k + 1][i] - L.R_hat[k][i]);
        }
        running += std::exp(-red.discount * path.time(k)) * (hx - pen_hat);
        rejection += std::exp(-red.discount * path.time(k + 1)) * dr;
    }
    L.cost_lifted = running * path.dt + rejection;
    L.cost_reduced = discounted_cost(red, path, eps);
    L.cost_identity_err =
        std::abs(L.cost_lifted - L.cost_reduced) / std::max(1.0, std::abs(L.cost_reduced));
    return L;
}

struct EquilibriumRow {
    std::string label;
    double mean = 0.0;
    double std_error = 0.0;
    double gap = 0.0;     ///< mean - saddle mean
    double gap_se = 0.0;  ///< standard error of the paired per-path differences
    bool minimizer_side = false;
    bool passes = false;
};

struct EquilibriumReport {
    double x0 = 0.0;
    double value = 0.0;  ///< V(x0; eps) from the solver
    CostEstimate saddle;
    std::vector<EquilibriumRow> rows;
    std::size_t lifted_paths = 0;
    double lifted_mean = 0.0;
    double max_lift_cost_err = 0.0;
    bool all_pass = true;
};

/// Compares the saddle pair against threshold deviations (under the feedback
/// adversary) and adversary deviations (under the optimal threshold), using
/// common random numbers. Minimizer deviations must not be cheaper and
/// adversary deviations must not be costlier, each within 3 standard errors.
[[nodiscard]] inline EquilibriumReport equilibrium_report(
    const ReducedInstance& red, const MultiClassInstance& inst,
    std::shared_ptr<const ValueSolution> sol, double x0, const std::vector<double>& beta_devs,
    const std::vector<AdversarySpec>& adv_devs, const McConfig& cfg, std::size_t lift_count = 100) {
    if (!sol || !sol->pasted()) fail_validation("solution", "equilibrium report needs a pasted solution");
    const double eps = sol->eps;
    const AdversarySpec feedback = AdversarySpec::feedback(sol);
    const StrategySpec optimal = StrategySpec::reflecting(sol->beta);

    EquilibriumReport rep;
    rep.x0 = x0;
    rep.value = sol->value_at(x0);
    const std::vector<double> saddle = mc_costs(red, optimal, feedback, x0, eps, cfg);
    const SampleStats ss = sample_stats(saddle);
    rep.saddle.mean = ss.mean;
    rep.saddle.std_error = ss.std_error;
    rep.saddle.n_paths = cfg.n_paths;
    rep.saddle.dt = cfg.dt;
    rep.saddle.horizon = static_cast<double>(detail::step_count(cfg.dt, cfg.horizon)) * cfg.dt;
    rep.saddle.tail_bound = tail_bound(red, feedback, eps, rep.saddle.horizon);
    rep.saddle.seed = cfg.seed;

    auto add_row = [&](std::string label, const std::vector<double>& costs, bool minimizer) {
        std::vector<double> diff(costs.size());
        for (std::size_t i = 0; i < costs.size(); ++i) diff[i] = costs[i] - saddle[i];
        const SampleStats cs = sample_stats(costs), ds = sample_stats(diff);
        EquilibriumRow row{std::move(label), cs.mean, cs.std_error, ds.mean, ds.std_error, minimizer,
                           false};
        row.passes = minimizer ? row.gap >= -3.0 * row.gap_se : row.gap <= 3.0 * row.gap_se;
        rep.all_pass = rep.all_pass && row.passes;
        rep.rows.push_back(std::move(row));
    };

    for (double b : beta_devs) {
        add_row("beta=" + std::to_string(b),
                mc_costs(red, StrategySpec::reflecting(b), feedback, x0, eps, cfg), true);
    }
    for (const auto& adv : adv_devs) {
        add_row("adversary=" + adv.label(), mc_costs(red, optimal, adv, x0, eps, cfg), false);
    }

    rep.lifted_paths = std::min(lift_count, cfg.n_paths);
    double sum = 0.0;
    for (std::size_t i = 0; i < rep.lifted_paths; ++i) {
        const SimPath p = simulate_path(red, optimal, feedback, x0, cfg.dt, cfg.horizon,
                                        path_seed(cfg.seed, i), cfg.sim);
        const LiftedPath L = lift_path(p, red, inst, eps, path_seed(cfg.seed, i));
        sum += L.cost_lifted;
        rep.max_lift_cost_err = std::max(rep.max_lift_cost_err, L.cost_identity_err);
    }
    if (rep.lifted_paths > 0) rep.lifted_mean = sum / static_cast<double>(rep.lifted_paths);
    return rep;
}

}  // namespace ambictrl
