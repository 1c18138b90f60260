#pragma once

// Comparative statics in the ambiguity level eps: monotonicity and
// continuity of V, convergence to the risk-neutral value, threshold
// sandwiches, and the uniqueness condition for the optimal threshold.

#include "ambictrl/error.hpp"
#include "ambictrl/hjb.hpp"
#include "ambictrl/model.hpp"
#include "ambictrl/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ambictrl {

enum class Uniqueness { Unique, PossiblyNonUnique };

struct UniquenessVerdict {
    Uniqueness verdict = Uniqueness::Unique;
    /// Input index of a class whose slope h_hat*mu equals rho r.
    std::optional<std::size_t> offending_class;
    std::string reason;

    [[nodiscard]] bool unique() const noexcept { return verdict == Uniqueness::Unique; }
};

/// Unique when no class slope equals rho r, or when
/// m r + sigma^2 eps r^2 / 2 + h(b) <= 0.
[[nodiscard]] inline UniquenessVerdict uniqueness_check(const ReducedInstance& red, double eps) {
    constexpr double tol = 1e-12;
    const double target = red.discount * red.r;
    UniquenessVerdict v;
    for (std::size_t k = 0; k + 1 < red.h_knots.size(); ++k) {
        const auto& knot = red.h_knots[k];
        if (std::abs(knot.slope - target) <= tol * std::max(1.0, std::abs(target))) {
            v.offending_class = knot.cls;
            break;
        }
    }
    if (!v.offending_class) {
        v.reason = "no class slope equals rho r";
        return v;
    }
    const double level = red.m * red.r + 0.5 * red.sigma * red.sigma * eps * red.r * red.r + red.h_max();
    if (level <= tol * std::max(1.0, red.h_max())) {
        v.reason = "m r + sigma^2 eps r^2 / 2 + h(b) <= 0";
        return v;
    }
    v.verdict = Uniqueness::PossiblyNonUnique;
    v.reason = "class " + std::to_string(*v.offending_class) + " has slope equal to rho r";
    return v;
}

struct SweepRecord {
    double eps = 0.0;
    double s_star = 0.0;
    double beta = 0.0;
    double beta_hat = 0.0;
    double sup_diff = 0.0;  ///< sup |V(.; eps) - V(.; 0)|
    /// min_x V(x; eps) - V(x; eps_prev) against the previous grid entry.
    std::optional<double> margin;
    /// min_x of V(x; eps_prev) + eps sigma^2 r^2 (eps - eps_prev) / (2 eps_prev rho)
    /// - V(x; eps); absent when eps_prev = 0, where the bound is undefined.
    std::optional<double> bound_slack;
    /// Thresholds at eps +- eta fall inside [beta - delta, beta_hat + delta].
    bool sandwich_ok = true;
    double sandwich_lo = 0.0;
    double sandwich_hi = 0.0;
    std::shared_ptr<const ValueSolution> solution;
};

struct SweepReport {
    std::vector<SweepRecord> records;
    std::shared_ptr<const ValueSolution> baseline;  ///< eps = 0
    double scale = 1.0;                             ///< max(1, sup |V|) over the sweep
    double c_fit = 0.0;
    double fit_residual = 0.0;
    std::size_t fit_points = 0;
    double sandwich_delta = 0.0;
    double sandwich_eta = 0.0;

    [[nodiscard]] double min_margin() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& r : records) {
            if (r.margin) m = std::min(m, *r.margin);
        }
        return m;
    }
    [[nodiscard]] double min_bound_slack() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& r : records) {
            if (r.bound_slack) m = std::min(m, *r.bound_slack);
        }
        return m;
    }
    [[nodiscard]] bool sandwich_ok() const {
        return std::all_of(records.begin(), records.end(), [](const auto& r) { return r.sandwich_ok; });
    }
};

struct SweepOptions {
    SolverConfig solver{};
    /// Offset of the neighbouring solves used for the threshold sandwich.
    double sandwich_eta = 1e-7;
    /// Sandwich slack as a fraction of b.
    double sandwich_delta_rel = 1e-6;
    std::size_t fit_points = 3;
};

namespace detail {

inline double sup_abs_diff(const ValueSolution& a, const ValueSolution& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.V.size(); ++i) d = std::max(d, std::abs(a.V[i] - b.V[i]));
    return d;
}

inline ValueSolution solve_or_report(const ReducedInstance& red, double eps, const SolverConfig& cfg) {
    try {
        return shoot(red, eps, cfg);
    } catch (const Error& e) {
        throw Error(e.kind(), "eps", "solve failed at eps = " + std::to_string(eps) + ": " + e.what());
    }
}

}  // namespace detail

[[nodiscard]] inline SweepReport epsilon_sweep(const ReducedInstance& red,
                                               const std::vector<double>& eps_grid,
                                               const SweepOptions& opts = {}) {
    if (eps_grid.empty()) fail_validation("eps_grid", "eps grid is empty");
    for (std::size_t k = 0; k < eps_grid.size(); ++k) {
        if (!(eps_grid[k] >= 0.0) || !std::isfinite(eps_grid[k])) {
            fail_validation("eps_grid", "eps values must be finite and nonnegative");
        }
        if (k > 0 && !(eps_grid[k] > eps_grid[k - 1])) {
            fail_validation("eps_grid", "eps grid must be strictly increasing");
        }
    }

    const std::size_t n = eps_grid.size();
    const double eta = opts.sandwich_eta;
    // Slots: the grid, then eps - eta and eps + eta for each entry, then the
    // eps = 0 baseline when the grid lacks it.
    const bool need_zero = eps_grid.front() != 0.0;
    std::vector<double> targets(eps_grid);
    for (double e : eps_grid) targets.push_back(std::max(0.0, e - eta));
    for (double e : eps_grid) targets.push_back(e + eta);
    if (need_zero) targets.push_back(0.0);
    std::vector<std::optional<ValueSolution>> sols(targets.size());
    parallel_for(targets.size(), [&](std::size_t j) {
        sols[j] = detail::solve_or_report(red, targets[j], opts.solver);
    });

    SweepReport rep;
    rep.sandwich_eta = eta;
    rep.sandwich_delta = opts.sandwich_delta_rel * red.b;
    rep.baseline = std::make_shared<const ValueSolution>(need_zero ? *sols.back() : *sols[0]);
    const double s2 = red.sigma * red.sigma;
    for (std::size_t k = 0; k < n; ++k) {
        SweepRecord r;
        r.solution = std::make_shared<const ValueSolution>(std::move(*sols[k]));
        const ValueSolution& cur = *r.solution;
        r.eps = eps_grid[k];
        r.s_star = cur.s_star;
        r.beta = cur.beta;
        r.beta_hat = cur.beta_hat;
        r.sup_diff = detail::sup_abs_diff(cur, *rep.baseline);
        for (double v : cur.V) rep.scale = std::max(rep.scale, std::abs(v));

        const double lo_beta = sols[n + k]->beta;
        const double hi_beta = sols[2 * n + k]->beta;
        r.sandwich_lo = cur.beta - rep.sandwich_delta;
        r.sandwich_hi = cur.beta_hat + rep.sandwich_delta;
        r.sandwich_ok = lo_beta >= r.sandwich_lo && lo_beta <= r.sandwich_hi &&
                        hi_beta >= r.sandwich_lo && hi_beta <= r.sandwich_hi;

        if (k > 0) {
            const ValueSolution& prev = *rep.records[k - 1].solution;
            const double e1 = r.eps, e2 = prev.eps;
            double margin = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < cur.V.size(); ++i) margin = std::min(margin, cur.V[i] - prev.V[i]);
            r.margin = margin;
            if (e2 > 0.0) {
                const double bound = e1 * s2 * red.r * red.r * (e1 - e2) / (2.0 * e2 * red.discount);
                double slack = std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < cur.V.size(); ++i) {
                    slack = std::min(slack, prev.V[i] + bound - cur.V[i]);
                }
                r.bound_slack = slack;
            }
        }
        rep.records.push_back(std::move(r));
    }

    // Least-squares fit of sup_diff ~ C eps over the smallest positive eps.
    double num = 0.0, den = 0.0;
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rep.records) {
        if (r.eps > 0.0 && pts.size() < opts.fit_points) pts.emplace_back(r.eps, r.sup_diff);
    }
    for (auto [e, d] : pts) {
        num += e * d;
        den += e * e;
    }
    rep.fit_points = pts.size();
    if (den > 0.0) {
        rep.c_fit = num / den;
        double res = 0.0, norm = 0.0;
        for (auto [e, d] : pts) {
            res += (d - rep.c_fit * e) * (d - rep.c_fit * e);
            norm += d * d;
        }
        rep.fit_residual = norm > 0.0 ? std::sqrt(res / norm) : 0.0;
    }
    return rep;
}

}  // namespace ambictrl
