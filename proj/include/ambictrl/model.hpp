#pragma once

// Multiclass problem data and its one-dimensional workload reduction.
//
// Conventions:
//  * Per-class vectors are always in the caller's input order. The canonical
//    order (h_hat*mu descending, stable) is recorded in
//    ReducedInstance::class_order and only matters for the buffer fill order.
//  * Queue-length coordinates throughout. A per-class workload L_i converts
//    to a queue length via xi_i = mu_i * L_i.
//  * Class indices are zero-based.

#include "ambictrl/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ambictrl {

inline constexpr double kCriticalLoadTol = 1e-12;

struct MultiClassInstance {
    std::vector<double> lambda;      ///< first-order arrival rates
    std::vector<double> mu;          ///< first-order service rates
    std::vector<double> lambda_hat;  ///< second-order arrival rates
    std::vector<double> mu_hat;      ///< second-order service rates
    std::vector<double> h_hat;       ///< holding cost per customer per unit time
    std::vector<double> r_hat;       ///< rejection cost per customer
    std::vector<double> b_hat;       ///< buffer caps (queue length)
    std::vector<double> eps_hat;     ///< per-class ambiguity weights
    double discount = 1.0;

    [[nodiscard]] std::size_t class_count() const noexcept { return lambda.size(); }
};

/// One knot of the piecewise-linear holding cost. `slope` and `cls` describe
/// the segment that starts at this knot; the final knot repeats the slope and
/// class of the last segment.
struct CostKnot {
    double workload = 0.0;
    double cost = 0.0;
    double slope = 0.0;
    std::size_t cls = 0;
};

struct ReducedInstance {
    std::vector<double> theta;          ///< 1/mu_i, input order
    std::vector<double> theta_sigma;    ///< (theta * sigma_hat)_i = theta_i sqrt(2 lambda_i)
    double m = 0.0;
    double sigma = 1.0;
    double b = 1.0;
    double eps = 0.0;
    double discount = 1.0;
    std::vector<CostKnot> h_knots;      ///< I+1 knots, cheapest class filled first
    double r = 1.0;
    std::size_t i_star = 0;
    std::vector<std::size_t> class_order;  ///< canonical position -> input index

    [[nodiscard]] std::size_t class_count() const noexcept { return theta.size(); }
    [[nodiscard]] double h_max() const noexcept { return h_knots.back().cost; }
};

struct ReduceOptions {
    /// Rescale lambda so that sum(lambda_i / mu_i) == 1 instead of rejecting
    /// instances that miss the critical-load constraint.
    bool renormalize_load = false;
};

namespace detail {

inline void require_size(std::span<const double> v, std::size_t n, const char* field) {
    if (v.size() != n) {
        fail_validation(field, std::string(field) + ": expected " + std::to_string(n) +
                                   " entries, got " + std::to_string(v.size()));
    }
}

inline void require_positive(std::span<const double> v, const char* field) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]) || v[i] <= 0.0) {
            fail_validation(field, std::string(field) + "[" + std::to_string(i) +
                                       "] must be positive and finite");
        }
    }
}

inline void require_finite(std::span<const double> v, const char* field) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            fail_validation(field, std::string(field) + "[" + std::to_string(i) +
                                       "] must be finite");
        }
    }
}

}  // namespace detail

/// Checks shapes, positivity and the critical-load constraint. Returns the
/// instance, with lambda rescaled when `opts.renormalize_load` is set.
[[nodiscard]] inline MultiClassInstance validate_instance(MultiClassInstance inst,
                                                          const ReduceOptions& opts = {}) {
    const std::size_t n = inst.class_count();
    if (n == 0) fail_validation("class_count", "class_count must be positive");
    detail::require_size(inst.mu, n, "mu");
    detail::require_size(inst.lambda_hat, n, "lambda_hat");
    detail::require_size(inst.mu_hat, n, "mu_hat");
    detail::require_size(inst.h_hat, n, "h_hat");
    detail::require_size(inst.r_hat, n, "r_hat");
    detail::require_size(inst.b_hat, n, "b_hat");
    detail::require_size(inst.eps_hat, n, "eps_hat");
    detail::require_positive(inst.lambda, "lambda");
    detail::require_positive(inst.mu, "mu");
    detail::require_finite(inst.lambda_hat, "lambda_hat");
    detail::require_finite(inst.mu_hat, "mu_hat");
    detail::require_positive(inst.h_hat, "h_hat");
    detail::require_positive(inst.r_hat, "r_hat");
    detail::require_positive(inst.b_hat, "b_hat");
    detail::require_positive(inst.eps_hat, "eps_hat");
    if (!std::isfinite(inst.discount) || inst.discount <= 0.0) {
        fail_validation("discount", "discount must be positive and finite");
    }

    double load = 0.0;
    for (std::size_t i = 0; i < n; ++i) load += inst.lambda[i] / inst.mu[i];
    if (std::abs(load - 1.0) > kCriticalLoadTol) {
        if (!opts.renormalize_load) {
            fail_validation("lambda", "instance is not critically loaded: sum(lambda/mu) = " +
                                          std::to_string(load));
        }
        for (double& l : inst.lambda) l /= load;
    }
    return inst;
}

/// Canonical class order: h_hat*mu descending, ties kept in input order.
[[nodiscard]] inline std::vector<std::size_t> canonical_order(const MultiClassInstance& inst) {
    std::vector<std::size_t> order(inst.class_count());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return inst.h_hat[a] * inst.mu[a] > inst.h_hat[b] * inst.mu[b];
    });
    return order;
}

[[nodiscard]] inline ReducedInstance reduce_instance(const MultiClassInstance& raw,
                                                     const ReduceOptions& opts = {}) {
    const MultiClassInstance inst = validate_instance(raw, opts);
    const std::size_t n = inst.class_count();

    ReducedInstance red;
    red.discount = inst.discount;
    red.theta.resize(n);
    red.theta_sigma.resize(n);
    red.class_order = canonical_order(inst);

    double m = 0.0, sigma2 = 0.0, b = 0.0, eps_num = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double theta = 1.0 / inst.mu[i];
        const double rho = inst.lambda[i] / inst.mu[i];
        const double m_hat = inst.lambda_hat[i] - rho * inst.mu_hat[i];
        red.theta[i] = theta;
        red.theta_sigma[i] = theta * std::sqrt(2.0 * inst.lambda[i]);
        m += theta * m_hat;
        sigma2 += red.theta_sigma[i] * red.theta_sigma[i];
        b += theta * inst.b_hat[i];
        eps_num += red.theta_sigma[i] * red.theta_sigma[i] * inst.eps_hat[i];
    }
    red.m = m;
    red.sigma = std::sqrt(sigma2);
    red.b = b;
    red.eps = eps_num / sigma2;

    // Fill the cheapest buffers first: walk the canonical order backwards.
    red.h_knots.reserve(n + 1);
    double w = 0.0, cost = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        const std::size_t cls = red.class_order[k];
        const double slope = inst.h_hat[cls] * inst.mu[cls];
        red.h_knots.push_back({w, cost, slope, cls});
        w += red.theta[cls] * inst.b_hat[cls];
        cost += inst.h_hat[cls] * inst.b_hat[cls];
    }
    red.h_knots.push_back({b, cost, red.h_knots.back().slope, red.h_knots.back().cls});

    red.r = inst.r_hat[0] * inst.mu[0];
    red.i_star = 0;
    for (std::size_t i = 1; i < n; ++i) {
        const double ri = inst.r_hat[i] * inst.mu[i];
        if (ri < red.r) {
            red.r = ri;
            red.i_star = i;
        }
    }
    return red;
}

/// Index of the holding-cost segment containing x (the last segment for x == b).
[[nodiscard]] inline std::size_t segment_index(const ReducedInstance& red, double x) noexcept {
    const auto& knots = red.h_knots;
    const std::size_t segs = knots.size() - 1;
    std::size_t lo = 0, hi = segs;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (x >= knots[mid].workload) lo = mid;
        else hi = mid;
    }
    return lo;
}

/// h(x) without the domain check. Hot path for the integrator.
[[nodiscard]] inline double holding_cost_unchecked(const ReducedInstance& red, double x) noexcept {
    const CostKnot& k = red.h_knots[segment_index(red, x)];
    return k.cost + k.slope * (x - k.workload);
}

/// Right derivative h'(x+); the left derivative at x == b.
[[nodiscard]] inline double holding_cost_slope(const ReducedInstance& red, double x) noexcept {
    return red.h_knots[segment_index(red, x)].slope;
}

inline void check_workload(const ReducedInstance& red, double x) {
    if (!(x >= 0.0 && x <= red.b)) {
        fail_domain("workload " + std::to_string(x) + " outside [0, " + std::to_string(red.b) + "]");
    }
}

[[nodiscard]] inline double holding_cost(const ReducedInstance& red, double x) {
    check_workload(red, x);
    return holding_cost_unchecked(red, x);
}

/// Cheapest queue-length vector with workload x: buffers fill in
/// h_hat*mu ascending order and at most one is partially filled.
[[nodiscard]] inline std::vector<double> gamma_lift(const ReducedInstance& red,
                                                   const MultiClassInstance& inst, double x) {
    check_workload(red, x);
    if (inst.class_count() != red.class_count()) {
        fail_validation("class_count", "instance and reduced instance disagree on class count");
    }
    std::vector<double> xi(red.class_count(), 0.0);
    const auto& knots = red.h_knots;
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        const std::size_t cls = knots[k].cls;
        if (x >= knots[k + 1].workload) {
            xi[cls] = inst.b_hat[cls];
        } else if (x > knots[k].workload) {
            xi[cls] = std::min((x - knots[k].workload) * inst.mu[cls], inst.b_hat[cls]);
        }
    }
    return xi;
}

[[nodiscard]] inline std::vector<double> epsilon_from_kappa(
    std::span<const std::pair<double, double>> kappa) {
    std::vector<double> eps;
    eps.reserve(kappa.size());
    for (std::size_t i = 0; i < kappa.size(); ++i) {
        const auto [k1, k2] = kappa[i];
        if (!std::isfinite(k1) || !std::isfinite(k2) || k1 <= 0.0 || k2 <= 0.0) {
            fail_validation("kappa", "kappa[" + std::to_string(i) + "] must be positive and finite");
        }
        eps.push_back(0.5 * (k1 + k2));
    }
    return eps;
}

/// Instance used in the repository defaults: I = 3, h_hat = (1, 5/2, 3/2),
/// mu = (3, 1, 3/2), b_hat = (4, 7, 6), balanced load, unit costs.
[[nodiscard]] inline MultiClassInstance default_instance() {
    MultiClassInstance inst;
    inst.lambda = {1.0, 1.0 / 3.0, 0.5};
    inst.mu = {3.0, 1.0, 1.5};
    inst.lambda_hat = {0.0, 0.0, 0.0};
    inst.mu_hat = {1.0, 1.0, 1.0};
    inst.h_hat = {1.0, 2.5, 1.5};
    inst.r_hat = {1.0, 1.0, 1.0};
    inst.b_hat = {4.0, 7.0, 6.0};
    inst.eps_hat = {1.0, 1.0, 1.0};
    inst.discount = 1.0;
    return inst;
}

}  // namespace ambictrl
