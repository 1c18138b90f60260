#pragma once

// Two-sided Skorokhod map on [alpha, beta] for paths sampled on a uniform mesh.
// Regulators act at step granularity, which is the exact map for the
// piecewise-constant interpolation of the input.

#include "ambictrl/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace ambictrl {

struct PathGrid {
    std::vector<double> t;
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const noexcept { return t.size(); }
};

/// Uniform mesh 0, dt, ..., n dt with zero values.
[[nodiscard]] inline PathGrid uniform_grid(std::size_t steps, double dt) {
    PathGrid g;
    g.t.resize(steps + 1);
    g.values.assign(steps + 1, 0.0);
    for (std::size_t k = 0; k <= steps; ++k) g.t[k] = static_cast<double>(k) * dt;
    return g;
}

inline void validate_grid(const PathGrid& g) {
    if (g.t.empty()) fail_validation("t", "path grid is empty");
    if (g.t.size() != g.values.size()) fail_validation("values", "t and values differ in length");
    if (g.t.front() != 0.0) fail_validation("t", "path grid must start at 0");
    for (double v : g.values) {
        if (!std::isfinite(v)) fail_validation("values", "path values must be finite");
    }
    if (g.t.size() < 2) return;
    const double dt = g.t[1] - g.t[0];
    if (!(dt > 0.0)) fail_validation("t", "times must be strictly increasing");
    for (std::size_t k = 1; k < g.t.size(); ++k) {
        const double step = g.t[k] - g.t[k - 1];
        if (!(step > 0.0) || std::abs(step - dt) > 1e-12 * std::max(1.0, dt)) {
            fail_validation("t", "mesh is not uniform at index " + std::to_string(k));
        }
    }
}

struct ReflectStep {
    double x;        ///< constrained value after the step
    double d_lower;  ///< increment of the lower regulator
    double d_upper;  ///< increment of the upper regulator
    /// The increment spans more than beta - alpha, so within the step the
    /// continuous path would have touched both boundaries.
    bool wide_step = false;
};

/// One step of the map: clip x_prev + d_eta onto [alpha, beta], lower clip
/// first, booking whatever each clip removes.
[[nodiscard]] inline ReflectStep reflect_step(double x_prev, double d_eta, double alpha,
                                              double beta) noexcept {
    ReflectStep st{x_prev + d_eta, 0.0, 0.0, std::abs(d_eta) > beta - alpha};
    if (st.x < alpha) {
        st.d_lower = alpha - st.x;
        st.x = alpha;
    }
    if (st.x > beta) {
        st.d_upper = st.x - beta;
        st.x = beta;
    }
    return st;
}

struct ReflectionTriple {
    PathGrid chi, zeta1, zeta2;
    std::size_t wide_steps = 0;  ///< diagnostic: dt too coarse for the interval
};

[[nodiscard]] inline ReflectionTriple reflect(const PathGrid& eta, double alpha, double beta) {
    if (!(alpha < beta)) fail_validation("alpha", "alpha must be below beta");
    validate_grid(eta);
    const std::size_t n = eta.size();
    ReflectionTriple out;
    out.chi = {eta.t, std::vector<double>(n)};
    out.zeta1 = {eta.t, std::vector<double>(n)};
    out.zeta2 = {eta.t, std::vector<double>(n)};

    // Time 0: clip the starting point, booking the jump.
    const ReflectStep first = reflect_step(0.0, eta.values[0], alpha, beta);
    out.chi.values[0] = first.x;
    out.zeta1.values[0] = first.d_lower;
    out.zeta2.values[0] = first.d_upper;
    for (std::size_t k = 1; k < n; ++k) {
        const ReflectStep st =
            reflect_step(out.chi.values[k - 1], eta.values[k] - eta.values[k - 1], alpha, beta);
        out.chi.values[k] = st.x;
        out.zeta1.values[k] = out.zeta1.values[k - 1] + st.d_lower;
        out.zeta2.values[k] = out.zeta2.values[k - 1] + st.d_upper;
        if (st.wide_step) ++out.wide_steps;
    }
    return out;
}

}  // namespace ambictrl
