#pragma once

// Free-boundary HJB solver for the reduced game.
//
// The value function solves
//     [V'' + H(x, V, V')] ^ V' ^ [r - V'] = 0 on (0, b),  V'(0) = 0, V'(b) = r,
//     H(x, y, z) = (2/sigma^2) (m z + sigma^2 eps z^2 / 2 - rho y + h(x)).
// It is built by shooting on the initial value s = k(0) of the Cauchy problem
//     k'' = -H(x, k, F(k')),  k(0) = s, k'(0) = 0,
// until k' reaches r with zero curvature (smooth pasting) at some beta, and
// then continuing V linearly with slope r on [beta, b].

#include "ambictrl/error.hpp"
#include "ambictrl/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ambictrl {

/// C^1 clamp that is the identity on [-r, r] and saturates at +-3r/2.
struct ClampSpec {
    double r = 1.0;

    [[nodiscard]] double operator()(double z) const noexcept {
        if (z < -2.0 * r) return -1.5 * r;
        if (z < -r) return 0.5 * r + 2.0 * z + z * z / (2.0 * r);
        if (z <= r) return z;
        if (z < 2.0 * r) return -0.5 * r + 2.0 * z - z * z / (2.0 * r);
        return 1.5 * r;
    }

    [[nodiscard]] double derivative(double z) const noexcept {
        if (z < -2.0 * r || z >= 2.0 * r) return 0.0;
        if (z < -r) return 2.0 + z / r;
        if (z <= r) return 1.0;
        return 2.0 - z / r;
    }
};

[[nodiscard]] inline double clamp(const ClampSpec& spec, double z) noexcept { return spec(z); }

[[nodiscard]] inline double hamiltonian_unchecked(const ReducedInstance& red, double eps, double x,
                                                  double y, double z) noexcept {
    const double s2 = red.sigma * red.sigma;
    return (2.0 / s2) *
           (red.m * z + 0.5 * s2 * eps * z * z - red.discount * y + holding_cost_unchecked(red, x));
}

[[nodiscard]] inline double hamiltonian(const ReducedInstance& red, double eps, double x, double y,
                                        double z) {
    check_workload(red, x);
    return hamiltonian_unchecked(red, eps, x, y, z);
}

enum class ShotClass { TooLow, TooHigh, Pasted };

[[nodiscard]] inline const char* to_string(ShotClass c) noexcept {
    switch (c) {
        case ShotClass::TooLow: return "TooLow";
        case ShotClass::TooHigh: return "TooHigh";
        case ShotClass::Pasted: return "Pasted";
    }
    return "?";
}

struct SolverConfig {
    std::size_t cells = 4096;
    std::size_t min_cells = 1000;
    /// Curvature tolerance for smooth pasting; <= 0 selects 1e-6 (2/sigma^2) h(b).
    double paste_tol = 0.0;
    /// Bisection stops once the bracket is narrower than this; 0 bisects to
    /// machine precision.
    double s_tol = 0.0;
    int max_iterations = 400;
    int max_bracket_doublings = 60;
    /// Classifications sampled across the initial bracket to confirm that
    /// TooLow / Pasted / TooHigh occupy consecutive intervals.
    int structure_samples = 8;
};

[[nodiscard]] inline double default_paste_tol(const ReducedInstance& red) {
    return 1e-6 * (2.0 / (red.sigma * red.sigma)) * red.h_max();
}

[[nodiscard]] inline double resolved_paste_tol(const ReducedInstance& red, const SolverConfig& cfg) {
    return cfg.paste_tol > 0.0 ? cfg.paste_tol : default_paste_tol(red);
}

struct CauchyTrace {
    double s = 0.0;
    double dx = 0.0;
    std::vector<double> x, k, k_prime, k_second;
    double beta_s = 0.0;
    double k_at_beta = 0.0;
    double pasting_curvature = 0.0;
    /// True when k' reached r inside [0, b] (beta_s located by root polish).
    bool crossed = false;
    ShotClass classification = ShotClass::TooLow;
};

namespace detail {

struct OdeState {
    double k;
    double kp;
};

/// Right-hand side of the clamped Cauchy problem plus the breakpoints of h,
/// which the integrator steps onto exactly so every RK4 stage sees a smooth
/// right-hand side.
class CauchyRhs {
public:
    CauchyRhs(const ReducedInstance& red, double eps)
        : red_(red), eps_(eps), clamp_{red.r}, two_over_s2_(2.0 / (red.sigma * red.sigma)) {
        for (const auto& knot : red.h_knots) {
            if (knot.workload > 0.0 && knot.workload < red.b) kinks_.push_back(knot.workload);
        }
    }

    [[nodiscard]] double second(double x, double k, double kp) const noexcept {
        const double z = clamp_(kp);
        const double s2 = red_.sigma * red_.sigma;
        return -two_over_s2_ *
               (red_.m * z + 0.5 * s2 * eps_ * z * z - red_.discount * k +
                holding_cost_unchecked(red_, x));
    }

    [[nodiscard]] OdeState rk4(double x, OdeState s, double h) const noexcept {
        const double a1 = second(x, s.k, s.kp);
        const double k2k = s.k + 0.5 * h * s.kp, k2p = s.kp + 0.5 * h * a1;
        const double a2 = second(x + 0.5 * h, k2k, k2p);
        const double k3k = s.k + 0.5 * h * k2p, k3p = s.kp + 0.5 * h * a2;
        const double a3 = second(x + 0.5 * h, k3k, k3p);
        const double k4k = s.k + h * k3p, k4p = s.kp + h * a3;
        const double a4 = second(x + h, k4k, k4p);
        return {s.k + h / 6.0 * (s.kp + 2.0 * k2p + 2.0 * k3p + k4p),
                s.kp + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)};
    }

    /// Advances from x by tau (>= 0), splitting the step at breakpoints of h.
    [[nodiscard]] OdeState advance(double x, OdeState s, double tau) const noexcept {
        const double end = x + tau;
        for (double kink : kinks_) {
            if (kink > x && kink < end) {
                s = rk4(x, s, kink - x);
                x = kink;
            }
        }
        if (end > x) s = rk4(x, s, end - x);
        return s;
    }

private:
    const ReducedInstance& red_;
    double eps_;
    ClampSpec clamp_;
    double two_over_s2_;
    std::vector<double> kinks_;
};

/// Largest value of the cubic Hermite interpolant of k' over one cell and
/// the offset where it is attained.
inline std::pair<double, double> hermite_max(double p0, double m0, double p1, double m1, double h) {
    auto eval = [&](double t) {
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * p0 + (t3 - 2 * t2 + t) * h * m0 + (-2 * t3 + 3 * t2) * p1 +
               (t3 - t2) * h * m1;
    };
    // Golden-section search; the interpolant is unimodal when m0 > 0 > m1.
    constexpr double g = 0.6180339887498949;
    double a = 0.0, b = 1.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = eval(c), fd = eval(d);
    for (int it = 0; it < 60; ++it) {
        if (fc > fd) {
            b = d; d = c; fd = fc;
            c = b - g * (b - a); fc = eval(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + g * (b - a); fd = eval(d);
        }
    }
    const double t = 0.5 * (a + b);
    return {eval(t), t * h};
}

struct Crossing {
    double tau;
    OdeState state;
    double curvature;
};

/// Root of k'(x_i + tau) = r inside [lo, hi] by safeguarded Newton, where
/// k'(lo) < r <= k'(hi). States are recomputed from the cell's left node.
inline Crossing polish_crossing(const CauchyRhs& rhs, double x0, OdeState s0, double r, double lo,
                                double hi, double tau) {
    auto eval = [&](double t) {
        const OdeState st = rhs.advance(x0, s0, t);
        return Crossing{t, st, rhs.second(x0 + t, st.k, st.kp)};
    };
    Crossing c = eval(tau);
    for (int it = 0; it < 100; ++it) {
        const double f = c.state.kp - r;
        if (f >= 0.0) hi = c.tau;
        else lo = c.tau;
        if (std::abs(f) <= 4.0 * std::numeric_limits<double>::epsilon() * r || hi - lo <= 0.0) break;
        double next = c.tau - f / c.curvature;
        if (!(c.curvature > 0.0) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == c.tau) break;
        c = eval(next);
    }
    if (c.state.kp < r && hi > c.tau) {
        // Land on the side where k' >= r so beta_s satisfies its definition.
        c = eval(hi);
    }
    return c;
}

}  // namespace detail

/// Integrates the clamped Cauchy problem from k(0) = s, k'(0) = 0 on a
/// uniform mesh of `cells` cells and classifies the shot.
[[nodiscard]] inline CauchyTrace integrate_cauchy(const ReducedInstance& red, double eps, double s,
                                                  const SolverConfig& cfg = {}) {
    if (cfg.cells < cfg.min_cells || cfg.cells == 0) {
        fail_validation("cells", "cells must be at least " + std::to_string(cfg.min_cells));
    }
    if (!std::isfinite(s)) fail_domain("initial value s must be finite");
    if (!(eps >= 0.0) || !std::isfinite(eps)) fail_validation("eps", "eps must be nonnegative");
    const std::size_t n = cfg.cells;
    const double paste_tol = resolved_paste_tol(red, cfg);
    const double r = red.r;

    detail::CauchyRhs rhs(red, eps);
    CauchyTrace tr;
    tr.s = s;
    tr.dx = red.b / static_cast<double>(n);
    tr.x.resize(n + 1);
    tr.k.resize(n + 1);
    tr.k_prime.resize(n + 1);
    tr.k_second.resize(n + 1);

    detail::OdeState st{s, 0.0};
    std::optional<detail::Crossing> crossing;
    std::size_t crossing_cell = 0;
    for (std::size_t i = 0; i <= n; ++i) {
        const double x = (i == n) ? red.b : static_cast<double>(i) * tr.dx;
        tr.x[i] = x;
        tr.k[i] = st.k;
        tr.k_prime[i] = st.kp;
        tr.k_second[i] = rhs.second(x, st.k, st.kp);
        if (!std::isfinite(st.k) || !std::isfinite(st.kp) || !std::isfinite(tr.k_second[i])) {
            fail_convergence("non-finite state at x = " + std::to_string(x) + " for s = " +
                             std::to_string(s));
        }
        if (i == n) break;
        const double h = ((i + 1 == n) ? red.b : static_cast<double>(i + 1) * tr.dx) - x;
        const detail::OdeState next = rhs.advance(x, st, h);

        if (!crossing) {
            if (next.kp >= r) {
                const double t0 = h * (r - st.kp) / (next.kp - st.kp);
                crossing = detail::polish_crossing(rhs, x, st, r, 0.0, h, t0);
                crossing_cell = i;
            } else if (tr.k_second[i] > 0.0) {
                const double a_next = rhs.second(x + h, next.k, next.kp);
                if (a_next < 0.0) {
                    // k' peaks inside the cell; catch a crossing that both nodes miss.
                    const auto [pmax, tmax] =
                        detail::hermite_max(st.kp, tr.k_second[i], next.kp, a_next, h);
                    if (pmax >= r - 1e-12 * r) {
                        const detail::OdeState at = rhs.advance(x, st, tmax);
                        if (at.kp >= r) {
                            crossing = detail::polish_crossing(rhs, x, st, r, 0.0, tmax, 0.5 * tmax);
                            crossing_cell = i;
                        }
                    }
                }
            }
        }
        st = next;
    }

    if (crossing) {
        tr.crossed = true;
        tr.beta_s = std::min(tr.x[crossing_cell] + crossing->tau, red.b);
        tr.k_at_beta = crossing->state.k;
        tr.pasting_curvature = crossing->curvature;
        tr.classification = std::abs(tr.pasting_curvature) <= paste_tol ? ShotClass::Pasted
                                                                         : ShotClass::TooHigh;
    } else {
        tr.crossed = false;
        tr.beta_s = red.b;
        tr.k_at_beta = tr.k[n];
        tr.pasting_curvature = tr.k_second[n];
        tr.classification = (tr.k_prime[n] < r - paste_tol) ? ShotClass::TooLow : ShotClass::Pasted;
    }
    return tr;
}

struct ValueSolution {
    ReducedInstance reduced;
    double eps = 0.0;
    std::vector<double> grid, V, V_prime, V_second;
    double s_star = 0.0;
    double beta = 0.0;
    double beta_hat = 0.0;
    int shoot_iterations = 0;
    double residual_sup = 0.0;
    double paste_tol = 0.0;
    double pasting_curvature = 0.0;
    ShotClass classification = ShotClass::TooLow;

    [[nodiscard]] bool pasted() const noexcept { return classification == ShotClass::Pasted; }
    [[nodiscard]] double dx() const noexcept { return grid.size() > 1 ? grid[1] - grid[0] : 0.0; }

    /// Linear interpolation of V' on the solver grid, clamped to [0, b].
    [[nodiscard]] double slope_at(double x) const noexcept {
        const double b = grid.back();
        if (x <= 0.0) return V_prime.front();
        if (x >= b) return V_prime.back();
        const double h = dx();
        const auto i = std::min(static_cast<std::size_t>(x / h), grid.size() - 2);
        const double t = (x - grid[i]) / (grid[i + 1] - grid[i]);
        return V_prime[i] + t * (V_prime[i + 1] - V_prime[i]);
    }

    /// Linear interpolation of V on the solver grid.
    [[nodiscard]] double value_at(double x) const noexcept {
        const double b = grid.back();
        if (x <= 0.0) return V.front();
        if (x >= b) return V.back();
        const double h = dx();
        const auto i = std::min(static_cast<std::size_t>(x / h), grid.size() - 2);
        const double t = (x - grid[i]) / (grid[i + 1] - grid[i]);
        return V[i] + t * (V[i + 1] - V[i]);
    }
};

/// Largest x >= beta such that V' = r and the ODE both hold on [beta, x].
/// Along the affine continuation this means h' = rho r and
/// rho V = m r + sigma^2 r^2 eps / 2 + h on every holding-cost segment passed.
[[nodiscard]] inline double beta_hat(const ValueSolution& sol) {
    const ReducedInstance& red = sol.reduced;
    const double beta = sol.beta;
    if (beta >= red.b) return red.b;
    const double s2 = red.sigma * red.sigma;
    const double level = red.m * red.r + 0.5 * s2 * sol.eps * red.r * red.r;
    // V on the continuation: V(x) = V(beta) + r (x - beta).
    const double vb = sol.V.back() - red.r * (red.b - beta);
    const double tol = (sol.paste_tol > 0.0 ? sol.paste_tol : default_paste_tol(red)) * s2 / 2.0;
    auto residual = [&](double x) {
        return level - red.discount * (vb + red.r * (x - beta)) + holding_cost_unchecked(red, x);
    };
    const double target = red.discount * red.r;
    const double slope_tol = 1e-12 * std::max(1.0, target);

    double result = beta;
    const auto& knots = red.h_knots;
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
        const double seg_end = knots[k + 1].workload;
        if (seg_end <= beta) continue;
        const double start = std::max(knots[k].workload, beta);
        if (std::abs(residual(start)) > tol || std::abs(residual(seg_end)) > tol) break;
        if (std::abs(knots[k].slope - target) <= slope_tol) result = seg_end;
    }
    return std::min(result, red.b);
}

namespace detail {

inline ValueSolution assemble_solution(const ReducedInstance& red, double eps,
                                       const CauchyTrace& tr, double paste_tol, int iterations) {
    ValueSolution sol;
    sol.reduced = red;
    sol.eps = eps;
    sol.s_star = tr.s;
    sol.paste_tol = paste_tol;
    sol.shoot_iterations = iterations;
    sol.classification = tr.classification;
    sol.pasting_curvature = tr.pasting_curvature;

    const double beta = tr.beta_s;
    const double k_beta = tr.k_at_beta;
    const double k2_beta = tr.pasting_curvature;
    const std::size_t n = tr.x.size() - 1;
    sol.beta = beta;

    sol.grid = tr.x;
    sol.V.resize(n + 1);
    sol.V_prime.resize(n + 1);
    sol.V_second.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        const double x = tr.x[i];
        if (x < beta) {
            sol.V[i] = tr.k[i];
            sol.V_prime[i] = tr.k_prime[i];
            sol.V_second[i] = tr.k_second[i];
        } else {
            sol.V[i] = k_beta + red.r * (x - beta);
            sol.V_prime[i] = red.r;
            sol.V_second[i] = (x == beta) ? k2_beta : 0.0;
        }
        if (!tr.crossed && i == n) {
            // Pasting at b: keep the trace's own boundary slope.
            sol.V_prime[i] = tr.k_prime[i];
            sol.V_second[i] = tr.k_second[i];
        }
    }

    double res = 0.0;
    for (std::size_t i = 0; i <= n && sol.grid[i] <= beta; ++i) {
        res = std::max(res, std::abs(sol.V_second[i] +
                                     hamiltonian_unchecked(red, eps, sol.grid[i], sol.V[i],
                                                           sol.V_prime[i])));
    }
    sol.residual_sup = res;
    sol.beta_hat = beta_hat(sol);
    return sol;
}

inline int class_rank(ShotClass c) noexcept {
    switch (c) {
        case ShotClass::TooLow: return 0;
        case ShotClass::Pasted: return 1;
        case ShotClass::TooHigh: return 2;
    }
    return -1;
}

}  // namespace detail

/// Initial value above which every shot is TooHigh with beta_s <= b/2.
[[nodiscard]] inline double shoot_upper_bound(const ReducedInstance& red, double eps) {
    const double s2 = red.sigma * red.sigma;
    const double r = red.r;
    return (2.0 * std::abs(red.m) * r + 2.0 * s2 * eps * r * r + red.h_max() + r * s2 / red.b) /
           red.discount;
}

/// Solves HJB(eps) by bisection on the shot classification.
[[nodiscard]] inline ValueSolution shoot(const ReducedInstance& red, double eps,
                                         const SolverConfig& cfg = {}) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) fail_validation("eps", "eps must be nonnegative");
    const double paste_tol = resolved_paste_tol(red, cfg);
    int iterations = 0;

    double s_hi = shoot_upper_bound(red, eps) + 1.0;
    CauchyTrace hi = integrate_cauchy(red, eps, s_hi, cfg);
    ++iterations;
    if (hi.classification != ShotClass::TooHigh) {
        if (hi.classification == ShotClass::Pasted && hi.crossed)
            return detail::assemble_solution(red, eps, hi, paste_tol, iterations);
        fail_convergence("upper shooting bound is not TooHigh");
    }

    double s_lo = 0.0;
    std::optional<CauchyTrace> candidate;
    for (int d = 0;; ++d) {
        CauchyTrace lo = integrate_cauchy(red, eps, s_lo, cfg);
        ++iterations;
        if (lo.classification == ShotClass::TooLow) break;
        if (lo.classification == ShotClass::Pasted) {
            if (lo.crossed) return detail::assemble_solution(red, eps, lo, paste_tol, iterations);
            candidate = lo;
            break;
        }
        if (d >= cfg.max_bracket_doublings) fail_convergence("no TooLow shot found below s = 0");
        s_hi = std::min(s_hi, s_lo);
        s_lo = (s_lo == 0.0) ? -1.0 : 2.0 * s_lo;
    }

    if (cfg.structure_samples > 0) {
        int last = -1;
        for (int j = 0; j <= cfg.structure_samples + 1; ++j) {
            const double s = s_lo + (s_hi - s_lo) * j / (cfg.structure_samples + 1.0);
            const int rank = detail::class_rank(integrate_cauchy(red, eps, s, cfg).classification);
            ++iterations;
            if (rank < last) {
                fail_convergence("shot classifications are not ordered in s near s = " +
                                 std::to_string(s));
            }
            last = rank;
        }
    }

    // Bisect on whether k' reaches r inside [0, b]. Pasted shots form a thin
    // band at the edge of the crossing region; continuing to that edge rather
    // than stopping at the first pasted shot pins beta to the tangency.
    std::optional<CauchyTrace> pasted;
    while (iterations < cfg.max_iterations) {
        if (s_hi - s_lo < cfg.s_tol) break;
        const double mid = 0.5 * (s_lo + s_hi);
        if (!(mid > s_lo && mid < s_hi)) break;
        CauchyTrace tr = integrate_cauchy(red, eps, mid, cfg);
        ++iterations;
        if (tr.crossed) {
            s_hi = mid;
            if (tr.classification == ShotClass::Pasted) pasted = std::move(tr);
        } else {
            s_lo = mid;
            if (tr.classification == ShotClass::Pasted) candidate = std::move(tr);
        }
    }
    if (pasted) return detail::assemble_solution(red, eps, *pasted, paste_tol, iterations);
    if (candidate) return detail::assemble_solution(red, eps, *candidate, paste_tol, iterations);
    if (iterations >= cfg.max_iterations) {
        fail_convergence("shooting did not converge within " + std::to_string(cfg.max_iterations) +
                         " iterations");
    }
    // Bracket exhausted without a pasted shot: use the upper end, whose
    // crossing is the closest approach to pasting from above.
    const CauchyTrace last = integrate_cauchy(red, eps, s_hi, cfg);
    return detail::assemble_solution(red, eps, last, paste_tol, iterations + 1);
}

struct ResidualReport {
    double hjb_residual_sup = 0.0;     ///< sup |V'' + H| on [0, beta]
    double fd_residual_sup = 0.0;      ///< same, with V'' differenced from V'
    double reflect_slope_sup = 0.0;    ///< sup |V' - r| on [beta, b]
    double v_prime_at_zero = 0.0;      ///< |V'(0)|
    double v_prime_at_b_err = 0.0;     ///< |V'(b) - r|
    double v_prime_min = 0.0;
    double v_prime_max = 0.0;
    double hjb_inequality_min = 0.0;   ///< min of V'' + H on [beta, b]
    double pasting_curvature = 0.0;
    double integration_defect = 0.0;   ///< Hermite consistency of (V, V', V'') per cell
    double residual_tol = 0.0;
    bool pasted = false;

    [[nodiscard]] bool passes(double boundary_tol = 1e-8, double slope_tol = 1e-10) const noexcept {
        return pasted && hjb_residual_sup <= residual_tol && fd_residual_sup <= residual_tol &&
               v_prime_at_zero <= boundary_tol &&
               v_prime_at_b_err <= boundary_tol && reflect_slope_sup <= boundary_tol &&
               v_prime_min >= -slope_tol && hjb_inequality_min >= -residual_tol;
    }
};

namespace detail {

/// sup over nodes in [0, beta] of |D V' + H|, where D differentiates the
/// quartic through five consecutive nodes whose span avoids the kinks of h
/// and beta.
inline double fd_residual(const ValueSolution& sol) {
    const ReducedInstance& red = sol.reduced;
    const std::vector<double>& g = sol.grid;
    std::vector<double> kinks{sol.beta};
    for (const auto& knot : red.h_knots) kinks.push_back(knot.workload);
    std::size_t last = 0;
    while (last + 1 < g.size() && g[last + 1] <= sol.beta) ++last;
    if (last < 4) return 0.0;
    auto clean = [&](std::size_t a) {
        return std::none_of(kinks.begin(), kinks.end(), [&](double q) { return q > g[a] && q < g[a + 4]; });
    };
    double sup = 0.0;
    for (std::size_t i = 0; i <= last; ++i) {
        std::optional<std::size_t> start;
        for (std::size_t off : {2, 1, 3, 0, 4}) {
            if (i < off || i - off + 4 > last) continue;
            if (clean(i - off)) {
                start = i - off;
                break;
            }
        }
        if (!start) continue;
        const double x = g[i];
        double d = 0.0;
        for (std::size_t j = *start; j < *start + 5; ++j) {
            double w = 0.0;
            for (std::size_t m = *start; m < *start + 5; ++m) {
                if (m == j) continue;
                double p = 1.0 / (g[j] - g[m]);
                for (std::size_t q = *start; q < *start + 5; ++q) {
                    if (q != j && q != m) p *= (x - g[q]) / (g[j] - g[q]);
                }
                w += p;
            }
            d += w * sol.V_prime[j];
        }
        sup = std::max(sup, std::abs(d + hamiltonian_unchecked(red, sol.eps, x, sol.V[i], sol.V_prime[i])));
    }
    return sup;
}

}  // namespace detail

[[nodiscard]] inline ResidualReport verify_solution(const ValueSolution& sol) {
    const ReducedInstance& red = sol.reduced;
    ResidualReport rep;
    rep.residual_tol = sol.paste_tol > 0.0 ? sol.paste_tol : default_paste_tol(red);
    rep.pasted = sol.pasted();
    rep.pasting_curvature = sol.pasting_curvature;
    rep.v_prime_at_zero = std::abs(sol.V_prime.front());
    rep.v_prime_at_b_err = std::abs(sol.V_prime.back() - red.r);
    rep.v_prime_min = std::numeric_limits<double>::infinity();
    rep.v_prime_max = -std::numeric_limits<double>::infinity();
    rep.hjb_inequality_min = std::numeric_limits<double>::infinity();
    const std::size_t n = sol.grid.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = sol.grid[i];
        const double res =
            sol.V_second[i] + hamiltonian_unchecked(red, sol.eps, x, sol.V[i], sol.V_prime[i]);
        rep.v_prime_min = std::min(rep.v_prime_min, sol.V_prime[i]);
        rep.v_prime_max = std::max(rep.v_prime_max, sol.V_prime[i]);
        if (x <= sol.beta) rep.hjb_residual_sup = std::max(rep.hjb_residual_sup, std::abs(res));
        if (x >= sol.beta) {
            rep.reflect_slope_sup = std::max(rep.reflect_slope_sup, std::abs(sol.V_prime[i] - red.r));
            rep.hjb_inequality_min = std::min(rep.hjb_inequality_min, res);
        }
        if (i + 1 < n) {
            const double h = sol.grid[i + 1] - x;
            const double d = sol.V[i + 1] - sol.V[i] - 0.5 * h * (sol.V_prime[i] + sol.V_prime[i + 1]) +
                             h * h / 12.0 * (sol.V_second[i + 1] - sol.V_second[i]);
            rep.integration_defect = std::max(rep.integration_defect, std::abs(d));
        }
    }
    if (!std::isfinite(rep.hjb_inequality_min)) rep.hjb_inequality_min = 0.0;
    rep.fd_residual_sup = detail::fd_residual(sol);
    return rep;
}

}  // namespace ambictrl
