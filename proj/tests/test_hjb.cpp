#include "ambictrl/hjb.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ambictrl;

namespace {

ReducedInstance fig1() { return reduce_instance(default_instance()); }

ReducedInstance slope_tie_instance() {
    auto inst = default_instance();
    inst.r_hat = {1.0, 3.0, 2.0};  // r = 3 = rho r = h_hat_0 mu_0
    return reduce_instance(inst);
}

SolverConfig cells(std::size_t n) {
    SolverConfig c;
    c.cells = n;
    c.min_cells = 1;
    return c;
}

}  // namespace

TEST(Clamp, Values) {
    const ClampSpec F{2.0};
    EXPECT_EQ(F(1.0), 1.0);
    EXPECT_EQ(F(-2.0), -2.0);
    EXPECT_EQ(F(6.0), 3.0);
    EXPECT_EQ(F(-6.0), -3.0);
    EXPECT_DOUBLE_EQ(F(3.0), 11.0 * 2.0 / 8.0);
    EXPECT_EQ(clamp(F, 0.5), 0.5);
}

TEST(Clamp, ContinuouslyDifferentiableAndBounded) {
    const ClampSpec F{1.5};
    for (double z0 : {-3.0, -1.5, 1.5, 3.0}) {
        const double h = 1e-7;
        EXPECT_NEAR(F(z0 - h), F(z0 + h), 3e-7);
        EXPECT_NEAR(F.derivative(z0 - h), F.derivative(z0 + h), 1e-6);
    }
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> U(-10.0, 10.0);
    for (int i = 0; i < 10000; ++i) {
        const double z = U(gen);
        EXPECT_LE(std::abs(F(z)), 1.5 * F.r);
        EXPECT_LE(std::abs(F.derivative(z)), 1.0);
        const double h = 1e-6;
        EXPECT_NEAR((F(z + h) - F(z - h)) / (2 * h), F.derivative(z), 1e-5);
    }
}

TEST(Hamiltonian, KnownValues) {
    const ReducedInstance red = fig1();
    EXPECT_EQ(hamiltonian(red, 1.0, 0.0, 0.0, 0.0), 0.0);
    EXPECT_NEAR(hamiltonian(red, 1.0, 4.0, 0.0, 0.0), 13.5, 1e-13);
    EXPECT_NEAR(hamiltonian(red, 1.0, 0.0, 0.0, 1.0), 0.0, 1e-15);
    EXPECT_THROW((void)hamiltonian(red, 1.0, -0.1, 0.0, 0.0), Error);
}

TEST(Hamiltonian, ShiftInValue) {
    const ReducedInstance red = fig1();
    const double c = 0.7;
    const double s2 = red.sigma * red.sigma;
    for (double x : {0.3, 5.0, 12.0}) {
        const double d = hamiltonian(red, 0.5, x, 1.0 + c, 0.4) - hamiltonian(red, 0.5, x, 1.0, 0.4);
        EXPECT_NEAR(d, -(2.0 / s2) * red.discount * c, 1e-13);
    }
}

TEST(Hamiltonian, StationaryPoint) {
    // k = s, k' = 0 solves the ODE locally iff rho s = h(x).
    const ReducedInstance red = fig1();
    for (double x : {1.0, 6.0}) {
        const double s = holding_cost(red, x) / red.discount;
        EXPECT_NEAR(hamiltonian(red, 1.0, x, s, 0.0), 0.0, 1e-13);
        EXPECT_GT(std::abs(hamiltonian(red, 1.0, x, s + 0.1, 0.0)), 0.1);
    }
}

TEST(Cauchy, InitialConditionsAndResidual) {
    const ReducedInstance red = fig1();
    const CauchyTrace tr = integrate_cauchy(red, 1.0, 1.3);
    EXPECT_EQ(tr.k.front(), 1.3);
    EXPECT_EQ(tr.k_prime.front(), 0.0);
    EXPECT_EQ(tr.x.back(), red.b);
    const ClampSpec F{red.r};
    for (std::size_t i = 0; i < tr.x.size(); ++i) {
        EXPECT_EQ(tr.k_second[i] + hamiltonian(red, 1.0, tr.x[i], tr.k[i], F(tr.k_prime[i])), 0.0);
    }
}

TEST(Cauchy, UpperBoundShotIsTooHighEarly) {
    for (double eps : {0.0, 1.0, 2.0}) {
        const ReducedInstance red = fig1();
        const double s1 = shoot_upper_bound(red, eps) + 1e-9;
        const CauchyTrace tr = integrate_cauchy(red, eps, s1);
        EXPECT_EQ(tr.classification, ShotClass::TooHigh) << eps;
        EXPECT_LE(tr.beta_s, red.b / 2.0) << eps;
        EXPECT_TRUE(tr.crossed);
    }
}

TEST(Cauchy, VeryNegativeShotIsTooLow) {
    const ReducedInstance red = fig1();
    for (double s : {-1.0, -100.0, -1e6}) {
        const CauchyTrace tr = integrate_cauchy(red, 1.0, s);
        EXPECT_EQ(tr.classification, ShotClass::TooLow) << s;
        EXPECT_LT(tr.k_prime.back(), red.r);
    }
}

TEST(Cauchy, ClassificationsAreOrderedInS) {
    const ReducedInstance red = fig1();
    int last = -1;
    for (int j = 0; j <= 200; ++j) {
        const double s = -2.0 + 0.04 * j;
        const auto c = integrate_cauchy(red, 1.0, s, cells(1024)).classification;
        const int rank = c == ShotClass::TooLow ? 0 : (c == ShotClass::Pasted ? 1 : 2);
        EXPECT_GE(rank, last) << s;
        last = rank;
    }
}

TEST(Cauchy, ContinuityInInitialValue) {
    // sup |k^(s+d) - k^(s)| vanishes linearly in d. The growth factor is
    // large (d'' ~ (2 rho / sigma^2) d near the origin), so the ratio is
    // checked for consistency across d rather than against 1.
    const ReducedInstance red = fig1();
    const double s = shoot(red, 1.0).s_star;
    const CauchyTrace base = integrate_cauchy(red, 1.0, s);
    auto ratio = [&](double d) {
        const CauchyTrace tr = integrate_cauchy(red, 1.0, s + d);
        double sup = 0.0;
        for (std::size_t i = 0; i < tr.k.size(); ++i) sup = std::max(sup, std::abs(tr.k[i] - base.k[i]));
        return sup / std::abs(d);
    };
    const double r6 = ratio(1e-6);
    EXPECT_GT(r6, 1.0);
    for (double d : {1e-3, -1e-3, 1e-5, -4e-4, -1e-6}) EXPECT_NEAR(ratio(d) / r6, 1.0, 0.05) << d;
    // Near the origin the difference is d cosh(sqrt(2 rho) x / sigma) to leading order.
    const CauchyTrace up = integrate_cauchy(red, 1.0, s + 1e-6);
    const double w = std::sqrt(2.0 * red.discount) / red.sigma;
    for (std::size_t i = 1; i <= 20; ++i) {
        EXPECT_NEAR((up.k[i] - base.k[i]) / 1e-6, std::cosh(w * base.x[i]), 1e-3) << i;
    }
}

TEST(Cauchy, RejectsCoarseMesh) {
    SolverConfig c;
    c.cells = 10;
    try {
        (void)integrate_cauchy(fig1(), 1.0, 0.0, c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Validation);
        EXPECT_EQ(e.field(), "cells");
    }
}

class ShootEps : public ::testing::TestWithParam<double> {};

TEST_P(ShootEps, ResidualsAndBounds) {
    const double eps = GetParam();
    const ReducedInstance red = fig1();
    const ValueSolution sol = shoot(red, eps);
    const ResidualReport rep = verify_solution(sol);
    EXPECT_TRUE(sol.pasted());
    EXPECT_TRUE(rep.passes());
    EXPECT_LE(rep.hjb_residual_sup, default_paste_tol(red));
    EXPECT_LE(rep.fd_residual_sup, 1e-7);
    EXPECT_LE(rep.v_prime_at_zero, 1e-8);
    EXPECT_LE(rep.v_prime_at_b_err, 1e-8);
    EXPECT_GE(rep.v_prime_min, -1e-10);
    EXPECT_LE(rep.v_prime_max, red.r + 1e-10);
    EXPECT_EQ(rep.reflect_slope_sup, 0.0);
    EXPECT_GE(rep.hjb_inequality_min, -rep.residual_tol);
    EXPECT_LT(rep.integration_defect, 1e-8);
    EXPECT_GT(sol.beta, 0.0);
    EXPECT_LE(sol.beta, sol.beta_hat);
    EXPECT_LE(sol.beta_hat, red.b);
    EXPECT_EQ(sol.s_star, sol.V.front());
    // Unique instance: both thresholds agree.
    EXPECT_EQ(sol.beta, sol.beta_hat);
}

TEST_P(ShootEps, ClampInactiveAtSolution) {
    const double eps = GetParam();
    const ReducedInstance red = fig1();
    const ValueSolution sol = shoot(red, eps);
    const ClampSpec F{red.r};
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
        const double a = hamiltonian(red, eps, sol.grid[i], sol.V[i], sol.V_prime[i]);
        const double b = hamiltonian(red, eps, sol.grid[i], sol.V[i], F(sol.V_prime[i]));
        EXPECT_EQ(a, b);
    }
}

TEST_P(ShootEps, UniquenessProbe) {
    const double eps = GetParam();
    const ReducedInstance red = fig1();
    const ValueSolution sol = shoot(red, eps);
    const double s_tol = 1e-7;
    EXPECT_EQ(integrate_cauchy(red, eps, sol.s_star + 10 * s_tol).classification, ShotClass::TooHigh);
    EXPECT_EQ(integrate_cauchy(red, eps, sol.s_star - 10 * s_tol).classification, ShotClass::TooLow);
}

INSTANTIATE_TEST_SUITE_P(Grid, ShootEps, ::testing::Values(0.0, 0.5, 1.0, 2.0));

TEST(Shoot, MatchesRiskNeutralOracle) {
    const ReducedInstance red = fig1();
    const ValueSolution sol = shoot(red, 0.0);
    const oracle::RiskNeutral o = oracle::risk_neutral(red, 200000);
    EXPECT_NEAR(sol.beta, o.beta, 1e-4);
    EXPECT_NEAR(sol.s_star, o.value(0.0), 1e-5);
    double sup = 0.0;
    for (std::size_t i = 0; i < sol.grid.size(); ++i) sup = std::max(sup, std::abs(sol.V[i] - o.value(sol.grid[i])));
    EXPECT_LE(sup, 1e-5);
}

TEST(Shoot, MeshConvergenceIsFourthOrder) {
    const ReducedInstance red = fig1();
    const double s256 = shoot(red, 1.0, cells(256)).s_star;
    const double s512 = shoot(red, 1.0, cells(512)).s_star;
    const double s1024 = shoot(red, 1.0, cells(1024)).s_star;
    const double ratio = std::abs(s512 - s256) / std::abs(s1024 - s512);
    EXPECT_GE(ratio, 8.0);
    EXPECT_LE(ratio, 32.0);
}

TEST(Shoot, ValueIncreasesWithEps) {
    const ReducedInstance red = fig1();
    const ValueSolution v0 = shoot(red, 0.0);
    const ValueSolution v1 = shoot(red, 0.3);
    for (std::size_t i = 0; i < v0.V.size(); ++i) EXPECT_GT(v1.V[i], v0.V[i]);
}

TEST(Shoot, StoppingOnBracketWidth) {
    const ReducedInstance red = fig1();
    SolverConfig c;
    c.s_tol = 1e-6;
    const ValueSolution coarse = shoot(red, 1.0, c);
    const ValueSolution fine = shoot(red, 1.0);
    EXPECT_LT(coarse.shoot_iterations, fine.shoot_iterations);
    EXPECT_NEAR(coarse.s_star, fine.s_star, 2e-6);
}

TEST(Shoot, RejectsNegativeEps) {
    EXPECT_THROW((void)shoot(fig1(), -0.1), Error);
}

TEST(Shoot, BoundaryPastingWhenSlopeEqualsDiscountedPrice) {
    // Slopes below rho r up to x = 11, equal to it beyond: k' reaches r only at b.
    const ReducedInstance red = slope_tie_instance();
    for (double eps : {0.0, 1.0}) {
        const ValueSolution sol = shoot(red, eps);
        const ResidualReport rep = verify_solution(sol);
        EXPECT_TRUE(sol.pasted());
        EXPECT_EQ(sol.beta, red.b);
        EXPECT_EQ(sol.beta_hat, red.b);
        EXPECT_LE(rep.hjb_residual_sup, rep.residual_tol);
        EXPECT_LE(rep.v_prime_at_zero, 1e-8);
        EXPECT_LE(rep.v_prime_max, red.r + 1e-10);
        EXPECT_GE(rep.v_prime_min, -1e-10);
        // k'(b) moves by ~1e-6 per ulp of s here, so the boundary slope is
        // only as good as the bracket of adjacent doubles around s*.
        if (rep.v_prime_at_b_err > 1e-8) {
            const double next = std::nextafter(sol.s_star, 1e300);
            const CauchyTrace above = integrate_cauchy(red, eps, next);
            EXPECT_TRUE(above.crossed) << eps;
            EXPECT_LE(sol.V_prime.back(), red.r);
            EXPECT_LE(rep.v_prime_at_b_err, above.k_prime.back() - sol.V_prime.back()) << eps;
        }
    }
    const ValueSolution sol = shoot(red, 0.0);
    const oracle::RiskNeutral o = oracle::risk_neutral(red, 200000);
    EXPECT_EQ(o.beta, red.b);
    double sup = 0.0;
    for (std::size_t i = 0; i < sol.grid.size(); ++i) sup = std::max(sup, std::abs(sol.V[i] - o.value(sol.grid[i])));
    EXPECT_LE(sup, 1e-4);
}

TEST(BetaHat, ExtendsOverMatchingSegment) {
    // Affine continuation from x = 11 at the level where the ODE holds with
    // V' = r; the last segment has slope rho r, so beta_hat runs to b.
    const ReducedInstance red = slope_tie_instance();
    const double eps = 1.0;
    const double s2 = red.sigma * red.sigma;
    const double level = red.m * red.r + 0.5 * s2 * eps * red.r * red.r;
    ValueSolution sol;
    sol.reduced = red;
    sol.eps = eps;
    sol.beta = 11.0;
    sol.paste_tol = default_paste_tol(red);
    const std::size_t n = 1000;
    for (std::size_t i = 0; i <= n; ++i) {
        const double x = red.b * static_cast<double>(i) / n;
        sol.grid.push_back(x);
        sol.V.push_back((level + holding_cost(red, 11.0)) / red.discount + red.r * (x - 11.0));
        sol.V_prime.push_back(red.r);
        sol.V_second.push_back(0.0);
    }
    EXPECT_NEAR(beta_hat(sol), red.b, 1e-12);

    // Off-level continuation stops at beta.
    for (double& v : sol.V) v += 0.01;
    EXPECT_EQ(beta_hat(sol), 11.0);
}

TEST(BetaHat, DegenerateAtB) {
    ValueSolution sol;
    sol.reduced = fig1();
    sol.beta = sol.reduced.b;
    sol.V = {0.0};
    EXPECT_EQ(beta_hat(sol), sol.reduced.b);
}

TEST(Verify, DifferencedResidualFlagsUnderResolvedMesh) {
    // At large eps the threshold spans a handful of cells.
    const ReducedInstance red = fig1();
    EXPECT_GT(verify_solution(shoot(red, 100.0)).fd_residual_sup, default_paste_tol(red));
    SolverConfig fine;
    fine.cells = 1 << 17;
    EXPECT_LE(verify_solution(shoot(red, 100.0, fine)).fd_residual_sup, default_paste_tol(red));
}

TEST(Verify, DifferencedResidualSeesBentSlope) {
    ValueSolution sol = shoot(fig1(), 1.0);
    const ResidualReport clean = verify_solution(sol);
    for (std::size_t i = 0; i < sol.grid.size(); ++i) sol.V_prime[i] += 1e-3 * std::sin(sol.grid[i]);
    const ResidualReport bent = verify_solution(sol);
    EXPECT_GT(bent.fd_residual_sup, 100.0 * clean.fd_residual_sup);
    EXPECT_GT(bent.fd_residual_sup, 5e-4);
}

TEST(Verify, DetectsPerturbedSolution) {
    const ReducedInstance red = fig1();
    ValueSolution sol = shoot(red, 1.0);
    for (double& v : sol.V) v += 1e-3;
    const ResidualReport rep = verify_solution(sol);
    EXPECT_NEAR(rep.hjb_residual_sup, (2.0 / (red.sigma * red.sigma)) * red.discount * 1e-3, 1e-9);
    EXPECT_FALSE(rep.passes());
}
