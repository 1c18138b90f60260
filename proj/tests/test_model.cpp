#include "ambictrl/model.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ambictrl;

namespace {

ReducedInstance fig1() { return reduce_instance(default_instance()); }

}  // namespace

TEST(Reduce, DefaultInstanceConstants) {
    const ReducedInstance red = fig1();
    EXPECT_NEAR(red.m, -2.0 / 3.0, 1e-15);
    EXPECT_NEAR(red.sigma * red.sigma, 4.0 / 3.0, 1e-15);
    EXPECT_NEAR(red.b, 37.0 / 3.0, 1e-14);
    EXPECT_NEAR(red.eps, 1.0, 1e-15);
    EXPECT_DOUBLE_EQ(red.r, 1.0);
    EXPECT_EQ(red.i_star, 1u);
    ASSERT_EQ(red.theta.size(), 3u);
    EXPECT_DOUBLE_EQ(red.theta[0], 1.0 / 3.0);
}

TEST(Reduce, HoldingCostKnots) {
    const ReducedInstance red = fig1();
    ASSERT_EQ(red.h_knots.size(), 4u);
    const double w[] = {0.0, 4.0, 11.0, 37.0 / 3.0};
    const double c[] = {0.0, 9.0, 26.5, 30.5};
    for (int k = 0; k < 4; ++k) {
        EXPECT_NEAR(red.h_knots[k].workload, w[k], 1e-14) << k;
        EXPECT_NEAR(red.h_knots[k].cost, c[k], 1e-14) << k;
    }
    // cheapest per unit workload first
    EXPECT_EQ(red.h_knots[0].cls, 2u);
    EXPECT_EQ(red.h_knots[1].cls, 1u);
    EXPECT_EQ(red.h_knots[2].cls, 0u);
    EXPECT_NEAR(holding_cost(red, 4.0), 9.0, 1e-14);
    EXPECT_NEAR(holding_cost(red, 12.0), 29.5, 1e-14);
    EXPECT_NEAR(holding_cost(red, red.b), 30.5, 1e-13);
    EXPECT_EQ(holding_cost(red, 0.0), 0.0);
}

TEST(Reduce, HoldingCostIsConvexAndIncreasing) {
    const ReducedInstance red = fig1();
    for (std::size_t k = 0; k + 2 < red.h_knots.size(); ++k) {
        EXPECT_GT(red.h_knots[k].slope, 0.0);
        EXPECT_LE(red.h_knots[k].slope, red.h_knots[k + 1].slope);
    }
}

TEST(Reduce, DomainErrors) {
    const ReducedInstance red = fig1();
    EXPECT_THROW((void)holding_cost(red, -1e-9), Error);
    EXPECT_THROW((void)holding_cost(red, red.b + 1e-9), Error);
    try {
        (void)holding_cost(red, -1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Domain);
    }
}

TEST(Gamma, KnownPoints) {
    const auto inst = default_instance();
    const ReducedInstance red = reduce_instance(inst);
    const auto g11 = gamma_lift(red, inst, 11.0);
    EXPECT_NEAR(g11[0], 0.0, 1e-13);
    EXPECT_NEAR(g11[1], 7.0, 1e-13);
    EXPECT_NEAR(g11[2], 6.0, 1e-13);
    const auto g12 = gamma_lift(red, inst, 12.0);
    EXPECT_NEAR(g12[0], 3.0, 1e-13);
    EXPECT_NEAR(g12[1], 7.0, 1e-13);
    EXPECT_NEAR(g12[2], 6.0, 1e-13);
    const auto gb = gamma_lift(red, inst, red.b);
    EXPECT_EQ(gb[0], 4.0);
    EXPECT_EQ(gb[1], 7.0);
    EXPECT_EQ(gb[2], 6.0);
}

TEST(Gamma, ProjectsBackAndCostsMatch) {
    const auto inst = default_instance();
    const ReducedInstance red = reduce_instance(inst);
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> U(0.0, red.b);
    for (int t = 0; t < 2000; ++t) {
        const double x = U(gen);
        const auto xi = gamma_lift(red, inst, x);
        double w = 0.0, c = 0.0;
        for (std::size_t i = 0; i < xi.size(); ++i) {
            EXPECT_GE(xi[i], 0.0);
            EXPECT_LE(xi[i], inst.b_hat[i]);
            w += red.theta[i] * xi[i];
            c += inst.h_hat[i] * xi[i];
        }
        EXPECT_NEAR(w, x, 1e-12);
        EXPECT_NEAR(c, holding_cost(red, x), 1e-12 * std::max(1.0, c));
    }
}

TEST(Gamma, IsCheapestFeasibleConfiguration) {
    // Any feasible queue vector with the same workload costs at least h(x).
    const auto inst = default_instance();
    const ReducedInstance red = reduce_instance(inst);
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int t = 0; t < 20000; ++t) {
        std::vector<double> xi(3);
        double w = 0.0, c = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            xi[i] = U(gen) * inst.b_hat[i];
            w += red.theta[i] * xi[i];
            c += inst.h_hat[i] * xi[i];
        }
        EXPECT_GE(c, holding_cost(red, w) - 1e-12);
    }
}

TEST(Validate, RejectsNonCriticalLoad) {
    auto inst = default_instance();
    inst.lambda[0] = 1.2;
    try {
        (void)reduce_instance(inst);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Validation);
        EXPECT_EQ(e.field(), "lambda");
    }
    ReduceOptions opts;
    opts.renormalize_load = true;
    const MultiClassInstance fixed = validate_instance(inst, opts);
    double load = 0.0;
    for (std::size_t i = 0; i < 3; ++i) load += fixed.lambda[i] / fixed.mu[i];
    EXPECT_NEAR(load, 1.0, 1e-14);
}

TEST(Validate, RejectsBadFields) {
    auto check = [](MultiClassInstance inst, const char* field) {
        try {
            (void)validate_instance(inst);
            ADD_FAILURE() << field;
        } catch (const Error& e) {
            EXPECT_EQ(e.field(), field);
        }
    };
    auto a = default_instance();
    a.mu.pop_back();
    check(a, "mu");
    auto b = default_instance();
    b.h_hat[1] = 0.0;
    check(b, "h_hat");
    auto c = default_instance();
    c.b_hat[2] = -1.0;
    check(c, "b_hat");
    auto d = default_instance();
    d.discount = 0.0;
    check(d, "discount");
    auto e = default_instance();
    e.eps_hat[0] = std::nan("");
    check(e, "eps_hat");
    MultiClassInstance empty;
    check(empty, "class_count");
}

TEST(Reduce, CanonicalOrderTiesAreStable) {
    auto inst = default_instance();
    inst.h_hat = {1.0, 3.0, 2.0};  // h_hat * mu = (3, 3, 3)
    const auto order = canonical_order(inst);
    EXPECT_EQ(order, (std::vector<std::size_t>{0, 1, 2}));
    const ReducedInstance red = reduce_instance(inst);
    EXPECT_EQ(red.h_knots[0].cls, 2u);
}

TEST(Reduce, RejectionClassTieTakesSmallestIndex) {
    auto inst = default_instance();
    inst.r_hat = {1.0 / 3.0, 1.0, 2.0 / 3.0};  // r_hat * mu = (1, 1, 1)
    const ReducedInstance red = reduce_instance(inst);
    EXPECT_EQ(red.i_star, 0u);
    EXPECT_NEAR(red.r, 1.0, 1e-15);
}

TEST(Reduce, EpsAggregationIsHomogeneous) {
    auto inst = default_instance();
    inst.eps_hat = {0.5, 2.0, 1.0};
    const double e1 = reduce_instance(inst).eps;
    for (double& e : inst.eps_hat) e *= 2.0;
    EXPECT_NEAR(reduce_instance(inst).eps, 2.0 * e1, 1e-15);
}

TEST(Reduce, KappaAveraging) {
    const std::vector<std::pair<double, double>> k{{1.0, 3.0}, {0.5, 0.5}};
    const auto eps = epsilon_from_kappa(k);
    EXPECT_EQ(eps, (std::vector<double>{2.0, 0.5}));
    const std::vector<std::pair<double, double>> bad{{1.0, -1.0}};
    EXPECT_THROW((void)epsilon_from_kappa(bad), Error);
}
