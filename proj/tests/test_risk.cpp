#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rpeq/errors.hpp"
#include "rpeq/risk.hpp"

using namespace rpeq;

namespace {

// Uniform draws in [0,1)^n are admissible unless every entry is 1.
std::vector<double> random_lambdas(std::mt19937_64& rng, std::size_t n, double hi = 1.0) {
    std::uniform_real_distribution<double> u(0.0, hi);
    std::vector<double> l(n);
    for (double& x : l) x = u(rng);
    return l;
}

}  // namespace

TEST(Risk, WeightsZeroConcern) {
    const std::vector<double> l{0.0, 0.0}, g{1.0, 3.0};
    const AggregationWeights w = aggregation_weights(l, g);
    EXPECT_DOUBLE_EQ(w.w[0], 0.5);
    EXPECT_DOUBLE_EQ(w.w[1], 0.5);
    EXPECT_DOUBLE_EQ(w.Lambda, 2.0);
    EXPECT_DOUBLE_EQ(w.c, 0.5);
    EXPECT_DOUBLE_EQ(w.gamma_r, 2.0);
}

TEST(Risk, WeightsOneSidedConcern) {
    const std::vector<double> l{0.25, 0.0}, g{1.0, 1.0};
    const AggregationWeights w = aggregation_weights(l, g);
    EXPECT_NEAR(w.Lambda, 1.8, 1e-15);
    EXPECT_NEAR(w.w[0], 1.0 / (1.8 * 1.25), 1e-15);
    EXPECT_NEAR(w.w[1], 1.0 / 1.8, 1e-15);
    EXPECT_NEAR(w.w[0] + w.w[1], 1.0, 1e-15);
}

TEST(Risk, EqualTolerancesGiveSameRepresentativeTolerance) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        const auto l = random_lambdas(rng, 2);
        const std::vector<double> g{1.0, 1.0};
        EXPECT_NEAR(aggregation_weights(l, g).gamma_r, 1.0, 1e-14);
    }
}

TEST(Risk, WeightsSumToOneAndCommonConstant) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> gd(0.2, 5.0);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 2 + static_cast<std::size_t>(i % 5);
        const auto l = random_lambdas(rng, n);
        std::vector<double> g(n);
        for (double& x : g) x = gd(rng);
        const AggregationWeights w = aggregation_weights(l, g);
        double sum = 0.0, gr = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            ASSERT_GT(w.w[a], 0.0);
            sum += w.w[a];
            gr += w.w[a] * g[a];
        }
        ASSERT_NEAR(sum, 1.0, 1e-14);
        ASSERT_NEAR(w.gamma_r, gr, 1e-13);
        // c^a = w^a (1 + lt^a) - sum_b w^b lt^b, recomputed here
        double cross = 0.0;
        for (std::size_t b = 0; b < n; ++b) cross += w.w[b] * l[b] / static_cast<double>(n - 1);
        for (std::size_t a = 0; a < n; ++a) {
            const double ca = w.w[a] * (1.0 + l[a] / static_cast<double>(n - 1)) - cross;
            ASSERT_NEAR(ca, w.c, 1e-14);
            ASSERT_NEAR(w.c_per_agent[a], w.c, 1e-14);
        }
    }
}

TEST(Risk, ConcernRateValidation) {
    const std::vector<double> high{1.2, 0.0}, ones{1.0, 1.0}, ok{1.0, 0.5};
    try {
        validate_concern_rates(high);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("lambda must lie in [0,1]"), std::string::npos);
    }
    try {
        validate_concern_rates(ones);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("product of concern rates must be < 1"), std::string::npos);
    }
    EXPECT_NO_THROW(validate_concern_rates(ok));
    EXPECT_THROW(aggregation_weights(ones, std::vector<double>{1.0, 1.0}), ConfigError);
    EXPECT_THROW(aggregation_weights(ok, std::vector<double>{1.0, 0.0}), ConfigError);
}

TEST(Risk, ConcernMatrixLayout) {
    const std::vector<double> l{0.2, 0.6, 1.0};
    const Eigen::MatrixXd a = concern_matrix(l);
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(a(j, k), j == k ? 1.0 : -l[static_cast<std::size_t>(j)] / 2.0);
}

TEST(Risk, DeterminantExamples) {
    const std::vector<double> quarter{0.25, 0.25};
    EXPECT_NEAR(det_concern_closed_form(quarter), 0.9375, 1e-15);
    for (std::size_t n = 2; n <= 6; ++n) {
        const std::vector<double> ones(n, 1.0);
        EXPECT_EQ(det_concern_closed_form(ones), 0.0) << n;
        EXPECT_NEAR(det_lu(concern_matrix(ones)), 0.0, 1e-12) << n;
    }
    const std::vector<double> counter{2.0, 2.0, 0.0};  // product 0 but singular
    EXPECT_LE(det_concern_closed_form(counter), 0.0);
    EXPECT_LE(det_lu(concern_matrix(counter)), 1e-12);
}

TEST(Risk, DeterminantClosedFormMatchesLu) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 1 + static_cast<std::size_t>(i % 6);
        const auto l = random_lambdas(rng, n);
        const ConcernDeterminant d = det_concern(l);
        ASSERT_NEAR(d.closed_form, d.lu, 1e-12);
        if (n >= 2) ASSERT_GT(d.closed_form, 0.0);
    }
}

TEST(Risk, DeterminantDecreasingInEachRate) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 300; ++i) {
        const std::size_t n = 2 + static_cast<std::size_t>(i % 5);
        auto l = random_lambdas(rng, n, 0.95);
        const double d0 = det_concern_closed_form(l);
        for (std::size_t a = 0; a < n; ++a) {
            auto bumped = l;
            bumped[a] += 1e-4;
            ASSERT_LT(det_concern_closed_form(bumped), d0);
        }
    }
}

TEST(Risk, SolveExamples) {
    const Eigen::Vector2d j(0.7, -1.3);
    const Eigen::VectorXd id = solve_concern_system(std::vector<double>{0.0, 0.0}, j);
    EXPECT_EQ(id[0], 0.7);
    EXPECT_EQ(id[1], -1.3);

    const Eigen::VectorXd x = solve_concern_system(std::vector<double>{0.5, 0.5}, Eigen::Vector2d(1.0, 1.0));
    EXPECT_NEAR(x[0], 2.0, 1e-15);
    EXPECT_NEAR(x[1], 2.0, 1e-15);
}

TEST(Risk, SolveResidual) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 200; ++i) {
        const std::size_t n = i % 2 ? 5 : 2;
        const auto l = random_lambdas(rng, n);
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
        for (Eigen::Index k = 0; k < rhs.size(); ++k) rhs[k] = nd(rng);
        const ConcernSystem sys(l);
        const Eigen::VectorXd x = sys.solve(rhs);
        ASSERT_LE((sys.matrix() * x - rhs).cwiseAbs().maxCoeff(), 1e-12);
        ASSERT_LE((sys.solve_generic(rhs) - x).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Risk, SingularSystemRejected) {
    EXPECT_ANY_THROW(ConcernSystem(std::vector<double>{2.0, 2.0, 0.0}));
}

TEST(Risk, DriverExamples) {
    EXPECT_DOUBLE_EQ(entropic_driver(1.0, 3.0, 4.0), 12.5);
    EXPECT_NEAR(rep_driver(1.0, -0.8, 0.0, 0.0), -0.32, 1e-15);
    EXPECT_NEAR(agent_min_driver(1.0, -0.8, 0.0, 1.0, 0.0), 0.48, 1e-15);
    EXPECT_NEAR(no_derivative_driver(2.0, -0.8, 0.5, 3.0), -0.64 + 0.4 + 2.25, 1e-15);
}

TEST(Risk, AgentMinDriverAffine) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 1000; ++i) {
        const double g = 0.5 + std::abs(nd(rng)), ts = nd(rng), tr = nd(rng);
        const double a1 = nd(rng), a2 = nd(rng), b1 = nd(rng), b2 = nd(rng);
        auto f = [&](double z1, double z2) { return agent_min_driver(g, ts, tr, z1, z2); };
        ASSERT_NEAR(f(a1 + b1, a2 + b2) - f(a1, a2) - f(b1, b2) + f(0.0, 0.0), 0.0, 1e-12);
    }
}

TEST(Risk, InfConvolutionExamples) {
    const std::vector<double> g{1.0, 3.0}, w{0.5, 0.5};
    const InfConvolution zero = infconv_oracle_entropic(g, w, {0.0, 0.0});
    EXPECT_NEAR(zero.value, 0.0, 1e-14);
    for (const auto& za : zero.minimizers) {
        EXPECT_NEAR(za[0], 0.0, 1e-14);
        EXPECT_NEAR(za[1], 0.0, 1e-14);
    }
    EXPECT_NEAR(infconv_oracle_entropic(g, w, {2.0, 0.0}).value, 1.0, 1e-10);
}

TEST(Risk, InfConvolutionMatchesDilatedForm) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> gd(0.3, 4.0);
    std::normal_distribution<double> zd(0.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        const std::size_t n = 2 + static_cast<std::size_t>(i % 3);
        const auto l = random_lambdas(rng, n);
        std::vector<double> g(n);
        for (double& x : g) x = gd(rng);
        const AggregationWeights agg = aggregation_weights(l, g);
        const std::array<double, 2> z{zd(rng), zd(rng)};
        const InfConvolution ic = infconv_oracle_entropic(g, agg.w, z);
        const double closed = (z[0] * z[0] + z[1] * z[1]) / (2.0 * agg.gamma_r);
        ASSERT_NEAR(ic.value, closed, 1e-8);
        // the minimizers are feasible
        double s0 = 0.0, s1 = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            s0 += agg.w[a] * ic.minimizers[a][0];
            s1 += agg.w[a] * ic.minimizers[a][1];
        }
        ASSERT_NEAR(s0, z[0], 1e-9);
        ASSERT_NEAR(s1, z[1], 1e-9);
    }
}

TEST(Risk, InfConvolutionGenericDrivers) {
    // Non-quadratic strictly convex drivers: g(z) = cosh(z1) + cosh(z2) - 2 split evenly,
    // by symmetry the minimiser is z^a = z for every agent.
    const Driver2 g = [](const std::array<double, 2>& z) { return std::cosh(z[0]) + std::cosh(z[1]) - 2.0; };
    const std::vector<double> w{0.5, 0.5};
    const InfConvolution ic = infconv_oracle({g, g}, w, {0.4, -0.3});
    EXPECT_NEAR(ic.value, std::cosh(0.4) + std::cosh(0.3) - 2.0, 1e-9);
}
