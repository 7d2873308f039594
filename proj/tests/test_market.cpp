#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rpeq/errors.hpp"
#include "rpeq/market.hpp"

using namespace rpeq;

namespace {

struct Moments {
    double mean = 0.0, var = 0.0;
};

Moments moments(std::span<const double> x) {
    Moments m;
    for (double v : x) m.mean += v;
    m.mean /= static_cast<double>(x.size());
    for (double v : x) m.var += (v - m.mean) * (v - m.mean);
    m.var /= static_cast<double>(x.size() - 1);
    return m;
}

}  // namespace

TEST(Market, ZeroNoiseStockStep) {
    MarketParams p;
    p.mu_s = 0.0;
    p.sigma_s = 0.25;
    double s = 50.0;
    const TimeGrid g{1.0, 20};
    for (std::size_t k = 0; k < g.n_steps; ++k) s = step_s(p, s, g.dt(), 0.0);
    EXPECT_NEAR(s, 50.0 * std::exp(-0.03125), 1e-12);
}

TEST(Market, DeterministicRate) {
    MarketParams p;
    p.b = 0.0;  // rejected by validate(); the step itself is still well defined
    const TimeGrid g{1.0, 20};
    double r = p.r0;
    for (std::size_t k = 0; k < g.n_steps; ++k) r = step_r(p, r, g.dt(), 0.3);
    EXPECT_NEAR(r, 20.0, 1e-12);
    EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Market, RateIsDriftPlusAccumulatedNoise) {
    const MarketParams p;
    const TimeGrid g{1.0, 20};
    const auto e = simulate_paths(p, g, 300, 5);
    for (std::size_t i = 0; i < e.n_paths; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < g.n_steps; ++k) {
            acc += e.dwr[k * e.n_paths + i];
            const double lhs = e.r[(k + 1) * e.n_paths + i] - p.r0 - p.mu_r * g.time(k + 1);
            ASSERT_NEAR(lhs, p.b * acc, 1e-12);
            ASSERT_GT(e.s[(k + 1) * e.n_paths + i], 0.0);
        }
    }
}

TEST(Market, TerminalRateMean) {
    const MarketParams p;
    const TimeGrid g{1.0, 20};
    const std::size_t n = 200000;
    const auto e = simulate_paths(p, g, n, 42);
    const Moments m = moments(e.r_terminal());
    EXPECT_LE(std::abs(m.mean - 20.0), 3.0 * std::sqrt(m.var / static_cast<double>(n)));
}

TEST(Market, LogStepIdentity) {
    const MarketParams p;
    const TimeGrid g{1.0, 20};
    const auto e = simulate_paths(p, g, 500, 9);
    const double dt = g.dt();
    for (std::size_t k = 0; k < g.n_steps; ++k)
        for (std::size_t i = 0; i < e.n_paths; ++i) {
            const double lhs = std::log(e.s[(k + 1) * e.n_paths + i] / e.s[k * e.n_paths + i]);
            const double rhs = (p.mu_s - 0.5 * p.sigma_s * p.sigma_s) * dt + p.sigma_s * e.dws[k * e.n_paths + i];
            ASSERT_NEAR(lhs, rhs, 1e-13);
        }
}

TEST(Market, IncrementMoments) {
    const MarketParams p;
    const TimeGrid g{1.0, 20};
    const std::size_t n = 50000;
    const auto e = simulate_paths(p, g, n, 11);
    const double dt = g.dt();
    for (std::size_t k : {0u, 7u, 19u}) {
        const auto ds = e.dws_row(k);
        const auto dr = e.dwr_row(k);
        // Var of a sample variance of N(0, dt) is 2 dt^2 / (n - 1).
        const double se_var = std::sqrt(2.0 / static_cast<double>(n - 1)) * dt;
        EXPECT_LE(std::abs(moments(ds).var - dt), 3.0 * se_var);
        EXPECT_LE(std::abs(moments(dr).var - dt), 3.0 * se_var);
        double cov = 0.0;
        for (std::size_t i = 0; i < n; ++i) cov += ds[i] * dr[i];
        cov /= static_cast<double>(n);
        EXPECT_LE(std::abs(cov), 4.0 * dt / std::sqrt(static_cast<double>(n)));
    }
}

TEST(Market, SubstreamDeterminism) {
    auto a = substream(7, 0);
    auto b = substream(7, 0);
    auto c = substream(7, 1);
    bool differs = false;
    for (int i = 0; i < 16; ++i) {
        const auto x = a();
        EXPECT_EQ(x, b());
        differs = differs || x != c();
    }
    EXPECT_TRUE(differs);
}

TEST(Market, EnsembleIndependentOfThreads) {
    const MarketParams p;
    const TimeGrid g{1.0, 5};
    const std::size_t n = 2 * 4096 + 77;
    const auto one = simulate_paths(p, g, n, 7, 1);
    const auto four = simulate_paths(p, g, n, 7, 4);
    EXPECT_EQ(one.s, four.s);
    EXPECT_EQ(one.r, four.r);
    EXPECT_EQ(one.dws, four.dws);
    EXPECT_EQ(one.dwr, four.dwr);
    // Path 3 only depends on (seed, path), not on the ensemble size.
    const auto small = simulate_paths(p, g, 4, 7, 1);
    for (std::size_t k = 0; k <= g.n_steps; ++k) EXPECT_EQ(small.s[k * 4 + 3], one.s[k * n + 3]);
}

TEST(Market, Validation) {
    MarketParams p;
    p.sigma_s = 0.0;
    EXPECT_THROW(p.validate(), ConfigError);
    EXPECT_THROW(simulate_paths(MarketParams{}, TimeGrid{1.0, 1}, 10, 1), ConfigError);
    EXPECT_THROW(simulate_paths(MarketParams{}, TimeGrid{1.0, 4}, 0, 1), ConfigError);
}

TEST(Market, PathsCsv) {
    const auto e = simulate_paths(MarketParams{}, TimeGrid{1.0, 3}, 5, 1);
    std::ostringstream os;
    write_paths_csv(os, e, 2);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "path,step,t,s,r,dws,dwr");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 2 * 4);
    EXPECT_NE(os.str().find("0,0,0,50,18,"), std::string::npos);
}
