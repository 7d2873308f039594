#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "rpeq/errors.hpp"
#include "rpeq/equilibrium.hpp"
#include "rpeq/parallel.hpp"

using namespace rpeq;

namespace {

EquilibriumConfig small(std::size_t paths = 20000) {
    EquilibriumConfig c = default_config();
    c.numerics.n_paths = paths;
    return c;
}

struct Solved {
    EquilibriumConfig cfg;
    PathEnsemble paths;
    std::unique_ptr<RegressionDesign> design;
    EquilibriumOutput eq;

    explicit Solved(EquilibriumConfig c, std::size_t threads = 1) : cfg(std::move(c)) {
        paths = simulate_paths(cfg.market, cfg.grid, cfg.numerics.n_paths, cfg.numerics.seed, threads);
        design = std::make_unique<RegressionDesign>(paths, cfg.numerics.basis(), threads);
        eq = run_equilibrium(cfg, *design, threads);
    }
};

const Solved& baseline() {
    static const Solved r(small());
    return r;
}

double row_mean(const std::vector<double>& field, std::size_t step, std::size_t m) {
    return block_mean(field.data() + step * m, m, 1);
}

}  // namespace

TEST(Equilibrium, DefaultConfig) {
    const EquilibriumConfig c = default_config();
    ASSERT_EQ(c.agents.size(), 2u);
    EXPECT_EQ(c.agents[0].name, "a");
    EXPECT_EQ(c.agents[1].name, "b");
    EXPECT_EQ(c.agents[0].lambda, 0.25);
    EXPECT_EQ(c.agents[1].lambda, 0.25);
    EXPECT_EQ(c.numerics.n_paths, 200000u);
    EXPECT_EQ(c.grid.n_steps, 20u);
    EXPECT_EQ(c.derivative, default_derivative());
    EXPECT_NO_THROW(c.validate());
}

TEST(Equilibrium, ConstantWorld) {
    EquilibriumConfig c = small();
    for (auto& a : c.agents) a.endowment = constant_payoff(10.0);
    c.derivative = constant_payoff(1.0);
    const PathEnsemble paths = simulate_paths(c.market, c.grid, c.numerics.n_paths, c.numerics.seed);
    const RegressionDesign design(paths, c.numerics.basis());
    const auto w = aggregation_weights(c.agents);
    const RepresentativeResult rep = solve_representative(c, design, w);
    EXPECT_NEAR(rep.solution.y0, -10.32, 1e-6);
    for (double t : rep.theta_r) ASSERT_NEAR(t, 0.0, 1e-6);
    const BsdeSolution price = price_derivative(c, design, rep);
    for (double b : price.y) ASSERT_NEAR(b, 1.0, 1e-6);
    for (double k : price.z2) ASSERT_NEAR(k, 0.0, 1e-6);
    for (const BsdeSolution& y : solve_agent_risks(c, design, rep)) EXPECT_NEAR(y.y0, -10.32, 1e-6);
    EXPECT_FALSE(kappa_diagnostics(c, price).ok(c.numerics.kappa_floor));
}

TEST(Equilibrium, RiskNeutralPriceIsPlainMean) {
    EquilibriumConfig c = small();
    c.market.mu_s = 0.0;
    for (auto& a : c.agents) a.endowment = PayoffSpec{};
    const PathEnsemble paths = simulate_paths(c.market, c.grid, c.numerics.n_paths, c.numerics.seed);
    const RegressionDesign design(paths, c.numerics.basis());
    const RepresentativeResult rep = solve_representative(c, design, aggregation_weights(c.agents));
    for (double t : rep.theta_r) ASSERT_NEAR(t, 0.0, 1e-9);
    const BsdeSolution price = price_derivative(c, design, rep);
    const auto hd = terminal_values(paths, PayoffMix{}.add(1.0, c.derivative));
    double m = 0.0, m2 = 0.0;
    for (double x : hd) {
        m += x;
        m2 += x * x;
    }
    const double n = static_cast<double>(hd.size());
    m /= n;
    const double se = std::sqrt((m2 / n - m * m) / n);
    EXPECT_LE(std::abs(price.y0 - m), 2.0 * se);
}

TEST(Equilibrium, EmperIdentity) {
    const Solved& r = baseline();
    const auto& rep = r.eq.rep;
    for (std::size_t j = 0; j < rep.theta_r.size(); ++j) ASSERT_EQ(rep.theta_r[j] + rep.solution.z2[j] / rep.gamma_r, 0.0);
    const std::size_t m = r.paths.n_paths;
    for (std::size_t k : {0u, 9u, 18u})
        for (std::size_t i = 0; i < m; i += 977)
            ASSERT_NEAR(rep.theta_r_at(k, r.paths.s_row(k)[i], r.paths.r_row(k)[i]), rep.theta_r[k * m + i], 1e-12);
}

TEST(Equilibrium, BaselineShape) {
    const Solved& r = baseline();
    EXPECT_LT(r.eq.Yw0(), 0.0);
    EXPECT_GT(r.eq.B0(), 0.0);
    EXPECT_LT(r.eq.B0(), 1.0);
    EXPECT_EQ(r.eq.rep.solution.clamped, 0u);
    // b is long and a is short in the derivative at time 0
    EXPECT_GT(r.eq.pi2_0(1), 0.0);
    EXPECT_LT(r.eq.pi2_0(0), 0.0);
}

TEST(Equilibrium, Completion) {
    const Solved& r = baseline();
    const KappaDiagnostics& k = r.eq.diagnostics.kappa;
    EXPECT_EQ(k.expected_sign, 1);
    EXPECT_EQ(k.expected_sign_fraction, 1.0);
    EXPECT_GE(k.min_abs, r.cfg.numerics.kappa_floor);
    for (double z : r.eq.price.z2) ASSERT_GT(z, 0.0);
}

TEST(Equilibrium, StrategySystemExact) {
    const Solved& r = baseline();
    EXPECT_LE(r.eq.diagnostics.system_residual, 1e-10);
    EXPECT_LE(r.eq.diagnostics.closed_form_discrepancy, 1e-10);
}

TEST(Equilibrium, Clearing) {
    const Solved& r = baseline();
    EXPECT_LE(r.eq.diagnostics.clearing_residual, 0.02);
    // the same quantity recomputed from the strategy fields
    const std::size_t m = r.paths.n_paths;
    double worst = 0.0;
    for (std::size_t k = 0; k < r.cfg.grid.n_steps; ++k) {
        const double sum = row_mean(r.eq.strategies[0].pi2, k, m) + row_mean(r.eq.strategies[1].pi2, k, m);
        double scale = 0.0;
        for (const auto& st : r.eq.strategies)
            scale += block_sum(m, 1, [&](std::size_t i) { return std::abs(st.pi2[k * m + i]); }) / static_cast<double>(m);
        worst = std::max(worst, std::abs(sum) / (scale / 2.0));
    }
    EXPECT_NEAR(worst, r.eq.diagnostics.clearing_residual, 1e-12);
}

TEST(Equilibrium, AggregationIdentity) {
    const Solved& r = baseline();
    double agg = 0.0;
    for (std::size_t a = 0; a < 2; ++a) agg += r.eq.weights.w[a] * r.eq.agent_risks[a].y0;
    EXPECT_LE(std::abs(agg - r.eq.Yw0()), 0.01 * std::abs(r.eq.Yw0()));
}

TEST(Equilibrium, MartingalePricing) {
    const Solved& r = baseline();
    const double g = girsanov_price(r.cfg, r.paths, r.eq.rep);
    const std::size_t m = r.paths.n_paths, n = r.cfg.grid.n_steps;
    const double dt = r.cfg.grid.dt(), ths = r.cfg.market.theta_s();
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double log_e = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double th = r.eq.rep.theta_r[k * m + i];
            log_e -= ths * r.paths.dws[k * m + i] + th * r.paths.dwr[k * m + i] + 0.5 * (ths * ths + th * th) * dt;
        }
        const double x = std::exp(log_e) * eval_payoff(r.cfg.derivative, r.paths.s_terminal()[i], r.paths.r_terminal()[i]);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / m;
    const double se = std::sqrt((sq / m - mean * mean) / (m - 1));
    EXPECT_NEAR(g, mean, 1e-9 * std::abs(mean));
    // 20k paths here, so allow three standard errors on top of the 1.5% band
    EXPECT_LE(std::abs(g - r.eq.B0()), 0.015 * r.eq.B0() + 3.0 * se) << "se " << se;
}

TEST(Equilibrium, NoConcernPositionIsTarget) {
    EquilibriumConfig c = small(8000);
    for (auto& a : c.agents) a.lambda = 0.0;
    const Solved r(c);
    const std::size_t m = r.paths.n_paths;
    for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t k = 0; k < c.grid.n_steps; k += 3)
            for (std::size_t i = 0; i < m; i += 401) {
                const std::size_t j = k * m + i;
                const FocTargets t = foc_targets(c, c.agents[a].gamma, r.paths.s_row(k)[i], r.eq.rep.theta_r[j],
                                                 r.eq.price.z1[j], r.eq.price.z2[j], r.eq.agent_risks[a].z1[j],
                                                 r.eq.agent_risks[a].z2[j]);
                ASSERT_EQ(r.eq.strategies[a].pi2[j], t.j2);
                ASSERT_EQ(r.eq.strategies[a].pi1[j], t.j1);
            }
}

TEST(Equilibrium, ClosedFormDerivativeLeg) {
    const Solved& r = baseline();
    const std::size_t m = r.paths.n_paths;
    for (std::size_t a = 0; a < 2; ++a) {
        const double lt = r.eq.weights.lambda_tilde[a];
        for (std::size_t j = 0; j < r.cfg.grid.n_steps * m; j += 1013) {
            const std::size_t k = j / m, i = j % m;
            const double j2 = foc_targets(r.cfg, r.cfg.agents[a].gamma, r.paths.s_row(k)[i], r.eq.rep.theta_r[j],
                                          r.eq.price.z1[j], r.eq.price.z2[j], r.eq.agent_risks[a].z1[j],
                                          r.eq.agent_risks[a].z2[j])
                                  .j2;
            ASSERT_NEAR(r.eq.strategies[a].pi2[j], j2 / (1.0 + lt), 1e-10 * std::max(1.0, std::abs(j2)));
        }
    }
}

TEST(Equilibrium, TwoAgentPositionsOffset) {
    const Solved& r = baseline();
    const std::size_t m = r.paths.n_paths;
    const auto& pa = r.eq.strategies[0].pi2;
    const auto& pb = r.eq.strategies[1].pi2;
    double scale = 0.0;
    for (std::size_t j = 0; j < pa.size(); ++j) scale = std::max({scale, std::abs(pa[j]), std::abs(pb[j])});
    for (std::size_t k = 0; k < r.cfg.grid.n_steps; ++k)
        EXPECT_LE(std::abs(row_mean(pa, k, m) + row_mean(pb, k, m)), 0.02 * scale) << "step " << k;
}

TEST(Equilibrium, IdenticalAgents) {
    EquilibriumConfig c = small(8000);
    c.agents[1].endowment = c.agents[0].endowment;
    c.agents[1].lambda = c.agents[0].lambda;
    const Solved r(c);
    EXPECT_NEAR(r.eq.agent_risks[0].y0, r.eq.agent_risks[1].y0, 1e-10);
}

TEST(Equilibrium, ReductionLemma) {
    const Solved& r = baseline();
    const double nu = 0.5;
    PayoffMix shifted = agent_endowment(r.cfg, 0);
    shifted.add(nu, r.cfg.derivative);
    const BsdeSolution ys = solve_agent_risk(r.cfg, *r.design, r.eq.rep, r.cfg.agents[0].gamma, shifted);
    EXPECT_NEAR(ys.y0, r.eq.agent_risks[0].y0 - nu * r.eq.B0(), 0.02 * nu * r.eq.B0());
    // best-response target on the derivative moves by -nu
    const std::size_t m = r.paths.n_paths;
    double shift = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        auto j2 = [&](const BsdeSolution& y) {
            return foc_targets(r.cfg, r.cfg.agents[0].gamma, r.paths.s_row(0)[i], r.eq.rep.theta_r[i], r.eq.price.z1[i],
                               r.eq.price.z2[i], y.z1[i], y.z2[i])
                .j2;
        };
        shift += j2(ys) - j2(r.eq.agent_risks[0]);
    }
    EXPECT_NEAR(shift / static_cast<double>(m), -nu, 0.02 * nu);
}

TEST(Equilibrium, SupplyEnters) {
    EquilibriumConfig c = small(8000);
    c.n_supply = 1.0;
    const PayoffMix mix = agent_endowment(c, 1);
    EXPECT_NEAR(mix.value(50.0, 20.0), eval_payoff(default_endowment_b(), 50.0, 20.0) + 0.5 * 0.5, 1e-14);
    EXPECT_LT(Solved(c).eq.Yw0(), Solved(small(8000)).eq.Yw0());
}

TEST(Equilibrium, ThreadIndependent) {
    const EquilibriumConfig c = small(2 * 4096 + 33);
    const Solved one(c, 1), three(c, 3);
    EXPECT_EQ(one.eq.rep.solution.y, three.eq.rep.solution.y);
    EXPECT_EQ(one.eq.price.y, three.eq.price.y);
    for (std::size_t a = 0; a < 2; ++a) {
        EXPECT_EQ(one.eq.strategies[a].pi1, three.eq.strategies[a].pi1);
        EXPECT_EQ(one.eq.strategies[a].pi2, three.eq.strategies[a].pi2);
    }
    EXPECT_EQ(one.eq.diagnostics.clearing_residual, three.eq.diagnostics.clearing_residual);
}

TEST(Equilibrium, ValidationNamesKey) {
    auto message = [](const EquilibriumConfig& c) {
        try {
            c.validate();
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EquilibriumConfig c = default_config();
    c.agents[1].lambda = 1.2;
    EXPECT_NE(message(c).find("agent.b.lambda"), std::string::npos);
    c = default_config();
    c.agents[0].gamma = -1.0;
    EXPECT_NE(message(c).find("agent.a.gamma"), std::string::npos);
    c = default_config();
    c.derivative = constant_payoff(1.0);
    EXPECT_NE(message(c).find("derivative"), std::string::npos);
    c = default_config();
    c.market.b = 0.0;
    EXPECT_NE(message(c).find("b"), std::string::npos);
    c = default_config();
    c.agents[1].name = "a";
    EXPECT_FALSE(message(c).empty());
}

TEST(Equilibrium, IncompleteMarketIsLoud) {
    EquilibriumConfig c = small(4000);
    c.numerics.kappa_floor = 1e3;
    try {
        run_equilibrium(c);
        FAIL();
    } catch (const PipelineError& e) {
        EXPECT_EQ(e.stage(), "strategies");
    }
}

TEST(Equilibrium, SummaryCsv) {
    const Solved& r = baseline();
    std::ostringstream os;
    write_summary_csv(os, r.cfg, r.eq);
    std::istringstream in(os.str());
    std::string header, row, extra;
    std::getline(in, header);
    std::getline(in, row);
    EXPECT_FALSE(std::getline(in, extra));
    EXPECT_EQ(header, "Yw0,B0,thetaR0,Ya0_a,Ya0_b,pi1_0_a,pi1_0_b,pi2_0_a,pi2_0_b,clearing_residual,min_abs_kappaR");
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 10);

    std::ostringstream ps;
    write_equilibrium_paths_csv(ps, r.cfg, r.paths, r.eq, 2);
    std::istringstream pin(ps.str());
    std::getline(pin, header);
    EXPECT_EQ(header, "step,t,path,s,r,B,thetaR,pi1_a,pi1_b,pi2_a,pi2_b");
    int rows = 0;
    while (std::getline(pin, row)) ++rows;
    EXPECT_GT(rows, 0);
}
