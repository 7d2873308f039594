#include "rpeq/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "rpeq/csv.hpp"
#include "rpeq/errors.hpp"
#include "rpeq/parallel.hpp"

namespace rpeq {

namespace {

bool valid_name(const std::string& n) {
    if (n.empty()) return false;
    return std::all_of(n.begin(), n.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

void validate_payoff(const PayoffSpec& p, const std::string& key) {
    for (double v : {p.c0, p.amp_r, p.alpha_r, p.k_r, p.sign_r, p.amp_s, p.k_s})
        if (!std::isfinite(v)) throw ConfigError(key + ": payoff parameters must be finite");
    if (p.sign_r != 1.0 && p.sign_r != -1.0) throw ConfigError(key + ".sign_r: must be +1 or -1");
    if (p.c0 < 0.0) throw ConfigError(key + ".c0: must be >= 0");
}

template <class F>
auto staged(const char* stage, F&& f) {
    try {
        return f();
    } catch (const NumericalError& e) {
        throw PipelineError(stage, e.what());
    }
}

}  // namespace

void EquilibriumConfig::validate() const {
    market.validate();
    grid.validate();
    if (agents.empty()) throw ConfigError("agent: at least one agent is required");
    std::set<std::string> names;
    std::vector<double> lambdas;
    for (const auto& a : agents) {
        const std::string key = "agent." + a.name;
        if (!valid_name(a.name)) throw ConfigError("agent: invalid agent name '" + a.name + "'");
        if (!names.insert(a.name).second) throw ConfigError(key + ": duplicate agent name");
        if (!(a.gamma > 0.0) || !std::isfinite(a.gamma)) throw ConfigError(key + ".gamma: gamma must be > 0");
        if (!(a.lambda >= 0.0 && a.lambda <= 1.0)) throw ConfigError(key + ".lambda: lambda must lie in [0,1]");
        validate_payoff(a.endowment, key);
        lambdas.push_back(a.lambda);
    }
    try {
        validate_concern_rates(lambdas);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("agent.*.lambda: ") + e.what());
    }
    validate_payoff(derivative, "derivative");
    if (r_gradient_sign(derivative) == 0)
        throw ConfigError("derivative: the r-gradient of the derivative payoff must have a constant nonzero sign");
    if (!std::isfinite(n_supply)) throw ConfigError("derivative.supply: must be finite");
    if (numerics.n_paths < 1) throw ConfigError("numerics.n_paths: must be >= 1");
    if (numerics.basis_degree < 0 || numerics.basis_degree > kMaxBasisDegree)
        throw ConfigError("numerics.basis_degree: must lie in [0, " + std::to_string(kMaxBasisDegree) + "]");
    if (!(numerics.ridge >= 0.0)) throw ConfigError("numerics.ridge: must be >= 0");
    if (!(numerics.z_cap >= 0.0)) throw ConfigError("numerics.z_cap: must be >= 0");
    if (!(numerics.kappa_floor > 0.0)) throw ConfigError("numerics.kappa_floor: must be > 0");
}

EquilibriumConfig default_config() {
    EquilibriumConfig c;
    c.agents = {AgentSpec{"a", 1.0, 0.25, default_endowment_a()}, AgentSpec{"b", 1.0, 0.25, default_endowment_b()}};
    c.derivative = default_derivative();
    return c;
}

TerminalZFn terminal_z_from_gradient(const PayoffMix& mix, const MarketParams& market) {
    const double sigma = market.sigma_s;
    const double b = market.b;
    return [mix, sigma, b](double s, double r) -> std::array<double, 2> {
        const auto g = mix.gradient(s, r);
        return {sigma * s * g[0], b * g[1]};
    };
}

double RepresentativeResult::theta_r_at(std::size_t step, double s, double r) const {
    return -eval_z_field(solution, step, s, r)[1] / gamma_r;
}

double EquilibriumOutput::thetaR0() const {
    return block_mean(rep.theta_r.data(), rep.solution.n_paths, 1);
}

double EquilibriumOutput::pi1_0(std::size_t agent) const {
    return block_mean(strategies.at(agent).pi1.data(), rep.solution.n_paths, 1);
}

double EquilibriumOutput::pi2_0(std::size_t agent) const {
    return block_mean(strategies.at(agent).pi2.data(), rep.solution.n_paths, 1);
}

RepresentativeResult solve_representative(const EquilibriumConfig& cfg, const RegressionDesign& design,
                                          const AggregationWeights& weights, std::size_t threads) {
    RepresentativeResult out;
    out.gamma_r = weights.gamma_r;
    const double nn = cfg.n_supply / static_cast<double>(cfg.agents.size());
    if (nn != 0.0) out.endowment.add(nn, cfg.derivative);
    for (std::size_t a = 0; a < cfg.agents.size(); ++a) out.endowment.add(weights.w[a], cfg.agents[a].endowment);

    const double gr = weights.gamma_r;
    const double ths = cfg.market.theta_s();
    DriverSpec driver{[gr, ths](std::size_t, double, double, double z1, double z2) { return rep_driver(gr, ths, z1, z2); },
                      true, cfg.numerics.z_cap};
    BsdeOptions opt;
    opt.threads = threads;
    const PayoffMix terminal_mix = out.endowment.scaled(-1.0);
    if (cfg.numerics.terminal_gradient) opt.terminal_z = terminal_z_from_gradient(terminal_mix, cfg.market);
    const auto terminal = terminal_values(design.paths(), terminal_mix);
    out.solution = staged("representative", [&] { return solve_bsde(design, driver, terminal, opt); });
    out.theta_r.resize(out.solution.z2.size());
    for (std::size_t i = 0; i < out.theta_r.size(); ++i) out.theta_r[i] = -out.solution.z2[i] / gr;
    return out;
}

BsdeSolution price_derivative(const EquilibriumConfig& cfg, const RegressionDesign& design,
                              const RepresentativeResult& rep, std::size_t threads) {
    const double ths = cfg.market.theta_s();
    DriverSpec driver{[&rep, ths](std::size_t k, double s, double r, double z1, double z2) {
                          return -(z1 * ths + z2 * rep.theta_r_at(k, s, r));
                      },
                      false, 0.0};
    PayoffMix hd;
    hd.add(1.0, cfg.derivative);
    BsdeOptions opt;
    opt.threads = threads;
    if (cfg.numerics.terminal_gradient) opt.terminal_z = terminal_z_from_gradient(hd, cfg.market);
    const auto terminal = terminal_values(design.paths(), hd);
    return staged("price", [&] { return solve_bsde(design, driver, terminal, opt); });
}

PayoffMix agent_endowment(const EquilibriumConfig& cfg, std::size_t agent) {
    PayoffMix m;
    m.add(1.0, cfg.agents.at(agent).endowment);
    const double nn = cfg.n_supply / static_cast<double>(cfg.agents.size());
    if (nn != 0.0) m.add(nn, cfg.derivative);
    return m;
}

BsdeSolution solve_agent_risk(const EquilibriumConfig& cfg, const RegressionDesign& design,
                              const RepresentativeResult& rep, double gamma, const PayoffMix& endowment,
                              std::size_t threads) {
    const double ths = cfg.market.theta_s();
    DriverSpec driver{[&rep, gamma, ths](std::size_t k, double s, double r, double z1, double z2) {
                          return agent_min_driver(gamma, ths, rep.theta_r_at(k, s, r), z1, z2);
                      },
                      false, 0.0};
    const PayoffMix terminal_mix = endowment.scaled(-1.0);
    BsdeOptions opt;
    opt.threads = threads;
    if (cfg.numerics.terminal_gradient) opt.terminal_z = terminal_z_from_gradient(terminal_mix, cfg.market);
    const auto terminal = terminal_values(design.paths(), terminal_mix);
    return staged("agent-risk", [&] { return solve_bsde(design, driver, terminal, opt); });
}

std::vector<BsdeSolution> solve_agent_risks(const EquilibriumConfig& cfg, const RegressionDesign& design,
                                            const RepresentativeResult& rep, std::size_t threads) {
    std::vector<BsdeSolution> out;
    for (std::size_t a = 0; a < cfg.agents.size(); ++a) {
        try {
            out.push_back(solve_agent_risk(cfg, design, rep, cfg.agents[a].gamma, agent_endowment(cfg, a), threads));
        } catch (const PipelineError& e) {
            throw PipelineError("agent-risk", "agent " + cfg.agents[a].name + ": " + e.what());
        }
    }
    return out;
}

KappaDiagnostics kappa_diagnostics(const EquilibriumConfig& cfg, const BsdeSolution& price, std::size_t threads) {
    KappaDiagnostics d;
    const int bs = cfg.market.b > 0.0 ? 1 : (cfg.market.b < 0.0 ? -1 : 0);
    d.expected_sign = bs * r_gradient_sign(cfg.derivative);
    const auto& k = price.z2;
    d.samples = k.size();
    const std::size_t nb = block_count(k.size());
    std::vector<double> mins(nb, INFINITY), minv(nb, INFINITY), agree(nb, 0.0);
    for_blocks(k.size(), threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            mins[b] = std::min(mins[b], std::abs(k[i]));
            minv[b] = std::min(minv[b], k[i]);
            const int sg = k[i] > 0.0 ? 1 : (k[i] < 0.0 ? -1 : 0);
            if (sg == d.expected_sign && sg != 0) agree[b] += 1.0;
        }
    });
    d.min_abs = *std::min_element(mins.begin(), mins.end());
    d.min_value = *std::min_element(minv.begin(), minv.end());
    double a = 0.0;
    for (double x : agree) a += x;
    d.expected_sign_fraction = d.samples ? a / static_cast<double>(d.samples) : 0.0;
    return d;
}

FocTargets foc_targets(const EquilibriumConfig& cfg, double gamma, double s, double theta_r, double kappa_s,
                       double kappa_r, double z1, double z2) {
    const double ss = cfg.market.sigma_s * s;
    const double j2 = (z2 + gamma * theta_r) / kappa_r;
    const double j1 = (z1 + gamma * cfg.market.theta_s()) / ss - j2 * kappa_s / ss;
    return {j1, j2};
}

void compute_strategies(const EquilibriumConfig& cfg, const PathEnsemble& paths, EquilibriumOutput& out,
                        std::size_t threads) {
    EquilibriumDiagnostics& diag = out.diagnostics;
    diag.kappa = kappa_diagnostics(cfg, out.price, threads);
    if (!diag.kappa.ok(cfg.numerics.kappa_floor))
        throw PipelineError("strategies", "market incompletion: kappa_R has the expected sign on " +
                                              format_double(diag.kappa.expected_sign_fraction) +
                                              " of samples, min |kappa_R| = " + format_double(diag.kappa.min_abs) +
                                              " (floor " + format_double(cfg.numerics.kappa_floor) + ")");

    const std::size_t na = cfg.agents.size();
    const std::size_t N = paths.grid.n_steps;
    const std::size_t M = paths.n_paths;
    std::vector<double> lambdas;
    for (const auto& a : cfg.agents) lambdas.push_back(a.lambda);
    const ConcernSystem sys = staged("strategies", [&] { return ConcernSystem(lambdas); });
    const auto& lt = sys.lambda_tilde();

    out.strategies.assign(na, StrategyField{std::vector<double>(N * M), std::vector<double>(N * M)});
    const std::size_t nb = block_count(M);
    std::vector<double> resid(nb, 0.0), disc(nb, 0.0), sup_abs(nb, 0.0);
    for (std::size_t k = 0; k < N; ++k) {
        auto s = paths.s_row(k);
        for_blocks(M, threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
            Eigen::VectorXd j1(static_cast<Eigen::Index>(na)), j2(static_cast<Eigen::Index>(na));
            for (std::size_t i = begin; i < end; ++i) {
                const std::size_t idx = k * M + i;
                const double th = out.rep.theta_r[idx];
                for (std::size_t a = 0; a < na; ++a) {
                    const auto& z = out.agent_risks[a];
                    const auto f = foc_targets(cfg, cfg.agents[a].gamma, s[i], th, out.price.z1[idx], out.price.z2[idx],
                                               z.z1[idx], z.z2[idx]);
                    j1[static_cast<Eigen::Index>(a)] = f.j1;
                    j2[static_cast<Eigen::Index>(a)] = f.j2;
                }
                const Eigen::VectorXd p1 = sys.solve(j1);
                const Eigen::VectorXd p2 = sys.solve(j2);
                const Eigen::VectorXd g2 = sys.solve_generic(j2);
                const double r1 = (sys.matrix() * p1 - j1).cwiseAbs().maxCoeff();
                const double r2 = (sys.matrix() * p2 - j2).cwiseAbs().maxCoeff();
                resid[b] = std::max({resid[b], r1, r2});
                double total = 0.0;
                for (std::size_t a = 0; a < na; ++a) {
                    const auto ai = static_cast<Eigen::Index>(a);
                    out.strategies[a].pi1[idx] = p1[ai];
                    out.strategies[a].pi2[idx] = p2[ai];
                    total += p2[ai];
                    const double closed = j2[ai] / (1.0 + lt[a]);
                    disc[b] = std::max(disc[b], std::abs(closed - g2[ai]) / std::max(1.0, std::abs(g2[ai])));
                }
                sup_abs[b] = std::max(sup_abs[b], std::abs(total));
            }
        });
    }
    diag.system_residual = *std::max_element(resid.begin(), resid.end());
    diag.closed_form_discrepancy = *std::max_element(disc.begin(), disc.end());
    diag.clearing_sup_abs = *std::max_element(sup_abs.begin(), sup_abs.end());

    double worst = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
        double net = 0.0, scale = 0.0;
        for (std::size_t a = 0; a < na; ++a) {
            const double* p = out.strategies[a].pi2.data() + k * M;
            net += block_mean(p, M, threads);
            scale += block_sum(M, threads, [p](std::size_t i) { return std::abs(p[i]); }) / static_cast<double>(M);
        }
        scale /= static_cast<double>(na);
        if (scale > 0.0) worst = std::max(worst, std::abs(net) / scale);
    }
    diag.clearing_residual = worst;
}

EquilibriumOutput run_equilibrium(const EquilibriumConfig& cfg, const RegressionDesign& design, std::size_t threads) {
    cfg.validate();
    EquilibriumOutput out;
    out.weights = aggregation_weights(cfg.agents);
    out.rep = solve_representative(cfg, design, out.weights, threads);
    out.price = price_derivative(cfg, design, out.rep, threads);
    out.agent_risks = solve_agent_risks(cfg, design, out.rep, threads);
    out.diagnostics.z_cap_activations = out.rep.solution.clamped;
    for (const auto& w : out.rep.solution.warnings) out.diagnostics.warnings.push_back("representative: " + w);
    compute_strategies(cfg, design.paths(), out, threads);
    return out;
}

EquilibriumOutput run_equilibrium(const EquilibriumConfig& cfg, std::size_t threads) {
    cfg.validate();
    const PathEnsemble paths = simulate_paths(cfg.market, cfg.grid, cfg.numerics.n_paths, cfg.numerics.seed, threads);
    const RegressionDesign design(paths, cfg.numerics.basis(), threads);
    return run_equilibrium(cfg, design, threads);
}

double girsanov_price(const EquilibriumConfig& cfg, const PathEnsemble& paths, const RepresentativeResult& rep,
                      std::size_t threads) {
    const std::size_t N = paths.grid.n_steps;
    const std::size_t M = paths.n_paths;
    const double dt = paths.grid.dt();
    const double ths = cfg.market.theta_s();
    auto sT = paths.s_terminal();
    auto rT = paths.r_terminal();
    return block_sum(M, threads, [&](std::size_t i) {
               double log_e = 0.0;
               for (std::size_t k = 0; k < N; ++k) {
                   const double th = rep.theta_r[k * M + i];
                   log_e += -ths * paths.dws[k * M + i] - th * paths.dwr[k * M + i] - 0.5 * (ths * ths + th * th) * dt;
               }
               return std::exp(log_e) * eval_payoff(cfg.derivative, sT[i], rT[i]);
           }) /
           static_cast<double>(M);
}

void write_summary_csv(std::ostream& os, const EquilibriumConfig& cfg, const EquilibriumOutput& eq) {
    CsvWriter w(os);
    std::vector<std::string> cols{"Yw0", "B0", "thetaR0"};
    for (const auto& a : cfg.agents) cols.push_back("Ya0_" + a.name);
    for (const auto& a : cfg.agents) cols.push_back("pi1_0_" + a.name);
    for (const auto& a : cfg.agents) cols.push_back("pi2_0_" + a.name);
    cols.push_back("clearing_residual");
    cols.push_back("min_abs_kappaR");
    w.header(cols);
    w.field(eq.Yw0()).field(eq.B0()).field(eq.thetaR0());
    for (const auto& r : eq.agent_risks) w.field(r.y0);
    for (std::size_t a = 0; a < cfg.agents.size(); ++a) w.field(eq.pi1_0(a));
    for (std::size_t a = 0; a < cfg.agents.size(); ++a) w.field(eq.pi2_0(a));
    w.field(eq.diagnostics.clearing_residual).field(eq.diagnostics.kappa.min_abs);
    w.end_row();
}

void write_equilibrium_paths_csv(std::ostream& os, const EquilibriumConfig& cfg, const PathEnsemble& paths,
                                 const EquilibriumOutput& eq, std::size_t max_paths) {
    CsvWriter w(os);
    std::vector<std::string> cols{"step", "t", "path", "s", "r", "B", "thetaR"};
    for (const auto& a : cfg.agents) cols.push_back("pi1_" + a.name);
    for (const auto& a : cfg.agents) cols.push_back("pi2_" + a.name);
    w.header(cols);
    const std::size_t M = paths.n_paths;
    const std::size_t np = std::min(max_paths, M);
    for (std::size_t p = 0; p < np; ++p) {
        for (std::size_t k = 0; k < paths.grid.n_steps; ++k) {
            const std::size_t idx = k * M + p;
            w.field(k).field(paths.grid.time(k)).field(p).field(paths.s[idx]).field(paths.r[idx]);
            w.field(eq.price.y[idx]).field(eq.rep.theta_r[idx]);
            for (const auto& st : eq.strategies) w.field(st.pi1[idx]);
            for (const auto& st : eq.strategies) w.field(st.pi2[idx]);
            w.end_row();
        }
    }
}

}  // namespace rpeq
