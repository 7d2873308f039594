#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rpeq/bsde.hpp"
#include "rpeq/market.hpp"
#include "rpeq/payoff.hpp"
#include "rpeq/risk.hpp"

namespace rpeq {

struct Numerics {
    std::size_t n_paths = 200000;
    std::uint64_t seed = 42;
    int basis_degree = 2;
    double ridge = 1e-8;
    double z_cap = 50.0;
    double kappa_floor = 1e-4;
    std::size_t sample_paths = 1;
    // Last-step Z from sigma^T grad h instead of the increment regression.
    bool terminal_gradient = true;

    RegressionBasis basis() const { return {basis_degree, ridge}; }
    bool operator==(const Numerics&) const = default;
};

struct EquilibriumConfig {
    std::vector<AgentSpec> agents;
    MarketParams market;
    TimeGrid grid;
    PayoffSpec derivative;
    double n_supply = 0.0;
    Numerics numerics;

    // Throws ConfigError naming the offending key.
    void validate() const;
    bool operator==(const EquilibriumConfig&) const = default;
};

// Two agents a and b (seller and buyer of the derivative) with gamma 1,
// lambda 0.25 and the default market.
EquilibriumConfig default_config();

TerminalZFn terminal_z_from_gradient(const PayoffMix& mix, const MarketParams& market);

struct RepresentativeResult {
    BsdeSolution solution;
    std::vector<double> theta_r;  // n_steps x n_paths
    double gamma_r = 1.0;
    PayoffMix endowment;          // H^w

    // -Z^{w,2}(step, s, r) / gamma_r from the stored coefficient tables.
    double theta_r_at(std::size_t step, double s, double r) const;
};

struct KappaDiagnostics {
    double min_abs = 0.0;
    double min_value = 0.0;
    double expected_sign_fraction = 0.0;
    int expected_sign = 0;
    std::size_t samples = 0;

    bool ok(double floor) const { return expected_sign != 0 && expected_sign_fraction == 1.0 && min_abs >= floor; }
};

struct StrategyField {
    std::vector<double> pi1, pi2;  // n_steps x n_paths
};

struct EquilibriumDiagnostics {
    // sup over steps of |sum_a mean pi2_a| / mean_a mean |pi2_a|
    double clearing_residual = 0.0;
    double clearing_sup_abs = 0.0;
    KappaDiagnostics kappa;
    // max |closed form - generic A_N solve| over the derivative leg, relative to max(1, |pi2|)
    double closed_form_discrepancy = 0.0;
    double system_residual = 0.0;
    std::size_t z_cap_activations = 0;
    std::vector<std::string> warnings;
};

struct EquilibriumOutput {
    AggregationWeights weights;
    RepresentativeResult rep;
    BsdeSolution price;
    std::vector<BsdeSolution> agent_risks;
    std::vector<StrategyField> strategies;
    EquilibriumDiagnostics diagnostics;

    double Yw0() const { return rep.solution.y0; }
    double B0() const { return price.y0; }
    double thetaR0() const;
    double pi1_0(std::size_t agent) const;
    double pi2_0(std::size_t agent) const;
};

RepresentativeResult solve_representative(const EquilibriumConfig& cfg, const RegressionDesign& design,
                                          const AggregationWeights& weights, std::size_t threads = 1);

BsdeSolution price_derivative(const EquilibriumConfig& cfg, const RegressionDesign& design,
                              const RepresentativeResult& rep, std::size_t threads = 1);

// Minimised-risk BSDE for one endowment under the equilibrium market prices.
BsdeSolution solve_agent_risk(const EquilibriumConfig& cfg, const RegressionDesign& design,
                              const RepresentativeResult& rep, double gamma, const PayoffMix& endowment,
                              std::size_t threads = 1);

std::vector<BsdeSolution> solve_agent_risks(const EquilibriumConfig& cfg, const RegressionDesign& design,
                                            const RepresentativeResult& rep, std::size_t threads = 1);

// H^a + (n/N) H^D
PayoffMix agent_endowment(const EquilibriumConfig& cfg, std::size_t agent);

KappaDiagnostics kappa_diagnostics(const EquilibriumConfig& cfg, const BsdeSolution& price, std::size_t threads = 1);

// Individual FOC targets at one (step, path): returns J^{a,1} and J^{a,2}.
struct FocTargets {
    double j1, j2;
};
FocTargets foc_targets(const EquilibriumConfig& cfg, double gamma, double s, double theta_r, double kappa_s,
                       double kappa_r, double z1, double z2);

// Throws PipelineError("strategies", ...) if the derivative does not complete the market.
void compute_strategies(const EquilibriumConfig& cfg, const PathEnsemble& paths, EquilibriumOutput& out,
                        std::size_t threads = 1);

EquilibriumOutput run_equilibrium(const EquilibriumConfig& cfg, const RegressionDesign& design, std::size_t threads = 1);
EquilibriumOutput run_equilibrium(const EquilibriumConfig& cfg, std::size_t threads = 1);

// mean(E_T H^D) with E the discrete stochastic exponential of -theta built from the stored increments.
double girsanov_price(const EquilibriumConfig& cfg, const PathEnsemble& paths, const RepresentativeResult& rep,
                      std::size_t threads = 1);

void write_summary_csv(std::ostream& out, const EquilibriumConfig& cfg, const EquilibriumOutput& eq);
void write_equilibrium_paths_csv(std::ostream& out, const EquilibriumConfig& cfg, const PathEnsemble& paths,
                                 const EquilibriumOutput& eq, std::size_t max_paths);

}  // namespace rpeq
