#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rpeq/payoff.hpp"

namespace rpeq {

struct AgentSpec {
    std::string name;
    double gamma = 1.0;
    double lambda = 0.0;
    PayoffSpec endowment;

    bool operator==(const AgentSpec&) const = default;
};

// Throws ConfigError unless every lambda lies in [0,1] and their product is < 1.
void validate_concern_rates(std::span<const double> lambdas);

struct AggregationWeights {
    std::vector<double> lambda_tilde;
    std::vector<double> w;
    std::vector<double> c_per_agent;
    double Lambda = 0.0;
    double c = 0.0;
    double gamma_r = 0.0;
};

AggregationWeights aggregation_weights(std::span<const double> lambdas, std::span<const double> gammas);
AggregationWeights aggregation_weights(const std::vector<AgentSpec>& agents);

std::vector<double> lambda_tilde(std::span<const double> lambdas);

// 1 on the diagonal, -lambda_tilde[j] off the diagonal of row j.
Eigen::MatrixXd concern_matrix(std::span<const double> lambdas);

// 1 - sum_{k>=2} (k-1) e_k(lambda_tilde), e_k the elementary symmetric polynomials.
double det_concern_closed_form(std::span<const double> lambdas);
double det_lu(const Eigen::MatrixXd& m);

struct ConcernDeterminant {
    double closed_form;
    double lu;
};
ConcernDeterminant det_concern(std::span<const double> lambdas);

inline constexpr double kSingularDet = 1e-12;

// Solver for A_N x = rhs. For N = 2 the explicit inverse with factor
// 1/(1 - lambda_a lambda_b) is used; the LU route is kept for cross-checks.
class ConcernSystem {
public:
    explicit ConcernSystem(std::span<const double> lambdas);

    std::size_t size() const { return n_; }
    double determinant() const { return det_; }
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
    Eigen::VectorXd solve_generic(const Eigen::VectorXd& rhs) const;
    const Eigen::MatrixXd& matrix() const { return a_; }
    const std::vector<double>& lambda_tilde() const { return lt_; }

private:
    std::size_t n_;
    std::vector<double> lt_;
    Eigen::MatrixXd a_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    double det_;
};

Eigen::VectorXd solve_concern_system(std::span<const double> lambdas, const Eigen::VectorXd& rhs);

inline double entropic_driver(double gamma, double z1, double z2) { return (z1 * z1 + z2 * z2) / (2.0 * gamma); }

inline double rep_driver(double gamma_r, double theta_s, double z1, double z2) {
    return -gamma_r * theta_s * theta_s / 2.0 - z1 * theta_s + z2 * z2 / (2.0 * gamma_r);
}

inline double agent_min_driver(double gamma, double theta_s, double theta_r, double z1, double z2) {
    return -gamma * (theta_s * theta_s + theta_r * theta_r) / 2.0 - z1 * theta_s - z2 * theta_r;
}

inline double no_derivative_driver(double gamma, double theta_s, double z1, double z2) {
    return -gamma * theta_s * theta_s / 2.0 - z1 * theta_s + z2 * z2 / (2.0 * gamma);
}

using Driver2 = std::function<double(const std::array<double, 2>&)>;

struct InfConvolution {
    double value = 0.0;
    std::vector<std::array<double, 2>> minimizers;
    std::array<double, 2> multiplier{};
};

// Minimises sum_a w_a g_a(z_a) subject to sum_a w_a z_a = z. Each g_a must be
// smooth and strictly convex. Stationarity grad g_a(z_a) = v for a common
// multiplier v reduces the problem to a 2-d root find in v.
InfConvolution infconv_oracle(const std::vector<Driver2>& drivers, std::span<const double> weights,
                              const std::array<double, 2>& z);

InfConvolution infconv_oracle_entropic(std::span<const double> gammas, std::span<const double> weights,
                                       const std::array<double, 2>& z);

}  // namespace rpeq
