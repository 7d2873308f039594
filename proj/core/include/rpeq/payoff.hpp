#pragma once

#include <array>
#include <utility>
#include <vector>

#include "rpeq/market.hpp"

namespace rpeq {

// h(s, r) = c0 + I(sign_r * alpha_r * (r - k_r)) * (amp_r + amp_s * I(s - k_s))
struct PayoffSpec {
    double c0 = 0.0;
    double amp_r = 0.0;
    double alpha_r = 1.0;
    double k_r = 0.0;
    double sign_r = 1.0;
    double amp_s = 0.0;
    double k_s = 0.0;

    bool operator==(const PayoffSpec&) const = default;
};

// I(x) = arctan(x)/pi + 1/2
double sigmoid_i(double x);
double sigmoid_i_prime(double x);

double eval_payoff(const PayoffSpec& spec, double s, double r);
double payoff_r_gradient(const PayoffSpec& spec, double s, double r);
double payoff_s_gradient(const PayoffSpec& spec, double s, double r);

// +1 or -1 when the r-gradient has that strict sign for every (s, r), else 0.
int r_gradient_sign(const PayoffSpec& spec);

PayoffSpec constant_payoff(double c);
PayoffSpec default_endowment_a();
PayoffSpec default_endowment_b();
PayoffSpec default_derivative();

// Linear combination sum_k c_k h_k, used for composite terminal conditions.
struct PayoffMix {
    std::vector<std::pair<double, PayoffSpec>> terms;

    PayoffMix& add(double coeff, const PayoffSpec& spec) {
        terms.emplace_back(coeff, spec);
        return *this;
    }
    double value(double s, double r) const;
    // (d/ds, d/dr)
    std::array<double, 2> gradient(double s, double r) const;
    PayoffMix scaled(double c) const;
};

std::vector<double> terminal_values(const PathEnsemble& paths, const PayoffMix& mix);

}  // namespace rpeq
