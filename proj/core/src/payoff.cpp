#include "rpeq/payoff.hpp"

#include <cmath>
#include <numbers>

namespace rpeq {

double sigmoid_i(double x) { return std::atan(x) / std::numbers::pi + 0.5; }

double sigmoid_i_prime(double x) { return 1.0 / (std::numbers::pi * (1.0 + x * x)); }

double eval_payoff(const PayoffSpec& p, double s, double r) {
    const double bracket = p.amp_r + p.amp_s * sigmoid_i(s - p.k_s);
    return p.c0 + sigmoid_i(p.sign_r * p.alpha_r * (r - p.k_r)) * bracket;
}

double payoff_r_gradient(const PayoffSpec& p, double s, double r) {
    const double bracket = p.amp_r + p.amp_s * sigmoid_i(s - p.k_s);
    const double a = p.sign_r * p.alpha_r;
    return a * sigmoid_i_prime(a * (r - p.k_r)) * bracket;
}

double payoff_s_gradient(const PayoffSpec& p, double s, double r) {
    return sigmoid_i(p.sign_r * p.alpha_r * (r - p.k_r)) * p.amp_s * sigmoid_i_prime(s - p.k_s);
}

int r_gradient_sign(const PayoffSpec& p) {
    // I(s - k_s) ranges over (0, 1), so the bracket lies strictly between amp_r and amp_r + amp_s.
    const double lo = std::min(p.amp_r, p.amp_r + p.amp_s);
    const double hi = std::max(p.amp_r, p.amp_r + p.amp_s);
    int bracket = 0;
    if (lo >= 0.0 && hi > 0.0)
        bracket = 1;
    else if (hi <= 0.0 && lo < 0.0)
        bracket = -1;
    const double a = p.sign_r * p.alpha_r;
    if (a == 0.0 || bracket == 0) return 0;
    return (a > 0.0 ? 1 : -1) * bracket;
}

PayoffSpec constant_payoff(double c) { return PayoffSpec{c, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0}; }

PayoffSpec default_endowment_a() { return PayoffSpec{5.0, 15.0, 2.0, 24.0, 1.0, 0.0, 0.0}; }

PayoffSpec default_endowment_b() { return PayoffSpec{5.0, 15.0, 2.0, 16.0, -1.0, 5.0, 40.0}; }

PayoffSpec default_derivative() { return PayoffSpec{0.0, 1.0, 1.0, 20.0, 1.0, 0.0, 0.0}; }

double PayoffMix::value(double s, double r) const {
    double v = 0.0;
    for (const auto& [c, spec] : terms) v += c * eval_payoff(spec, s, r);
    return v;
}

std::array<double, 2> PayoffMix::gradient(double s, double r) const {
    std::array<double, 2> g{0.0, 0.0};
    for (const auto& [c, spec] : terms) {
        g[0] += c * payoff_s_gradient(spec, s, r);
        g[1] += c * payoff_r_gradient(spec, s, r);
    }
    return g;
}

PayoffMix PayoffMix::scaled(double c) const {
    PayoffMix out = *this;
    for (auto& t : out.terms) t.first *= c;
    return out;
}

std::vector<double> terminal_values(const PathEnsemble& paths, const PayoffMix& mix) {
    auto s = paths.s_terminal();
    auto r = paths.r_terminal();
    std::vector<double> v(paths.n_paths);
    for (std::size_t p = 0; p < paths.n_paths; ++p) v[p] = mix.value(s[p], r[p]);
    return v;
}

}  // namespace rpeq
