#include "rpeq/risk.hpp"

#include <cmath>
#include <sstream>

#include "rpeq/csv.hpp"
#include "rpeq/errors.hpp"

namespace rpeq {

void validate_concern_rates(std::span<const double> lambdas) {
    double prod = 1.0;
    for (double l : lambdas) {
        if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("lambda must lie in [0,1]");
        prod *= l;
    }
    if (!lambdas.empty() && !(prod < 1.0)) throw ConfigError("product of concern rates must be < 1");
}

std::vector<double> lambda_tilde(std::span<const double> lambdas) {
    const std::size_t n = lambdas.size();
    std::vector<double> lt(n, 0.0);
    if (n < 2) return lt;
    for (std::size_t a = 0; a < n; ++a) lt[a] = lambdas[a] / static_cast<double>(n - 1);
    return lt;
}

AggregationWeights aggregation_weights(std::span<const double> lambdas, std::span<const double> gammas) {
    if (lambdas.empty()) throw ConfigError("at least one agent is required");
    if (lambdas.size() != gammas.size()) throw std::invalid_argument("aggregation_weights: size mismatch");
    validate_concern_rates(lambdas);
    for (double g : gammas)
        if (!(g > 0.0)) throw ConfigError("gamma must be > 0");

    AggregationWeights out;
    out.lambda_tilde = lambda_tilde(lambdas);
    const std::size_t n = lambdas.size();
    for (double lt : out.lambda_tilde) out.Lambda += 1.0 / (1.0 + lt);
    out.w.resize(n);
    double tail = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        out.w[a] = 1.0 / (out.Lambda * (1.0 + out.lambda_tilde[a]));
        tail += out.lambda_tilde[a] / (1.0 + out.lambda_tilde[a]);
        out.gamma_r += out.w[a] * gammas[a];
    }
    out.c = (1.0 - tail) / out.Lambda;
    double wl = 0.0;
    for (std::size_t b = 0; b < n; ++b) wl += out.w[b] * out.lambda_tilde[b];
    out.c_per_agent.resize(n);
    for (std::size_t a = 0; a < n; ++a) out.c_per_agent[a] = out.w[a] * (1.0 + out.lambda_tilde[a]) - wl;
    return out;
}

AggregationWeights aggregation_weights(const std::vector<AgentSpec>& agents) {
    std::vector<double> l, g;
    for (const auto& a : agents) {
        l.push_back(a.lambda);
        g.push_back(a.gamma);
    }
    return aggregation_weights(l, g);
}

Eigen::MatrixXd concern_matrix(std::span<const double> lambdas) {
    const auto lt = lambda_tilde(lambdas);
    const auto n = static_cast<Eigen::Index>(lt.size());
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k) a(j, k) = j == k ? 1.0 : -lt[static_cast<std::size_t>(j)];
    return a;
}

// e_k(lambda_tilde) = e_k(lambda) / (N-1)^k. Scaling everything by (N-1)^N keeps
// the sum in e_k(lambda), so lambda = 1 gives integer terms and det = 0 exactly.
double det_concern_closed_form(std::span<const double> lambdas) {
    const std::size_t n = lambdas.size();
    if (n < 2) return 1.0;
    std::vector<double> e(n + 1, 0.0);
    e[0] = 1.0;
    for (double x : lambdas)
        for (std::size_t k = n; k >= 1; --k) e[k] += x * e[k - 1];
    const double m = static_cast<double>(n - 1);
    std::vector<double> pw(n + 1, 1.0);
    for (std::size_t k = 1; k <= n; ++k) pw[k] = pw[k - 1] * m;
    double num = pw[n];
    for (std::size_t k = 2; k <= n; ++k) num -= static_cast<double>(k - 1) * e[k] * pw[n - k];
    return num / pw[n];
}

double det_lu(const Eigen::MatrixXd& m) { return Eigen::PartialPivLU<Eigen::MatrixXd>(m).determinant(); }

ConcernDeterminant det_concern(std::span<const double> lambdas) {
    return {det_concern_closed_form(lambdas), det_lu(concern_matrix(lambdas))};
}

ConcernSystem::ConcernSystem(std::span<const double> lambdas)
    : n_(lambdas.size()), lt_(rpeq::lambda_tilde(lambdas)), a_(concern_matrix(lambdas)) {
    det_ = det_concern_closed_form(lambdas);
    if (!(det_ > kSingularDet)) {
        std::ostringstream os;
        os << "concern matrix is singular (det " << format_double(det_) << ") for lambda = (";
        for (std::size_t a = 0; a < n_; ++a) os << (a ? ", " : "") << format_double(lambdas[a]);
        os << ")";
        throw NumericalError(os.str());
    }
    lu_.compute(a_);
}

Eigen::VectorXd ConcernSystem::solve(const Eigen::VectorXd& rhs) const {
    if (n_ == 2) {
        const double la = lt_[0], lb = lt_[1];
        const double f = 1.0 / (1.0 - la * lb);
        Eigen::VectorXd x(2);
        x[0] = f * (rhs[0] + la * rhs[1]);
        x[1] = f * (lb * rhs[0] + rhs[1]);
        return x;
    }
    return lu_.solve(rhs);
}

Eigen::VectorXd ConcernSystem::solve_generic(const Eigen::VectorXd& rhs) const { return lu_.solve(rhs); }

Eigen::VectorXd solve_concern_system(std::span<const double> lambdas, const Eigen::VectorXd& rhs) {
    return ConcernSystem(lambdas).solve(rhs);
}

namespace {

using Vec2 = std::array<double, 2>;

struct Local {
    Vec2 grad;
    Eigen::Matrix2d hess;
};

Local derivatives(const Driver2& g, const Vec2& z) {
    Local out{};
    const double h = 1e-4 * std::max(1.0, std::hypot(z[0], z[1]));
    for (int i = 0; i < 2; ++i) {
        Vec2 zp = z, zm = z;
        zp[i] += h;
        zm[i] -= h;
        out.grad[i] = (g(zp) - g(zm)) / (2.0 * h);
    }
    const double g0 = g(z);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            if (i == j) {
                Vec2 zp = z, zm = z;
                zp[i] += h;
                zm[i] -= h;
                out.hess(i, i) = (g(zp) - 2.0 * g0 + g(zm)) / (h * h);
            } else {
                Vec2 pp = z, pm = z, mp = z, mm = z;
                pp[i] += h, pp[j] += h;
                pm[i] += h, pm[j] -= h;
                mp[i] -= h, mp[j] += h;
                mm[i] -= h, mm[j] -= h;
                out.hess(i, j) = (g(pp) - g(pm) - g(mp) + g(mm)) / (4.0 * h * h);
            }
        }
    }
    return out;
}

// Solves grad g(z) = v by Newton's method.
Vec2 invert_gradient(const Driver2& g, const Vec2& v, Vec2 z, Eigen::Matrix2d& hess_out) {
    for (int it = 0; it < 100; ++it) {
        const Local d = derivatives(g, z);
        const Eigen::Vector2d res(d.grad[0] - v[0], d.grad[1] - v[1]);
        hess_out = d.hess;
        const Eigen::Vector2d step = d.hess.ldlt().solve(res);
        z[0] -= step[0];
        z[1] -= step[1];
        if (step.norm() <= 1e-12 * (1.0 + std::hypot(z[0], z[1]))) return z;
    }
    throw NumericalError("inf-convolution oracle: gradient inversion did not converge");
}

}  // namespace

InfConvolution infconv_oracle(const std::vector<Driver2>& drivers, std::span<const double> weights,
                              const std::array<double, 2>& z) {
    const std::size_t n = drivers.size();
    if (n == 0 || weights.size() != n) throw std::invalid_argument("infconv_oracle: size mismatch");
    InfConvolution out;
    out.minimizers.assign(n, Vec2{0.0, 0.0});
    Vec2 v{0.0, 0.0};
    std::vector<Eigen::Matrix2d> hess(n);
    for (int it = 0; it < 100; ++it) {
        Eigen::Vector2d resid(-z[0], -z[1]);
        Eigen::Matrix2d jac = Eigen::Matrix2d::Zero();
        for (std::size_t a = 0; a < n; ++a) {
            out.minimizers[a] = invert_gradient(drivers[a], v, out.minimizers[a], hess[a]);
            resid[0] += weights[a] * out.minimizers[a][0];
            resid[1] += weights[a] * out.minimizers[a][1];
            jac += weights[a] * hess[a].inverse();
        }
        if (resid.norm() <= 1e-11 * (1.0 + std::hypot(z[0], z[1]))) {
            out.multiplier = v;
            for (std::size_t a = 0; a < n; ++a) out.value += weights[a] * drivers[a](out.minimizers[a]);
            return out;
        }
        const Eigen::Vector2d step = jac.lu().solve(resid);
        v[0] -= step[0];
        v[1] -= step[1];
    }
    throw NumericalError("inf-convolution oracle: root find did not converge");
}

InfConvolution infconv_oracle_entropic(std::span<const double> gammas, std::span<const double> weights,
                                       const std::array<double, 2>& z) {
    std::vector<Driver2> drivers;
    for (double g : gammas) drivers.push_back([g](const Vec2& x) { return entropic_driver(g, x[0], x[1]); });
    return infconv_oracle(drivers, weights, z);
}

}  // namespace rpeq
