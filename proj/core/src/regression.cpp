#include "rpeq/regression.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "rpeq/errors.hpp"
#include "rpeq/parallel.hpp"

namespace rpeq {

namespace {

constexpr std::size_t kMaxBasis = (kMaxBasisDegree + 1) * (kMaxBasisDegree + 2) / 2;

void check_degree(int degree) {
    if (degree < 0 || degree > kMaxBasisDegree)
        throw ConfigError("numerics.basis_degree must lie in [0, " + std::to_string(kMaxBasisDegree) + "]");
}

}  // namespace

Standardization standardize(std::span<const double> s, std::span<const double> r, std::size_t threads) {
    Standardization st;
    const std::size_t n = s.size();
    if (n == 0) {
        st.use_s = st.use_r = false;
        return st;
    }
    const double dn = static_cast<double>(n);
    st.s_mean = block_sum(n, threads, [&](std::size_t i) { return s[i]; }) / dn;
    st.r_mean = block_sum(n, threads, [&](std::size_t i) { return r[i]; }) / dn;
    const double vs = block_sum(n, threads, [&](std::size_t i) {
        const double d = s[i] - st.s_mean;
        return d * d;
    }) / dn;
    const double vr = block_sum(n, threads, [&](std::size_t i) {
        const double d = r[i] - st.r_mean;
        return d * d;
    }) / dn;
    const double sds = std::sqrt(vs);
    const double sdr = std::sqrt(vr);
    st.use_s = sds >= kDegenerateStd;
    st.use_r = sdr >= kDegenerateStd;
    st.s_scale = st.use_s ? 1.0 / sds : 0.0;
    st.r_scale = st.use_r ? 1.0 / sdr : 0.0;
    return st;
}

std::size_t basis_size(int degree, const Standardization& st) {
    const int dims = static_cast<int>(st.use_s) + static_cast<int>(st.use_r);
    if (dims == 0) return 1;
    if (dims == 1) return static_cast<std::size_t>(degree) + 1;
    return static_cast<std::size_t>((degree + 1) * (degree + 2) / 2);
}

std::size_t eval_basis(int degree, const Standardization& st, double s, double r, double* out) {
    const double x = (s - st.s_mean) * st.s_scale;
    const double y = (r - st.r_mean) * st.r_scale;
    std::array<double, kMaxBasisDegree + 1> px{}, py{};
    px[0] = py[0] = 1.0;
    for (int k = 1; k <= degree; ++k) {
        px[k] = px[k - 1] * x;
        py[k] = py[k - 1] * y;
    }
    std::size_t n = 0;
    out[n++] = 1.0;
    for (int k = 1; k <= degree; ++k) {
        if (st.use_s) out[n++] = px[k];
        if (st.use_r) out[n++] = py[k];
        if (st.use_s && st.use_r)
            for (int j = 1; j < k; ++j) out[n++] = px[k - j] * py[j];
    }
    return n;
}

double RegressionFit::predict(double s, double r) const {
    std::array<double, kMaxBasis> phi{};
    const std::size_t n = eval_basis(degree, standardization, s, r, phi.data());
    double v = 0.0;
    for (std::size_t j = 0; j < n; ++j) v += coef[static_cast<Eigen::Index>(j)] * phi[j];
    return v;
}

CrossSection::CrossSection(const RegressionBasis& basis, std::span<const double> s, std::span<const double> r,
                           std::size_t threads)
    : degree_(basis.degree), s_(s), r_(r), threads_(threads) {
    check_degree(basis.degree);
    if (!(basis.ridge >= 0.0)) throw ConfigError("numerics.ridge must be >= 0");
    st_ = standardize(s, r, threads);
    p_ = basis_size(degree_, st_);
    const std::size_t n = s.size();
    const auto P = static_cast<Eigen::Index>(p_);

    std::vector<Eigen::MatrixXd> partial(block_count(n), Eigen::MatrixXd::Zero(P, P));
    for_blocks(n, threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
        std::array<double, kMaxBasis> phi{};
        Eigen::MatrixXd& g = partial[b];
        for (std::size_t i = begin; i < end; ++i) {
            eval_basis(degree_, st_, s[i], r[i], phi.data());
            for (Eigen::Index a = 0; a < P; ++a)
                for (Eigen::Index c = 0; c <= a; ++c) g(a, c) += phi[a] * phi[c];
        }
    });
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(P, P);
    for (const auto& g : partial) gram += g;
    gram = gram.selfadjointView<Eigen::Lower>();
    if (n > 0) gram /= static_cast<double>(n);

    if (basis.ridge == 0.0) {
        bool deficient = n < p_;
        if (!deficient) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
            const auto ev = eig.eigenvalues();
            deficient = !(ev.minCoeff() > 1e-12 * ev.maxCoeff());
        }
        if (deficient)
            throw NumericalError("rank-deficient regression design (" + std::to_string(n) + " samples, " +
                                 std::to_string(p_) + " basis functions); use ridge > 0");
    }
    for (Eigen::Index j = 1; j < P; ++j) gram(j, j) += basis.ridge;
    ldlt_.compute(gram);
    if (ldlt_.info() != Eigen::Success) throw NumericalError("normal equations could not be factored");
}

Eigen::MatrixXd CrossSection::fit(std::size_t n_targets,
                                  const std::function<void(std::size_t, double*)>& target) const {
    const std::size_t n = s_.size();
    const auto P = static_cast<Eigen::Index>(p_);
    const auto K = static_cast<Eigen::Index>(n_targets);
    std::vector<Eigen::MatrixXd> partial(block_count(n), Eigen::MatrixXd::Zero(P, K));
    for_blocks(n, threads_, [&](std::size_t b, std::size_t begin, std::size_t end) {
        std::array<double, kMaxBasis> phi{};
        std::vector<double> t(n_targets);
        Eigen::MatrixXd& acc = partial[b];
        for (std::size_t i = begin; i < end; ++i) {
            eval_basis(degree_, st_, s_[i], r_[i], phi.data());
            target(i, t.data());
            for (Eigen::Index k = 0; k < K; ++k)
                for (Eigen::Index a = 0; a < P; ++a) acc(a, k) += phi[a] * t[k];
        }
    });
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(P, K);
    for (const auto& m : partial) rhs += m;
    if (n > 0) rhs /= static_cast<double>(n);
    return ldlt_.solve(rhs);
}

double CrossSection::predict(const Eigen::VectorXd& coef, std::size_t path) const {
    return predict(coef, s_[path], r_[path]);
}

double CrossSection::predict(const Eigen::VectorXd& coef, double s, double r) const {
    std::array<double, kMaxBasis> phi{};
    eval_basis(degree_, st_, s, r, phi.data());
    double v = 0.0;
    for (std::size_t j = 0; j < p_; ++j) v += coef[static_cast<Eigen::Index>(j)] * phi[j];
    return v;
}

RegressionFit fit_regression(const RegressionBasis& basis, std::span<const double> s, std::span<const double> r,
                             std::span<const double> y, std::size_t threads) {
    if (s.size() != r.size() || s.size() != y.size())
        throw std::invalid_argument("fit_regression: feature and target sizes differ");
    CrossSection cs(basis, s, r, threads);
    RegressionFit fit;
    fit.degree = basis.degree;
    fit.standardization = cs.standardization();
    fit.coef = cs.fit(1, [&](std::size_t i, double* out) { out[0] = y[i]; }).col(0);
    return fit;
}

}  // namespace rpeq
