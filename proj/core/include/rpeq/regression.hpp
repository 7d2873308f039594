#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include <Eigen/Dense>

namespace rpeq {

struct RegressionBasis {
    int degree = 2;
    double ridge = 1e-8;
};

inline constexpr int kMaxBasisDegree = 6;
inline constexpr double kDegenerateStd = 1e-12;

// Affine map sending the sample (s, r) to zero mean and unit variance. A
// coordinate whose sample std falls below kDegenerateStd is dropped.
struct Standardization {
    double s_mean = 0.0, s_scale = 1.0;
    double r_mean = 0.0, r_scale = 1.0;
    bool use_s = true, use_r = true;
};

Standardization standardize(std::span<const double> s, std::span<const double> r, std::size_t threads = 1);

// Monomials in standardized (s^, r^) by total degree. Within degree k the order
// is s^^k, r^^k, then the mixed terms; degree 2 gives {1, s^, r^, s^2, r^2, s^r^}.
std::size_t basis_size(int degree, const Standardization& st);
std::size_t eval_basis(int degree, const Standardization& st, double s, double r, double* out);

struct RegressionFit {
    int degree = 2;
    Standardization standardization;
    Eigen::VectorXd coef;

    double predict(double s, double r) const;
};

// Ridge-regularised least squares via the normal equations. The intercept is
// not penalised. With ridge == 0 a rank-deficient design raises NumericalError.
RegressionFit fit_regression(const RegressionBasis& basis, std::span<const double> s, std::span<const double> r,
                             std::span<const double> y, std::size_t threads = 1);

// One time step's regression problem. The Gram matrix is factored once and
// reused for every target regressed on the same sample.
class CrossSection {
public:
    CrossSection(const RegressionBasis& basis, std::span<const double> s, std::span<const double> r,
                 std::size_t threads = 1);

    std::size_t size() const { return p_; }
    int degree() const { return degree_; }
    const Standardization& standardization() const { return st_; }

    // target(path, out) writes n_targets values; returns one coefficient column per target.
    Eigen::MatrixXd fit(std::size_t n_targets, const std::function<void(std::size_t, double*)>& target) const;

    double predict(const Eigen::VectorXd& coef, std::size_t path) const;
    double predict(const Eigen::VectorXd& coef, double s, double r) const;

private:
    int degree_;
    std::span<const double> s_, r_;
    std::size_t threads_;
    Standardization st_;
    std::size_t p_ = 0;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

}  // namespace rpeq
