#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rpeq/market.hpp"
#include "rpeq/regression.hpp"

namespace rpeq {

// f(step, s, r, z1, z2) in -dY = f dt - Z.dW
using DriverFn = std::function<double(std::size_t, double, double, double, double)>;

struct DriverSpec {
    DriverFn f;
    bool quadratic = false;
    // When > 0 and the driver is quadratic, f sees z2 clamped to [-z_cap, z_cap].
    double z_cap = 0.0;
};

// Z at the last step as a function of (s, r); see BsdeOptions::terminal_z.
using TerminalZFn = std::function<std::array<double, 2>(double, double)>;

struct BsdeOptions {
    bool control_variate = true;
    std::size_t threads = 1;
    // If set, Z on the last step is taken from this function at (S, R) instead
    // of the increment regression. For a smooth terminal h this is sigma^T grad h.
    TerminalZFn terminal_z;
};

// Per-step standardizations and Gram factorizations for one ensemble. Reused
// by every BSDE solved on the same paths.
class RegressionDesign {
public:
    RegressionDesign(const PathEnsemble& paths, const RegressionBasis& basis, std::size_t threads = 1);

    const PathEnsemble& paths() const { return *paths_; }
    const RegressionBasis& basis() const { return basis_; }
    const CrossSection& step(std::size_t k) const { return steps_.at(k); }
    std::size_t n_steps() const { return steps_.size(); }

private:
    const PathEnsemble* paths_;
    RegressionBasis basis_;
    std::vector<CrossSection> steps_;
};

struct BsdeSolution {
    std::size_t n_steps = 0;
    std::size_t n_paths = 0;
    std::vector<double> y;       // (n_steps + 1) x n_paths
    std::vector<double> z1, z2;  // n_steps x n_paths
    std::vector<Standardization> standardization;
    std::vector<Eigen::VectorXd> coeff_y, coeff_z1, coeff_z2;  // per step; z tables empty where terminal_z was used
    int degree = 2;
    TerminalZFn terminal_z;
    double y0 = 0.0;
    std::size_t clamped = 0;
    std::vector<double> target_variance;  // cross-path variance of the Y regression target per step
    std::vector<std::string> warnings;

    double y_at(std::size_t step, std::size_t path) const { return y[step * n_paths + path]; }
    double z1_at(std::size_t step, std::size_t path) const { return z1[step * n_paths + path]; }
    double z2_at(std::size_t step, std::size_t path) const { return z2[step * n_paths + path]; }
    std::span<const double> y_row(std::size_t step) const { return {y.data() + step * n_paths, n_paths}; }
    std::span<const double> z1_row(std::size_t step) const { return {z1.data() + step * n_paths, n_paths}; }
    std::span<const double> z2_row(std::size_t step) const { return {z2.data() + step * n_paths, n_paths}; }
};

BsdeSolution solve_bsde(const RegressionDesign& design, const DriverSpec& driver, std::span<const double> terminal,
                        const BsdeOptions& options = {});

BsdeSolution solve_bsde(const PathEnsemble& paths, const DriverSpec& driver, std::span<const double> terminal,
                        const RegressionBasis& basis, const BsdeOptions& options = {});

// gamma * ln mean(exp(-xi / gamma)), shifted by the max exponent.
double entropic_risk_mc(std::span<const double> xi, double gamma);

// Re-evaluates the stored Z regression of a step at an arbitrary state.
std::array<double, 2> eval_z_field(const BsdeSolution& sol, std::size_t step, double s, double r);

void write_bsde_csv(std::ostream& out, const BsdeSolution& sol, const TimeGrid& grid, std::size_t threads = 1);

}  // namespace rpeq
