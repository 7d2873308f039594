#include "rpeq/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "rpeq/csv.hpp"
#include "rpeq/errors.hpp"
#include "rpeq/parallel.hpp"

namespace rpeq {

RegressionDesign::RegressionDesign(const PathEnsemble& paths, const RegressionBasis& basis, std::size_t threads)
    : paths_(&paths), basis_(basis) {
    steps_.reserve(paths.grid.n_steps);
    for (std::size_t k = 0; k < paths.grid.n_steps; ++k) steps_.emplace_back(basis, paths.s_row(k), paths.r_row(k), threads);
}

namespace {

std::size_t count_nonfinite(std::span<const double> x, std::size_t threads) {
    return static_cast<std::size_t>(
        block_sum(x.size(), threads, [&](std::size_t i) { return std::isfinite(x[i]) ? 0.0 : 1.0; }));
}

double variance(std::span<const double> x, std::size_t threads) {
    const std::size_t n = x.size();
    if (n == 0) return 0.0;
    const double m = block_mean(x.data(), n, threads);
    return block_sum(n, threads, [&](std::size_t i) {
        const double d = x[i] - m;
        return d * d;
    }) / static_cast<double>(n);
}

}  // namespace

BsdeSolution solve_bsde(const RegressionDesign& design, const DriverSpec& driver, std::span<const double> terminal,
                        const BsdeOptions& options) {
    const PathEnsemble& e = design.paths();
    const std::size_t N = e.grid.n_steps;
    const std::size_t M = e.n_paths;
    const std::size_t T = options.threads;
    const double dt = e.grid.dt();
    if (terminal.size() != M) throw std::invalid_argument("solve_bsde: terminal size does not match the ensemble");
    if (!driver.f) throw std::invalid_argument("solve_bsde: driver has no function");
    if (count_nonfinite(terminal, T) > 0) throw NumericalError("terminal condition has non-finite values");

    BsdeSolution sol;
    sol.n_steps = N;
    sol.n_paths = M;
    sol.degree = design.basis().degree;
    sol.terminal_z = options.terminal_z;
    sol.y.resize((N + 1) * M);
    sol.z1.resize(N * M);
    sol.z2.resize(N * M);
    sol.standardization.resize(N);
    sol.coeff_y.resize(N);
    sol.coeff_z1.resize(N);
    sol.coeff_z2.resize(N);
    sol.target_variance.assign(N, 0.0);
    std::copy(terminal.begin(), terminal.end(), sol.y.begin() + static_cast<std::ptrdiff_t>(N * M));

    const bool capped = driver.quadratic && driver.z_cap > 0.0;
    std::vector<double> target(M);
    std::vector<double> clamp_partial(block_count(M), 0.0);
    std::size_t clamped = 0;

    for (std::size_t kk = N; kk-- > 0;) {
        const CrossSection& cs = design.step(kk);
        sol.standardization[kk] = cs.standardization();
        auto s = e.s_row(kk);
        auto r = e.r_row(kk);
        auto dws = e.dws_row(kk);
        auto dwr = e.dwr_row(kk);
        const double* ynext = sol.y.data() + (kk + 1) * M;
        double* z1 = sol.z1.data() + kk * M;
        double* z2 = sol.z2.data() + kk * M;

        if (options.terminal_z && kk == N - 1) {
            for_blocks(M, T, [&](std::size_t, std::size_t begin, std::size_t end) {
                for (std::size_t i = begin; i < end; ++i) {
                    const auto z = options.terminal_z(s[i], r[i]);
                    z1[i] = z[0];
                    z2[i] = z[1];
                }
            });
        } else {
            // Centre Y_{t+1} on its fitted conditional mean before multiplying by the
            // increment; the mean part has zero conditional correlation with dW.
            const Eigen::VectorXd c = cs.fit(1, [&](std::size_t i, double* out) { out[0] = ynext[i]; }).col(0);
            const Eigen::MatrixXd cz = cs.fit(2, [&](std::size_t i, double* out) {
                const double dev = ynext[i] - cs.predict(c, i);
                out[0] = dev * dws[i] / dt;
                out[1] = dev * dwr[i] / dt;
            });
            sol.coeff_z1[kk] = cz.col(0);
            sol.coeff_z2[kk] = cz.col(1);
            for_blocks(M, T, [&](std::size_t, std::size_t begin, std::size_t end) {
                for (std::size_t i = begin; i < end; ++i) {
                    z1[i] = cs.predict(sol.coeff_z1[kk], i);
                    z2[i] = cs.predict(sol.coeff_z2[kk], i);
                }
            });
        }

        for_blocks(M, T, [&](std::size_t b, std::size_t begin, std::size_t end) {
            double nclamp = 0.0;
            for (std::size_t i = begin; i < end; ++i) {
                double zf = z2[i];
                if (capped && std::abs(zf) > driver.z_cap) {
                    zf = std::clamp(zf, -driver.z_cap, driver.z_cap);
                    nclamp += 1.0;
                }
                double v = ynext[i] + driver.f(kk, s[i], r[i], z1[i], zf) * dt;
                if (options.control_variate) v -= z1[i] * dws[i] + z2[i] * dwr[i];
                target[i] = v;
            }
            clamp_partial[b] = nclamp;
        });
        for (double c : clamp_partial) clamped += static_cast<std::size_t>(c);
        if (count_nonfinite(target, T) > 0)
            throw NumericalError("BSDE diverged at step " + std::to_string(kk) + " (non-finite target)");
        sol.target_variance[kk] = variance(target, T);

        sol.coeff_y[kk] = cs.fit(1, [&](std::size_t i, double* out) { out[0] = target[i]; }).col(0);
        double* y = sol.y.data() + kk * M;
        for_blocks(M, T, [&](std::size_t, std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) y[i] = cs.predict(sol.coeff_y[kk], i);
        });
        if (count_nonfinite({y, M}, T) > 0)
            throw NumericalError("BSDE diverged at step " + std::to_string(kk) + " (non-finite Y)");
    }

    sol.clamped = clamped;
    if (capped && static_cast<double>(clamped) > 1e-3 * static_cast<double>(N * M))
        sol.warnings.push_back("z_cap active on " + std::to_string(clamped) + " of " + std::to_string(N * M) +
                               " samples");
    sol.y0 = block_mean(sol.y.data(), M, T);
    return sol;
}

BsdeSolution solve_bsde(const PathEnsemble& paths, const DriverSpec& driver, std::span<const double> terminal,
                        const RegressionBasis& basis, const BsdeOptions& options) {
    RegressionDesign design(paths, basis, options.threads);
    return solve_bsde(design, driver, terminal, options);
}

double entropic_risk_mc(std::span<const double> xi, double gamma) {
    if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
    if (xi.empty()) throw std::invalid_argument("entropic_risk_mc: no samples");
    double shift = -std::numeric_limits<double>::infinity();
    for (double x : xi) shift = std::max(shift, -x / gamma);
    double acc = 0.0;
    for (double x : xi) acc += std::exp(-x / gamma - shift);
    return gamma * (std::log(acc / static_cast<double>(xi.size())) + shift);
}

std::array<double, 2> eval_z_field(const BsdeSolution& sol, std::size_t step, double s, double r) {
    if (step >= sol.n_steps) throw std::out_of_range("eval_z_field: step out of range");
    const Eigen::VectorXd& c1 = sol.coeff_z1[step];
    const Eigen::VectorXd& c2 = sol.coeff_z2[step];
    if (c1.size() == 0) {
        if (!sol.terminal_z) throw std::logic_error("eval_z_field: no Z representation for step");
        return sol.terminal_z(s, r);
    }
    std::array<double, (kMaxBasisDegree + 1) * (kMaxBasisDegree + 2) / 2> phi{};
    const std::size_t n = eval_basis(sol.degree, sol.standardization[step], s, r, phi.data());
    double v1 = 0.0, v2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        v1 += c1[static_cast<Eigen::Index>(j)] * phi[j];
        v2 += c2[static_cast<Eigen::Index>(j)] * phi[j];
    }
    return {v1, v2};
}

void write_bsde_csv(std::ostream& out, const BsdeSolution& sol, const TimeGrid& grid, std::size_t threads) {
    CsvWriter w(out);
    w.header({"step", "t", "mean_y", "mean_z1", "mean_z2"});
    const std::size_t M = sol.n_paths;
    for (std::size_t k = 0; k < sol.n_steps; ++k) {
        w.field(k).field(grid.time(k));
        w.field(block_mean(sol.y.data() + k * M, M, threads));
        w.field(block_mean(sol.z1.data() + k * M, M, threads));
        w.field(block_mean(sol.z2.data() + k * M, M, threads));
        w.end_row();
    }
}

}  // namespace rpeq
