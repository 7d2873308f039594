#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

namespace rpeq {

struct MarketParams {
    double s0 = 50.0;
    double mu_s = -0.2;
    double sigma_s = 0.25;
    double r0 = 18.0;
    double mu_r = 2.0;
    double b = 4.0;

    double theta_s() const { return mu_s / sigma_s; }
    void validate() const;
    bool operator==(const MarketParams&) const = default;
};

struct TimeGrid {
    double horizon = 1.0;
    std::size_t n_steps = 20;

    double dt() const { return horizon / static_cast<double>(n_steps); }
    double time(std::size_t step) const { return horizon * static_cast<double>(step) / static_cast<double>(n_steps); }
    void validate() const;
    bool operator==(const TimeGrid&) const = default;
};

// Time-major storage: s and r hold (n_steps + 1) rows of n_paths values,
// dws and dwr hold n_steps rows (row k advances step k to k + 1).
struct PathEnsemble {
    MarketParams params;
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    std::vector<double> s, r, dws, dwr;

    std::span<const double> s_row(std::size_t step) const { return {s.data() + step * n_paths, n_paths}; }
    std::span<const double> r_row(std::size_t step) const { return {r.data() + step * n_paths, n_paths}; }
    std::span<const double> dws_row(std::size_t step) const { return {dws.data() + step * n_paths, n_paths}; }
    std::span<const double> dwr_row(std::size_t step) const { return {dwr.data() + step * n_paths, n_paths}; }
    std::span<const double> s_terminal() const { return s_row(grid.n_steps); }
    std::span<const double> r_terminal() const { return r_row(grid.n_steps); }
};

// Exact one-step transitions: log-normal for S, Gaussian for R.
inline double step_s(const MarketParams& p, double s, double dt, double dw) {
    return s * std::exp((p.mu_s - 0.5 * p.sigma_s * p.sigma_s) * dt + p.sigma_s * dw);
}
inline double step_r(const MarketParams& p, double r, double dt, double dw) { return r + p.mu_r * dt + p.b * dw; }

// Independent generator for one path, keyed only by (seed, path).
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t path);

PathEnsemble simulate_paths(const MarketParams& params, const TimeGrid& grid, std::size_t n_paths,
                            std::uint64_t seed, std::size_t threads = 1);

// Writes `path,step,t,s,r,dws,dwr` for the first max_paths paths. The increment
// columns on a row are the ones that advance that step; the last step has none
// and repeats 0.
void write_paths_csv(std::ostream& out, const PathEnsemble& paths, std::size_t max_paths);

}  // namespace rpeq
