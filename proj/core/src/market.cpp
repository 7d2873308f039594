#include "rpeq/market.hpp"

#include <cmath>
#include <ostream>

#include "rpeq/csv.hpp"
#include "rpeq/errors.hpp"
#include "rpeq/parallel.hpp"

namespace rpeq {

void MarketParams::validate() const {
    if (!(sigma_s > 0.0)) throw ConfigError("market.sigma_s must be > 0");
    if (!(b > 0.0)) throw ConfigError("market.b must be > 0");
    if (!(s0 > 0.0)) throw ConfigError("market.s0 must be > 0");
    for (double v : {mu_s, r0, mu_r})
        if (!std::isfinite(v)) throw ConfigError("market parameters must be finite");
}

void TimeGrid::validate() const {
    if (n_steps < 2) throw ConfigError("grid.n_steps must be >= 2");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("grid.horizon must be > 0");
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t path) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
    return std::mt19937_64(seq);
}

PathEnsemble simulate_paths(const MarketParams& params, const TimeGrid& grid, std::size_t n_paths,
                            std::uint64_t seed, std::size_t threads) {
    params.validate();
    grid.validate();
    if (n_paths < 1) throw ConfigError("numerics.n_paths must be >= 1");

    PathEnsemble e;
    e.params = params;
    e.grid = grid;
    e.n_paths = n_paths;
    e.seed = seed;
    const std::size_t N = grid.n_steps;
    const std::size_t M = n_paths;
    e.s.resize((N + 1) * M);
    e.r.resize((N + 1) * M);
    e.dws.resize(N * M);
    e.dwr.resize(N * M);

    const double dt = grid.dt();
    const double sq = std::sqrt(dt);

    for_blocks(M, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            auto gen = substream(seed, p);
            std::normal_distribution<double> normal(0.0, 1.0);
            double s = params.s0;
            double r = params.r0;
            e.s[p] = s;
            e.r[p] = r;
            for (std::size_t k = 0; k < N; ++k) {
                const double dws = sq * normal(gen);
                const double dwr = sq * normal(gen);
                s = step_s(params, s, dt, dws);
                r = step_r(params, r, dt, dwr);
                e.dws[k * M + p] = dws;
                e.dwr[k * M + p] = dwr;
                e.s[(k + 1) * M + p] = s;
                e.r[(k + 1) * M + p] = r;
            }
        }
    });
    return e;
}

void write_paths_csv(std::ostream& out, const PathEnsemble& paths, std::size_t max_paths) {
    CsvWriter w(out);
    w.header({"path", "step", "t", "s", "r", "dws", "dwr"});
    const std::size_t M = paths.n_paths;
    const std::size_t N = paths.grid.n_steps;
    const std::size_t np = std::min(max_paths, M);
    for (std::size_t p = 0; p < np; ++p) {
        for (std::size_t k = 0; k <= N; ++k) {
            const double dws = k < N ? paths.dws[k * M + p] : 0.0;
            const double dwr = k < N ? paths.dwr[k * M + p] : 0.0;
            w.field(p).field(k).field(paths.grid.time(k)).field(paths.s[k * M + p]).field(paths.r[k * M + p]);
            w.field(dws).field(dwr);
            w.end_row();
        }
    }
}

}  // namespace rpeq
