#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "rpeq/equilibrium.hpp"

namespace rpeq {

struct ValidationOptions {
    std::size_t threads = 1;
    std::size_t oracle_paths = 200000;  // entropic closed-form check
    std::size_t sweep_paths = 50000;
    std::size_t grid_steps = 8;         // per concern-rate axis
    double grid_max = 0.9;
    std::size_t random_instances = 1000;
};

struct ValidationRow {
    std::string check;
    double expected = 0.0;
    double observed = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct ValidationReport {
    std::vector<ValidationRow> rows;
    bool all_pass() const;
};

// Each check takes the base configuration where it needs a market; the
// equilibrium checks run on base.numerics.n_paths paths.
std::vector<ValidationRow> check_entropic_oracle(const EquilibriumConfig& base, const ValidationOptions& opt);
std::vector<ValidationRow> check_constant_world(const EquilibriumConfig& base, const ValidationOptions& opt);
std::vector<ValidationRow> check_baseline_equilibrium(const EquilibriumConfig& base, const ValidationOptions& opt);
std::vector<ValidationRow> check_determinant(const EquilibriumConfig& base, const ValidationOptions& opt);
// Sign battery and the no-derivative comparison share one concern-rate grid.
std::vector<ValidationRow> check_sweeps(const EquilibriumConfig& base, const ValidationOptions& opt);
std::vector<ValidationRow> check_infconvolution(const EquilibriumConfig& base, const ValidationOptions& opt);
std::vector<ValidationRow> check_determinism(const EquilibriumConfig& base, const ValidationOptions& opt);

ValidationReport run_validation(const EquilibriumConfig& base, const ValidationOptions& opt);

void write_validation_report(std::ostream& out, const ValidationReport& report);

}  // namespace rpeq
