#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "rpeq/equilibrium.hpp"
#include "rpeq/sweep.hpp"

namespace rpeq {

struct Config {
    EquilibriumConfig equilibrium;
    std::optional<SweepSpec> sweep;

    bool operator==(const Config&) const = default;
};

// Sectioned key = value text. Sections: [market], [grid], [numerics],
// [derivative], [agent.<name>] (one per agent, file order), [sweep].
// Omitted market, grid, numerics and derivative keys take the built-in defaults.
// Throws ConfigError: syntax errors carry the line number, semantic errors the key path.
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);

// Every field is written, doubles with 17 significant digits, so
// parse_config(emit_config(c)) == c.
std::string emit_config(const Config& config);

}  // namespace rpeq
