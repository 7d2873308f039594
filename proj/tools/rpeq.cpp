#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "rpeq/config.hpp"
#include "rpeq/csv.hpp"
#include "rpeq/errors.hpp"
#include "rpeq/validation.hpp"

namespace fs = std::filesystem;
using namespace rpeq;

namespace {

enum Exit { kOk = 0, kConfig = 2, kPipeline = 3, kValidation = 4 };

struct Options {
    std::string config;
    std::string out_dir = ".";
    std::size_t threads = 0;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    bool dump_bsde = false;
};

Config load(const Options& o) {
    Config c = load_config(o.config);
    if (o.seed) c.equilibrium.numerics.seed = *o.seed;
    if (o.paths) {
        c.equilibrium.numerics.n_paths = *o.paths;
        if (c.sweep) c.sweep->n_paths = *o.paths;
    }
    c.equilibrium.validate();
    if (c.sweep) c.sweep->validate(c.equilibrium);
    return c;
}

std::ofstream open_out(const Options& o, const std::string& name) {
    fs::create_directories(o.out_dir);
    const fs::path p = fs::path(o.out_dir) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

void report(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "rpeq: warning: " << w << "\n";
}

int cmd_paths(const Options& o) {
    const Config c = load(o);
    const auto& e = c.equilibrium;
    const PathEnsemble paths = simulate_paths(e.market, e.grid, e.numerics.n_paths, e.numerics.seed, o.threads);
    auto out = open_out(o, "paths.csv");
    write_paths_csv(out, paths, e.numerics.sample_paths);
    return kOk;
}

int cmd_equilibrium(const Options& o) {
    const Config c = load(o);
    const auto& e = c.equilibrium;
    const PathEnsemble paths = simulate_paths(e.market, e.grid, e.numerics.n_paths, e.numerics.seed, o.threads);
    const RegressionDesign design(paths, e.numerics.basis(), o.threads);
    const EquilibriumOutput eq = run_equilibrium(e, design, o.threads);
    report(eq.diagnostics.warnings);
    {
        auto out = open_out(o, "equilibrium_summary.csv");
        write_summary_csv(out, e, eq);
    }
    {
        auto out = open_out(o, "equilibrium_paths.csv");
        write_equilibrium_paths_csv(out, e, paths, eq, e.numerics.sample_paths);
    }
    if (o.dump_bsde) {
        auto dump = [&](const std::string& name, const BsdeSolution& s) {
            auto out = open_out(o, "bsde_" + name + ".csv");
            write_bsde_csv(out, s, e.grid, o.threads);
        };
        dump("representative", eq.rep.solution);
        dump("price", eq.price);
        for (std::size_t a = 0; a < e.agents.size(); ++a) dump("agent_" + e.agents[a].name, eq.agent_risks[a]);
    }
    std::cout << "Yw0 = " << format_double(eq.Yw0()) << ", B0 = " << format_double(eq.B0()) << "\n";
    return kOk;
}

int cmd_sweep(const Options& o) {
    const Config c = load(o);
    if (!c.sweep) throw ConfigError("sweep: the config has no [sweep] section");
    const SweepTable t = run_sweep(c.equilibrium, *c.sweep, o.threads);
    {
        auto out = open_out(o, c.sweep->file_stem() + ".csv");
        write_sweep_csv(out, t);
    }
    const auto signs = finite_diff_signs(t, c.equilibrium);
    if (!signs.empty()) {
        auto out = open_out(o, c.sweep->file_stem() + "_signs.csv");
        write_sign_report_csv(out, signs);
    }
    std::size_t failed = 0;
    for (const auto& r : t.rows) failed += r.ok() ? 0 : 1;
    if (failed) std::cerr << "rpeq: warning: " << failed << " of " << t.rows.size() << " sweep points failed\n";
    return kOk;
}

int cmd_baseline(const Options& o) {
    const Config c = load(o);
    const SweepSpec spec = c.sweep ? *c.sweep : SweepSpec{{}, c.equilibrium.numerics.n_paths};
    spec.validate(c.equilibrium);
    const auto& e = c.equilibrium;
    const PathEnsemble paths = simulate_paths(e.market, e.grid, spec.n_paths, e.numerics.seed, o.threads);
    const RegressionDesign design(paths, e.numerics.basis(), o.threads);
    const BaselineTable t = run_baseline(e, spec, design, o.threads);
    auto out = open_out(o, "baseline.csv");
    write_baseline_csv(out, t);
    return kOk;
}

int cmd_validate(const Options& o) {
    const Config c = load(o);
    ValidationOptions vo;
    vo.threads = o.threads;
    if (c.sweep) vo.sweep_paths = c.sweep->n_paths;
    const ValidationReport rep = run_validation(c.equilibrium, vo);
    {
        auto out = open_out(o, "validation_report.csv");
        write_validation_report(out, rep);
    }
    for (const auto& r : rep.rows)
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.check << "  observed " << format_double(r.observed)
                  << "  expected " << format_double(r.expected) << "  tolerance " << format_double(r.tolerance) << "\n";
    return rep.all_pass() ? kOk : kValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Equilibrium pricing of a market-completing derivative with relative performance concerns"};
    app.require_subcommand(1);
    Options o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Config file")->required();
        sub->add_option("--out-dir", o.out_dir, "Directory for CSV output");
        sub->add_option("--threads", o.threads, "Worker threads (0 = hardware concurrency)");
        sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { o.seed = s; }, "Override numerics.seed");
        sub->add_option_function<std::size_t>("--paths", [&](const std::size_t& n) { o.paths = n; }, "Override the path count");
    };
    auto* paths = app.add_subcommand("paths", "Simulate the ensemble and write paths.csv");
    auto* eq = app.add_subcommand("equilibrium", "Solve the equilibrium and write the summary and path CSVs");
    auto* sweep = app.add_subcommand("sweep", "Run the [sweep] grid on common random numbers");
    auto* base = app.add_subcommand("baseline", "Compare against the market without the derivative");
    auto* val = app.add_subcommand("validate", "Run the acceptance battery and write validation_report.csv");
    for (auto* s : {paths, eq, sweep, base, val}) add_common(s);
    eq->add_flag("--dump-bsde", o.dump_bsde, "Also write per-step BSDE means");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*paths) return cmd_paths(o);
        if (*eq) return cmd_equilibrium(o);
        if (*sweep) return cmd_sweep(o);
        if (*base) return cmd_baseline(o);
        if (*val) return cmd_validate(o);
    } catch (const ConfigError& e) {
        std::cerr << "rpeq: config error: " << e.what() << "\n";
        return kConfig;
    } catch (const PipelineError& e) {
        std::cerr << "rpeq: pipeline error in stage " << e.what() << "\n";
        return kPipeline;
    } catch (const NumericalError& e) {
        std::cerr << "rpeq: pipeline error: " << e.what() << "\n";
        return kPipeline;
    } catch (const std::exception& e) {
        std::cerr << "rpeq: error: " << e.what() << "\n";
        return kPipeline;
    }
    return kOk;
}
