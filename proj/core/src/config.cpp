#include "rpeq/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "rpeq/csv.hpp"
#include "rpeq/errors.hpp"

namespace rpeq {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(x))
        throw ConfigError(key + ": expected a finite number, got '" + v + "'");
    return x;
}

template <class Int>
Int to_integer(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    Int x{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return x;
}

bool to_bool(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

// Applies each key of a section through a handler table; unknown keys are errors.
class Section {
public:
    using Handler = std::function<void(const std::string& key, const std::string& value)>;

    explicit Section(std::string name) : name_(std::move(name)) {}
    Section& on(const std::string& key, Handler h) {
        handlers_[key] = std::move(h);
        return *this;
    }
    Section& number(const std::string& key, double& target) {
        return on(key, [&target](const std::string& k, const std::string& v) { target = to_double(k, v); });
    }
    void apply(const pt::ptree& tree) const {
        for (const auto& [key, child] : tree) {
            const std::string path = name_ + "." + key;
            if (!child.empty()) throw ConfigError(path + ": nested keys are not supported");
            const auto it = handlers_.find(key);
            if (it == handlers_.end()) throw ConfigError(path + ": unknown key");
            it->second(path, child.data());
        }
    }

private:
    std::string name_;
    std::map<std::string, Handler> handlers_;
};

void payoff_keys(Section& s, PayoffSpec& p) {
    s.number("c0", p.c0)
        .number("amp_r", p.amp_r)
        .number("alpha_r", p.alpha_r)
        .number("k_r", p.k_r)
        .number("sign_r", p.sign_r)
        .number("amp_s", p.amp_s)
        .number("k_s", p.k_s);
}

AxisSpec parse_axis_range(const std::string& key, const std::string& raw) {
    std::vector<std::string> parts;
    std::stringstream ss(raw);
    for (std::string item; std::getline(ss, item, ',');) parts.push_back(trim(item));
    if (parts.size() != 3) throw ConfigError(key + ": expected 'min, max, steps'");
    AxisSpec a;
    a.min = to_double(key, parts[0]);
    a.max = to_double(key, parts[1]);
    a.steps = to_integer<std::size_t>(key, parts[2]);
    return a;
}

SweepSpec parse_sweep(const pt::ptree& tree) {
    SweepSpec spec;
    std::vector<std::string> names;
    std::map<std::string, AxisSpec> ranges;
    for (const auto& [key, child] : tree) {
        const std::string path = "sweep." + key;
        if (!child.empty()) throw ConfigError(path + ": nested keys are not supported");
        if (key == "n_paths") {
            spec.n_paths = to_integer<std::size_t>(path, child.data());
        } else if (key == "axes") {
            std::stringstream ss(child.data());
            for (std::string item; std::getline(ss, item, ',');) {
                const std::string n = trim(item);
                if (n.empty()) throw ConfigError(path + ": empty axis name");
                names.push_back(n);
            }
        } else {
            AxisSpec a = parse_axis_range(path, child.data());
            a.name = key;
            ranges[key] = a;
        }
    }
    for (const auto& n : names) {
        const auto it = ranges.find(n);
        if (it == ranges.end()) throw ConfigError("sweep." + n + ": axis listed in sweep.axes has no range");
        spec.axes.push_back(it->second);
        ranges.erase(it);
    }
    if (!ranges.empty()) throw ConfigError("sweep." + ranges.begin()->first + ": range given for an axis not in sweep.axes");
    return spec;
}

}  // namespace

Config parse_config(std::string_view text) {
    pt::ptree tree;
    std::istringstream in{std::string(text)};
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
    }

    // read_ini drops sections without keys, but an empty [agent.x] is a valid
    // all-defaults agent, so sections are taken from the headers in file order.
    for (const auto& [name, node] : tree)
        if (node.empty() && !node.data().empty()) throw ConfigError(name + ": key outside of a section");
    std::vector<std::string> headers;
    {
        std::istringstream lines{std::string(text)};
        std::string line;
        while (std::getline(lines, line)) {
            const std::string t = trim(line);
            if (t.size() >= 2 && t.front() == '[' && t.back() == ']') headers.push_back(trim(t.substr(1, t.size() - 2)));
        }
    }

    Config cfg;
    EquilibriumConfig& eq = cfg.equilibrium;
    eq.derivative = default_derivative();
    const pt::ptree empty;
    for (const std::string& name : headers) {
        const auto found = tree.find(name);
        const pt::ptree& section = found == tree.not_found() ? empty : found->second;
        if (name == "market") {
            Section s("market");
            s.number("s0", eq.market.s0)
                .number("mu_s", eq.market.mu_s)
                .number("sigma_s", eq.market.sigma_s)
                .number("r0", eq.market.r0)
                .number("mu_r", eq.market.mu_r)
                .number("b", eq.market.b);
            s.apply(section);
        } else if (name == "grid") {
            Section s("grid");
            s.number("horizon", eq.grid.horizon).on("n_steps", [&](const std::string& k, const std::string& v) {
                eq.grid.n_steps = to_integer<std::size_t>(k, v);
            });
            s.apply(section);
        } else if (name == "numerics") {
            Numerics& n = eq.numerics;
            Section s("numerics");
            s.on("n_paths", [&](const std::string& k, const std::string& v) { n.n_paths = to_integer<std::size_t>(k, v); })
                .on("seed", [&](const std::string& k, const std::string& v) { n.seed = to_integer<std::uint64_t>(k, v); })
                .on("basis_degree", [&](const std::string& k, const std::string& v) { n.basis_degree = to_integer<int>(k, v); })
                .number("ridge", n.ridge)
                .number("z_cap", n.z_cap)
                .number("kappa_floor", n.kappa_floor)
                .on("sample_paths",
                    [&](const std::string& k, const std::string& v) { n.sample_paths = to_integer<std::size_t>(k, v); })
                .on("terminal_gradient",
                    [&](const std::string& k, const std::string& v) { n.terminal_gradient = to_bool(k, v); });
            s.apply(section);
        } else if (name == "derivative") {
            Section s("derivative");
            payoff_keys(s, eq.derivative);
            s.number("supply", eq.n_supply);
            s.apply(section);
        } else if (name.rfind("agent.", 0) == 0) {
            AgentSpec a;
            a.name = name.substr(6);
            a.lambda = 0.25;
            Section s(name);
            s.number("gamma", a.gamma).number("lambda", a.lambda);
            payoff_keys(s, a.endowment);
            s.apply(section);
            eq.agents.push_back(a);
        } else if (name == "sweep") {
            cfg.sweep = parse_sweep(section);
        } else {
            throw ConfigError(name + ": unknown section");
        }
    }
    if (eq.agents.empty()) throw ConfigError("agent: at least one [agent.<name>] section is required");
    eq.validate();
    if (cfg.sweep) cfg.sweep->validate(eq);
    return cfg;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

namespace {

void emit_payoff(std::ostream& os, const PayoffSpec& p) {
    os << "c0 = " << format_double(p.c0) << "\n";
    os << "amp_r = " << format_double(p.amp_r) << "\n";
    os << "alpha_r = " << format_double(p.alpha_r) << "\n";
    os << "k_r = " << format_double(p.k_r) << "\n";
    os << "sign_r = " << format_double(p.sign_r) << "\n";
    os << "amp_s = " << format_double(p.amp_s) << "\n";
    os << "k_s = " << format_double(p.k_s) << "\n";
}

}  // namespace

std::string emit_config(const Config& config) {
    const EquilibriumConfig& eq = config.equilibrium;
    std::ostringstream os;
    os << "[market]\n";
    os << "s0 = " << format_double(eq.market.s0) << "\n";
    os << "mu_s = " << format_double(eq.market.mu_s) << "\n";
    os << "sigma_s = " << format_double(eq.market.sigma_s) << "\n";
    os << "r0 = " << format_double(eq.market.r0) << "\n";
    os << "mu_r = " << format_double(eq.market.mu_r) << "\n";
    os << "b = " << format_double(eq.market.b) << "\n\n";

    os << "[grid]\n";
    os << "horizon = " << format_double(eq.grid.horizon) << "\n";
    os << "n_steps = " << eq.grid.n_steps << "\n\n";

    const Numerics& n = eq.numerics;
    os << "[numerics]\n";
    os << "n_paths = " << n.n_paths << "\n";
    os << "seed = " << n.seed << "\n";
    os << "basis_degree = " << n.basis_degree << "\n";
    os << "ridge = " << format_double(n.ridge) << "\n";
    os << "z_cap = " << format_double(n.z_cap) << "\n";
    os << "kappa_floor = " << format_double(n.kappa_floor) << "\n";
    os << "sample_paths = " << n.sample_paths << "\n";
    os << "terminal_gradient = " << (n.terminal_gradient ? "true" : "false") << "\n\n";

    os << "[derivative]\n";
    emit_payoff(os, eq.derivative);
    os << "supply = " << format_double(eq.n_supply) << "\n";

    for (const auto& a : eq.agents) {
        os << "\n[agent." << a.name << "]\n";
        os << "gamma = " << format_double(a.gamma) << "\n";
        os << "lambda = " << format_double(a.lambda) << "\n";
        emit_payoff(os, a.endowment);
    }

    if (config.sweep) {
        os << "\n[sweep]\n";
        os << "n_paths = " << config.sweep->n_paths << "\n";
        os << "axes = ";
        for (std::size_t i = 0; i < config.sweep->axes.size(); ++i) os << (i ? ", " : "") << config.sweep->axes[i].name;
        os << "\n";
        for (const auto& ax : config.sweep->axes)
            os << ax.name << " = " << format_double(ax.min) << ", " << format_double(ax.max) << ", " << ax.steps << "\n";
    }
    return os.str();
}

}  // namespace rpeq
