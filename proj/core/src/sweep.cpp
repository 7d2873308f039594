#include "rpeq/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <set>

#include "rpeq/csv.hpp"
#include "rpeq/errors.hpp"

namespace rpeq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class AxisKind { lambda, gamma, supply };

struct ParsedAxis {
    AxisKind kind;
    std::size_t agent = 0;
};

std::size_t find_agent(const EquilibriumConfig& cfg, const std::string& name, const std::string& axis) {
    for (std::size_t a = 0; a < cfg.agents.size(); ++a)
        if (cfg.agents[a].name == name) return a;
    throw ConfigError("sweep." + axis + ": no agent named '" + name + "'");
}

ParsedAxis parse_axis(const EquilibriumConfig& cfg, const std::string& name) {
    if (name == "n") return {AxisKind::supply, 0};
    if (name.rfind("lambda_", 0) == 0) return {AxisKind::lambda, find_agent(cfg, name.substr(7), name)};
    if (name.rfind("gamma_", 0) == 0) return {AxisKind::gamma, find_agent(cfg, name.substr(6), name)};
    throw ConfigError("sweep.axes: unknown axis '" + name + "' (expected lambda_<agent>, gamma_<agent> or n)");
}

int sign_of(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_double(v[i]);
    return s;
}

}  // namespace

std::vector<double> AxisSpec::values() const {
    if (steps <= 1) return {min};
    std::vector<double> v(steps);
    for (std::size_t i = 0; i < steps; ++i)
        v[i] = min + (max - min) * static_cast<double>(i) / static_cast<double>(steps - 1);
    v.back() = max;
    return v;
}

void SweepSpec::validate(const EquilibriumConfig& base) const {
    if (n_paths < 1) throw ConfigError("sweep.n_paths: must be >= 1");
    if (axes.size() > 2) throw ConfigError("sweep.axes: at most two axes are supported");
    std::set<std::string> seen;
    for (const auto& ax : axes) {
        const std::string key = "sweep." + ax.name;
        if (!seen.insert(ax.name).second) throw ConfigError("sweep.axes: duplicate axis '" + ax.name + "'");
        const ParsedAxis p = parse_axis(base, ax.name);
        if (ax.steps < 1) throw ConfigError(key + ": steps must be >= 1");
        if (!std::isfinite(ax.min) || !std::isfinite(ax.max) || ax.min > ax.max)
            throw ConfigError(key + ": need finite min <= max");
        if (p.kind == AxisKind::lambda && !(ax.min >= 0.0 && ax.max <= 1.0))
            throw ConfigError(key + ": lambda must lie in [0,1]");
        if (p.kind == AxisKind::gamma && !(ax.min > 0.0)) throw ConfigError(key + ": gamma must be > 0");
    }
    for (const auto& pt : points()) {
        const EquilibriumConfig c = apply_axes(base, axes, pt);
        double prod = 1.0;
        for (const auto& a : c.agents) prod *= a.lambda;
        if (prod >= 1.0 - kSweepCornerMargin)
            throw ConfigError("sweep.axes: grid point (" + join(pt) +
                              ") is too close to the singular corner: product of concern rates must be < 1 - 1e-6");
    }
}

std::vector<std::vector<double>> SweepSpec::points() const {
    std::vector<std::vector<double>> out{{}};
    for (const auto& ax : axes) {
        std::vector<std::vector<double>> next;
        for (const auto& prefix : out) {
            for (double v : ax.values()) {
                auto p = prefix;
                p.push_back(v);
                next.push_back(std::move(p));
            }
        }
        out = std::move(next);
    }
    return out;
}

std::string SweepSpec::file_stem() const {
    std::string s = "sweep";
    for (const auto& ax : axes) s += "_" + ax.name;
    return s;
}

EquilibriumConfig apply_axes(const EquilibriumConfig& base, const std::vector<AxisSpec>& axes,
                             const std::vector<double>& values) {
    if (axes.size() != values.size()) throw std::invalid_argument("apply_axes: size mismatch");
    EquilibriumConfig c = base;
    for (std::size_t i = 0; i < axes.size(); ++i) {
        const ParsedAxis p = parse_axis(base, axes[i].name);
        switch (p.kind) {
            case AxisKind::lambda: c.agents[p.agent].lambda = values[i]; break;
            case AxisKind::gamma: c.agents[p.agent].gamma = values[i]; break;
            case AxisKind::supply: c.n_supply = values[i]; break;
        }
    }
    return c;
}

SweepRow summarize(const std::vector<double>& axis_values, const EquilibriumOutput& eq) {
    SweepRow row;
    row.axis_values = axis_values;
    row.Yw0 = eq.Yw0();
    row.B0 = eq.B0();
    row.thetaR0 = eq.thetaR0();
    for (std::size_t a = 0; a < eq.agent_risks.size(); ++a) {
        row.Ya0.push_back(eq.agent_risks[a].y0);
        row.pi1_0.push_back(eq.pi1_0(a));
        row.pi2_0.push_back(eq.pi2_0(a));
    }
    row.clearing_residual = eq.diagnostics.clearing_residual;
    return row;
}

SweepTable run_sweep(const EquilibriumConfig& base, const SweepSpec& spec, std::size_t threads) {
    base.validate();
    spec.validate(base);
    const PathEnsemble paths = simulate_paths(base.market, base.grid, spec.n_paths, base.numerics.seed, threads);
    const RegressionDesign design(paths, base.numerics.basis(), threads);
    return run_sweep(base, spec, design, threads);
}

SweepTable run_sweep(const EquilibriumConfig& base, const SweepSpec& spec, const RegressionDesign& design,
                     std::size_t threads) {
    spec.validate(base);
    SweepTable t;
    for (const auto& ax : spec.axes) {
        t.axis_names.push_back(ax.name);
        t.shape.push_back(std::max<std::size_t>(ax.steps, 1));
    }
    for (const auto& a : base.agents) t.agent_names.push_back(a.name);
    const std::size_t na = base.agents.size();
    for (const auto& pt : spec.points()) {
        const EquilibriumConfig c = apply_axes(base, spec.axes, pt);
        auto failed = [&](const std::string& status) {
            SweepRow row;
            row.axis_values = pt;
            row.Yw0 = row.B0 = row.thetaR0 = row.clearing_residual = kNaN;
            row.Ya0.assign(na, kNaN);
            row.pi1_0.assign(na, kNaN);
            row.pi2_0.assign(na, kNaN);
            row.status = status;
            return row;
        };
        try {
            t.rows.push_back(summarize(pt, run_equilibrium(c, design, threads)));
        } catch (const PipelineError& e) {
            t.rows.push_back(failed("failed:" + e.stage()));
        } catch (const ConfigError&) {
            t.rows.push_back(failed("failed:config"));
        }
    }
    return t;
}

namespace {

struct Quantity {
    std::string name;
    std::function<double(const SweepRow&)> get;
};

void count_pairs(const SweepTable& t, std::size_t axis, const Quantity& q, SignCheck& chk) {
    const std::size_t nd = t.shape.size();
    std::vector<std::size_t> stride(nd, 1);
    for (std::size_t d = nd; d-- > 1;) stride[d - 1] = stride[d] * t.shape[d];
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::size_t pos = (i / stride[axis]) % t.shape[axis];
        if (pos + 1 >= t.shape[axis]) continue;
        const SweepRow& a = t.rows[i];
        const SweepRow& b = t.rows[i + stride[axis]];
        if (!a.ok() || !b.ok()) continue;
        ++chk.total;
        if (sign_of(q.get(b) - q.get(a)) == chk.expected) ++chk.agree;
    }
}

}  // namespace

std::vector<SignCheck> finite_diff_signs(const SweepTable& t, const EquilibriumConfig& base) {
    std::vector<SignCheck> out;
    if (t.agent_names.empty() || t.rows.empty()) return out;
    const std::string first = t.agent_names[0];
    const Quantity yw{"Yw0", [](const SweepRow& r) { return r.Yw0; }};
    const Quantity b0{"B0", [](const SweepRow& r) { return r.B0; }};
    const Quantity th{"thetaR0", [](const SweepRow& r) { return r.thetaR0; }};
    const Quantity ya{"Ya0_" + first, [](const SweepRow& r) { return r.Ya0[0]; }};
    const Quantity p2{"abs_pi2_0_" + first, [](const SweepRow& r) { return std::abs(r.pi2_0[0]); }};

    // Seller or buyer role at the first successful point decides the price response.
    std::vector<int> role(t.agent_names.size(), 0);
    for (const auto& r : t.rows) {
        if (!r.ok()) continue;
        for (std::size_t a = 0; a < role.size(); ++a) role[a] = sign_of(r.pi2_0[a]);
        break;
    }
    const int bs = sign_of(base.market.b) * r_gradient_sign(base.derivative);

    auto add = [&](const Quantity& q, std::size_t axis, int expected) {
        SignCheck c;
        c.quantity = q.name;
        c.axis = t.axis_names[axis];
        c.expected = expected;
        if (t.shape[axis] < 2) {
            c.skipped = true;
            c.note = "axis has a single point";
        } else {
            count_pairs(t, axis, q, c);
        }
        out.push_back(std::move(c));
    };

    for (std::size_t ax = 0; ax < t.axis_names.size(); ++ax) {
        const ParsedAxis p = parse_axis(base, t.axis_names[ax]);
        switch (p.kind) {
            case AxisKind::supply:
                add(yw, ax, -1);
                add(b0, ax, -1);
                add(th, ax, bs);
                break;
            case AxisKind::gamma:
                add(yw, ax, -1);
                break;
            case AxisKind::lambda:
                if (role[p.agent] != 0) add(b0, ax, -role[p.agent]);
                add(ya, ax, p.agent == 0 ? -1 : 1);
                add(p2, ax, -1);
                break;
        }
    }

    // Mirrored concern-rate check on the diagonal of a two-agent lambda grid.
    if (t.axis_names.size() == 2 && base.agents.size() == 2) {
        const ParsedAxis p0 = parse_axis(base, t.axis_names[0]);
        const ParsedAxis p1 = parse_axis(base, t.axis_names[1]);
        if (p0.kind == AxisKind::lambda && p1.kind == AxisKind::lambda && p0.agent != p1.agent) {
            SignCheck c;
            c.quantity = "Yw0_mirror";
            c.axis = t.axis_names[0] + "|" + t.axis_names[1];
            c.expected = -1;
            const bool same_grid = t.shape[0] == t.shape[1] && t.rows.size() == t.shape[0] * t.shape[1];
            bool symmetric_values = same_grid;
            if (same_grid)
                for (std::size_t i = 0; i < t.shape[0]; ++i)
                    symmetric_values = symmetric_values &&
                                       t.rows[i * t.shape[1] + i].axis_values[0] == t.rows[i * t.shape[1] + i].axis_values[1];
            if (base.agents[0].gamma != base.agents[1].gamma) {
                c.skipped = true;
                c.note = "hypothesis not met: gamma differs between agents";
            } else if (!symmetric_values || t.shape[0] < 2) {
                c.skipped = true;
                c.note = "hypothesis not met: the two lambda axes are not the same grid";
            } else {
                const std::size_t n = t.shape[0];
                for (std::size_t i = 0; i + 1 < n; ++i) {
                    const SweepRow& d = t.rows[i * n + i];
                    const SweepRow& ua = t.rows[(i + 1) * n + i];
                    const SweepRow& ub = t.rows[i * n + i + 1];
                    if (!d.ok() || !ua.ok() || !ub.ok()) continue;
                    ++c.total;
                    const int sa = sign_of(ua.Yw0 - d.Yw0);
                    const int sb = sign_of(ub.Yw0 - d.Yw0);
                    if (sa != 0 && sa == -sb) ++c.agree;
                }
            }
            out.push_back(std::move(c));
        }
    }
    return out;
}

BaselineResult no_derivative_baseline(const EquilibriumConfig& cfg, const RegressionDesign& design,
                                      std::size_t threads) {
    cfg.validate();
    const PathEnsemble& paths = design.paths();
    const std::size_t M = paths.n_paths;
    const double ths = cfg.market.theta_s();
    const auto weights = aggregation_weights(cfg.agents);

    auto solve = [&](double gamma, const PayoffMix& endowment, const char* stage) {
        DriverSpec driver{[gamma, ths](std::size_t, double, double, double z1, double z2) {
                              return no_derivative_driver(gamma, ths, z1, z2);
                          },
                          true, cfg.numerics.z_cap};
        const PayoffMix terminal_mix = endowment.scaled(-1.0);
        BsdeOptions opt;
        opt.threads = threads;
        if (cfg.numerics.terminal_gradient) opt.terminal_z = terminal_z_from_gradient(terminal_mix, cfg.market);
        const auto terminal = terminal_values(paths, terminal_mix);
        try {
            return solve_bsde(design, driver, terminal, opt);
        } catch (const NumericalError& e) {
            throw PipelineError(stage, e.what());
        }
    };

    BaselineResult out;
    PayoffMix hw;
    for (std::size_t a = 0; a < cfg.agents.size(); ++a) hw.add(weights.w[a], cfg.agents[a].endowment);
    out.Yw0 = solve(weights.gamma_r, hw, "baseline-representative").y0;

    const std::size_t na = cfg.agents.size();
    std::vector<BsdeSolution> sols;
    for (std::size_t a = 0; a < na; ++a) {
        PayoffMix h;
        h.add(1.0, cfg.agents[a].endowment);
        sols.push_back(solve(cfg.agents[a].gamma, h, "baseline-agent"));
        out.Ya0.push_back(sols.back().y0);
        out.Ya0_stderr.push_back(std::sqrt(sols.back().target_variance[0] / static_cast<double>(M)));
    }

    std::vector<double> lambdas;
    for (const auto& a : cfg.agents) lambdas.push_back(a.lambda);
    const ConcernSystem sys = [&] {
        try {
            return ConcernSystem(lambdas);
        } catch (const NumericalError& e) {
            throw PipelineError("baseline-strategies", e.what());
        }
    }();
    auto s = paths.s_row(0);
    std::vector<double> sum(na, 0.0);
    Eigen::VectorXd j(static_cast<Eigen::Index>(na));
    // Row 0 sits at (s0, r0) on every path, so a single pass is cheap.
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t a = 0; a < na; ++a)
            j[static_cast<Eigen::Index>(a)] =
                (cfg.agents[a].gamma * ths + sols[a].z1[i]) / (cfg.market.sigma_s * s[i]);
        const Eigen::VectorXd p = sys.solve(j);
        for (std::size_t a = 0; a < na; ++a) sum[a] += p[static_cast<Eigen::Index>(a)];
    }
    for (double x : sum) out.pi1_0.push_back(x / static_cast<double>(M));
    return out;
}

BaselineTable run_baseline(const EquilibriumConfig& base, const SweepSpec& spec, const RegressionDesign& design,
                           std::size_t threads) {
    spec.validate(base);
    BaselineTable t;
    for (const auto& ax : spec.axes) t.axis_names.push_back(ax.name);
    for (const auto& a : base.agents) t.agent_names.push_back(a.name);
    const std::size_t na = base.agents.size();
    for (const auto& pt : spec.points()) {
        const EquilibriumConfig c = apply_axes(base, spec.axes, pt);
        BaselineRow row;
        row.axis_values = pt;
        try {
            row.without = no_derivative_baseline(c, design, threads);
        } catch (const PipelineError& e) {
            row.status = "failed:" + e.stage();
            row.without.Yw0 = kNaN;
            row.without.Ya0.assign(na, kNaN);
            row.without.Ya0_stderr.assign(na, kNaN);
            row.without.pi1_0.assign(na, kNaN);
        }
        try {
            const EquilibriumOutput eq = run_equilibrium(c, design, threads);
            row.Yw0_deriv = eq.Yw0();
            for (const auto& r : eq.agent_risks) row.Ya0_deriv.push_back(r.y0);
        } catch (const PipelineError& e) {
            if (row.status == "ok") row.status = "failed:" + e.stage();
            row.Yw0_deriv = kNaN;
            row.Ya0_deriv.assign(na, kNaN);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_sweep_csv(std::ostream& os, const SweepTable& t) {
    CsvWriter w(os);
    std::vector<std::string> cols = t.axis_names;
    for (const char* c : {"Yw0", "B0", "thetaR0"}) cols.emplace_back(c);
    for (const auto& n : t.agent_names) cols.push_back("Ya0_" + n);
    for (const auto& n : t.agent_names) cols.push_back("pi1_0_" + n);
    for (const auto& n : t.agent_names) cols.push_back("pi2_0_" + n);
    cols.emplace_back("clearing_residual");
    cols.emplace_back("status");
    w.header(cols);
    for (const auto& r : t.rows) {
        for (double v : r.axis_values) w.field(v);
        w.field(r.Yw0).field(r.B0).field(r.thetaR0);
        for (double v : r.Ya0) w.field(v);
        for (double v : r.pi1_0) w.field(v);
        for (double v : r.pi2_0) w.field(v);
        w.field(r.clearing_residual).field(r.status);
        w.end_row();
    }
}

void write_sign_report_csv(std::ostream& os, const std::vector<SignCheck>& checks) {
    CsvWriter w(os);
    w.header({"quantity", "axis", "expected_sign", "agree", "total", "fraction", "status", "note"});
    for (const auto& c : checks) {
        w.field(c.quantity).field(c.axis).field(static_cast<long long>(c.expected)).field(c.agree).field(c.total);
        w.field(c.fraction()).field(c.skipped ? "SKIP" : (c.pass() ? "PASS" : "FAIL")).field(c.note);
        w.end_row();
    }
}

void write_baseline_csv(std::ostream& os, const BaselineTable& t) {
    CsvWriter w(os);
    std::vector<std::string> cols = t.axis_names;
    cols.emplace_back("Yw0_noderiv");
    cols.emplace_back("Yw0_deriv");
    for (const auto& n : t.agent_names) cols.push_back("Ya0_noderiv_" + n);
    for (const auto& n : t.agent_names) cols.push_back("Ya0_stderr_noderiv_" + n);
    for (const auto& n : t.agent_names) cols.push_back("Ya0_deriv_" + n);
    for (const auto& n : t.agent_names) cols.push_back("pi1_0_noderiv_" + n);
    cols.emplace_back("status");
    w.header(cols);
    for (const auto& r : t.rows) {
        for (double v : r.axis_values) w.field(v);
        w.field(r.without.Yw0).field(r.Yw0_deriv);
        for (double v : r.without.Ya0) w.field(v);
        for (double v : r.without.Ya0_stderr) w.field(v);
        for (double v : r.Ya0_deriv) w.field(v);
        for (double v : r.without.pi1_0) w.field(v);
        w.field(r.status);
        w.end_row();
    }
}

}  // namespace rpeq
