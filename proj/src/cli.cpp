#include "measureflow/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "measureflow/analysis.hpp"
#include "measureflow/errors.hpp"
#include "measureflow/fiber.hpp"
#include "measureflow/generalized.hpp"
#include "measureflow/io.hpp"
#include "measureflow/lattice.hpp"
#include "measureflow/transport.hpp"

namespace mflow::cli {

namespace {

using io::json;
namespace fs = std::filesystem;

std::shared_ptr<spdlog::logger> logger() {
    static std::shared_ptr<spdlog::logger> log = [] {
        auto l = spdlog::stderr_color_mt("measureflow");
        l->set_pattern("[%H:%M:%S.%e] [%l] %v");
        const char* env = std::getenv("MEASUREFLOW_LOG");
        l->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
        return l;
    }();
    return log;
}

struct Common {
    std::string config;
    std::string preset;
    std::string out;
    unsigned threads = 1;
    bool no_timestamp = false;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

void stamp(json& j, const Common& c, const Stopwatch& clock) {
    if (c.no_timestamp) return;
    j["timestamp"] = utc_timestamp();
    j["wall_time_s"] = clock.seconds();
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

template <class T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

io::RunConfig load_config(const Common& c) {
    if (!c.config.empty()) {
        auto cfg = io::load_run_config(c.config);
        if (!c.preset.empty()) throw ConfigError("give either --config or --preset, not both");
        return cfg;
    }
    if (c.preset.empty()) throw ConfigError("a --config file or a --preset name is required");
    return io::parse_run_config(json{{"problem", c.preset}}, fs::current_path());
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
    fs::path q = p;
    q.replace_extension();
    q += suffix;
    return q;
}

std::string trajectory_csv(const Trajectory& traj) {
    std::string s = "t,atom_index";
    const std::size_t n = traj.grid.dim;
    for (std::size_t k = 0; k < n; ++k) s += ",x" + std::to_string(k + 1);
    s += ",weight\n";
    for (std::size_t r = 0; r < traj.times.size(); ++r) {
        const auto& m = traj.states[r];
        const std::string t = io::format_number(traj.times[r]);
        for (std::size_t i = 0; i < m.size(); ++i) {
            s += t;
            s += ',';
            s += std::to_string(i);
            for (double x : m.position(i)) {
                s += ',';
                s += io::format_number(x);
            }
            s += ',';
            s += io::format_number(m.weight(i));
            s += '\n';
        }
    }
    return s;
}

void emit(const json& report, const std::optional<fs::path>& path, std::ostream& out) {
    const std::string text = report.dump(2) + "\n";
    if (path)
        io::write_file_atomic(*path, text);
    else
        out << text;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Common& c, std::optional<int> n_override, std::ostream& out) {
    Stopwatch clock;
    io::RunConfig cfg = load_config(c);
    const int N = n_override ? *n_override : cfg.N.value_or(0);
    if (N < 1) throw ConfigError("simulate needs a positive grid level N (config 'N' or --N)");
    std::optional<fs::path> traj_path = cfg.outputs.trajectory;
    if (!c.out.empty()) traj_path = fs::path(c.out);
    if (!traj_path) throw ConfigError("simulate needs an output path (--out or outputs.trajectory)");
    std::optional<fs::path> summary_path = cfg.outputs.summary;
    if (!summary_path) summary_path = with_suffix(*traj_path, ".summary.json");

    logger()->info("simulate {} N={} T={}", cfg.problem.name, N, cfg.problem.T);
    const Trajectory traj = cfg.problem.run(N);
    logger()->info("simulate finished: {} recorded states", traj.states.size());

    json summary;
    summary["problem"] = cfg.problem.name;
    summary["dim"] = traj.grid.dim;
    summary["N"] = N;
    summary["T"] = cfg.problem.T;
    summary["steps"] = traj.states.size() - 1;
    summary["space_half_width"] = traj.grid.space_half_width;
    summary["velocity_half_width"] = traj.grid.velocity_half_width;
    summary["mass_quantum"] = traj.quantum;
    summary["times"] = traj.times;
    summary["masses"] = traj.masses;
    summary["support_radii"] = traj.radii;
    summary["final_atoms"] = traj.states.back().size();
    summary["trajectory"] = traj_path->filename().string();
    stamp(summary, c, clock);

    io::write_file_atomic(*traj_path, trajectory_csv(traj));
    io::write_file_atomic(*summary_path, summary.dump(2) + "\n");
    out << summary.dump(2) << "\n";
    return ok;
}

// ---------------------------------------------------------------- distance

json plan_json(const TransportPlan& plan) {
    json p = json::array();
    for (const auto& e : plan.entries) p.push_back({e.source, e.target, e.flow});
    return p;
}

int cmd_distance(const Common& c, const std::string& a, const std::string& b, const std::string& metric,
                 std::ostream& out) {
    json r;
    if (metric == "w1" || metric == "gw") {
        const DiscreteMeasure m1 = io::read_measure(a);
        const DiscreteMeasure m2 = io::read_measure(b);
        if (m1.dim() != m2.dim()) throw DimensionMismatch("the two measures live in different dimensions");
        if (metric == "w1") {
            const auto res = wasserstein1(m1, m2);
            r["distance"] = res.distance;
            r["plan"] = plan_json(res.plan);
        } else {
            const auto res = generalized_wasserstein(m1, m2);
            r["distance"] = res.distance;
            r["removed1"] = res.kept1.removed_mass;
            r["removed2"] = res.kept2.removed_mass;
            r["transport_cost"] = res.transport_cost;
            r["plan"] = plan_json(res.plan);
        }
    } else if (metric == "fiber-w" || metric == "fiber-wg") {
        const LiftedMeasure v1 = io::read_lifted(a);
        const LiftedMeasure v2 = io::read_lifted(b);
        if (v1.dim() != v2.dim()) throw DimensionMismatch("the two lifted measures live in different dimensions");
        const auto res = metric == "fiber-w" ? fiber_w(v1, v2) : fiber_wg(v1, v2);
        r["value"] = res.value;
        r["base_cost"] = res.base_cost;
        r["slack"] = res.slack;
        r["plan"] = plan_json(res.plan);
    } else {
        throw ConfigError("unknown metric '" + metric + "'");
    }
    r["metric"] = metric;
    emit(r, c.out.empty() ? std::nullopt : std::optional<fs::path>(c.out), out);
    if (!c.out.empty()) out << r.dump(2) << "\n";
    return ok;
}

// ------------------------------------------------------------- convergence

std::vector<int> parse_levels(const std::string& s) {
    std::vector<int> levels;
    std::stringstream in(s);
    std::string cell;
    while (std::getline(in, cell, ',')) {
        try {
            std::size_t used = 0;
            const int n = std::stoi(cell, &used);
            if (used != cell.size() || n < 1) throw std::invalid_argument(cell);
            levels.push_back(n);
        } catch (const std::exception&) {
            throw ConfigError("--levels expects comma-separated positive integers, got '" + s + "'");
        }
    }
    return levels;
}

int cmd_convergence(const Common& c, const std::string& levels_flag, const std::string& metric_flag,
                    std::ostream& out) {
    Stopwatch clock;
    io::RunConfig cfg = load_config(c);
    std::vector<int> levels = levels_flag.empty() ? cfg.levels : parse_levels(levels_flag);
    const Metric metric = parse_metric(metric_flag.empty() ? cfg.metric : metric_flag);
    logger()->info("convergence {} levels {} metric {}", cfg.problem.name, levels.size(), metric_name(metric));
    const ConvergenceReport rep = convergence_study(cfg.problem, levels, metric, c.threads);

    json r;
    r["problem"] = rep.problem;
    r["metric"] = rep.metric;
    r["T"] = cfg.problem.T;
    r["levels"] = rep.levels;
    r["rate_basis"] = rep.rate_basis;
    r["rate"] = number_or_null(rep.rate);
    r["exact"] = rep.exact;
    r["fitted_points"] = rep.fitted_points;
    json rows = json::array();
    for (const auto& l : rep.results) {
        json row;
        row["N"] = l.N;
        row["overflow"] = l.overflow;
        if (l.overflow) row["note"] = l.note;
        row["steps"] = l.steps;
        row["final_mass"] = l.final_mass;
        row["final_atoms"] = l.final_atoms;
        row["reference_error"] = optional_json(l.reference_error);
        row["successive_distance"] = optional_json(l.successive_distance);
        row["next_N"] = optional_json(l.next_N);
        rows.push_back(std::move(row));
    }
    r["results"] = std::move(rows);
    stamp(r, c, clock);

    std::optional<fs::path> report_path = cfg.outputs.report;
    if (!c.out.empty()) report_path = fs::path(c.out);
    std::optional<fs::path> table_path = cfg.outputs.table;
    if (!table_path && report_path) table_path = with_suffix(*report_path, ".csv");
    if (table_path) {
        std::string csv = "level,distance,fitted_rate\n";
        const std::string rate = rep.exact ? "inf" : io::format_number(rep.rate);
        for (const auto& l : rep.results) {
            const auto& d = rep.rate_basis == "reference" ? l.reference_error : l.successive_distance;
            if (!d) continue;
            csv += std::to_string(l.N) + "," + io::format_number(*d) + "," + rate + "\n";
        }
        io::write_file_atomic(*table_path, csv);
    }
    emit(r, report_path, out);
    if (report_path) out << r.dump(2) << "\n";
    return ok;
}

// ---------------------------------------------------------------- validate

DiscreteMeasure shifted(const DiscreteMeasure& m, double d) {
    return pushforward(m, [d](std::span<const double> x) {
        Point y(x.begin(), x.end());
        y[0] += d;
        return y;
    });
}

int cmd_validate(const Common& c, std::optional<int> n_override, std::ostream& out) {
    Stopwatch clock;
    io::RunConfig cfg = load_config(c);
    const Problem& p = cfg.problem;
    const int N = n_override ? *n_override : cfg.N.value_or(16);
    if (N < 1) throw ConfigError("validate needs a positive grid level N");
    logger()->info("validate {} at N={}", p.name, N);
    const Trajectory traj = p.run(N);
    const double dt = traj.grid.time_step();
    bool passed = true;
    json r;
    r["problem"] = p.name;
    r["N"] = N;
    r["T"] = p.T;

    // Mass balance per step: without a source the mass is constant bit for bit;
    // with one, the increment is the step's quantized source mass.
    {
        double worst = 0.0;
        for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) {
            const double h = traj.times[k + 1] - traj.times[k];
            const double expected = p.src ? h * evaluate_source(*p.src, traj.states[k]).mass() : 0.0;
            worst = std::max(worst, std::abs(traj.masses[k + 1] - traj.masses[k] - expected));
        }
        const std::size_t source_atoms = p.src ? std::max<std::size_t>(1, p.src->sigma.size()) : 0;
        const double allowed = p.src ? static_cast<double>(source_atoms) * traj.quantum + 1e-15 * traj.masses.back() : 0.0;
        const bool ok_mass = worst <= allowed;
        r["mass_balance"] = {{"max_defect", worst}, {"allowed", allowed}, {"passed", ok_mass}};
        passed = passed && ok_mass;
    }

    // Weak-form residuals with h = dt at step boundaries.
    double reach = 0.0;
    for (double x : traj.radii) reach = std::max(reach, x);
    const Point origin(p.dim, 0.0);
    {
        const TestFunction bump = TestFunction::bump(origin, reach + 1.0);
        const TestFunction one = TestFunction::plateau(origin, reach + 0.5, reach + 1.5);
        const double gc = std::max(gradient_consistency(bump, 64, static_cast<unsigned>(cfg.seed)),
                                   gradient_consistency(one, 64, static_cast<unsigned>(cfg.seed)));
        json rows = json::array();
        double identity_gap = 0.0;
        const std::size_t full_steps = traj.times.size() >= 2 ? traj.times.size() - 1 : 0;
        const std::size_t stride = std::max<std::size_t>(1, full_steps / 8);
        for (std::size_t k = 0; k + 1 < traj.times.size(); k += stride) {
            const double t = traj.times[k];
            const double h = traj.times[k + 1] - t;
            if (h < dt * (1.0 - 1e-9)) continue;
            const double res = weak_residual(traj, bump, t, h);
            const double res_one = weak_residual(traj, one, t, h);
            const double balance =
                std::abs((traj.masses[k + 1] - traj.masses[k]) / h -
                         (p.src ? evaluate_source(*p.src, traj.states[k]).mass() : 0.0));
            identity_gap = std::max(identity_gap, std::abs(res_one - balance));
            rows.push_back({{"t", t}, {"h", h}, {"bump", res}, {"constant", res_one}, {"mass_balance", balance}});
        }
        const bool ok_identity = identity_gap <= 1e-9 * (1.0 + traj.masses.back() / dt);
        const bool ok_grad = gc < 1e-5;
        r["weak_residual"] = {{"rows", rows},
                              {"test_radius", reach + 1.0},
                              {"gradient_consistency", gc},
                              {"constant_identity_gap", identity_gap},
                              {"passed", ok_identity && ok_grad}};
        passed = passed && ok_identity && ok_grad;
    }

    // Semigroup probe.
    {
        auto pairs = cfg.pairs;
        if (pairs.empty()) {
            pairs.emplace_back(p.initial, shifted(p.initial, 0.25));
            pairs.emplace_back(p.initial, p.initial);
        }
        std::vector<double> times = cfg.times;
        if (times.empty()) times = {0.0, p.T / 4, p.T / 2, p.T};
        const auto rows = semigroup_probe(p, N, pairs, times, 0.2, c.threads);
        json table = json::array();
        std::size_t violations = 0;
        double max_time_lip = 0.0;
        for (const auto& row : rows) {
            if (!row.envelope_ok) ++violations;
            max_time_lip = std::max(max_time_lip, row.time_lipschitz);
            table.push_back({{"pair", row.pair},
                             {"t", row.t},
                             {"initial_distance", row.initial_distance},
                             {"distance", row.distance},
                             {"ratio", number_or_null(row.ratio)},
                             {"implied_C", number_or_null(row.implied_C)},
                             {"time_lipschitz", row.time_lipschitz},
                             {"envelope_ok", row.envelope_ok}});
        }
        r["semigroup"] = {{"rows", table},
                          {"violations", violations},
                          {"max_time_lipschitz", max_time_lip},
                          {"passed", violations == 0}};
        passed = passed && violations == 0;
    }

    // Germ compatibility for a single Dirac under a deterministic field.
    const bool germ_applies = p.pvf && p.pvf->kind == PvfSpec::Kind::deterministic && p.initial.size() == 1 &&
                              (!p.src || p.src->kind == SourceSpec::Kind::constant);
    if (germ_applies) {
        std::vector<double> times;
        for (double t = dt; t <= std::min(p.T, 0.25) * (1.0 + 1e-12); t *= 2.0) times.push_back(t);
        if (times.size() >= 2) {
            const Point x0(p.initial.position(0).begin(), p.initial.position(0).end());
            std::optional<SourceSpec> src = p.src;
            auto pvf = *p.pvf;
            const GermReport g = germ_compat_check(pvf, src, x0, N, times);
            json rows = json::array();
            for (const auto& row : g.rows) rows.push_back({{"t", row.t}, {"error", row.error}, {"excess", row.excess}});
            const bool ok_germ = std::isfinite(g.quadratic) && std::isfinite(g.max_fit_residual);
            r["germ"] = {{"offset", g.offset},
                         {"rows", rows},
                         {"quadratic", g.quadratic},
                         {"intercept", g.intercept},
                         {"max_fit_residual", g.max_fit_residual},
                         {"passed", ok_germ}};
            passed = passed && ok_germ;
        }
    }

    r["passed"] = passed;
    stamp(r, c, clock);
    std::optional<fs::path> report_path = cfg.outputs.report;
    if (!c.out.empty()) report_path = fs::path(c.out);
    emit(r, report_path, out);
    if (report_path) out << r.dump(2) << "\n";
    return passed ? ok : check_failed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Measure differential equations: lattice scheme, transport distances, convergence studies"};
    app.require_subcommand(1);
    Common c;

    auto add_common = [&c](CLI::App* sub, bool config) {
        if (config) {
            sub->add_option("--config", c.config, "JSON run configuration");
            sub->add_option("--preset", c.preset, "built-in problem instead of a config file");
        }
        sub->add_option("--out", c.out, "output path");
        sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--no-timestamp", c.no_timestamp, "omit timestamp and wall time from reports");
    };

    std::optional<int> sim_N, val_N;
    auto* simulate = app.add_subcommand("simulate", "run the lattice scheme and write the trajectory");
    add_common(simulate, true);
    simulate->add_option("--N", sim_N, "grid level (overrides the config)");

    std::string file_a, file_b, metric = "w1";
    auto* distance = app.add_subcommand("distance", "distance between two measures");
    add_common(distance, false);
    distance->add_option("first", file_a, "first measure file")->required();
    distance->add_option("second", file_b, "second measure file")->required();
    distance->add_option("--metric", metric, "w1, gw, fiber-w or fiber-wg")
        ->check(CLI::IsMember({"w1", "gw", "fiber-w", "fiber-wg"}));

    std::string levels, conv_metric;
    auto* convergence = app.add_subcommand("convergence", "multi-level convergence study");
    add_common(convergence, true);
    convergence->add_option("--levels", levels, "comma-separated grid levels");
    convergence->add_option("--metric", conv_metric, "w1 or gw")->check(CLI::IsMember({"w1", "gw"}));

    auto* validate = app.add_subcommand("validate", "weak residual, semigroup and germ checks");
    add_common(validate, true);
    validate->add_option("--N", val_N, "grid level (default: config N or 16)");

    std::vector<std::string> argv_store{"measureflow"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        std::ostringstream msg;
        const int code = app.exit(e, msg, msg);
        (code == 0 ? out : err) << msg.str();
        return code == 0 ? ok : config_error;
    }

    try {
        if (*simulate) return cmd_simulate(c, sim_N, out);
        if (*distance) return cmd_distance(c, file_a, file_b, metric, out);
        if (*convergence) return cmd_convergence(c, levels, conv_metric, out);
        if (*validate) return cmd_validate(c, val_N, out);
    } catch (const MassMismatch& e) {
        err << "error: MassMismatch: " << e.what() << "\n";
        return config_error;
    } catch (const SupportOverflow& e) {
        err << "error: SupportOverflow: " << e.what() << "\n";
        return overflow;
    } catch (const IoError& e) {
        err << "error: I/O: " << e.what() << "\n";
        return io_error;
    } catch (const ConfigError& e) {
        err << "error: configuration: " << e.what() << "\n";
        return config_error;
    } catch (const io::json::exception& e) {
        err << "error: configuration: " << e.what() << "\n";
        return config_error;
    } catch (const std::invalid_argument& e) {
        err << "error: invalid input: " << e.what() << "\n";
        return config_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return solver_error;
    }
    return config_error;
}

}  // namespace mflow::cli
