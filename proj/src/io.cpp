#include "measureflow/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "measureflow/errors.hpp"

namespace mflow::io {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where.empty() ? what : where + ": " + what);
}

void require_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) fail(where, "expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items())
        if (!ok.count(key)) fail(where, "unknown key '" + key + "'");
}

double get_number(const json& j, const std::string& where) {
    if (!j.is_number()) fail(where, "expected a number");
    const double x = j.get<double>();
    if (!std::isfinite(x)) fail(where, "expected a finite number");
    return x;
}

int get_int(const json& j, const std::string& where) {
    if (!j.is_number_integer()) fail(where, "expected an integer");
    return j.get<int>();
}

std::vector<double> get_vector(const json& j, const std::string& where) {
    if (!j.is_array()) fail(where, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(get_number(j[k], where + "[" + std::to_string(k) + "]"));
    return out;
}

std::size_t get_dim(const json& j, const std::string& where) {
    if (!j.contains("dim")) fail(where, "missing 'dim'");
    const int d = get_int(j["dim"], where + ".dim");
    if (d < 1) fail(where, "'dim' must be positive");
    return static_cast<std::size_t>(d);
}

/// Rows of width `width` from {"atoms": [[...], ...]}, weights last.
void read_rows(const json& j, std::size_t width, const std::string& where, std::vector<double>& coords,
               std::vector<double>& weights, std::size_t coord_count) {
    if (!j.contains("atoms") || !j["atoms"].is_array()) fail(where, "missing 'atoms' array");
    const json& atoms = j["atoms"];
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        const auto row = get_vector(atoms[k], where + ".atoms[" + std::to_string(k) + "]");
        if (row.size() != width)
            fail(where, "atom " + std::to_string(k) + " has " + std::to_string(row.size()) + " entries, expected " +
                            std::to_string(width));
        if (row.back() < 0.0) fail(where, "atom " + std::to_string(k) + " has a negative weight");
        coords.insert(coords.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(coord_count));
        weights.push_back(row.back());
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

json measure_to_json(const DiscreteMeasure& m) {
    json atoms = json::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
        json row = json::array();
        for (double x : m.position(i)) row.push_back(x);
        row.push_back(m.weight(i));
        atoms.push_back(std::move(row));
    }
    return {{"dim", m.dim()}, {"atoms", std::move(atoms)}};
}

DiscreteMeasure measure_from_json(const json& j) {
    require_keys(j, "measure", {"dim", "atoms"});
    const std::size_t dim = get_dim(j, "measure");
    std::vector<double> pos, w;
    read_rows(j, dim + 1, "measure", pos, w, dim);
    return DiscreteMeasure(dim, pos, w);
}

json lifted_to_json(const LiftedMeasure& v) {
    json atoms = json::array();
    for (std::size_t i = 0; i < v.size(); ++i) {
        json row = json::array();
        for (double x : v.base(i)) row.push_back(x);
        for (double x : v.velocity(i)) row.push_back(x);
        row.push_back(v.weight(i));
        atoms.push_back(std::move(row));
    }
    return {{"dim", v.dim()}, {"atoms", std::move(atoms)}};
}

LiftedMeasure lifted_from_json(const json& j) {
    require_keys(j, "lifted measure", {"dim", "atoms"});
    const std::size_t dim = get_dim(j, "lifted measure");
    std::vector<double> joint, w;
    read_rows(j, 2 * dim + 1, "lifted measure", joint, w, 2 * dim);
    return LiftedMeasure(dim, DiscreteMeasure(2 * dim, joint, w));
}

DiscreteMeasure measure_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t width = 0, line_no = 0;
    std::vector<double> pos, w;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
        std::vector<double> row;
        std::stringstream cells(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(cells, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
        }
        if (!numeric) {
            if (width == 0 && pos.empty()) continue;  // header row
            fail("csv line " + std::to_string(line_no), "non-numeric entry");
        }
        if (row.size() < 2) fail("csv line " + std::to_string(line_no), "need at least one coordinate and a weight");
        if (width == 0) width = row.size();
        if (row.size() != width) fail("csv line " + std::to_string(line_no), "inconsistent column count");
        if (row.back() < 0.0) fail("csv line " + std::to_string(line_no), "negative weight");
        pos.insert(pos.end(), row.begin(), row.end() - 1);
        w.push_back(row.back());
    }
    if (width == 0) fail("csv", "no atoms (the dimension cannot be inferred)");
    return DiscreteMeasure(width - 1, pos, w);
}

std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string measure_to_csv(const DiscreteMeasure& m) {
    std::string out;
    for (std::size_t k = 0; k < m.dim(); ++k) out += "x" + std::to_string(k + 1) + ",";
    out += "weight\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (double x : m.position(i)) out += format_number(x) + ",";
        out += format_number(m.weight(i)) + "\n";
    }
    return out;
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
    return ss.str();
}

namespace {

json parse_json_file(const fs::path& path) {
    const std::string text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

}  // namespace

DiscreteMeasure read_measure(const fs::path& path) {
    if (path.extension() == ".csv") return measure_from_csv(read_text_file(path));
    try {
        return measure_from_json(parse_json_file(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

LiftedMeasure read_lifted(const fs::path& path) {
    try {
        return lifted_from_json(parse_json_file(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

DiscreteMeasure measure_from_value(const json& j, const fs::path& base_dir) {
    if (j.is_string()) return read_measure(resolve(base_dir, j.get<std::string>()));
    return measure_from_json(j);
}

PvfSpec pvf_from_json(const json& j, std::size_t dim) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) fail("pvf", "needs a string 'kind'");
    const std::string kind = j["kind"].get<std::string>();
    PvfSpec spec;
    if (kind == "constant") {
        require_keys(j, "pvf", {"kind", "velocity"});
        if (!j.contains("velocity")) fail("pvf", "constant field needs 'velocity'");
        spec = PvfSpec::constant(get_vector(j["velocity"], "pvf.velocity"));
    } else if (kind == "linear") {
        require_keys(j, "pvf", {"kind", "matrix", "offset"});
        if (!j.contains("matrix")) fail("pvf", "linear field needs 'matrix'");
        std::vector<double> a;
        for (const auto& row : j["matrix"]) {
            auto r = get_vector(row, "pvf.matrix");
            a.insert(a.end(), r.begin(), r.end());
        }
        std::vector<double> b = j.contains("offset") ? get_vector(j["offset"], "pvf.offset") : std::vector<double>(dim, 0.0);
        spec = PvfSpec::linear(dim, a, b);
    } else if (kind == "scaled_identity") {
        require_keys(j, "pvf", {"kind", "k"});
        if (!j.contains("k")) fail("pvf", "scaled_identity needs 'k'");
        spec = PvfSpec::scaled_identity(dim, get_number(j["k"], "pvf.k"));
    } else if (kind == "diffusion") {
        require_keys(j, "pvf", {"kind", "phi", "quadrature_points"});
        if (!j.contains("phi")) fail("pvf", "diffusion field needs 'phi'");
        require_keys(j["phi"], "pvf.phi", {"s", "values"});
        if (!j["phi"].contains("s") || !j["phi"].contains("values")) fail("pvf.phi", "needs 's' and 'values'");
        BreakpointTable phi(get_vector(j["phi"]["s"], "pvf.phi.s"), get_vector(j["phi"]["values"], "pvf.phi.values"));
        const int q = j.contains("quadrature_points") ? get_int(j["quadrature_points"], "pvf.quadrature_points") : 8;
        spec = PvfSpec::diffusion(phi, q);
    } else {
        fail("pvf", "unknown kind '" + kind + "'");
    }
    if (kind == "constant" && spec.velocity && spec.velocity(Point(dim, 0.0)).size() != dim)
        fail("pvf", "velocity has the wrong dimension");
    if (kind == "diffusion" && dim != 1) fail("pvf", "the diffusion field requires dim 1");
    return spec;
}

SourceSpec source_from_json(const json& j, std::size_t dim, const fs::path& base_dir) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) fail("source", "needs a string 'kind'");
    const std::string kind = j["kind"].get<std::string>();
    if (!j.contains("radius")) fail("source", "needs 'radius'");
    if (kind == "constant") {
        require_keys(j, "source", {"kind", "sigma", "radius"});
        if (!j.contains("sigma")) fail("source", "constant source needs 'sigma'");
        DiscreteMeasure sigma = measure_from_value(j["sigma"], base_dir);
        if (sigma.dim() != dim) fail("source", "sigma has the wrong dimension");
        return SourceSpec::constant(sigma, get_number(j["radius"], "source.radius"));
    }
    if (kind == "proportional") {
        require_keys(j, "source", {"kind", "rate", "radius", "carrier"});
        if (!j.contains("rate")) fail("source", "proportional source needs 'rate'");
        std::optional<Ball> carrier;
        if (j.contains("carrier")) {
            require_keys(j["carrier"], "source.carrier", {"center", "radius"});
            if (!j["carrier"].contains("center") || !j["carrier"].contains("radius"))
                fail("source.carrier", "needs 'center' and 'radius'");
            Ball b{get_vector(j["carrier"]["center"], "source.carrier.center"),
                   get_number(j["carrier"]["radius"], "source.carrier.radius")};
            if (b.center.size() != dim) fail("source.carrier", "center has the wrong dimension");
            carrier = b;
        }
        return SourceSpec::proportional(get_number(j["rate"], "source.rate"), get_number(j["radius"], "source.radius"),
                                        carrier);
    }
    fail("source", "unknown kind '" + kind + "'");
}

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
    require_keys(j, "config",
                 {"problem", "dim", "N", "levels", "T", "initial", "pvf", "source", "metric", "extent", "seed",
                  "outputs", "pairs", "times"});
    RunConfig cfg;
    cfg.base_dir = base_dir;
    const auto presets = preset_names();
    const bool preset = j.contains("problem") && j["problem"].is_string() &&
                        std::find(presets.begin(), presets.end(), j["problem"].get<std::string>()) != presets.end();
    Problem& p = cfg.problem;
    if (j.contains("problem")) {
        if (!j["problem"].is_string()) fail("config.problem", "expected a string");
        if (preset) {
            p = preset_problem(j["problem"].get<std::string>());
        } else {
            p.name = j["problem"].get<std::string>();
        }
    } else {
        p.name = "custom";
    }
    const bool overrides_dynamics = j.contains("initial") || j.contains("pvf") || j.contains("source");
    if (preset && overrides_dynamics) p.reference = nullptr;  // the closed form no longer applies

    if (j.contains("initial")) {
        p.initial = measure_from_value(j["initial"], base_dir);
    } else if (!preset) {
        fail("config", "'initial' is required unless a built-in problem is named");
    }
    p.dim = p.initial.dim();
    if (j.contains("dim") && get_int(j["dim"], "config.dim") != static_cast<int>(p.dim))
        fail("config.dim", "does not match the initial measure");
    if (j.contains("T")) p.T = get_number(j["T"], "config.T");
    if (!(p.T > 0.0)) fail("config.T", "must be positive");
    if (j.contains("pvf")) {
        if (j["pvf"].is_null())
            p.pvf.reset();
        else
            p.pvf = pvf_from_json(j["pvf"], p.dim);
    }
    if (j.contains("source")) {
        if (j["source"].is_null())
            p.src.reset();
        else
            p.src = source_from_json(j["source"], p.dim, base_dir);
    }
    if (j.contains("extent")) {
        const json& e = j["extent"];
        std::string mode;
        if (e.is_string()) {
            mode = e.get<std::string>();
        } else {
            require_keys(e, "config.extent", {"mode", "half_width"});
            if (!e.contains("mode") || !e["mode"].is_string()) fail("config.extent", "needs a string 'mode'");
            mode = e["mode"].get<std::string>();
            if (e.contains("half_width")) p.fixed_half_width = get_number(e["half_width"], "config.extent.half_width");
        }
        if (mode == "standard")
            p.extent = ExtentMode::standard;
        else if (mode == "adaptive")
            p.extent = ExtentMode::adaptive;
        else if (mode == "fixed")
            p.extent = ExtentMode::fixed;
        else
            fail("config.extent", "mode must be standard, adaptive or fixed");
        if (p.extent == ExtentMode::fixed && !(p.fixed_half_width > 0.0))
            fail("config.extent", "fixed extent needs a positive 'half_width'");
    }
    if (j.contains("N")) {
        cfg.N = get_int(j["N"], "config.N");
        if (*cfg.N < 1) fail("config.N", "must be a positive integer");
    }
    if (j.contains("levels")) {
        if (!j["levels"].is_array()) fail("config.levels", "expected an array of integers");
        for (const auto& v : j["levels"]) {
            const int n = get_int(v, "config.levels");
            if (n < 1) fail("config.levels", "levels must be positive");
            cfg.levels.push_back(n);
        }
    }
    if (j.contains("metric")) {
        if (!j["metric"].is_string()) fail("config.metric", "expected a string");
        cfg.metric = j["metric"].get<std::string>();
        parse_metric(cfg.metric);
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
            fail("config.seed", "expected a nonnegative integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("outputs")) {
        const json& o = j["outputs"];
        require_keys(o, "config.outputs", {"trajectory", "summary", "report", "table"});
        auto path = [&](const char* key, std::optional<fs::path>& dst) {
            if (!o.contains(key)) return;
            if (!o[key].is_string()) fail(std::string("config.outputs.") + key, "expected a path string");
            dst = resolve(base_dir, o[key].get<std::string>());
        };
        path("trajectory", cfg.outputs.trajectory);
        path("summary", cfg.outputs.summary);
        path("report", cfg.outputs.report);
        path("table", cfg.outputs.table);
    }
    if (j.contains("pairs")) {
        if (!j["pairs"].is_array()) fail("config.pairs", "expected an array of [measure, measure] pairs");
        for (const auto& pr : j["pairs"]) {
            if (!pr.is_array() || pr.size() != 2) fail("config.pairs", "each pair needs exactly two measures");
            auto a = measure_from_value(pr[0], base_dir);
            auto b = measure_from_value(pr[1], base_dir);
            if (a.dim() != p.dim || b.dim() != p.dim) fail("config.pairs", "pair measures have the wrong dimension");
            cfg.pairs.emplace_back(std::move(a), std::move(b));
        }
    }
    if (j.contains("times")) {
        cfg.times = get_vector(j["times"], "config.times");
        for (double t : cfg.times)
            if (t < 0.0 || t > p.T) fail("config.times", "probe times must lie in [0, T]");
    }
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    const json j = parse_json_file(path);
    const fs::path base = fs::absolute(path).parent_path();
    try {
        return parse_run_config(j, base);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("output directory '" + dir.string() + "' does not exist");
    std::random_device rd;
    const fs::path tmp = dir / ("." + path.filename().string() + ".tmp" + std::to_string(rd()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot create '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp, ec);
            throw IoError("failed writing '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move output into place at '" + path.string() + "'");
    }
}

}  // namespace mflow::io
