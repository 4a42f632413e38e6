#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "measureflow/analysis.hpp"
#include "measureflow/fields.hpp"
#include "measureflow/measure.hpp"

namespace mflow::io {

using nlohmann::json;
namespace fs = std::filesystem;

/// {"dim": n, "atoms": [[x_1, ..., x_n, w], ...]}
json measure_to_json(const DiscreteMeasure& m);
DiscreteMeasure measure_from_json(const json& j);
/// {"dim": n, "atoms": [[x_1..x_n, v_1..v_n, w], ...]}
json lifted_to_json(const LiftedMeasure& v);
LiftedMeasure lifted_from_json(const json& j);

/// One atom per row, "x_1,...,x_n,w"; blank lines, '#' comments and a
/// non-numeric header row are skipped.
DiscreteMeasure measure_from_csv(const std::string& text);
std::string measure_to_csv(const DiscreteMeasure& m);

/// Chooses the format by extension (.csv, otherwise JSON).
DiscreteMeasure read_measure(const fs::path& path);
LiftedMeasure read_lifted(const fs::path& path);

/// An inline measure object or a path string relative to `base_dir`.
DiscreteMeasure measure_from_value(const json& j, const fs::path& base_dir);

/// Field specs:
///   {"kind": "constant", "velocity": [..]}
///   {"kind": "linear", "matrix": [[..], ..], "offset": [..]}
///   {"kind": "scaled_identity", "k": k}
///   {"kind": "diffusion", "phi": {"s": [..], "values": [..]}, "quadrature_points": q}
PvfSpec pvf_from_json(const json& j, std::size_t dim);
/// Source specs:
///   {"kind": "constant", "sigma": measure-or-path, "radius": R}
///   {"kind": "proportional", "rate": r, "radius": R, "carrier": {"center": [..], "radius": rho}}
SourceSpec source_from_json(const json& j, std::size_t dim, const fs::path& base_dir);

struct Outputs {
    std::optional<fs::path> trajectory;  // CSV
    std::optional<fs::path> summary;     // JSON
    std::optional<fs::path> report;      // JSON
    std::optional<fs::path> table;       // CSV
};

/// Parsed and validated run configuration; all paths are absolute or relative
/// to the configuration file's directory.
struct RunConfig {
    fs::path base_dir;
    Problem problem;
    std::optional<int> N;
    std::vector<int> levels;
    std::string metric = "gw";
    std::uint64_t seed = 1;
    Outputs outputs;
    /// Pairs of initial data for the semigroup probe (validate).
    std::vector<std::pair<DiscreteMeasure, DiscreteMeasure>> pairs;
    /// Probe times (validate); empty means a default list.
    std::vector<double> times;
};

/// Throws ConfigError on any schema violation, IoError when a referenced file
/// cannot be read.
RunConfig parse_run_config(const json& j, const fs::path& base_dir);
RunConfig load_run_config(const fs::path& path);

std::string read_text_file(const fs::path& path);
/// Writes to a temporary file in the target directory, then renames it over
/// the target, so readers never observe a partial file.
void write_file_atomic(const fs::path& path, const std::string& content);

/// printf("%.17g") formatting used for every number in CSV output.
std::string format_number(double x);

}  // namespace mflow::io
