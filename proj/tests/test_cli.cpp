#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "measureflow/cli.hpp"
#include "measureflow/io.hpp"

using namespace mflow;
using io::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("mflow_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void write(const std::string& p, const std::string& s) { std::ofstream(p) << s; }

struct Result {
    int code;
    std::string out, err;
};

Result run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("distance subcommand") {
    TempDir tmp;
    write(tmp / "d0.json", R"({"dim":1,"atoms":[[0,1]]})");
    write(tmp / "d1.json", R"({"dim":1,"atoms":[[1,1]]})");
    write(tmp / "d0x2.json", R"({"dim":1,"atoms":[[0,2]]})");
    write(tmp / "empty.json", R"({"dim":1,"atoms":[]})");
    auto r = run({"distance", tmp / "d0.json", tmp / "d1.json", "--metric", "w1"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["distance"] == 1.0);
    r = run({"distance", tmp / "d0.json", tmp / "empty.json", "--metric", "gw"});
    REQUIRE(r.code == 0);
    auto j = json::parse(r.out);
    CHECK(j["distance"] == 1.0);
    CHECK(j["removed1"] == 1.0);
    CHECK(j.contains("transport_cost"));
    r = run({"distance", tmp / "d0.json", tmp / "d0x2.json", "--metric", "w1"});
    CHECK(r.code == 2);
    CHECK(r.err.find("MassMismatch") != std::string::npos);
    CHECK(run({"distance", tmp / "d0.json", tmp / "nothing.json"}).code == 4);
    CHECK(run({"distance", tmp / "d0.json", tmp / "d1.json", "--metric", "w9"}).code == 2);
}

TEST_CASE("fiber distances on lifted measures") {
    TempDir tmp;
    write(tmp / "a.json", R"({"dim":1,"atoms":[[0,1,1]]})");
    write(tmp / "b.json", R"({"dim":1,"atoms":[[0,-1,1]]})");
    auto r = run({"distance", tmp / "a.json", tmp / "b.json", "--metric", "fiber-w"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["value"] == doctest::Approx(2.0));
    r = run({"distance", tmp / "a.json", tmp / "b.json", "--metric", "fiber-wg"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["base_cost"] == doctest::Approx(0.0));
}

TEST_CASE("simulate writes one time block per recorded time") {
    TempDir tmp;
    write(tmp / "cfg.json", R"({"problem":"translate","N":8,"T":1.1,"outputs":{"trajectory":"traj.csv"}})");
    auto r = run({"simulate", "--config", tmp / "cfg.json", "--no-timestamp"});
    REQUIRE(r.code == 0);
    const std::string csv = io::read_text_file(tmp / "traj.csv");
    // ceil(T / dt) + 1 = 10 blocks of one atom each, plus the header.
    CHECK(count_lines(csv) == 11);
    CHECK(csv.rfind("t,atom_index,x1,weight\n", 0) == 0);
    CHECK(csv.find("\n1.1000000000000001,0,1.1000000000000001,1\n") != std::string::npos);
    const auto summary = json::parse(io::read_text_file(tmp / "traj.summary.json"));
    CHECK(summary["masses"].size() == 10);
    CHECK_FALSE(summary.contains("timestamp"));
    CHECK(run({"simulate", "--config", tmp / "cfg.json"}).code == 0);
    CHECK(json::parse(io::read_text_file(tmp / "traj.summary.json")).contains("wall_time_s"));
}

TEST_CASE("simulate error exits") {
    TempDir tmp;
    write(tmp / "zero.json", R"({"problem":"translate","N":0})");
    CHECK(run({"simulate", "--config", tmp / "zero.json", "--out", tmp / "x.csv"}).code == 2);
    write(tmp / "fast.json", R"({"initial":{"dim":1,"atoms":[[0,1]]},"N":4,"T":3,
        "pvf":{"kind":"scaled_identity","k":3},"extent":{"mode":"fixed","half_width":2}})");
    CHECK(run({"simulate", "--config", tmp / "fast.json", "--out", tmp / "x.csv"}).code == 3);
    CHECK_FALSE(fs::exists(tmp / "x.csv"));
    CHECK(run({"simulate", "--config", tmp / "absent.json", "--out", tmp / "x.csv"}).code == 4);
    CHECK(run({"simulate", "--preset", "translate", "--N", "4", "--out", tmp / "no/dir/x.csv"}).code == 4);
    CHECK(run({"simulate", "--preset", "translate", "--N", "4"}).code == 2);  // no output path
    CHECK(run({"frobnicate"}).code == 2);
}

TEST_CASE("convergence subcommand") {
    TempDir tmp;
    auto r = run({"convergence", "--preset", "translate", "--levels", "4,8,16", "--no-timestamp", "--out",
                  tmp / "rep.json"});
    REQUIRE(r.code == 0);
    const auto rep = json::parse(io::read_text_file(tmp / "rep.json"));
    CHECK(rep["exact"] == true);
    CHECK(rep["rate"].is_null());
    CHECK(rep["results"].size() == 3);
    const std::string table = io::read_text_file(tmp / "rep.csv");
    CHECK(table.rfind("level,distance,fitted_rate\n", 0) == 0);
    CHECK(count_lines(table) == 4);
    CHECK(run({"convergence", "--preset", "translate", "--levels", "4"}).code == 2);
    CHECK(run({"convergence", "--preset", "translate", "--levels", "4,x"}).code == 2);
    r = run({"convergence", "--preset", "expansion", "--levels", "4,8,16", "--metric", "w1"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["rate"].get<double>() > 0.7);
}

TEST_CASE("validate subcommand and byte-identical reruns") {
    TempDir tmp;
    auto a = run({"validate", "--preset", "expansion", "--N", "8", "--no-timestamp", "--out", tmp / "a.json"});
    auto b = run({"validate", "--preset", "expansion", "--N", "8", "--no-timestamp", "--threads", "4", "--out",
                  tmp / "b.json"});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(io::read_text_file(tmp / "a.json") == io::read_text_file(tmp / "b.json"));
    const auto rep = json::parse(io::read_text_file(tmp / "a.json"));
    CHECK(rep["passed"] == true);
    CHECK(rep.contains("germ"));
    CHECK(rep["semigroup"]["rows"].size() == 8);
}
