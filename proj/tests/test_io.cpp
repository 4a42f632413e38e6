#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "measureflow/errors.hpp"
#include "measureflow/io.hpp"

using namespace mflow;
using io::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("mflow_io_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST_CASE("measure json round trip") {
    auto m = DiscreteMeasure::from_atoms(2, {{{0.5, -1.0}, 0.25}, {{1.0, 2.0}, 0.75}});
    const json j = io::measure_to_json(m);
    CHECK(j["dim"] == 2);
    CHECK(j["atoms"].size() == 2);
    CHECK(io::measure_from_json(j) == m);
    CHECK(io::measure_from_json(json::parse(R"({"dim":1,"atoms":[]})")).empty());
}

TEST_CASE("measure json schema errors") {
    CHECK_THROWS_AS(io::measure_from_json(json::parse(R"({"atoms":[[0,1]]})")), ConfigError);
    CHECK_THROWS_AS(io::measure_from_json(json::parse(R"({"dim":1,"atoms":[[0,1,2]]})")), ConfigError);
    CHECK_THROWS_AS(io::measure_from_json(json::parse(R"({"dim":1,"atoms":[[0,-1]]})")), ConfigError);
    CHECK_THROWS_AS(io::measure_from_json(json::parse(R"({"dim":1,"atoms":[[0,"a"]]})")), ConfigError);
    CHECK_THROWS_AS(io::measure_from_json(json::parse(R"({"dim":1,"atoms":[],"extra":1})")), ConfigError);
    CHECK_THROWS_AS(io::measure_from_json(json::parse(R"({"dim":0,"atoms":[]})")), ConfigError);
}

TEST_CASE("lifted measure json") {
    const auto v = io::lifted_from_json(json::parse(R"({"dim":1,"atoms":[[0,1,0.5],[0,-1,0.5]]})"));
    CHECK(v.size() == 2);
    CHECK(v.mass() == 1.0);
    CHECK(io::lifted_from_json(io::lifted_to_json(v)) == v);
}

TEST_CASE("measure csv") {
    const auto m = io::measure_from_csv("x1,x2,weight\n# comment\n0,1,0.5\n\n2,3,0.25\n");
    CHECK(m.dim() == 2);
    CHECK(m.mass() == 0.75);
    CHECK(io::measure_from_csv(io::measure_to_csv(m)) == m);
    CHECK_THROWS_AS(io::measure_from_csv("0,1\n0,1,2\n"), ConfigError);
    CHECK_THROWS_AS(io::measure_from_csv(""), ConfigError);
    CHECK(io::format_number(0.1) == "0.10000000000000001");
}

TEST_CASE("field and source specs") {
    auto c = io::pvf_from_json(json::parse(R"({"kind":"constant","velocity":[1,0]})"), 2);
    CHECK(c.velocity(Point{3.0, 4.0}) == Point{1.0, 0.0});
    auto l = io::pvf_from_json(json::parse(R"({"kind":"linear","matrix":[[0,1],[-1,0]]})"), 2);
    CHECK(l.velocity(Point{1.0, 2.0}) == Point{2.0, -1.0});
    auto d = io::pvf_from_json(json::parse(R"({"kind":"diffusion","phi":{"s":[0,1],"values":[-0.5,0.5]}})"), 1);
    CHECK(d.kind == PvfSpec::Kind::diffusion1d);
    CHECK_THROWS_AS(io::pvf_from_json(json::parse(R"({"kind":"diffusion","phi":{"s":[0,1],"values":[1,0]}})"), 1),
                    ConfigError);
    CHECK_THROWS_AS(io::pvf_from_json(json::parse(R"({"kind":"spin"})"), 1), ConfigError);
    CHECK_THROWS_AS(io::pvf_from_json(json::parse(R"({"kind":"diffusion","phi":{"s":[0,1],"values":[0,1]}})"), 2),
                    ConfigError);
    auto s = io::source_from_json(
        json::parse(R"({"kind":"constant","radius":1,"sigma":{"dim":1,"atoms":[[0.5,0.5]]}})"), 1, ".");
    CHECK(s.sigma.mass() == 0.5);
    CHECK_THROWS_AS(io::source_from_json(
                        json::parse(R"({"kind":"constant","radius":0.1,"sigma":{"dim":1,"atoms":[[0.5,0.5]]}})"), 1, "."),
                    ConfigError);
    auto pr = io::source_from_json(
        json::parse(R"({"kind":"proportional","rate":0.5,"radius":2,"carrier":{"center":[0],"radius":1}})"), 1, ".");
    CHECK(pr.kind == SourceSpec::Kind::proportional);
}

TEST_CASE("run config resolves paths relative to the config file") {
    TempDir tmp;
    fs::create_directories(tmp.path / "data");
    write(tmp.path / "data" / "mu0.json", R"({"dim":1,"atoms":[[0.25,1]]})");
    write(tmp.path / "cfg.json", R"({
        "initial": "data/mu0.json", "N": 8, "T": 0.5,
        "pvf": {"kind": "constant", "velocity": [1]},
        "outputs": {"trajectory": "out/traj.csv"}
    })");
    const auto cwd = fs::current_path();
    fs::current_path(fs::temp_directory_path());
    const auto cfg = io::load_run_config(tmp.path / "cfg.json");
    fs::current_path(cwd);
    CHECK(cfg.problem.initial == DiscreteMeasure::dirac({0.25}));
    CHECK(*cfg.N == 8);
    CHECK(cfg.problem.T == 0.5);
    CHECK(cfg.outputs.trajectory->lexically_normal() == (fs::absolute(tmp.path) / "out" / "traj.csv").lexically_normal());
}

TEST_CASE("run config validation") {
    auto parse = [](const char* text) { return io::parse_run_config(json::parse(text), "."); };
    CHECK_THROWS_AS(parse(R"({"problem":"translate","N":0})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"problem":"translate","bogus":1})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"N":4})"), ConfigError);  // no initial measure
    CHECK_THROWS_AS(parse(R"({"problem":"translate","T":-1})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"problem":"translate","metric":"w7"})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"problem":"translate","levels":[4,"8"]})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"problem":"translate","extent":{"mode":"fixed"}})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"initial":"missing.json"})"), IoError);
    const auto preset = parse(R"({"problem":"translate","levels":[4,8,16]})");
    CHECK(preset.problem.reference);
    CHECK(preset.levels.size() == 3);
    const auto overridden = parse(R"({"problem":"translate","pvf":{"kind":"constant","velocity":[2]}})");
    CHECK_FALSE(overridden.problem.reference);
}

TEST_CASE("atomic writes replace the target without leftovers") {
    TempDir tmp;
    const auto target = tmp.path / "out.txt";
    io::write_file_atomic(target, "first");
    io::write_file_atomic(target, "second");
    CHECK(io::read_text_file(target) == "second");
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(tmp.path)) ++files;
    CHECK(files == 1);
    CHECK_THROWS_AS(io::write_file_atomic(tmp.path / "no" / "such" / "dir.txt", "x"), IoError);
    CHECK_THROWS_AS(io::read_text_file(tmp.path / "absent.json"), IoError);
}
