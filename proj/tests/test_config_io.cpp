#include "fluxcav/config.hpp"
#include "fluxcav/errors.hpp"
#include "fluxcav/io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace fluxcav;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("fluxcav_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_error(const std::string& text)
{
    try {
        parse_config(text, "cfg.json");
    } catch (const InvalidConfig& ex) {
        return ex.what();
    }
    return "";
}

bool contains(const std::string& haystack, const std::string& needle)
{
    return haystack.find(needle) != std::string::npos;
}

} // namespace

TEST_SUITE("config_io") {

TEST_CASE("minimal config takes the table preset")
{
    const auto cfg = parse_config(R"({"schema_version": 1})");
    CHECK(cfg.circuit.fluxonium.e_j == 10.8);
    CHECK(cfg.circuit.modes.size() == 2);
    CHECK(cfg.sweep.points == 121);
    CHECK(cfg.channels.any());
    CHECK(cfg.format == "csv");
}

TEST_CASE("full config round trip with comments")
{
    const std::string text = R"({
        // fluxonium with one readout mode
        "schema_version": 1,
        "circuit": {
            "preset": "none",
            "fluxonium": {"e_j": 9.0, "e_c": 3.0, "e_l": 1.2, "cutoff": 80, "levels": 8},
            "modes": [
                {"label": "R", "frequency": 7.0, "cutoff": 4, "coupling_to_qubit": 0.03}
            ]
        },
        "loss": {"q_diel": 2e5, "qp_offset": "half_pi", "purcell_convention": "literal"},
        "channels": ["diel", "purcell"],
        "sweep": {"start": -0.5, "stop": 0.0, "points": 11},
        "output": {"dir": "results", "format": "json"},
        "seed": 42,
        "fit": {"data_dir": "traces", "free_couplings": [["R", ""]]},
        "timedomain": {"alpha0_init": [1.5, 0.5], "chi_qc": -15.6}
    })";
    const auto cfg = parse_config(text, "/tmp/cfgdir/run.json");
    CHECK(cfg.circuit.fluxonium.e_j == 9.0);
    CHECK(cfg.circuit.fluxonium.levels == 8);
    REQUIRE(cfg.circuit.modes.size() == 1);
    CHECK(cfg.circuit.modes[0].coupling_to_qubit == 0.03);
    CHECK(cfg.loss.q_diel == 2e5);
    CHECK(cfg.loss.purcell_convention == PurcellConvention::Literal);
    CHECK(cfg.loss.qp_offset == doctest::Approx(M_PI / 2));
    CHECK(cfg.channels.dielectric);
    CHECK_FALSE(cfg.channels.inductive);
    CHECK(cfg.sweep.values().size() == 11);
    CHECK(cfg.sweep.values().back() == 0.0);
    CHECK(cfg.format == "json");
    CHECK(cfg.seed == 42);
    CHECK(cfg.fit.data_dir == "/tmp/cfgdir/traces");
    CHECK(cfg.fit.free_couplings.size() == 1);
    CHECK(cfg.timedomain.alpha0_init == std::complex<double>(1.5, 0.5));
    REQUIRE(cfg.timedomain.chi_qc.has_value());
    CHECK(*cfg.timedomain.chi_qc == -15.6);
}

TEST_CASE("field errors name the offending field")
{
    CHECK(contains(config_error(R"({"schema_version": 1, "circuit": {"fluxonium": {"e_j": -1}}})"),
                   "'circuit.fluxonium.e_j'"));
    CHECK(contains(config_error(R"({"schema_version": 1, "circuit": {"fluxonium": {"e_j": "big"}}})"),
                   "'circuit.fluxonium.e_j' must be a number"));
    CHECK(contains(config_error(R"({"schema_version": 1, "sweep": {"pionts": 3}})"), "'sweep.pionts' is not recognized"));
    CHECK(contains(config_error(R"({"schema_version": 2})"), "'schema_version'"));
    CHECK(contains(config_error(R"({})"), "'schema_version'"));
    CHECK(contains(config_error(R"({"schema_version": 1, "loss": {"t_res": 0}})"), "loss.t_res"));
    CHECK(contains(config_error(R"({"schema_version": 1, "channels": ["diel", "x"]})"), "channels"));
    CHECK(contains(config_error(R"({"schema_version": 1, "output": {"format": "xml"}})"), "output.format"));
    CHECK(contains(config_error(R"({"schema_version": 1, "circuit": {"preset": "other"}})"), "circuit.preset"));
    CHECK(contains(config_error(R"({"schema_version": 1, "chi": {"modes": ["Z"]}})"), "chi.modes"));
    CHECK(contains(config_error(R"({"schema_version": 1, "fit": {"free_couplings": [["R", "Q"]]}})"),
                   "fit.free_couplings"));
}

TEST_CASE("syntax errors carry line and column")
{
    const std::string err = config_error("{\n  \"schema_version\": 1,\n  \"seed\": ,\n}");
    CHECK(contains(err, "cfg.json:3:"));
    CHECK(contains(err, "syntax error"));
}

TEST_CASE("load_config reports unreadable files")
{
    CHECK_THROWS_AS(load_config("/nonexistent/fluxcav.json"), InvalidConfig);
}

TEST_CASE("sha256 digests")
{
    CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const auto dir = scratch_dir("sha");
    std::ofstream(dir / "a.txt") << "abc";
    CHECK(io::sha256_file((dir / "a.txt").string()) == io::sha256_hex("abc"));
}

TEST_CASE("CSV round trip keeps metadata and full precision")
{
    const auto dir = scratch_dir("csv");
    io::Metadata meta;
    meta.command = "spectrum";
    meta.config_hash = "deadbeef";
    meta.seed = 7;
    meta.extra["note"] = "x";
    io::Table t;
    t.columns = {"flux", "value"};
    t.rows = {{-0.5, 0.1 + 0.2}, {0.0, std::numeric_limits<double>::quiet_NaN()}, {0.5, 1e-300}};
    const auto path = (dir / "t.csv").string();
    io::write_csv(path, meta, t);

    const auto in = io::read_csv(path);
    CHECK(in.header.at("command") == "spectrum");
    CHECK(in.header.at("config_sha256") == "deadbeef");
    CHECK(in.header.at("seed") == "7");
    CHECK(in.header.at("tool_version") == io::kToolVersion);
    CHECK(in.columns == t.columns);
    REQUIRE(in.rows.size() == 3);
    CHECK(in.rows[0][1] == 0.1 + 0.2);
    CHECK(std::isnan(in.rows[1][1]));
    CHECK(in.rows[2][1] == 1e-300);
    CHECK(in.column("flux") == std::vector<double>{-0.5, 0.0, 0.5});
    CHECK(in.has("value"));
    CHECK_FALSE(in.has("other"));
}

TEST_CASE("missing column is a schema error naming it")
{
    const auto dir = scratch_dir("schema");
    std::ofstream(dir / "in.csv") << "# flux: 0.1\nfrequency,response\n1,2\n";
    const auto in = io::read_csv((dir / "in.csv").string());
    CHECK(in.header.at("flux") == "0.1");
    try {
        in.column("t");
        FAIL("expected SchemaError");
    } catch (const SchemaError& ex) {
        CHECK(std::string(ex.what()) == "missing required column 't'");
    }
}

TEST_CASE("JSON output is schema-versioned and maps non-finite numbers to null")
{
    const auto dir = scratch_dir("json");
    io::Metadata meta;
    meta.command = "fit";
    const auto path = (dir / "r.json").string();
    io::write_json(path, meta, {{"value", std::numeric_limits<double>::infinity()}, {"ok", 1.5}});
    const auto doc = nlohmann::json::parse(slurp(path));
    CHECK(doc["schema_version"] == io::kOutputSchemaVersion);
    CHECK(doc["metadata"]["command"] == "fit");
    CHECK(doc["value"].is_null());
    CHECK(doc["ok"] == 1.5);
}

TEST_CASE("SVG plot is written")
{
    const auto dir = scratch_dir("svg");
    const auto path = (dir / "p.svg").string();
    io::write_svg_plot(path, "chi", "flux", {0.0, 1.0, 2.0}, {{"a", {1.0, NAN, 3.0}}});
    const auto text = slurp(path);
    CHECK(contains(text, "<svg"));
    CHECK(contains(text, "</svg>"));
}

TEST_CASE("circuit serialization reflects the parameters")
{
    const auto j = circuit_to_json(table_one_circuit());
    CHECK(j["fluxonium"]["e_j"] == 10.8);
    CHECK(j["modes"].size() == 2);
    CHECK(loss_to_json(LossParams{})["q_ind"] == 3e7);
}

} // TEST_SUITE
