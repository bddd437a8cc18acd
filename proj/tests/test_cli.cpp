#include "fluxcav/config.hpp"
#include "fluxcav/io.hpp"
#include "fluxcav/loss.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace fluxcav;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kSource = FLUXCAV_SOURCE_DIR;

struct Outcome {
    int status = -1;
    std::string err;
};

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("fluxcav_cli_" + name);
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

Outcome run(const fs::path& dir, const std::string& args)
{
    const auto err = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + FLUXCAV_CLI_PATH + "\" " + args + " > \"" + (dir / "stdout.txt").string() +
                            "\" 2> \"" + err.string() + "\"";
    const int raw = std::system(cmd.c_str());
    Outcome o;
    o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    o.err = slurp(err);
    return o;
}

fs::path write_config(const fs::path& dir, const json& body)
{
    json cfg = body;
    cfg["schema_version"] = 1;
    if (!cfg.contains("output")) {
        cfg["output"] = {{"dir", (dir / "out").string()}};
    }
    const auto path = dir / "cfg.json";
    std::ofstream(path) << cfg.dump(2);
    return path;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

bool contains(const std::string& haystack, const std::string& needle)
{
    return haystack.find(needle) != std::string::npos;
}

// Fixture config with the data paths made absolute and output redirected.
fs::path fixture_config(const fs::path& dir)
{
    const auto data = kSource / "data" / "fixture";
    json cfg = json::parse(slurp(kSource / "configs" / "fixture.json"), nullptr, true, true);
    cfg["fit"]["data_dir"] = (data / "traces").string();
    cfg["timedomain"]["dispersion_file"] = (data / "dispersion.csv").string();
    cfg["timedomain"]["calibration_file"] = (data / "calibration.csv").string();
    cfg["timedomain"]["lifetime_file"] = (data / "lifetime.csv").string();
    cfg["output"]["dir"] = (dir / "out").string();
    const auto path = dir / "fixture.json";
    std::ofstream(path) << cfg.dump(2);
    return path;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("spectrum on a single flux point writes one row with metadata")
{
    const auto dir = scratch("spectrum1");
    const auto cfg = write_config(dir, {{"sweep", {{"start", -0.5}, {"stop", -0.5}, {"points", 1}}}, {"seed", 11}});
    const auto o = run(dir, "spectrum -c " + quoted(cfg));
    REQUIRE_MESSAGE(o.status == 0, o.err);
    const auto t = io::read_csv((dir / "out" / "spectrum.csv").string());
    REQUIRE(t.rows.size() == 1);
    CHECK(t.column("flux")[0] == -0.5);
    auto c = load_config(cfg.string()).circuit;
    c.flux = -0.5;
    const auto expected = loss::point_rates(c, LossParams{}, ChannelSet::only_dielectric()).f01;
    CHECK(t.column("f01")[0] == doctest::Approx(expected).scale(0.0).epsilon(1e-9));
    CHECK(t.header.at("command") == "spectrum");
    CHECK(t.header.at("seed") == "11");
    CHECK(t.header.at("config_sha256") == io::sha256_file(cfg.string()));
    CHECK(t.header.at("tool_version") == io::kToolVersion);
}

TEST_CASE("invalid circuit exits nonzero and names the field")
{
    const auto dir = scratch("badej");
    const auto cfg = write_config(dir, {{"circuit", {{"fluxonium", {{"e_j", -1.0}}}}}});
    const auto o = run(dir, "spectrum -c " + quoted(cfg));
    CHECK(o.status != 0);
    CHECK(contains(o.err, "circuit.fluxonium.e_j"));
    CHECK_FALSE(fs::exists(dir / "out" / "spectrum.csv"));
}

TEST_CASE("json format and output override")
{
    const auto dir = scratch("jsonfmt");
    const auto cfg = write_config(dir, {{"sweep", {{"start", 0.0}, {"stop", 0.1}, {"points", 2}}}});
    const auto o = run(dir, "spectrum -c " + quoted(cfg) + " --format json -o " + quoted(dir / "alt"));
    REQUIRE_MESSAGE(o.status == 0, o.err);
    const auto doc = json::parse(slurp(dir / "alt" / "spectrum.json"));
    CHECK(doc["metadata"]["command"] == "spectrum");
    CHECK(doc["rows"].size() == 2);
}

TEST_CASE("chi with all couplings zero vanishes")
{
    const auto dir = scratch("chi0");
    const json circuit = {{"preset", "none"},
                          {"fluxonium", {{"e_j", 10.8}, {"e_c", 3.5}, {"e_l", 1.014}}},
                          {"modes",
                           {{{"label", "R"}, {"frequency", 6.9}, {"cutoff", 4}, {"coupling_to_qubit", 0.0}},
                            {{"label", "C"}, {"frequency", 4.5}, {"cutoff", 4}, {"coupling_to", {{"R", 0.0}}}}}}};
    const auto cfg = write_config(
        dir, {{"circuit", circuit}, {"sweep", {{"start", -0.5}, {"stop", 0.0}, {"points", 5}}}, {"chi", {{"modes", {"R", "C"}}}}});
    const auto o = run(dir, "chi -c " + quoted(cfg));
    REQUIRE_MESSAGE(o.status == 0, o.err);
    const auto t = io::read_csv((dir / "out" / "chi.csv").string());
    for (const char* col : {"chi_R", "chi_C"}) {
        for (double v : t.column(col)) {
            CHECK(std::abs(v) < 1e-6);
        }
    }
}

TEST_CASE("chi bands bracket the central curve and crossings are reported")
{
    const auto dir = scratch("chiband");
    const auto cfg = write_config(dir, {{"sweep", {{"start", -0.45}, {"stop", -0.25}, {"points", 9}}},
                                        {"chi", {{"modes", {"C"}}, {"bands", {0.10}}}}});
    const auto o = run(dir, "chi -c " + quoted(cfg));
    REQUIRE_MESSAGE(o.status == 0, o.err);
    const auto t = io::read_csv((dir / "out" / "chi.csv").string());
    const auto mid = t.column("chi_C");
    const auto lo = t.column("chi_C_lo10");
    const auto hi = t.column("chi_C_hi10");
    for (std::size_t i = 0; i < mid.size(); ++i) {
        CHECK(lo[i] <= mid[i]);
        CHECK(mid[i] <= hi[i]);
    }
    const auto crossings = json::parse(slurp(dir / "out" / "chi_crossings.json"))["zero_crossings"]["C"];
    REQUIRE(crossings.size() >= 1);
    MESSAGE("chi_C zero crossing at " << crossings[0].get<double>());
    CHECK(crossings[0].get<double>() > -0.45);
    CHECK(crossings[0].get<double>() < -0.25);
}

TEST_CASE("t1-budget with no channels is an error")
{
    const auto dir = scratch("t1none");
    const auto cfg = write_config(dir, {{"sweep", {{"start", -0.5}, {"stop", 0.5}, {"points", 3}}}});
    const auto o = run(dir, "t1-budget -c " + quoted(cfg) + " --channels none");
    CHECK(o.status != 0);
    CHECK(contains(o.err, "no channels enabled"));
}

TEST_CASE("t1-budget dielectric-only column equals the library rate")
{
    const auto dir = scratch("t1diel");
    const auto cfg_path = write_config(dir, {{"sweep", {{"start", -0.5}, {"stop", 0.5}, {"points", 5}}}});
    const auto o = run(dir, "t1-budget -c " + quoted(cfg_path) + " --channels diel");
    REQUIRE_MESSAGE(o.status == 0, o.err);
    const auto t = io::read_csv((dir / "out" / "t1_budget.csv").string());
    for (const char* col : {"gamma_diel", "gamma_ind", "gamma_qp", "gamma_purcell_up", "gamma_purcell_down"}) {
        CHECK(t.has(col));
    }
    CHECK(contains(t.header.at("loss"), "q_diel"));

    const auto cfg = load_config(cfg_path.string());
    const auto flux = t.column("flux");
    const auto diel = t.column("gamma_diel");
    const auto ind = t.column("gamma_ind");
    for (std::size_t i = 0; i < flux.size(); ++i) {
        auto c = cfg.circuit;
        c.flux = flux[i];
        const auto rates = loss::point_rates(c, cfg.loss, ChannelSet::only_dielectric());
        CHECK(diel[i] == rates.diel);
        CHECK(ind[i] == 0.0);
    }
}

TEST_CASE("fit on the shipped fixture recovers the generating parameters")
{
    const auto dir = scratch("fit");
    const auto cfg = fixture_config(dir);
    const auto o = run(dir, "fit -c " + quoted(cfg));
    REQUIRE_MESSAGE(o.status == 0, o.err);

    const auto truth = json::parse(slurp(kSource / "data" / "fixture" / "truth.json"));
    const auto energy = json::parse(slurp(dir / "out" / "energy_fit.json"));
    CHECK(energy["converged"] == true);
    for (const char* key : {"e_j", "e_c", "e_l"}) {
        const double want = truth["circuit"]["fluxonium"][key];
        CHECK(energy["params"][key].get<double>() == doctest::Approx(want).scale(0.0).epsilon(0.005));
    }
    const auto coupling = json::parse(slurp(dir / "out" / "coupling_fit.json"));
    const double g_true = truth["circuit"]["modes"][0]["coupling_to_qubit"];
    CHECK(coupling["params"]["g_R_qubit"].get<double>() == doctest::Approx(g_true).scale(0.0).epsilon(0.10));

    const auto peaks = json::parse(slurp(dir / "out" / "peaks.json"));
    CHECK(peaks["metadata"]["command"] == "fit");
    CHECK(energy.contains("tolerances"));
    CHECK(energy.contains("inputs"));

    SUBCASE("a rerun is byte identical")
    {
        const auto again = scratch("fit_again");
        fs::copy_file(cfg, again / "fixture.json");
        const auto o2 = run(again, "fit -c " + quoted(again / "fixture.json") + " -o " + quoted(again / "out"));
        REQUIRE(o2.status == 0);
        for (const char* f : {"peaks.json", "energy_fit.json", "coupling_fit.json"}) {
            CHECK_MESSAGE(slurp(dir / "out" / f) == slurp(again / "out" / f), f);
        }
    }
}

TEST_CASE("fit on an empty directory reports missing data")
{
    const auto dir = scratch("fitempty");
    fs::create_directories(dir / "empty");
    const auto cfg = write_config(dir, {{"fit", {{"data_dir", (dir / "empty").string()}}}});
    const auto o = run(dir, "fit -c " + quoted(cfg));
    CHECK(o.status != 0);
    CHECK(contains(o.err, "no trace files"));
}

TEST_CASE("timedomain on the fixture reports dispersion and lifetime")
{
    const auto dir = scratch("td");
    const auto cfg = fixture_config(dir);
    const auto o = run(dir, "timedomain -c " + quoted(cfg));
    REQUIRE_MESSAGE(o.status == 0, o.err);
    const auto truth = json::parse(slurp(kSource / "data" / "fixture" / "truth.json"));
    const auto disp = json::parse(slurp(dir / "out" / "dispersion_fit.json"));
    const double det = disp["model_khz"]["detuning"];
    const double det_err = disp["std_errors_khz"]["detuning"];
    const double chi = disp["model_khz"]["chi_qc"];
    const double chi_err = disp["std_errors_khz"]["chi_qc"];
    CHECK(std::abs(det - truth["dispersion_model_khz"]["detuning"].get<double>()) < 4 * det_err);
    CHECK(std::abs(chi - truth["dispersion_model_khz"]["chi_qc"].get<double>()) < 4 * chi_err);

    const auto life = json::parse(slurp(dir / "out" / "lifetime_fit.json"));
    CHECK(life["metadata"]["convention"] == "normalized");
    CHECK(life["t1_us"].get<double>() == doctest::Approx(truth["decay"]["t1_us"].get<double>()).scale(0.0).epsilon(0.05));

    const auto lit = run(dir, "timedomain -c " + quoted(cfg) + " --convention literal -o " + quoted(dir / "lit"));
    REQUIRE_MESSAGE(lit.status == 0, lit.err);
    const auto life_lit = json::parse(slurp(dir / "lit" / "lifetime_fit.json"));
    CHECK(life_lit["metadata"]["convention"] == "literal");
    CHECK(life_lit["t1_us"].get<double>() != life["t1_us"].get<double>());
}

TEST_CASE("timedomain names a missing input column")
{
    const auto dir = scratch("tdschema");
    std::ofstream(dir / "disp.csv") << "n,delta_g\n0,-24\n1,-24.1\n2,-24.2\n";
    const auto cfg = write_config(dir, {{"timedomain", {{"dispersion_file", (dir / "disp.csv").string()}}}});
    const auto o = run(dir, "timedomain -c " + quoted(cfg));
    CHECK(o.status != 0);
    CHECK(contains(o.err, "missing required column 'delta_e_minus_g'"));
}

TEST_CASE("missing config file is rejected by the parser")
{
    const auto dir = scratch("nocfg");
    const auto o = run(dir, "spectrum -c " + quoted(dir / "absent.json"));
    CHECK(o.status != 0);
}

} // TEST_SUITE
