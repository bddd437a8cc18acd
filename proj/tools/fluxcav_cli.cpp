#include "fluxcav/config.hpp"
#include "fluxcav/errors.hpp"
#include "fluxcav/fitting.hpp"
#include "fluxcav/io.hpp"
#include "fluxcav/loss.hpp"
#include "fluxcav/spectra.hpp"
#include "fluxcav/timedomain.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

using namespace fluxcav;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;

struct CommonFlags {
    std::string config;
    std::string out;
    std::string format;
    int jobs = 1;
    std::optional<std::uint64_t> seed;
    std::string channels;
    std::string convention;
    bool plot = false;
};

std::string digits17(double v)
{
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

// Shared state of one command invocation.
struct Run {
    RunConfig cfg;
    fs::path out;
    std::string format;
    int jobs = 1;
    io::Metadata meta;
    json failures = json::array();

    Run(const CommonFlags& flags, const std::string& command)
    {
        cfg = load_config(flags.config);
        if (!flags.out.empty()) {
            cfg.out_dir = flags.out;
        } else if (fs::path(cfg.out_dir).is_relative()) {
            cfg.out_dir = (fs::path(flags.config).parent_path() / cfg.out_dir).lexically_normal().string();
        }
        if (!flags.format.empty()) {
            cfg.format = flags.format;
        }
        if (flags.seed) {
            cfg.seed = *flags.seed;
        }
        if (!flags.channels.empty()) {
            cfg.channels = ChannelSet::parse(flags.channels);
        }
        if (flags.jobs < 1) {
            throw InvalidConfig("--jobs must be >= 1");
        }
        jobs = flags.jobs;
        out = cfg.out_dir;
        format = cfg.format;
        fs::create_directories(out);
        meta.command = command;
        meta.config_hash = io::sha256_hex(cfg.text);
        meta.seed = cfg.seed;
    }

    std::string path(const std::string& name) const { return (out / name).string(); }

    void table(const std::string& stem, const io::Table& t, const io::Metadata& m) const
    {
        if (format == "json") {
            io::write_json(path(stem + ".json"), m, io::table_to_json(t));
        } else {
            io::write_csv(path(stem + ".csv"), m, t);
        }
    }
    void table(const std::string& stem, const io::Table& t) const { table(stem, t, meta); }

    void fail(double flux, const std::string& what)
    {
        std::cerr << "failed at flux " << digits17(flux) << ": " << what << "\n";
        failures.push_back({{"flux", flux}, {"error", what}});
    }
    void fail(const std::string& item, const std::string& what)
    {
        std::cerr << "failed: " << item << ": " << what << "\n";
        failures.push_back({{"item", item}, {"error", what}});
    }

    int finish() const
    {
        if (failures.empty()) {
            return 0;
        }
        io::write_json(path("failures.json"), meta, {{"failures", failures}});
        std::cerr << failures.size() << " item(s) failed; see " << path("failures.json") << "\n";
        return kExitPartial;
    }
};

void record_sweep_failures(Run& run, const FluxSweep& sweep)
{
    for (const auto& [flux, what] : sweep.failures) {
        run.fail(flux, what);
    }
}

double branch_energy(const EigenSolution& sol, const StateLabel& label)
{
    const StateLabel ground(sol.dims.size(), 0);
    const auto g = sol.find(ground);
    const auto e = sol.find(label);
    if (!g || !e || sol.ambiguous[*g] || sol.ambiguous[*e]) {
        return kNaN;
    }
    return sol.energies(static_cast<Eigen::Index>(*e)) - sol.energies(static_cast<Eigen::Index>(*g));
}

std::vector<double> mode_frequencies(const CircuitParams& c)
{
    std::vector<double> f;
    for (const auto& m : c.modes) {
        f.push_back(m.frequency);
    }
    return f;
}

CircuitParams scale_couplings(CircuitParams c, double s)
{
    for (auto& m : c.modes) {
        m.coupling_to_qubit *= s;
        for (auto& link : m.coupling_to) {
            link.strength *= s;
        }
    }
    return c;
}

void plot(const Run& run, const std::string& stem, const std::string& title, const io::Table& t)
{
    std::vector<double> x;
    for (const auto& row : t.rows) {
        x.push_back(row[0]);
    }
    std::vector<io::PlotSeries> series;
    for (std::size_t j = 1; j < t.columns.size(); ++j) {
        io::PlotSeries s{t.columns[j], {}};
        for (const auto& row : t.rows) {
            s.y.push_back(row[j]);
        }
        series.push_back(std::move(s));
    }
    io::write_svg_plot(run.path(stem + ".svg"), title, "flux", x, series);
}

// ---------------------------------------------------------------- spectrum

int cmd_spectrum(const CommonFlags& flags)
{
    Run run(flags, "spectrum");
    const auto& c = run.cfg.circuit;
    const auto grid = run.cfg.sweep.values();
    const auto sweep = spectra::sweep_flux(c, grid, {0, run.jobs, true});
    record_sweep_failures(run, sweep);

    const std::size_t axes = c.modes.size() + 1;
    io::Table t;
    t.columns = {"flux", "f01", "f12"};
    for (const auto& m : c.modes) {
        t.columns.push_back("f_" + m.label);
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!sweep.ok[i]) {
            continue;
        }
        const auto& sol = sweep.solutions[i];
        const double e1 = branch_energy(sol, spectra::unit_label(axes, {{0, 1}}));
        const double e2 = branch_energy(sol, spectra::unit_label(axes, {{0, 2}}));
        std::vector<double> row{grid[i], e1, e2 - e1};
        for (std::size_t k = 0; k < c.modes.size(); ++k) {
            StateLabel label(axes, 0);
            label[k + 1] = 1;
            row.push_back(branch_energy(sol, label));
        }
        t.rows.push_back(std::move(row));
    }
    run.table("spectrum", t);
    if (flags.plot) {
        plot(run, "spectrum", "transition frequencies (GHz)", t);
    }
    return run.finish();
}

// ---------------------------------------------------------------- chi

int cmd_chi(const CommonFlags& flags)
{
    Run run(flags, "chi");
    const auto& c = run.cfg.circuit;
    const auto grid = run.cfg.sweep.values();
    std::vector<std::size_t> modes;
    if (run.cfg.chi.modes.empty()) {
        for (std::size_t k = 0; k < c.modes.size(); ++k) {
            modes.push_back(k);
        }
    } else {
        for (const auto& label : run.cfg.chi.modes) {
            modes.push_back(c.mode_index(label));
        }
    }
    if (modes.empty()) {
        throw InvalidConfig("chi: the circuit has no modes");
    }

    const auto sweep = spectra::sweep_flux(c, grid, {0, run.jobs, true});
    record_sweep_failures(run, sweep);

    struct Band {
        double fraction;
        FluxSweep lo;
        FluxSweep hi;
    };
    std::vector<Band> bands;
    for (double b : run.cfg.chi.bands) {
        bands.push_back({b, spectra::sweep_flux(scale_couplings(c, 1.0 - b), grid, {0, run.jobs, true}),
                         spectra::sweep_flux(scale_couplings(c, 1.0 + b), grid, {0, run.jobs, true})});
        record_sweep_failures(run, bands.back().lo);
        record_sweep_failures(run, bands.back().hi);
    }

    io::Table t;
    t.columns = {"flux"};
    std::vector<std::vector<double>> columns;
    json crossings = json::object();
    for (std::size_t k : modes) {
        const std::string label = c.modes[k].label;
        const auto curve = spectra::dispersive_curve(sweep, k);
        t.columns.push_back("chi_" + label);
        columns.push_back(curve.chi);
        for (const auto& band : bands) {
            const auto lo = spectra::dispersive_curve(band.lo, k);
            const auto hi = spectra::dispersive_curve(band.hi, k);
            const auto pct = std::to_string(static_cast<int>(std::lround(band.fraction * 100.0)));
            std::vector<double> lower(grid.size());
            std::vector<double> upper(grid.size());
            for (std::size_t i = 0; i < grid.size(); ++i) {
                lower[i] = std::fmin(lo.chi[i], hi.chi[i]);
                upper[i] = std::fmax(lo.chi[i], hi.chi[i]);
                if (std::isnan(lo.chi[i]) || std::isnan(hi.chi[i])) {
                    lower[i] = upper[i] = kNaN;
                }
            }
            t.columns.push_back("chi_" + label + "_lo" + pct);
            columns.push_back(lower);
            t.columns.push_back("chi_" + label + "_hi" + pct);
            columns.push_back(upper);
        }
        std::vector<double> roots;
        try {
            roots = spectra::find_zero_crossings(curve, spectra::chi_evaluator(c, k));
        } catch (const Error& ex) {
            run.fail("zero crossings of chi_" + label, ex.what());
        }
        crossings[label] = roots;
        for (double r : roots) {
            std::cout << "chi_" << label << " zero crossing at flux " << digits17(r) << "\n";
        }
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!sweep.ok[i]) {
            continue;
        }
        std::vector<double> row{grid[i]};
        for (const auto& col : columns) {
            row.push_back(col[i]);
        }
        t.rows.push_back(std::move(row));
    }
    run.table("chi", t);
    io::write_json(run.path("chi_crossings.json"), run.meta, {{"zero_crossings", crossings}});
    if (flags.plot) {
        plot(run, "chi", "dispersive shifts (kHz)", t);
    }
    return run.finish();
}

// ---------------------------------------------------------------- t1-budget

int cmd_t1_budget(const CommonFlags& flags)
{
    Run run(flags, "t1-budget");
    LossParams loss = run.cfg.loss;
    if (!flags.convention.empty()) {
        if (flags.convention == "physical") {
            loss.purcell_convention = PurcellConvention::Physical;
        } else if (flags.convention == "literal") {
            loss.purcell_convention = PurcellConvention::Literal;
        } else {
            throw InvalidConfig("--convention for t1-budget must be physical or literal");
        }
    }
    const auto grid = run.cfg.sweep.values();
    loss::BudgetOptions opts;
    opts.channels = run.cfg.channels;
    opts.jobs = run.jobs;
    opts.allow_partial = true;
    const auto b = loss::t1_budget(run.cfg.circuit, loss, grid, opts);
    for (const auto& [flux, what] : b.failures) {
        run.fail(flux, what);
    }

    io::Table t;
    t.columns = {"flux",          "f01",           "gamma_diel",     "gamma_ind",    "gamma_qp",
                 "gamma_purcell_up", "gamma_purcell_down", "t1_diel_us", "t1_ind_us", "t1_qp_us",
                 "t1_purcell_us", "t1_total_us"};
    for (std::size_t i = 0; i < b.size(); ++i) {
        t.rows.push_back({b.flux[i], b.f01[i], b.gamma_diel[i], b.gamma_ind[i], b.gamma_qp[i], b.gamma_purcell_up[i],
                          b.gamma_purcell_down[i], b.t1_diel[i] * 1e6, b.t1_ind[i] * 1e6, b.t1_qp[i] * 1e6,
                          b.t1_purcell[i] * 1e6, b.t1_total[i] * 1e6});
    }
    io::Metadata meta = run.meta;
    meta.extra["loss"] = loss_to_json(loss).dump();
    run.table("t1_budget", t, meta);
    if (flags.plot) {
        io::Table lifetimes;
        lifetimes.columns = {"flux", "t1_diel_us", "t1_ind_us", "t1_qp_us", "t1_purcell_us", "t1_total_us"};
        for (const auto& row : t.rows) {
            lifetimes.rows.push_back({row[0], row[7], row[8], row[9], row[10], row[11]});
        }
        plot(run, "t1_budget", "T1 limits (us)", lifetimes);
    }
    return run.finish();
}

// ---------------------------------------------------------------- fit

struct Peak {
    std::string file;
    std::string sha256;
    double flux = 0.0;
    std::string transition;
    PeakFit fit;
};

std::vector<fs::path> trace_files(const std::string& dir)
{
    if (dir.empty()) {
        throw InvalidConfig("fit: no data directory (set fit.data_dir or pass --data)");
    }
    if (!fs::is_directory(dir)) {
        throw InvalidConfig("fit: data directory " + dir + " does not exist");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw InsufficientData("fit: no trace files (*.csv) in " + dir);
    }
    return files;
}

SpectroscopyTrace read_trace(const fs::path& file)
{
    const auto in = io::read_csv(file.string());
    SpectroscopyTrace t;
    const auto flux = in.header.find("flux");
    const auto transition = in.header.find("transition");
    if (flux == in.header.end()) {
        throw SchemaError("missing required header 'flux'");
    }
    if (transition == in.header.end()) {
        throw SchemaError("missing required header 'transition'");
    }
    t.flux = std::stod(flux->second);
    t.transition = transition->second;
    t.frequency = in.column("frequency");
    t.response = in.column("response");
    return t;
}

json fit_to_json(const FitResult& r)
{
    json params = json::object();
    json errors = json::object();
    for (std::size_t i = 0; i < r.names.size(); ++i) {
        params[r.names[i]] = r.params[i];
        errors[r.names[i]] = r.std_errors[i];
    }
    return {{"params", params},
            {"std_errors", errors},
            {"residual_rms_ghz", r.residual_rms},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"gradient_norm", r.gradient_norm},
            {"points_used", r.points_used},
            {"points_excluded", r.points_excluded}};
}

json lsq_to_json(const lsq::Options& o)
{
    return {{"max_iterations", o.max_iterations}, {"relative_step", o.relative_step},
            {"gradient_tol", o.gradient_tol},     {"step_tol", o.step_tol}};
}

int cmd_fit(const CommonFlags& flags, const std::string& data_override)
{
    Run run(flags, "fit");
    const auto& cfg = run.cfg;
    const std::string dir = data_override.empty() ? cfg.fit.data_dir : data_override;
    const auto files = trace_files(dir);

    // stage 1: peaks
    std::vector<Peak> peaks;
    json inputs = json::object();
    for (const auto& file : files) {
        const std::string name = file.filename().string();
        const std::string digest = io::sha256_file(file.string());
        inputs[name] = digest;
        try {
            const auto trace = read_trace(file);
            peaks.push_back({name, digest, trace.flux, trace.transition, fitting::fit_lorentzian(trace)});
        } catch (const Error& ex) {
            run.fail(name, ex.what());
        }
    }
    json peak_rows = json::array();
    for (const auto& p : peaks) {
        peak_rows.push_back({{"file", p.file},
                             {"sha256", p.sha256},
                             {"flux", p.flux},
                             {"transition", p.transition},
                             {"center", p.fit.center},
                             {"center_err", p.fit.center_err},
                             {"width", p.fit.width},
                             {"width_err", p.fit.width_err},
                             {"amplitude", p.fit.amplitude},
                             {"offset", p.fit.offset},
                             {"iterations", p.fit.iterations}});
    }
    io::write_json(run.path("peaks.json"), run.meta,
                   {{"data_dir", dir}, {"tolerances", {{"max_iterations", 200}, {"snr_min", 3.0}}}, {"peaks", peak_rows}});

    // stage 2: qubit energies from f01/f12
    std::vector<TransitionPoint> points;
    std::vector<BranchPoint> branches;
    for (const auto& p : peaks) {
        if (p.transition == "f01" || p.transition == "f12") {
            points.push_back({p.flux, parse_transition(p.transition), p.fit.center});
        } else {
            try {
                branches.push_back({p.flux, parse_label(p.transition), p.fit.center});
            } catch (const Error& ex) {
                run.fail(p.file, ex.what());
            }
        }
    }
    const FluxoniumParams init = cfg.fit.init.value_or(cfg.circuit.fluxonium);
    fitting::EnergyFitOptions eopts;
    eopts.exclusion_halfwidth = cfg.fit.exclusion_halfwidth;
    if (!points.empty()) {
        const auto [lo, hi] = std::minmax_element(points.begin(), points.end(),
                                                  [](const auto& a, const auto& b) { return a.flux < b.flux; });
        const auto freqs = mode_frequencies(cfg.circuit);
        eopts.exclude_near = fitting::crossing_fluxes(init, freqs, lo->flux, hi->flux);
    }
    const auto energies = fitting::fit_fluxonium_energies(points, init, eopts);
    json energy = fit_to_json(energies);
    energy["init"] = {{"e_j", init.e_j}, {"e_c", init.e_c}, {"e_l", init.e_l}};
    energy["excluded_near"] = eopts.exclude_near;
    energy["tolerances"] = lsq_to_json(eopts.lsq);
    energy["tolerances"]["exclusion_halfwidth"] = eopts.exclusion_halfwidth;
    energy["model_cutoff"] = eopts.cutoff;
    energy["inputs"] = inputs;
    io::write_json(run.path("energy_fit.json"), run.meta, energy);
    std::cout << "E_J = " << energies.value("e_j") << " GHz, E_C = " << energies.value("e_c")
              << " GHz, E_L = " << energies.value("e_l") << " GHz\n";

    // stage 3: couplings
    if (!cfg.fit.free_couplings.empty()) {
        CircuitParams circuit = cfg.circuit;
        circuit.fluxonium.e_j = energies.value("e_j");
        circuit.fluxonium.e_c = energies.value("e_c");
        circuit.fluxonium.e_l = energies.value("e_l");
        fitting::CouplingFitOptions copts;
        copts.qubit_levels = cfg.fit.qubit_levels;
        copts.mode_cutoff = cfg.fit.mode_cutoff;
        copts.jobs = run.jobs;
        try {
            const auto couplings = fitting::fit_couplings(branches, circuit, cfg.fit.free_couplings, copts);
            json body = fit_to_json(couplings);
            body["energies"] = energy["params"];
            body["tolerances"] = lsq_to_json(copts.lsq);
            body["model"] = {{"qubit_levels", copts.qubit_levels}, {"mode_cutoff", copts.mode_cutoff}};
            body["inputs"] = inputs;
            io::write_json(run.path("coupling_fit.json"), run.meta, body);
            for (std::size_t i = 0; i < couplings.names.size(); ++i) {
                std::cout << couplings.names[i] << " = " << couplings.params[i] * 1e3 << " MHz\n";
            }
        } catch (const Error& ex) {
            run.fail("coupling fit", ex.what());
        }
    }
    return run.finish();
}

// ---------------------------------------------------------------- timedomain

struct TimedomainFiles {
    std::string dispersion;
    std::string lifetime;
    std::string calibration;
};

EnvelopeConvention envelope(const std::string& flag)
{
    if (flag.empty() || flag == "normalized") {
        return EnvelopeConvention::Normalized;
    }
    if (flag == "literal") {
        return EnvelopeConvention::Literal;
    }
    throw InvalidConfig("--convention for timedomain must be normalized or literal");
}

json model_to_json(const CavityDispersionModel& m)
{
    return {{"detuning", m.detuning}, {"kerr", m.kerr}, {"chi_qc", m.chi_qc}, {"chi_nl", m.chi_nl}};
}

int cmd_timedomain(const CommonFlags& flags, const TimedomainFiles& override_files)
{
    Run run(flags, "timedomain");
    const auto& td = run.cfg.timedomain;
    const std::string dispersion = override_files.dispersion.empty() ? td.dispersion_file : override_files.dispersion;
    const std::string lifetime = override_files.lifetime.empty() ? td.lifetime_file : override_files.lifetime;
    const std::string calibration =
        override_files.calibration.empty() ? td.calibration_file : override_files.calibration;
    if (dispersion.empty() && lifetime.empty() && calibration.empty()) {
        throw InvalidConfig("timedomain: no input (set timedomain.dispersion_file, lifetime_file or calibration_file)");
    }

    std::optional<double> chi = td.chi_qc;
    double chi_err = td.chi_qc_err;
    if (!dispersion.empty()) {
        const auto in = io::read_csv(dispersion);
        const auto n = in.column("n");
        const auto g = in.column("delta_g");
        const auto d = in.column("delta_e_minus_g");
        std::vector<timedomain::DispersionPoint> ground;
        std::vector<timedomain::DispersionPoint> diff;
        for (std::size_t i = 0; i < n.size(); ++i) {
            ground.push_back({n[i], g[i]});
            diff.push_back({n[i], d[i]});
        }
        const auto fit = timedomain::regress_dispersion(ground, diff);
        io::Metadata meta = run.meta;
        meta.extra["input_sha256"] = io::sha256_file(dispersion);
        io::write_json(run.path("dispersion_fit.json"), meta,
                       {{"model_khz", model_to_json(fit.model)}, {"std_errors_khz", model_to_json(fit.std_errors)}});
        std::cout << "Delta = " << fit.model.detuning << " +- " << fit.std_errors.detuning << " kHz, chi_QC = "
                  << fit.model.chi_qc << " +- " << fit.std_errors.chi_qc << " kHz\n";
        if (!chi) {
            chi = fit.model.chi_qc;
            chi_err = fit.std_errors.chi_qc;
        }
    }
    if (!calibration.empty()) {
        if (!chi) {
            throw InvalidConfig("timedomain: photon calibration needs timedomain.chi_qc or a dispersion file");
        }
        const auto in = io::read_csv(calibration);
        const auto v2 = in.column("voltage_sq");
        const auto shift = in.column("qubit_shift");
        std::vector<timedomain::CalibrationPoint> pts;
        for (std::size_t i = 0; i < v2.size(); ++i) {
            pts.push_back({v2[i], shift[i]});
        }
        const auto cal = timedomain::calibrate_photon_number(pts, *chi, std::isfinite(chi_err) ? chi_err : 0.0);
        io::Metadata meta = run.meta;
        meta.extra["input_sha256"] = io::sha256_file(calibration);
        io::write_json(run.path("calibration.json"), meta,
                       {{"photons_per_v2", cal.scale}, {"photons_per_v2_err", cal.scale_err}, {"chi_qc_khz", *chi}});
    }
    if (!lifetime.empty()) {
        const auto in = io::read_csv(lifetime);
        const auto t = in.column("t");
        const auto br = in.column("beta_re");
        const auto bi = in.has("beta_im") ? in.column("beta_im") : std::vector<double>(t.size(), 0.0);
        const auto cr = in.column("c_re");
        const auto ci = in.column("c_im");
        std::vector<DecaySample> samples;
        for (std::size_t i = 0; i < t.size(); ++i) {
            samples.push_back({t[i], {br[i], bi[i]}, {cr[i], ci[i]}});
        }
        timedomain::LifetimeFitOptions opts;
        opts.convention = envelope(flags.convention);
        opts.t1_init = td.t1_init;
        const auto fit = timedomain::fit_cavity_lifetime(samples, td.alpha0_init, td.detuning_init, opts);
        io::Metadata meta = run.meta;
        meta.extra["input_sha256"] = io::sha256_file(lifetime);
        meta.extra["convention"] = opts.convention == EnvelopeConvention::Literal ? "literal" : "normalized";
        io::write_json(run.path("lifetime_fit.json"), meta,
                       {{"t1_us", fit.t1},
                        {"t1_err_us", fit.t1_err},
                        {"rate_per_us", fit.rate},
                        {"rate_err_per_us", fit.rate_err},
                        {"detuning_khz", fit.detuning},
                        {"detuning_err_khz", fit.detuning_err},
                        {"alpha0", {fit.alpha0.real(), fit.alpha0.imag()}},
                        {"iterations", fit.iterations},
                        {"converged", fit.converged}});
        io::Table trace;
        trace.columns = {"t", "im_alpha"};
        for (std::size_t i = 0; i < fit.times.size(); ++i) {
            trace.rows.push_back({fit.times[i], fit.im_alpha[i]});
        }
        run.table("lifetime_alpha", trace, meta);
        std::cout << "T1_C = " << fit.t1 << " +- " << fit.t1_err << " us\n";
    }
    return run.finish();
}

// ---------------------------------------------------------------- synth

int cmd_synth(const CommonFlags& flags)
{
    Run run(flags, "synth");
    const auto& cfg = run.cfg;
    const auto& sy = cfg.synth;
    const auto& c = cfg.circuit;
    const fs::path traces = run.out / "traces";
    fs::create_directories(traces);

    fitting::SynthesisOptions base;
    base.width = sy.trace_width;
    base.center_jitter = sy.center_jitter;
    base.noise_sigma = sy.noise_sigma;
    base.points = sy.trace_points;
    base.span_widths = sy.span_widths;

    std::uint64_t stream = 0;
    int count = 0;
    auto emit = [&](double flux, const std::vector<std::string>& transitions) {
        fitting::SynthesisOptions opts = base;
        opts.transitions = transitions;
        opts.seed = cfg.seed * 1000003ULL + stream++;
        const std::vector<double> one{flux};
        try {
            for (const auto& t : fitting::synthesize_spectroscopy(c, one, opts)) {
                io::Table table;
                table.columns = {"frequency", "response"};
                for (std::size_t i = 0; i < t.frequency.size(); ++i) {
                    table.rows.push_back({t.frequency[i], t.response[i]});
                }
                io::Metadata meta = run.meta;
                meta.extra["flux"] = digits17(t.flux);
                meta.extra["transition"] = t.transition;
                std::ostringstream name;
                name << "trace_" << std::setw(4) << std::setfill('0') << count++ << ".csv";
                io::write_csv((traces / name.str()).string(), meta, table);
            }
        } catch (const Error& ex) {
            run.fail(flux, ex.what());
        }
    };

    for (double flux : cfg.sweep.values()) {
        emit(flux, {"f01", "f12"});
    }
    const std::size_t axes = c.modes.size() + 1;
    const auto grid = cfg.sweep.values();
    json windows = json::array();
    for (std::size_t k = 0; k < c.modes.size(); ++k) {
        const std::vector<double> f{c.modes[k].frequency};
        StateLabel mode_label(axes, 0);
        mode_label[k + 1] = 1;
        const std::string qubit = to_string(spectra::unit_label(axes, {{0, 1}}));
        for (double x : fitting::crossing_fluxes(c.fluxonium, f, grid.front(), grid.back())) {
            const auto [f01, f12] = fitting::bare_transitions(c.fluxonium, x);
            if (std::abs(f01 - c.modes[k].frequency) > 1e-6) {
                continue;  // an f12 crossing
            }
            windows.push_back({{"mode", c.modes[k].label}, {"flux", x}});
            for (int i = 0; i < sy.window_points; ++i) {
                const double flux = x - sy.window_halfwidth + 2.0 * sy.window_halfwidth * i / (sy.window_points - 1);
                emit(flux, {qubit, to_string(mode_label)});
            }
        }
    }

    // time-domain fixtures with the published intercepts
    const CavityDispersionModel model{-24.21, 0.05, -15.6, 0.2};
    const double photons_per_v2 = 0.37;
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    io::Table disp;
    disp.columns = {"n", "delta_g", "delta_e_minus_g"};
    for (int i = 0; i < 12; ++i) {
        const double n = 0.5 + 19.5 * i / 11.0;
        const auto r = timedomain::rotation_frequencies(model, n);
        disp.rows.push_back({n, r.ground + 0.03 * normal(rng), r.excited - r.ground + 2.0 * normal(rng)});
    }
    io::write_csv(run.path("dispersion.csv"), run.meta, disp);

    io::Table cal;
    cal.columns = {"voltage_sq", "qubit_shift"};
    for (int i = 0; i < 10; ++i) {
        const double v2 = 1.0 + 29.0 * i / 9.0;
        cal.rows.push_back({v2, model.chi_qc * photons_per_v2 * v2 + 0.5 * normal(rng)});
    }
    io::write_csv(run.path("calibration.csv"), run.meta, cal);

    timedomain::DecaySynthesis decay;
    for (int i = 0; i < 20; ++i) {
        decay.times.push_back(15.0 * i);
    }
    for (int i = 0; i < 15; ++i) {
        decay.betas.push_back(0.1 + 0.1 * i);
    }
    decay.relative_noise = sy.decay_noise;
    decay.seed = cfg.seed;
    decay.convention = envelope(flags.convention);
    io::Table life;
    life.columns = {"t", "beta_re", "beta_im", "c_re", "c_im"};
    for (const auto& s : timedomain::synthesize_decay(decay)) {
        life.rows.push_back({s.t, s.beta.real(), s.beta.imag(), s.c_value.real(), s.c_value.imag()});
    }
    io::write_csv(run.path("lifetime.csv"), run.meta, life);

    json truth = {{"circuit", circuit_to_json(c)},
                  {"traces", count},
                  {"crossing_windows", windows},
                  {"synth",
                   {{"trace_width", sy.trace_width},
                    {"center_jitter", sy.center_jitter},
                    {"noise_sigma", sy.noise_sigma},
                    {"trace_points", sy.trace_points},
                    {"window_halfwidth", sy.window_halfwidth},
                    {"window_points", sy.window_points}}},
                  {"dispersion_model_khz", model_to_json(model)},
                  {"photons_per_v2", photons_per_v2},
                  {"decay",
                   {{"alpha0", {decay.alpha0.real(), decay.alpha0.imag()}},
                    {"detuning_khz", decay.detuning},
                    {"t1_us", decay.t1c},
                    {"relative_noise", decay.relative_noise}}}};
    io::write_json(run.path("truth.json"), run.meta, truth);
    std::cout << "wrote " << count << " traces to " << traces.string() << "\n";
    return run.finish();
}

void add_common(CLI::App* app, CommonFlags& flags, bool with_channels, const std::string& convention_help)
{
    app->add_option("--config,-c", flags.config, "config file (JSON)")->required()->check(CLI::ExistingFile);
    app->add_option("--out,-o", flags.out, "output directory (overrides output.dir)");
    app->add_option("--format", flags.format, "table format")->check(CLI::IsMember({"csv", "json"}));
    app->add_option("--jobs,-j", flags.jobs, "worker threads for flux sweeps")->check(CLI::PositiveNumber);
    app->add_option("--seed", flags.seed, "random seed (overrides config seed)");
    if (with_channels) {
        app->add_option("--channels", flags.channels, "comma-separated loss channels: diel,ind,qp,purcell,all,none");
    }
    if (!convention_help.empty()) {
        app->add_option("--convention", flags.convention, convention_help);
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Fluxonium-cavity modelling: spectra, dispersive shifts, T1 budgets, fits and time-domain analysis"};
    app.set_version_flag("--version", std::string(io::kToolVersion));
    app.require_subcommand(1);

    CommonFlags flags;
    std::string data_dir;
    TimedomainFiles td_files;

    auto* spectrum = app.add_subcommand("spectrum", "labelled transition frequencies over the flux sweep");
    add_common(spectrum, flags, false, "");
    spectrum->add_flag("--plot", flags.plot, "also write an SVG plot");

    auto* chi = app.add_subcommand("chi", "dispersive shifts, coupling bands and zero crossings");
    add_common(chi, flags, false, "");
    chi->add_flag("--plot", flags.plot, "also write an SVG plot");

    auto* budget = app.add_subcommand("t1-budget", "per-channel and total T1 over the flux sweep");
    add_common(budget, flags, true, "Purcell emission factor: physical or literal");
    budget->add_flag("--plot", flags.plot, "also write an SVG plot");

    auto* fit = app.add_subcommand("fit", "peak fits, qubit energies and couplings from spectroscopy traces");
    add_common(fit, flags, false, "");
    fit->add_option("--data", data_dir, "trace directory (overrides fit.data_dir)");

    auto* td = app.add_subcommand("timedomain", "dispersion regression, photon calibration and cavity lifetime");
    add_common(td, flags, false, "characteristic-function envelope: normalized or literal");
    td->add_option("--dispersion", td_files.dispersion, "CSV with n, delta_g, delta_e_minus_g");
    td->add_option("--lifetime", td_files.lifetime, "CSV with t, beta_re, [beta_im], c_re, c_im");
    td->add_option("--calibration", td_files.calibration, "CSV with voltage_sq, qubit_shift");

    auto* synth = app.add_subcommand("synth", "write a synthetic spectroscopy and time-domain dataset");
    add_common(synth, flags, false, "characteristic-function envelope: normalized or literal");

    CLI11_PARSE(app, argc, argv);

    try {
        if (spectrum->parsed()) {
            return cmd_spectrum(flags);
        }
        if (chi->parsed()) {
            return cmd_chi(flags);
        }
        if (budget->parsed()) {
            return cmd_t1_budget(flags);
        }
        if (fit->parsed()) {
            return cmd_fit(flags, data_dir);
        }
        if (td->parsed()) {
            return cmd_timedomain(flags, td_files);
        }
        if (synth->parsed()) {
            return cmd_synth(flags);
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
