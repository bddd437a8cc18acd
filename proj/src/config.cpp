#include "fluxcav/config.hpp"

#include "fluxcav/errors.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace fluxcav {

using nlohmann::json;

void GridSpec::validate() const
{
    if (points < 1) {
        throw InvalidConfig("sweep.points must be >= 1");
    }
    if (!std::isfinite(start) || !std::isfinite(stop)) {
        throw InvalidConfig("sweep.start and sweep.stop must be finite");
    }
    if (points > 1 && !(start < stop)) {
        throw InvalidConfig("sweep.start must be < sweep.stop when sweep.points > 1");
    }
}

std::vector<double> GridSpec::values() const
{
    validate();
    if (points == 1) {
        return {start};
    }
    std::vector<double> v(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        v[static_cast<std::size_t>(i)] = start + (stop - start) * i / (points - 1);
    }
    v.back() = stop;
    return v;
}

namespace {

// Reads one JSON object, tracking which keys were consumed so leftovers can be
// reported as unknown fields.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path))
    {
        if (!node_.is_object()) {
            throw InvalidConfig("config field '" + path_ + "' must be an object");
        }
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    const json& raw(const std::string& key)
    {
        seen_.insert(key);
        return node_.at(key);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    double number(const std::string& key, double fallback)
    {
        if (!has(key)) {
            return fallback;
        }
        const auto& v = raw(key);
        if (!v.is_number()) {
            throw InvalidConfig("config field '" + field(key) + "' must be a number");
        }
        return v.get<double>();
    }

    int integer(const std::string& key, int fallback)
    {
        if (!has(key)) {
            return fallback;
        }
        const auto& v = raw(key);
        if (!v.is_number_integer()) {
            throw InvalidConfig("config field '" + field(key) + "' must be an integer");
        }
        return v.get<int>();
    }

    std::string text(const std::string& key, const std::string& fallback)
    {
        if (!has(key)) {
            return fallback;
        }
        const auto& v = raw(key);
        if (!v.is_string()) {
            throw InvalidConfig("config field '" + field(key) + "' must be a string");
        }
        return v.get<std::string>();
    }

    Section child(const std::string& key)
    {
        return Section(raw(key), field(key));
    }

    void finish() const
    {
        for (const auto& [key, value] : node_.items()) {
            if (!seen_.count(key)) {
                throw InvalidConfig("config field '" + field(key) + "' is not recognized");
            }
        }
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

// Runs a library validate() and prefixes its message with the config path.
template <typename Fn>
void checked(const std::string& path, Fn&& fn)
{
    try {
        fn();
    } catch (const InvalidConfig& ex) {
        throw InvalidConfig("config field '" + path + "': " + ex.what());
    }
}

FluxoniumParams read_fluxonium(Section s, FluxoniumParams p)
{
    p.e_j = s.number("e_j", p.e_j);
    p.e_c = s.number("e_c", p.e_c);
    p.e_l = s.number("e_l", p.e_l);
    p.cutoff = s.integer("cutoff", p.cutoff);
    p.levels = s.integer("levels", p.levels);
    s.finish();
    for (const auto& [name, value] : {std::pair{"e_j", p.e_j}, {"e_c", p.e_c}, {"e_l", p.e_l}}) {
        if (!(std::isfinite(value) && value > 0.0)) {
            throw InvalidConfig("config field '" + s.field(name) + "' must be > 0");
        }
    }
    checked(s.field("cutoff"), [&] { p.validate(); });
    return p;
}

HarmonicModeParams read_mode(Section s)
{
    HarmonicModeParams m;
    m.label = s.text("label", "");
    m.frequency = s.number("frequency", 0.0);
    m.cutoff = s.integer("cutoff", m.cutoff);
    m.coupling_to_qubit = s.number("coupling_to_qubit", 0.0);
    if (s.has("coupling_to")) {
        const auto& links = s.raw("coupling_to");
        if (!links.is_object()) {
            throw InvalidConfig("config field '" + s.field("coupling_to") + "' must map mode labels to strengths");
        }
        for (const auto& [label, value] : links.items()) {
            if (!value.is_number()) {
                throw InvalidConfig("config field '" + s.field("coupling_to") + "." + label + "' must be a number");
            }
            m.coupling_to.push_back({label, value.get<double>()});
        }
    }
    s.finish();
    checked(s.field(m.label.empty() ? "label" : "frequency"), [&] { m.validate(); });
    return m;
}

CircuitParams read_circuit(Section s)
{
    CircuitParams c;
    const std::string preset = s.text("preset", "table1");
    if (preset == "table1") {
        c = table_one_circuit();
    } else if (preset == "table1_higher_modes") {
        c = with_higher_cavity_modes(table_one_circuit());
    } else if (preset == "none") {
        c = CircuitParams{};
    } else {
        throw InvalidConfig("config field '" + s.field("preset") + "' must be table1, table1_higher_modes or none");
    }
    if (s.has("fluxonium")) {
        c.fluxonium = read_fluxonium(s.child("fluxonium"), c.fluxonium);
    }
    if (s.has("modes")) {
        const auto& modes = s.raw("modes");
        if (!modes.is_array()) {
            throw InvalidConfig("config field '" + s.field("modes") + "' must be an array");
        }
        c.modes.clear();
        for (std::size_t i = 0; i < modes.size(); ++i) {
            c.modes.push_back(read_mode(Section(modes[i], s.field("modes") + "[" + std::to_string(i) + "]")));
        }
    }
    c.max_dimension = static_cast<std::size_t>(s.integer("max_dimension", static_cast<int>(c.max_dimension)));
    s.finish();
    checked(s.field("modes"), [&] { c.validate(); });
    return c;
}

LossParams read_loss(Section s)
{
    LossParams p;
    p.q_diel = s.number("q_diel", p.q_diel);
    p.q_ind = s.number("q_ind", p.q_ind);
    p.x_qp = s.number("x_qp", p.x_qp);
    p.t_qubit = s.number("t_qubit", p.t_qubit);
    p.t_res = s.number("t_res", p.t_res);
    p.kappa_res = s.number("kappa_res", p.kappa_res);
    p.t_c_al = s.number("t_c_al", p.t_c_al);
    p.diel_ref_ghz = s.number("diel_ref_ghz", p.diel_ref_ghz);
    p.diel_exponent = s.number("diel_exponent", p.diel_exponent);
    if (s.has("qp_offset")) {
        const auto& v = s.raw("qp_offset");
        if (v.is_string() && v.get<std::string>() == "half_pi") {
            p.qp_offset = hilbert::kQpOffsetHalfPi;
        } else if (v.is_number()) {
            p.qp_offset = v.get<double>();
        } else {
            throw InvalidConfig("config field '" + s.field("qp_offset") + "' must be a number or \"half_pi\"");
        }
    }
    p.readout_mode = s.text("readout_mode", p.readout_mode);
    const std::string conv = s.text("purcell_convention", "physical");
    if (conv == "physical") {
        p.purcell_convention = PurcellConvention::Physical;
    } else if (conv == "literal") {
        p.purcell_convention = PurcellConvention::Literal;
    } else {
        throw InvalidConfig("config field '" + s.field("purcell_convention") + "' must be physical or literal");
    }
    s.finish();
    try {
        p.validate();
    } catch (const InvalidConfig& ex) {
        // messages read "loss.<name> ..."
        throw InvalidConfig(std::string("config field ") + ex.what());
    }
    return p;
}

std::string resolve(const std::filesystem::path& base, const std::string& path)
{
    if (path.empty()) {
        return path;
    }
    const std::filesystem::path p(path);
    return p.is_absolute() ? path : (base / p).lexically_normal().string();
}

std::vector<std::string> string_list(Section& s, const std::string& key)
{
    std::vector<std::string> out;
    const auto& v = s.raw(key);
    if (!v.is_array()) {
        throw InvalidConfig("config field '" + s.field(key) + "' must be an array of strings");
    }
    for (const auto& item : v) {
        if (!item.is_string()) {
            throw InvalidConfig("config field '" + s.field(key) + "' must be an array of strings");
        }
        out.push_back(item.get<std::string>());
    }
    return out;
}

std::pair<int, int> line_column(const std::string& text, std::size_t byte)
{
    int line = 1;
    int column = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

} // namespace

RunConfig parse_config(const std::string& text, const std::string& source)
{
    json doc;
    try {
        doc = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& ex) {
        const auto [line, column] = line_column(text, ex.byte > 0 ? ex.byte - 1 : 0);
        throw InvalidConfig(source + ":" + std::to_string(line) + ":" + std::to_string(column)
                            + ": syntax error: " + ex.what());
    }

    RunConfig cfg;
    cfg.source = source;
    cfg.text = text;
    const std::filesystem::path base = std::filesystem::path(source).parent_path();
    try {
        Section root(doc, "");
        const int version = root.integer("schema_version", -1);
        if (version != kConfigSchemaVersion) {
            throw InvalidConfig("config field 'schema_version' must be " + std::to_string(kConfigSchemaVersion));
        }
        cfg.circuit = root.has("circuit") ? read_circuit(root.child("circuit")) : table_one_circuit();
        if (root.has("loss")) {
            cfg.loss = read_loss(root.child("loss"));
        }
        if (root.has("channels")) {
            const auto names = string_list(root, "channels");
            std::string csv;
            for (const auto& n : names) {
                csv += n + ",";
            }
            checked("channels", [&] { cfg.channels = ChannelSet::parse(csv); });
        }
        if (root.has("sweep")) {
            auto s = root.child("sweep");
            cfg.sweep.start = s.number("start", cfg.sweep.start);
            cfg.sweep.stop = s.number("stop", cfg.sweep.stop);
            cfg.sweep.points = s.integer("points", cfg.sweep.points);
            s.finish();
        }
        cfg.sweep.validate();
        if (root.has("output")) {
            auto s = root.child("output");
            cfg.out_dir = s.text("dir", cfg.out_dir);
            cfg.format = s.text("format", cfg.format);
            s.finish();
        }
        if (cfg.format != "csv" && cfg.format != "json") {
            throw InvalidConfig("config field 'output.format' must be csv or json");
        }
        cfg.seed = static_cast<std::uint64_t>(root.integer("seed", 1));
        if (root.has("chi")) {
            auto s = root.child("chi");
            if (s.has("modes")) {
                cfg.chi.modes = string_list(s, "modes");
            }
            if (s.has("bands")) {
                cfg.chi.bands.clear();
                for (const auto& b : s.raw("bands")) {
                    if (!b.is_number() || !(b.get<double>() > 0.0 && b.get<double>() < 1.0)) {
                        throw InvalidConfig("config field 'chi.bands' entries must be numbers in (0, 1)");
                    }
                    cfg.chi.bands.push_back(b.get<double>());
                }
            }
            s.finish();
            for (const auto& m : cfg.chi.modes) {
                checked("chi.modes", [&] {
                    try {
                        cfg.circuit.mode_index(m);
                    } catch (const NotFound& ex) {
                        throw InvalidConfig(ex.what());
                    }
                });
            }
        }
        if (root.has("fit")) {
            auto s = root.child("fit");
            cfg.fit.data_dir = resolve(base, s.text("data_dir", ""));
            if (s.has("init")) {
                cfg.fit.init = read_fluxonium(s.child("init"), cfg.circuit.fluxonium);
            }
            cfg.fit.exclusion_halfwidth = s.number("exclusion_halfwidth", cfg.fit.exclusion_halfwidth);
            cfg.fit.qubit_levels = s.integer("qubit_levels", cfg.fit.qubit_levels);
            cfg.fit.mode_cutoff = s.integer("mode_cutoff", cfg.fit.mode_cutoff);
            if (s.has("free_couplings")) {
                for (const auto& item : s.raw("free_couplings")) {
                    if (!item.is_array() || item.size() != 2 || !item[0].is_string() || !item[1].is_string()) {
                        throw InvalidConfig("config field 'fit.free_couplings' entries must be [mode, target] "
                                            "with target \"\" for the qubit");
                    }
                    CouplingRef ref{item[0].get<std::string>(), item[1].get<std::string>()};
                    try {
                        ref.get(cfg.circuit);
                    } catch (const Error& ex) {
                        throw InvalidConfig("config field 'fit.free_couplings': " + std::string(ex.what()));
                    }
                    cfg.fit.free_couplings.push_back(ref);
                }
            }
            s.finish();
        }
        if (root.has("timedomain")) {
            auto s = root.child("timedomain");
            auto& td = cfg.timedomain;
            td.dispersion_file = resolve(base, s.text("dispersion_file", ""));
            td.lifetime_file = resolve(base, s.text("lifetime_file", ""));
            td.calibration_file = resolve(base, s.text("calibration_file", ""));
            if (s.has("alpha0_init")) {
                const auto& a = s.raw("alpha0_init");
                if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
                    throw InvalidConfig("config field 'timedomain.alpha0_init' must be [re, im]");
                }
                td.alpha0_init = {a[0].get<double>(), a[1].get<double>()};
            }
            td.detuning_init = s.number("detuning_init", td.detuning_init);
            td.t1_init = s.number("t1_init", td.t1_init);
            if (s.has("chi_qc")) {
                td.chi_qc = s.number("chi_qc", 0.0);
            }
            td.chi_qc_err = s.number("chi_qc_err", td.chi_qc_err);
            s.finish();
        }
        if (root.has("synth")) {
            auto s = root.child("synth");
            auto& sy = cfg.synth;
            sy.trace_width = s.number("trace_width", sy.trace_width);
            sy.center_jitter = s.number("center_jitter", sy.center_jitter);
            sy.noise_sigma = s.number("noise_sigma", sy.noise_sigma);
            sy.trace_points = s.integer("trace_points", sy.trace_points);
            sy.span_widths = s.number("span_widths", sy.span_widths);
            sy.window_halfwidth = s.number("window_halfwidth", sy.window_halfwidth);
            sy.window_points = s.integer("window_points", sy.window_points);
            sy.decay_noise = s.number("decay_noise", sy.decay_noise);
            s.finish();
            if (!(sy.trace_width > 0.0) || sy.trace_points < 8 || sy.window_points < 3 || !(sy.window_halfwidth > 0.0)
                || sy.center_jitter < 0.0 || sy.noise_sigma < 0.0 || sy.decay_noise < 0.0) {
                throw InvalidConfig("config field 'synth' has out-of-range values (widths > 0, trace_points >= 8, "
                                    "window_points >= 3, noise >= 0)");
            }
        }
        root.finish();
    } catch (const json::exception& ex) {
        throw InvalidConfig(source + ": " + ex.what());
    }
    return cfg;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidConfig("cannot read config file " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

json circuit_to_json(const CircuitParams& c)
{
    json modes = json::array();
    for (const auto& m : c.modes) {
        json links = json::object();
        for (const auto& l : m.coupling_to) {
            links[l.label] = l.strength;
        }
        modes.push_back({{"label", m.label},
                         {"frequency", m.frequency},
                         {"cutoff", m.cutoff},
                         {"coupling_to_qubit", m.coupling_to_qubit},
                         {"coupling_to", links}});
    }
    return {{"fluxonium",
             {{"e_j", c.fluxonium.e_j},
              {"e_c", c.fluxonium.e_c},
              {"e_l", c.fluxonium.e_l},
              {"cutoff", c.fluxonium.cutoff},
              {"levels", c.fluxonium.levels}}},
            {"modes", modes}};
}

json loss_to_json(const LossParams& p)
{
    return {{"q_diel", p.q_diel},
            {"q_ind", p.q_ind},
            {"x_qp", p.x_qp},
            {"t_qubit", p.t_qubit},
            {"t_res", p.t_res},
            {"kappa_res", p.kappa_res},
            {"t_c_al", p.t_c_al},
            {"diel_ref_ghz", p.diel_ref_ghz},
            {"diel_exponent", p.diel_exponent},
            {"qp_offset", p.qp_offset},
            {"readout_mode", p.readout_mode},
            {"purcell_convention", p.purcell_convention == PurcellConvention::Physical ? "physical" : "literal"}};
}

} // namespace fluxcav
