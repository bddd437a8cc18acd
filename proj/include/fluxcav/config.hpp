#pragma once

#include "fluxcav/fitting.hpp"
#include "fluxcav/hilbert.hpp"
#include "fluxcav/loss.hpp"
#include "fluxcav/timedomain.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace fluxcav {

inline constexpr int kConfigSchemaVersion = 1;

struct GridSpec {
    double start = -0.6;
    double stop = 0.6;
    int points = 121;

    void validate() const;
    std::vector<double> values() const;
};

struct ChiSection {
    std::vector<std::string> modes;  // empty: every mode
    std::vector<double> bands{0.10, 0.15};  // relative coupling variations for band columns
};

struct FitSection {
    std::string data_dir;
    std::optional<FluxoniumParams> init;  // defaults to circuit.fluxonium
    double exclusion_halfwidth = 0.02;
    std::vector<CouplingRef> free_couplings;
    int qubit_levels = 6;
    int mode_cutoff = 3;
};

struct TimedomainSection {
    std::string dispersion_file;  // columns n, delta_g, delta_e_minus_g
    std::string lifetime_file;    // columns t, beta_re, [beta_im], c_re, c_im
    std::complex<double> alpha0_init{2.0, 0.0};
    double detuning_init = 0.0;  // kHz
    double t1_init = 0.0;        // µs
    std::optional<double> chi_qc;  // kHz, for photon calibration
    double chi_qc_err = 0.0;
    std::string calibration_file;  // columns voltage_sq, qubit_shift
};

// Fixture generation for `fluxcav synth`.
struct SynthSection {
    double trace_width = 0.002;       // FWHM, GHz
    double center_jitter = 0.001;     // GHz
    double noise_sigma = 0.0;         // additive response noise
    int trace_points = 200;
    double span_widths = 10.0;
    double window_halfwidth = 0.002;  // flux window around each qubit-mode crossing
    int window_points = 11;
    double decay_noise = 0.0;         // relative noise on characteristic-function samples
};

struct RunConfig {
    CircuitParams circuit;
    LossParams loss;
    ChannelSet channels;
    GridSpec sweep;
    std::string out_dir = "out";
    std::string format = "csv";
    std::uint64_t seed = 1;
    ChiSection chi;
    FitSection fit;
    TimedomainSection timedomain;
    SynthSection synth;
    std::string source;  // path the config was read from
    std::string text;    // raw config text, hashed into output metadata
};

// Parses and validates a config document. Errors are InvalidConfig naming the
// field (e.g. "circuit.fluxonium.e_j") or, for syntax errors, line and column.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

nlohmann::json circuit_to_json(const CircuitParams& c);
nlohmann::json loss_to_json(const LossParams& p);

} // namespace fluxcav
