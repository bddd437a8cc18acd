#pragma once

#include "fluxcav/hilbert.hpp"
#include "fluxcav/least_squares.hpp"
#include "fluxcav/spectra.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fluxcav {

struct SpectroscopyTrace {
    std::vector<double> frequency;  // GHz, strictly increasing
    std::vector<double> response;
    double flux = 0.0;
    std::string transition;  // "f01", "f12" or a dressed branch label like "(0,1,0)"

    void validate() const;
};

struct PeakFit {
    double center = 0.0;  // GHz
    double width = 0.0;   // FWHM, GHz
    double amplitude = 0.0;
    double offset = 0.0;
    double center_err = 0.0;
    double width_err = 0.0;
    double amplitude_err = 0.0;
    double offset_err = 0.0;
    int iterations = 0;
};

enum class Transition { F01, F12 };

std::string to_string(Transition t);
Transition parse_transition(const std::string& text);

struct TransitionPoint {
    double flux = 0.0;
    Transition transition = Transition::F01;
    double frequency = 0.0;  // GHz
    double weight = 1.0;
};

// Dressed branch energy above the dressed ground state at one flux point.
struct BranchPoint {
    double flux = 0.0;
    StateLabel branch;
    double frequency = 0.0;  // GHz
    double weight = 1.0;
};

// Names one coupling constant in a CircuitParams: mode `mode` to the qubit
// (target empty) or to mode `target`.
struct CouplingRef {
    std::string mode;
    std::string target;

    std::string name() const;
    double& in(CircuitParams& c) const;
    double get(const CircuitParams& c) const;
};

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> params;
    std::vector<double> std_errors;
    double residual_rms = 0.0;  // GHz, unweighted
    int iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;
    std::vector<double> cost_history;
    std::size_t points_used = 0;
    std::size_t points_excluded = 0;
    Eigen::MatrixXd jacobian;

    double value(const std::string& name) const;
};

namespace fitting {

double lorentzian(double f, double center, double width, double amplitude, double offset);

PeakFit fit_lorentzian(const SpectroscopyTrace& trace);

struct EnergyFitOptions {
    lsq::Options lsq;
    int cutoff = 60;  // oscillator basis for the bare model inside the fit loop
    double f01_weight = 1.0;
    double f12_weight = 1.0;
    // Points within this distance of any listed flux are dropped.
    std::vector<double> exclude_near;
    double exclusion_halfwidth = 0.02;
};

// Bare fluxonium f01, f12 at one flux.
std::pair<double, double> bare_transitions(const FluxoniumParams& p, double flux);

FitResult fit_fluxonium_energies(std::span<const TransitionPoint> points, const FluxoniumParams& init,
                                 const EnergyFitOptions& options = {});

// Flux values in [lo, hi] where bare f01 or f12 equals one of mode_frequencies.
std::vector<double> crossing_fluxes(const FluxoniumParams& p, std::span<const double> mode_frequencies, double lo,
                                    double hi, int samples = 201);

struct CouplingFitOptions {
    lsq::Options lsq;
    int qubit_levels = 6;
    int mode_cutoff = 3;
    int jobs = 1;
};

// Least squares over the listed couplings using the composite model. `circuit`
// carries the fitted energies and the initial couplings.
FitResult fit_couplings(std::span<const BranchPoint> data, const CircuitParams& circuit,
                        std::span<const CouplingRef> free_couplings, const CouplingFitOptions& options = {});

// Dressed branch frequencies E(label) - E(0,...) for the given circuit.
std::vector<double> branch_frequencies(const CircuitParams& c, double flux, std::span<const StateLabel> branches,
                                       int n_levels = 0);

struct SynthesisOptions {
    double width = 0.002;          // FWHM, GHz
    double amplitude = 1.0;
    double offset = 0.0;
    double noise_sigma = 0.0;      // additive response noise
    double center_jitter = 0.0;    // Gaussian jitter of peak centers, GHz
    double span_widths = 10.0;     // trace half-span in widths
    int points = 200;
    std::uint64_t seed = 1;
    std::vector<std::string> transitions{"f01", "f12"};
};

// Lorentzian traces centred on dressed model transitions. "f01"/"f12" refer to
// the qubit ladder (1,0..) - (0,0..) and (2,0..) - (1,0..); other entries are
// branch labels measured from the dressed ground state.
std::vector<SpectroscopyTrace> synthesize_spectroscopy(const CircuitParams& c, std::span<const double> grid,
                                                       const SynthesisOptions& options);

} // namespace fitting
} // namespace fluxcav
