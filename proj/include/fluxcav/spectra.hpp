#pragma once

#include "fluxcav/hilbert.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fluxcav {

// Bare occupation tuple (n_Q, n_mode1, n_mode2, ...).
using StateLabel = std::vector<int>;

std::string to_string(const StateLabel& label);
StateLabel parse_label(const std::string& text);

struct EigenSolution {
    Eigen::VectorXd energies;  // ascending, GHz
    Eigen::MatrixXcd states;   // columns are eigenvectors
    std::vector<int> dims;     // bare product dims, empty when unlabeled
    std::vector<StateLabel> labels;
    std::vector<double> overlap_quality;
    std::vector<bool> ambiguous;

    bool labeled() const { return !labels.empty(); }
    std::optional<std::size_t> find(const StateLabel& label) const;
    double energy(const StateLabel& label) const;
};

struct FluxSweep {
    std::vector<double> flux_grid;
    std::vector<EigenSolution> solutions;
    // flux points that failed when partial sweeps are allowed
    std::vector<std::pair<double, std::string>> failures;
    std::vector<bool> ok;
};

struct DispersiveCurve {
    std::vector<double> flux_grid;
    std::vector<double> chi;  // kHz, NaN where unavailable
    std::vector<double> zero_crossings;
};

namespace spectra {

inline constexpr double kAmbiguousOverlap = 0.25;

EigenSolution diagonalize(const OperatorMatrix& h, int n_levels);

// Greedy assignment of bare labels in descending order of overlap.
EigenSolution label_dressed_states(EigenSolution sol, std::span<const int> bare_dims);

// Number of bare product states with total excitation <= max_excitation.
int count_low_excitation_states(std::span<const int> bare_dims, int max_excitation = 4);

// Labeled solution for a circuit at c.flux with the default retained level count.
EigenSolution solve_circuit(const CircuitParams& c, int n_levels = 0);
// As above with the bare fluxonium spectrum supplied (see build_composite_system).
EigenSolution solve_circuit(const CircuitParams& c, hilbert::FluxoniumSpectrum qubit, int n_levels = 0);

double transition_frequency(const EigenSolution& sol, const StateLabel& from, const StateLabel& to);

// (1,1) - (1,0) - (0,1) + (0,0) along the given axes, in kHz.
double dispersive_shift(const EigenSolution& sol, std::size_t qubit_axis, std::size_t mode_axis);

StateLabel unit_label(std::size_t n_axes, std::initializer_list<std::pair<std::size_t, int>> entries);

struct SweepOptions {
    int n_levels = 0;  // 0: default retained count
    int jobs = 1;
    bool allow_partial = false;
};

FluxSweep sweep_flux(const CircuitParams& c, std::span<const double> grid, const SweepOptions& options = {});

// chi for mode index `mode` (0-based) along the sweep; NaN where labels are unavailable.
DispersiveCurve dispersive_curve(const FluxSweep& sweep, std::size_t mode);

struct ZeroCrossingOptions {
    double chi_tol_khz = 0.01;
    double flux_tol = 1e-9;
    int max_iterations = 200;
};

// Bisection-refined roots of chi between sign-changing neighbours. Brackets
// whose |chi| grows under refinement are resonances (poles) and are dropped.
std::vector<double> find_zero_crossings(const DispersiveCurve& curve,
                                        const std::function<double(double)>& chi_at,
                                        const ZeroCrossingOptions& options = {});

// chi(flux) evaluated by fresh diagonalization of the circuit.
std::function<double(double)> chi_evaluator(const CircuitParams& c, std::size_t mode, int n_levels = 0);

struct AvoidedCrossing {
    double flux = 0.0;
    double gap = 0.0;  // GHz
};

// Minimum of |E_a - E_b| over the sweep window, refined by golden-section search.
AvoidedCrossing find_avoided_crossing(const CircuitParams& c, const FluxSweep& sweep, const StateLabel& branch_a,
                                      const StateLabel& branch_b, int n_levels = 0, double flux_tol = 1e-10);

} // namespace spectra
} // namespace fluxcav
