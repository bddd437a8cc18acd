#pragma once

#include "fluxcav/hilbert.hpp"
#include "fluxcav/spectra.hpp"

#include <span>
#include <string>
#include <vector>

namespace fluxcav {

enum class PurcellConvention {
    // emission factor n_th(w01) + 1
    Physical,
    // emission factor n_th(-w01) + 1 as printed; negative under the Bose function
    Literal,
};

struct LossParams {
    double q_diel = 1.5e5;    // at diel_ref_ghz
    double q_ind = 3e7;
    double x_qp = 1.25e-6;
    double t_qubit = 0.045;   // K
    double t_res = 0.050;     // K
    double kappa_res = 922.0; // kHz, kappa/2pi
    double t_c_al = 1.2;      // K
    double diel_ref_ghz = 6.0;
    double diel_exponent = 0.7;
    double qp_offset = hilbert::kQpOffsetLiteral;  // rad, see build_sin_half_phase
    std::string readout_mode = "R";
    PurcellConvention purcell_convention = PurcellConvention::Physical;

    void validate() const;
    // Al gap 1.76 k_B T_c [J]
    double al_gap() const;
};

struct ChannelSet {
    bool dielectric = true;
    bool inductive = true;
    bool quasiparticle = true;
    bool purcell = true;

    bool any() const { return dielectric || inductive || quasiparticle || purcell; }
    static ChannelSet parse(const std::string& csv);
    static ChannelSet only_dielectric() { return {true, false, false, false}; }
};

struct ChannelRates {
    std::vector<double> flux;
    std::vector<double> f01;  // GHz, dressed
    std::vector<double> gamma_diel;  // 1/s
    std::vector<double> gamma_ind;
    std::vector<double> gamma_qp;
    std::vector<double> gamma_purcell_up;
    std::vector<double> gamma_purcell_down;
    std::vector<double> t1_diel;  // s, inf when channel contributes nothing
    std::vector<double> t1_ind;
    std::vector<double> t1_qp;
    std::vector<double> t1_purcell;
    std::vector<double> t1_total;
    std::vector<std::pair<double, std::string>> failures;

    std::size_t size() const { return flux.size(); }
};

namespace loss {

// coth(hbar w / 2 k_B T) for a frequency in GHz, stable for large arguments.
double thermal_coth(double f_ghz, double temperature);

// Bose occupation of a mode at f (GHz) and T (K); f may be negative.
double bose(double f_ghz, double temperature);

// K0(x) sinh(x), using the large-x asymptotic product above x = 30.
double k0_sinh(double x);

// Gamma = |<0|O|1>|^2 [S(w)+S(-w)] / hbar^2; matrix element in SI units of O.
double golden_rule_rate(double matrix_element, double spectral_density_sum);

// Spectral density sums, SI units; frequencies are f01 in GHz.
double dielectric_density(double f01_ghz, const LossParams& p, const FluxoniumParams& fp);
double inductive_density(double f01_ghz, const LossParams& p, const FluxoniumParams& fp);
double quasiparticle_density(double f01_ghz, const LossParams& p, const FluxoniumParams& fp);

// Dressed qubit x readout-resonator quantities at one flux point.
struct QubitResonatorPoint {
    double f01 = 0.0;              // GHz, E(1,0) - E(0,0)
    double phase_element = 0.0;    // |<00| phi |10>|
    double sin_element = 0.0;      // |<00| sin(phi/2 + offset) |10>|
    double lowering_element = 0.0; // |<00| a |10>|
    double raising_element = 0.0;  // |<10| a^dag |00>|
    double resonator_frequency = 0.0;
};

// Builds the qubit x readout subsystem of c (other modes dropped) and labels
// its dressed states. Throws LabeledStateUnavailable if |00> or |10> is ambiguous.
QubitResonatorPoint qubit_resonator_point(const CircuitParams& c, const LossParams& p);

struct PurcellRates {
    double up = 0.0;
    double down = 0.0;
};

PurcellRates purcell_rates(const QubitResonatorPoint& point, const LossParams& p);

struct PointRates {
    double f01 = 0.0;
    double diel = 0.0;
    double ind = 0.0;
    double qp = 0.0;
    double purcell_up = 0.0;
    double purcell_down = 0.0;

    double total() const { return diel + ind + qp + purcell_up + purcell_down; }
};

PointRates point_rates(const CircuitParams& c, const LossParams& p, const ChannelSet& channels);

struct BudgetOptions {
    ChannelSet channels;
    int jobs = 1;
    bool allow_partial = false;
};

ChannelRates t1_budget(const CircuitParams& c, const LossParams& p, std::span<const double> grid,
                       const BudgetOptions& options = {});

} // namespace loss
} // namespace fluxcav
