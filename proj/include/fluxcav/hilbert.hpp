#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace fluxcav {

using OperatorMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;

// Energies and frequencies are value/h in GHz throughout; flux is Phi_ext/Phi_0.
struct FluxoniumParams {
    double e_j = 10.8;
    double e_c = 3.5;
    double e_l = 1.014;
    int cutoff = 110;  // harmonic-oscillator basis dimension
    int levels = 10;   // fluxonium eigenstates kept in composite systems

    void validate() const;

    // Zero-point fluctuations of the LC-mode phase and charge.
    double phase_zpf() const;
    double charge_zpf() const;

    // Junction capacitance e^2/2E_C [F] and superinductance phi0^2/E_L [H].
    double junction_capacitance() const;
    double inductance() const;
};

struct ModeCoupling {
    std::string label;
    double strength = 0.0;  // GHz
};

struct HarmonicModeParams {
    std::string label;
    double frequency = 0.0;          // GHz
    int cutoff = 5;
    double coupling_to_qubit = 0.0;  // inductive, GHz
    std::vector<ModeCoupling> coupling_to;  // capacitive, GHz

    void validate() const;
};

struct CircuitParams {
    FluxoniumParams fluxonium;
    std::vector<HarmonicModeParams> modes;
    double flux = 0.0;
    std::size_t max_dimension = 20000;

    void validate() const;

    std::size_t mode_index(const std::string& label) const;
    // levels x product of mode cutoffs
    std::size_t composite_dimension() const;
    std::vector<int> bare_dims() const;
};

// Table I device: fluxonium, readout resonator "R", storage cavity "C".
CircuitParams table_one_circuit();

// Adds the three higher cavity modes used to study the high sweet spot.
CircuitParams with_higher_cavity_modes(CircuitParams c);

namespace hilbert {

struct FluxoniumOperators {
    OperatorMatrix phase;
    OperatorMatrix charge;
};

RealMatrix lowering(int cutoff);

FluxoniumOperators build_fluxonium_operators(const FluxoniumParams& p);

// f(phase) for the real symmetric truncated phase operator, via its eigenbasis.
RealMatrix phase_function(const RealMatrix& phase, const std::function<double(double)>& f);

OperatorMatrix build_fluxonium_hamiltonian(const FluxoniumParams& p, double flux);

// sin(phase/2 + offset)
OperatorMatrix build_sin_half_phase(const FluxoniumParams& p, double offset);

// Offset conventions for the quasiparticle coupling operator.
inline constexpr double kQpOffsetLiteral = 0.5;
inline constexpr double kQpOffsetHalfPi = 1.5707963267948966;

// Bare fluxonium eigenproblem restricted to the lowest `levels` states.
struct FluxoniumSpectrum {
    Eigen::VectorXd energies;  // lowest levels, ascending
    RealMatrix vectors;        // cutoff x levels, in the oscillator basis
    RealMatrix phase;          // levels x levels phase operator in the eigenbasis
};

FluxoniumSpectrum solve_fluxonium(const FluxoniumParams& p, double flux, int levels);

RealMatrix kron(const RealMatrix& a, const RealMatrix& b);

// Embeds op acting on subsystem `which` of a product space with the given dims.
RealMatrix embed(const RealMatrix& op, const std::vector<int>& dims, std::size_t which);

struct CompositeSystem {
    OperatorMatrix hamiltonian;
    std::vector<int> dims;  // {fluxonium levels, mode cutoffs...}
    FluxoniumSpectrum qubit;

    // Embedded annihilation operator of mode `k` (0-based mode index).
    RealMatrix annihilation(std::size_t k) const;
    // Embedded fluxonium phase operator.
    RealMatrix qubit_phase() const;
    // Embeds an operator given in the fluxonium eigenbasis.
    RealMatrix embed_qubit(const RealMatrix& op) const;
};

CompositeSystem build_composite_system(const CircuitParams& c);
// Reuses a bare spectrum already solved at c.flux with c.fluxonium.levels states.
CompositeSystem build_composite_system(const CircuitParams& c, FluxoniumSpectrum qubit);

OperatorMatrix build_composite_hamiltonian(const CircuitParams& c);

// max |H - H^dag| <= rel_tol * max |H|
bool is_hermitian(const OperatorMatrix& h, double rel_tol = 1e-12);

} // namespace hilbert
} // namespace fluxcav
