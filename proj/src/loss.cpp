#include "fluxcav/loss.hpp"

#include "fluxcav/constants.hpp"
#include "fluxcav/errors.hpp"
#include "fluxcav/parallel.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace fluxcav {

namespace c = constants;

void LossParams::validate() const
{
    auto positive = [](double v, const char* name) {
        if (!(std::isfinite(v) && v > 0.0)) {
            throw InvalidConfig(std::string("loss.") + name + " must be > 0");
        }
    };
    positive(q_diel, "q_diel");
    positive(q_ind, "q_ind");
    positive(x_qp, "x_qp");
    positive(t_qubit, "t_qubit");
    positive(t_res, "t_res");
    positive(kappa_res, "kappa_res");
    positive(t_c_al, "t_c_al");
    positive(diel_ref_ghz, "diel_ref_ghz");
    if (!std::isfinite(diel_exponent) || !std::isfinite(qp_offset)) {
        throw InvalidConfig("loss.diel_exponent and loss.qp_offset must be finite");
    }
}

double LossParams::al_gap() const { return 1.76 * c::k_b * t_c_al; }

ChannelSet ChannelSet::parse(const std::string& csv)
{
    ChannelSet set{false, false, false, false};
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty() || item == "none") {
            continue;
        }
        if (item == "all") {
            set = ChannelSet{};
        } else if (item == "diel" || item == "dielectric") {
            set.dielectric = true;
        } else if (item == "ind" || item == "inductive") {
            set.inductive = true;
        } else if (item == "qp" || item == "quasiparticle") {
            set.quasiparticle = true;
        } else if (item == "purcell") {
            set.purcell = true;
        } else {
            throw InvalidConfig("unknown loss channel '" + item + "'");
        }
    }
    return set;
}

namespace loss {

namespace {

// hbar |w| / 2 k_B T
double half_thermal_ratio(double f_ghz, double temperature)
{
    return c::h * std::abs(f_ghz) * c::ghz / (2.0 * c::k_b * temperature);
}

} // namespace

double thermal_coth(double f_ghz, double temperature)
{
    const double x = half_thermal_ratio(f_ghz, temperature);
    if (x > 20.0) {
        return 1.0;
    }
    return 1.0 / std::tanh(x);
}

double bose(double f_ghz, double temperature)
{
    return 1.0 / std::expm1(c::h * f_ghz * c::ghz / (c::k_b * temperature));
}

double k0_sinh(double x)
{
    if (x <= 0.0) {
        return 0.0;
    }
    if (x <= 30.0) {
        return std::cyl_bessel_k(0.0, x) * std::sinh(x);
    }
    // K0(x) e^x = sqrt(pi/2x) sum_k t_k, t_k = t_{k-1} * -(2k-1)^2 / (8 k x)
    double sum = 1.0;
    double term = 1.0;
    for (int k = 1; k < 200; ++k) {
        const double next = term * -((2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k * x);
        if (std::abs(next) >= std::abs(term)) {
            break;  // asymptotic series started diverging
        }
        term = next;
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) {
            break;
        }
    }
    const double k0_scaled = std::sqrt(c::pi / (2.0 * x)) * sum;
    return k0_scaled * 0.5 * (-std::expm1(-2.0 * x));
}

double golden_rule_rate(double matrix_element, double spectral_density_sum)
{
    if (!std::isfinite(matrix_element) || !std::isfinite(spectral_density_sum)) {
        throw ContractViolation("golden_rule_rate: non-finite input");
    }
    if (spectral_density_sum < 0.0) {
        throw ContractViolation("golden_rule_rate: negative spectral density");
    }
    return matrix_element * matrix_element * spectral_density_sum / (c::hbar * c::hbar);
}

double dielectric_density(double f01_ghz, const LossParams& p, const FluxoniumParams& fp)
{
    const double w = c::ghz_to_angular(f01_ghz);
    const double q = p.q_diel * std::pow(p.diel_ref_ghz / std::abs(f01_ghz), p.diel_exponent);
    return 2.0 * c::hbar * w * w * fp.junction_capacitance() / q * thermal_coth(f01_ghz, p.t_qubit);
}

double inductive_density(double f01_ghz, const LossParams& p, const FluxoniumParams& fp)
{
    return c::hbar / (fp.inductance() * p.q_ind) * thermal_coth(f01_ghz, p.t_qubit);
}

double quasiparticle_density(double f01_ghz, const LossParams& p, const FluxoniumParams& fp)
{
    if (!(f01_ghz > 0.0)) {
        throw ContractViolation("quasiparticle_density: frequency must be positive");
    }
    const double w = c::ghz_to_angular(f01_ghz);
    const double gap = p.al_gap();
    const double x = half_thermal_ratio(f01_ghz, p.t_qubit);
    const double re_y = std::sqrt(2.0 / c::pi) * 8.0 * c::ghz_to_joule(fp.e_j) / (c::r_k * gap)
        * std::pow(2.0 * gap / (c::hbar * w), 1.5) * p.x_qp * std::sqrt(x) * k0_sinh(x);
    return 2.0 * c::hbar * w * re_y * thermal_coth(f01_ghz, p.t_qubit);
}

QubitResonatorPoint qubit_resonator_point(const CircuitParams& circuit, const LossParams& p)
{
    CircuitParams sub;
    sub.fluxonium = circuit.fluxonium;
    sub.flux = circuit.flux;
    sub.max_dimension = circuit.max_dimension;
    HarmonicModeParams readout = circuit.modes.at(circuit.mode_index(p.readout_mode));
    readout.coupling_to.clear();
    sub.modes.push_back(readout);

    const auto sys = hilbert::build_composite_system(sub);
    const auto sol = spectra::label_dressed_states(
        spectra::diagonalize(sys.hamiltonian, spectra::count_low_excitation_states(sys.dims)), sys.dims);

    auto column = [&](const StateLabel& label) {
        auto idx = sol.find(label);
        if (!idx || sol.ambiguous[*idx]) {
            throw LabeledStateUnavailable("purcell: dressed state " + to_string(label) + " unavailable at flux "
                                          + std::to_string(circuit.flux));
        }
        return Eigen::VectorXcd(sol.states.col(static_cast<Eigen::Index>(*idx)));
    };
    const Eigen::VectorXcd ground = column({0, 0});
    const Eigen::VectorXcd excited = column({1, 0});

    const auto complex_op = [](const RealMatrix& m) { return m.cast<std::complex<double>>(); };
    const RealMatrix sin_cutoff = hilbert::build_sin_half_phase(sub.fluxonium, p.qp_offset).real();
    const RealMatrix sin_levels = sys.qubit.vectors.transpose() * sin_cutoff * sys.qubit.vectors;
    const RealMatrix a = sys.annihilation(0);

    QubitResonatorPoint point;
    point.f01 = sol.energy({1, 0}) - sol.energy({0, 0});
    point.phase_element = std::abs(ground.dot(complex_op(sys.qubit_phase()) * excited));
    point.sin_element = std::abs(ground.dot(complex_op(sys.embed_qubit(sin_levels)) * excited));
    point.lowering_element = std::abs(ground.dot(complex_op(a) * excited));
    point.raising_element = std::abs(excited.dot(complex_op(a.transpose()) * ground));
    point.resonator_frequency = readout.frequency;
    return point;
}

PurcellRates purcell_rates(const QubitResonatorPoint& point, const LossParams& p)
{
    const double p0 = -std::expm1(-c::h * point.resonator_frequency * c::ghz / (c::k_b * p.t_res));
    const double kappa = 2.0 * c::pi * p.kappa_res * 1e3;
    const double n_th = bose(point.f01, p.t_res);
    const double emission = p.purcell_convention == PurcellConvention::Physical ? n_th + 1.0
                                                                                 : bose(-point.f01, p.t_res) + 1.0;
    PurcellRates r;
    r.up = p0 * kappa * n_th * point.raising_element * point.raising_element;
    r.down = p0 * kappa * emission * point.lowering_element * point.lowering_element;
    return r;
}

PointRates point_rates(const CircuitParams& circuit, const LossParams& p, const ChannelSet& channels)
{
    const auto qr = qubit_resonator_point(circuit, p);
    const auto& fp = circuit.fluxonium;
    PointRates r;
    r.f01 = qr.f01;
    if (channels.dielectric) {
        r.diel = golden_rule_rate(c::phi0 * qr.phase_element, dielectric_density(qr.f01, p, fp));
    }
    if (channels.inductive) {
        r.ind = golden_rule_rate(c::phi0 * qr.phase_element, inductive_density(qr.f01, p, fp));
    }
    if (channels.quasiparticle) {
        r.qp = golden_rule_rate(c::phi0 * qr.sin_element, quasiparticle_density(qr.f01, p, fp));
    }
    if (channels.purcell) {
        const auto pr = purcell_rates(qr, p);
        r.purcell_up = pr.up;
        r.purcell_down = pr.down;
    }
    return r;
}

ChannelRates t1_budget(const CircuitParams& circuit, const LossParams& p, std::span<const double> grid,
                       const BudgetOptions& options)
{
    if (!options.channels.any()) {
        throw InvalidConfig("no channels enabled");
    }
    if (grid.empty()) {
        throw InvalidConfig("t1_budget: empty flux grid");
    }
    circuit.validate();
    p.validate();

    const std::size_t n = grid.size();
    std::vector<PointRates> rates(n);
    std::vector<std::string> errors(n);
    std::vector<char> ok(n, 0);
    parallel_for(n, options.jobs, [&](std::size_t i) {
        try {
            CircuitParams point = circuit;
            point.flux = grid[i];
            rates[i] = point_rates(point, p, options.channels);
            ok[i] = 1;
        } catch (const std::exception& ex) {
            errors[i] = ex.what();
        }
    });

    const double inf = std::numeric_limits<double>::infinity();
    auto limit = [inf](double rate) { return rate != 0.0 ? 1.0 / rate : inf; };
    ChannelRates out;
    for (std::size_t i = 0; i < n; ++i) {
        if (!ok[i]) {
            if (!options.allow_partial) {
                throw SweepPointError(grid[i], errors[i]);
            }
            out.failures.emplace_back(grid[i], errors[i]);
            continue;
        }
        const auto& r = rates[i];
        out.flux.push_back(grid[i]);
        out.f01.push_back(r.f01);
        out.gamma_diel.push_back(r.diel);
        out.gamma_ind.push_back(r.ind);
        out.gamma_qp.push_back(r.qp);
        out.gamma_purcell_up.push_back(r.purcell_up);
        out.gamma_purcell_down.push_back(r.purcell_down);
        out.t1_diel.push_back(limit(r.diel));
        out.t1_ind.push_back(limit(r.ind));
        out.t1_qp.push_back(limit(r.qp));
        out.t1_purcell.push_back(limit(r.purcell_up + r.purcell_down));
        out.t1_total.push_back(limit(r.total()));
    }
    return out;
}

} // namespace loss
} // namespace fluxcav
