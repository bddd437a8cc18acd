#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace fluxcav {

// Cavity rotation-frequency model, all in kHz.
struct CavityDispersionModel {
    double detuning = 0.0;
    double kerr = 0.0;
    double chi_qc = 0.0;
    double chi_nl = 0.0;
};

struct DecaySample {
    double t = 0.0;  // µs
    std::complex<double> beta;
    std::complex<double> c_value;
};

enum class EnvelopeConvention { Normalized, Literal };

namespace timedomain {

struct RotationFrequencies {
    double ground = 0.0;   // Δ_g, kHz
    double excited = 0.0;  // Δ_e, kHz
};

RotationFrequencies rotation_frequencies(const CavityDispersionModel& m, double n_photons);

// One (photon number, frequency) observation.
struct DispersionPoint {
    double n = 0.0;
    double value = 0.0;  // kHz
};

struct DispersionFit {
    CavityDispersionModel model;
    CavityDispersionModel std_errors;  // NaN where the series has no residual degrees of freedom
};

// Ordinary least squares on Δ_g(n) and (Δ_e - Δ_g)(n).
DispersionFit regress_dispersion(std::span<const DispersionPoint> ground, std::span<const DispersionPoint> difference);

struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double intercept_err = 0.0;
    double slope_err = 0.0;
};

LinearFit linear_regression(std::span<const DispersionPoint> points);

// Photons per unit drive-voltage squared, from qubit frequency shifts δf = χ_QC n
// with n = scale * V².
struct PhotonCalibration {
    double scale = 0.0;
    double scale_err = 0.0;
};

struct CalibrationPoint {
    double voltage_sq = 0.0;
    double qubit_shift = 0.0;  // kHz
};

PhotonCalibration calibrate_photon_number(std::span<const CalibrationPoint> points, double chi_qc,
                                          double chi_qc_err = 0.0);

// α0 exp(-i 2π Δ t - t / 2 T1), Δ in kHz, t and T1 in µs.
std::complex<double> coherent_decay(std::complex<double> alpha0, double detuning, double t1c, double t);

std::complex<double> characteristic_function(std::complex<double> beta, std::complex<double> alpha,
                                             EnvelopeConvention convention = EnvelopeConvention::Normalized);

struct LifetimeFit {
    double t1 = 0.0;  // µs; infinite when the fitted rate is not positive
    double t1_err = 0.0;
    double rate = 0.0;  // 1/T1, 1/µs
    double rate_err = 0.0;
    double detuning = 0.0;  // kHz
    double detuning_err = 0.0;
    std::complex<double> alpha0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> times;     // distinct sample times
    std::vector<double> im_alpha;  // per-time Im α in the real-β frame
};

struct LifetimeFitOptions {
    EnvelopeConvention convention = EnvelopeConvention::Normalized;
    double t1_init = 0.0;  // µs; 0 lets a coarse scan pick the start
};

// β must share one phase across samples; the fit runs in the frame where β is real.
LifetimeFit fit_cavity_lifetime(std::span<const DecaySample> samples, std::complex<double> alpha0_init,
                                double detuning_init, const LifetimeFitOptions& options = {});

struct DecaySynthesis {
    std::complex<double> alpha0{2.0, 0.0};
    double detuning = -24.21;
    double t1c = 210.0;
    std::vector<double> times;
    std::vector<double> betas;
    double relative_noise = 0.0;  // complex multiplicative Gaussian noise
    std::uint64_t seed = 1;
    EnvelopeConvention convention = EnvelopeConvention::Normalized;
};

std::vector<DecaySample> synthesize_decay(const DecaySynthesis& s);

} // namespace timedomain
} // namespace fluxcav
