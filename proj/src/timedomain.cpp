#include "fluxcav/timedomain.hpp"

#include "fluxcav/constants.hpp"
#include "fluxcav/errors.hpp"
#include "fluxcav/least_squares.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

namespace fluxcav::timedomain {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Phase 2π Δ t for Δ in kHz and t in µs.
double rotation_phase(double detuning, double t) { return 2.0 * constants::pi * detuning * t * 1e-3; }

void require_distinct(std::span<const DispersionPoint> points, const char* what)
{
    if (points.size() < 2) {
        throw SingularRegression(std::string(what) + ": need at least 2 points");
    }
    for (const auto& p : points) {
        if (!std::isfinite(p.n) || !std::isfinite(p.value)) {
            throw InvalidConfig(std::string(what) + ": non-finite point");
        }
    }
    const auto [lo, hi] = std::minmax_element(points.begin(), points.end(),
                                              [](const auto& a, const auto& b) { return a.n < b.n; });
    if (lo->n == hi->n) {
        throw SingularRegression(std::string(what) + ": photon numbers are all equal");
    }
}

} // namespace

RotationFrequencies rotation_frequencies(const CavityDispersionModel& m, double n_photons)
{
    if (!(n_photons >= 0.0)) {
        throw ContractViolation("rotation_frequencies: photon number must be >= 0");
    }
    RotationFrequencies r;
    r.ground = m.detuning - 2.0 * m.kerr * n_photons;
    r.excited = m.detuning - m.chi_qc - (2.0 * m.kerr + 2.0 * m.chi_nl) * n_photons;
    return r;
}

LinearFit linear_regression(std::span<const DispersionPoint> points)
{
    require_distinct(points, "linear_regression");
    const auto m = static_cast<double>(points.size());
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (const auto& p : points) {
        mean_x += p.n;
        mean_y += p.value;
    }
    mean_x /= m;
    mean_y /= m;
    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& p : points) {
        sxx += (p.n - mean_x) * (p.n - mean_x);
        sxy += (p.n - mean_x) * (p.value - mean_y);
    }
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = mean_y - fit.slope * mean_x;
    if (points.size() > 2) {
        double ssr = 0.0;
        for (const auto& p : points) {
            const double r = p.value - (fit.intercept + fit.slope * p.n);
            ssr += r * r;
        }
        const double s2 = ssr / (m - 2.0);
        fit.slope_err = std::sqrt(s2 / sxx);
        fit.intercept_err = std::sqrt(s2 * (1.0 / m + mean_x * mean_x / sxx));
    } else {
        fit.slope_err = kNaN;
        fit.intercept_err = kNaN;
    }
    return fit;
}

DispersionFit regress_dispersion(std::span<const DispersionPoint> ground, std::span<const DispersionPoint> difference)
{
    const auto g = linear_regression(ground);
    const auto d = linear_regression(difference);
    DispersionFit out;
    out.model.detuning = g.intercept;
    out.model.kerr = -0.5 * g.slope;
    out.model.chi_qc = -d.intercept;
    out.model.chi_nl = -0.5 * d.slope;
    out.std_errors.detuning = g.intercept_err;
    out.std_errors.kerr = 0.5 * g.slope_err;
    out.std_errors.chi_qc = d.intercept_err;
    out.std_errors.chi_nl = 0.5 * d.slope_err;
    return out;
}

PhotonCalibration calibrate_photon_number(std::span<const CalibrationPoint> points, double chi_qc, double chi_qc_err)
{
    if (!(std::isfinite(chi_qc) && chi_qc != 0.0)) {
        throw InvalidConfig("calibrate_photon_number: chi_qc must be finite and nonzero");
    }
    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& p : points) {
        sxx += p.voltage_sq * p.voltage_sq;
        sxy += p.voltage_sq * p.qubit_shift;
    }
    if (points.empty() || sxx == 0.0) {
        throw SingularRegression("calibrate_photon_number: no nonzero drive amplitudes");
    }
    const double slope = sxy / sxx;
    double slope_err = kNaN;
    if (points.size() > 1) {
        double ssr = 0.0;
        for (const auto& p : points) {
            const double r = p.qubit_shift - slope * p.voltage_sq;
            ssr += r * r;
        }
        slope_err = std::sqrt(ssr / static_cast<double>(points.size() - 1) / sxx);
    }
    PhotonCalibration c;
    c.scale = slope / chi_qc;
    c.scale_err = std::hypot(slope_err / chi_qc, slope * chi_qc_err / (chi_qc * chi_qc));
    return c;
}

std::complex<double> coherent_decay(std::complex<double> alpha0, double detuning, double t1c, double t)
{
    if (!(t1c > 0.0) || !(t >= 0.0)) {
        throw ContractViolation("coherent_decay: need t1c > 0 and t >= 0");
    }
    return alpha0 * std::exp(std::complex<double>(-t / (2.0 * t1c), -rotation_phase(detuning, t)));
}

std::complex<double> characteristic_function(std::complex<double> beta, std::complex<double> alpha,
                                             EnvelopeConvention convention)
{
    const double b2 = std::norm(beta);
    const double envelope = convention == EnvelopeConvention::Normalized ? std::exp(-0.25 * b2) : std::exp(0.25 * b2);
    return envelope * std::exp(std::complex<double>(0.0, -std::imag(alpha * std::conj(beta))));
}

namespace {

// Decay model with rate instead of lifetime so that a vanishing rate stays representable.
std::complex<double> decay_with_rate(std::complex<double> alpha0, double detuning, double rate, double t)
{
    return alpha0 * std::exp(std::complex<double>(-0.5 * rate * t, -rotation_phase(detuning, t)));
}

// Im α from phases of C(β) at one time: maximize sum_j Re(u_j e^{i β_j y}) with u_j the unit phasor.
double extract_im_alpha(const std::vector<std::pair<double, std::complex<double>>>& row, double y_max)
{
    double beta_max = 0.0;
    for (const auto& [b, c] : row) {
        beta_max = std::max(beta_max, std::abs(b));
    }
    auto score = [&](double y) {
        double s = 0.0;
        for (const auto& [b, c] : row) {
            const double mag = std::abs(c);
            if (mag > 0.0) {
                s += std::real(c / mag * std::exp(std::complex<double>(0.0, b * y)));
            }
        }
        return s;
    };
    const double step = 0.1 / beta_max;
    double best_y = 0.0;
    double best = score(0.0);
    for (double y = -y_max; y <= y_max; y += step) {
        const double s = score(y);
        if (s > best) {
            best = s;
            best_y = y;
        }
    }
    // golden-section refinement of the maximum
    double lo = best_y - step;
    double hi = best_y + step;
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = score(x1);
    double f2 = score(x2);
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(best_y)); ++it) {
        if (f1 > f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = score(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = score(x2);
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace

LifetimeFit fit_cavity_lifetime(std::span<const DecaySample> samples, std::complex<double> alpha0_init,
                                double detuning_init, const LifetimeFitOptions& options)
{
    std::complex<double> beta_sq_sum = 0.0;
    double beta_max = 0.0;
    for (const auto& s : samples) {
        if (!std::isfinite(s.t) || s.t < 0.0 || !std::isfinite(std::abs(s.beta)) || !std::isfinite(std::abs(s.c_value))) {
            throw InvalidConfig("fit_cavity_lifetime: invalid sample");
        }
        beta_sq_sum += s.beta * s.beta;
        beta_max = std::max(beta_max, std::abs(s.beta));
    }
    if (beta_max == 0.0) {
        throw InsufficientData("fit_cavity_lifetime: all probe displacements are zero");
    }
    // Common β phase; rotating β and α together leaves C unchanged.
    const double theta = 0.5 * std::arg(beta_sq_sum);
    const std::complex<double> unrotate = std::polar(1.0, -theta);

    std::map<double, std::vector<std::pair<double, std::complex<double>>>> by_time;
    std::vector<std::tuple<double, double, std::complex<double>>> flat;
    for (const auto& s : samples) {
        const std::complex<double> b = s.beta * unrotate;
        if (std::abs(b.imag()) > 1e-9 * beta_max) {
            throw InvalidConfig("fit_cavity_lifetime: probe displacements must share one phase");
        }
        by_time[s.t].emplace_back(b.real(), s.c_value);
        flat.emplace_back(s.t, b.real(), s.c_value);
    }
    if (by_time.size() < 4) {
        throw InsufficientData("fit_cavity_lifetime: need samples at >= 4 distinct times");
    }

    LifetimeFit out;
    const double y_max = 2.0 * std::abs(alpha0_init) + 1.0;
    for (const auto& [t, row] : by_time) {
        out.times.push_back(t);
        out.im_alpha.push_back(extract_im_alpha(row, y_max));
    }
    const auto nt = static_cast<Eigen::Index>(out.times.size());
    const Eigen::Map<const Eigen::VectorXd> tv(out.times.data(), nt);
    const Eigen::Map<const Eigen::VectorXd> yv(out.im_alpha.data(), nt);
    const double span = std::max(tv.maxCoeff() - tv.minCoeff(), 1e-12);

    // Stage 1: coarse scan of (Δ, Γ) with α0 solved linearly.
    // Im(α0 e^{-iωt - Γt/2}) = e^{-Γt/2} (Im α0 cos ωt - Re α0 sin ωt)
    auto linear_alpha = [&](double detuning, double rate, double* cost) {
        Eigen::MatrixXd a(nt, 2);
        for (Eigen::Index i = 0; i < nt; ++i) {
            const double env = std::exp(-0.5 * rate * tv(i));
            const double ph = rotation_phase(detuning, tv(i));
            a(i, 0) = -env * std::sin(ph);
            a(i, 1) = env * std::cos(ph);
        }
        const Eigen::Vector2d x = a.colPivHouseholderQr().solve(yv);
        *cost = (a * x - yv).squaredNorm();
        return std::complex<double>(x(0), x(1));
    };
    std::vector<double> rates{0.0};
    for (int k = 0; k <= 24; ++k) {
        rates.push_back(std::pow(10.0, -1.3 + 2.6 * k / 24.0) / span);
    }
    if (options.t1_init > 0.0) {
        rates.push_back(1.0 / options.t1_init);
    }
    const double d_step = 0.02 / (span * 1e-3);
    double best_cost = std::numeric_limits<double>::infinity();
    double best_detuning = detuning_init;
    double best_rate = 0.0;
    std::complex<double> best_alpha = alpha0_init * unrotate;
    for (int j = -25; j <= 25; ++j) {
        const double detuning = detuning_init + j * d_step;
        for (double rate : rates) {
            double cost = 0.0;
            const auto alpha = linear_alpha(detuning, rate, &cost);
            if (cost < best_cost) {
                best_cost = cost;
                best_detuning = detuning;
                best_rate = rate;
                best_alpha = alpha;
            }
        }
    }

    // Stage 2: nonlinear fit of the per-time Im α trace.
    auto trace_residuals = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(nt);
        for (Eigen::Index i = 0; i < nt; ++i) {
            r(i) = std::imag(decay_with_rate({p(0), p(1)}, p(2), p(3), tv(i))) - yv(i);
        }
        return r;
    };
    Eigen::VectorXd x(4);
    x << best_alpha.real(), best_alpha.imag(), best_detuning, best_rate;
    x = lsq::levenberg_marquardt(trace_residuals, x).params;

    // Stage 3: refinement against every complex sample.
    const auto ns = static_cast<Eigen::Index>(flat.size());
    auto sample_residuals = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(2 * ns);
        for (Eigen::Index i = 0; i < ns; ++i) {
            const auto& [t, b, c] = flat[static_cast<std::size_t>(i)];
            const auto alpha = decay_with_rate({p(0), p(1)}, p(2), p(3), t);
            const auto diff = characteristic_function(b, alpha, options.convention) - c;
            r(2 * i) = diff.real();
            r(2 * i + 1) = diff.imag();
        }
        return r;
    };
    const auto fit = lsq::levenberg_marquardt(sample_residuals, x);

    out.alpha0 = std::complex<double>(fit.params(0), fit.params(1)) * std::polar(1.0, theta);
    out.detuning = fit.params(2);
    out.detuning_err = fit.std_errors(2);
    out.rate = fit.params(3);
    out.rate_err = fit.std_errors(3);
    out.t1 = out.rate > 0.0 ? 1.0 / out.rate : std::numeric_limits<double>::infinity();
    out.t1_err = out.rate > 0.0 ? out.rate_err / (out.rate * out.rate) : std::numeric_limits<double>::infinity();
    out.iterations = fit.iterations;
    out.converged = fit.converged;
    return out;
}

std::vector<DecaySample> synthesize_decay(const DecaySynthesis& s)
{
    std::mt19937_64 rng(s.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<DecaySample> out;
    for (double t : s.times) {
        const auto alpha = std::isinf(s.t1c) ? s.alpha0 * std::polar(1.0, -rotation_phase(s.detuning, t))
                                             : coherent_decay(s.alpha0, s.detuning, s.t1c, t);
        for (double b : s.betas) {
            auto c = characteristic_function(b, alpha, s.convention);
            if (s.relative_noise > 0.0) {
                const double re = normal(rng);
                const double im = normal(rng);
                c *= std::complex<double>(1.0 + s.relative_noise * re, s.relative_noise * im);
            }
            out.push_back({t, std::complex<double>(b, 0.0), c});
        }
    }
    return out;
}

} // namespace fluxcav::timedomain
