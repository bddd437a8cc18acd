#include "fluxcav/fitting.hpp"

#include "fluxcav/errors.hpp"
#include "fluxcav/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

namespace fluxcav {

void SpectroscopyTrace::validate() const
{
    if (frequency.size() != response.size()) {
        throw InvalidConfig("trace: frequency and response lengths differ");
    }
    if (frequency.size() < 8) {
        throw InvalidConfig("trace: need at least 8 samples");
    }
    for (std::size_t i = 0; i < frequency.size(); ++i) {
        if (!std::isfinite(frequency[i]) || !std::isfinite(response[i])) {
            throw InvalidConfig("trace: non-finite sample");
        }
        if (i > 0 && !(frequency[i] > frequency[i - 1])) {
            throw InvalidConfig("trace: frequency must be strictly increasing");
        }
    }
}

std::string to_string(Transition t) { return t == Transition::F01 ? "f01" : "f12"; }

Transition parse_transition(const std::string& text)
{
    if (text == "f01") {
        return Transition::F01;
    }
    if (text == "f12") {
        return Transition::F12;
    }
    throw InvalidConfig("unknown transition '" + text + "' (expected f01 or f12)");
}

std::string CouplingRef::name() const { return "g_" + mode + "_" + (target.empty() ? std::string("qubit") : target); }

double& CouplingRef::in(CircuitParams& c) const
{
    auto& m = c.modes.at(c.mode_index(mode));
    if (target.empty()) {
        return m.coupling_to_qubit;
    }
    for (auto& link : m.coupling_to) {
        if (link.label == target) {
            return link.strength;
        }
    }
    auto& other = c.modes.at(c.mode_index(target));
    for (auto& link : other.coupling_to) {
        if (link.label == mode) {
            return link.strength;
        }
    }
    throw NotFound("no coupling between " + mode + " and " + target);
}

double CouplingRef::get(const CircuitParams& c) const
{
    CircuitParams copy = c;
    return in(copy);
}

double FitResult::value(const std::string& name) const
{
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) {
            return params[i];
        }
    }
    throw NotFound("fit result has no parameter " + name);
}

namespace fitting {

namespace {

double median(std::vector<double> v)
{
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) {
        return *mid;
    }
    const double upper = *mid;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

FitResult to_fit_result(const lsq::Result& r, std::vector<std::string> names, const Eigen::VectorXd& unweighted)
{
    FitResult out;
    out.names = std::move(names);
    out.params.assign(r.params.data(), r.params.data() + r.params.size());
    out.std_errors.assign(r.std_errors.data(), r.std_errors.data() + r.std_errors.size());
    out.residual_rms = unweighted.size() ? std::sqrt(unweighted.squaredNorm() / static_cast<double>(unweighted.size())) : 0.0;
    out.iterations = r.iterations;
    out.converged = r.converged;
    out.gradient_norm = r.gradient_norm;
    out.cost_history = r.cost_history;
    out.jacobian = r.jacobian;
    return out;
}

} // namespace

double lorentzian(double f, double center, double width, double amplitude, double offset)
{
    const double hw = 0.5 * width;
    const double d = f - center;
    return offset + amplitude * hw * hw / (d * d + hw * hw);
}

PeakFit fit_lorentzian(const SpectroscopyTrace& trace)
{
    trace.validate();
    const auto& f = trace.frequency;
    const auto& y = trace.response;
    const std::size_t n = f.size();

    const double base = median(y);
    std::vector<double> abs_dev(n);
    std::size_t peak = 0;
    for (std::size_t i = 0; i < n; ++i) {
        abs_dev[i] = std::abs(y[i] - base);
        if (abs_dev[i] > abs_dev[peak]) {
            peak = i;
        }
    }
    const double noise = 1.4826 * median(abs_dev);
    const double amp0 = y[peak] - base;
    if (amp0 == 0.0 || std::abs(amp0) < 3.0 * noise) {
        throw NoPeak("fit_lorentzian: no peak above 3 sigma at flux " + std::to_string(trace.flux));
    }

    // half-maximum crossings either side of the extremum
    const double half = 0.5 * std::abs(amp0);
    std::size_t left = peak;
    while (left > 0 && abs_dev[left] > half) {
        --left;
    }
    std::size_t right = peak;
    while (right + 1 < n && abs_dev[right] > half) {
        ++right;
    }
    const double min_step = (f.back() - f.front()) / static_cast<double>(n - 1);
    const double width0 = std::max(f[right] - f[left], min_step);

    const Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<Eigen::Index>(n));
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));
    const double fc = f[peak];
    // parameters: center offset from fc, width, amplitude, offset
    auto residuals = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < r.size(); ++i) {
            r(i) = lorentzian(fv(i), fc + p(0), std::abs(p(1)), p(2), p(3)) - yv(i);
        }
        return r;
    };
    lsq::Jacobian jacobian = [&](const Eigen::VectorXd& p) {
        Eigen::MatrixXd j(static_cast<Eigen::Index>(n), 4);
        const double hw = 0.5 * std::abs(p(1));
        const double sign = p(1) < 0.0 ? -1.0 : 1.0;
        for (Eigen::Index i = 0; i < j.rows(); ++i) {
            const double d = fv(i) - (fc + p(0));
            const double den = d * d + hw * hw;
            const double shape = hw * hw / den;
            j(i, 0) = p(2) * hw * hw * 2.0 * d / (den * den);
            j(i, 1) = sign * p(2) * hw * d * d / (den * den);
            j(i, 2) = shape;
            j(i, 3) = 1.0;
        }
        return j;
    };

    Eigen::VectorXd x0(4);
    x0 << 0.0, width0, amp0, base;
    lsq::Options opts;
    opts.max_iterations = 200;
    opts.gradient_tol = 1e-8;
    const auto r = lsq::levenberg_marquardt(residuals, x0, opts, jacobian);
    const double rms = std::sqrt(r.residuals.squaredNorm() / static_cast<double>(n));
    if (!r.converged && r.iterations >= opts.max_iterations) {
        throw Error("fit_lorentzian: no convergence within 200 iterations at flux " + std::to_string(trace.flux));
    }
    if (std::abs(r.params(2)) < 3.0 * rms) {
        throw NoPeak("fit_lorentzian: fitted amplitude below 3 sigma at flux " + std::to_string(trace.flux));
    }

    PeakFit out;
    out.center = fc + r.params(0);
    out.width = std::abs(r.params(1));
    out.amplitude = r.params(2);
    out.offset = r.params(3);
    out.center_err = r.std_errors(0);
    out.width_err = r.std_errors(1);
    out.amplitude_err = r.std_errors(2);
    out.offset_err = r.std_errors(3);
    out.iterations = r.iterations;
    return out;
}

std::pair<double, double> bare_transitions(const FluxoniumParams& p, double flux)
{
    const auto s = hilbert::solve_fluxonium(p, flux, 3);
    return {s.energies(1) - s.energies(0), s.energies(2) - s.energies(1)};
}

FitResult fit_fluxonium_energies(std::span<const TransitionPoint> points, const FluxoniumParams& init,
                                 const EnergyFitOptions& options)
{
    std::vector<TransitionPoint> kept;
    std::size_t excluded = 0;
    for (const auto& pt : points) {
        const bool near = std::any_of(options.exclude_near.begin(), options.exclude_near.end(), [&](double x) {
            return std::abs(pt.flux - x) <= options.exclusion_halfwidth;
        });
        if (near) {
            ++excluded;
        } else {
            kept.push_back(pt);
        }
    }
    if (kept.size() < 3) {
        throw InsufficientData("fit_fluxonium_energies: need at least 3 points");
    }
    const auto [lo, hi] = std::minmax_element(kept.begin(), kept.end(),
                                              [](const auto& a, const auto& b) { return a.flux < b.flux; });
    if (hi->flux - lo->flux < 0.2) {
        throw InsufficientData("fit_fluxonium_energies: points must span at least 0.2 in flux");
    }
    init.validate();

    std::vector<double> fluxes;
    for (const auto& pt : kept) {
        fluxes.push_back(pt.flux);
    }
    std::sort(fluxes.begin(), fluxes.end());
    fluxes.erase(std::unique(fluxes.begin(), fluxes.end()), fluxes.end());
    std::vector<std::size_t> slot(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        slot[i] = static_cast<std::size_t>(std::lower_bound(fluxes.begin(), fluxes.end(), kept[i].flux) - fluxes.begin());
    }

    auto model = [&](const Eigen::VectorXd& x) {
        FluxoniumParams p = init;
        p.e_j = x(0);
        p.e_c = x(1);
        p.e_l = x(2);
        p.cutoff = options.cutoff;
        p.levels = std::min(p.levels, p.cutoff);
        p.validate();
        std::vector<std::pair<double, double>> at(fluxes.size());
        for (std::size_t i = 0; i < fluxes.size(); ++i) {
            at[i] = bare_transitions(p, fluxes[i]);
        }
        Eigen::VectorXd out(static_cast<Eigen::Index>(kept.size()));
        for (std::size_t i = 0; i < kept.size(); ++i) {
            const auto& t = at[slot[i]];
            out(static_cast<Eigen::Index>(i)) = (kept[i].transition == Transition::F01 ? t.first : t.second)
                - kept[i].frequency;
        }
        return out;
    };
    Eigen::VectorXd weights(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const double w = kept[i].weight
            * (kept[i].transition == Transition::F01 ? options.f01_weight : options.f12_weight);
        weights(static_cast<Eigen::Index>(i)) = std::sqrt(w);
    }
    auto residuals = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(model(x).cwiseProduct(weights)); };

    Eigen::VectorXd x0(3);
    x0 << init.e_j, init.e_c, init.e_l;
    const auto r = lsq::levenberg_marquardt(residuals, x0, options.lsq);
    FitResult out = to_fit_result(r, {"e_j", "e_c", "e_l"}, model(r.params));
    out.points_used = kept.size();
    out.points_excluded = excluded;
    return out;
}

std::vector<double> crossing_fluxes(const FluxoniumParams& p, std::span<const double> mode_frequencies, double lo,
                                    double hi, int samples)
{
    FluxoniumParams q = p;
    q.cutoff = std::min(q.cutoff, 60);
    q.levels = std::min(q.levels, q.cutoff);
    std::vector<double> grid(static_cast<std::size_t>(samples));
    std::vector<std::pair<double, double>> f(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(samples - 1);
        f[i] = bare_transitions(q, grid[i]);
    }
    std::vector<double> out;
    for (double mode : mode_frequencies) {
        for (int which = 0; which < 2; ++which) {
            auto value = [&](std::size_t i) { return (which == 0 ? f[i].first : f[i].second) - mode; };
            for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
                const double a = value(i);
                const double b = value(i + 1);
                if (a == 0.0) {
                    out.push_back(grid[i]);
                } else if (a * b < 0.0) {
                    double x0 = grid[i];
                    double x1 = grid[i + 1];
                    double f0 = a;
                    for (int it = 0; it < 60; ++it) {
                        const double xm = 0.5 * (x0 + x1);
                        const auto t = bare_transitions(q, xm);
                        const double fm = (which == 0 ? t.first : t.second) - mode;
                        if ((fm < 0.0) == (f0 < 0.0)) {
                            x0 = xm;
                            f0 = fm;
                        } else {
                            x1 = xm;
                        }
                    }
                    out.push_back(0.5 * (x0 + x1));
                }
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> branch_frequencies(const CircuitParams& c, double flux, std::span<const StateLabel> branches,
                                       int n_levels)
{
    CircuitParams point = c;
    point.flux = flux;
    const auto sol = spectra::solve_circuit(point, n_levels);
    const double ground = sol.energy(StateLabel(sol.dims.size(), 0));
    std::vector<double> out;
    for (const auto& b : branches) {
        out.push_back(sol.energy(b) - ground);
    }
    return out;
}

namespace {

CircuitParams reduced_model(const CircuitParams& c, const CouplingFitOptions& options)
{
    CircuitParams r = c;
    r.fluxonium.levels = std::min(options.qubit_levels, r.fluxonium.cutoff);
    for (auto& m : r.modes) {
        m.cutoff = std::min(m.cutoff, options.mode_cutoff);
    }
    return r;
}

} // namespace

FitResult fit_couplings(std::span<const BranchPoint> data, const CircuitParams& circuit,
                        std::span<const CouplingRef> free_couplings, const CouplingFitOptions& options)
{
    if (free_couplings.empty()) {
        throw InvalidConfig("fit_couplings: no free couplings");
    }
    if (data.size() < free_couplings.size() + 1) {
        throw InsufficientData("fit_couplings: too few data points");
    }
    const CircuitParams base = reduced_model(circuit, options);
    base.validate();

    std::vector<double> fluxes;
    std::vector<StateLabel> branches;
    for (const auto& d : data) {
        fluxes.push_back(d.flux);
        if (std::find(branches.begin(), branches.end(), d.branch) == branches.end()) {
            branches.push_back(d.branch);
        }
    }
    std::sort(fluxes.begin(), fluxes.end());
    fluxes.erase(std::unique(fluxes.begin(), fluxes.end()), fluxes.end());

    // The window must contain an interior minimum of some branch-pair separation.
    {
        bool bracketed = false;
        for (std::size_t a = 0; a < branches.size() && !bracketed; ++a) {
            for (std::size_t b = a + 1; b < branches.size() && !bracketed; ++b) {
                std::vector<double> pair_flux;
                for (const auto& d : data) {
                    if (d.branch == branches[a] || d.branch == branches[b]) {
                        pair_flux.push_back(d.flux);
                    }
                }
                std::sort(pair_flux.begin(), pair_flux.end());
                pair_flux.erase(std::unique(pair_flux.begin(), pair_flux.end()), pair_flux.end());
                if (pair_flux.size() < 3) {
                    continue;
                }
                std::vector<double> sep;
                const std::vector<StateLabel> pair{branches[a], branches[b]};
                for (double x : pair_flux) {
                    try {
                        const auto f = branch_frequencies(base, x, pair);
                        sep.push_back(std::abs(f[0] - f[1]));
                    } catch (const Error&) {
                        sep.push_back(std::numeric_limits<double>::infinity());
                    }
                }
                const auto k = static_cast<std::size_t>(std::min_element(sep.begin(), sep.end()) - sep.begin());
                bracketed = k > 0 && k + 1 < sep.size();
            }
        }
        if (!bracketed) {
            throw InsufficientData("fit_couplings: data window lacks a minimum-gap point");
        }
    }

    // data indices per flux, ascending in measured frequency
    std::vector<std::vector<std::size_t>> by_flux(fluxes.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto fi = static_cast<std::size_t>(
            std::lower_bound(fluxes.begin(), fluxes.end(), data[i].flux) - fluxes.begin());
        by_flux[fi].push_back(i);
    }
    for (auto& members : by_flux) {
        std::sort(members.begin(), members.end(),
                  [&](std::size_t a, std::size_t b) { return data[a].frequency < data[b].frequency; });
    }

    // the energies are fixed, so bare fluxonium spectra are solved once per flux
    std::vector<hilbert::FluxoniumSpectrum> bare(fluxes.size());
    parallel_for(fluxes.size(), options.jobs, [&](std::size_t i) {
        bare[i] = hilbert::solve_fluxonium(base.fluxonium, fluxes[i], base.fluxonium.levels);
    });
    std::vector<CircuitParams> c_at(fluxes.size());

    auto model = [&](const Eigen::VectorXd& x) {
        CircuitParams c = base;
        for (std::size_t k = 0; k < free_couplings.size(); ++k) {
            free_couplings[k].in(c) = std::abs(x(static_cast<Eigen::Index>(k)));
        }
        std::vector<std::vector<double>> at(fluxes.size());
        std::vector<std::string> errors(fluxes.size());
        parallel_for(fluxes.size(), options.jobs, [&](std::size_t i) {
            try {
                c_at[i] = c;
                c_at[i].flux = fluxes[i];
                const auto sol = spectra::solve_circuit(c_at[i], bare[i]);
                const double ground = sol.energy(StateLabel(sol.dims.size(), 0));
                at[i].clear();
                for (const auto& b : branches) {
                    at[i].push_back(sol.energy(b) - ground);
                }
            } catch (const std::exception& ex) {
                errors[i] = ex.what();
            }
        });
        for (std::size_t i = 0; i < fluxes.size(); ++i) {
            if (!errors[i].empty()) {
                throw SweepPointError(fluxes[i], errors[i]);
            }
        }
        // Within one flux, model and measured branches are paired by frequency
        // order; labels alone would swap branches between nearby crossing positions.
        Eigen::VectorXd out(static_cast<Eigen::Index>(data.size()));
        for (std::size_t fi = 0; fi < fluxes.size(); ++fi) {
            const auto& members = by_flux[fi];
            std::vector<double> predicted;
            for (std::size_t i : members) {
                const auto bi = static_cast<std::size_t>(
                    std::find(branches.begin(), branches.end(), data[i].branch) - branches.begin());
                predicted.push_back(at[fi][bi]);
            }
            std::sort(predicted.begin(), predicted.end());
            for (std::size_t r = 0; r < members.size(); ++r) {
                const std::size_t i = members[r];
                out(static_cast<Eigen::Index>(i)) = predicted[r] - data[i].frequency;
            }
        }
        return out;
    };
    Eigen::VectorXd weights(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        weights(static_cast<Eigen::Index>(i)) = std::sqrt(data[i].weight);
    }
    auto residuals = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(model(x).cwiseProduct(weights)); };

    Eigen::VectorXd x0(static_cast<Eigen::Index>(free_couplings.size()));
    std::vector<std::string> names;
    for (std::size_t k = 0; k < free_couplings.size(); ++k) {
        x0(static_cast<Eigen::Index>(k)) = free_couplings[k].get(base);
        names.push_back(free_couplings[k].name());
    }
    lsq::Options opts = options.lsq;
    const auto r = lsq::levenberg_marquardt(residuals, x0, opts);
    FitResult out = to_fit_result(r, names, model(r.params));
    for (auto& p : out.params) {
        p = std::abs(p);
    }
    out.points_used = data.size();
    return out;
}

std::vector<SpectroscopyTrace> synthesize_spectroscopy(const CircuitParams& c, std::span<const double> grid,
                                                       const SynthesisOptions& options)
{
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<SpectroscopyTrace> traces;
    for (double flux : grid) {
        CircuitParams point = c;
        point.flux = flux;
        const auto sol = spectra::solve_circuit(point);
        const std::size_t axes = sol.dims.size();
        const StateLabel ground(axes, 0);
        for (const auto& name : options.transitions) {
            double model = 0.0;
            if (name == "f01") {
                model = sol.energy(spectra::unit_label(axes, {{0, 1}})) - sol.energy(ground);
            } else if (name == "f12") {
                model = sol.energy(spectra::unit_label(axes, {{0, 2}})) - sol.energy(spectra::unit_label(axes, {{0, 1}}));
            } else {
                model = sol.energy(parse_label(name)) - sol.energy(ground);
            }
            const double center = model + (options.center_jitter > 0.0 ? options.center_jitter * normal(rng) : 0.0);
            SpectroscopyTrace t;
            t.flux = flux;
            t.transition = name;
            const double half_span = options.span_widths * options.width;
            for (int i = 0; i < options.points; ++i) {
                const double f = model - half_span + 2.0 * half_span * i / (options.points - 1);
                double y = lorentzian(f, center, options.width, options.amplitude, options.offset);
                if (options.noise_sigma > 0.0) {
                    y += options.noise_sigma * normal(rng);
                }
                t.frequency.push_back(f);
                t.response.push_back(y);
            }
            traces.push_back(std::move(t));
        }
    }
    return traces;
}

} // namespace fitting
} // namespace fluxcav
