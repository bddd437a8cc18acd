#include "fluxcav/spectra.hpp"

#include "fluxcav/errors.hpp"
#include "fluxcav/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>

namespace fluxcav {

std::string to_string(const StateLabel& label)
{
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < label.size(); ++i) {
        os << (i ? "," : "") << label[i];
    }
    os << ')';
    return os.str();
}

StateLabel parse_label(const std::string& text)
{
    StateLabel label;
    std::string token;
    for (char ch : text) {
        if (ch == '(' || ch == ')' || ch == ' ') {
            continue;
        }
        if (ch == ',') {
            label.push_back(std::stoi(token));
            token.clear();
        } else if (ch >= '0' && ch <= '9') {
            token.push_back(ch);
        } else {
            throw InvalidConfig("malformed state label '" + text + "'");
        }
    }
    if (token.empty()) {
        throw InvalidConfig("malformed state label '" + text + "'");
    }
    label.push_back(std::stoi(token));
    return label;
}

std::optional<std::size_t> EigenSolution::find(const StateLabel& label) const
{
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) {
            return i;
        }
    }
    return std::nullopt;
}

double EigenSolution::energy(const StateLabel& label) const
{
    auto idx = find(label);
    if (!idx) {
        throw NotFound("state " + to_string(label) + " not among labeled states");
    }
    return energies(static_cast<Eigen::Index>(*idx));
}

namespace spectra {

EigenSolution diagonalize(const OperatorMatrix& h, int n_levels)
{
    if (h.rows() == 0 || !hilbert::is_hermitian(h)) {
        throw ContractViolation("diagonalize: matrix is not Hermitian");
    }
    const auto dim = h.rows();
    const auto keep = (n_levels <= 0 || n_levels > dim) ? dim : static_cast<Eigen::Index>(n_levels);

    EigenSolution sol;
    if (h.imag().cwiseAbs().maxCoeff() == 0.0) {
        Eigen::SelfAdjointEigenSolver<RealMatrix> solver(h.real());
        if (solver.info() != Eigen::Success) {
            throw Error("diagonalize: eigensolver failed");
        }
        sol.energies = solver.eigenvalues().head(keep);
        sol.states = solver.eigenvectors().leftCols(keep).cast<std::complex<double>>();
    } else {
        Eigen::SelfAdjointEigenSolver<OperatorMatrix> solver(h);
        if (solver.info() != Eigen::Success) {
            throw Error("diagonalize: eigensolver failed");
        }
        sol.energies = solver.eigenvalues().head(keep);
        sol.states = solver.eigenvectors().leftCols(keep);
    }
    return sol;
}

namespace {

StateLabel unravel(Eigen::Index index, std::span<const int> dims)
{
    StateLabel label(dims.size());
    for (std::size_t k = dims.size(); k-- > 0;) {
        label[k] = static_cast<int>(index % dims[k]);
        index /= dims[k];
    }
    return label;
}

} // namespace

EigenSolution label_dressed_states(EigenSolution sol, std::span<const int> bare_dims)
{
    const Eigen::Index dim = sol.states.rows();
    const Eigen::Index n = sol.states.cols();
    const Eigen::Index expected = std::accumulate(bare_dims.begin(), bare_dims.end(), Eigen::Index{1},
                                                  [](Eigen::Index a, int b) { return a * b; });
    if (bare_dims.empty() || expected != dim) {
        throw ContractViolation("label_dressed_states: bare dims do not match state dimension");
    }

    const Eigen::MatrixXd overlap = sol.states.cwiseAbs2();
    struct Entry {
        double value;
        Eigen::Index bare;
        Eigen::Index state;
    };
    std::vector<Entry> entries;
    entries.reserve(static_cast<std::size_t>(dim * n));
    for (Eigen::Index s = 0; s < n; ++s) {
        for (Eigen::Index b = 0; b < dim; ++b) {
            entries.push_back({overlap(b, s), b, s});
        }
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.value > b.value; });

    std::vector<Eigen::Index> assigned(static_cast<std::size_t>(n), -1);
    std::vector<double> quality(static_cast<std::size_t>(n), 0.0);
    std::vector<bool> bare_taken(static_cast<std::size_t>(dim), false);
    Eigen::Index remaining = n;
    for (const auto& e : entries) {
        if (remaining == 0) {
            break;
        }
        auto s = static_cast<std::size_t>(e.state);
        auto b = static_cast<std::size_t>(e.bare);
        if (assigned[s] >= 0 || bare_taken[b]) {
            continue;
        }
        assigned[s] = e.bare;
        quality[s] = e.value;
        bare_taken[b] = true;
        --remaining;
    }

    sol.dims.assign(bare_dims.begin(), bare_dims.end());
    sol.labels.clear();
    sol.ambiguous.clear();
    for (Eigen::Index s = 0; s < n; ++s) {
        sol.labels.push_back(unravel(assigned[static_cast<std::size_t>(s)], bare_dims));
        sol.ambiguous.push_back(quality[static_cast<std::size_t>(s)] < kAmbiguousOverlap);
    }
    sol.overlap_quality = std::move(quality);
    return sol;
}

int count_low_excitation_states(std::span<const int> bare_dims, int max_excitation)
{
    int total = 1;
    for (int d : bare_dims) {
        total *= d;
    }
    int count = 0;
    for (int i = 0; i < total; ++i) {
        const StateLabel label = unravel(i, bare_dims);
        if (std::accumulate(label.begin(), label.end(), 0) <= max_excitation) {
            ++count;
        }
    }
    return count;
}

EigenSolution solve_circuit(const CircuitParams& c, int n_levels)
{
    c.validate();
    return solve_circuit(c, hilbert::solve_fluxonium(c.fluxonium, c.flux, c.fluxonium.levels), n_levels);
}

EigenSolution solve_circuit(const CircuitParams& c, hilbert::FluxoniumSpectrum qubit, int n_levels)
{
    const auto sys = hilbert::build_composite_system(c, std::move(qubit));
    if (n_levels <= 0) {
        n_levels = count_low_excitation_states(sys.dims);
    }
    return label_dressed_states(diagonalize(sys.hamiltonian, n_levels), sys.dims);
}

double transition_frequency(const EigenSolution& sol, const StateLabel& from, const StateLabel& to)
{
    return sol.energy(to) - sol.energy(from);
}

StateLabel unit_label(std::size_t n_axes, std::initializer_list<std::pair<std::size_t, int>> entries)
{
    StateLabel label(n_axes, 0);
    for (const auto& [axis, value] : entries) {
        label.at(axis) = value;
    }
    return label;
}

double dispersive_shift(const EigenSolution& sol, std::size_t qubit_axis, std::size_t mode_axis)
{
    const std::size_t n_axes = sol.dims.size();
    if (!sol.labeled() || qubit_axis >= n_axes || mode_axis >= n_axes || qubit_axis == mode_axis) {
        throw LabeledStateUnavailable("dispersive_shift: solution unlabeled or axes invalid");
    }
    const StateLabel needed[4] = {
        unit_label(n_axes, {}),
        unit_label(n_axes, {{qubit_axis, 1}}),
        unit_label(n_axes, {{mode_axis, 1}}),
        unit_label(n_axes, {{qubit_axis, 1}, {mode_axis, 1}}),
    };
    double e[4];
    for (int i = 0; i < 4; ++i) {
        auto idx = sol.find(needed[i]);
        if (!idx || sol.ambiguous[*idx]) {
            throw LabeledStateUnavailable("dispersive_shift: state " + to_string(needed[i])
                                          + (idx ? " is ambiguously labeled" : " not available"));
        }
        e[i] = sol.energies(static_cast<Eigen::Index>(*idx));
    }
    // GHz -> kHz
    return (e[3] - e[1] - e[2] + e[0]) * 1e6;
}

FluxSweep sweep_flux(const CircuitParams& c, std::span<const double> grid, const SweepOptions& options)
{
    if (grid.empty()) {
        throw InvalidConfig("sweep_flux: empty flux grid");
    }
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) {
            throw InvalidConfig("sweep_flux: flux grid must be strictly increasing");
        }
    }
    c.validate();

    const std::size_t n = grid.size();
    FluxSweep sweep;
    sweep.flux_grid.assign(grid.begin(), grid.end());
    sweep.solutions.resize(n);
    std::vector<std::string> errors(n);
    std::vector<char> ok(n, 0);

    parallel_for(n, options.jobs, [&](std::size_t i) {
        try {
            CircuitParams point = c;
            point.flux = grid[i];
            sweep.solutions[i] = solve_circuit(point, options.n_levels);
            ok[i] = 1;
        } catch (const std::exception& ex) {
            errors[i] = ex.what();
        }
    });

    for (std::size_t i = 0; i < n; ++i) {
        sweep.ok.push_back(ok[i] != 0);
        if (!ok[i]) {
            if (!options.allow_partial) {
                throw SweepPointError(grid[i], errors[i]);
            }
            sweep.failures.emplace_back(grid[i], errors[i]);
        }
    }
    return sweep;
}

DispersiveCurve dispersive_curve(const FluxSweep& sweep, std::size_t mode)
{
    DispersiveCurve curve;
    curve.flux_grid = sweep.flux_grid;
    for (std::size_t i = 0; i < sweep.solutions.size(); ++i) {
        double chi = std::numeric_limits<double>::quiet_NaN();
        if (sweep.ok.empty() || sweep.ok[i]) {
            try {
                chi = dispersive_shift(sweep.solutions[i], 0, mode + 1);
            } catch (const LabeledStateUnavailable&) {
            }
        }
        curve.chi.push_back(chi);
    }
    return curve;
}

std::vector<double> find_zero_crossings(const DispersiveCurve& curve, const std::function<double(double)>& chi_at,
                                        const ZeroCrossingOptions& options)
{
    std::vector<double> roots;
    const auto& x = curve.flux_grid;
    const auto& y = curve.chi;
    if (x.size() < 2 || y.size() != x.size()) {
        return roots;
    }
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double ya = y[i];
        const double yb = y[i + 1];
        if (!std::isfinite(ya) || !std::isfinite(yb)) {
            continue;
        }
        if (ya == 0.0) {
            roots.push_back(x[i]);
            continue;
        }
        if (ya * yb > 0.0 || yb == 0.0) {
            continue;
        }
        // The absolute target is capped relative to the bracket so that
        // curves far below chi_tol_khz are still refined in flux.
        const double target = std::min(options.chi_tol_khz, 1e-6 * std::max(std::abs(ya), std::abs(yb)));
        double lo = x[i];
        double hi = x[i + 1];
        double flo = ya;
        double mid = 0.5 * (lo + hi);
        double fmid = 0.0;
        bool failed = false;
        for (int it = 0; it < options.max_iterations; ++it) {
            mid = 0.5 * (lo + hi);
            try {
                fmid = chi_at(mid);
            } catch (const Error&) {
                failed = true;
                break;
            }
            if (!std::isfinite(fmid)) {
                failed = true;
                break;
            }
            if (std::abs(fmid) <= target || hi - lo <= options.flux_tol) {
                break;
            }
            if ((fmid < 0.0) == (flo < 0.0)) {
                lo = mid;
                flo = fmid;
            } else {
                hi = mid;
            }
        }
        // A pole leaves |chi| larger than at the original bracket ends.
        if (failed || std::abs(fmid) > std::min(std::abs(ya), std::abs(yb))) {
            continue;
        }
        roots.push_back(mid);
    }
    if (std::isfinite(y.back()) && y.back() == 0.0) {
        roots.push_back(x.back());
    }
    return roots;
}

std::function<double(double)> chi_evaluator(const CircuitParams& c, std::size_t mode, int n_levels)
{
    return [c, mode, n_levels](double flux) {
        CircuitParams point = c;
        point.flux = flux;
        return dispersive_shift(solve_circuit(point, n_levels), 0, mode + 1);
    };
}

AvoidedCrossing find_avoided_crossing(const CircuitParams& c, const FluxSweep& sweep, const StateLabel& branch_a,
                                      const StateLabel& branch_b, int n_levels, double flux_tol)
{
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, double>> gaps;
    for (std::size_t i = 0; i < sweep.solutions.size(); ++i) {
        if (!sweep.ok.empty() && !sweep.ok[i]) {
            continue;
        }
        const auto& sol = sweep.solutions[i];
        auto ia = sol.find(branch_a);
        auto ib = sol.find(branch_b);
        if (ia && ib) {
            gaps.emplace_back(sweep.flux_grid[i], std::abs(sol.energies(static_cast<Eigen::Index>(*ia))
                                                           - sol.energies(static_cast<Eigen::Index>(*ib))));
        }
    }
    if (gaps.size() < 3) {
        throw NoCrossing("find_avoided_crossing: branches " + to_string(branch_a) + " and " + to_string(branch_b)
                         + " are not labeled across the window");
    }
    auto best = std::min_element(gaps.begin(), gaps.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
    const auto k = static_cast<std::size_t>(best - gaps.begin());
    if (k == 0 || k + 1 == gaps.size()) {
        throw NoCrossing("find_avoided_crossing: separation of " + to_string(branch_a) + " and "
                         + to_string(branch_b) + " is monotonic over the window");
    }

    auto gap_at = [&](double flux) {
        CircuitParams point = c;
        point.flux = flux;
        try {
            const auto sol = solve_circuit(point, n_levels);
            return std::abs(sol.energy(branch_a) - sol.energy(branch_b));
        } catch (const Error&) {
            return inf;
        }
    };

    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = gaps[k - 1].first;
    double b = gaps[k + 1].first;
    double x1 = b - ratio * (b - a);
    double x2 = a + ratio * (b - a);
    double f1 = gap_at(x1);
    double f2 = gap_at(x2);
    AvoidedCrossing out{best->first, best->second};
    while (b - a > flux_tol) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = gap_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = gap_at(x2);
        }
        if (f1 < out.gap) {
            out = {x1, f1};
        }
        if (f2 < out.gap) {
            out = {x2, f2};
        }
    }
    return out;
}

} // namespace spectra
} // namespace fluxcav
