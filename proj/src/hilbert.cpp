#include "fluxcav/hilbert.hpp"

#include "fluxcav/constants.hpp"
#include "fluxcav/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <utility>

namespace fluxcav {

namespace {

void require(bool ok, const std::string& message)
{
    if (!ok) {
        throw InvalidConfig(message);
    }
}

// Eigendecomposition of (c + c^dag) for a given cutoff. The phase operator is
// phase_zpf times this matrix, so functions of the phase only need rescaled
// eigenvalues and the decomposition can be shared across parameter sets.
struct PositionEigen {
    Eigen::VectorXd values;
    RealMatrix vectors;
};

std::shared_ptr<const PositionEigen> position_eigen(int cutoff)
{
    static std::mutex mutex;
    static std::map<int, std::shared_ptr<const PositionEigen>> cache;

    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(cutoff);
    if (it != cache.end()) {
        return it->second;
    }
    const RealMatrix c = hilbert::lowering(cutoff);
    Eigen::SelfAdjointEigenSolver<RealMatrix> solver(c + c.transpose());
    auto entry = std::make_shared<PositionEigen>(PositionEigen{solver.eigenvalues(), solver.eigenvectors()});
    cache.emplace(cutoff, entry);
    return entry;
}

RealMatrix scaled_phase_function(const FluxoniumParams& p, const std::function<double(double)>& f)
{
    const auto eig = position_eigen(p.cutoff);
    const double zpf = p.phase_zpf();
    Eigen::VectorXd fv(eig->values.size());
    for (Eigen::Index i = 0; i < fv.size(); ++i) {
        fv(i) = f(zpf * eig->values(i));
    }
    return eig->vectors * fv.asDiagonal() * eig->vectors.transpose();
}

RealMatrix real_fluxonium_hamiltonian(const FluxoniumParams& p, double flux)
{
    p.validate();
    const int n = p.cutoff;
    const RealMatrix c = hilbert::lowering(n);
    const RealMatrix x = c + c.transpose();
    const RealMatrix y = c.transpose() - c;  // charge = i * n_zpf * y
    const double phi_zpf = p.phase_zpf();
    const double n_zpf = p.charge_zpf();
    const double shift = 2.0 * constants::pi * flux;

    const RealMatrix phase = phi_zpf * x;
    // (i n_zpf y)^2 = -n_zpf^2 y^2
    const RealMatrix charge_sq = -(n_zpf * n_zpf) * (y * y);
    RealMatrix shifted = phase;
    shifted.diagonal().array() += shift;

    RealMatrix h = 4.0 * p.e_c * charge_sq + 0.5 * p.e_l * (shifted * shifted)
        - p.e_j * scaled_phase_function(p, [](double v) { return std::cos(v); });
    // symmetrize away rounding from the products
    return 0.5 * (h + h.transpose());
}

} // namespace

void FluxoniumParams::validate() const
{
    require(std::isfinite(e_j) && e_j > 0.0, "fluxonium.e_j must be > 0");
    require(std::isfinite(e_c) && e_c > 0.0, "fluxonium.e_c must be > 0");
    require(std::isfinite(e_l) && e_l > 0.0, "fluxonium.e_l must be > 0");
    require(cutoff >= 3, "fluxonium.cutoff must be >= 3");
    require(levels >= 2 && levels <= cutoff, "fluxonium.levels must be in [2, cutoff]");
}

double FluxoniumParams::phase_zpf() const { return std::pow(2.0 * e_c / e_l, 0.25); }

double FluxoniumParams::charge_zpf() const { return 0.5 * std::pow(e_l / (2.0 * e_c), 0.25); }

double FluxoniumParams::junction_capacitance() const
{
    return constants::e * constants::e / (2.0 * constants::ghz_to_joule(e_c));
}

double FluxoniumParams::inductance() const
{
    return constants::phi0 * constants::phi0 / constants::ghz_to_joule(e_l);
}

void HarmonicModeParams::validate() const
{
    require(!label.empty(), "mode label must be non-empty");
    require(std::isfinite(frequency) && frequency > 0.0, "mode " + label + ": frequency must be > 0");
    require(cutoff >= 2, "mode " + label + ": cutoff must be >= 2");
    require(std::isfinite(coupling_to_qubit) && coupling_to_qubit >= 0.0,
            "mode " + label + ": coupling_to_qubit must be >= 0");
    for (const auto& c : coupling_to) {
        require(std::isfinite(c.strength) && c.strength >= 0.0,
                "mode " + label + ": coupling to " + c.label + " must be >= 0");
    }
}

void CircuitParams::validate() const
{
    fluxonium.validate();
    require(std::isfinite(flux), "flux must be finite");
    std::set<std::string> labels;
    for (const auto& m : modes) {
        m.validate();
        require(labels.insert(m.label).second, "duplicate mode label " + m.label);
    }
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& m : modes) {
        for (const auto& c : m.coupling_to) {
            require(labels.count(c.label) == 1, "mode " + m.label + ": coupling to unknown mode " + c.label);
            require(c.label != m.label, "mode " + m.label + ": self coupling");
            auto key = std::minmax(m.label, c.label);
            require(pairs.insert({key.first, key.second}).second,
                    "coupling " + m.label + "-" + c.label + " listed twice");
        }
    }
    if (composite_dimension() > max_dimension) {
        throw ResourceError("composite dimension " + std::to_string(composite_dimension())
                            + " exceeds limit " + std::to_string(max_dimension));
    }
}

std::size_t CircuitParams::mode_index(const std::string& label) const
{
    for (std::size_t i = 0; i < modes.size(); ++i) {
        if (modes[i].label == label) {
            return i;
        }
    }
    throw NotFound("no mode labeled " + label);
}

std::size_t CircuitParams::composite_dimension() const
{
    std::size_t dim = static_cast<std::size_t>(std::max(fluxonium.levels, 1));
    for (const auto& m : modes) {
        dim *= static_cast<std::size_t>(std::max(m.cutoff, 1));
    }
    return dim;
}

std::vector<int> CircuitParams::bare_dims() const
{
    std::vector<int> dims{fluxonium.levels};
    for (const auto& m : modes) {
        dims.push_back(m.cutoff);
    }
    return dims;
}

CircuitParams table_one_circuit()
{
    CircuitParams c;
    c.fluxonium = FluxoniumParams{10.8, 3.5, 1.014, 110, 10};
    c.modes.push_back(HarmonicModeParams{"R", 6.8176, 5, 0.0252, {{"C", 0.008}}});
    c.modes.push_back(HarmonicModeParams{"C", 4.535854, 5, 0.0, {}});
    return c;
}

CircuitParams with_higher_cavity_modes(CircuitParams c)
{
    auto& r = c.modes.at(c.mode_index("R"));
    for (const char* label : {"C1", "C2", "C3"}) {
        r.coupling_to.push_back({label, 0.016});
    }
    c.modes.push_back(HarmonicModeParams{"C1", 13.375, 2, 0.0, {}});
    c.modes.push_back(HarmonicModeParams{"C2", 13.735, 2, 0.0, {}});
    c.modes.push_back(HarmonicModeParams{"C3", 13.734, 2, 0.016, {}});
    return c;
}

namespace hilbert {

RealMatrix lowering(int cutoff)
{
    RealMatrix a = RealMatrix::Zero(cutoff, cutoff);
    for (int n = 1; n < cutoff; ++n) {
        a(n - 1, n) = std::sqrt(static_cast<double>(n));
    }
    return a;
}

FluxoniumOperators build_fluxonium_operators(const FluxoniumParams& p)
{
    p.validate();
    const RealMatrix c = lowering(p.cutoff);
    const RealMatrix ct = c.transpose();
    FluxoniumOperators ops;
    ops.phase = (p.phase_zpf() * (c + ct)).cast<std::complex<double>>();
    ops.charge = std::complex<double>(0.0, p.charge_zpf()) * (ct - c).cast<std::complex<double>>();
    return ops;
}

RealMatrix phase_function(const RealMatrix& phase, const std::function<double(double)>& f)
{
    Eigen::SelfAdjointEigenSolver<RealMatrix> solver(phase);
    Eigen::VectorXd fv = solver.eigenvalues().unaryExpr(f);
    return solver.eigenvectors() * fv.asDiagonal() * solver.eigenvectors().transpose();
}

OperatorMatrix build_fluxonium_hamiltonian(const FluxoniumParams& p, double flux)
{
    return real_fluxonium_hamiltonian(p, flux).cast<std::complex<double>>();
}

OperatorMatrix build_sin_half_phase(const FluxoniumParams& p, double offset)
{
    p.validate();
    return scaled_phase_function(p, [offset](double v) { return std::sin(0.5 * v + offset); })
        .cast<std::complex<double>>();
}

FluxoniumSpectrum solve_fluxonium(const FluxoniumParams& p, double flux, int levels)
{
    const RealMatrix h = real_fluxonium_hamiltonian(p, flux);
    if (levels < 1 || levels > p.cutoff) {
        throw InvalidConfig("requested fluxonium levels out of range");
    }
    Eigen::SelfAdjointEigenSolver<RealMatrix> solver(h);
    FluxoniumSpectrum s;
    s.energies = solver.eigenvalues().head(levels);
    s.vectors = solver.eigenvectors().leftCols(levels);
    const RealMatrix c = lowering(p.cutoff);
    const RealMatrix phase = p.phase_zpf() * (c + c.transpose());
    s.phase = s.vectors.transpose() * phase * s.vectors;
    s.phase = 0.5 * (s.phase + s.phase.transpose()).eval();
    return s;
}

RealMatrix kron(const RealMatrix& a, const RealMatrix& b)
{
    RealMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

namespace {

// Kronecker product over all subsystems, identity where no factor is given.
RealMatrix embed_factors(const std::vector<int>& dims, const std::map<std::size_t, RealMatrix>& factors)
{
    RealMatrix out = RealMatrix::Identity(1, 1);
    for (std::size_t k = 0; k < dims.size(); ++k) {
        auto it = factors.find(k);
        const RealMatrix f = it != factors.end() ? it->second : RealMatrix::Identity(dims[k], dims[k]);
        out = kron(out, f);
    }
    return out;
}

} // namespace

RealMatrix embed(const RealMatrix& op, const std::vector<int>& dims, std::size_t which)
{
    return embed_factors(dims, {{which, op}});
}

RealMatrix CompositeSystem::annihilation(std::size_t k) const
{
    return embed(lowering(dims.at(k + 1)), dims, k + 1);
}

RealMatrix CompositeSystem::qubit_phase() const { return embed(qubit.phase, dims, 0); }

RealMatrix CompositeSystem::embed_qubit(const RealMatrix& op) const { return embed(op, dims, 0); }

CompositeSystem build_composite_system(const CircuitParams& c)
{
    c.validate();
    return build_composite_system(c, solve_fluxonium(c.fluxonium, c.flux, c.fluxonium.levels));
}

CompositeSystem build_composite_system(const CircuitParams& c, FluxoniumSpectrum qubit)
{
    if (qubit.energies.size() != c.fluxonium.levels) {
        throw ContractViolation("build_composite_system: bare spectrum has the wrong number of levels");
    }
    CompositeSystem sys;
    sys.dims = c.bare_dims();
    sys.qubit = std::move(qubit);

    const auto dim = static_cast<Eigen::Index>(c.composite_dimension());
    RealMatrix h = embed(RealMatrix(sys.qubit.energies.asDiagonal()), sys.dims, 0);

    std::vector<RealMatrix> a(c.modes.size());
    for (std::size_t k = 0; k < c.modes.size(); ++k) {
        a[k] = lowering(c.modes[k].cutoff);
        const RealMatrix number = a[k].transpose() * a[k];
        h += c.modes[k].frequency * embed(number, sys.dims, k + 1);
    }

    for (std::size_t k = 0; k < c.modes.size(); ++k) {
        const auto& m = c.modes[k];
        if (m.coupling_to_qubit != 0.0) {
            // -g phi (a^dag + a)
            h -= m.coupling_to_qubit
                * embed_factors(sys.dims, {{0, sys.qubit.phase}, {k + 1, a[k] + a[k].transpose()}});
        }
        for (const auto& link : m.coupling_to) {
            if (link.strength == 0.0) {
                continue;
            }
            const std::size_t l = c.mode_index(link.label);
            // g (a^dag - a)(b^dag - b)
            h += link.strength
                * embed_factors(sys.dims, {{k + 1, a[k].transpose() - a[k]}, {l + 1, a[l].transpose() - a[l]}});
        }
    }
    if (h.rows() != dim) {
        throw Error("internal: composite dimension mismatch");
    }
    sys.hamiltonian = (0.5 * (h + h.transpose())).cast<std::complex<double>>();
    return sys;
}

OperatorMatrix build_composite_hamiltonian(const CircuitParams& c) { return build_composite_system(c).hamiltonian; }

bool is_hermitian(const OperatorMatrix& h, double rel_tol)
{
    if (h.rows() != h.cols()) {
        return false;
    }
    const double scale = h.cwiseAbs().maxCoeff();
    const double diff = (h - h.adjoint()).cwiseAbs().maxCoeff();
    return diff <= rel_tol * scale;
}

} // namespace hilbert
} // namespace fluxcav
