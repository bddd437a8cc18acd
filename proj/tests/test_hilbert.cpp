#include "fluxcav/errors.hpp"
#include "fluxcav/hilbert.hpp"
#include "fluxcav/spectra.hpp"
#include "oracle/phase_grid.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace fluxcav;

namespace {

Eigen::VectorXd bare_levels(const FluxoniumParams& p, double flux, int n)
{
    return hilbert::solve_fluxonium(p, flux, n).energies;
}

} // namespace

TEST_SUITE("hilbert") {

TEST_CASE("phase and charge obey the truncated canonical commutator")
{
    FluxoniumParams p;
    p.e_c = 2.0;
    p.e_l = 2.0;
    p.cutoff = 12;
    p.levels = 4;
    const auto ops = hilbert::build_fluxonium_operators(p);
    const OperatorMatrix comm = ops.phase * ops.charge - ops.charge * ops.phase;
    const auto block = comm.topLeftCorner(p.cutoff - 1, p.cutoff - 1);
    const OperatorMatrix expected = std::complex<double>(0.0, 1.0) * OperatorMatrix::Identity(p.cutoff - 1, p.cutoff - 1);
    CHECK((block - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero-point phase of the Table I circuit")
{
    FluxoniumParams p;
    CHECK(p.phase_zpf() == doctest::Approx(std::sqrt(std::sqrt(7.0 / 1.014))).scale(0.0).epsilon(1e-15));
    CHECK(std::abs(p.phase_zpf() - 1.6214) < 1e-3);
    CHECK(p.charge_zpf() * p.phase_zpf() == doctest::Approx(0.5).scale(0.0).epsilon(1e-15));
}

TEST_CASE("phase operator spectrum is symmetric about zero")
{
    for (int cutoff : {3, 8, 31}) {
        FluxoniumParams p;
        p.cutoff = cutoff;
        p.levels = 2;
        const auto ops = hilbert::build_fluxonium_operators(p);
        Eigen::SelfAdjointEigenSolver<RealMatrix> eig(ops.phase.real());
        const auto v = eig.eigenvalues();
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            CHECK(std::abs(v(i) + v(v.size() - 1 - i)) < 1e-12);
        }
    }
}

TEST_CASE("cutoff below three is rejected")
{
    FluxoniumParams p;
    p.cutoff = 2;
    p.levels = 2;
    CHECK_THROWS_AS(hilbert::build_fluxonium_operators(p), InvalidConfig);
}

TEST_CASE("harmonic limit spacing")
{
    FluxoniumParams p;
    p.e_j = 1e-300;
    const double expected = std::sqrt(8.0 * 3.5 * 1.014);
    CHECK(expected == doctest::Approx(5.3284).scale(0.0).epsilon(1e-4));
    for (double flux : {0.0, 0.2}) {
        const auto e = bare_levels(p, flux, 4);
        for (int k = 1; k < 4; ++k) {
            CHECK(e(k) - e(k - 1) == doctest::Approx(expected).scale(0.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("fluxonium Hamiltonian is Hermitian and real")
{
    FluxoniumParams p;
    for (double flux : {-0.5, -0.13, 0.0, 0.37}) {
        const auto h = hilbert::build_fluxonium_hamiltonian(p, flux);
        CHECK(hilbert::is_hermitian(h));
        CHECK(h.imag().cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("spectrum is even and periodic in flux")
{
    FluxoniumParams p;
    for (double flux : {0.1, 0.25, 0.4, 0.5}) {
        const auto plus = bare_levels(p, flux, 6);
        const auto minus = bare_levels(p, -flux, 6);
        const auto shifted = bare_levels(p, flux - 1.0, 6);
        CHECK((plus - minus).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((plus - shifted).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("lowest six levels converge between cutoffs 80 and 110")
{
    FluxoniumParams big;
    FluxoniumParams small;
    small.cutoff = 80;
    for (double flux : {-0.5, -0.35, -0.2, 0.0, 0.3}) {
        const auto a = bare_levels(big, flux, 6);
        const auto b = bare_levels(small, flux, 6);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("lowest six levels converge between cutoffs 60 and 110")
{
    FluxoniumParams big;
    FluxoniumParams small;
    small.cutoff = 60;
    for (double flux : {-0.5, -0.35, -0.2, 0.0, 0.3}) {
        const auto a = bare_levels(big, flux, 6);
        const auto b = bare_levels(small, flux, 6);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("phase-grid oracle agrees with the oscillator basis")
{
    FluxoniumParams p;
    for (int i = 0; i <= 10; ++i) {
        const double flux = -0.5 + 0.1 * i;
        oracle::GridProblem g;
        g.flux = flux;
        const auto grid = oracle::extrapolated_levels(g, 6);
        const auto levels = bare_levels(p, flux, 6);
        for (int k = 0; k < 6; ++k) {
            CAPTURE(flux);
            CAPTURE(k);
            CHECK(std::abs(levels(k) - grid[static_cast<std::size_t>(k)]) < 1e-6);
        }
    }
}

TEST_CASE("sin(phase/2 + offset) matrix element matches the phase grid")
{
    FluxoniumParams p;
    const double flux = 0.5;
    const auto spectrum = hilbert::solve_fluxonium(p, flux, 2);
    const RealMatrix op = hilbert::build_sin_half_phase(p, hilbert::kQpOffsetLiteral).real();
    const double element = std::abs(spectrum.vectors.col(0).dot(op * spectrum.vectors.col(1)));

    oracle::GridProblem g;
    g.flux = flux;
    const double reference =
        oracle::extrapolated_matrix_element(g, 0, 1, [](double phi) { return std::sin(0.5 * phi + 0.5); });
    CHECK(std::abs(element - reference) < 1e-6);
}

TEST_CASE("sin(phase/2 + offset) is Hermitian with spectral norm at most one")
{
    FluxoniumParams p;
    for (double offset : {0.0, hilbert::kQpOffsetLiteral, hilbert::kQpOffsetHalfPi}) {
        const auto op = hilbert::build_sin_half_phase(p, offset);
        CHECK(hilbert::is_hermitian(op));
        Eigen::SelfAdjointEigenSolver<RealMatrix> eig(op.real());
        CHECK(eig.eigenvalues().cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
    }
}

TEST_CASE("sin(phase/2) vanishes between phase-parity partners at zero offset")
{
    // At zero flux the eigenstates have definite parity in phase; sin(phase/2)
    // is odd, so its diagonal elements vanish.
    FluxoniumParams p;
    const auto s = hilbert::solve_fluxonium(p, 0.0, 3);
    const RealMatrix op = hilbert::build_sin_half_phase(p, 0.0).real();
    for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(s.vectors.col(k).dot(op * s.vectors.col(k))) < 1e-10);
    }
}

TEST_CASE("ladder operators satisfy [a, a^dag] = 1 on the top-left block")
{
    for (int cutoff : {2, 5, 9}) {
        const RealMatrix a = hilbert::lowering(cutoff);
        const RealMatrix comm = a * a.transpose() - a.transpose() * a;
        const auto block = comm.topLeftCorner(cutoff - 1, cutoff - 1);
        CHECK((block - RealMatrix::Identity(cutoff - 1, cutoff - 1)).cwiseAbs().maxCoeff() < 1e-14);
    }
    // embedded mode operators of a composite system
    auto c = table_one_circuit();
    c.fluxonium.levels = 4;
    c.modes[0].cutoff = 3;
    c.modes[1].cutoff = 4;
    const auto sys = hilbert::build_composite_system(c);
    for (std::size_t k = 0; k < 2; ++k) {
        const RealMatrix a = sys.annihilation(k);
        const RealMatrix comm = a * a.transpose() - a.transpose() * a;
        // identity except on the highest Fock level of this mode
        int ok = 0;
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            ok += std::abs(comm(i, i) - 1.0) < 1e-14 ? 1 : 0;
        }
        const int cutoff = c.modes[k].cutoff;
        CHECK(ok == static_cast<int>(a.rows()) / cutoff * (cutoff - 1));
        CHECK((comm - RealMatrix(comm.diagonal().asDiagonal())).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("composite Hamiltonian is Hermitian")
{
    auto c = table_one_circuit();
    for (double flux : {-0.5, -0.3, 0.0, 0.21}) {
        c.flux = flux;
        CHECK(hilbert::is_hermitian(hilbert::build_composite_hamiltonian(c)));
    }
    auto higher = with_higher_cavity_modes(table_one_circuit());
    for (auto& m : higher.modes) {
        m.cutoff = 2;
    }
    CHECK(hilbert::is_hermitian(hilbert::build_composite_hamiltonian(higher)));
}

TEST_CASE("decoupled composite spectrum is the sorted tensor sum")
{
    auto c = table_one_circuit();
    c.flux = -0.31;
    c.fluxonium.levels = 5;
    c.modes[0].cutoff = 3;
    c.modes[1].cutoff = 4;
    c.modes[0].coupling_to_qubit = 0.0;
    c.modes[0].coupling_to.clear();
    const auto q = bare_levels(c.fluxonium, c.flux, 5);
    std::vector<double> sums;
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 3; ++j) {
            for (int k = 0; k < 4; ++k) {
                sums.push_back(q(i) + j * c.modes[0].frequency + k * c.modes[1].frequency);
            }
        }
    }
    std::sort(sums.begin(), sums.end());
    const auto sol = spectra::diagonalize(hilbert::build_composite_hamiltonian(c), 0);
    REQUIRE(sol.energies.size() == static_cast<Eigen::Index>(sums.size()));
    for (std::size_t i = 0; i < sums.size(); ++i) {
        CHECK(sol.energies(static_cast<Eigen::Index>(i)) == doctest::Approx(sums[i]).scale(0.0).epsilon(1e-12));
    }
}

TEST_CASE("composite f01 at the low sweet spot tracks the bare oracle")
{
    auto c = table_one_circuit();
    c.flux = -0.5;
    const auto sol = spectra::solve_circuit(c);
    const double f01 = spectra::transition_frequency(sol, {0, 0, 0}, {1, 0, 0});
    oracle::GridProblem g;
    g.flux = -0.5;
    const auto grid = oracle::extrapolated_levels(g, 2);
    // dressing by the modes moves f01 by well under a MHz here
    CHECK(std::abs(f01 - (grid[1] - grid[0])) < 1e-3);
}

TEST_CASE("higher cavity modes pull f01 down near zero flux")
{
    auto base = table_one_circuit();
    base.modes[0].cutoff = 3;
    base.modes[1].cutoff = 3;
    auto extended = with_higher_cavity_modes(base);
    for (double flux : {0.0, 0.05}) {
        base.flux = flux;
        extended.flux = flux;
        const auto a = spectra::solve_circuit(base);
        const auto b = spectra::solve_circuit(extended);
        const double f_base = spectra::transition_frequency(a, {0, 0, 0}, {1, 0, 0});
        const StateLabel ground(6, 0);
        StateLabel excited(6, 0);
        excited[0] = 1;
        const double f_ext = b.energy(excited) - b.energy(ground);
        CAPTURE(flux);
        CHECK(f_ext < f_base);
    }
}

TEST_CASE("circuit validation")
{
    auto c = table_one_circuit();
    c.modes[0].coupling_to.push_back({"X", 0.01});
    CHECK_THROWS_AS(c.validate(), InvalidConfig);

    c = table_one_circuit();
    c.modes[1].label = "R";
    CHECK_THROWS_AS(c.validate(), InvalidConfig);

    c = table_one_circuit();
    c.max_dimension = 100;
    CHECK_THROWS_AS(c.validate(), ResourceError);
    CHECK_THROWS_AS(hilbert::build_composite_hamiltonian(c), ResourceError);

    c = table_one_circuit();
    c.fluxonium.e_j = -1.0;
    CHECK_THROWS_AS(c.validate(), InvalidConfig);

    c = table_one_circuit();
    c.modes[0].cutoff = 1;
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
}

} // TEST_SUITE
