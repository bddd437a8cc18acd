#include "fluxcav/least_squares.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace fluxcav;

TEST_SUITE("least_squares") {

TEST_CASE("linear model recovers exact coefficients and the textbook covariance")
{
    // y = 2 + 3x with fixed offsets that sum to zero against both columns
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(9, -2.0, 2.0);
    Eigen::VectorXd noise(9);
    noise << 0.1, -0.2, 0.05, 0.0, 0.1, -0.05, 0.0, 0.2, -0.1;
    const Eigen::VectorXd y = (2.0 + 3.0 * x.array()).matrix() + noise;
    const auto f = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd { return (p(0) + p(1) * x.array()).matrix() - y; };

    const auto r = lsq::levenberg_marquardt(f, Eigen::Vector2d(0.0, 0.0));
    REQUIRE(r.converged);

    Eigen::MatrixXd a(9, 2);
    a.col(0).setOnes();
    a.col(1) = x;
    const Eigen::VectorXd normal = (a.transpose() * a).ldlt().solve(a.transpose() * y);
    CHECK(r.params(0) == doctest::Approx(normal(0)).scale(0.0).epsilon(1e-9));
    CHECK(r.params(1) == doctest::Approx(normal(1)).scale(0.0).epsilon(1e-9));

    const Eigen::VectorXd resid = a * normal - y;
    const double s2 = resid.squaredNorm() / 7.0;
    const Eigen::MatrixXd cov = s2 * (a.transpose() * a).inverse();
    CHECK(r.covariance(0, 0) == doctest::Approx(cov(0, 0)).scale(0.0).epsilon(1e-6));
    CHECK(r.covariance(1, 1) == doctest::Approx(cov(1, 1)).scale(0.0).epsilon(1e-6));
    CHECK(r.std_errors(1) == doctest::Approx(std::sqrt(cov(1, 1))).scale(0.0).epsilon(1e-6));
}

TEST_CASE("Rosenbrock valley")
{
    const auto f = [](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        return Eigen::Vector2d(10.0 * (p(1) - p(0) * p(0)), 1.0 - p(0));
    };
    const auto r = lsq::levenberg_marquardt(f, Eigen::Vector2d(-1.2, 1.0));
    CHECK(r.params(0) == doctest::Approx(1.0).scale(0.0).epsilon(1e-8));
    CHECK(r.params(1) == doctest::Approx(1.0).scale(0.0).epsilon(1e-8));
    CHECK(r.cost < 1e-20);
}

TEST_CASE("accepted steps never raise the cost")
{
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 0.01);
    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(40, 0.0, 4.0);
    Eigen::VectorXd y(40);
    for (int i = 0; i < 40; ++i) {
        y(i) = 1.5 * std::exp(-0.7 * t(i)) * std::cos(2.1 * t(i)) + n(rng);
    }
    const auto f = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        return (p(0) * (-p(1) * t.array()).exp() * (p(2) * t.array()).cos()).matrix() - y;
    };
    const auto r = lsq::levenberg_marquardt(f, Eigen::Vector3d(1.0, 0.5, 2.0));
    REQUIRE(r.cost_history.size() >= 2);
    for (std::size_t i = 1; i < r.cost_history.size(); ++i) {
        CHECK(r.cost_history[i] <= r.cost_history[i - 1]);
    }
    CHECK(r.params(2) == doctest::Approx(2.1).scale(0.0).epsilon(0.02));
}

TEST_CASE("finite-difference Jacobian matches the analytic one")
{
    const auto f = [](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        return Eigen::Vector3d(std::sin(p(0)) * p(1), p(0) * p(0) + std::exp(p(1)), p(1) * p(1) * p(1));
    };
    const Eigen::Vector2d x(0.7, -0.3);
    Eigen::MatrixXd exact(3, 2);
    exact << std::cos(x(0)) * x(1), std::sin(x(0)), 2.0 * x(0), std::exp(x(1)), 0.0, 3.0 * x(1) * x(1);
    const auto j = lsq::finite_difference_jacobian(f, x, 1e-6);
    CHECK((j - exact).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("starting at the optimum ends immediately")
{
    const auto f = [](const Eigen::VectorXd& p) -> Eigen::VectorXd { return Eigen::Vector2d(p(0) - 1.0, p(0) + 1.0); };
    const auto r = lsq::levenberg_marquardt(f, Eigen::VectorXd::Zero(1));
    CHECK(r.converged);
    CHECK(r.iterations <= 1);
    CHECK(r.params(0) == doctest::Approx(0.0));
}

TEST_CASE("covariance shrinks as data grow")
{
    auto fit = [](int m) {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> n(0.0, 0.1);
        Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(m, 0.0, 1.0);
        Eigen::VectorXd y(m);
        for (int i = 0; i < m; ++i) {
            y(i) = 1.0 + 2.0 * x(i) + n(rng);
        }
        const auto f = [x, y](const Eigen::VectorXd& p) -> Eigen::VectorXd {
            return (p(0) + p(1) * x.array()).matrix() - y;
        };
        return lsq::levenberg_marquardt(f, Eigen::Vector2d(0.0, 0.0)).std_errors(1);
    };
    CHECK(fit(400) < fit(25));
}

} // TEST_SUITE
