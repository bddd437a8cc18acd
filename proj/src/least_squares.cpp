#include "fluxcav/least_squares.hpp"

#include "fluxcav/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fluxcav::lsq {

Eigen::MatrixXd finite_difference_jacobian(const Residuals& f, const Eigen::VectorXd& x, double relative_step)
{
    const Eigen::VectorXd r0 = f(x);
    Eigen::MatrixXd jac(r0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double step = relative_step * std::max(std::abs(x(j)), 1.0);
        Eigen::VectorXd xp = x;
        Eigen::VectorXd xm = x;
        xp(j) += step;
        xm(j) -= step;
        jac.col(j) = (f(xp) - f(xm)) / (xp(j) - xm(j));
    }
    return jac;
}

namespace {

double scaled_gradient(const Eigen::MatrixXd& jac, const Eigen::VectorXd& r)
{
    const double rn = r.norm();
    if (rn == 0.0) {
        return 0.0;
    }
    double worst = 0.0;
    for (Eigen::Index j = 0; j < jac.cols(); ++j) {
        const double cn = jac.col(j).norm();
        if (cn > 0.0) {
            worst = std::max(worst, std::abs(jac.col(j).dot(r)) / (cn * rn));
        }
    }
    return worst;
}

// The undamped Gauss-Newton step from x is below the parameter resolution.
bool gauss_newton_step_small(const Eigen::MatrixXd& jac, const Eigen::VectorXd& r, const Eigen::VectorXd& x,
                             double step_tol)
{
    const Eigen::VectorXd step = (jac.transpose() * jac).completeOrthogonalDecomposition().solve(-(jac.transpose() * r));
    return step.allFinite() && step.norm() <= step_tol * (x.norm() + step_tol);
}

} // namespace

Result levenberg_marquardt(const Residuals& f, Eigen::VectorXd x, const Options& options,
                           const std::optional<Jacobian>& jacobian)
{
    auto jac_at = [&](const Eigen::VectorXd& p) {
        return jacobian ? (*jacobian)(p) : finite_difference_jacobian(f, p, options.relative_step);
    };

    Result out;
    Eigen::VectorXd r = f(x);
    if (!r.allFinite()) {
        throw ContractViolation("levenberg_marquardt: non-finite residuals at the initial point");
    }
    if (r.size() < x.size()) {
        throw InsufficientData("levenberg_marquardt: fewer residuals than parameters");
    }
    double cost = 0.5 * r.squaredNorm();
    out.cost_history.push_back(cost);
    Eigen::MatrixXd jac = jac_at(x);
    double lambda = options.initial_damping;
    int iter = 0;
    auto stationary = [&] {
        return cost <= options.cost_floor || scaled_gradient(jac, r) <= options.gradient_tol
            || gauss_newton_step_small(jac, r, x, options.step_tol);
    };
    bool done = stationary();

    while (!done && iter < options.max_iterations) {
        ++iter;
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * r;
        bool accepted = false;
        for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
            Eigen::MatrixXd a = jtj;
            for (Eigen::Index i = 0; i < a.rows(); ++i) {
                a(i, i) += lambda * std::max(jtj(i, i), 1e-300);
            }
            const Eigen::VectorXd step = a.ldlt().solve(-g);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            if (step.norm() <= options.step_tol * (x.norm() + options.step_tol)) {
                break;
            }
            const Eigen::VectorXd trial = x + step;
            Eigen::VectorXd rt;
            try {
                rt = f(trial);
            } catch (const Error&) {
                lambda *= 10.0;
                continue;
            }
            const double trial_cost = rt.allFinite() ? 0.5 * rt.squaredNorm() : std::numeric_limits<double>::infinity();
            if (trial_cost < cost) {
                x = trial;
                r = rt;
                cost = trial_cost;
                out.cost_history.push_back(cost);
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
            } else {
                lambda *= 10.0;
            }
        }
        if (!accepted) {
            break;
        }
        jac = jac_at(x);
        done = stationary();
    }

    out.params = x;
    out.residuals = r;
    out.jacobian = jac;
    out.cost = cost;
    out.iterations = iter;
    out.gradient_norm = cost <= options.cost_floor ? 0.0 : scaled_gradient(jac, r);
    out.converged = done;

    const auto m = r.size();
    const auto n = x.size();
    const double s2 = m > n ? r.squaredNorm() / static_cast<double>(m - n) : 0.0;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jac.transpose() * jac);
    out.covariance = s2 * cod.pseudoInverse();
    out.std_errors = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    return out;
}

} // namespace fluxcav::lsq
