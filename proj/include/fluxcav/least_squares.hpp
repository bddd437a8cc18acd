#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

namespace fluxcav::lsq {

using Residuals = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using Jacobian = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct Options {
    int max_iterations = 500;
    double relative_step = 1e-6;  // central finite-difference step
    // Converged when every Jacobian column is nearly orthogonal to the residual,
    // max_j |J_j . r| / (|J_j| |r|) <= gradient_tol, or when the undamped
    // Gauss-Newton step is shorter than step_tol relative to |x|. The second test
    // covers residuals sitting at their numerical floor.
    double gradient_tol = 1e-6;
    double step_tol = 1e-12;
    double cost_floor = 1e-24;
    double initial_damping = 1e-3;
};

struct Result {
    Eigen::VectorXd params;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd jacobian;
    Eigen::MatrixXd covariance;  // s^2 (J^T J)^-1, s^2 = |r|^2 / (m - n)
    Eigen::VectorXd std_errors;
    double cost = 0.0;           // 0.5 |r|^2
    double gradient_norm = 0.0;  // scaled form used for convergence
    int iterations = 0;
    bool converged = false;
    std::vector<double> cost_history;  // cost after every accepted step, starting with the initial cost
};

// Central finite differences, step h_j = relative_step * max(|x_j|, 1).
Eigen::MatrixXd finite_difference_jacobian(const Residuals& f, const Eigen::VectorXd& x, double relative_step);

// Damped Gauss-Newton (Levenberg-Marquardt). Only steps that lower the cost are accepted.
Result levenberg_marquardt(const Residuals& f, Eigen::VectorXd x0, const Options& options = {},
                           const std::optional<Jacobian>& jacobian = std::nullopt);

} // namespace fluxcav::lsq
