#pragma once

#include <Eigen/Dense>
#include <functional>

namespace carnot {

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;
using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

Eigen::VectorXd central_diff_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x, double step);

Eigen::MatrixXd central_diff_jacobian(const ResidualFn& F, const Eigen::VectorXd& x, double step);

struct LbfgsOptions {
    int max_iters = 200;
    double grad_tol = 1e-8;    // on the gradient max-norm
    double step_tol = 1e-12;   // on the step max-norm
    int memory = 8;
    double fd_step = 1e-5;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int iters = 0;
    bool converged = false;
};

// Limited-memory BFGS with Armijo backtracking; gradients by central
// differences of the objective.
LbfgsResult lbfgs_minimize(const ObjectiveFn& f, Eigen::VectorXd x0, const LbfgsOptions& opts);

struct GaussNewtonOptions {
    int max_iters = 60;
    double residual_tol = 1e-10;
    double fd_step = 1e-6;
    double lambda0 = 1e-4;  // Levenberg damping seed
};

struct GaussNewtonResult {
    Eigen::VectorXd x;
    double residual_norm = 0.0;
    int iters = 0;
    bool converged = false;
    Eigen::MatrixXd jacobian;  // at the final iterate
};

// Damped Gauss-Newton for least-squares of F (possibly underdetermined: the
// step uses the damped normal equations, which picks the minimum-norm
// correction as damping vanishes).
GaussNewtonResult gauss_newton_least_squares(const ResidualFn& F, Eigen::VectorXd x0,
                                             const GaussNewtonOptions& opts);

}  // namespace carnot
