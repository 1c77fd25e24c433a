#include "carnot/optim.hpp"

#include <cmath>
#include <deque>

namespace carnot {

Eigen::VectorXd central_diff_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x, double step) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        xp(i) = x(i) + step;
        const double fp = f(xp);
        xp(i) = x(i) - step;
        const double fm = f(xp);
        xp(i) = x(i);
        g(i) = (fp - fm) / (2.0 * step);
    }
    return g;
}

Eigen::MatrixXd central_diff_jacobian(const ResidualFn& F, const Eigen::VectorXd& x, double step) {
    Eigen::VectorXd xp = x;
    xp(0) = x(0) + step;
    Eigen::VectorXd probe = F(xp);
    xp(0) = x(0);
    Eigen::MatrixXd J(probe.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        xp(i) = x(i) + step;
        const Eigen::VectorXd fp = F(xp);
        xp(i) = x(i) - step;
        const Eigen::VectorXd fm = F(xp);
        xp(i) = x(i);
        J.col(i) = (fp - fm) / (2.0 * step);
    }
    return J;
}

LbfgsResult lbfgs_minimize(const ObjectiveFn& f, Eigen::VectorXd x0, const LbfgsOptions& opts) {
    LbfgsResult res;
    Eigen::VectorXd x = std::move(x0);
    double fx = f(x);
    Eigen::VectorXd g = central_diff_gradient(f, x, opts.fd_step);

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;

    for (int iter = 0; iter < opts.max_iters; ++iter) {
        if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
            res.converged = true;
            break;
        }
        // Two-loop recursion.
        Eigen::VectorXd q = g;
        std::vector<double> alpha(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            alpha[static_cast<size_t>(i)] =
                rho_hist[static_cast<size_t>(i)] * s_hist[static_cast<size_t>(i)].dot(q);
            q -= alpha[static_cast<size_t>(i)] * y_hist[static_cast<size_t>(i)];
        }
        double gamma = 1.0;
        if (!s_hist.empty()) {
            const double yy = y_hist.back().squaredNorm();
            if (yy > 0) gamma = s_hist.back().dot(y_hist.back()) / yy;
        }
        Eigen::VectorXd z = gamma * q;
        for (size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(z);
            z += (alpha[i] - beta) * s_hist[i];
        }
        Eigen::VectorXd dir = -z;
        double slope = g.dot(dir);
        if (slope >= 0.0) {  // fall back to steepest descent
            dir = -g;
            slope = -g.squaredNorm();
        }

        // Armijo backtracking.
        double t = 1.0;
        const double c1 = 1e-4;
        Eigen::VectorXd xn;
        double fn = fx;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            xn = x + t * dir;
            fn = f(xn);
            if (fn <= fx + c1 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;

        const Eigen::VectorXd gn = central_diff_gradient(f, xn, opts.fd_step);
        const Eigen::VectorXd s = xn - x;
        const Eigen::VectorXd y = gn - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opts.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        x = std::move(xn);
        fx = fn;
        g = gn;
        res.iters = iter + 1;
        if (s.lpNorm<Eigen::Infinity>() < opts.step_tol) {
            res.converged = true;
            break;
        }
    }
    res.x = std::move(x);
    res.f = fx;
    return res;
}

GaussNewtonResult gauss_newton_least_squares(const ResidualFn& F, Eigen::VectorXd x0,
                                             const GaussNewtonOptions& opts) {
    GaussNewtonResult res;
    Eigen::VectorXd x = std::move(x0);
    Eigen::VectorXd r = F(x);
    double rn = r.norm();
    double lambda = opts.lambda0;
    Eigen::MatrixXd J;
    bool have_jac = false;

    for (int iter = 0; iter < opts.max_iters; ++iter) {
        if (rn < opts.residual_tol) {
            res.converged = true;
            break;
        }
        J = central_diff_jacobian(F, x, opts.fd_step);
        have_jac = true;
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd Jtr = J.transpose() * r;
        bool improved = false;
        for (int attempt = 0; attempt < 12; ++attempt) {
            Eigen::MatrixXd A = JtJ;
            A.diagonal().array() += lambda * (JtJ.trace() / static_cast<double>(JtJ.rows()) + 1e-30);
            const Eigen::VectorXd step = A.ldlt().solve(-Jtr);
            const Eigen::VectorXd xn = x + step;
            const Eigen::VectorXd rnew = F(xn);
            if (rnew.norm() < rn) {
                x = xn;
                r = rnew;
                rn = r.norm();
                lambda = std::max(lambda * 0.25, 1e-14);
                improved = true;
                break;
            }
            lambda *= 8.0;
        }
        res.iters = iter + 1;
        if (!improved) break;
    }
    if (rn < opts.residual_tol) res.converged = true;
    if (!have_jac) J = central_diff_jacobian(F, x, opts.fd_step);
    res.x = std::move(x);
    res.residual_norm = rn;
    res.jacobian = std::move(J);
    return res;
}

}  // namespace carnot
