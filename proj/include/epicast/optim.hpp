#pragma once

// Dense BFGS minimizer with Armijo backtracking, plus finite-difference
// helpers for gradient checks and observed-information matrices.

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace epicast {

/// Objective callback: returns f(x) and, when grad is non-null, fills the
/// gradient at x.
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct OptimSettings {
    // Convergence on the max-norm of the gradient, relative to max(1, |f|):
    // an absolute threshold is unreachable in double precision once |f| is
    // large (log-likelihoods run into the thousands).
    double grad_tol = 1e-8;
    int max_iterations = 500;
    double armijo_c1 = 1e-4;
    int max_backtracks = 60;
};

struct OptimResult {
    Eigen::VectorXd x;
    double fx = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd gradient;
    int iterations = 0;
    bool converged = false;
};

/// Minimizes f from x0. Non-finite trial values are treated as rejected
/// steps (the line search backs off), so log-likelihood domains with soft
/// boundaries are handled without explicit constraints.
inline OptimResult bfgs_minimize(const ObjectiveFn& f, Eigen::VectorXd x0, OptimSettings settings = {}) {
    const Eigen::Index p = x0.size();
    if (p == 0) throw std::invalid_argument("bfgs_minimize: empty parameter vector");

    Eigen::VectorXd x = std::move(x0);
    Eigen::VectorXd grad(p);
    double fx = f(x, &grad);
    if (!std::isfinite(fx) || !grad.allFinite())
        throw std::domain_error("bfgs_minimize: objective not finite at the initial point");

    Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(p, p);
    OptimResult result;
    int iter = 0;
    bool first_update = true;
    const auto grad_small = [&settings](const Eigen::VectorXd& g, double f) {
        return g.cwiseAbs().maxCoeff() <= settings.grad_tol * std::max(1.0, std::abs(f));
    };
    for (; iter < settings.max_iterations; ++iter) {
        if (grad_small(grad, fx)) {
            result.converged = true;
            break;
        }
        Eigen::VectorXd dir = -(h_inv * grad);
        double slope = grad.dot(dir);
        if (!(slope < 0.0)) {  // not a descent direction; reset to steepest descent
            h_inv.setIdentity();
            dir = -grad;
            slope = grad.dot(dir);
        }

        double step = 1.0;
        double f_new = std::numeric_limits<double>::quiet_NaN();
        Eigen::VectorXd x_new, grad_new(p);
        bool accepted = false;
        for (int bt = 0; bt < settings.max_backtracks; ++bt) {
            x_new = x + step * dir;
            f_new = f(x_new, &grad_new);
            if (std::isfinite(f_new) && grad_new.allFinite() &&
                f_new <= fx + settings.armijo_c1 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // line search stalled; report non-convergence unless grad is tiny

        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = grad_new - grad;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (first_update) {  // scale the seed matrix to the local curvature
                h_inv *= sy / y.squaredNorm();
                first_update = false;
            }
            const double rho = 1.0 / sy;
            const Eigen::VectorXd hy = h_inv * y;
            // Sherman-Morrison form of the BFGS inverse update.
            h_inv += (sy + y.dot(hy)) * rho * rho * (s * s.transpose()) -
                     rho * (hy * s.transpose() + s * hy.transpose());
        }
        x = std::move(x_new);
        fx = f_new;
        grad = grad_new;
    }

    result.x = std::move(x);
    result.fx = fx;
    result.iterations = iter;
    if (!result.converged) result.converged = grad_small(grad, fx);
    result.gradient = std::move(grad);
    return result;
}

/// Central finite-difference gradient of a value-only objective.
inline Eigen::VectorXd central_fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& x, double step = 1e-6) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = step * std::max(1.0, std::abs(x(i)));
        xp(i) = x(i) + h;
        const double fp = f(xp);
        xp(i) = x(i) - h;
        const double fm = f(xp);
        xp(i) = x(i);
        g(i) = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// Symmetrized central finite-difference Jacobian of a gradient function —
/// the Hessian estimate behind observed-information covariances.
inline Eigen::MatrixXd fd_hessian_from_gradient(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_fn, const Eigen::VectorXd& x,
    double step = 1e-5) {
    const Eigen::Index p = x.size();
    Eigen::MatrixXd hess(p, p);
    Eigen::VectorXd xp = x;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double h = step * std::max(1.0, std::abs(x(j)));
        xp(j) = x(j) + h;
        const Eigen::VectorXd gp = grad_fn(xp);
        xp(j) = x(j) - h;
        const Eigen::VectorXd gm = grad_fn(xp);
        xp(j) = x(j);
        hess.col(j) = (gp - gm) / (2.0 * h);
    }
    return 0.5 * (hess + hess.transpose());
}

}  // namespace epicast
