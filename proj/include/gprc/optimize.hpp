#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>

namespace gprc {

// Objective evaluated at x; fills *grad when non-null. May throw on
// numerically infeasible points, which the line search treats as +inf.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct OptimizerConfig {
    int max_iters = 200;
    double grad_tol = 1e-5;
    int n_restarts = 3;
    std::uint64_t seed = 0;
};

struct MinimizeResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    double grad_norm = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    bool evaluated = false;  // false if even the starting point failed
};

// BFGS with backtracking (Armijo) line search. Small dense problems only;
// the inverse Hessian approximation is kept explicitly.
inline MinimizeResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                                    const OptimizerConfig& cfg) {
    const int k = static_cast<int>(x0.size());
    MinimizeResult res;
    res.x = x0;

    auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) -> double {
        try {
            const double v = f(x, g);
            return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
        } catch (...) {
            return std::numeric_limits<double>::infinity();
        }
    };

    Eigen::VectorXd grad(k);
    double value = eval(res.x, &grad);
    if (!std::isfinite(value)) return res;
    res.evaluated = true;
    res.value = value;
    res.grad_norm = grad.lpNorm<Eigen::Infinity>();
    if (res.grad_norm < cfg.grad_tol) {
        res.converged = true;
        return res;
    }

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(k, k);
    constexpr double armijo_c = 1e-4;
    constexpr int max_backtracks = 40;

    for (int it = 0; it < cfg.max_iters; ++it) {
        Eigen::VectorXd dir = -(H * grad);
        double slope = grad.dot(dir);
        if (slope >= 0.0) {  // not a descent direction; reset curvature
            H.setIdentity();
            dir = -grad;
            slope = grad.dot(dir);
        }

        double step = 1.0;
        double new_value = std::numeric_limits<double>::infinity();
        Eigen::VectorXd x_new;
        int bt = 0;
        for (; bt < max_backtracks; ++bt) {
            x_new = res.x + step * dir;
            new_value = eval(x_new, nullptr);
            if (new_value <= res.value + armijo_c * step * slope) break;
            step *= 0.5;
        }
        if (bt == max_backtracks) break;  // no further progress possible

        Eigen::VectorXd grad_new(k);
        new_value = eval(x_new, &grad_new);
        if (!std::isfinite(new_value)) break;

        const Eigen::VectorXd s = x_new - res.x;
        const Eigen::VectorXd y = grad_new - grad;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(k, k);
            H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
                rho * s * s.transpose();
        }

        res.x = x_new;
        res.value = new_value;
        grad = grad_new;
        res.iterations = it + 1;
        res.grad_norm = grad.lpNorm<Eigen::Infinity>();
        if (res.grad_norm < cfg.grad_tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace gprc
