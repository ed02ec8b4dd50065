#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Dense>

namespace sleepeda {

struct OptimizeOptions {
    double gradient_tolerance = 1e-6;  // max-norm of the gradient
    int max_iterations = 1000;
};

struct OptimizeResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    int iterations = 0;
    bool converged = false;
};

// BFGS with backtracking Armijo line search. The objective is called as
// f(x, grad) and must fill *grad when grad is non-null; line-search probes
// pass null. An infeasible point may return +infinity instead of throwing:
// the line search backtracks away from it, and a non-finite value never
// counts as converged.
template <typename F>
OptimizeResult bfgs_minimize(F&& f, Eigen::VectorXd x0, OptimizeOptions options = {}) {
    const auto dim = x0.size();
    OptimizeResult result;
    result.x = std::move(x0);
    result.gradient.resize(dim);
    result.value = f(result.x, &result.gradient);

    Eigen::MatrixXd inv_hessian = Eigen::MatrixXd::Identity(dim, dim);
    bool have_curvature = false;

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        if (std::isfinite(result.value) &&
            result.gradient.template lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
            result.converged = true;
            return result;
        }
        result.iterations = iter + 1;

        Eigen::VectorXd direction = -(inv_hessian * result.gradient);
        double slope = direction.dot(result.gradient);
        if (!(slope < 0.0)) {
            // Rounding spoiled descent; restart from steepest descent.
            inv_hessian.setIdentity();
            have_curvature = false;
            direction = -result.gradient;
            slope = direction.dot(result.gradient);
        }

        constexpr double kArmijo = 1e-4;
        double step = 1.0;
        double trial_value = 0.0;
        Eigen::VectorXd trial;
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            trial = result.x + step * direction;
            trial_value = f(trial, nullptr);
            if (std::isfinite(trial_value) &&
                trial_value <= result.value + kArmijo * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) return result;  // stuck: no decrease along a descent direction

        Eigen::VectorXd new_gradient(dim);
        const double new_value = f(trial, &new_gradient);
        const Eigen::VectorXd s = trial - result.x;
        const Eigen::VectorXd y = new_gradient - result.gradient;
        result.x = std::move(trial);
        result.value = new_value;
        result.gradient = std::move(new_gradient);

        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (!have_curvature) {
                // Scale the initial metric to the observed curvature before
                // the first update; a bare identity stalls badly scaled
                // problems.
                inv_hessian = (sy / y.squaredNorm()) * Eigen::MatrixXd::Identity(dim, dim);
                have_curvature = true;
            }
            const double rho = 1.0 / sy;
            const Eigen::VectorXd hy = inv_hessian * y;
            inv_hessian += (rho * rho * (y.dot(hy)) + rho) * (s * s.transpose()) -
                           rho * (hy * s.transpose() + s * hy.transpose());
        }
    }
    result.converged =
        std::isfinite(result.value) &&
        result.gradient.template lpNorm<Eigen::Infinity>() < options.gradient_tolerance;
    return result;
}

}  // namespace sleepeda
