#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace alqed {

struct OptimizerOptions {
    int max_iterations = 300;
    double relative_tolerance = 1e-12;  // on the objective decrease
    double step_tolerance = 1e-12;      // on the relative parameter step
    double initial_damping = 1e-3;
};

struct OptimizerResult {
    Eigen::VectorXd params;
    double objective = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd covariance;  // in the fitted parametrization
    bool converged = false;
    int iterations = 0;
};

namespace detail {

// Central-difference Jacobian of a vector-valued model.
template <class Model>
Eigen::MatrixXd numeric_jacobian(Model& model, const Eigen::VectorXd& p, Eigen::Index rows) {
    Eigen::MatrixXd jac(rows, p.size());
    Eigen::VectorXd plus(rows), minus(rows);
    Eigen::VectorXd probe = p;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(p[k]));
        probe[k] = p[k] + h;
        model(probe, plus);
        probe[k] = p[k] - h;
        model(probe, minus);
        probe[k] = p[k];
        jac.col(k) = (plus - minus) / (2.0 * h);
    }
    return jac;
}

inline Eigen::MatrixXd safe_inverse(const Eigen::MatrixXd& m) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(m);
    return cod.pseudoInverse();
}

template <class Objective, class Step>
OptimizerResult damped_newton(Objective&& objective, Step&& linearize, Eigen::VectorXd params,
                              const OptimizerOptions& options) {
    OptimizerResult result;
    double damping = options.initial_damping;
    double current = objective(params);
    if (!std::isfinite(current)) {
        result.params = params;
        return result;
    }
    Eigen::VectorXd gradient;
    Eigen::MatrixXd curvature;
    int iter = 0;
    bool converged = false;
    for (; iter < options.max_iterations && !converged; ++iter) {
        linearize(params, gradient, curvature);
        bool accepted = false;
        while (!accepted && damping < 1e16) {
            Eigen::MatrixXd damped = curvature;
            for (Eigen::Index k = 0; k < damped.rows(); ++k)
                damped(k, k) += damping * std::max(curvature(k, k), 1e-12);
            const Eigen::VectorXd step = damped.ldlt().solve(-gradient);
            if (!step.allFinite()) {
                damping *= 10.0;
                continue;
            }
            const Eigen::VectorXd trial = params + step;
            const double value = objective(trial);
            if (std::isfinite(value) && value <= current) {
                const double decrease = current - value;
                const double scale = std::max(1.0, std::abs(current));
                const double step_size = step.norm() / std::max(1.0, params.norm());
                params = trial;
                current = value;
                damping = std::max(damping / 10.0, 1e-15);
                accepted = true;
                if (decrease <= options.relative_tolerance * scale || step_size <= options.step_tolerance)
                    converged = true;
            } else {
                damping *= 10.0;
            }
        }
        if (!accepted) {
            // no downhill step at any damping: stationary to working precision
            converged = gradient.allFinite();
            break;
        }
    }
    linearize(params, gradient, curvature);
    result.params = params;
    result.objective = current;
    result.covariance = safe_inverse(curvature);
    result.converged = converged;
    result.iterations = iter;
    return result;
}

}  // namespace detail

/// Levenberg-Marquardt minimization of sum(residual^2)/2.
/// `residual(params, out)` fills `out` (length `count`).
/// Covariance is (J^T J)^-1 scaled by the residual variance.
template <class Residual>
OptimizerResult levenberg_marquardt(Residual&& residual, Eigen::VectorXd initial, Eigen::Index count,
                                    const OptimizerOptions& options = {}) {
    Eigen::VectorXd buffer(count);
    auto objective = [&](const Eigen::VectorXd& p) {
        residual(p, buffer);
        return buffer.allFinite() ? 0.5 * buffer.squaredNorm() : std::numeric_limits<double>::infinity();
    };
    auto linearize = [&](const Eigen::VectorXd& p, Eigen::VectorXd& gradient, Eigen::MatrixXd& curvature) {
        Eigen::VectorXd r(count);
        residual(p, r);
        const Eigen::MatrixXd jac = detail::numeric_jacobian(residual, p, count);
        gradient = jac.transpose() * r;
        curvature = jac.transpose() * jac;
    };
    auto result = detail::damped_newton(objective, linearize, std::move(initial), options);
    const double dof = std::max<double>(1.0, static_cast<double>(count - result.params.size()));
    result.covariance *= 2.0 * result.objective / dof;
    return result;
}

/// Maximum-likelihood fit of Poisson counts by Fisher scoring with
/// Marquardt damping. `expected(params, out)` fills the expected counts per
/// bin. Objective is the negative log-likelihood without the log(n!) term;
/// covariance is the inverse Fisher information.
template <class Expected>
OptimizerResult poisson_maximum_likelihood(Expected&& expected, const Eigen::VectorXd& counts,
                                           Eigen::VectorXd initial, const OptimizerOptions& options = {}) {
    const Eigen::Index bins = counts.size();
    Eigen::VectorXd mu(bins);
    auto objective = [&](const Eigen::VectorXd& p) {
        expected(p, mu);
        double nll = 0.0;
        for (Eigen::Index i = 0; i < bins; ++i) {
            if (!(mu[i] > 0.0) || !std::isfinite(mu[i])) return std::numeric_limits<double>::infinity();
            nll += mu[i] - (counts[i] > 0.0 ? counts[i] * std::log(mu[i]) : 0.0);
        }
        return nll;
    };
    auto linearize = [&](const Eigen::VectorXd& p, Eigen::VectorXd& gradient, Eigen::MatrixXd& curvature) {
        Eigen::VectorXd m(bins);
        expected(p, m);
        const Eigen::MatrixXd jac = detail::numeric_jacobian(expected, p, bins);
        const Eigen::VectorXd weight = m.cwiseInverse();
        gradient = jac.transpose() * (Eigen::VectorXd::Ones(bins) - counts.cwiseProduct(weight));
        curvature = jac.transpose() * weight.asDiagonal() * jac;
    };
    return detail::damped_newton(objective, linearize, std::move(initial), options);
}

}  // namespace alqed
