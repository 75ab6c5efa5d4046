#pragma once

// Levenberg-Marquardt for small dense least-squares problems,
// min_x sum_i r_i(x)^2, with a forward-difference Jacobian.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pwh {

struct LMConfig {
    double initial_damping = 1e-3;     ///< relative to the largest diagonal entry of J^T J
    double gradient_tolerance = 1e-10; ///< on max |J^T r|
    double step_tolerance = 1e-12;     ///< relative step size
    int max_iterations = 200;
    double fd_step = 1e-6;             ///< relative forward-difference step
};

enum class LMStatus { GradientTolerance, StepTolerance, ZeroResidual, MaxIterations, NonFinite };

inline const char* to_string(LMStatus s) {
    switch (s) {
        case LMStatus::GradientTolerance: return "gradient tolerance reached";
        case LMStatus::StepTolerance: return "step tolerance reached";
        case LMStatus::ZeroResidual: return "zero residual";
        case LMStatus::MaxIterations: return "maximum iterations reached";
        case LMStatus::NonFinite: return "non-finite residuals at start point";
    }
    return "unknown";
}

struct LMResult {
    Eigen::VectorXd x;
    Eigen::VectorXd residuals;
    double objective = 0.0;  ///< sum of squared residuals
    int iterations = 0;
    int evaluations = 0;
    LMStatus status = LMStatus::MaxIterations;
    std::vector<double> history;  ///< objective after each accepted step

    bool converged() const { return status != LMStatus::MaxIterations && status != LMStatus::NonFinite; }
};

/// `residuals(x)` returns an Eigen::VectorXd. Non-finite residuals at a trial
/// point count as a rejected step.
template <class F>
LMResult levenberg_marquardt(F&& residuals, Eigen::VectorXd x0, const LMConfig& cfg = {}) {
    const Eigen::Index n = x0.size();
    LMResult out;
    out.x = std::move(x0);
    out.residuals = residuals(out.x);
    ++out.evaluations;
    if (!out.residuals.allFinite()) {
        out.objective = std::numeric_limits<double>::infinity();
        out.status = LMStatus::NonFinite;
        return out;
    }
    out.objective = out.residuals.squaredNorm();
    out.history.push_back(out.objective);

    auto jacobian = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& r0) {
        Eigen::MatrixXd J(r0.size(), n);
        for (Eigen::Index k = 0; k < n; ++k) {
            Eigen::VectorXd xh = x;
            const double h = cfg.fd_step * std::max(1.0, std::abs(x[k]));
            xh[k] += h;
            const double hk = xh[k] - x[k];
            J.col(k) = (residuals(xh) - r0) / hk;
            ++out.evaluations;
        }
        return J;
    };

    Eigen::MatrixXd J = jacobian(out.x, out.residuals);
    Eigen::MatrixXd A = J.transpose() * J;
    Eigen::VectorXd g = J.transpose() * out.residuals;
    double mu = cfg.initial_damping * std::max(A.diagonal().maxCoeff(), 1e-300);
    double nu = 2.0;

    while (out.iterations < cfg.max_iterations) {
        if (out.objective == 0.0) {
            out.status = LMStatus::ZeroResidual;
            return out;
        }
        if (g.lpNorm<Eigen::Infinity>() <= cfg.gradient_tolerance) {
            out.status = LMStatus::GradientTolerance;
            return out;
        }
        ++out.iterations;
        Eigen::MatrixXd damped = A;
        damped.diagonal().array() += mu;
        const Eigen::VectorXd step = damped.ldlt().solve(-g);
        if (step.norm() <= cfg.step_tolerance * (out.x.norm() + cfg.step_tolerance)) {
            out.status = LMStatus::StepTolerance;
            return out;
        }
        const Eigen::VectorXd trial = out.x + step;
        const Eigen::VectorXd r_trial = residuals(trial);
        ++out.evaluations;
        const double f_trial = r_trial.allFinite() ? r_trial.squaredNorm() : std::numeric_limits<double>::infinity();
        // predicted decrease of the quadratic model
        const double predicted = step.dot(mu * step - g);
        const double gain = predicted > 0.0 ? (out.objective - f_trial) / predicted : -1.0;
        if (gain > 0.0 && f_trial <= out.objective) {
            out.x = trial;
            out.residuals = r_trial;
            out.objective = f_trial;
            out.history.push_back(f_trial);
            J = jacobian(out.x, out.residuals);
            A = J.transpose() * J;
            g = J.transpose() * out.residuals;
            mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * gain - 1.0, 3));
            nu = 2.0;
        } else {
            mu *= nu;
            nu *= 2.0;
        }
    }
    out.status = LMStatus::MaxIterations;
    return out;
}

}  // namespace pwh
