#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace qoct {

// Fills `residuals` (size fixed per problem) for a parameter vector.
using ResidualFunction =
    std::function<void(std::span<const double> params, std::span<double> residuals)>;

// y = model(x, params) for curve fitting.
using CurveModel = std::function<double(double x, std::span<const double> params)>;

struct LeastSquaresOptions {
    int max_iterations = 200;
    double initial_damping = 1e-9;  // relative to diag(J^T J)
    double cost_tolerance = 1e-15;  // relative cost reduction
    double step_tolerance = 1e-12;  // relative parameter change
    double gradient_tolerance = 1e-10;  // max |cos| between residuals and a Jacobian column
    double fd_relative_step = 1e-7;
    // Scale the covariance by the residual variance SSR / (m - n). Off when
    // residuals are already normalised by known standard deviations.
    bool scale_covariance = true;
    int max_damping_retries = 40;
};

struct Bounds {
    std::vector<double> lower;
    std::vector<double> upper;

    static Bounds unbounded(std::size_t n) {
        return {std::vector<double>(n, -std::numeric_limits<double>::infinity()),
                std::vector<double>(n, std::numeric_limits<double>::infinity())};
    }
};

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<double> errors;  // 1-sigma; zero for fixed parameters
    Eigen::MatrixXd covariance;  // full size, zero rows/cols for fixed parameters
    double residual_norm = 0.0;  // sqrt(sum r^2)
    double condition = 0.0;      // condition number of the free-parameter Jacobian
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string message;

    double value(const std::string& name) const;
    double error(const std::string& name) const;
    std::size_t index(const std::string& name) const;
};

struct FitProblem {
    ResidualFunction residuals;
    std::size_t residual_count = 0;
    std::vector<double> initial;
    std::vector<std::string> names;       // optional; defaults to p0, p1, ...
    std::vector<bool> fixed;              // optional; empty means all free
    Bounds bounds;                        // optional; empty means unbounded
};

// Levenberg-Marquardt with Nielsen damping updates, central-difference
// Jacobians and box bounds by projection. Accepted steps never increase the
// cost. Throws NumericalError when the normal equations stay singular after
// damping retries; returns converged = false on iteration exhaustion.
FitResult damped_least_squares(const FitProblem& problem,
                               const LeastSquaresOptions& options = {});

// Curve-fitting adapter: residual_i = w_i (model(x_i, p) - y_i), where w_i
// are optional square-root weights.
FitProblem curve_problem(CurveModel model, std::span<const double> x, std::span<const double> y,
                         std::vector<double> initial, std::vector<std::string> names = {},
                         std::span<const double> sqrt_weights = {});

// Central-difference Jacobian (rows: residuals, cols: parameters). Exposed for
// the gradient self-check.
Eigen::MatrixXd finite_difference_jacobian(const ResidualFunction& f, std::size_t residual_count,
                                           std::span<const double> params,
                                           double relative_step);

}  // namespace qoct
