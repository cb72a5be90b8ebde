#pragma once
#include <optional>
#include <vector>

#include "acvmlr/model.hpp"

namespace acvmlr {

/**
 * Penalty in the per-sample-mean parameterization
 *
 *   (1/M) sum_mu q_mu + lambda_tilde * sum_a ( eta * pf_a * |w_a|_1 + (1 - eta)/2 * |w_a|_2^2 ).
 *
 * The corresponding sum-form coefficients are lambda1 = M lambda_tilde eta
 * and lambda2 = M lambda_tilde (1 - eta). class_l1_factors (pf_a) defaults
 * to all ones; it carries the class-adaptive l1 coefficients used after
 * class-wise rescaling.
 */
struct HyperParams {
    double lambda_tilde = 1.0;
    double eta = 1.0;
    std::vector<double> class_l1_factors;

    double lambda1(Eigen::Index m) const { return static_cast<double>(m) * lambda_tilde * eta; }
    double lambda2(Eigen::Index m) const { return static_cast<double>(m) * lambda_tilde * (1.0 - eta); }

    /// l1 coefficient of class a in the mean-form objective.
    double l1_mean(int cls) const;
    /// l2 coefficient in the mean-form objective.
    double l2_mean() const { return lambda_tilde * (1.0 - eta); }

    void validate(int n_classes) const;
};

struct FitOptions {
    double tol_delta = 1e-8;
    double tol_kkt = 1e-6;
    long max_iter = 100000; // coordinate sweeps
    /// Weights of this class are pinned at zero (zero gauge). Off by default.
    std::optional<int> zero_gauge_class;
    /// Record the objective after every outer step (for monotonicity checks).
    bool trace_objective = false;
};

struct FitResult {
    WeightMatrix weights;
    HyperParams hyper;
    double objective = 0.0;
    bool converged = false;
    long iterations = 0;      // coordinate sweeps
    long newton_steps = 0;
    long fallback_steps = 0;  // proximal-gradient steps
    double kkt_violation = 0.0;
    std::vector<double> objective_trace;
};

/// Mean-form objective at w.
double objective(const Dataset& data, const WeightMatrix& w, const HyperParams& hyper);

/// Gradient of (1/M) sum_mu q_mu with respect to W, as L x N.
Matrix smooth_gradient(const Dataset& data, const WeightMatrix& w);

/// Largest stationarity residual of the mean-form objective.
double kkt_violation(const Dataset& data, const WeightMatrix& w, const HyperParams& hyper,
                     std::optional<int> zero_gauge_class = std::nullopt);

/**
 * Smallest lambda_tilde for which the all-zero matrix is optimal.
 * eta = 0 has no such value; it is evaluated as if eta were 1e-3.
 */
double lambda_max(const Dataset& data, double eta, const std::vector<double>& class_l1_factors = {});

/// count points log-spaced from hi down to hi * 10^-decades.
std::vector<double> log_grid(double hi, double decades, int count);

/**
 * Proximal Newton with coordinate-descent inner solves over a working set,
 * Armijo backtracking and a proximal-gradient fallback.
 * Non-convergence is reported through FitResult::converged.
 */
FitResult fit(const Dataset& data, const HyperParams& hyper, const FitOptions& options = {},
              const WeightMatrix* warm_start = nullptr);

/// Fits a strictly decreasing lambda grid with warm starts.
std::vector<FitResult> fit_path(const Dataset& data, const std::vector<double>& lambda_grid, double eta,
                                const FitOptions& options = {},
                                const std::vector<double>& class_l1_factors = {});

} // namespace acvmlr
