#pragma once
#include <functional>
#include <vector>

#include "acvmlr/acv.hpp"

namespace acvmlr::binomial {

/// Two-class model u = x . w with labels y in {0, 1}.
struct LogitFit {
    Vector weights; // length N
};

struct Derivatives {
    double first = 0.0;
    double second = 0.0;
};

/// dq/du and d2q/du2 of q = -ln phi_logit(y | u), overflow-safe.
Derivatives logit_derivatives(double u, int y);

/// Per-sample loss in the overlap u, for any twice-differentiable output function.
struct ScalarLoss {
    std::function<double(double u, int y)> value;
    std::function<Derivatives(double u, int y)> derivatives;
};

ScalarLoss logit_loss();

/**
 * Rank-one leave-one-out formula for a scalar-overlap model:
 *
 *   u^{\mu} = u + c / (1 - q'' c) * q',   c = x_A^T G_AA^{-1} x_A,
 *
 * with G_AA = sum_mu q'' x x^T + lambda2 I. labels are 0/1.
 * Samples with 1 - q'' c <= 1e-12 fall back to u + c q' and are flagged.
 */
AcvResult acv_scalar(const Matrix& features, const std::vector<int>& labels, const Vector& w, double lambda2,
                     const ScalarLoss& loss);

/// Logit specialization. data must have two classes; class index 0 is y = 0.
AcvResult acv_logit(const Dataset& data, const LogitFit& fit, double lambda2);

/// Zero-gauge embedding as an L = 2 weight matrix: row 0 pinned at zero, row 1 = w.
WeightMatrix embed_zero_gauge(const LogitFit& fit);

/// Maps file labels {0,1} or {1,2} to 0-based {0,1}; {1,2} sends class 1 to y = 0.
std::vector<int> code_binary_labels(const std::vector<int>& raw);

} // namespace acvmlr::binomial
