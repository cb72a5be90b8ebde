#pragma once
#include <cstdint>
#include <vector>

#include "acvmlr/model.hpp"
#include "acvmlr/solver.hpp"

namespace acvmlr {

/// Relative eigenvalue cutoff below which a Hessian mode counts as a zero mode.
inline constexpr double kZeroModeCutoff = 1e-10;
/// lambda2 above this value is "large": plain inversion, no zero-mode removal.
inline constexpr double kLargeLambda2 = 1e-6;
/// Per-sample (I - F C) condition estimate above which the sample is flagged.
inline constexpr double kIllConditioned = 1e12;

/// Operation counts, in multiply-adds, used to check cost scaling.
struct CostCounters {
    std::uint64_t hessian = 0;
    std::uint64_t factorization = 0;
    std::uint64_t per_sample = 0;
    std::uint64_t fixed_point = 0;

    std::uint64_t total() const { return hessian + factorization + per_sample + fixed_point; }
};

struct AcvResult {
    double looe = 0.0;
    Vector per_sample_nll;
    Matrix loo_overlaps; // M x L
    std::size_t zero_modes_removed = 0;
    std::vector<int> ill_conditioned_samples;
    std::size_t clamped = 0;
    CostCounters cost;
};

struct InverseResult {
    Matrix inverse;
    std::size_t zero_modes_removed = 0;
};

/**
 * Inverse of a symmetric Hessian. For lambda2 > kLargeLambda2 this is a
 * Cholesky inverse. Otherwise the matrix is eigendecomposed and modes with
 * d <= kZeroModeCutoff * max(d) (and all non-positive modes) are dropped:
 *
 *   Gbar^{-1} = sum_{d_i kept} d_i^{-1} v_i v_i^T.
 *
 * Throws DegenerateHessian if every mode is dropped.
 */
InverseResult zero_mode_removed_inverse(const Matrix& g, double lambda2);

/// C_mu(a,b) = sum over active (a,i), (b,j) of x_i x_j ginv_{(a,i),(b,j)}.
Matrix cmu(const Eigen::Ref<const Vector>& x_row, const Matrix& ginv, const ActiveSet& active);

struct CorrectionResult {
    Vector loo_overlap;
    bool ill_conditioned = false;
};

/// u + C (I - F C)^{-1} b through an LU solve; falls back to u + C b when ill-conditioned.
CorrectionResult loo_overlap_correction(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& b,
                                        const Matrix& f, const Matrix& c);

/// Approximate leave-one-out error from a single fit.
AcvResult acv(const Dataset& data, const FitResult& fit);

/// Same, from raw weights and the sum-form lambda2.
AcvResult acv(const Dataset& data, const WeightMatrix& w, double lambda2);

/// Builds a result from per-sample leave-one-out overlaps.
AcvResult finish_loo(const Dataset& data, Matrix loo_overlaps);

} // namespace acvmlr
