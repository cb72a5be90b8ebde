#pragma once
#include <vector>

#include "acvmlr/acv.hpp"

namespace acvmlr {

struct SaacvOptions {
    double theta = 1e-6;
    long max_sweeps = 1000;
    /// Initial damping gamma in chi <- (1 - gamma) new + gamma old.
    double damping = 0.0;
};

/**
 * Converged per-feature susceptibilities.
 *
 * chi_i depends on feature i only through its active-class pattern, so the
 * state stores one compact |A_i| x |A_i| block per distinct pattern.
 */
struct SaState {
    std::vector<std::vector<int>> patterns;  // distinct non-empty A_i
    std::vector<Matrix> pattern_chi;         // compact blocks, one per pattern
    std::vector<long> pattern_count;         // features sharing each pattern
    std::vector<int> feature_pattern;        // feature -> pattern index, -1 if inactive
    Matrix c_sa;
    double sigma_x2 = 0.0;
    long iterations = 0;
    bool converged = false;
    double final_residual = 0.0;
    double damping = 0.0;
    std::size_t zero_modes_removed = 0;
    std::uint64_t cost = 0;

    /// chi_i embedded in L x L, zero outside A_i x A_i.
    Matrix chi(int feature) const;
};

SaState saacv_fixed_point(const Dataset& data, const WeightMatrix& w, double lambda2,
                          const SaacvOptions& options = {});

/// Delta/N of one more substitution sweep applied to state (state is unchanged).
double fixed_point_residual(const Dataset& data, const WeightMatrix& w, double lambda2, const SaState& state);

struct SaacvResult {
    AcvResult estimate;
    SaState state;
};

/// Self-averaging estimate u + C_SA b for every sample.
SaacvResult saacv(const Dataset& data, const FitResult& fit, const SaacvOptions& options = {});
SaacvResult saacv(const Dataset& data, const WeightMatrix& w, double lambda2, const SaacvOptions& options = {});

} // namespace acvmlr
