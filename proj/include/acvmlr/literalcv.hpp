#pragma once
#include <cstdint>
#include <optional>
#include <vector>

#include "acvmlr/solver.hpp"

namespace acvmlr {

/// Fold index (0-based) per sample.
struct CvFolds {
    int k = 0;
    std::vector<int> assignment;
    std::uint64_t seed = 0;

    std::vector<int> members(int fold) const;
};

/// Shuffled assignment with fold sizes differing by at most one.
/// With stratify, the shuffle is dealt class by class.
CvFolds make_folds(const std::vector<int>& labels, int k, std::uint64_t seed, bool stratify = false);

struct LiteralCvOptions {
    FitOptions fit;
    bool stratify = false;
    /// Warm-start each fold from this solution (normally the full-data fit).
    const WeightMatrix* warm_start = nullptr;
    /// Concurrent fold refits; 1 runs sequentially.
    int workers = 1;
};

struct LiteralCvResult {
    double eps_cv = 0.0;          // mean held-out NLL over samples of valid folds
    std::vector<double> fold_loss; // mean held-out NLL per fold
    std::vector<bool> fold_valid;  // false when the fold refit did not converge
    Vector per_sample_loss;        // held-out NLL, indexed by sample
    bool all_valid = true;
    CvFolds folds;
};

/// Refits on each fold's complement and scores the held-out samples. k = M is leave-one-out.
LiteralCvResult literal_cv(const Dataset& data, const HyperParams& hyper, int k, std::uint64_t seed,
                           const LiteralCvOptions& options = {});

/// (approx - literal) / literal; empty when literal <= 0.
std::optional<double> normalized_error_difference(double approx, double literal);

/// Rows of data selected by index.
Dataset subset(const Dataset& data, const std::vector<int>& rows);

} // namespace acvmlr
