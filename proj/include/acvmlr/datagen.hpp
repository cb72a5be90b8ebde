#pragma once
#include <cstdint>
#include <variant>
#include <vector>

#include "acvmlr/model.hpp"

namespace acvmlr::datagen {

struct Plain {};

/// Each class copies a fraction r_common of its support (positions and values) from one shared row.
struct CommonComponents {
    double r_common = 0.9;
};

/// Noise components with pairwise correlation corr.
struct CorrelatedNoise {
    double corr = 0.9;
};

/// x_mu -> omega * x_mu for samples whose class is listed (0-based).
struct Amplified {
    std::vector<int> classes;
    double omega = 100.0;
};

using Variant = std::variant<Plain, CommonComponents, CorrelatedNoise, Amplified>;

/**
 * Synthetic ensemble: Bernoulli-Gaussian true weights (density rho0,
 * nonzero variance 1/rho0), uniform labels, and
 *
 *   x_mu = w0_{y_mu} / sqrt(N) + xi,   xi ~ N(0, sigma_xi2).
 *
 * M = round(alpha * N).
 */
struct SynthSpec {
    int n_features = 200;
    int n_classes = 8;
    double alpha = 2.0;
    double rho0 = 0.5;
    double sigma_xi2 = 0.01;
    Variant variant = Plain{};
    std::uint64_t seed = 1;

    int n_samples() const;
    void validate() const;
};

WeightMatrix gen_true_weights(const SynthSpec& spec);

Dataset gen_dataset(const WeightMatrix& true_w, const SynthSpec& spec);

struct Rescaled {
    Dataset data;
    std::vector<double> factors;   // Omega_a per class
    std::vector<int> empty_classes; // factor left at 1
};

/// Multiplies each class's samples by Omega_a so every class has the global mean feature norm.
Rescaled rescale_by_class(const Dataset& data);

} // namespace acvmlr::datagen
