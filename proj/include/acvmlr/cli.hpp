#pragma once
#include <iosfwd>
#include <string>
#include <vector>

#include "acvmlr/datagen.hpp"

namespace acvmlr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitBadInput = 2;
inline constexpr int kExitNoConvergence = 3;

/**
 * Generator spec as JSON:
 *
 *   {"n_features": 200, "n_classes": 8, "alpha": 2, "rho0": 0.5,
 *    "sigma_xi2": 0.01, "seed": 1,
 *    "variant": {"type": "amplified", "classes": [5, 6, 7, 8], "omega": 100}}
 *
 * Variant types: plain, common_components (r_common), correlated_noise
 * (corr), amplified (1-based classes, omega). Missing keys take defaults;
 * unknown keys throw ParseError.
 */
datagen::SynthSpec parse_synth_spec(const std::string& json_text);

/// Runs `acvmlr <command> ...`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace acvmlr::cli
