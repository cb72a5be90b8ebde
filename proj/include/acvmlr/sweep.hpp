#pragma once
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "acvmlr/acv.hpp"
#include "acvmlr/model.hpp"

namespace acvmlr {

inline constexpr int kReportSchemaVersion = 1;

struct SweepConfig {
    /// Explicit grid; when empty, n_lambda points from lambda_max down by `decades`.
    std::vector<double> lambda_grid;
    int n_lambda = 50;
    double decades = 4.0;
    double eta = 1.0;

    bool run_acv = true;
    bool run_saacv = true;
    /// Literal k-fold CV; 0 means leave-one-out (k = M).
    std::optional<int> literal_k;
    bool literal_cold_start = false;
    bool stratify = false;
    int workers = 1;

    std::uint64_t seed = 0;
    double tol_delta = 1e-8;
    double theta = 1e-6;
    long max_iter = 100000;
    long max_sweeps = 1000;

    bool rescale_by_class = false;
    bool add_constant_feature = false;
    bool record_timings = true;
};

struct StageTimes {
    double fit = 0.0;
    double acv = 0.0;
    double saacv = 0.0;
    double literal = 0.0;
};

struct LambdaRecord {
    double lambda_tilde = 0.0;
    std::string status; // "converged" | "not_converged" | "failed"
    double training_error = 0.0;
    std::optional<double> eps_acv, eps_saacv, eps_literal;
    std::optional<double> ned_acv, ned_saacv;
    long active_set_size = 0;
    long zero_modes_removed = 0;
    double kkt_violation = 0.0;
    long solver_sweeps = 0;
    long saacv_sweeps = 0;
    std::uint64_t acv_cost = 0;
    std::uint64_t saacv_cost = 0;
    std::vector<std::string> flags;
    StageTimes times;

    bool converged() const { return status == "converged"; }
};

struct ArgminEntry {
    int index = -1;
    double lambda_tilde = 0.0;
    double value = 0.0;
};

struct Provenance {
    std::uint64_t seed = 0;
    double tol_delta = 0.0;
    double theta = 0.0;
    std::string dataset_digest;
    long n_samples = 0;
    long n_features = 0;
    int n_classes = 0;
    std::optional<int> literal_k;
    bool rescale_by_class = false;
    std::vector<double> class_factors;
};

struct CvReport {
    int schema_version = kReportSchemaVersion;
    std::vector<double> lambda_grid;
    double eta = 1.0;
    std::vector<LambdaRecord> records;
    std::map<std::string, ArgminEntry> argmin; // keyed by estimator name
    Provenance provenance;
    double total_fit_time = 0.0;

    bool any_converged() const;
};

/// Argmin of each estimator column over converged points.
std::map<std::string, ArgminEntry> compute_argmin(const std::vector<LambdaRecord>& records);

/// Fits the path and runs the requested estimators at every point.
CvReport run_sweep(const Dataset& data, const SweepConfig& config);

} // namespace acvmlr
