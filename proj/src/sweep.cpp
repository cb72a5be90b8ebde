#include "acvmlr/sweep.hpp"

#include <chrono>
#include <cmath>

#include "acvmlr/dataset_io.hpp"
#include "acvmlr/datagen.hpp"
#include "acvmlr/error.hpp"
#include "acvmlr/literalcv.hpp"
#include "acvmlr/saacv.hpp"
#include "acvmlr/solver.hpp"

namespace acvmlr {

namespace {

class Stopwatch {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void consider(std::map<std::string, ArgminEntry>& best, const std::string& name, int index, double lambda,
              const std::optional<double>& value)
{
    if (!value || !std::isfinite(*value)) return;
    auto it = best.find(name);
    if (it == best.end() || *value < it->second.value) best[name] = {index, lambda, *value};
}

} // namespace

bool CvReport::any_converged() const
{
    for (const auto& r : records)
        if (r.converged()) return true;
    return false;
}

std::map<std::string, ArgminEntry> compute_argmin(const std::vector<LambdaRecord>& records)
{
    std::map<std::string, ArgminEntry> best;
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto& r = records[k];
        if (!r.converged()) continue;
        const int idx = static_cast<int>(k);
        consider(best, "training", idx, r.lambda_tilde, r.training_error);
        consider(best, "acv", idx, r.lambda_tilde, r.eps_acv);
        consider(best, "saacv", idx, r.lambda_tilde, r.eps_saacv);
        consider(best, "literal", idx, r.lambda_tilde, r.eps_literal);
    }
    return best;
}

CvReport run_sweep(const Dataset& input, const SweepConfig& config)
{
    input.validate();
    Dataset data = config.add_constant_feature ? io::add_constant_feature(input) : input;

    CvReport report;
    report.eta = config.eta;
    std::vector<double> class_factors;
    if (config.rescale_by_class) {
        auto rescaled = datagen::rescale_by_class(data);
        data = std::move(rescaled.data);
        class_factors = rescaled.factors;
    }

    report.lambda_grid = config.lambda_grid;
    if (report.lambda_grid.empty()) {
        const double hi = lambda_max(data, config.eta, class_factors);
        if (!(hi > 0.0)) throw ContractViolation("lambda_max is zero; cannot build a default grid");
        report.lambda_grid = log_grid(hi, config.decades, config.n_lambda);
    }

    for (std::size_t k = 0; k < report.lambda_grid.size(); ++k) {
        HyperParams{report.lambda_grid[k], config.eta, class_factors}.validate(data.n_classes);
        if (k > 0 && !(report.lambda_grid[k] < report.lambda_grid[k - 1]))
            throw ContractViolation("lambda grid must be strictly decreasing");
    }
    if (config.literal_k && *config.literal_k != 0 &&
        (*config.literal_k < 2 || *config.literal_k > data.n_samples()))
        throw ContractViolation("literal CV fold count must lie in [2, M]");

    const auto m = static_cast<int>(data.n_samples());
    auto& prov = report.provenance;
    prov.seed = config.seed;
    prov.tol_delta = config.tol_delta;
    prov.theta = config.theta;
    prov.dataset_digest = io::digest_hex(input);
    prov.n_samples = static_cast<long>(data.n_samples());
    prov.n_features = static_cast<long>(data.n_features());
    prov.n_classes = data.n_classes;
    if (config.literal_k) prov.literal_k = *config.literal_k == 0 ? m : *config.literal_k;
    prov.rescale_by_class = config.rescale_by_class;
    prov.class_factors = class_factors;

    FitOptions fopt;
    fopt.tol_delta = config.tol_delta;
    fopt.max_iter = config.max_iter;
    SaacvOptions sopt;
    sopt.theta = config.theta;
    sopt.max_sweeps = config.max_sweeps;

    std::optional<WeightMatrix> previous;
    for (std::size_t k = 0; k < report.lambda_grid.size(); ++k) {
        LambdaRecord rec;
        rec.lambda_tilde = report.lambda_grid[k];
        const HyperParams hyper{rec.lambda_tilde, config.eta, class_factors};

        Stopwatch fit_clock;
        FitResult fr;
        try {
            fr = fit(data, hyper, fopt, previous ? &*previous : nullptr);
        } catch (const Error& e) {
            rec.status = "failed";
            rec.flags.push_back(std::string("fit_error: ") + e.what());
            report.records.push_back(std::move(rec));
            continue;
        }
        rec.times.fit = fit_clock.seconds();
        previous = fr.weights;
        rec.status = fr.converged ? "converged" : "not_converged";
        rec.kkt_violation = fr.kkt_violation;
        rec.solver_sweeps = fr.iterations;
        rec.active_set_size = static_cast<long>(ActiveSet::from_weights(fr.weights).size());
        const SampleBlocks blocks = sample_blocks(data, fr.weights);
        rec.training_error = blocks.nll.mean();
        if (blocks.clamped) rec.flags.push_back("training_probability_clamped");

        if (config.run_acv) {
            Stopwatch clock;
            try {
                const AcvResult a = acv(data, fr);
                rec.eps_acv = a.looe;
                rec.zero_modes_removed = static_cast<long>(a.zero_modes_removed);
                rec.acv_cost = a.cost.total();
                if (!a.ill_conditioned_samples.empty())
                    rec.flags.push_back("acv_ill_conditioned_samples=" +
                                        std::to_string(a.ill_conditioned_samples.size()));
                if (a.clamped) rec.flags.push_back("acv_probability_clamped=" + std::to_string(a.clamped));
            } catch (const DegenerateHessian&) {
                rec.flags.push_back("acv_degenerate_hessian");
            }
            rec.times.acv = clock.seconds();
        }
        if (config.run_saacv) {
            Stopwatch clock;
            try {
                const SaacvResult s = saacv(data, fr, sopt);
                rec.eps_saacv = s.estimate.looe;
                rec.saacv_sweeps = s.state.iterations;
                rec.saacv_cost = s.state.cost;
                if (!s.state.converged) rec.flags.push_back("saacv_not_converged");
                if (s.estimate.clamped)
                    rec.flags.push_back("saacv_probability_clamped=" + std::to_string(s.estimate.clamped));
            } catch (const NumericalError& e) {
                rec.flags.push_back(std::string("saacv_error: ") + e.what());
            }
            rec.times.saacv = clock.seconds();
        }
        if (config.literal_k) {
            Stopwatch clock;
            LiteralCvOptions lopt;
            lopt.fit = fopt;
            lopt.stratify = config.stratify;
            lopt.workers = config.workers;
            lopt.warm_start = config.literal_cold_start ? nullptr : &fr.weights;
            const LiteralCvResult lit = literal_cv(data, hyper, *prov.literal_k, config.seed, lopt);
            if (std::isfinite(lit.eps_cv)) rec.eps_literal = lit.eps_cv;
            if (!lit.all_valid) rec.flags.push_back("literal_fold_not_converged");
            rec.times.literal = clock.seconds();
        }
        if (rec.eps_literal) {
            if (rec.eps_acv) rec.ned_acv = normalized_error_difference(*rec.eps_acv, *rec.eps_literal);
            if (rec.eps_saacv) rec.ned_saacv = normalized_error_difference(*rec.eps_saacv, *rec.eps_literal);
        }
        if (!config.record_timings) rec.times = {};
        report.total_fit_time += rec.times.fit;
        report.records.push_back(std::move(rec));
    }
    report.argmin = compute_argmin(report.records);
    return report;
}

} // namespace acvmlr
