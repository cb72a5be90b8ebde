#include "acvmlr/literalcv.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "acvmlr/error.hpp"

namespace acvmlr {

using detail::require;

std::vector<int> CvFolds::members(int fold) const
{
    std::vector<int> out;
    for (std::size_t mu = 0; mu < assignment.size(); ++mu)
        if (assignment[mu] == fold) out.push_back(static_cast<int>(mu));
    return out;
}

CvFolds make_folds(const std::vector<int>& labels, int k, std::uint64_t seed, bool stratify)
{
    const auto m = static_cast<int>(labels.size());
    require(k >= 2 && k <= m, "k must lie in [2, M]");
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    if (stratify) {
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return labels[a] < labels[b]; });
    }
    CvFolds f{k, std::vector<int>(m), seed};
    for (int pos = 0; pos < m; ++pos) f.assignment[order[pos]] = pos % k;
    return f;
}

Dataset subset(const Dataset& data, const std::vector<int>& rows)
{
    Dataset out;
    out.n_classes = data.n_classes;
    out.features = data.features(rows, Eigen::all);
    out.labels.reserve(rows.size());
    for (int r : rows) out.labels.push_back(data.labels[r]);
    return out;
}

LiteralCvResult literal_cv(const Dataset& data, const HyperParams& hyper, int k, std::uint64_t seed,
                           const LiteralCvOptions& options)
{
    data.validate();
    hyper.validate(data.n_classes);
    const auto m = static_cast<int>(data.n_samples());

    LiteralCvResult res;
    res.folds = make_folds(data.labels, k, seed, options.stratify);
    res.fold_loss.assign(k, 0.0);
    std::vector<char> valid(k, 0);
    res.per_sample_loss = Vector::Zero(m);

    std::vector<std::vector<int>> held(k), kept(k);
    for (int mu = 0; mu < m; ++mu) {
        for (int f = 0; f < k; ++f) (f == res.folds.assignment[mu] ? held[f] : kept[f]).push_back(mu);
    }

    auto run_fold = [&](int f) {
        if (kept[f].empty()) return;
        const Dataset train = subset(data, kept[f]);
        // Keep the sum-form lambda1, lambda2 of the full problem fixed.
        HyperParams fold_hyper = hyper;
        fold_hyper.lambda_tilde = hyper.lambda_tilde * m / static_cast<double>(kept[f].size());
        const FitResult fr = fit(train, fold_hyper, options.fit, options.warm_start);
        const Dataset test = subset(data, held[f]);
        const SampleBlocks blocks = sample_blocks(test, fr.weights);
        for (std::size_t j = 0; j < held[f].size(); ++j) res.per_sample_loss[held[f][j]] = blocks.nll[j];
        res.fold_loss[f] = blocks.nll.mean();
        valid[f] = fr.converged ? 1 : 0;
    };

    std::vector<std::exception_ptr> errors(k);
    auto guarded = [&](int f) {
        try {
            run_fold(f);
        } catch (...) {
            errors[f] = std::current_exception();
        }
    };
    const int workers = std::clamp(options.workers, 1, k);
    if (workers == 1) {
        for (int f = 0; f < k; ++f) guarded(f);
    } else {
        std::atomic<int> next{0};
        std::vector<std::jthread> pool;
        for (int t = 0; t < workers; ++t)
            pool.emplace_back([&] {
                for (int f = next++; f < k; f = next++) guarded(f);
            });
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<double> held_out;
    res.fold_valid.resize(k);
    for (int f = 0; f < k; ++f) {
        res.fold_valid[f] = valid[f] != 0;
        if (!res.fold_valid[f]) {
            res.all_valid = false;
            continue;
        }
        for (int mu : held[f]) held_out.push_back(res.per_sample_loss[mu]);
    }
    res.eps_cv = held_out.empty() ? std::numeric_limits<double>::quiet_NaN()
                              : mean_loss(Eigen::Map<const Vector>(held_out.data(), static_cast<Eigen::Index>(held_out.size())));
    return res;
}

std::optional<double> normalized_error_difference(double approx, double literal)
{
    if (!(literal > 0.0)) return std::nullopt;
    return (approx - literal) / literal;
}

} // namespace acvmlr
