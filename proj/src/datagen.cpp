#include "acvmlr/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "acvmlr/error.hpp"

namespace acvmlr::datagen {

using detail::require;

namespace {

// Separate streams so the weights do not depend on how many samples are drawn.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(purpose)};
    return std::mt19937_64(seq);
}

Vector bernoulli_gaussian_row(int n, double rho0, std::mt19937_64& rng)
{
    std::bernoulli_distribution on(rho0);
    std::normal_distribution<double> value(0.0, std::sqrt(1.0 / rho0));
    Vector row = Vector::Zero(n);
    for (int i = 0; i < n; ++i)
        if (on(rng)) row[i] = value(rng);
    return row;
}

std::vector<int> support(const Vector& row)
{
    std::vector<int> s;
    for (Eigen::Index i = 0; i < row.size(); ++i)
        if (row[i] != 0.0) s.push_back(static_cast<int>(i));
    return s;
}

} // namespace

int SynthSpec::n_samples() const
{
    return static_cast<int>(std::lround(alpha * n_features));
}

void SynthSpec::validate() const
{
    require(n_features >= 1, "N must be >= 1");
    require(n_classes >= 2, "L must be >= 2");
    require(alpha > 0.0 && n_samples() >= 1, "alpha * N must round to at least one sample");
    require(rho0 > 0.0 && rho0 <= 1.0, "rho0 must lie in (0, 1]");
    require(sigma_xi2 >= 0.0, "sigma_xi2 must be >= 0");
    if (const auto* c = std::get_if<CommonComponents>(&variant))
        require(c->r_common >= 0.0 && c->r_common <= 1.0, "r_common must lie in [0, 1]");
    if (const auto* c = std::get_if<CorrelatedNoise>(&variant))
        require(c->corr >= 0.0 && c->corr <= 1.0, "noise correlation must lie in [0, 1]");
    if (const auto* a = std::get_if<Amplified>(&variant)) {
        require(a->omega > 0.0, "omega must be > 0");
        for (int c : a->classes) require(c >= 0 && c < n_classes, "amplified class out of range");
    }
}

WeightMatrix gen_true_weights(const SynthSpec& spec)
{
    spec.validate();
    auto rng = stream(spec.seed, 0);
    const int n = spec.n_features;
    WeightMatrix w(spec.n_classes, n);

    const auto* common = std::get_if<CommonComponents>(&spec.variant);
    if (!common) {
        for (int a = 0; a < spec.n_classes; ++a) w.row(a) = bernoulli_gaussian_row(n, spec.rho0, rng).transpose();
        return w;
    }

    const Vector master = bernoulli_gaussian_row(n, spec.rho0, rng);
    const std::vector<int> master_support = support(master);
    std::vector<int> elsewhere;
    for (int i = 0; i < n; ++i)
        if (master[i] == 0.0) elsewhere.push_back(i);
    std::normal_distribution<double> value(0.0, std::sqrt(1.0 / spec.rho0));

    for (int a = 0; a < spec.n_classes; ++a) {
        const auto k = static_cast<int>(support(bernoulli_gaussian_row(n, spec.rho0, rng)).size());
        const int n_common = std::min(static_cast<int>(std::lround(common->r_common * k)),
                                      static_cast<int>(master_support.size()));
        std::vector<int> shared = master_support, own = elsewhere;
        std::shuffle(shared.begin(), shared.end(), rng);
        std::shuffle(own.begin(), own.end(), rng);
        Vector row = Vector::Zero(n);
        for (int j = 0; j < n_common; ++j) row[shared[j]] = master[shared[j]];
        const int n_own = std::min(k - n_common, static_cast<int>(own.size()));
        for (int j = 0; j < n_own; ++j) row[own[j]] = value(rng);
        w.row(a) = row.transpose();
    }
    return w;
}

Dataset gen_dataset(const WeightMatrix& true_w, const SynthSpec& spec)
{
    spec.validate();
    require(true_w.rows() == spec.n_classes && true_w.cols() == spec.n_features,
            "true weights do not match the spec");
    auto rng = stream(spec.seed, 1);
    const int n = spec.n_features;
    const int m = spec.n_samples();
    const double sigma = std::sqrt(spec.sigma_xi2);
    const double sqrt_n = std::sqrt(static_cast<double>(n));

    std::uniform_int_distribution<int> pick(0, spec.n_classes - 1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto* corr = std::get_if<CorrelatedNoise>(&spec.variant);
    const auto* amp = std::get_if<Amplified>(&spec.variant);

    Dataset d;
    d.n_classes = spec.n_classes;
    d.features.resize(m, n);
    d.labels.resize(m);
    for (int mu = 0; mu < m; ++mu) {
        const int y = pick(rng);
        d.labels[mu] = y;
        Vector noise(n);
        if (corr) {
            const double shared = gauss(rng);
            for (int i = 0; i < n; ++i)
                noise[i] = std::sqrt(corr->corr) * shared + std::sqrt(1.0 - corr->corr) * gauss(rng);
        } else {
            for (int i = 0; i < n; ++i) noise[i] = gauss(rng);
        }
        Vector x = true_w.row(y).transpose() / sqrt_n + sigma * noise;
        if (amp && std::find(amp->classes.begin(), amp->classes.end(), y) != amp->classes.end()) x *= amp->omega;
        d.features.row(mu) = x.transpose();
    }
    d.validate();
    return d;
}

Rescaled rescale_by_class(const Dataset& data)
{
    data.validate();
    const Vector norms = data.features.rowwise().norm();
    const double global = norms.mean();
    std::vector<double> sum(data.n_classes, 0.0);
    std::vector<long> count(data.n_classes, 0);
    for (Eigen::Index mu = 0; mu < data.n_samples(); ++mu) {
        sum[data.labels[mu]] += norms[mu];
        ++count[data.labels[mu]];
    }

    Rescaled out;
    out.factors.assign(data.n_classes, 1.0);
    for (int a = 0; a < data.n_classes; ++a) {
        if (count[a] == 0 || sum[a] == 0.0) {
            out.empty_classes.push_back(a);
            continue;
        }
        out.factors[a] = global / (sum[a] / static_cast<double>(count[a]));
    }
    out.data = data;
    for (Eigen::Index mu = 0; mu < data.n_samples(); ++mu) out.data.features.row(mu) *= out.factors[data.labels[mu]];
    return out;
}

} // namespace acvmlr::datagen
