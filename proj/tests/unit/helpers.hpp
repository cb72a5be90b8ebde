#pragma once
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "acvmlr/model.hpp"

namespace testing {

using acvmlr::Dataset;
using acvmlr::Matrix;
using acvmlr::Vector;

inline Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sd = 1.0)
{
    std::normal_distribution<double> g(0.0, sd);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = g(rng);
    return m;
}

inline Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double sd = 1.0)
{
    std::mt19937_64 rng(seed);
    return gaussian(rows, cols, rng, sd);
}

/// Gaussian features, labels cycling through every class then shuffled.
inline Dataset random_dataset(int m, int n, int l, std::uint64_t seed, double sd = 1.0)
{
    std::mt19937_64 rng(seed);
    std::vector<int> labels(m);
    for (int mu = 0; mu < m; ++mu) labels[mu] = mu % l;
    std::shuffle(labels.begin(), labels.end(), rng);
    return acvmlr::make_dataset(gaussian(m, n, rng, sd), labels, l);
}

/// Weight matrix with roughly `density` nonzero entries.
inline Matrix sparse_weights(int l, int n, double density, std::uint64_t seed, double sd = 0.5)
{
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution keep(density);
    Matrix w = gaussian(l, n, rng, sd);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index a = 0; a < l; ++a)
            if (!keep(rng)) w(a, j) = 0.0;
    return w;
}

/// Sum of per-sample NLLs written out with plain loops.
inline double total_nll(const Dataset& d, const Matrix& w)
{
    double total = 0.0;
    for (Eigen::Index mu = 0; mu < d.n_samples(); ++mu) {
        std::vector<double> u(d.n_classes, 0.0);
        for (int a = 0; a < d.n_classes; ++a)
            for (Eigen::Index i = 0; i < d.n_features(); ++i) u[a] += d.features(mu, i) * w(a, i);
        double mx = u[0];
        for (double v : u) mx = std::max(mx, v);
        double z = 0.0;
        for (double v : u) z += std::exp(v - mx);
        total += -(u[d.labels[mu]] - mx - std::log(z));
    }
    return total;
}

inline double rel_err(double a, double b)
{
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

inline double max_rel_err(const Matrix& a, const Matrix& b)
{
    return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

} // namespace testing
