#include "acvmlr/binomial.hpp"

#include <algorithm>
#include <cmath>

#include "acvmlr/error.hpp"

namespace acvmlr::binomial {

using detail::require;

namespace {

constexpr double kDenominatorFloor = 1e-12;

double sigmoid(double u)
{
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

double softplus(double z)
{
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

} // namespace

Derivatives logit_derivatives(double u, int y)
{
    const double s_neg = sigmoid(-u); // e^{-u} / (1 + e^{-u})
    return {(y == 0 ? 1.0 : 0.0) - s_neg, sigmoid(u) * s_neg};
}

ScalarLoss logit_loss()
{
    return {
        [](double u, int y) { return y == 0 ? softplus(u) : softplus(-u); },
        [](double u, int y) { return logit_derivatives(u, y); },
    };
}

AcvResult acv_scalar(const Matrix& features, const std::vector<int>& labels, const Vector& w, double lambda2,
                     const ScalarLoss& loss)
{
    const Eigen::Index m = features.rows();
    require(w.size() == features.cols(), "weight vector length does not match feature count");
    require(static_cast<Eigen::Index>(labels.size()) == m, "label count does not match sample count");
    for (int y : labels) require(y == 0 || y == 1, "binary labels must be 0 or 1");

    std::vector<int> active;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w[i] != 0.0) active.push_back(static_cast<int>(i));

    const Vector u = features * w;
    Vector first(m), second(m);
    for (Eigen::Index mu = 0; mu < m; ++mu) {
        const auto d = loss.derivatives(u[mu], labels[mu]);
        first[mu] = d.first;
        second[mu] = d.second;
    }

    AcvResult r;
    Vector u_loo = u;
    if (!active.empty()) {
        const Matrix xa = features(Eigen::all, active);
        Matrix g = xa.transpose() * second.asDiagonal() * xa;
        g.diagonal().array() += lambda2;
        const InverseResult inv = zero_mode_removed_inverse(g, lambda2);
        r.zero_modes_removed = inv.zero_modes_removed;
        const Vector c = (xa * inv.inverse).cwiseProduct(xa).rowwise().sum();
        for (Eigen::Index mu = 0; mu < m; ++mu) {
            const double denom = 1.0 - second[mu] * c[mu];
            if (denom <= kDenominatorFloor) {
                r.ill_conditioned_samples.push_back(static_cast<int>(mu));
                u_loo[mu] = u[mu] + c[mu] * first[mu];
            } else {
                u_loo[mu] = u[mu] + c[mu] / denom * first[mu];
            }
        }
    }

    r.per_sample_nll.resize(m);
    for (Eigen::Index mu = 0; mu < m; ++mu) r.per_sample_nll[mu] = loss.value(u_loo[mu], labels[mu]);
    r.looe = mean_loss(r.per_sample_nll);
    r.loo_overlaps = u_loo;
    return r;
}

AcvResult acv_logit(const Dataset& data, const LogitFit& fit, double lambda2)
{
    data.validate();
    require(data.n_classes == 2, "logit ACV needs a two-class dataset");
    return acv_scalar(data.features, data.labels, fit.weights, lambda2, logit_loss());
}

WeightMatrix embed_zero_gauge(const LogitFit& fit)
{
    WeightMatrix w = WeightMatrix::Zero(2, fit.weights.size());
    w.row(1) = fit.weights.transpose();
    return w;
}

std::vector<int> code_binary_labels(const std::vector<int>& raw)
{
    require(!raw.empty(), "no labels");
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    int offset = 0;
    if (*lo >= 0 && *hi <= 1) {
        offset = 0;
    } else if (*lo >= 1 && *hi <= 2) {
        offset = 1;
    } else {
        throw ContractViolation("binary labels must be coded {0,1} or {1,2}");
    }
    std::vector<int> out(raw.size());
    std::transform(raw.begin(), raw.end(), out.begin(), [offset](int y) { return y - offset; });
    return out;
}

} // namespace acvmlr::binomial
