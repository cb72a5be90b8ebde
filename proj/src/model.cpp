#include "acvmlr/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "acvmlr/error.hpp"

namespace acvmlr {

using detail::require;

void Dataset::validate() const
{
    require(n_classes >= 2, "dataset needs at least two classes");
    require(features.rows() >= 1 && features.cols() >= 1, "dataset needs M >= 1 and N >= 1");
    require(static_cast<Eigen::Index>(labels.size()) == features.rows(),
            "label count " + std::to_string(labels.size()) + " does not match sample count " +
                std::to_string(features.rows()));
    for (int y : labels) {
        require(y >= 0 && y < n_classes,
                "label " + std::to_string(y + 1) + " outside 1.." + std::to_string(n_classes));
    }
    require(features.allFinite(), "features contain non-finite values");
}

Dataset make_dataset(Matrix features, std::vector<int> labels, int n_classes)
{
    Dataset d{std::move(features), std::move(labels), n_classes};
    d.validate();
    return d;
}

ActiveSet ActiveSet::from_weights(const WeightMatrix& w)
{
    ActiveSet s;
    s.n_classes_ = static_cast<int>(w.rows());
    s.n_features_ = static_cast<int>(w.cols());
    s.per_feature_.resize(w.cols());
    s.per_class_.resize(w.rows());
    for (int i = 0; i < w.cols(); ++i) {
        for (int a = 0; a < w.rows(); ++a) {
            if (w(a, i) != 0.0) {
                s.per_class_[a].push_back(static_cast<int>(s.pairs_.size()));
                s.per_feature_[i].push_back(a);
                s.pairs_.push_back({i, a});
            }
        }
    }
    return s;
}

Matrix overlaps(const Dataset& data, const WeightMatrix& w)
{
    require(w.cols() == data.n_features(),
            "weight matrix has " + std::to_string(w.cols()) + " columns, dataset has " +
                std::to_string(data.n_features()) + " features");
    require(w.rows() == data.n_classes,
            "weight matrix has " + std::to_string(w.rows()) + " rows, dataset has " +
                std::to_string(data.n_classes) + " classes");
    return data.features * w.transpose();
}

Matrix softmax_probs(const Matrix& u)
{
    Matrix p(u.rows(), u.cols());
    for (Eigen::Index mu = 0; mu < u.rows(); ++mu) {
        const double top = u.row(mu).maxCoeff();
        p.row(mu) = (u.row(mu).array() - top).exp();
        p.row(mu) /= p.row(mu).sum();
    }
    return p;
}

NllResult nll_per_sample(const Matrix& probs, const std::vector<int>& labels)
{
    require(static_cast<Eigen::Index>(labels.size()) == probs.rows(), "label/probability size mismatch");
    NllResult r;
    r.per_sample.resize(probs.rows());
    for (Eigen::Index mu = 0; mu < probs.rows(); ++mu) {
        double p = probs(mu, labels[mu]);
        if (p < kProbabilityFloor) {
            p = kProbabilityFloor;
            ++r.clamped;
        }
        r.per_sample[mu] = -std::log(p);
    }
    return r;
}

Matrix grad_b(const Matrix& probs, const std::vector<int>& labels)
{
    require(static_cast<Eigen::Index>(labels.size()) == probs.rows(), "label/probability size mismatch");
    Matrix b = probs;
    for (Eigen::Index mu = 0; mu < b.rows(); ++mu) b(mu, labels[mu]) -= 1.0;
    return b;
}

Matrix hessian_f(const Eigen::Ref<const Vector>& p)
{
    Matrix f = -p * p.transpose();
    f.diagonal() += p;
    return f;
}

SampleBlocks sample_blocks(const Dataset& data, const WeightMatrix& w)
{
    SampleBlocks s;
    s.overlaps = overlaps(data, w);
    s.probs = softmax_probs(s.overlaps);
    s.grads = grad_b(s.probs, data.labels);
    auto nll = nll_per_sample(s.probs, data.labels);
    s.nll = std::move(nll.per_sample);
    s.clamped = nll.clamped;
    return s;
}

Matrix assemble_hessian(const Dataset& data, const Matrix& probs, const ActiveSet& active,
                        double lambda2)
{
    const auto n = static_cast<Eigen::Index>(active.size());
    if (n == 0) return Matrix(0, 0);
    require(probs.rows() == data.n_samples() && probs.cols() == data.n_classes,
            "probability matrix shape does not match dataset");

    const auto& pairs = active.pairs();
    const Eigen::Index m = data.n_samples();

    // Column k holds x_{., i_k}.
    Matrix gathered(m, n);
    for (Eigen::Index k = 0; k < n; ++k) gathered.col(k) = data.features.col(pairs[k].feature);

    // -sum_mu (x_i p_a)(x_j p_b)
    Matrix scaled(m, n);
    for (Eigen::Index k = 0; k < n; ++k)
        scaled.col(k) = gathered.col(k).cwiseProduct(probs.col(pairs[k].cls));
    Matrix g = Matrix::Zero(n, n);
    g.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose(), -1.0);

    // + delta_ab sum_mu x_i x_j p_a
    for (int a = 0; a < data.n_classes; ++a) {
        const auto& idx = active.positions_of_class(a);
        if (idx.empty()) continue;
        Matrix block = scaled(Eigen::all, idx).transpose() * gathered(Eigen::all, idx);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            for (std::size_t c = 0; c < idx.size(); ++c) {
                const auto gr = idx[r], gc = idx[c];
                if (gr >= gc) g(gr, gc) += block(r, c);
            }
        }
    }
    g.diagonal().array() += lambda2;
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
    return g;
}

double mean_loss(const Vector& v)
{
    if (v.size() == 0) return 0.0;
    if (v.minCoeff() == v.maxCoeff()) return v[0];
    return v.mean();
}

double sigma_x2(const Dataset& data)
{
    return data.features.squaredNorm() /
           (static_cast<double>(data.n_samples()) * static_cast<double>(data.n_features()));
}

} // namespace acvmlr
