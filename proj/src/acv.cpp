#include "acvmlr/acv.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "acvmlr/error.hpp"

namespace acvmlr {

using detail::require;

InverseResult zero_mode_removed_inverse(const Matrix& g, double lambda2)
{
    require(g.rows() == g.cols(), "Hessian must be square");
    InverseResult out;
    const Eigen::Index n = g.rows();
    if (n == 0) {
        out.inverse = Matrix(0, 0);
        return out;
    }
    if (lambda2 > kLargeLambda2) {
        Eigen::LLT<Matrix> llt(g);
        if (llt.info() == Eigen::Success) {
            out.inverse = llt.solve(Matrix::Identity(n, n));
            return out;
        }
        // Not positive definite despite the ridge; fall through to the spectral route.
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of the Hessian failed");
    const Vector& d = eig.eigenvalues();
    const double cutoff = kZeroModeCutoff * std::max(d.maxCoeff(), 0.0);
    Vector inv_d(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (d[k] > cutoff && d[k] > 0.0) {
            inv_d[k] = 1.0 / d[k];
        } else {
            inv_d[k] = 0.0;
            ++out.zero_modes_removed;
        }
    }
    if (out.zero_modes_removed == static_cast<std::size_t>(n))
        throw DegenerateHessian("all " + std::to_string(n) + " Hessian modes are zero modes");
    const Matrix& v = eig.eigenvectors();
    out.inverse = v * inv_d.asDiagonal() * v.transpose();
    out.inverse = 0.5 * (out.inverse + out.inverse.transpose()).eval();
    return out;
}

Matrix cmu(const Eigen::Ref<const Vector>& x_row, const Matrix& ginv, const ActiveSet& active)
{
    const int l = active.n_classes();
    Matrix c = Matrix::Zero(l, l);
    const auto& pairs = active.pairs();
    require(ginv.rows() == static_cast<Eigen::Index>(pairs.size()) && ginv.cols() == ginv.rows(),
            "inverse Hessian does not match the active set");
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const double xk = x_row[pairs[k].feature];
        if (xk == 0.0) continue;
        for (std::size_t j = 0; j < pairs.size(); ++j)
            c(pairs[k].cls, pairs[j].cls) += xk * x_row[pairs[j].feature] * ginv(k, j);
    }
    return c;
}

CorrectionResult loo_overlap_correction(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& b,
                                        const Matrix& f, const Matrix& c)
{
    const Eigen::Index l = u.size();
    CorrectionResult out;
    const Matrix system = Matrix::Identity(l, l) - f * c;
    Eigen::PartialPivLU<Matrix> lu(system);
    const double rcond = lu.rcond();
    if (!(rcond > 0.0) || 1.0 / rcond > kIllConditioned) {
        out.ill_conditioned = true;
        out.loo_overlap = u + c * b;
        return out;
    }
    out.loo_overlap = u + c * lu.solve(b);
    return out;
}

AcvResult finish_loo(const Dataset& data, Matrix loo_overlaps)
{
    AcvResult r;
    const auto nll = nll_per_sample(softmax_probs(loo_overlaps), data.labels);
    r.per_sample_nll = nll.per_sample;
    r.clamped = nll.clamped;
    r.looe = nll.mean();
    r.loo_overlaps = std::move(loo_overlaps);
    return r;
}

AcvResult acv(const Dataset& data, const FitResult& fit)
{
    return acv(data, fit.weights, fit.hyper.lambda2(data.n_samples()));
}

AcvResult acv(const Dataset& data, const WeightMatrix& w, double lambda2)
{
    data.validate();
    const ActiveSet active = ActiveSet::from_weights(w);
    const SampleBlocks blocks = sample_blocks(data, w);
    if (active.empty()) return finish_loo(data, blocks.overlaps);

    const Eigen::Index m = data.n_samples();
    const int l = data.n_classes;
    const auto n = static_cast<Eigen::Index>(active.size());
    const auto& pairs = active.pairs();
    CostCounters cost;

    const Matrix g = assemble_hessian(data, blocks.probs, active, lambda2);
    cost.hessian = static_cast<std::uint64_t>(m) * n * (n + l);
    const InverseResult inv = zero_mode_removed_inverse(g, lambda2);
    cost.factorization = static_cast<std::uint64_t>(n) * n * n;

    // C_mu for all samples at once: for class a, T = K_a Ginv_{a,:}, then
    // C_mu(a,b) = sum_{l in b} K(mu,l) T(mu,l).
    Matrix gathered(m, n);
    for (Eigen::Index k = 0; k < n; ++k) gathered.col(k) = data.features.col(pairs[k].feature);
    std::vector<Matrix> c(static_cast<std::size_t>(m), Matrix::Zero(l, l));
    for (int a = 0; a < l; ++a) {
        const auto& idx_a = active.positions_of_class(a);
        if (idx_a.empty()) continue;
        const Matrix t = gathered(Eigen::all, idx_a) * inv.inverse(idx_a, Eigen::all);
        const Matrix prod = gathered.cwiseProduct(t);
        for (int b = 0; b < l; ++b) {
            const auto& idx_b = active.positions_of_class(b);
            if (idx_b.empty()) continue;
            const Vector col = prod(Eigen::all, idx_b).rowwise().sum();
            for (Eigen::Index mu = 0; mu < m; ++mu) c[mu](a, b) = col[mu];
        }
    }

    Matrix loo(m, l);
    std::vector<int> flagged;
    for (Eigen::Index mu = 0; mu < m; ++mu) {
        Matrix cm = 0.5 * (c[mu] + c[mu].transpose());
        const Matrix f = hessian_f(blocks.probs.row(mu).transpose());
        const auto corr = loo_overlap_correction(blocks.overlaps.row(mu).transpose(),
                                                 blocks.grads.row(mu).transpose(), f, cm);
        if (corr.ill_conditioned) flagged.push_back(static_cast<int>(mu));
        loo.row(mu) = corr.loo_overlap.transpose();
    }
    cost.per_sample = static_cast<std::uint64_t>(m) *
                      (static_cast<std::uint64_t>(n) * n + static_cast<std::uint64_t>(n) * l +
                       static_cast<std::uint64_t>(l) * l * l);

    AcvResult r = finish_loo(data, std::move(loo));
    r.zero_modes_removed = inv.zero_modes_removed;
    r.ill_conditioned_samples = std::move(flagged);
    r.cost = cost;
    return r;
}

} // namespace acvmlr
