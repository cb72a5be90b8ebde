#include <doctest.h>

#include <cmath>

#include "acvmlr/acv.hpp"
#include "acvmlr/error.hpp"
#include "acvmlr/literalcv.hpp"
#include "acvmlr/solver.hpp"
#include "helpers.hpp"

using namespace acvmlr;
using testing::random_dataset;

namespace {

Dataset signal_dataset(int m, int n, int l, std::uint64_t seed)
{
    Dataset d = random_dataset(m, n, l, seed, 0.6);
    for (int mu = 0; mu < m; ++mu) d.features(mu, d.labels[mu] % n) += 1.0;
    return d;
}

/// X^mu restricted to active columns: row a has x_i in the column of every active (a, i).
Matrix repetition_matrix(const Eigen::Ref<const Vector>& x, const ActiveSet& active)
{
    Matrix xm = Matrix::Zero(active.n_classes(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) xm(active.pairs()[k].cls, k) = x[active.pairs()[k].feature];
    return xm;
}

/// u + X G_{\mu}^{-1} X^T b with the leave-mu-out Hessian inverted directly.
Matrix explicit_leave_one_out(const Dataset& d, const Matrix& w, double lambda2)
{
    const ActiveSet active = ActiveSet::from_weights(w);
    const SampleBlocks blocks = sample_blocks(d, w);
    const Matrix g = assemble_hessian(d, blocks.probs, active, lambda2);
    Matrix out(d.n_samples(), d.n_classes);
    for (Eigen::Index mu = 0; mu < d.n_samples(); ++mu) {
        const Matrix xm = repetition_matrix(d.features.row(mu).transpose(), active);
        const Matrix f = hessian_f(blocks.probs.row(mu).transpose());
        const Matrix g_loo = g - xm.transpose() * f * xm;
        const Matrix c_loo = xm * g_loo.inverse() * xm.transpose();
        out.row(mu) = (blocks.overlaps.row(mu).transpose() + c_loo * blocks.grads.row(mu).transpose()).transpose();
    }
    return out;
}

} // namespace

TEST_SUITE("acv") {

TEST_CASE("zero-mode-removed inverse")
{
    const auto id = zero_mode_removed_inverse(Matrix::Identity(4, 4), 0.0);
    CHECK(id.inverse.isApprox(Matrix::Identity(4, 4)));
    CHECK(id.zero_modes_removed == 0);

    Matrix g = Matrix::Zero(2, 2);
    g(0, 0) = 2.0;
    const auto r = zero_mode_removed_inverse(g, 0.0);
    CHECK(r.zero_modes_removed == 1);
    CHECK(r.inverse(0, 0) == doctest::Approx(0.5));
    CHECK(std::abs(r.inverse(1, 1)) <= 1e-15);
    CHECK(std::abs(r.inverse(0, 1)) <= 1e-15);

    CHECK_THROWS_AS(zero_mode_removed_inverse(Matrix::Zero(3, 3), 0.0), DegenerateHessian);
    CHECK(zero_mode_removed_inverse(Matrix(0, 0), 0.0).inverse.size() == 0);

    const Matrix a = testing::gaussian(5, 5, 3);
    const Matrix spd = a * a.transpose() + 0.5 * Matrix::Identity(5, 5);
    const auto big = zero_mode_removed_inverse(spd, 0.5);
    CHECK(big.zero_modes_removed == 0);
    CHECK((big.inverse * spd - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("shift direction is a removed zero mode")
{
    // Two classes active on identical support: W and W + 1 v^T give the same model.
    const Dataset d = random_dataset(40, 6, 2, 4);
    Matrix w = Matrix::Zero(2, 6);
    for (int i : {0, 2, 3}) {
        w(0, i) = 0.3 + 0.1 * i;
        w(1, i) = -0.2 * i - 0.1;
    }
    const ActiveSet active = ActiveSet::from_weights(w);
    const Matrix g = assemble_hessian(d, softmax_probs(overlaps(d, w)), active, 0.0);
    const auto inv = zero_mode_removed_inverse(g, 0.0);
    CHECK(inv.zero_modes_removed == 3);
    for (int i : {0, 2, 3}) {
        Vector v = Vector::Zero(static_cast<Eigen::Index>(active.size()));
        for (std::size_t k = 0; k < active.size(); ++k)
            if (active.pairs()[k].feature == i) v[k] = 1.0;
        CHECK((g * v).norm() <= 1e-10 * g.norm());
        CHECK((inv.inverse * g * v).norm() <= 1e-6);
    }
}

TEST_CASE("cmu")
{
    const Vector x = testing::gaussian(6, 1, 5);
    CHECK(cmu(x, Matrix(0, 0), ActiveSet::from_weights(Matrix::Zero(3, 6))).isZero(0.0));

    Matrix w = Matrix::Zero(3, 6);
    w(2, 4) = 1.0;
    const Matrix ginv = Matrix::Constant(1, 1, 0.7);
    const Matrix c1 = cmu(x, ginv, ActiveSet::from_weights(w));
    CHECK(c1(2, 2) == doctest::Approx(x[4] * x[4] * 0.7));
    CHECK(c1.sum() == doctest::Approx(c1(2, 2)));

    for (std::uint64_t s = 0; s < 5; ++s) {
        const Matrix ws = testing::sparse_weights(4, 7, 0.5, 40 + s);
        const ActiveSet active = ActiveSet::from_weights(ws);
        const auto n = static_cast<Eigen::Index>(active.size());
        const Matrix b = testing::gaussian(n, n, 50 + s);
        const Matrix gi = b * b.transpose();
        const Vector xr = testing::gaussian(7, 1, 60 + s);
        const Matrix xm = repetition_matrix(xr, active);
        const Matrix c = cmu(xr, gi, active);
        CHECK((c - xm * gi * xm.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1 + c.cwiseAbs().maxCoeff()));
        CHECK((c - c.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1 + c.cwiseAbs().maxCoeff()));
        for (int a = 0; a < 4; ++a)
            if (active.positions_of_class(a).empty()) CHECK(c.row(a).isZero(0.0));
    }
}

TEST_CASE("loo overlap correction")
{
    const Vector u = testing::gaussian(3, 1, 1);
    const Vector b = testing::gaussian(3, 1, 2);
    Vector p(3);
    p << 0.2, 0.5, 0.3;
    const Matrix f = hessian_f(p);
    CHECK(loo_overlap_correction(u, b, f, Matrix::Zero(3, 3)).loo_overlap == u);
    const Matrix c = Matrix::Identity(3, 3) * 0.4;
    CHECK(loo_overlap_correction(u, Vector::Zero(3), f, c).loo_overlap == u);

    const auto r = loo_overlap_correction(u, b, f, c);
    CHECK_FALSE(r.ill_conditioned);
    const Vector expect = u + c * (Matrix::Identity(3, 3) - f * c).inverse() * b;
    CHECK((r.loo_overlap - expect).cwiseAbs().maxCoeff() <= 1e-14);

    // I - F C is singular here: F C has eigenvalue exactly 1.
    Vector half(2);
    half << 0.5, 0.5;
    Matrix cs(2, 2);
    cs << 1, -1, -1, 1;
    const Vector u2 = Vector::Zero(2);
    Vector b2(2);
    b2 << 0.5, -0.5;
    const auto s = loo_overlap_correction(u2, b2, hessian_f(half), cs);
    CHECK(s.ill_conditioned);
    CHECK((s.loo_overlap - cs * b2).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("matches the explicit leave-one-out Hessian construction")
{
    for (std::uint64_t s = 0; s < 6; ++s) {
        const Dataset d = signal_dataset(40, 8, 3, 70 + s);
        const double eta = s % 2 ? 0.5 : 0.9;
        const FitResult fr = fit(d, {0.1 * lambda_max(d, eta), eta, {}});
        REQUIRE(fr.converged);
        const double lambda2 = fr.hyper.lambda2(d.n_samples());
        REQUIRE(ActiveSet::from_weights(fr.weights).size() <= 60);
        const AcvResult r = acv(d, fr);
        const Matrix oracle = explicit_leave_one_out(d, fr.weights, lambda2);
        CHECK((r.loo_overlaps - oracle).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK(r.zero_modes_removed == 0);
        CHECK(r.looe == doctest::Approx(r.per_sample_nll.mean()));
    }
}

TEST_CASE("all-zero fit gives ln L")
{
    const Dataset d = random_dataset(30, 5, 4, 8);
    const AcvResult r = acv(d, Matrix::Zero(4, 5), 0.0);
    CHECK(r.looe == std::log(4.0));
    CHECK(r.cost.total() == 0);
    const FitResult big = fit(d, {10 * lambda_max(d, 1.0), 1.0, {}});
    CHECK(acv(d, big).looe == std::log(4.0));
}

TEST_CASE("close to literal leave-one-out on a small instance")
{
    const Dataset d = signal_dataset(40, 10, 3, 9);
    const HyperParams hp{0.15 * lambda_max(d, 1.0), 1.0, {}};
    const FitResult fr = fit(d, hp);
    REQUIRE(fr.converged);
    const AcvResult r = acv(d, fr);
    LiteralCvOptions opt;
    opt.warm_start = &fr.weights;
    const auto lit = literal_cv(d, hp, 40, 1, opt);
    REQUIRE(lit.all_valid);
    CHECK(std::abs(r.looe - lit.eps_cv) / lit.eps_cv <= 0.1);
}

TEST_CASE("prediction error is not below training error")
{
    const Dataset d = signal_dataset(60, 12, 3, 10);
    const double hi = lambda_max(d, 1.0);
    for (double frac : {0.5, 0.2, 0.08, 0.03}) {
        const FitResult fr = fit(d, {frac * hi, 1.0, {}});
        REQUIRE(fr.converged);
        const AcvResult r = acv(d, fr);
        const SampleBlocks b = sample_blocks(d, fr.weights);
        CHECK(r.looe >= b.nll.mean() - 1e-9);
        CHECK((r.per_sample_nll - b.nll).mean() >= 0.0);
    }
}

TEST_CASE("class permutation invariance")
{
    const Dataset d = signal_dataset(50, 8, 3, 11);
    const HyperParams hp{0.1 * lambda_max(d, 1.0), 1.0, {}};
    const FitResult fr = fit(d, hp);
    const std::vector<int> perm = {1, 2, 0};
    Dataset p = d;
    for (auto& y : p.labels) y = perm[y];
    Matrix wp(3, 8);
    for (int c = 0; c < 3; ++c) wp.row(perm[c]) = fr.weights.row(c);
    CHECK(std::abs(acv(d, fr.weights, 0.0).looe - acv(p, wp, 0.0).looe) <= 1e-10);
}

TEST_CASE("ridge term disables zero-mode removal")
{
    const Dataset d = signal_dataset(60, 10, 3, 12);
    for (double eta : {0.3, 0.7}) {
        const FitResult fr = fit(d, {0.02 * lambda_max(d, eta), eta, {}});
        REQUIRE(fr.hyper.lambda2(d.n_samples()) > kLargeLambda2);
        CHECK(acv(d, fr).zero_modes_removed == 0);
    }
}

TEST_CASE("cost counters follow the active-set size")
{
    const Dataset d = signal_dataset(60, 10, 3, 13);
    const double hi = lambda_max(d, 1.0);
    const AcvResult small = acv(d, fit(d, {0.5 * hi, 1.0, {}}));
    const AcvResult large = acv(d, fit(d, {0.05 * hi, 1.0, {}}));
    CHECK(small.cost.factorization > 0);
    CHECK(large.cost.factorization > small.cost.factorization);
    CHECK(large.cost.total() > small.cost.total());
}

} // TEST_SUITE
