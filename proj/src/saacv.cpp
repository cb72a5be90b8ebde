#include "acvmlr/saacv.hpp"

#include <cmath>
#include <map>

#include "acvmlr/error.hpp"

namespace acvmlr {

using detail::require;

namespace {

constexpr double kInitialDelta = 100.0;
constexpr double kSingularRcond = 1e-14;

struct Problem {
    SampleBlocks blocks;
    SaState shape; // patterns, counts and feature map only
    double sigma2 = 0.0;
    double lambda2 = 0.0;
    int n_classes = 0;
    int n_features = 0;
};

Problem make_problem(const Dataset& data, const WeightMatrix& w, double lambda2)
{
    data.validate();
    require(lambda2 >= 0.0, "lambda2 must be >= 0");
    Problem p;
    p.blocks = sample_blocks(data, w);
    p.sigma2 = sigma_x2(data);
    p.lambda2 = lambda2;
    p.n_classes = data.n_classes;
    p.n_features = static_cast<int>(data.n_features());

    const ActiveSet active = ActiveSet::from_weights(w);
    std::map<std::vector<int>, int> index;
    p.shape.feature_pattern.assign(p.n_features, -1);
    for (int i = 0; i < p.n_features; ++i) {
        const auto& cls = active.classes_at(i);
        if (cls.empty()) continue;
        auto [it, inserted] = index.try_emplace(cls, static_cast<int>(p.shape.patterns.size()));
        if (inserted) {
            p.shape.patterns.push_back(cls);
            p.shape.pattern_count.push_back(0);
        }
        ++p.shape.pattern_count[it->second];
        p.shape.feature_pattern[i] = it->second;
    }
    return p;
}

Matrix embed(const Matrix& block, const std::vector<int>& cls, int l)
{
    Matrix out = Matrix::Zero(l, l);
    out(cls, cls) = block;
    return out;
}

Matrix c_from_chi(const Problem& p, const std::vector<Matrix>& chi)
{
    Matrix c = Matrix::Zero(p.n_classes, p.n_classes);
    for (std::size_t k = 0; k < chi.size(); ++k)
        c(p.shape.patterns[k], p.shape.patterns[k]) += static_cast<double>(p.shape.pattern_count[k]) * chi[k];
    return p.sigma2 * c;
}

struct Sweep {
    std::vector<Matrix> chi;
    std::size_t zero_modes = 0;
    bool singular = false;
};

/// One substitution: chi -> C_SA -> R -> new chi (undamped).
Sweep substitute(const Problem& p, const std::vector<Matrix>& chi, std::uint64_t& cost)
{
    const int l = p.n_classes;
    const Matrix c = c_from_chi(p, chi);
    const Eigen::Index m = p.blocks.probs.rows();

    Sweep out;
    Matrix r = Matrix::Zero(l, l);
    const Matrix eye = Matrix::Identity(l, l);
    for (Eigen::Index mu = 0; mu < m; ++mu) {
        const Matrix f = hessian_f(p.blocks.probs.row(mu).transpose());
        Eigen::PartialPivLU<Matrix> lu(eye + f * c);
        if (!(lu.rcond() > kSingularRcond)) {
            out.singular = true;
            return out;
        }
        r.noalias() += lu.solve(f);
    }
    r *= p.sigma2;
    r = 0.5 * (r + r.transpose()).eval();
    r.diagonal().array() += p.lambda2;

    out.chi.reserve(p.shape.patterns.size());
    for (const auto& cls : p.shape.patterns) {
        const Matrix sub = r(cls, cls);
        InverseResult inv;
        try {
            inv = zero_mode_removed_inverse(sub, p.lambda2);
        } catch (const DegenerateHessian&) {
            inv.inverse = Matrix::Zero(sub.rows(), sub.cols());
            inv.zero_modes_removed = static_cast<std::size_t>(sub.rows());
        }
        out.zero_modes += inv.zero_modes_removed;
        out.chi.push_back(std::move(inv.inverse));
    }
    const auto l3 = static_cast<std::uint64_t>(l) * l * l;
    cost += static_cast<std::uint64_t>(m) * 3 * l3 + p.shape.patterns.size() * l3 +
            static_cast<std::uint64_t>(p.n_features);
    return out;
}

double change(const Problem& p, const std::vector<Matrix>& next, const std::vector<Matrix>& prev)
{
    double delta = 0.0;
    for (std::size_t k = 0; k < next.size(); ++k)
        delta += static_cast<double>(p.shape.pattern_count[k]) * (next[k] - prev[k]).norm();
    return delta / static_cast<double>(p.n_features);
}

std::vector<Matrix> blend(const std::vector<Matrix>& next, const std::vector<Matrix>& prev, double gamma)
{
    if (gamma == 0.0) return next;
    std::vector<Matrix> out(next.size());
    for (std::size_t k = 0; k < next.size(); ++k) out[k] = (1.0 - gamma) * next[k] + gamma * prev[k];
    return out;
}

SaState solve(const Problem& p, const SaacvOptions& opt)
{
    require(opt.theta > 0.0 && opt.max_sweeps >= 0, "invalid SAACV tolerances");
    require(opt.damping >= 0.0 && opt.damping < 1.0, "damping must lie in [0, 1)");

    SaState st = p.shape;
    st.sigma_x2 = p.sigma2;
    st.damping = opt.damping;
    st.c_sa = Matrix::Zero(p.n_classes, p.n_classes);
    if (st.patterns.empty()) {
        st.converged = true;
        return st;
    }

    std::vector<Matrix> chi;
    for (const auto& cls : st.patterns) {
        const auto k = static_cast<Eigen::Index>(cls.size());
        chi.push_back(Matrix::Identity(k, k) / p.sigma2);
    }
    std::vector<Matrix> previous = chi;

    double delta = kInitialDelta;
    double last_delta = delta;
    int increases = 0;
    bool retried = false;
    while (delta > opt.theta) {
        if (st.iterations >= opt.max_sweeps) break;
        Sweep sw = substitute(p, chi, st.cost);
        if (sw.singular) {
            if (retried) throw NumericalError("I + F C_SA is singular for some sample");
            // Abort the sweep: pull the iterate back halfway and damp from now on.
            retried = true;
            st.damping = std::max(st.damping, 0.5);
            chi = blend(chi, previous, 0.5);
            continue;
        }
        std::vector<Matrix> next = blend(sw.chi, chi, st.damping);
        delta = change(p, next, chi);
        previous = std::move(chi);
        chi = std::move(next);
        st.zero_modes_removed = sw.zero_modes;
        ++st.iterations;

        increases = delta > last_delta ? increases + 1 : 0;
        if (increases >= 2 && st.damping == 0.0) st.damping = 0.5;
        last_delta = delta;
    }
    st.converged = delta <= opt.theta;
    st.final_residual = delta;
    st.pattern_chi = std::move(chi);
    st.c_sa = c_from_chi(p, st.pattern_chi);
    return st;
}

} // namespace

Matrix SaState::chi(int feature) const
{
    const int l = static_cast<int>(c_sa.rows());
    const int k = feature_pattern.at(feature);
    if (k < 0) return Matrix::Zero(l, l);
    return embed(pattern_chi[k], patterns[k], l);
}

SaState saacv_fixed_point(const Dataset& data, const WeightMatrix& w, double lambda2, const SaacvOptions& options)
{
    return solve(make_problem(data, w, lambda2), options);
}

double fixed_point_residual(const Dataset& data, const WeightMatrix& w, double lambda2, const SaState& state)
{
    const Problem p = make_problem(data, w, lambda2);
    require(p.shape.patterns == state.patterns, "state does not belong to these weights");
    if (state.patterns.empty()) return 0.0;
    std::uint64_t cost = 0;
    Sweep sw = substitute(p, state.pattern_chi, cost);
    if (sw.singular) throw NumericalError("I + F C_SA is singular for some sample");
    return change(p, sw.chi, state.pattern_chi);
}

SaacvResult saacv(const Dataset& data, const FitResult& fit, const SaacvOptions& options)
{
    return saacv(data, fit.weights, fit.hyper.lambda2(data.n_samples()), options);
}

SaacvResult saacv(const Dataset& data, const WeightMatrix& w, double lambda2, const SaacvOptions& options)
{
    const Problem p = make_problem(data, w, lambda2);
    SaacvResult out;
    out.state = solve(p, options);
    // No (I - F C)^{-1} factor here: C_SA already stands for the leave-one-out matrix.
    Matrix loo = p.blocks.overlaps;
    for (Eigen::Index mu = 0; mu < loo.rows(); ++mu) {
        const Vector shift = out.state.c_sa * p.blocks.grads.row(mu).transpose();
        loo.row(mu) += shift.transpose();
    }
    out.estimate = finish_loo(data, std::move(loo));
    out.estimate.zero_modes_removed = out.state.zero_modes_removed;
    out.estimate.cost.fixed_point = out.state.cost;
    return out;
}

} // namespace acvmlr
