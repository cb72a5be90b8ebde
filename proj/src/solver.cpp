#include "acvmlr/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "acvmlr/error.hpp"

namespace acvmlr {

using detail::require;

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-12;
// Keeps coordinate curvatures away from zero; changes only the step, not the fixed point.
constexpr double kCurvatureFloor = 1e-9;

double soft_threshold(double v, double thr)
{
    if (v > thr) return v - thr;
    if (v < -thr) return v + thr;
    return 0.0;
}

/// Mean of log-sum-exp(u_mu) - u_{mu, y_mu}; exact even when p_y underflows.
double mean_nll(const Matrix& u, const std::vector<int>& labels)
{
    double total = 0.0;
    for (Eigen::Index mu = 0; mu < u.rows(); ++mu) {
        const double top = u.row(mu).maxCoeff();
        const double lse = top + std::log((u.row(mu).array() - top).exp().sum());
        total += lse - u(mu, labels[mu]);
    }
    return total / static_cast<double>(u.rows());
}

std::vector<double> l1_coefficients(const HyperParams& h, int n_classes)
{
    std::vector<double> out(n_classes);
    for (int a = 0; a < n_classes; ++a) out[a] = h.l1_mean(a);
    return out;
}

double penalty(const WeightMatrix& w, const std::vector<double>& l1, double l2)
{
    double pen = 0.0;
    for (Eigen::Index a = 0; a < w.rows(); ++a) pen += l1[a] * w.row(a).lpNorm<1>();
    return pen + 0.5 * l2 * w.squaredNorm();
}

/// KKT residual of one coordinate given its smooth gradient.
double coordinate_residual(double grad, double w, double l1, double l2)
{
    if (w != 0.0) return std::abs(grad + l2 * w + (w > 0 ? l1 : -l1));
    return std::max(0.0, std::abs(grad) - l1);
}

class ProxNewton {
public:
    ProxNewton(const Dataset& data, const HyperParams& hyper, const FitOptions& opt)
        : x_(data.features), labels_(data.labels), opt_(opt), m_(data.n_samples()),
          n_(data.n_features()), l_(data.n_classes), l1_(l1_coefficients(hyper, l_)),
          l2_(hyper.l2_mean())
    {
    }

    FitResult run(WeightMatrix w)
    {
        FitResult res;
        if (opt_.zero_gauge_class) w.row(*opt_.zero_gauge_class).setZero();
        w_ = std::move(w);
        u_ = x_ * w_.transpose();
        refresh_probs();
        double obj = smooth_ + penalty(w_, l1_, l2_);
        if (opt_.trace_objective) res.objective_trace.push_back(obj);

        in_ws_.assign(static_cast<std::size_t>(l_ * n_), 0);
        ws_.clear();
        for (int i = 0; i < n_; ++i)
            for (int a = 0; a < l_; ++a)
                if (w_(a, i) != 0.0 && !pinned(a)) add_to_ws(a, i);

        double inner_tol = 1e-3;
        long stalls = 0;
        while (res.iterations < opt_.max_iter) {
            grad_ = x_.transpose() * (p_ - onehot()) / static_cast<double>(m_); // N x L
            add_violators();

            const double step = newton_step(obj, inner_tol, res);
            if (opt_.trace_objective) res.objective_trace.push_back(obj);

            if (step < opt_.tol_delta) {
                grad_ = x_.transpose() * (p_ - onehot()) / static_cast<double>(m_);
                const double kkt = kkt_from_grad();
                if (kkt <= opt_.tol_kkt) {
                    res.converged = true;
                    break;
                }
                const std::size_t before = ws_.size();
                add_violators();
                if (ws_.size() == before) {
                    // Violations inside the working set: tighten the inner solve.
                    inner_tol = std::max(inner_tol * 1e-2, 1e-16);
                    if (step == 0.0 && ++stalls > 8) break;
                }
            } else {
                stalls = 0;
                inner_tol = std::clamp(0.1 * step, 0.1 * opt_.tol_delta, 1e-3);
            }
        }

        res.weights = w_;
        res.objective = obj;
        grad_ = x_.transpose() * (p_ - onehot()) / static_cast<double>(m_);
        res.kkt_violation = kkt_from_grad();
        return res;
    }

private:
    bool pinned(int a) const { return opt_.zero_gauge_class && *opt_.zero_gauge_class == a; }

    void add_to_ws(int a, int i)
    {
        auto& flag = in_ws_[static_cast<std::size_t>(i * l_ + a)];
        if (flag) return;
        flag = 1;
        ws_.push_back({i, a});
    }

    void add_violators()
    {
        for (int i = 0; i < n_; ++i)
            for (int a = 0; a < l_; ++a)
                if (!pinned(a) && w_(a, i) == 0.0 && std::abs(grad_(i, a)) > l1_[a]) add_to_ws(a, i);
    }

    Matrix onehot() const
    {
        Matrix y = Matrix::Zero(m_, l_);
        for (Eigen::Index mu = 0; mu < m_; ++mu) y(mu, labels_[mu]) = 1.0;
        return y;
    }

    void refresh_probs()
    {
        p_ = softmax_probs(u_);
        smooth_ = mean_nll(u_, labels_);
    }

    double kkt_from_grad() const
    {
        double worst = 0.0;
        for (int i = 0; i < n_; ++i)
            for (int a = 0; a < l_; ++a)
                if (!pinned(a))
                    worst = std::max(worst, coordinate_residual(grad_(i, a), w_(a, i), l1_[a], l2_));
        return worst;
    }

    /// One outer iteration; returns the max absolute weight change applied.
    double newton_step(double& obj, double inner_tol, FitResult& res)
    {
        const double inv_m = 1.0 / static_cast<double>(m_);
        const Matrix pq = p_.array() * (1.0 - p_.array());
        WeightMatrix target = w_;
        Matrix r = Matrix::Zero(m_, l_); // X delta^T
        Vector pr = Vector::Zero(m_);    // row-wise p . r

        std::vector<double> curv(ws_.size());
        for (std::size_t k = 0; k < ws_.size(); ++k) {
            const auto [i, a] = ws_[k];
            curv[k] = x_.col(i).cwiseAbs2().dot(pq.col(a)) * inv_m + l2_ + kCurvatureFloor;
        }

        long sweeps = 0, next_direct = 4;
        while (res.iterations < opt_.max_iter) {
            ++res.iterations;
            double max_change = 0.0;
            for (std::size_t k = 0; k < ws_.size(); ++k) {
                const auto [i, a] = ws_[k];
                const auto xi = x_.col(i);
                const auto pa = p_.col(a);
                const double model_grad =
                    grad_(i, a) + inv_m * (xi.cwiseProduct(pa).cwiseProduct(r.col(a) - pr)).sum();
                const double z = target(a, i);
                const double h = curv[k];
                const double z_new = soft_threshold(h * z - (model_grad + l2_ * z), l1_[a]) / h;
                const double d = z_new - z;
                if (d == 0.0) continue;
                target(a, i) = z_new;
                r.col(a) += d * xi;
                pr += d * xi.cwiseProduct(pa);
                max_change = std::max(max_change, std::abs(d));
            }
            if (max_change < inner_tol) break;
            if (++sweeps == next_direct) {
                next_direct *= 4;
                if (solve_on_support(target, r)) break;
            }
        }
        ++res.newton_steps;

        const Matrix delta = target - w_;
        if (delta.cwiseAbs().maxCoeff() == 0.0) return 0.0;
        const double decrease = (grad_.transpose().cwiseProduct(delta)).sum() +
                                penalty(target, l1_, l2_) - penalty(w_, l1_, l2_);

        if (decrease < 0.0) {
            for (double t = 1.0; t >= kMinStep; t *= 0.5) {
                const Matrix u_try = u_ + t * r;
                const WeightMatrix w_try = t == 1.0 ? target : WeightMatrix(w_ + t * delta);
                const double obj_try = mean_nll(u_try, labels_) + penalty(w_try, l1_, l2_);
                if (obj_try <= obj + kArmijo * t * decrease) {
                    w_ = w_try;
                    u_ = x_ * w_.transpose(); // no drift from the incremental r
                    refresh_probs();
                    obj = smooth_ + penalty(w_, l1_, l2_);
                    return t * delta.cwiseAbs().maxCoeff();
                }
            }
        }
        return proximal_gradient_step(obj, res);
    }

    /// grad + H (z - w) as N x L, given r = X (z - w)^T.
    Matrix model_gradient(const Matrix& r) const
    {
        const Vector pr = p_.cwiseProduct(r).rowwise().sum();
        const Matrix inner = p_.cwiseProduct(r - pr.replicate(1, l_));
        return grad_ + x_.transpose() * inner / static_cast<double>(m_);
    }

    /// Solves the quadratic model exactly on the support and signs of target.
    /// Accepted only if the result satisfies the model's optimality conditions on the working set.
    bool solve_on_support(WeightMatrix& target, Matrix& r) const
    {
        const double inv_m = 1.0 / static_cast<double>(m_);
        std::vector<std::vector<int>> feats(l_);
        std::vector<std::vector<Eigen::Index>> pos(l_);
        Eigen::Index ns = 0;
        WeightMatrix d0 = -w_;
        for (const auto& c : ws_) {
            if (target(c.cls, c.feature) == 0.0) continue;
            feats[c.cls].push_back(c.feature);
            pos[c.cls].push_back(ns++);
            d0(c.cls, c.feature) = 0.0;
        }
        if (ns == 0) return false;

        const Matrix g0 = model_gradient(x_ * d0.transpose());
        Matrix h(ns, ns);
        Vector rhs(ns);
        std::vector<Matrix> xs(l_);
        for (int a = 0; a < l_; ++a) xs[a] = x_(Eigen::all, feats[a]);
        for (int a = 0; a < l_; ++a) {
            if (feats[a].empty()) continue;
            for (int b = a; b < l_; ++b) {
                if (feats[b].empty()) continue;
                Vector c = -p_.col(a).cwiseProduct(p_.col(b));
                if (a == b) c += p_.col(a);
                const Matrix block = xs[a].transpose() * c.asDiagonal() * xs[b] * inv_m;
                for (std::size_t i = 0; i < feats[a].size(); ++i)
                    for (std::size_t j = 0; j < feats[b].size(); ++j) {
                        h(pos[a][i], pos[b][j]) = block(i, j);
                        h(pos[b][j], pos[a][i]) = block(i, j);
                    }
            }
            for (std::size_t i = 0; i < feats[a].size(); ++i) {
                const int f = feats[a][i];
                const double sign = target(a, f) > 0 ? 1.0 : -1.0;
                h(pos[a][i], pos[a][i]) += l2_;
                rhs[pos[a][i]] = -(g0(f, a) + l2_ * w_(a, f) + l1_[a] * sign);
            }
        }
        const Eigen::LLT<Matrix> llt(h);
        if (llt.info() != Eigen::Success) return false;
        const Vector ds = llt.solve(rhs);

        WeightMatrix z = WeightMatrix::Zero(l_, n_);
        for (int a = 0; a < l_; ++a)
            for (std::size_t i = 0; i < feats[a].size(); ++i) {
                const int f = feats[a][i];
                z(a, f) = w_(a, f) + ds[pos[a][i]];
                if (!std::isfinite(z(a, f)) || z(a, f) * target(a, f) <= 0.0) return false;
            }
        const Matrix r_new = x_ * (z - w_).transpose();
        const Matrix mg = model_gradient(r_new);
        const double gate = 1e-3 * opt_.tol_kkt;
        for (const auto& c : ws_)
            if (coordinate_residual(mg(c.feature, c.cls), z(c.cls, c.feature), l1_[c.cls], l2_) > gate)
                return false;
        target = z;
        r = r_new;
        return true;
    }

    /// Backtracking proximal-gradient step over all coordinates.
    double proximal_gradient_step(double& obj, FitResult& res)
    {
        ++res.fallback_steps;
        const Matrix g = grad_.transpose(); // L x N
        // Lipschitz bound of the mean NLL: 0.5 * max_mu |x_mu|^2.
        double s = 1.0 / std::max(0.5 * x_.rowwise().squaredNorm().maxCoeff(), 1e-12);
        for (int tries = 0; tries < 60; ++tries, s *= 0.5) {
            WeightMatrix w_try(l_, n_);
            for (int a = 0; a < l_; ++a)
                for (int i = 0; i < n_; ++i)
                    w_try(a, i) = pinned(a) ? 0.0
                                            : soft_threshold(w_(a, i) - s * g(a, i), s * l1_[a]) /
                                                  (1.0 + s * l2_);
            const Matrix diff = w_try - w_;
            const double change = diff.cwiseAbs().maxCoeff();
            if (change == 0.0) return 0.0;
            const Matrix u_try = x_ * w_try.transpose();
            const double smooth_try = mean_nll(u_try, labels_);
            const double bound = smooth_ + g.cwiseProduct(diff).sum() + 0.5 / s * diff.squaredNorm();
            const double obj_try = smooth_try + penalty(w_try, l1_, l2_);
            if (smooth_try <= bound && obj_try <= obj) {
                w_ = w_try;
                u_ = u_try;
                refresh_probs();
                obj = obj_try;
                for (int i = 0; i < n_; ++i)
                    for (int a = 0; a < l_; ++a)
                        if (w_(a, i) != 0.0 && !pinned(a)) add_to_ws(a, i);
                return change;
            }
        }
        return 0.0;
    }

    const Matrix& x_;
    const std::vector<int>& labels_;
    const FitOptions& opt_;
    Eigen::Index m_;
    int n_;
    int l_;
    std::vector<double> l1_;
    double l2_;

    WeightMatrix w_;
    Matrix u_, p_, grad_;
    double smooth_ = 0.0;

    struct Coord {
        int feature;
        int cls;
    };
    std::vector<Coord> ws_;
    std::vector<char> in_ws_;
};

} // namespace

double HyperParams::l1_mean(int cls) const
{
    const double factor = class_l1_factors.empty() ? 1.0 : class_l1_factors[cls];
    return lambda_tilde * eta * factor;
}

void HyperParams::validate(int n_classes) const
{
    require(std::isfinite(lambda_tilde) && lambda_tilde > 0.0,
            "lambda_tilde must be positive (unpenalized MLR is singular)");
    require(eta >= 0.0 && eta <= 1.0, "eta must lie in [0, 1]");
    require(class_l1_factors.empty() || static_cast<int>(class_l1_factors.size()) == n_classes,
            "class_l1_factors must be empty or have one entry per class");
    for (double f : class_l1_factors) require(std::isfinite(f) && f >= 0.0, "class l1 factors must be >= 0");
}

double objective(const Dataset& data, const WeightMatrix& w, const HyperParams& hyper)
{
    const Matrix u = overlaps(data, w);
    return mean_nll(u, data.labels) + penalty(w, l1_coefficients(hyper, data.n_classes), hyper.l2_mean());
}

Matrix smooth_gradient(const Dataset& data, const WeightMatrix& w)
{
    const auto blocks = sample_blocks(data, w);
    return blocks.grads.transpose() * data.features / static_cast<double>(data.n_samples());
}

double kkt_violation(const Dataset& data, const WeightMatrix& w, const HyperParams& hyper,
                     std::optional<int> zero_gauge_class)
{
    const Matrix g = smooth_gradient(data, w);
    double worst = 0.0;
    for (Eigen::Index a = 0; a < w.rows(); ++a) {
        if (zero_gauge_class && *zero_gauge_class == a) continue;
        for (Eigen::Index i = 0; i < w.cols(); ++i)
            worst = std::max(worst, coordinate_residual(g(a, i), w(a, i), hyper.l1_mean(static_cast<int>(a)),
                                                        hyper.l2_mean()));
    }
    return worst;
}

double lambda_max(const Dataset& data, double eta, const std::vector<double>& class_l1_factors)
{
    const double eff_eta = eta > 0.0 ? eta : 1e-3;
    const Matrix g = smooth_gradient(data, WeightMatrix::Zero(data.n_classes, data.n_features()));
    double hi = 0.0;
    for (Eigen::Index a = 0; a < g.rows(); ++a) {
        const double f = class_l1_factors.empty() ? 1.0 : class_l1_factors[a];
        if (f <= 0.0) continue;
        hi = std::max(hi, g.row(a).cwiseAbs().maxCoeff() / (eff_eta * f));
    }
    return hi;
}

std::vector<double> log_grid(double hi, double decades, int count)
{
    require(hi > 0.0 && count >= 1 && decades >= 0.0, "invalid log grid");
    std::vector<double> grid(count);
    for (int k = 0; k < count; ++k) {
        const double frac = count == 1 ? 0.0 : static_cast<double>(k) / (count - 1);
        grid[k] = hi * std::pow(10.0, -decades * frac);
    }
    return grid;
}

FitResult fit(const Dataset& data, const HyperParams& hyper, const FitOptions& options,
              const WeightMatrix* warm_start)
{
    data.validate();
    hyper.validate(data.n_classes);
    require(options.tol_delta > 0.0 && options.max_iter > 0, "invalid solver tolerances");
    if (options.zero_gauge_class)
        require(*options.zero_gauge_class >= 0 && *options.zero_gauge_class < data.n_classes,
                "zero gauge class out of range");

    WeightMatrix start = WeightMatrix::Zero(data.n_classes, data.n_features());
    if (warm_start) {
        require(warm_start->rows() == start.rows() && warm_start->cols() == start.cols(),
                "warm start has the wrong shape");
        start = *warm_start;
    }
    ProxNewton solver(data, hyper, options);
    FitResult res = solver.run(std::move(start));
    res.hyper = hyper;
    return res;
}

std::vector<FitResult> fit_path(const Dataset& data, const std::vector<double>& lambda_grid, double eta,
                                const FitOptions& options, const std::vector<double>& class_l1_factors)
{
    require(!lambda_grid.empty(), "lambda grid is empty");
    for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
        require(lambda_grid[k] > 0.0, "lambda grid must be positive");
        if (k > 0) require(lambda_grid[k] < lambda_grid[k - 1], "lambda grid must be strictly decreasing");
    }
    std::vector<FitResult> path;
    path.reserve(lambda_grid.size());
    for (double lam : lambda_grid) {
        HyperParams h{lam, eta, class_l1_factors};
        path.push_back(fit(data, h, options, path.empty() ? nullptr : &path.back().weights));
    }
    return path;
}

} // namespace acvmlr
