#pragma once
#include <cstddef>
#include <vector>
#include <Eigen/Dense>

namespace acvmlr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// L x N coefficient array; row a holds the weight vector of class a.
/// Exact zeros are meaningful: they define the active set.
using WeightMatrix = Matrix;

/**
 * Labelled samples for an L-class problem.
 *
 * features is M x N with one sample per row. labels are 0-based class
 * indices in [0, n_classes); file formats use 1-based labels and convert
 * at the boundary.
 */
struct Dataset {
    Matrix features;
    std::vector<int> labels;
    int n_classes = 0;

    Eigen::Index n_samples() const { return features.rows(); }
    Eigen::Index n_features() const { return features.cols(); }

    /// Throws ContractViolation if any invariant is broken.
    void validate() const;
};

/// Checked constructor.
Dataset make_dataset(Matrix features, std::vector<int> labels, int n_classes);

struct ActivePair {
    int feature;
    int cls;

    friend bool operator==(const ActivePair&, const ActivePair&) = default;
};

/**
 * Index set of nonzero weights, ordered by (feature, class).
 *
 * The position of a pair in pairs() is its row/column in every matrix
 * indexed over the active set (Hessian, inverse Hessian).
 */
class ActiveSet {
public:
    ActiveSet() = default;

    static ActiveSet from_weights(const WeightMatrix& w);

    const std::vector<ActivePair>& pairs() const { return pairs_; }
    std::size_t size() const { return pairs_.size(); }
    bool empty() const { return pairs_.empty(); }
    int n_classes() const { return n_classes_; }
    int n_features() const { return n_features_; }

    /// Active classes at feature i, ascending.
    const std::vector<int>& classes_at(int feature) const { return per_feature_[feature]; }

    /// Positions in pairs() that belong to class a, ascending.
    const std::vector<int>& positions_of_class(int cls) const { return per_class_[cls]; }

private:
    std::vector<ActivePair> pairs_;
    std::vector<std::vector<int>> per_feature_;
    std::vector<std::vector<int>> per_class_;
    int n_classes_ = 0;
    int n_features_ = 0;
};

/// Overlaps u_{mu a} = x_mu . w_a as an M x L matrix.
Matrix overlaps(const Dataset& data, const WeightMatrix& w);

/// Row-wise softmax with max subtraction.
Matrix softmax_probs(const Matrix& u);

/// Probabilities below this value are clamped before taking logs.
inline constexpr double kProbabilityFloor = 1e-300;

/// Sample mean; exact when all entries are equal. Empty gives 0.
double mean_loss(const Vector& v);

struct NllResult {
    Vector per_sample;
    std::size_t clamped = 0;

    double mean() const { return mean_loss(per_sample); }
};

/// q_mu = -ln p_{y_mu | mu}.
NllResult nll_per_sample(const Matrix& probs, const std::vector<int>& labels);

/// Overlap-space gradient b^mu_a = p_{a|mu} - delta_{a, y_mu}, as M x L.
Matrix grad_b(const Matrix& probs, const std::vector<int>& labels);

/// Overlap-space Hessian F_ab = delta_ab p_a - p_a p_b of one sample.
Matrix hessian_f(const Eigen::Ref<const Vector>& p);

/// Everything the estimators need about the samples at a given weight matrix.
struct SampleBlocks {
    Matrix overlaps;
    Matrix probs;
    Matrix grads;
    std::size_t clamped = 0;
    Vector nll;
};

SampleBlocks sample_blocks(const Dataset& data, const WeightMatrix& w);

/**
 * Cost-function Hessian restricted to the active set,
 *
 *   G_{(a,i),(b,j)} = sum_mu x_{mu i} x_{mu j} F^mu_{ab} + lambda2 delta,
 *
 * assembled as a per-class diagonal block term minus a Gram term so the
 * repetition matrix is never formed. Empty active set gives a 0 x 0 matrix.
 */
Matrix assemble_hessian(const Dataset& data, const Matrix& probs, const ActiveSet& active,
                        double lambda2);

/// Mean squared feature entry, sum_{mu,i} x_{mu i}^2 / (N M).
double sigma_x2(const Dataset& data);

} // namespace acvmlr
