#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace ovepg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class LikKind { softmax, ove, lsm, gaussian };

LikKind lik_kind_from_string(const std::string& name);
std::string to_string(LikKind kind);

double sigmoid(double x);
double log_sigmoid(double x);

/// Class-major index of point i under class c when logits are stacked as
/// f = (f_1^1..f_N^1, f_1^2..f_N^2, ...).
inline Eigen::Index stacked_index(int c, int i, int n) {
    return static_cast<Eigen::Index>(c) * n + i;
}

/// One-hot labels for N points over C classes, stored as the class index of
/// each point. Construction validates the one-hot invariant.
class OneHotLabels {
public:
    OneHotLabels(std::vector<int> class_of, int num_classes);

    /// Validates that every row of Y sums to exactly 1 with {0,1} entries.
    static OneHotLabels from_matrix(const MatrixXd& Y);

    int n() const { return static_cast<int>(class_of_.size()); }
    int num_classes() const { return num_classes_; }
    int class_of(int i) const { return class_of_[i]; }
    const std::vector<int>& classes() const { return class_of_; }
    MatrixXd matrix() const;

private:
    std::vector<int> class_of_;
    int num_classes_;
};

/// Per-example likelihood values L(f | y). `f` holds the C logits of one
/// example; `y` is the zero-based target class.
double softmax_lik(const VectorXd& f, int y);
double ove_lik(const VectorXd& f, int y);
double lsm_lik(const VectorXd& f, int y);
double gaussian_lik(const VectorXd& f, int y);

double log_softmax_lik(const VectorXd& f, int y);
double log_ove_lik(const VectorXd& f, int y);
double log_lsm_lik(const VectorXd& f, int y);
double log_gaussian_lik(const VectorXd& f, int y);

double log_lik(LikKind kind, const VectorXd& f, int y);

/// (L(f|y=1), ..., L(f|y=C)) divided by its sum. Throws on total underflow.
VectorXd normalized_probs(LikKind kind, const VectorXd& f);

/// The sparse CN x CN block matrix A with blocks
/// A_{cc'} = diag(Y_{.c'}) - 1[c = c'] I_N, so that (A f)_{(c,i)} =
/// f_i^{y_i} - f_i^c. Applications run in O(CN); dense() exists for oracles.
class OveTransform {
public:
    OveTransform(const OneHotLabels& labels);

    int n() const { return n_; }
    int num_classes() const { return c_; }
    Eigen::Index dim() const { return static_cast<Eigen::Index>(n_) * c_; }
    int label_of(int i) const { return labels_[i]; }
    const std::vector<int>& labels() const { return labels_; }

    VectorXd apply(const VectorXd& f) const;
    VectorXd apply_transpose(const VectorXd& v) const;
    MatrixXd dense() const;

private:
    int n_;
    int c_;
    std::vector<int> labels_;
};

OveTransform build_ove_transform(const OneHotLabels& labels);

/// Pairwise binary logits psi = A f together with the constant kappa = 1/2.
struct PairwiseLogits {
    VectorXd psi;
    static constexpr double kappa = 0.5;
};

/// log L(psi | Y) = N log 2 + sum_j log sigma(psi_j).
double ove_log_lik_psi(const VectorXd& psi, int n);

}  // namespace ovepg
