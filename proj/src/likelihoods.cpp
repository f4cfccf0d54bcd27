#include "ovepg/likelihoods.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ovepg {

namespace {

constexpr double kLogSqrt2Pi = 0.9189385332046727;  // log sqrt(2 pi)

double log_normal_pdf(double x, double mean) {
    const double d = x - mean;
    return -0.5 * d * d - kLogSqrt2Pi;
}

void check_class(const VectorXd& f, int y) {
    if (y < 0 || y >= f.size()) throw std::invalid_argument("class index out of range");
}

}  // namespace

LikKind lik_kind_from_string(const std::string& name) {
    if (name == "softmax") return LikKind::softmax;
    if (name == "ove") return LikKind::ove;
    if (name == "lsm") return LikKind::lsm;
    if (name == "gaussian") return LikKind::gaussian;
    throw std::invalid_argument("unknown likelihood: " + name);
}

std::string to_string(LikKind kind) {
    switch (kind) {
        case LikKind::softmax: return "softmax";
        case LikKind::ove: return "ove";
        case LikKind::lsm: return "lsm";
        case LikKind::gaussian: return "gaussian";
    }
    return "?";
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log_sigmoid(double x) {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

OneHotLabels::OneHotLabels(std::vector<int> class_of, int num_classes)
    : class_of_(std::move(class_of)), num_classes_(num_classes) {
    if (num_classes_ < 1) throw std::invalid_argument("labels need at least one class");
    for (int y : class_of_) {
        if (y < 0 || y >= num_classes_) throw std::invalid_argument("invalid labels: class index out of range");
    }
}

OneHotLabels OneHotLabels::from_matrix(const MatrixXd& Y) {
    const int n = static_cast<int>(Y.rows());
    const int c = static_cast<int>(Y.cols());
    std::vector<int> classes(n, -1);
    for (int i = 0; i < n; ++i) {
        int ones = 0;
        for (int j = 0; j < c; ++j) {
            const double v = Y(i, j);
            if (v == 1.0) {
                ++ones;
                classes[i] = j;
            } else if (v != 0.0) {
                throw std::invalid_argument("invalid labels: entries must be 0 or 1");
            }
        }
        if (ones != 1) throw std::invalid_argument("invalid labels: each row must have exactly one 1");
    }
    return OneHotLabels(std::move(classes), c);
}

MatrixXd OneHotLabels::matrix() const {
    MatrixXd Y = MatrixXd::Zero(n(), num_classes_);
    for (int i = 0; i < n(); ++i) Y(i, class_of_[i]) = 1.0;
    return Y;
}

double log_softmax_lik(const VectorXd& f, int y) {
    check_class(f, y);
    const double m = f.maxCoeff();
    const double lse = m + std::log((f.array() - m).exp().sum());
    return f[y] - lse;
}

double log_ove_lik(const VectorXd& f, int y) {
    check_class(f, y);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < f.size(); ++j) {
        if (j == y) continue;
        acc += log_sigmoid(f[y] - f[j]);
    }
    return acc;
}

double log_lsm_lik(const VectorXd& f, int y) {
    check_class(f, y);
    // log sigma(f_y) - log sum_c sigma(f_c); the sum is >= sigma(max f).
    double lognum = log_sigmoid(f[y]);
    double maxlog = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < f.size(); ++j) maxlog = std::max(maxlog, log_sigmoid(f[j]));
    double s = 0.0;
    for (Eigen::Index j = 0; j < f.size(); ++j) s += std::exp(log_sigmoid(f[j]) - maxlog);
    return lognum - maxlog - std::log(s);
}

double log_gaussian_lik(const VectorXd& f, int y) {
    check_class(f, y);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < f.size(); ++j) {
        const double target = (j == y) ? 1.0 : -1.0;
        acc += log_normal_pdf(target, f[j]);
    }
    return acc;
}

double softmax_lik(const VectorXd& f, int y) { return std::exp(log_softmax_lik(f, y)); }
double ove_lik(const VectorXd& f, int y) { return std::exp(log_ove_lik(f, y)); }
double lsm_lik(const VectorXd& f, int y) { return std::exp(log_lsm_lik(f, y)); }
double gaussian_lik(const VectorXd& f, int y) { return std::exp(log_gaussian_lik(f, y)); }

double log_lik(LikKind kind, const VectorXd& f, int y) {
    switch (kind) {
        case LikKind::softmax: return log_softmax_lik(f, y);
        case LikKind::ove: return log_ove_lik(f, y);
        case LikKind::lsm: return log_lsm_lik(f, y);
        case LikKind::gaussian: return log_gaussian_lik(f, y);
    }
    throw std::logic_error("unreachable likelihood kind");
}

VectorXd normalized_probs(LikKind kind, const VectorXd& f) {
    if (!f.allFinite()) throw std::invalid_argument("normalized_probs: logits must be finite");
    const Eigen::Index c = f.size();
    VectorXd logv(c);
    for (Eigen::Index y = 0; y < c; ++y) logv[y] = log_lik(kind, f, static_cast<int>(y));
    const double m = logv.maxCoeff();
    if (!std::isfinite(m)) throw std::invalid_argument("degenerate input: all likelihood values underflow");
    VectorXd p = (logv.array() - m).exp();
    p /= p.sum();
    return p;
}

OveTransform::OveTransform(const OneHotLabels& labels)
    : n_(labels.n()), c_(labels.num_classes()), labels_(labels.classes()) {}

OveTransform build_ove_transform(const OneHotLabels& labels) {
    return OveTransform(labels);
}

VectorXd OveTransform::apply(const VectorXd& f) const {
    if (f.size() != dim()) throw std::invalid_argument("shape error: logits length mismatch");
    VectorXd psi(dim());
    for (int i = 0; i < n_; ++i) {
        const double own = f[stacked_index(labels_[i], i, n_)];
        for (int c = 0; c < c_; ++c) {
            psi[stacked_index(c, i, n_)] = own - f[stacked_index(c, i, n_)];
        }
    }
    return psi;
}

VectorXd OveTransform::apply_transpose(const VectorXd& v) const {
    if (v.size() != dim()) throw std::invalid_argument("shape error: vector length mismatch");
    VectorXd out(dim());
    for (int i = 0; i < n_; ++i) {
        double row_sum = 0.0;
        for (int c = 0; c < c_; ++c) row_sum += v[stacked_index(c, i, n_)];
        for (int c = 0; c < c_; ++c) {
            const double own = (labels_[i] == c) ? row_sum : 0.0;
            out[stacked_index(c, i, n_)] = own - v[stacked_index(c, i, n_)];
        }
    }
    return out;
}

MatrixXd OveTransform::dense() const {
    MatrixXd A = MatrixXd::Zero(dim(), dim());
    for (int c = 0; c < c_; ++c) {
        for (int i = 0; i < n_; ++i) {
            const Eigen::Index row = stacked_index(c, i, n_);
            A(row, stacked_index(labels_[i], i, n_)) += 1.0;
            A(row, stacked_index(c, i, n_)) -= 1.0;
        }
    }
    return A;
}

double ove_log_lik_psi(const VectorXd& psi, int n) {
    double acc = n * std::numbers::ln2;
    for (Eigen::Index j = 0; j < psi.size(); ++j) acc += log_sigmoid(psi[j]);
    return acc;
}

}  // namespace ovepg
