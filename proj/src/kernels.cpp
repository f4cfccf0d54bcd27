#include "ovepg/kernels.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ovepg {

namespace {

MatrixXd row_normalized(const MatrixXd& G) {
    MatrixXd out(G.rows(), G.cols());
    for (Eigen::Index i = 0; i < G.rows(); ++i) {
        const double norm = G.row(i).norm();
        if (norm <= 0.0) throw std::invalid_argument("degenerate input: zero-norm feature vector for a normalized kernel");
        out.row(i) = G.row(i) / norm;
    }
    return out;
}

MatrixXd squared_distances(const MatrixXd& A, const MatrixXd& B) {
    const VectorXd a2 = A.rowwise().squaredNorm();
    const VectorXd b2 = B.rowwise().squaredNorm();
    MatrixXd d2 = -2.0 * A * B.transpose();
    d2.colwise() += a2;
    d2.rowwise() += b2.transpose();
    return d2.cwiseMax(0.0);
}

}  // namespace

KernelKind kernel_kind_from_string(const std::string& name) {
    if (name == "cosine") return KernelKind::cosine;
    if (name == "linear") return KernelKind::linear;
    if (name == "rbf") return KernelKind::rbf;
    if (name == "rbf_normalized") return KernelKind::rbf_normalized;
    if (name == "raw_rbf") return KernelKind::raw_rbf;
    throw std::invalid_argument("unknown kernel: " + name);
}

std::string to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::cosine: return "cosine";
        case KernelKind::linear: return "linear";
        case KernelKind::rbf: return "rbf";
        case KernelKind::rbf_normalized: return "rbf_normalized";
        case KernelKind::raw_rbf: return "raw_rbf";
    }
    return "?";
}

AffineFeatureMap AffineFeatureMap::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open feature map file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("ragged feature map file: " + path);
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2) throw std::runtime_error("feature map file needs weights plus a bias row");
    const int out_dim = static_cast<int>(rows.front().size());
    const int in_dim = static_cast<int>(rows.size()) - 1;
    AffineFeatureMap map;
    map.weights.resize(in_dim, out_dim);
    for (int i = 0; i < in_dim; ++i)
        for (int j = 0; j < out_dim; ++j) map.weights(i, j) = rows[i][j];
    map.bias.resize(out_dim);
    for (int j = 0; j < out_dim; ++j) map.bias[j] = rows[in_dim][j];
    return map;
}

MatrixXd AffineFeatureMap::apply(const MatrixXd& X) const {
    if (X.cols() != weights.rows())
        throw std::invalid_argument("feature map input dimension mismatch");
    MatrixXd G = X * weights;
    G.rowwise() += bias.transpose();
    return G;
}

bool KernelSpec::has_param(HyperId id) const {
    switch (id) {
        case HyperId::mean_const:
            return true;
        case HyperId::log_output_scale:
            return kind != KernelKind::raw_rbf;
        case HyperId::log_lengthscale:
            return kind == KernelKind::rbf || kind == KernelKind::rbf_normalized;
    }
    return false;
}

std::vector<HyperId> KernelSpec::learnable_params() const {
    std::vector<HyperId> out;
    if (has_param(HyperId::log_output_scale)) out.push_back(HyperId::log_output_scale);
    if (has_param(HyperId::log_lengthscale)) out.push_back(HyperId::log_lengthscale);
    out.push_back(HyperId::mean_const);
    return out;
}

double KernelSpec::get_param(HyperId id) const {
    switch (id) {
        case HyperId::log_output_scale: return log_output_scale;
        case HyperId::log_lengthscale: return log_lengthscale;
        case HyperId::mean_const: return mean_const;
    }
    throw std::logic_error("unreachable hyperparameter id");
}

void KernelSpec::set_param(HyperId id, double value) {
    switch (id) {
        case HyperId::log_output_scale: log_output_scale = value; return;
        case HyperId::log_lengthscale: log_lengthscale = value; return;
        case HyperId::mean_const: mean_const = value; return;
    }
    throw std::logic_error("unreachable hyperparameter id");
}

MatrixXd eval_kernel(const KernelSpec& spec, const MatrixXd& X, const MatrixXd& X2) {
    if (X.cols() != X2.cols()) throw std::invalid_argument("kernel inputs must share dimensionality");
    if (!X.allFinite() || !X2.allFinite()) throw std::invalid_argument("kernel inputs must be finite");
    const MatrixXd G = spec.feature_map ? spec.feature_map->apply(X) : X;
    const MatrixXd G2 = spec.feature_map ? spec.feature_map->apply(X2) : X2;
    const double scale = (spec.kind == KernelKind::raw_rbf) ? 1.0 : std::exp(spec.log_output_scale);
    const double d = static_cast<double>(G.cols());

    switch (spec.kind) {
        case KernelKind::cosine:
            return scale * (row_normalized(G) * row_normalized(G2).transpose());
        case KernelKind::linear:
            return (scale / d) * (G * G2.transpose());
        case KernelKind::rbf: {
            const double ell2 = std::exp(2.0 * spec.log_lengthscale);
            return scale * (-squared_distances(G, G2) / (2.0 * d * ell2)).array().exp().matrix();
        }
        case KernelKind::rbf_normalized: {
            const double ell2 = std::exp(2.0 * spec.log_lengthscale);
            const MatrixXd d2 = squared_distances(row_normalized(G), row_normalized(G2));
            return scale * (-d2 / (2.0 * ell2)).array().exp().matrix();
        }
        case KernelKind::raw_rbf:
            return (-0.5 * squared_distances(G, G2)).array().exp().matrix();
    }
    throw std::logic_error("unreachable kernel kind");
}

MatrixXd kernel_param_grad(const KernelSpec& spec, const MatrixXd& X, HyperId param) {
    if (param == HyperId::mean_const)
        throw std::invalid_argument("no such param: mean_const does not enter the Gram matrix");
    if (!spec.has_param(param))
        throw std::invalid_argument("no such param for kernel " + to_string(spec.kind));

    const MatrixXd K = eval_kernel(spec, X, X);
    if (param == HyperId::log_output_scale) return K;  // every kind scales as e^alpha

    // d/d ell of exp(-s / (2 d ell^2)) multiplies K by s / (d ell^2).
    const MatrixXd G = spec.feature_map ? spec.feature_map->apply(X) : X;
    const double ell2 = std::exp(2.0 * spec.log_lengthscale);
    if (spec.kind == KernelKind::rbf) {
        const MatrixXd s = squared_distances(G, G);
        return K.cwiseProduct(s / (static_cast<double>(G.cols()) * ell2));
    }
    const MatrixXd s = squared_distances(row_normalized(G), row_normalized(G));
    return K.cwiseProduct(s / ell2);
}

BlockKernelMatrix::BlockKernelMatrix(MatrixXd base, int num_classes, double jitter)
    : base_(std::move(base)), c_(num_classes), jitter_(jitter) {
    if (c_ < 1) throw std::invalid_argument("block kernel needs at least one class");
    if ((base_ - base_.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("kernel base matrix must be symmetric");
    llt_.compute(base_);
    if (llt_.info() != Eigen::Success)
        throw std::runtime_error("not positive definite: Cholesky of kernel base failed");
}

VectorXd BlockKernelMatrix::multiply(const VectorXd& u) const {
    if (u.size() != dim()) throw std::invalid_argument("shape error in block multiply");
    VectorXd out(dim());
    for (int c = 0; c < c_; ++c)
        out.segment(static_cast<Eigen::Index>(c) * n(), n()) =
            base_ * u.segment(static_cast<Eigen::Index>(c) * n(), n());
    return out;
}

VectorXd BlockKernelMatrix::solve(const VectorXd& u) const {
    if (u.size() != dim()) throw std::invalid_argument("shape error in block solve");
    VectorXd out(dim());
    for (int c = 0; c < c_; ++c)
        out.segment(static_cast<Eigen::Index>(c) * n(), n()) =
            llt_.solve(u.segment(static_cast<Eigen::Index>(c) * n(), n()));
    return out;
}

double BlockKernelMatrix::log_det_full() const {
    const auto& L = llt_.matrixLLT();
    double ld = 0.0;
    for (int i = 0; i < n(); ++i) ld += std::log(L(i, i));
    return 2.0 * c_ * ld;
}

VectorXd BlockKernelMatrix::sample_prior(const VectorXd& mu, RngStream& rng) const {
    if (mu.size() != dim()) throw std::invalid_argument("shape error in prior sample");
    VectorXd z(dim());
    for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = rng.normal();
    VectorXd out(dim());
    const auto L = llt_.matrixL();
    for (int c = 0; c < c_; ++c) {
        const Eigen::Index off = static_cast<Eigen::Index>(c) * n();
        out.segment(off, n()) = mu.segment(off, n()) + L * z.segment(off, n());
    }
    return out;
}

MatrixXd BlockKernelMatrix::dense_full() const {
    MatrixXd K = MatrixXd::Zero(dim(), dim());
    for (int c = 0; c < c_; ++c)
        K.block(static_cast<Eigen::Index>(c) * n(), static_cast<Eigen::Index>(c) * n(), n(), n()) = base_;
    return K;
}

BlockKernelMatrix build_block_kernel(const KernelSpec& spec, const MatrixXd& X,
                                     int num_classes, double jitter) {
    MatrixXd K = eval_kernel(spec, X, X);
    K = 0.5 * (K + K.transpose());
    const double mean_diag = K.diagonal().mean();
    if (jitter >= 0.0) {
        return BlockKernelMatrix(K + jitter * MatrixXd::Identity(K.rows(), K.cols()), num_classes, jitter);
    }
    double j = 1e-6 * mean_diag;
    const double j_max = 1e-2 * mean_diag;
    while (true) {
        Eigen::LLT<MatrixXd> probe(K + j * MatrixXd::Identity(K.rows(), K.cols()));
        if (probe.info() == Eigen::Success)
            return BlockKernelMatrix(K + j * MatrixXd::Identity(K.rows(), K.cols()), num_classes, j);
        if (j >= j_max)
            throw std::runtime_error("not positive definite: jitter escalation exhausted");
        j *= 10.0;
    }
}

}  // namespace ovepg
