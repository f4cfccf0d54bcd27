#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <optional>
#include <string>

#include "ovepg/rng.hpp"

namespace ovepg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class KernelKind { cosine, linear, rbf, rbf_normalized, raw_rbf };

KernelKind kernel_kind_from_string(const std::string& name);
std::string to_string(KernelKind kind);

enum class HyperId { log_output_scale, log_lengthscale, mean_const };

/// Optional fixed affine feature map g(x) = W^T x + b, loaded from CSV
/// (in_dim rows of weights followed by one bias row; out_dim columns).
struct AffineFeatureMap {
    MatrixXd weights;  // in_dim x out_dim
    VectorXd bias;     // out_dim

    static AffineFeatureMap load_csv(const std::string& path);
    MatrixXd apply(const MatrixXd& X) const;
};

struct KernelSpec {
    KernelKind kind = KernelKind::rbf;
    double log_output_scale = 0.0;  // alpha
    double log_lengthscale = 0.0;   // ell (ignored by cosine/linear)
    double mean_const = 0.0;        // constant prior mean m
    std::optional<AffineFeatureMap> feature_map;

    bool has_param(HyperId id) const;
    std::vector<HyperId> learnable_params() const;
    double get_param(HyperId id) const;
    void set_param(HyperId id, double value);
};

/// Gram matrix between the rows of X and X2 under `spec`.
MatrixXd eval_kernel(const KernelSpec& spec, const MatrixXd& X, const MatrixXd& X2);

/// Analytic dK/dparam on the training Gram matrix. Throws no-such-param when
/// the kind has no such hyperparameter.
MatrixXd kernel_param_grad(const KernelSpec& spec, const MatrixXd& X, HyperId param);

/// The CN x CN prior covariance: C identical blocks K_N on the diagonal.
/// Only the N x N base and its Cholesky factor are stored; all full-size
/// operations run blockwise.
class BlockKernelMatrix {
public:
    BlockKernelMatrix(MatrixXd base, int num_classes, double jitter);

    int n() const { return static_cast<int>(base_.rows()); }
    int num_classes() const { return c_; }
    Eigen::Index dim() const { return static_cast<Eigen::Index>(n()) * c_; }
    double jitter() const { return jitter_; }

    const MatrixXd& base() const { return base_; }
    const Eigen::LLT<MatrixXd>& llt() const { return llt_; }

    /// K u and K^{-1} u, blockwise.
    VectorXd multiply(const VectorXd& u) const;
    VectorXd solve(const VectorXd& u) const;

    /// log det of the full CN x CN matrix: C * log det K_N.
    double log_det_full() const;

    /// Draw from N(mu, K), blockwise.
    VectorXd sample_prior(const VectorXd& mu, RngStream& rng) const;

    /// Dense CN x CN copy, for small-instance oracles.
    MatrixXd dense_full() const;

private:
    MatrixXd base_;
    Eigen::LLT<MatrixXd> llt_;
    int c_;
    double jitter_;
};

/// Builds K_N + jitter * I with a cached Cholesky factor. With jitter < 0 the
/// default policy applies: 1e-6 * mean-diagonal, escalating x10 up to
/// 1e-2 * mean-diagonal before failing.
BlockKernelMatrix build_block_kernel(const KernelSpec& spec, const MatrixXd& X,
                                     int num_classes, double jitter = -1.0);

}  // namespace ovepg
