#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "ovepg/data.hpp"
#include "ovepg/kernels.hpp"
#include "ovepg/likelihoods.hpp"
#include "ovepg/rng.hpp"

namespace ovepg {

/// Auxiliary Polya-Gamma vector omega > 0 of length CN; the matching kappa
/// is the constant 1/2 on every coordinate.
struct AugmentationState {
    VectorXd omega;
};

struct GibbsConfig {
    int chains = 20;
    int steps = 1;
    std::uint64_t master_seed = 0;
    bool use_efficient_sampler = true;
    bool parallel = true;
};

struct ChainState {
    VectorXd f;
    VectorXd omega;
    int step = 0;
};

/// One chain's visited states for t = 1..T (the PG(1,0)/prior init is not
/// recorded).
struct ChainTrajectory {
    std::vector<ChainState> states;

    const ChainState& final_state() const { return states.back(); }
    /// States after discarding the first half (conservative burn-in).
    std::vector<const ChainState*> post_burn_in() const;
};

/// omega_j ~ PG(1, psi_j) independently; self-comparison rows are PG(1, 0).
AugmentationState sample_omega_conditional(const VectorXd& psi, RngStream& rng);

/// Exact draw from N(SigmaTilde (K^{-1} mu + A^T kappa), SigmaTilde) with
/// SigmaTilde = (K^{-1} + A^T Omega A)^{-1}, via a dense CN x CN Cholesky.
/// O(C^3 N^3); intended as the oracle for small instances.
VectorXd sample_f_conditional_naive(const BlockKernelMatrix& K, const VectorXd& mu,
                                    const OveTransform& A, const AugmentationState& state,
                                    RngStream& rng);

/// Reusable decomposition A^T Omega A = D - S P S^T with
///   d_i^c   = Y_ic * sum_{c'} omega_i^{c'},   D = Omega + diag(d),
///   S       = [Y-stack  W-stack] (CN x 2N, <= 2 nonzeros per row),
///   P       = antidiagonal identity pairing (2N x 2N),
///   E       = (K^{-1} + D)^{-1} blockwise (SPD per class block).
/// Exposes O(C N^3) actions of (K^{-1} + A^T Omega A)^{-1} and of
/// (A K A^T + Omega^{-1})^{-1}, and the log-determinant of the latter.
class EfficientSolver {
public:
    EfficientSolver(const BlockKernelMatrix& K, const OveTransform& A,
                    const VectorXd& omega);

    /// (K^{-1} + A^T Omega A)^{-1} u.
    VectorXd solve_precision(const VectorXd& u) const;

    /// (A K A^T + Omega^{-1})^{-1} u.
    VectorXd solve_psi_cov(const VectorXd& u) const;

    /// log det (A K A^T + Omega^{-1}).
    double log_det_psi_cov() const;

    /// (A^T Omega A) u through the D/S/P decomposition, O(CN).
    VectorXd apply_At_Omega_A(const VectorXd& u) const;

    const VectorXd& omega() const { return omega_; }
    const OveTransform& transform() const { return *A_; }

private:
    VectorXd apply_E(const VectorXd& u) const;
    VectorXd apply_S_transpose(const VectorXd& u) const;
    VectorXd apply_S(const VectorXd& w) const;

    const BlockKernelMatrix* K_;
    const OveTransform* A_;
    VectorXd omega_;
    VectorXd d_diag_;                  // D = diag(omega + d)
    std::vector<MatrixXd> e_blocks_;   // E^c per class
    double log_det_b_sum_ = 0.0;       // sum_c log det B_c
    Eigen::PartialPivLU<MatrixXd> g_lu_;  // G = S^T E S - P
    double log_det_g_term_ = 0.0;      // log det (I - S^T E S P)
};

/// Exact draw from the same conditional as the naive sampler in O(C N^3):
/// f0 ~ N(mu, K), z0 ~ N(A f0, Omega^{-1}), then the correction through the
/// D/S/P/E decomposition.
VectorXd sample_f_conditional_efficient(const BlockKernelMatrix& K, const VectorXd& mu,
                                        const OveTransform& A, const AugmentationState& state,
                                        RngStream& rng);

/// Deterministic tail of the efficient sampler given shared draws (f0, z0);
/// exposed so oracles can compare against the dense one-shot formula.
VectorXd efficient_fbar_from(const BlockKernelMatrix& K, const OveTransform& A,
                             const VectorXd& omega, const VectorXd& f0, const VectorXd& z0);

/// M independent chains, each advanced T steps from omega0 ~ PG(1,0) and
/// f0 ~ N(mu, K). Chain m consumes RngStream(master_seed, m); results are
/// merged by chain index so scheduling cannot change the output.
std::vector<ChainTrajectory> run_gibbs(const LabeledDesignMatrix& data,
                                       const KernelSpec& spec, const GibbsConfig& cfg);

std::vector<ChainTrajectory> run_gibbs(const BlockKernelMatrix& K, const VectorXd& mu,
                                       const OveTransform& A, const GibbsConfig& cfg);

/// Elliptical slice sampling for any pointwise-evaluable log-likelihood of
/// the stacked logits; asymptotically exact for the corresponding posterior.
std::vector<VectorXd> ess_sample(const BlockKernelMatrix& K, const VectorXd& mu,
                                 const std::function<double(const VectorXd&)>& log_lik,
                                 int iterations, RngStream& rng);

/// Generic latent-Gaussian oracle: posterior samples of f under any
/// likelihood kind of the comparison table.
std::vector<VectorXd> ess_oracle(const LabeledDesignMatrix& data, const KernelSpec& spec,
                                 LikKind kind, int iterations, RngStream& rng);

/// Sum over examples of log L(f_i | y_i) for the stacked logit vector.
double stacked_log_lik(LikKind kind, const LabeledDesignMatrix& data, const VectorXd& f);

}  // namespace ovepg
