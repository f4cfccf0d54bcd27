#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "ovepg/inference.hpp"
#include "ovepg/kernels.hpp"
#include "ovepg/likelihoods.hpp"

namespace ovepg {

/// Latent query-logit distribution N(mu*, Sigma*) for one query point.
struct PredictiveGaussian {
    VectorXd mean;  // length C
    MatrixXd cov;   // C x C
};

/// Query-side kernel values for one point: k(X, x*) and k(x*, x*). The full
/// K* is the NC x C block-diagonal stack of kstar; K** is kss * I_C.
struct QueryKernelBlocks {
    VectorXd kstar;
    double kss = 0.0;
};

/// Physicists' Gauss-Hermite nodes and weights (Golub-Welsch).
std::pair<VectorXd, VectorXd> gauss_hermite(int nodes);

/// E[sigmoid(z)] for z ~ N(mean, var), by Gauss-Hermite quadrature.
double expected_sigmoid(double mean, double var, const VectorXd& nodes,
                        const VectorXd& weights);

/// Shared machinery for predicting many query points under one omega draw:
///   mu*    = m 1 + (A K*)^T (A K A^T + Omega^{-1})^{-1} (Omega^{-1} kappa - A mu)
///   Sigma* = K** - (A K*)^T (A K A^T + Omega^{-1})^{-1} (A K*)
/// The inner solves reuse the block decomposition, so building costs
/// O(C N^3) once and each query costs O(C^2 N) for the mean.
class PosteriorPredictor {
public:
    PosteriorPredictor(const BlockKernelMatrix& K, const OveTransform& A,
                       const AugmentationState& state, double mean_const = 0.0);

    PredictiveGaussian predict(const QueryKernelBlocks& q) const;
    VectorXd predictive_mean(const VectorXd& kstar) const;

private:
    MatrixXd a_kstar(const VectorXd& kstar) const;

    const BlockKernelMatrix* K_;
    const OveTransform* A_;
    EfficientSolver solver_;
    VectorXd alpha_;  // (A K A^T + Omega^{-1})^{-1} (Omega^{-1} kappa - A mu)
    double mean_const_;
};

PredictiveGaussian predictive_f_star(const BlockKernelMatrix& K, const OveTransform& A,
                                     const AugmentationState& state,
                                     const QueryKernelBlocks& q, double mean_const = 0.0);

/// Class probabilities by per-dimension 1D quadrature: for each class c the
/// C-1 nontrivial factors E[sigma(psi)] are evaluated on the marginal
/// mean/variance of each dimension of A^c f* and multiplied; the
/// self-comparison factor sigma(0) cancels under the final renormalization.
VectorXd class_probs_quadrature(const PredictiveGaussian& g, int nodes = 64);

/// Monte Carlo oracle on the joint law: averages normalized OVE probability
/// vectors over draws f* ~ N(mu*, Sigma*).
VectorXd class_probs_mc(const PredictiveGaussian& g, int samples, RngStream& rng);

/// Arithmetic mean of per-chain probability vectors.
VectorXd average_over_chains(const std::vector<VectorXd>& per_chain);

/// The plug-in protocol: the (normalized) likelihood applied to the
/// posterior predictive mean of the query logits.
VectorXd plug_in_predict(const VectorXd& posterior_mean_f_star, LikKind kind);

}  // namespace ovepg
