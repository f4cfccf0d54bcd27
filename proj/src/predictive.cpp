#include "ovepg/predictive.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ovepg {

std::pair<VectorXd, VectorXd> gauss_hermite(int nodes) {
    if (nodes < 2) throw std::invalid_argument("quadrature needs at least 2 nodes");
    MatrixXd J = MatrixXd::Zero(nodes, nodes);
    for (int k = 1; k < nodes; ++k) {
        const double b = std::sqrt(0.5 * k);
        J(k, k - 1) = b;
        J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(J);
    const VectorXd x = eig.eigenvalues();
    VectorXd w(nodes);
    const double sqrt_pi = std::sqrt(std::numbers::pi);
    for (int i = 0; i < nodes; ++i) {
        const double v0 = eig.eigenvectors()(0, i);
        w[i] = sqrt_pi * v0 * v0;
    }
    return {x, w};
}

double expected_sigmoid(double mean, double var, const VectorXd& nodes,
                        const VectorXd& weights) {
    if (var < 0.0) var = 0.0;
    const double s = std::sqrt(2.0 * var);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < nodes.size(); ++i)
        acc += weights[i] * sigmoid(mean + s * nodes[i]);
    return acc / std::sqrt(std::numbers::pi);
}

PosteriorPredictor::PosteriorPredictor(const BlockKernelMatrix& K, const OveTransform& A,
                                       const AugmentationState& state, double mean_const)
    : K_(&K), A_(&A), solver_(K, A, state.omega), mean_const_(mean_const) {
    const VectorXd kappa = VectorXd::Constant(K.dim(), PairwiseLogits::kappa);
    const VectorXd mu = VectorXd::Constant(K.dim(), mean_const);
    const VectorXd r = state.omega.cwiseInverse().cwiseProduct(kappa) - A.apply(mu);
    alpha_ = solver_.solve_psi_cov(r);
}

MatrixXd PosteriorPredictor::a_kstar(const VectorXd& kstar) const {
    const int n = K_->n();
    const int c = K_->num_classes();
    if (kstar.size() != n) throw std::invalid_argument("shape error: kstar length");
    // (A K*)_{(c',i), c} = kstar_i (1[y_i = c] - 1[c' = c]).
    MatrixXd B = MatrixXd::Zero(K_->dim(), c);
    for (int i = 0; i < n; ++i) {
        const int y = A_->label_of(i);
        for (int cp = 0; cp < c; ++cp) {
            B(stacked_index(cp, i, n), y) += kstar[i];
            B(stacked_index(cp, i, n), cp) -= kstar[i];
        }
    }
    return B;
}

PredictiveGaussian PosteriorPredictor::predict(const QueryKernelBlocks& q) const {
    const int c = K_->num_classes();
    const MatrixXd B = a_kstar(q.kstar);

    PredictiveGaussian g;
    g.mean = VectorXd::Constant(c, mean_const_) + B.transpose() * alpha_;

    MatrixXd solved(B.rows(), c);
    for (int j = 0; j < c; ++j) solved.col(j) = solver_.solve_psi_cov(B.col(j));
    MatrixXd cov = q.kss * MatrixXd::Identity(c, c) - B.transpose() * solved;
    cov = 0.5 * (cov + cov.transpose());
    for (int j = 0; j < c; ++j) {
        if (cov(j, j) < -1e-10)
            throw std::runtime_error("numerical breakdown: negative predictive variance");
        if (cov(j, j) < 0.0) cov(j, j) = 0.0;
    }
    g.cov = std::move(cov);
    return g;
}

VectorXd PosteriorPredictor::predictive_mean(const VectorXd& kstar) const {
    return VectorXd::Constant(K_->num_classes(), mean_const_) +
           a_kstar(kstar).transpose() * alpha_;
}

PredictiveGaussian predictive_f_star(const BlockKernelMatrix& K, const OveTransform& A,
                                     const AugmentationState& state,
                                     const QueryKernelBlocks& q, double mean_const) {
    return PosteriorPredictor(K, A, state, mean_const).predict(q);
}

VectorXd class_probs_quadrature(const PredictiveGaussian& g, int nodes) {
    const auto [x, w] = gauss_hermite(nodes);
    const Eigen::Index c = g.mean.size();
    VectorXd log_prod = VectorXd::Zero(c);
    for (Eigen::Index cc = 0; cc < c; ++cc) {
        for (Eigen::Index cp = 0; cp < c; ++cp) {
            if (cp == cc) continue;  // sigma(0) factor cancels in normalization
            const double m = g.mean[cc] - g.mean[cp];
            const double v = g.cov(cc, cc) + g.cov(cp, cp) - 2.0 * g.cov(cc, cp);
            log_prod[cc] += std::log(expected_sigmoid(m, v, x, w));
        }
    }
    const double mx = log_prod.maxCoeff();
    VectorXd p = (log_prod.array() - mx).exp();
    p /= p.sum();
    return p;
}

VectorXd class_probs_mc(const PredictiveGaussian& g, int samples, RngStream& rng) {
    if (samples < 1) throw std::invalid_argument("mc needs at least one sample");
    const Eigen::Index c = g.mean.size();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(g.cov);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("numerical breakdown: predictive covariance factorization");
    const VectorXd scale = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const MatrixXd factor = eig.eigenvectors() * scale.asDiagonal();

    VectorXd acc = VectorXd::Zero(c);
    VectorXd z(c);
    for (int s = 0; s < samples; ++s) {
        for (Eigen::Index j = 0; j < c; ++j) z[j] = rng.normal();
        acc += normalized_probs(LikKind::ove, g.mean + factor * z);
    }
    return acc / samples;
}

VectorXd average_over_chains(const std::vector<VectorXd>& per_chain) {
    if (per_chain.empty()) throw std::invalid_argument("invalid argument: no chains to average");
    VectorXd acc = VectorXd::Zero(per_chain.front().size());
    for (const auto& p : per_chain) {
        if (p.size() != acc.size()) throw std::invalid_argument("chain probability length mismatch");
        acc += p;
    }
    return acc / static_cast<double>(per_chain.size());
}

VectorXd plug_in_predict(const VectorXd& posterior_mean_f_star, LikKind kind) {
    return normalized_probs(kind, posterior_mean_f_star);
}

}  // namespace ovepg
