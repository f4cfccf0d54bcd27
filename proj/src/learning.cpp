#include "ovepg/learning.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ovepg/predictive.hpp"

namespace ovepg {

namespace {

// A M A^T for block-diagonal M (C identical structure, one N x N block
// per class). Entry ((c,i),(c',i')) reduces to a +/-1 pattern on M_N(i,i').
MatrixXd sandwich_blockdiag(const OveTransform& A, const MatrixXd& Mn) {
    const int n = A.n();
    const int c = A.num_classes();
    MatrixXd out(A.dim(), A.dim());
    for (int ci = 0; ci < c; ++ci) {
        for (int i = 0; i < n; ++i) {
            const int yi = A.label_of(i);
            for (int cj = 0; cj < c; ++cj) {
                for (int j = 0; j < n; ++j) {
                    const int yj = A.label_of(j);
                    const double coef = (yi == yj ? 1.0 : 0.0) - (yi == cj ? 1.0 : 0.0) -
                                        (ci == yj ? 1.0 : 0.0) + (ci == cj ? 1.0 : 0.0);
                    out(stacked_index(ci, i, n), stacked_index(cj, j, n)) = coef * Mn(i, j);
                }
            }
        }
    }
    return out;
}

VectorXd residual(const KernelSpec& spec, const OveTransform& A, const VectorXd& omega) {
    const VectorXd kappa = VectorXd::Constant(A.dim(), PairwiseLogits::kappa);
    const VectorXd mu = VectorXd::Constant(A.dim(), spec.mean_const);
    return omega.cwiseInverse().cwiseProduct(kappa) - A.apply(mu);
}

}  // namespace

double log_evidence_given_omega(const KernelSpec& spec, const MatrixXd& X,
                                const OneHotLabels& labels, const VectorXd& omega,
                                double jitter) {
    if ((omega.array() <= 0.0).any())
        throw std::invalid_argument("omega must be strictly positive");
    const BlockKernelMatrix K = build_block_kernel(spec, X, labels.num_classes(), jitter);
    const OveTransform A = build_ove_transform(labels);
    const EfficientSolver solver(K, A, omega);
    const VectorXd r = residual(spec, A, omega);
    const double quad = r.dot(solver.solve_psi_cov(r));
    const double d = static_cast<double>(K.dim());
    return -0.5 * (d * std::log(2.0 * std::numbers::pi) + solver.log_det_psi_cov() + quad);
}

VectorXd grad_ml(const KernelSpec& spec, const MatrixXd& X, const OneHotLabels& labels,
                 const std::vector<VectorXd>& omega_samples, double jitter) {
    if (omega_samples.empty()) throw std::invalid_argument("grad_ml needs at least one omega sample");
    const auto params = spec.learnable_params();
    const OveTransform A = build_ove_transform(labels);
    const Eigen::Index d = A.dim();

    const BlockKernelMatrix K = build_block_kernel(spec, X, labels.num_classes(), jitter);
    const MatrixXd Kd = K.dense_full();
    const MatrixXd Ad = A.dense();
    const VectorXd ones = VectorXd::Ones(d);
    const VectorXd a_ones = A.apply(ones);  // zero by construction; kept for the formula

    // dSigma_psi/dtheta per kernel hyperparameter.
    std::vector<MatrixXd> d_sigma;
    for (HyperId id : params) {
        if (id == HyperId::mean_const) {
            d_sigma.emplace_back();
            continue;
        }
        d_sigma.push_back(sandwich_blockdiag(A, kernel_param_grad(spec, X, id)));
    }

    VectorXd grad = VectorXd::Zero(static_cast<Eigen::Index>(params.size()));
    for (const VectorXd& omega : omega_samples) {
        if (omega.size() != d) throw std::invalid_argument("omega sample length mismatch");
        MatrixXd sigma_psi = Ad * Kd * Ad.transpose();
        sigma_psi.diagonal() += omega.cwiseInverse();
        Eigen::LLT<MatrixXd> llt(0.5 * (sigma_psi + sigma_psi.transpose()));
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("numerical breakdown: psi covariance factorization");

        const VectorXd r = residual(spec, A, omega);
        const VectorXd a = llt.solve(r);

        for (std::size_t k = 0; k < params.size(); ++k) {
            if (params[k] == HyperId::mean_const) {
                // d(A mu)/dm = A 1, which the transform annihilates.
                grad[static_cast<Eigen::Index>(k)] += a.dot(a_ones);
                continue;
            }
            const MatrixXd& dS = d_sigma[k];
            const double quad_term = 0.5 * a.dot(dS * a);
            const double trace_term = 0.5 * llt.solve(dS).trace();
            grad[static_cast<Eigen::Index>(k)] += quad_term - trace_term;
        }
    }
    return grad / static_cast<double>(omega_samples.size());
}

double pl_objective(const KernelSpec& spec, const LabeledDesignMatrix& support,
                    const LabeledDesignMatrix& query,
                    const std::vector<VectorXd>& omega_samples, int quad_nodes,
                    double jitter) {
    if (omega_samples.empty()) throw std::invalid_argument("pl_objective needs omega samples");
    const BlockKernelMatrix K = build_block_kernel(spec, support.X, support.num_classes(), jitter);
    const OveTransform A = build_ove_transform(support.labels);

    double total = 0.0;
    for (const VectorXd& omega : omega_samples) {
        const PosteriorPredictor predictor(K, A, AugmentationState{omega}, spec.mean_const);
        for (int j = 0; j < query.n(); ++j) {
            QueryKernelBlocks q;
            q.kstar = eval_kernel(spec, support.X, query.X.row(j)).col(0);
            q.kss = eval_kernel(spec, query.X.row(j), query.X.row(j))(0, 0);
            const VectorXd probs = class_probs_quadrature(predictor.predict(q), quad_nodes);
            total += std::log(probs[query.labels.class_of(j)]);
        }
    }
    return total / static_cast<double>(omega_samples.size());
}

VectorXd grad_pl(const KernelSpec& spec, const LabeledDesignMatrix& support,
                 const LabeledDesignMatrix& query,
                 const std::vector<VectorXd>& omega_samples, int quad_nodes,
                 double jitter) {
    const auto params = spec.learnable_params();
    VectorXd grad(static_cast<Eigen::Index>(params.size()));
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double theta = spec.get_param(params[k]);
        const double h = 1e-4 * (1.0 + std::fabs(theta));
        KernelSpec plus = spec, minus = spec;
        plus.set_param(params[k], theta + h);
        minus.set_param(params[k], theta - h);
        const double up = pl_objective(plus, support, query, omega_samples, quad_nodes, jitter);
        const double dn = pl_objective(minus, support, query, omega_samples, quad_nodes, jitter);
        grad[static_cast<Eigen::Index>(k)] = (up - dn) / (2.0 * h);
    }
    return grad;
}

KernelSpec adam_step(OptimizerState& opt, const KernelSpec& spec, const VectorXd& grad) {
    if (!grad.allFinite()) throw std::runtime_error("divergence: non-finite gradient");
    const auto params = spec.learnable_params();
    if (grad.size() != static_cast<Eigen::Index>(params.size()) || opt.m.size() != grad.size())
        throw std::invalid_argument("gradient length mismatch");

    opt.step += 1;
    opt.m = opt.beta1 * opt.m + (1.0 - opt.beta1) * grad;
    opt.v = opt.beta2 * opt.v + (1.0 - opt.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(opt.beta1, opt.step);
    const double bc2 = 1.0 - std::pow(opt.beta2, opt.step);

    KernelSpec updated = spec;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        const double mhat = opt.m[ki] / bc1;
        const double vhat = opt.v[ki] / bc2;
        updated.set_param(params[k],
                          spec.get_param(params[k]) +
                              opt.learning_rate * mhat / (std::sqrt(vhat) + opt.epsilon));
    }
    return updated;
}

TrainResult train_loop(const std::function<EpisodeTask(int episode_index)>& task_source,
                       const KernelSpec& init, const TrainConfig& cfg) {
    KernelSpec spec = init;
    const auto params = spec.learnable_params();
    OptimizerState opt(static_cast<int>(params.size()), cfg.learning_rate);

    TrainResult result;
    int episode_index = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        double obj_sum = 0.0;
        int obj_count = 0;
        int skipped = 0;

        for (int ep = 0; ep < cfg.episodes_per_epoch; ++ep, ++episode_index) {
            try {
                const EpisodeTask task = task_source(episode_index);
                GibbsConfig gibbs = cfg.gibbs;
                gibbs.master_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(episode_index));

                if (cfg.objective == Objective::ml) {
                    const LabeledDesignMatrix merged = merge(task.support, task.query);
                    const auto chains = run_gibbs(merged, spec, gibbs);
                    std::vector<VectorXd> omegas;
                    omegas.reserve(chains.size());
                    for (const auto& ch : chains) omegas.push_back(ch.final_state().omega);
                    const VectorXd g = grad_ml(spec, merged.X, merged.labels, omegas);
                    for (const auto& om : omegas)
                        obj_sum += log_evidence_given_omega(spec, merged.X, merged.labels, om);
                    obj_count += static_cast<int>(omegas.size());
                    spec = adam_step(opt, spec, g);
                } else {
                    const auto chains = run_gibbs(task.support, spec, gibbs);
                    std::vector<VectorXd> omegas;
                    omegas.reserve(chains.size());
                    for (const auto& ch : chains) omegas.push_back(ch.final_state().omega);
                    obj_sum += pl_objective(spec, task.support, task.query, omegas, cfg.quad_nodes);
                    obj_count += 1;
                    const VectorXd g = grad_pl(spec, task.support, task.query, omegas, cfg.quad_nodes);
                    spec = adam_step(opt, spec, g);
                }
            } catch (const std::exception&) {
                ++skipped;
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.objective_estimate = obj_count > 0 ? obj_sum / obj_count : 0.0;
        for (HyperId id : params) rec.theta.push_back(spec.get_param(id));
        rec.skipped_episodes = skipped;
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(std::move(rec));
    }
    result.spec = spec;
    return result;
}

}  // namespace ovepg
