#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "ovepg/data.hpp"
#include "ovepg/inference.hpp"
#include "ovepg/kernels.hpp"

namespace ovepg {

/// Fixed jitter used on learning paths so finite differences and analytic
/// gradients see exactly the same matrix.
constexpr double kLearnJitter = 1e-8;

/// log p_theta(Y | X, omega) up to additive terms free of theta, i.e. the
/// Gaussian convolution log N(Omega^{-1} kappa | A mu, A K A^T + Omega^{-1}),
/// evaluated through the block decomposition in O(C N^3).
double log_evidence_given_omega(const KernelSpec& spec, const MatrixXd& X,
                                const OneHotLabels& labels, const VectorXd& omega,
                                double jitter = kLearnJitter);

/// Fisher-identity gradient of the marginal-likelihood objective: the
/// analytic gradient of log_evidence_given_omega averaged over posterior
/// omega samples. Entries follow spec.learnable_params() order.
VectorXd grad_ml(const KernelSpec& spec, const MatrixXd& X, const OneHotLabels& labels,
                 const std::vector<VectorXd>& omega_samples, double jitter = kLearnJitter);

/// Predictive-likelihood objective: (1/M) sum_m sum_j log p(y*_j | x*_j, S, omega^(m)),
/// where the class probability comes from the quadrature predictive path.
double pl_objective(const KernelSpec& spec, const LabeledDesignMatrix& support,
                    const LabeledDesignMatrix& query,
                    const std::vector<VectorXd>& omega_samples, int quad_nodes = 64,
                    double jitter = kLearnJitter);

/// Gradient of pl_objective by central finite differences,
/// h = 1e-4 * (1 + |theta|) per coordinate.
VectorXd grad_pl(const KernelSpec& spec, const LabeledDesignMatrix& support,
                 const LabeledDesignMatrix& query,
                 const std::vector<VectorXd>& omega_samples, int quad_nodes = 64,
                 double jitter = kLearnJitter);

/// Adam accumulator state; a pure function of (state, grad) per step.
struct OptimizerState {
    VectorXd m;
    VectorXd v;
    int step = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    explicit OptimizerState(int num_params, double lr = 1e-3)
        : m(VectorXd::Zero(num_params)), v(VectorXd::Zero(num_params)), learning_rate(lr) {}
};

/// One Adam ascent step on the parameters listed by spec.learnable_params().
/// Throws on non-finite gradients.
KernelSpec adam_step(OptimizerState& opt, const KernelSpec& spec, const VectorXd& grad);

enum class Objective { ml, pl };

struct TrainConfig {
    Objective objective = Objective::ml;
    int epochs = 50;
    int episodes_per_epoch = 1;
    GibbsConfig gibbs;  // steps defaults to 1 for training
    std::uint64_t seed = 0;
    double learning_rate = 1e-3;
    int quad_nodes = 64;
};

struct EpochRecord {
    int epoch = 0;
    double objective_estimate = 0.0;
    std::vector<double> theta;
    int skipped_episodes = 0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    KernelSpec spec;
    std::vector<EpochRecord> history;
};

/// Episode loop: per episode draw omega samples from Gibbs chains at the
/// current theta (support merged with query under the ML objective), take
/// one Adam step. Failing episodes are skipped and counted, never silently
/// dropped.
TrainResult train_loop(const std::function<EpisodeTask(int episode_index)>& task_source,
                       const KernelSpec& init, const TrainConfig& cfg);

}  // namespace ovepg
