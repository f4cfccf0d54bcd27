#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ovepg/data.hpp"
#include "ovepg/likelihoods.hpp"
#include "ovepg/rng.hpp"

namespace ovepg {

struct PredictionRecord {
    VectorXd probs;        // simplex vector over classes
    int true_class = 0;
    double max_logit = 0;  // optional score input for AUROC
};

struct CalibrationBin {
    double confidence = 0.0;  // mean max-probability in the bin
    double accuracy = 0.0;
    int count = 0;
};

struct CalibrationReport {
    double accuracy = 0.0;
    double ece = 0.0;
    double mce = 0.0;
    double brier = 0.0;
    std::vector<CalibrationBin> bins;  // equal-width, right-closed on (0, 1]
    int num_bins = 0;
};

/// ECE/MCE/Brier with equal-width right-closed confidence bins on (0,1],
/// confidence = max class probability.
CalibrationReport calibration(const std::vector<PredictionRecord>& records, int bins = 10);

struct ElboResult {
    double value = 0.0;
    double expected_log_prior = 0.0;   // E_q[log p(f | X)]
    double expected_log_lik = 0.0;     // E_q[log p(Y | f)], softmax, Monte Carlo
    double expected_log_q = 0.0;       // E_q[log q(f)]
    double kl_to_prior = 0.0;          // closed form KL(q || prior)
};

/// ELBO of a Gaussian q against the softmax posterior: Gaussian terms in
/// closed form, the likelihood expectation by mc_samples draws from q.
ElboResult elbo(const VectorXd& q_mean, const MatrixXd& q_cov, const VectorXd& prior_mean,
                const MatrixXd& prior_cov, const LabeledDesignMatrix& data, int mc_samples,
                RngStream& rng);

/// Empirical mean and covariance (+1e-8 I) of posterior samples; needs at
/// least dim + 1 samples.
std::pair<VectorXd, MatrixXd> moment_match(const std::vector<VectorXd>& samples);

struct ConfidenceHistogram {
    VectorXd bin_edges;       // 51 edges over (0, 1]
    std::vector<int> counts;  // 50 bins
    double mean_max_confidence = 0.0;
    double q05 = 0, q25 = 0, q50 = 0, q75 = 0, q95 = 0;
    std::vector<double> sorted_maxima;

    double fraction_above(double threshold) const;
};

/// Prior-confidence simulation: f_c ~ N(0,1) i.i.d., histogram of the
/// maximum normalized output probability over `sims` draws.
ConfidenceHistogram confidence_histogram(LikKind kind, int num_classes, int sims,
                                         RngStream& rng);

/// Rank-based AUROC with midrank tie handling; labels are 0/1 and both
/// classes must be present.
double auroc(const std::vector<double>& scores, const std::vector<int>& binary_labels);

}  // namespace ovepg
