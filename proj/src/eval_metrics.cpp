#include "ovepg/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ovepg/inference.hpp"

namespace ovepg {

CalibrationReport calibration(const std::vector<PredictionRecord>& records, int bins) {
    if (records.empty()) throw std::invalid_argument("invalid argument: no prediction records");
    if (bins < 1) throw std::invalid_argument("invalid argument: bins must be >= 1");

    CalibrationReport report;
    report.num_bins = bins;
    std::vector<double> conf_sum(bins, 0.0), acc_sum(bins, 0.0);
    std::vector<int> count(bins, 0);

    double correct = 0.0, brier = 0.0;
    for (const auto& rec : records) {
        Eigen::Index argmax;
        const double conf = rec.probs.maxCoeff(&argmax);
        const bool hit = static_cast<int>(argmax) == rec.true_class;
        correct += hit ? 1.0 : 0.0;

        for (Eigen::Index c = 0; c < rec.probs.size(); ++c) {
            const double target = (static_cast<int>(c) == rec.true_class) ? 1.0 : 0.0;
            brier += (rec.probs[c] - target) * (rec.probs[c] - target);
        }

        // Right-closed bins on (0, 1]: bin b covers (b/B, (b+1)/B].
        int b = static_cast<int>(std::ceil(conf * bins)) - 1;
        b = std::clamp(b, 0, bins - 1);
        conf_sum[b] += conf;
        acc_sum[b] += hit ? 1.0 : 0.0;
        count[b] += 1;
    }

    const double n = static_cast<double>(records.size());
    report.accuracy = correct / n;
    report.brier = brier / n;
    for (int b = 0; b < bins; ++b) {
        CalibrationBin bin;
        bin.count = count[b];
        if (count[b] > 0) {
            bin.confidence = conf_sum[b] / count[b];
            bin.accuracy = acc_sum[b] / count[b];
            const double gap = std::fabs(bin.confidence - bin.accuracy);
            report.ece += (count[b] / n) * gap;
            report.mce = std::max(report.mce, gap);
        }
        report.bins.push_back(bin);
    }
    return report;
}

namespace {

double log_det_spd(const Eigen::LLT<MatrixXd>& llt) {
    double ld = 0.0;
    for (Eigen::Index i = 0; i < llt.matrixLLT().rows(); ++i)
        ld += std::log(llt.matrixLLT()(i, i));
    return 2.0 * ld;
}

}  // namespace

ElboResult elbo(const VectorXd& q_mean, const MatrixXd& q_cov, const VectorXd& prior_mean,
                const MatrixXd& prior_cov, const LabeledDesignMatrix& data, int mc_samples,
                RngStream& rng) {
    const Eigen::Index d = q_mean.size();
    if (q_cov.rows() != d || prior_mean.size() != d || prior_cov.rows() != d)
        throw std::invalid_argument("invalid argument: elbo dimension mismatch");
    if (mc_samples < 1) throw std::invalid_argument("invalid argument: mc_samples must be >= 1");

    Eigen::LLT<MatrixXd> q_llt(q_cov);
    if (q_llt.info() != Eigen::Success)
        throw std::invalid_argument("invalid argument: q covariance not positive definite");
    Eigen::LLT<MatrixXd> p_llt(prior_cov);
    if (p_llt.info() != Eigen::Success)
        throw std::invalid_argument("invalid argument: prior covariance not positive definite");

    const double log2pi = std::log(2.0 * std::numbers::pi);
    const VectorXd r = q_mean - prior_mean;
    const double trace_term = p_llt.solve(q_cov).trace();
    const double maha = r.dot(p_llt.solve(r));

    ElboResult out;
    out.expected_log_prior =
        -0.5 * (d * log2pi + log_det_spd(p_llt) + trace_term + maha);
    out.expected_log_q = -0.5 * (d * log2pi + log_det_spd(q_llt) + d);
    out.kl_to_prior = 0.5 * (trace_term + maha - d + log_det_spd(p_llt) - log_det_spd(q_llt));

    const auto L = q_llt.matrixL();
    VectorXd z(d);
    double lik_acc = 0.0;
    for (int s = 0; s < mc_samples; ++s) {
        for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
        const VectorXd f = q_mean + L * z;
        lik_acc += stacked_log_lik(LikKind::softmax, data, f);
    }
    out.expected_log_lik = lik_acc / mc_samples;
    out.value = out.expected_log_prior + out.expected_log_lik - out.expected_log_q;
    return out;
}

std::pair<VectorXd, MatrixXd> moment_match(const std::vector<VectorXd>& samples) {
    if (samples.empty()) throw std::invalid_argument("invalid argument: no samples");
    const Eigen::Index d = samples.front().size();
    if (static_cast<Eigen::Index>(samples.size()) < d + 1)
        throw std::invalid_argument("invalid argument: need at least dim + 1 samples");

    VectorXd mean = VectorXd::Zero(d);
    for (const auto& s : samples) mean += s;
    mean /= static_cast<double>(samples.size());

    MatrixXd cov = MatrixXd::Zero(d, d);
    for (const auto& s : samples) {
        const VectorXd r = s - mean;
        cov.selfadjointView<Eigen::Lower>().rankUpdate(r);
    }
    cov = MatrixXd(cov.selfadjointView<Eigen::Lower>()) / static_cast<double>(samples.size() - 1);
    cov.diagonal().array() += 1e-8;
    return {mean, cov};
}

double ConfidenceHistogram::fraction_above(double threshold) const {
    const auto it = std::upper_bound(sorted_maxima.begin(), sorted_maxima.end(), threshold);
    return static_cast<double>(sorted_maxima.end() - it) /
           static_cast<double>(sorted_maxima.size());
}

ConfidenceHistogram confidence_histogram(LikKind kind, int num_classes, int sims,
                                         RngStream& rng) {
    if (sims < 1) throw std::invalid_argument("invalid argument: sims must be >= 1");
    constexpr int kBins = 50;

    ConfidenceHistogram hist;
    hist.bin_edges = VectorXd::LinSpaced(kBins + 1, 0.0, 1.0);
    hist.counts.assign(kBins, 0);
    hist.sorted_maxima.reserve(sims);

    VectorXd f(num_classes);
    double acc = 0.0;
    for (int s = 0; s < sims; ++s) {
        for (int c = 0; c < num_classes; ++c) f[c] = rng.normal();
        const double mx = normalized_probs(kind, f).maxCoeff();
        acc += mx;
        int b = static_cast<int>(std::ceil(mx * kBins)) - 1;
        b = std::clamp(b, 0, kBins - 1);
        hist.counts[b] += 1;
        hist.sorted_maxima.push_back(mx);
    }
    std::sort(hist.sorted_maxima.begin(), hist.sorted_maxima.end());
    hist.mean_max_confidence = acc / sims;

    auto quantile = [&](double q) {
        const double pos = q * (sims - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min<std::size_t>(lo + 1, sims - 1);
        const double w = pos - static_cast<double>(lo);
        return (1.0 - w) * hist.sorted_maxima[lo] + w * hist.sorted_maxima[hi];
    };
    hist.q05 = quantile(0.05);
    hist.q25 = quantile(0.25);
    hist.q50 = quantile(0.50);
    hist.q75 = quantile(0.75);
    hist.q95 = quantile(0.95);
    return hist;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& binary_labels) {
    if (scores.size() != binary_labels.size() || scores.empty())
        throw std::invalid_argument("invalid argument: scores/labels mismatch");
    std::size_t npos = 0;
    for (int y : binary_labels) {
        if (y != 0 && y != 1) throw std::invalid_argument("invalid argument: labels must be 0/1");
        npos += static_cast<std::size_t>(y);
    }
    const std::size_t nneg = scores.size() - npos;
    if (npos == 0 || nneg == 0)
        throw std::invalid_argument("invalid argument: both classes must be present");

    // Midranks over the pooled scores.
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }

    double rank_sum_pos = 0.0;
    for (std::size_t k = 0; k < scores.size(); ++k)
        if (binary_labels[k] == 1) rank_sum_pos += rank[k];
    const double u = rank_sum_pos - static_cast<double>(npos) * (npos + 1) / 2.0;
    return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

}  // namespace ovepg
