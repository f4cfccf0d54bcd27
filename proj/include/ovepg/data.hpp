#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ovepg/likelihoods.hpp"

namespace ovepg {

/// A design matrix with one-hot labels. Every class must appear at least
/// once and features must be finite.
struct LabeledDesignMatrix {
    MatrixXd X;
    OneHotLabels labels;
    std::vector<std::string> class_names;

    LabeledDesignMatrix(MatrixXd X_, OneHotLabels labels_,
                        std::vector<std::string> class_names_);

    int n() const { return static_cast<int>(X.rows()); }
    int dim() const { return static_cast<int>(X.cols()); }
    int num_classes() const { return labels.num_classes(); }
};

/// A few-shot episode: labeled support set plus held-out query set sharing
/// the same class set and ordering.
struct EpisodeTask {
    LabeledDesignMatrix support;
    LabeledDesignMatrix query;
};

/// Generic loader for `f1,...,fD,label` CSVs with a header row. Classes are
/// ordered alphabetically by name before one-hot encoding.
LabeledDesignMatrix load_labeled_csv(const std::string& path);

/// The 2D Iris protocol: a strict 4-feature + label CSV with 150 rows and
/// 3 classes; only the first two feature columns are retained.
LabeledDesignMatrix load_iris_2d(const std::string& path);

/// Stratified support/query splits: `per_class` support examples per class
/// sampled without replacement, remainder as query. Deterministic per
/// (seed, repeat index).
std::vector<EpisodeTask> make_splits(const LabeledDesignMatrix& data, int per_class,
                                     int repeats, std::uint64_t seed);

/// Gaussian clusters with unit within-class variance at simplex-vertex
/// centers scaled by `separation`. Support and query both get `per_class`
/// points per class.
EpisodeTask synth_blobs(int num_classes, int per_class, int dim,
                        double separation, std::uint64_t seed);

/// Merges two datasets with identical class sets (support + query, for the
/// marginal-likelihood objective).
LabeledDesignMatrix merge(const LabeledDesignMatrix& a, const LabeledDesignMatrix& b);

}  // namespace ovepg
