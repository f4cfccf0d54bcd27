#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ovepg/data.hpp"
#include "ovepg/inference.hpp"
#include "ovepg/kernels.hpp"

namespace ovepg {

struct ExperimentConfig {
    std::string experiment;
    std::string dataset_path;
    std::string support_path;
    std::string query_path;
    std::string params_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;

    std::string kernel = "raw_rbf";
    double log_output_scale = 0.0;
    double log_lengthscale = 0.0;
    double mean_const = 0.0;
    std::string feature_map_path;

    int chains = 20;
    int gibbs_steps = 50;
    bool use_efficient_sampler = true;

    std::string objective = "ml";
    int epochs = 50;
    int episodes_per_epoch = 1;
    int train_gibbs_steps = 1;
    double learning_rate = 1e-3;

    int per_class = 5;
    int repeats = 200;
    std::vector<int> per_class_list = {30};
    std::vector<std::string> likelihoods = {"gaussian", "lsm", "ove"};
    int elbo_mc_samples = 256;

    int sims = 50000;
    int hist_classes = 5;

    double grid_extent = 4.0;
    int grid_points = 81;

    std::string lik = "ove";
    std::string method = "quadrature";  // or "plugin"
    int quad_nodes = 64;

    std::string criteria;  // validate: comma-separated subset, empty = all

    std::string config_source = "cli";  // original config document or "cli"
};

KernelSpec kernel_spec_from_config(const ExperimentConfig& cfg);

/// Dispatches on cfg.experiment; writes JSON + CSV result files under
/// cfg.out_dir. Returns a process exit status (0 on success).
int run_experiment(const ExperimentConfig& cfg);

/// One row of the Iris sweep protocol.
struct IrisRow {
    std::string likelihood;
    int per_class = 0;
    int repeat = 0;
    double accuracy = 0.0;
    double brier = 0.0;
    double ece = 0.0;
    double elbo = 0.0;
};

/// Gibbs/ESS/closed-form inference + plug-in prediction + metrics for every
/// (likelihood, per_class, repeat) combination.
std::vector<IrisRow> iris_sweep_rows(const LabeledDesignMatrix& iris,
                                     const ExperimentConfig& cfg);

/// Shortest round-trip decimal representation; keeps emitted files
/// bit-stable across runs.
std::string format_double(double x);

std::string version_string();

}  // namespace ovepg
