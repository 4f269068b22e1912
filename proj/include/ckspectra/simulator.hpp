#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ckspectra/spike_engine.hpp"
#include "ckspectra/trained_ck.hpp"

namespace ckspectra {

class SimError : public std::runtime_error {
public:
    explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

uint64_t splitmix64(uint64_t& state);
/// Counter-based derivation: one independent stream per (master seed, trial).
uint64_t derive_trial_seed(uint64_t master_seed, uint64_t trial_index);

/// Per-trial RNG stream. Gaussians come from an explicit Box-Muller pair so
/// the output is reproducible across standard libraries.
class TrialRng {
public:
    explicit TrialRng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    double uniform();  // (0, 1]
    double gaussian();

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

struct DeepSimConfig {
    int n = 0;
    std::vector<int> dims;  // d_0 .. d_L
    std::vector<double> thetas;
    std::string activation_name = "tanh";
    uint64_t seed = 1;
    int trials = 1;
    double outlier_eps = 0.1;
    int workers = 1;
    int M = 2000;
    int grid_points = 1200;

    int L() const { return static_cast<int>(dims.size()) - 1; }
    void validate() const;
};

struct GdSimConfig {
    int n = 0, d = 0, N = 0;
    std::vector<double> eta_schedule;  // may be all zeros
    double sigma_eps = 0.0;
    std::string activation_name = "erf";
    std::string label_activation_name = "erf";
    uint64_t seed = 1;
    int trials = 1;
    double outlier_eps = 0.1;
    int workers = 1;
    int M = 2000;

    double eta_total() const;
    void validate() const;
};

struct Histogram {
    double lo = 0.0, hi = 1.0;
    std::vector<int> counts;
    double bin_width() const { return counts.empty() ? 0.0 : (hi - lo) / counts.size(); }
    double center(std::size_t i) const { return lo + (i + 0.5) * bin_width(); }
};

Histogram make_histogram(const std::vector<double>& values, int bins, double lo, double hi);

struct OutlierObs {
    double value = 0.0;
    std::vector<double> alignments;  // vs each tracked direction
    int matched_index = -1;          // argmax alignment (1-based), -1 if untracked
};

struct MatrixSpectrum {
    std::vector<double> eigenvalues;  // ascending
    std::vector<OutlierObs> outliers; // descending by value
    Histogram hist;
    double max_offdiag = 0.0;    // tau_n orthonormality diagnostics
    double max_norm_dev = 0.0;
};

struct SimResult {
    int trial = 0;
    bool failed = false;
    std::string error;
    std::vector<MatrixSpectrum> layers;  // K_0..K_L (deep) or the single K (GD)
    // GD diagnostics
    double rank_one_residual = 0.0;
    double update_norm = 0.0;
    double mean_feature_norm = 0.0;
    double top_eigenvalue = 0.0;
    double top_alignment = 0.0;  // |y~^T u|/sqrt(n)
};

struct GmmData {
    Eigen::MatrixXd X;  // d x n
    Eigen::MatrixXd A;  // d x r, orthonormal columns
    Eigen::MatrixXd B;  // n x r, orthonormal columns
};

GmmData gen_gmm(const DeepSimConfig& cfg, int trial);

/// X_ell = sigma(W_ell X_{ell-1}) / sqrt(d_ell) with i.i.d. N(0,1) weights
/// generated block-wise; returns K_1..K_L.
std::vector<Eigen::MatrixXd> forward_ck(const Eigen::MatrixXd& X,
                                        const std::vector<int>& hidden_dims,
                                        const NormalizedActivation& act, TrialRng& rng);

/// Eigenvalues with dist(lambda, support union {0}) > eps, descending.
std::vector<double> extract_outliers(const std::vector<double>& eigenvalues,
                                     const std::vector<Interval>& support, double eps);

/// Squared inner product of two unit vectors.
double alignment(const Eigen::VectorXd& vhat, const Eigen::VectorXd& target);

struct SpikeLayerAgg {
    int spike_index = 0;
    int ell = 0;
    bool predicted_survived = false;
    // Survivors whose predicted edge distance is within eps/2 of the
    // detection band are marginal: finite-size trials may or may not
    // resolve them, so the pattern match treats them as optional.
    bool predicted_marginal = false;
    double predicted_eigenvalue = 0.0;
    double predicted_alignment = 0.0;
    double predicted_edge_distance = 0.0;
    double emp_eig_mean = 0.0, emp_eig_stderr = 0.0;
    double emp_align_mean = 0.0, emp_align_stderr = 0.0;
    int n_obs = 0;
};

struct DeepAggregate {
    std::vector<SpikeLayerAgg> rows;
    std::vector<int> pattern_match_count;  // per layer 0..L
    std::vector<int> no_outlier_count;     // per layer 0..L
    int trials_ok = 0;
};

struct DeepExperimentResult {
    GmmInit init;
    std::vector<Interval> mu0_support;
    DeepPrediction prediction;
    std::vector<SimResult> trials;
    DeepAggregate agg;
};

DeepExperimentResult run_deep_experiment(const DeepSimConfig& cfg);

struct TrainData {
    Eigen::MatrixXd X;  // n x d
    Eigen::VectorXd y;
    Eigen::VectorXd beta;  // unit target direction
};

struct TrainOutput {
    Eigen::MatrixXd W;   // d x N after T steps
    double rank_one_residual = 0.0;  // ||W_T - (W_0 + (b eta/n) X^T y a^T)||
    double update_norm = 0.0;        // ||W_T - W_0||
    Eigen::VectorXd a;
};

/// Full-batch GD on the MSE of the two-layer network, second layer frozen.
TrainOutput train_two_layer(const GdSimConfig& cfg, const NormalizedActivation& act,
                            const TrainData& data, TrialRng& rng);

/// Draws features, target direction (unless one is supplied) and labels.
TrainData gen_train_data(const GdSimConfig& cfg, const NormalizedActivation& label_act,
                         TrialRng& rng, const Eigen::VectorXd* beta = nullptr);

struct GdAggregate {
    double top_eig_mean = 0.0, top_eig_stderr = 0.0;
    double align_mean = 0.0, align_stderr = 0.0;
    double residual_mean = 0.0;
    double update_norm_mean = 0.0;
    int trials_with_outlier = 0;
    int trials_ok = 0;
};

struct GdExperimentResult {
    TrainedCkPrediction prediction;
    std::vector<SimResult> trials;
    GdAggregate agg;
};

GdExperimentResult run_gd_experiment(const GdSimConfig& cfg);

/// Runs fn(trial) for trial = 0..trials-1 on a small worker pool; results
/// must be written into per-trial slots by the callers.
void parallel_trials(int trials, int workers, const std::function<void(int)>& fn);

double spectral_norm(const Eigen::MatrixXd& m, int iterations = 200);

}  // namespace ckspectra
