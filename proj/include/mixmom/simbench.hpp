#pragma once

#include "mixmom/estimator.hpp"
#include "mixmom/moments.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mixmom {

struct ExperimentConfig {
    std::string name;
    Parameters theta_star;
    Link link = Link::logit;
    std::vector<int> n_grid;
    int replications = 100;
    std::uint64_t seed = 1;
    double trim_fraction = 0.02;

    int dim() const { return theta_star.dim(); }
    int components() const { return theta_star.components(); }
    /// Throws std::invalid_argument on inconsistent shapes, empty grid,
    /// non-positive n or N, or trim_fraction outside [0, 0.5).
    void validate() const;
};

/// The three reference experiments (ids 1..3) with the default grid
/// {5e3, 1e4, 1e5, 5e5, 1e6}, N = 100 and 2% trimming.
ExperimentConfig builtin_experiment(int id, Link link);

/// SplitMix64 finalizer; turns consecutive seeds into decorrelated engine seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// X ~ N(0, I_d), class ~ Categorical(omega), Y ~ Bernoulli(g(<beta_k, X> + b_k)).
/// Bit-identical for equal inputs on the same platform.
Dataset generate(const Parameters& theta, Link link, int n, std::uint64_t seed);

/// Permutation pi (estimate component pi[k] matches true component k)
/// minimizing the L1 distance; exhaustive, K <= 5.
std::vector<int> align(const Parameters& theta_hat, const Parameters& theta_star);

/// Components reordered so that component k of the result is pi[k] of the input.
Parameters apply_permutation(const Parameters& theta, const std::vector<int>& pi);

struct SummedErrors {
    double p = 0.0;
    double b = 0.0;
    std::vector<double> beta;   // one entry per component

    double total() const;
};

SummedErrors summed_errors(const Parameters& aligned, const Parameters& theta_star);

/// Full L1 distance over omega, b and beta.
double l1_distance(const Parameters& aligned, const Parameters& theta_star);

struct ReplicationResult {
    int n = 0;
    int replication = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    bool converged = false;
    Parameters estimate;        // aligned to theta_star
    SummedErrors errors;
    double l1 = 0.0;
    double wall_time = 0.0;
    double objective_value = 0.0;
};

struct ErrorRow {
    int n = 0;
    SummedErrors errors;
    int replications = 0;
    int failures = 0;
    int retained = 0;
    int non_converged = 0;
    double mean_wall_time = 0.0;

    double failure_rate() const { return replications > 0 ? static_cast<double>(failures) / replications : 0.0; }
};

struct ErrorTable {
    std::string name;
    Link link = Link::logit;
    int components = 0;
    std::vector<ErrorRow> rows;
};

struct RunOptions {
    EstimateOptions estimate;
    int random_starts = 0;              // 0 uses the spectral start
    int threads = 1;
    bool per_replication_errors = false;
    std::function<void(const ReplicationResult&)> on_replication;   // called in index order
};

struct ExperimentResult {
    ErrorTable table;
    std::vector<ReplicationResult> replications;
    std::vector<std::string> warnings;
};

/// Indices of the ceil(N (1 - trim)) successful replications with smallest l1.
std::vector<int> retained_replications(const std::vector<ReplicationResult>& reps, double trim_fraction);

/// One replication: generate with seed cfg.seed + r, estimate, align, score.
ReplicationResult run_replication(const ExperimentConfig& cfg, int n, int r, const RunOptions& opts);

/// Every n of the grid: N replications, trimming by full-vector L1, then the
/// errors of the averaged estimate (or the mean of per-replication errors).
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

}  // namespace mixmom
