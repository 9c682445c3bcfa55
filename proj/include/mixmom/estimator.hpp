#pragma once

#include "mixmom/moments.hpp"
#include "mixmom/optimize.hpp"
#include "mixmom/spectral.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mixmom {

/// Symmetric positive definite weighting of the flattened moment residual.
struct WeightMatrix {
    Eigen::MatrixXd w;
    bool jittered = false;   // ridge added before inversion

    int size() const { return static_cast<int>(w.rows()); }
    static WeightMatrix identity(int d);
    /// Throws std::invalid_argument unless w is m x m, symmetric within 1e-10
    /// and Cholesky-factorizable.
    void validate(int d) const;
};

/// Lower bound kept on every mixture weight during optimization.
constexpr double kWeightFloor = 1e-8;

/// Q(theta) = r^T W r, r = flatten(data_ms) - flatten(M(theta)).
double objective(const MomentSet& data_ms, const Parameters& theta, Link link, const WeightMatrix& w);

/// dQ/dtheta = -2 J^T W r in the free-parameter order.
Eigen::VectorXd gradient(const MomentSet& data_ms, const Parameters& theta, Link link, const WeightMatrix& w);

struct MinimizeResult {
    Parameters theta;
    double objective_value = 0.0;
    double gradient_norm = 0.0;   // projected onto the feasible directions
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string message;
};

/// Minimizes Q over omega_k >= kWeightFloor, sum omega = 1, b and beta free.
/// Throws std::invalid_argument when `init` has a weight at or below the floor.
MinimizeResult minimize(const MomentSet& data_ms, Link link, const WeightMatrix& w, const Parameters& init,
                        const OptimizeOptions& opts = {});

/// Inverse of the second-moment matrix of the per-sample residuals
/// phi_i - M(theta).
///
/// Duplicated coordinates of the symmetric blocks make that matrix singular
/// by construction, so the inverse is taken on the symmetric subspace and
/// completed by the identity on its complement: W = (S + P)^{-1} with P the
/// projector onto non-symmetric flat vectors. Residual vectors are always
/// symmetric, so W acts as the pseudo-inverse of S there. If Cholesky still
/// fails a ridge of 1e-10 * trace / m is added and `jittered` is set.
///
/// Throws NumericalError if the matrix stays singular.
WeightMatrix estimate_w(const SampleMomentStats& stats, const Parameters& theta, Link link);
WeightMatrix estimate_w(const Dataset& data, const Parameters& theta, Link link);

/// The matrix that estimate_w inverts, S + P.
Eigen::MatrixXd weight_precursor(const SampleMomentStats& stats, const Parameters& theta, Link link);

struct Regularity {
    Eigen::MatrixXd g;   // 5 x K, row j-1 holds E[g^(j)(lambda_k Z + b_k)]
    bool h4_ok = false;
    bool h5_ok = false;
};

Regularity check_regularity(const Parameters& theta, Link link);

/// Plug-in sandwich covariance V^{-1} Gamma V^{-1} / n of the estimator, with
/// V = 2 J^T W J and Gamma = 4 J^T W C W J, C the empirical covariance of the
/// per-sample moment contributions.
///
/// Throws NumericalError when V is singular.
Eigen::MatrixXd asymptotic_covariance(const SampleMomentStats& stats, const Parameters& theta_hat, Link link,
                                      const WeightMatrix& w);
Eigen::MatrixXd asymptotic_covariance(const Dataset& data, const Parameters& theta_hat, Link link,
                                      const WeightMatrix& w);

struct EstimateOptions {
    OptimizeOptions optimizer;
    int w_updates = 1;                        // 0 stops after the W_init fit
    bool covariance = true;
    std::optional<WeightMatrix> w_init;       // identity when absent
    std::optional<Eigen::MatrixXd> z;         // slice vectors, canonical basis when absent
    std::uint64_t seed = 0;                   // random starts
};

struct EstimateReport {
    Parameters theta_hat;
    Parameters theta_init;
    double objective_value = 0.0;
    double gradient_norm = 0.0;
    bool converged = false;
    std::optional<Eigen::MatrixXd> sigma_hat;   // finite-sample covariance, q x q
    Regularity regularity;
    int iterations = 0;
    int w_updates = 0;
    bool w_jittered = false;
    double wall_time = 0.0;       // seconds, whole pipeline
    double moment_time = 0.0;     // seconds spent on passes over the data
    double optimize_time = 0.0;
    int start_index = -1;         // selected random start, -1 for spectral init
    std::vector<double> start_objectives;
    std::vector<std::string> warnings;
};

/// Spectral initial point: directions from init_directions, lambda_k = 1,
/// b_k = 0, omega_k = 1/K.
Parameters spectral_start(const MomentSet& data_ms, int k, const std::optional<Eigen::MatrixXd>& z,
                          std::vector<std::string>* warnings = nullptr);

/// Spectral initialization, fit with W_init, then `w_updates` rounds of
/// re-estimating W and refitting.
EstimateReport m3ls(const Dataset& data, int k, Link link, const EstimateOptions& opts = {});

/// Same pipeline started from the best of R random direction sets (uniform on
/// the sphere, drawn from opts.seed) by initial objective under W_init.
EstimateReport m3ls_random_starts(const Dataset& data, int k, Link link, int r, const EstimateOptions& opts = {});

}  // namespace mixmom
