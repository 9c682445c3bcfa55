#pragma once

#include "mixmom/link.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

namespace mixmom {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Mixture parameters theta = (omega, beta, b).
///
/// `beta` is d x K with column k the regression vector of component k.
/// The free-parameter vector used by the optimizer and the Jacobian is
/// (omega_1..omega_{K-1}, b_1..b_K, beta_{.1}, ..., beta_{.K}); omega_K is
/// pinned to 1 - sum of the others.
struct Parameters {
    Eigen::VectorXd omega;
    Eigen::MatrixXd beta;
    Eigen::VectorXd b;

    int dim() const { return static_cast<int>(beta.rows()); }
    int components() const { return static_cast<int>(beta.cols()); }

    double norm(int k) const { return beta.col(k).norm(); }
    /// Unit direction of component k (zero vector when beta_k = 0).
    Eigen::VectorXd direction(int k) const;

    /// Throws std::invalid_argument on shape mismatch, negative weights or
    /// weights not summing to one within 1e-10.
    void validate() const;

    Eigen::VectorXd to_vector() const;
    static Parameters from_vector(const Eigen::VectorXd& theta, int d, int k);
};

/// q = K (2 + d) - 1.
int parameter_count(int d, int k);

struct Dataset {
    RowMatrix x;                    // n x d
    std::vector<std::uint8_t> y;    // n, values in {0, 1}

    int size() const { return static_cast<int>(x.rows()); }
    int dim() const { return static_cast<int>(x.cols()); }
    void validate() const;
};

/// Dense d x d x d tensor stored column-major: (j, k, l) -> l d^2 + k d + j.
class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(int d) : d_(d), data_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d) * d * d)) {}

    int dim() const { return d_; }
    double& operator()(int j, int k, int l) { return data_[(static_cast<Eigen::Index>(l) * d_ + k) * d_ + j]; }
    double operator()(int j, int k, int l) const { return data_[(static_cast<Eigen::Index>(l) * d_ + k) * d_ + j]; }
    const Eigen::VectorXd& data() const { return data_; }
    Eigen::VectorXd& data() { return data_; }

private:
    int d_ = 0;
    Eigen::VectorXd data_;
};

struct MomentSet {
    Eigen::VectorXd m1;
    Eigen::MatrixXd m2;
    Tensor3 m3;

    int dim() const { return static_cast<int>(m1.size()); }
    static MomentSet zeros(int d);
};

/// m = d + d^2 + d^3.
int flat_size(int d);

/// Index bookkeeping between the flat moment layout and the distinct entries
/// of the symmetric tensors (j <= k, j <= k <= l).
class SymmetricLayout {
public:
    explicit SymmetricLayout(int d);

    int dim() const { return d_; }
    int flat_size() const { return static_cast<int>(unique_of_flat_.size()); }
    int unique_size() const { return static_cast<int>(multi_index_.size()); }

    /// Distinct-entry index holding flat position i.
    int unique_of(int flat) const { return unique_of_flat_[flat]; }
    /// Sorted multi-index of a distinct entry; unused slots are -1.
    const std::array<int, 3>& multi_index(int unique) const { return multi_index_[unique]; }
    int order(int unique) const;

    /// Write Y * (x, x x^T - I, x^{(3)} - sym(x (x) I)) over distinct entries.
    void features(const double* x, double* out) const;

    /// Spread a distinct-entry vector over every flat position.
    Eigen::VectorXd expand(const Eigen::VectorXd& unique) const;
    /// Row-wise spread of a (distinct entries) x c matrix.
    Eigen::MatrixXd expand_rows(const Eigen::MatrixXd& unique) const;
    /// Spread both dimensions of a distinct x distinct matrix.
    Eigen::MatrixXd expand_square(const Eigen::MatrixXd& unique) const;

    /// Projector onto the flat vectors that are not invariant under index
    /// permutation; moment vectors always lie in its null space.
    Eigen::MatrixXd asymmetric_projector() const;

private:
    int d_;
    std::vector<int> unique_of_flat_;
    std::vector<std::array<int, 3>> multi_index_;
};

/// Shared, lazily built layout for dimension d.
const SymmetricLayout& symmetric_layout(int d);

MomentSet empirical_moments(const Dataset& data);

MomentSet theoretical_moments(const Parameters& theta, Link link);

Eigen::VectorXd flatten(const MomentSet& ms);
MomentSet unflatten(const Eigen::VectorXd& flat, int d);

/// flatten(data_ms) - flatten(theoretical_moments(theta)).
Eigen::VectorXd residual_vector(const MomentSet& data_ms, const Parameters& theta, Link link);

/// d flatten(M(theta)) / d theta, m x q, in the free-parameter order of
/// `Parameters::to_vector`.
Eigen::MatrixXd moment_jacobian(const Parameters& theta, Link link);

/// Per-sample statistics of the flattened moment contributions
/// phi_i = Y_i (X_i, X_i X_i^T - I, ...), needed for optimal weighting and
/// the plug-in covariance.
struct SampleMomentStats {
    int n = 0;
    Eigen::VectorXd mean;     // flatten(empirical_moments)
    Eigen::MatrixXd second;   // (1/n) sum phi_i phi_i^T, m x m
};

SampleMomentStats sample_moment_stats(const Dataset& data);

/// Entrywise sample variance of phi_i, flat layout. Cheaper than
/// `sample_moment_stats` when only standard errors are needed.
Eigen::VectorXd sample_moment_variance(const Dataset& data);

}  // namespace mixmom
