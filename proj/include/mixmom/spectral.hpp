#pragma once

#include "mixmom/moments.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mixmom {

/// Contractions B(z_p)[i, j] = sum_s m3[i, j, s] z_p[s].
struct SlicePencil {
    std::vector<Eigen::MatrixXd> slices;
    Eigen::MatrixXd z;   // d x P, column p is z_p

    int dim() const { return static_cast<int>(z.rows()); }
    int count() const { return static_cast<int>(slices.size()); }
};

SlicePencil build_slices(const Tensor3& m3, const Eigen::MatrixXd& z);

/// J(V) = sum_p ||offdiag(V B_p V^T)||_F^2.
double off_diagonal_criterion(const SlicePencil& pencil, const Eigen::MatrixXd& v);

struct JointDiagonalization {
    Eigen::MatrixXd v;              // rows have unit norm
    double criterion = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;      // J(V) after each accepted sweep, starting with the initial value
};

/// Non-orthogonal approximate joint diagonalization.
///
/// Each sweep linearizes V <- (I + E) V around the current congruence
/// products and solves the 2x2 least-squares problem for every pair
/// (E_ij, E_ji) in closed form (minimum-norm when a pair is degenerate, as
/// happens for null directions of rank-deficient pencils). The update norm is
/// capped below 1 to keep I + E invertible, and the step is halved until J
/// does not increase, so the returned trace is non-increasing.
///
/// Throws NumericalError if the final V is numerically singular.
JointDiagonalization joint_diagonalize(const SlicePencil& pencil, double tol = 1e-12, int max_iter = 1000);

struct DirectionEstimate {
    Eigen::MatrixXd mu;               // d x K, unit columns
    Eigen::VectorXd diagonal_scores;  // sum_p (V B_p V^T)[r, r]^2 of the selected rows
    Eigen::VectorXd signal;           // O = pinv(U) m1 after the sign fix
    JointDiagonalization diagonalization;
    std::vector<std::string> warnings;
};

/// Directions of the regression vectors from the third-order moment, with
/// signs fixed so that pinv(U) m1 is non-negative.
DirectionEstimate init_directions(const Tensor3& m3, const Eigen::VectorXd& m1, int k,
                                  const Eigen::MatrixXd& z);

/// Same, with z the canonical basis. For d = 1 the direction is +-1 and no
/// slices are built.
DirectionEstimate init_directions(const MomentSet& ms, int k);

/// Moore-Penrose pseudo-inverse via SVD, singular values below
/// rcond * sigma_max treated as zero.
Eigen::MatrixXd pinv(const Eigen::MatrixXd& a, double rcond = 1e-10);

}  // namespace mixmom
