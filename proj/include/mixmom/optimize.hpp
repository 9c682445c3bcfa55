#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace mixmom {

/// Smooth minimization over the polyhedron { x : A x + c >= 0 }.
struct BarrierProblem {
    /// Returns f(x) and writes the gradient into `grad`.
    std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)> value_and_gradient;
    /// Optional positive semidefinite curvature model of f (e.g. Gauss-Newton),
    /// used to seed the quasi-Newton metric. Identity scaling when empty.
    std::function<Eigen::MatrixXd(const Eigen::VectorXd& x)> curvature;
    Eigen::MatrixXd a;   // rows are constraint normals
    Eigen::VectorXd c;
};

struct OptimizeOptions {
    double tol = 1e-8;          // projected-gradient norm
    int max_iter = 1000;        // quasi-Newton iterations over all barrier stages
    double mu_scale = 1e-4;     // initial barrier weight relative to |f(x0)|
    double mu_factor = 1e-2;
    double mu_min = 1e-16;
    double active_slack = 1e-7; // constraint treated as active below this slack
};

struct OptimizeResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    double projected_gradient_norm = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string message;
};

/// Log-barrier method with a BFGS inner solver and feasibility-preserving
/// Armijo backtracking. The barrier weight starts at mu_scale * |f(x0)| and is
/// divided by 1/mu_factor after each inner solve until it drops below mu_min.
///
/// Throws std::invalid_argument when x0 is not strictly feasible.
OptimizeResult minimize_barrier(const BarrierProblem& problem, const Eigen::VectorXd& x0,
                                const OptimizeOptions& opts = {});

/// Gradient with the components along active constraint normals removed.
Eigen::VectorXd projected_gradient(const BarrierProblem& problem, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& grad, double active_slack);

}  // namespace mixmom
