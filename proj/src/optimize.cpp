#include "mixmom/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace mixmom {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd slack_of(const BarrierProblem& p, const Eigen::VectorXd& x) {
    if (p.a.rows() == 0) return Eigen::VectorXd();
    return p.a * x + p.c;
}

// Inverse of a symmetric curvature model with eigenvalues clamped from below.
Eigen::MatrixXd safe_inverse(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    Eigen::VectorXd ev = es.eigenvalues();
    const double top = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = 1.0 / std::max(ev[i], 1e-10 * top);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

class Stage {
public:
    Stage(const BarrierProblem& p, double mu, OptimizeResult& state) : p_(p), mu_(mu), st_(state) {}

    // Barrier objective; +inf outside the strict interior.
    double phi(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        const Eigen::VectorXd s = slack_of(p_, x);
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (!(s[i] > 0.0)) return kInf;
        double f = p_.value_and_gradient(x, g);
        ++st_.evaluations;
        if (!std::isfinite(f) || !g.allFinite()) return kInf;
        if (mu_ > 0.0 && s.size() > 0) {
            f -= mu_ * s.array().log().sum();
            g.noalias() -= mu_ * (p_.a.transpose() * s.cwiseInverse());
        }
        return f;
    }

    Eigen::MatrixXd model_inverse(const Eigen::VectorXd& x) const {
        const Eigen::Index n = x.size();
        Eigen::MatrixXd m;
        if (p_.curvature) {
            m = p_.curvature(x);
        } else {
            m = Eigen::MatrixXd::Identity(n, n);
        }
        const Eigen::VectorXd s = slack_of(p_, x);
        if (mu_ > 0.0 && s.size() > 0) {
            m.noalias() += mu_ * p_.a.transpose() * s.cwiseAbs2().cwiseInverse().asDiagonal() * p_.a;
        }
        return safe_inverse(m);
    }

    // Largest step keeping every slack strictly positive.
    double max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& dir) const {
        if (p_.a.rows() == 0) return kInf;
        const Eigen::VectorXd s = slack_of(p_, x);
        const Eigen::VectorXd ad = p_.a * dir;
        double alpha = kInf;
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (ad[i] < 0.0) alpha = std::min(alpha, s[i] / -ad[i]);
        return alpha;
    }

    // Returns false on line-search failure.
    bool run(Eigen::VectorXd& x, double stage_tol, int& budget) {
        const Eigen::Index n = x.size();
        Eigen::VectorXd g(n);
        double val = phi(x, g);
        if (!std::isfinite(val)) return false;
        Eigen::MatrixXd h = model_inverse(x);
        bool fresh = true;
        Eigen::VectorXd gn(n);
        while (budget > 0) {
            if (g.norm() <= stage_tol) return true;
            Eigen::VectorXd dir = -h * g;
            double slope = g.dot(dir);
            if (!(slope < 0.0)) {
                h = model_inverse(x);
                fresh = true;
                dir = -h * g;
                slope = g.dot(dir);
                if (!(slope < 0.0)) {
                    dir = -g;
                    slope = -g.squaredNorm();
                }
            }
            double alpha = std::min(1.0, 0.99 * max_step(x, dir));
            bool accepted = false;
            Eigen::VectorXd xn;
            double vn = kInf;
            for (int k = 0; k < 60; ++k, alpha *= 0.5) {
                xn = x + alpha * dir;
                vn = phi(xn, gn);
                if (std::isfinite(vn) && vn <= val + 1e-4 * alpha * slope) {
                    accepted = true;
                    break;
                }
            }
            --budget;
            ++st_.iterations;
            if (!accepted) {
                if (fresh) return false;
                h = model_inverse(x);
                fresh = true;
                continue;
            }
            const Eigen::VectorXd s = xn - x;
            const Eigen::VectorXd y = gn - g;
            const double sy = s.dot(y);
            if (sy > 1e-12 * s.norm() * y.norm()) {
                const double rho = 1.0 / sy;
                const Eigen::VectorXd hy = h * y;
                // (I - rho s y^T) H (I - rho y s^T) + rho s s^T, expanded.
                h.noalias() += (rho * rho * y.dot(hy) + rho) * (s * s.transpose());
                h.noalias() -= rho * (hy * s.transpose() + s * hy.transpose());
            }
            fresh = false;
            const double drop = val - vn;
            x = std::move(xn);
            g = gn;
            val = vn;
            if (drop <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(val) && g.norm() > stage_tol) {
                // Function values no longer resolve the remaining decrease.
                h = model_inverse(x);
                fresh = true;
            }
        }
        return g.norm() <= stage_tol;
    }

private:
    const BarrierProblem& p_;
    double mu_;
    OptimizeResult& st_;
};

}  // namespace

Eigen::VectorXd projected_gradient(const BarrierProblem& problem, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& grad, double active_slack) {
    if (problem.a.rows() == 0) return grad;
    const Eigen::VectorXd s = slack_of(problem, x);
    std::vector<int> active;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s[i] <= active_slack) active.push_back(static_cast<int>(i));
    // Non-negative multipliers for the active normals, by dropping the
    // negative ones until the least-squares fit is dual feasible.
    while (!active.empty()) {
        Eigen::MatrixXd n(grad.size(), static_cast<Eigen::Index>(active.size()));
        for (std::size_t j = 0; j < active.size(); ++j) n.col(j) = problem.a.row(active[j]).transpose();
        const Eigen::VectorXd lambda = n.completeOrthogonalDecomposition().solve(grad);
        std::vector<int> keep;
        for (std::size_t j = 0; j < active.size(); ++j)
            if (lambda[j] >= 0.0) keep.push_back(active[j]);
        if (keep.size() == active.size()) return grad - n * lambda;
        active = std::move(keep);
    }
    return grad;
}

OptimizeResult minimize_barrier(const BarrierProblem& problem, const Eigen::VectorXd& x0, const OptimizeOptions& opts) {
    if (!problem.value_and_gradient) throw std::invalid_argument("objective callback is required");
    const Eigen::Index nc = problem.a.rows();
    if (nc > 0 && (problem.a.cols() != x0.size() || problem.c.size() != nc)) {
        throw std::invalid_argument("constraint shapes do not match the parameter vector");
    }
    const Eigen::VectorXd s0 = slack_of(problem, x0);
    for (Eigen::Index i = 0; i < s0.size(); ++i)
        if (!(s0[i] > 0.0)) throw std::invalid_argument("initial point is not strictly feasible");

    OptimizeResult result;
    Eigen::VectorXd x = x0;
    Eigen::VectorXd g(x.size());
    const double f0 = problem.value_and_gradient(x, g);
    ++result.evaluations;
    if (!std::isfinite(f0)) throw std::invalid_argument("objective is not finite at the initial point");

    double mu = nc > 0 ? std::max(opts.mu_scale * std::abs(f0), opts.mu_min) : 0.0;
    int budget = opts.max_iter;
    bool search_failed = false;
    while (true) {
        const bool last = mu <= opts.mu_min;
        Stage stage(problem, mu, result);
        const double stage_tol = last ? opts.tol : std::max(opts.tol, mu);
        if (!stage.run(x, stage_tol, budget)) search_failed = last && budget > 0;
        if (last || budget <= 0) break;
        mu = std::max(mu * opts.mu_factor, opts.mu_min);
    }

    result.value = problem.value_and_gradient(x, g);
    ++result.evaluations;
    result.x = x;
    result.gradient = g;
    result.projected_gradient_norm = projected_gradient(problem, x, g, opts.active_slack).norm();
    result.converged = result.projected_gradient_norm <= opts.tol;
    if (result.converged) {
        result.message = "converged";
    } else if (search_failed) {
        result.message = "line search failed to decrease the objective";
    } else if (budget <= 0) {
        result.message = "iteration limit reached";
    } else {
        result.message = "stopped above gradient tolerance";
    }
    return result;
}

}  // namespace mixmom
