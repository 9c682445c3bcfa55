#pragma once

#include "mixmom/moments.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include <unistd.h>

namespace mixmom::testing {

/// max |a - b| / max(max |b|, floor).
inline double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-12) {
    const double scale = std::max(b.cwiseAbs().maxCoeff(), floor);
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// Column-wise relative error, worst column.
inline double column_rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-12) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < b.cols(); ++j) worst = std::max(worst, rel_error(a.col(j), b.col(j), floor));
    return worst;
}

inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd xp = x, xm = x;
        const double step = h * std::max(1.0, std::abs(x[i]));
        xp[i] += step;
        xm[i] -= step;
        g[i] = (f(xp) - f(xm)) / (2.0 * step);
    }
    return g;
}

inline Eigen::MatrixXd central_difference_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                                   const Eigen::VectorXd& x, double h) {
    const Eigen::VectorXd f0 = f(x);
    Eigen::MatrixXd j(f0.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd xp = x, xm = x;
        const double step = h * std::max(1.0, std::abs(x[i]));
        xp[i] += step;
        xm[i] -= step;
        j.col(i) = (f(xp) - f(xm)) / (2.0 * step);
    }
    return j;
}

/// Weights bounded away from zero, b in (-1, 1), beta entries N(0, scale^2).
inline Parameters random_parameters(int d, int k, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(0.2, 1.0);
    std::uniform_real_distribution<double> ub(-1.0, 1.0);
    std::normal_distribution<double> z(0.0, scale);
    Parameters p;
    p.omega.resize(k);
    for (int j = 0; j < k; ++j) p.omega[j] = u(rng);
    p.omega /= p.omega.sum();
    p.b.resize(k);
    for (int j = 0; j < k; ++j) p.b[j] = ub(rng);
    p.beta.resize(d, k);
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < d; ++i) p.beta(i, j) = z(rng);
    return p;
}

inline Eigen::MatrixXd random_spd(int m, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    Eigen::MatrixXd a(m, m);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) a(i, j) = z(rng);
    Eigen::MatrixXd w = a * a.transpose() / m + 0.5 * Eigen::MatrixXd::Identity(m, m);
    return 0.5 * (w + w.transpose());
}

/// Best signed cosine similarity per true column over all column permutations.
inline std::vector<double> matched_cosines(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth) {
    const int k = static_cast<int>(truth.cols());
    std::vector<int> pi(k);
    std::iota(pi.begin(), pi.end(), 0);
    std::vector<double> best(k, -2.0);
    double best_min = -2.0;
    do {
        std::vector<double> c(k);
        for (int j = 0; j < k; ++j) c[j] = est.col(pi[j]).normalized().dot(truth.col(j).normalized());
        const double worst = *std::min_element(c.begin(), c.end());
        if (worst > best_min) {
            best_min = worst;
            best = c;
        }
    } while (std::next_permutation(pi.begin(), pi.end()));
    return best;
}

/// Fresh directory under the system temp path, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("mixmom_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

/// Probit identification oracle: Q_(b, lambda) = N(-lambda b / (lambda^2 + 1), 1 / (lambda^2 + 1)).
struct ProbitInversion {
    static double alpha1(double lambda, double b) { return -lambda * b / (lambda * lambda + 1.0); }
    static double alpha2(double lambda, double b) {
        const double l2 = lambda * lambda;
        return (l2 * b * b + l2 + 1.0) / ((l2 + 1.0) * (l2 + 1.0));
    }
    static double lambda_of(double a1, double a2) { return std::sqrt(1.0 / (a2 - a1 * a1) - 1.0); }
    static double b_of(double a1, double lambda) { return -a1 * (lambda * lambda + 1.0) / lambda; }
};

}  // namespace mixmom::testing
