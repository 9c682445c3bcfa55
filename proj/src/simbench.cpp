#include "mixmom/simbench.hpp"

#include "mixmom/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

namespace mixmom {

void ExperimentConfig::validate() const {
    theta_star.validate();
    if (n_grid.empty()) throw std::invalid_argument("n_grid must not be empty");
    for (int n : n_grid)
        if (n < 1) throw std::invalid_argument("sample sizes must be positive");
    if (replications < 1) throw std::invalid_argument("replications must be positive");
    if (!(trim_fraction >= 0.0 && trim_fraction < 0.5)) throw std::invalid_argument("trim_fraction must lie in [0, 0.5)");
    if (components() > dim()) throw std::invalid_argument("number of components must not exceed the dimension");
}

ExperimentConfig builtin_experiment(int id, Link link) {
    ExperimentConfig cfg;
    cfg.link = link;
    cfg.n_grid = {5000, 10000, 100000, 500000, 1000000};
    Parameters& t = cfg.theta_star;
    switch (id) {
    case 1:
        t.omega = Eigen::Vector2d(0.5, 0.5);
        t.b = Eigen::Vector2d(-0.2, 0.5);
        t.beta.resize(2, 2);
        t.beta << 1, 3,
                  -2, 1;
        break;
    case 2:
        t.omega = Eigen::Vector2d(0.5, 0.5);
        t.b = Eigen::Vector2d(-0.2, 0.5);
        t.beta.resize(5, 2);
        t.beta << 1, 2,
                  2, -3,
                  -1, 0,
                  0, 1,
                  3, 0;
        break;
    case 3:
        t.omega = Eigen::Vector3d(0.3, 0.3, 0.4);
        t.b = Eigen::Vector3d(-0.2, 0.0, 0.5);
        t.beta.resize(10, 3);
        t.beta << 1, 2, -1,
                  2, -3, 1,
                  -1, 0, 3,
                  0, 1, -1,
                  3, 0, 0,
                  4, -1, 0,
                  -1, -4, 2,
                  -3, 3, 0,
                  0, 2, 1,
                  2, 0, -2;
        break;
    default:
        throw std::invalid_argument("unknown experiment id " + std::to_string(id));
    }
    cfg.name = "experiment" + std::to_string(id) + "-" + to_string(link);
    return cfg;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Dataset generate(const Parameters& theta, Link link, int n, std::uint64_t seed) {
    theta.validate();
    if (n < 0) throw std::invalid_argument("sample size must be non-negative");
    const int d = theta.dim();
    const int k_count = theta.components();
    std::vector<double> cumulative(k_count);
    std::partial_sum(theta.omega.data(), theta.omega.data() + k_count, cumulative.begin());

    std::mt19937_64 rng(splitmix64(seed));
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform;

    Dataset data;
    data.x.resize(n, d);
    data.y.resize(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) data.x(i, j) = normal(rng);
        const double u = uniform(rng) * cumulative.back();
        int k = 0;
        while (k + 1 < k_count && u >= cumulative[k]) ++k;
        const double eta = data.x.row(i).dot(theta.beta.col(k)) + theta.b[k];
        data.y[i] = uniform(rng) < deriv(link, 0, eta) ? 1 : 0;
    }
    return data;
}

std::vector<int> align(const Parameters& theta_hat, const Parameters& theta_star) {
    const int k_count = theta_star.components();
    if (theta_hat.components() != k_count || theta_hat.dim() != theta_star.dim()) {
        throw std::invalid_argument("parameters to align must have the same shape");
    }
    if (k_count > 5) throw std::invalid_argument("alignment supports at most 5 components");
    Eigen::MatrixXd cost(k_count, k_count);   // (estimate j, truth k)
    for (int j = 0; j < k_count; ++j) {
        for (int k = 0; k < k_count; ++k) {
            cost(j, k) = (theta_hat.beta.col(j) - theta_star.beta.col(k)).cwiseAbs().sum() +
                         std::abs(theta_hat.b[j] - theta_star.b[k]) + std::abs(theta_hat.omega[j] - theta_star.omega[k]);
        }
    }
    std::vector<int> pi(k_count);
    std::iota(pi.begin(), pi.end(), 0);
    std::vector<int> best = pi;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (int k = 0; k < k_count; ++k) c += cost(pi[k], k);
        if (c < best_cost) {
            best_cost = c;
            best = pi;
        }
    } while (std::next_permutation(pi.begin(), pi.end()));
    return best;
}

Parameters apply_permutation(const Parameters& theta, const std::vector<int>& pi) {
    const int k_count = theta.components();
    if (static_cast<int>(pi.size()) != k_count) throw std::invalid_argument("permutation size mismatch");
    Parameters out;
    out.omega.resize(k_count);
    out.b.resize(k_count);
    out.beta.resize(theta.dim(), k_count);
    for (int k = 0; k < k_count; ++k) {
        out.omega[k] = theta.omega[pi[k]];
        out.b[k] = theta.b[pi[k]];
        out.beta.col(k) = theta.beta.col(pi[k]);
    }
    return out;
}

double SummedErrors::total() const {
    return p + b + std::accumulate(beta.begin(), beta.end(), 0.0);
}

SummedErrors summed_errors(const Parameters& aligned, const Parameters& theta_star) {
    SummedErrors e;
    e.p = (aligned.omega - theta_star.omega).cwiseAbs().sum();
    e.b = (aligned.b - theta_star.b).cwiseAbs().sum();
    for (int k = 0; k < theta_star.components(); ++k) {
        e.beta.push_back((aligned.beta.col(k) - theta_star.beta.col(k)).cwiseAbs().sum());
    }
    return e;
}

double l1_distance(const Parameters& aligned, const Parameters& theta_star) {
    return summed_errors(aligned, theta_star).total();
}

std::vector<int> retained_replications(const std::vector<ReplicationResult>& reps, double trim_fraction) {
    std::vector<int> ok;
    for (int i = 0; i < static_cast<int>(reps.size()); ++i)
        if (reps[i].ok) ok.push_back(i);
    const auto keep = static_cast<std::size_t>(
        std::ceil(static_cast<double>(ok.size()) * (1.0 - trim_fraction) - 1e-9));
    std::stable_sort(ok.begin(), ok.end(), [&](int a, int b) { return reps[a].l1 < reps[b].l1; });
    ok.resize(std::min(keep, ok.size()));
    std::sort(ok.begin(), ok.end());
    return ok;
}

ReplicationResult run_replication(const ExperimentConfig& cfg, int n, int r, const RunOptions& opts) {
    ReplicationResult rep;
    rep.n = n;
    rep.replication = r;
    rep.seed = cfg.seed + static_cast<std::uint64_t>(r);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const Dataset data = generate(cfg.theta_star, cfg.link, n, rep.seed);
        EstimateOptions eo = opts.estimate;
        EstimateReport report;
        if (opts.random_starts > 0) {
            eo.seed = splitmix64(rep.seed ^ 0x5bd1e995ULL);
            report = m3ls_random_starts(data, cfg.components(), cfg.link, opts.random_starts, eo);
        } else {
            report = m3ls(data, cfg.components(), cfg.link, eo);
        }
        const Parameters& est = report.theta_hat;
        if (!est.omega.allFinite() || !est.b.allFinite() || !est.beta.allFinite()) {
            throw NumericalError("estimate is not finite");
        }
        rep.estimate = apply_permutation(est, align(est, cfg.theta_star));
        rep.errors = summed_errors(rep.estimate, cfg.theta_star);
        rep.l1 = rep.errors.total();
        rep.converged = report.converged;
        rep.objective_value = report.objective_value;
        rep.ok = true;
    } catch (const std::exception& e) {
        rep.ok = false;
        rep.error = e.what();
    }
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    const int reps_per_n = cfg.replications;
    const int jobs = static_cast<int>(cfg.n_grid.size()) * reps_per_n;
    ExperimentResult result;
    result.replications.resize(jobs);

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int j = next++; j < jobs; j = next++) {
            result.replications[j] = run_replication(cfg, cfg.n_grid[j / reps_per_n], j % reps_per_n, opts);
        }
    };
    const int threads = std::max(1, std::min(opts.threads, jobs));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (opts.on_replication) {
        for (const auto& rep : result.replications) opts.on_replication(rep);
    }

    const int d = cfg.dim();
    const int k_count = cfg.components();
    result.table.name = cfg.name;
    result.table.link = cfg.link;
    result.table.components = k_count;
    for (std::size_t g = 0; g < cfg.n_grid.size(); ++g) {
        const std::vector<ReplicationResult> block(result.replications.begin() + g * reps_per_n,
                                                   result.replications.begin() + (g + 1) * reps_per_n);
        ErrorRow row;
        row.n = cfg.n_grid[g];
        row.replications = reps_per_n;
        double wall = 0.0;
        int successes = 0;
        for (const auto& rep : block) {
            wall += rep.wall_time;
            if (!rep.ok) {
                ++row.failures;
            } else {
                ++successes;
                if (!rep.converged) ++row.non_converged;
            }
        }
        row.mean_wall_time = wall / reps_per_n;

        const std::vector<int> kept = retained_replications(block, cfg.trim_fraction);
        row.retained = static_cast<int>(kept.size());
        if (cfg.trim_fraction > 0.0 && row.retained == successes) {
            result.warnings.push_back("n=" + std::to_string(row.n) + ": trimming skipped, " + std::to_string(successes) +
                                      " replications are too few to drop any");
        }
        if (kept.empty()) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            row.errors.p = row.errors.b = nan;
            row.errors.beta.assign(k_count, nan);
            result.warnings.push_back("n=" + std::to_string(row.n) + ": every replication failed");
        } else if (opts.per_replication_errors) {
            row.errors.beta.assign(k_count, 0.0);
            for (int i : kept) {
                row.errors.p += block[i].errors.p;
                row.errors.b += block[i].errors.b;
                for (int k = 0; k < k_count; ++k) row.errors.beta[k] += block[i].errors.beta[k];
            }
            const double m = static_cast<double>(kept.size());
            row.errors.p /= m;
            row.errors.b /= m;
            for (double& v : row.errors.beta) v /= m;
        } else {
            Parameters mean;
            mean.omega = Eigen::VectorXd::Zero(k_count);
            mean.b = Eigen::VectorXd::Zero(k_count);
            mean.beta = Eigen::MatrixXd::Zero(d, k_count);
            for (int i : kept) {
                mean.omega += block[i].estimate.omega;
                mean.b += block[i].estimate.b;
                mean.beta += block[i].estimate.beta;
            }
            const double m = static_cast<double>(kept.size());
            mean.omega /= m;
            mean.b /= m;
            mean.beta /= m;
            row.errors = summed_errors(mean, cfg.theta_star);
        }
        result.table.rows.push_back(std::move(row));
    }
    return result;
}

}  // namespace mixmom
