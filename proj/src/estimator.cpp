#include "mixmom/estimator.hpp"

#include "mixmom/errors.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace mixmom {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

BarrierProblem weight_constraints(int d, int k) {
    BarrierProblem p;
    const int q = parameter_count(d, k);
    if (k < 2) {
        p.a.resize(0, q);
        return p;
    }
    p.a = Eigen::MatrixXd::Zero(k, q);
    p.c = Eigen::VectorXd::Constant(k, -kWeightFloor);
    for (int j = 0; j + 1 < k; ++j) {
        p.a(j, j) = 1.0;
        p.a(k - 1, j) = -1.0;
    }
    p.c[k - 1] = 1.0 - kWeightFloor;
    return p;
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& v, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (v + v.transpose()));
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    if (!(top > 0.0) || !(ev[0] > 1e-12 * top)) throw NumericalError(what);
    return es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

struct PipelineInput {
    const SampleMomentStats* stats = nullptr;   // required for W updates and covariance
    const MomentSet* ms = nullptr;
    int n = 0;
};

void run_pipeline(const PipelineInput& in, Link link, const Parameters& start, const EstimateOptions& opts,
                  EstimateReport& report) {
    const int d = in.ms->dim();
    const auto t0 = Clock::now();
    WeightMatrix w = opts.w_init ? *opts.w_init : WeightMatrix::identity(d);
    w.validate(d);

    report.theta_init = start;
    MinimizeResult fit = minimize(*in.ms, link, w, start, opts.optimizer);
    report.iterations = fit.iterations;
    for (int u = 0; u < opts.w_updates; ++u) {
        w = estimate_w(*in.stats, fit.theta, link);
        report.w_jittered = report.w_jittered || w.jittered;
        fit = minimize(*in.ms, link, w, fit.theta, opts.optimizer);
        report.iterations += fit.iterations;
        ++report.w_updates;
    }
    report.optimize_time = seconds_since(t0);

    report.theta_hat = fit.theta;
    report.objective_value = fit.objective_value;
    report.gradient_norm = fit.gradient_norm;
    report.converged = fit.converged;
    if (!fit.converged) report.warnings.push_back("optimizer: " + fit.message);
    if (report.w_jittered) report.warnings.push_back("weighting matrix needed a ridge before inversion");
    for (int k = 0; k < fit.theta.components(); ++k) {
        if (fit.theta.components() > 1 && fit.theta.omega[k] < 1e-4) {
            report.warnings.push_back("near-degenerate mixture weight for component " + std::to_string(k));
        }
    }

    report.regularity = check_regularity(fit.theta, link);
    if (!report.regularity.h4_ok) report.warnings.push_back("H4 regularity fails at the estimate");
    if (!report.regularity.h5_ok) report.warnings.push_back("H5 regularity fails at the estimate");

    if (opts.covariance) {
        try {
            report.sigma_hat = asymptotic_covariance(*in.stats, fit.theta, link, w);
        } catch (const NumericalError& e) {
            report.warnings.push_back(e.what());
        }
    }
}

struct Prepared {
    SampleMomentStats stats;
    MomentSet ms;
};

Prepared prepare(const Dataset& data, int k, const EstimateOptions& opts, EstimateReport& report) {
    data.validate();
    const int d = data.dim();
    if (k < 1 || k > d) throw std::invalid_argument("number of components must satisfy 1 <= K <= d");
    const auto t0 = Clock::now();
    Prepared p;
    if (opts.w_updates > 0 || opts.covariance) {
        p.stats = sample_moment_stats(data);
        p.ms = unflatten(p.stats.mean, d);
        if (data.size() <= symmetric_layout(d).unique_size()) {
            report.warnings.push_back("sample size does not exceed the number of distinct moments");
        }
    } else {
        p.ms = empirical_moments(data);
        p.stats.n = data.size();
    }
    report.moment_time = seconds_since(t0);
    return p;
}

}  // namespace

WeightMatrix WeightMatrix::identity(int d) {
    const int m = flat_size(d);
    return WeightMatrix{Eigen::MatrixXd::Identity(m, m), false};
}

void WeightMatrix::validate(int d) const {
    const int m = flat_size(d);
    if (w.rows() != m || w.cols() != m) throw std::invalid_argument("weighting matrix must be m x m");
    if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw std::invalid_argument("weighting matrix is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(w);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("weighting matrix is not positive definite");
}

double objective(const MomentSet& data_ms, const Parameters& theta, Link link, const WeightMatrix& w) {
    const Eigen::VectorXd r = residual_vector(data_ms, theta, link);
    return r.dot(w.w * r);
}

Eigen::VectorXd gradient(const MomentSet& data_ms, const Parameters& theta, Link link, const WeightMatrix& w) {
    const Eigen::VectorXd r = residual_vector(data_ms, theta, link);
    return -2.0 * moment_jacobian(theta, link).transpose() * (w.w * r);
}

MinimizeResult minimize(const MomentSet& data_ms, Link link, const WeightMatrix& w, const Parameters& init,
                        const OptimizeOptions& opts) {
    init.validate();
    const int d = init.dim();
    const int k = init.components();
    if (data_ms.dim() != d) throw std::invalid_argument("moment dimension does not match the parameters");
    w.validate(d);
    const Eigen::VectorXd target = flatten(data_ms);

    BarrierProblem problem = weight_constraints(d, k);
    problem.value_and_gradient = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        const Parameters th = Parameters::from_vector(x, d, k);
        const Eigen::VectorXd r = target - flatten(theoretical_moments(th, link));
        const Eigen::VectorXd wr = w.w * r;
        g = -2.0 * moment_jacobian(th, link).transpose() * wr;
        return r.dot(wr);
    };
    problem.curvature = [&](const Eigen::VectorXd& x) {
        const Eigen::MatrixXd j = moment_jacobian(Parameters::from_vector(x, d, k), link);
        return Eigen::MatrixXd(2.0 * j.transpose() * (w.w * j));
    };

    const OptimizeResult res = minimize_barrier(problem, init.to_vector(), opts);
    MinimizeResult out;
    out.theta = Parameters::from_vector(res.x, d, k);
    out.objective_value = res.value;
    out.gradient_norm = res.projected_gradient_norm;
    out.iterations = res.iterations;
    out.evaluations = res.evaluations;
    out.converged = res.converged;
    out.message = res.message;
    return out;
}

Eigen::MatrixXd weight_precursor(const SampleMomentStats& stats, const Parameters& theta, Link link) {
    const int d = theta.dim();
    const int m = flat_size(d);
    if (stats.mean.size() != m || stats.second.rows() != m) throw std::invalid_argument("moment statistics do not match the parameters");
    const Eigen::VectorXd mt = flatten(theoretical_moments(theta, link));
    Eigen::MatrixXd s = stats.second;
    s.noalias() -= stats.mean * mt.transpose();
    s.noalias() -= mt * stats.mean.transpose();
    s.noalias() += mt * mt.transpose();
    s += symmetric_layout(d).asymmetric_projector();
    return 0.5 * (s + s.transpose());
}

WeightMatrix estimate_w(const SampleMomentStats& stats, const Parameters& theta, Link link) {
    Eigen::MatrixXd s = weight_precursor(stats, theta, link);
    const Eigen::Index m = s.rows();
    WeightMatrix out;
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) {
        s.diagonal().array() += 1e-10 * s.trace() / static_cast<double>(m);
        llt.compute(s);
        out.jittered = true;
        if (llt.info() != Eigen::Success) throw NumericalError("moment residual second-moment matrix is singular");
    }
    out.w = llt.solve(Eigen::MatrixXd::Identity(m, m));
    out.w = 0.5 * (out.w + out.w.transpose());
    if (!out.w.allFinite()) throw NumericalError("weighting matrix inversion produced non-finite values");
    return out;
}

WeightMatrix estimate_w(const Dataset& data, const Parameters& theta, Link link) {
    return estimate_w(sample_moment_stats(data), theta, link);
}

Regularity check_regularity(const Parameters& theta, Link link) {
    const int k_count = theta.components();
    Regularity out;
    out.g.resize(5, k_count);
    out.h4_ok = true;
    out.h5_ok = true;
    for (int k = 0; k < k_count; ++k) {
        const auto e = expectations(link, theta.norm(k), theta.b[k]);
        for (int j = 1; j <= 5; ++j) out.g(j - 1, k) = e[j];
        if (!(std::abs(e[3]) > 1e-10)) out.h4_ok = false;
        if (!(std::abs(e[1] * e[3] - e[2] * e[2]) > 1e-10)) out.h5_ok = false;
    }
    return out;
}

Eigen::MatrixXd asymptotic_covariance(const SampleMomentStats& stats, const Parameters& theta_hat, Link link,
                                      const WeightMatrix& w) {
    const int d = theta_hat.dim();
    const int m = flat_size(d);
    if (stats.mean.size() != m || stats.second.rows() != m || stats.n < 1) {
        throw std::invalid_argument("moment statistics do not match the parameters");
    }
    w.validate(d);
    const Eigen::MatrixXd j = moment_jacobian(theta_hat, link);
    const Eigen::MatrixXd wj = w.w * j;
    const Eigen::MatrixXd v = 2.0 * j.transpose() * wj;
    Eigen::MatrixXd c = stats.second;
    c.noalias() -= stats.mean * stats.mean.transpose();
    const Eigen::MatrixXd gamma = 4.0 * wj.transpose() * c * wj;
    const Eigen::MatrixXd v_inv =
        spd_inverse(v, "V is singular at the estimate; H4 or H5 regularity may be violated");
    Eigen::MatrixXd sigma = v_inv * gamma * v_inv / static_cast<double>(stats.n);
    return 0.5 * (sigma + sigma.transpose());
}

Eigen::MatrixXd asymptotic_covariance(const Dataset& data, const Parameters& theta_hat, Link link,
                                      const WeightMatrix& w) {
    return asymptotic_covariance(sample_moment_stats(data), theta_hat, link, w);
}

Parameters spectral_start(const MomentSet& data_ms, int k, const std::optional<Eigen::MatrixXd>& z,
                          std::vector<std::string>* warnings) {
    const int d = data_ms.dim();
    const Eigen::MatrixXd zz = z ? *z : Eigen::MatrixXd::Identity(d, d);
    DirectionEstimate dir = init_directions(data_ms.m3, data_ms.m1, k, zz);
    if (warnings) warnings->insert(warnings->end(), dir.warnings.begin(), dir.warnings.end());
    Parameters p;
    p.omega = Eigen::VectorXd::Constant(k, 1.0 / k);
    p.b = Eigen::VectorXd::Zero(k);
    p.beta = dir.mu;
    return p;
}

EstimateReport m3ls(const Dataset& data, int k, Link link, const EstimateOptions& opts) {
    const auto t0 = Clock::now();
    EstimateReport report;
    const Prepared prep = prepare(data, k, opts, report);
    const Parameters start = spectral_start(prep.ms, k, opts.z, &report.warnings);
    run_pipeline({&prep.stats, &prep.ms, data.size()}, link, start, opts, report);
    report.wall_time = seconds_since(t0);
    return report;
}

EstimateReport m3ls_random_starts(const Dataset& data, int k, Link link, int r, const EstimateOptions& opts) {
    if (r < 1) throw std::invalid_argument("number of random starts must be at least 1");
    const auto t0 = Clock::now();
    EstimateReport report;
    const Prepared prep = prepare(data, k, opts, report);
    const int d = data.dim();
    const WeightMatrix w = opts.w_init ? *opts.w_init : WeightMatrix::identity(d);

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal;
    Parameters best;
    double best_q = std::numeric_limits<double>::infinity();
    for (int s = 0; s < r; ++s) {
        Parameters p;
        p.omega = Eigen::VectorXd::Constant(k, 1.0 / k);
        p.b = Eigen::VectorXd::Zero(k);
        p.beta.resize(d, k);
        for (int j = 0; j < k; ++j) {
            Eigen::VectorXd u(d);
            do {
                for (int i = 0; i < d; ++i) u[i] = normal(rng);
            } while (u.norm() == 0.0);
            p.beta.col(j) = u.normalized();
        }
        const double q = objective(prep.ms, p, link, w);
        report.start_objectives.push_back(q);
        if (q < best_q) {
            best_q = q;
            best = p;
            report.start_index = s;
        }
    }
    if (report.start_index < 0) throw NumericalError("every random start has a non-finite objective");
    run_pipeline({&prep.stats, &prep.ms, data.size()}, link, best, opts, report);
    report.wall_time = seconds_since(t0);
    return report;
}

}  // namespace mixmom
