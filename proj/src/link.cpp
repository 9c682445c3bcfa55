#include "mixmom/link.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mixmom {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

// Trapezoid grid on the linear predictor for lambda > 1.
constexpr double kTrapezoidHalfWidth = 40.0;
constexpr double kTrapezoidStep = 0.125;
constexpr double kLambdaSwitch = 1.0;

// Logistic derivatives as polynomials in sigma: P_0 = sigma and
// P_{s+1}(sigma) = P_s'(sigma) * (sigma - sigma^2).
using Poly = std::array<double, 7>;

constexpr std::array<Poly, kMaxDerivative + 1> logistic_polys() {
    std::array<Poly, kMaxDerivative + 1> p{};
    p[0][1] = 1.0;
    for (int s = 0; s < kMaxDerivative; ++s) {
        Poly dp{};
        for (int j = 1; j < 7; ++j) dp[j - 1] = j * p[s][j];
        Poly next{};
        for (int j = 0; j + 2 < 7; ++j) {
            next[j + 1] += dp[j];
            next[j + 2] -= dp[j];
        }
        p[s + 1] = next;
    }
    return p;
}

constexpr auto kLogisticPolys = logistic_polys();

double eval_poly(const Poly& p, double x) {
    double acc = 0.0;
    for (int j = 6; j >= 0; --j) acc = acc * x + p[j];
    return acc;
}

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_order(int s) {
    if (s < 0 || s > kMaxDerivative) {
        throw std::invalid_argument("link derivative order must be in [0, 5], got " + std::to_string(s));
    }
}

}  // namespace

Link parse_link(std::string_view name) {
    if (name == "logit") return Link::logit;
    if (name == "probit") return Link::probit;
    throw std::invalid_argument("unknown link '" + std::string(name) + "' (expected logit or probit)");
}

std::string to_string(Link link) {
    return link == Link::logit ? "logit" : "probit";
}

std::array<double, kMaxDerivative + 1> derivs(Link link, double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("link argument must be finite");
    std::array<double, kMaxDerivative + 1> out{};
    if (link == Link::logit) {
        out[0] = logistic(x);
        // Evaluate on the negative half-line where sigma is small and the
        // polynomials do not cancel; g^(s)(-x) = (-1)^(s+1) g^(s)(x).
        const double sigma = logistic(-std::abs(x));
        for (int s = 1; s <= kMaxDerivative; ++s) {
            const double v = eval_poly(kLogisticPolys[s], sigma);
            out[s] = (x > 0.0 && s % 2 == 0) ? -v : v;
        }
    } else {
        out[0] = 0.5 * std::erfc(-x / std::numbers::sqrt2);
        const double phi = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        // g^(s) = (-1)^(s-1) He_{s-1}(x) phi(x)
        const double x2 = x * x;
        out[1] = phi;
        out[2] = -x * phi;
        out[3] = (x2 - 1.0) * phi;
        out[4] = -(x2 * x - 3.0 * x) * phi;
        out[5] = (x2 * x2 - 6.0 * x2 + 3.0) * phi;
    }
    return out;
}

double deriv(Link link, int s, double x) {
    check_order(s);
    return derivs(link, x)[s];
}

QuadratureRule gauss_hermite(int order) {
    if (order < 1) throw std::invalid_argument("quadrature order must be positive");
    const int q = order;

    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(q, q);
    for (int k = 1; k < q; ++k) {
        jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi, Eigen::EigenvaluesOnly);
    std::vector<double> nodes(solver.eigenvalues().data(), solver.eigenvalues().data() + q);

    // Orthonormal recurrence p_{k+1} = (x p_k - sqrt(k) p_{k-1}) / sqrt(k+1).
    auto recurrence = [q](double x, double& pq, double& pq1, double& sumsq) {
        double prev = 0.0, cur = 1.0;
        sumsq = 0.0;
        for (int k = 0; k < q; ++k) {
            sumsq += cur * cur;
            const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) / std::sqrt(k + 1.0);
            prev = cur;
            cur = next;
        }
        pq = cur;
        pq1 = prev;
    };

    std::vector<double> weights(q);
    for (int i = 0; i < q; ++i) {
        double x = nodes[i];
        double pq, pq1, sumsq;
        for (int it = 0; it < 4; ++it) {
            recurrence(x, pq, pq1, sumsq);
            const double slope = std::sqrt(static_cast<double>(q)) * pq1;
            if (slope == 0.0) break;
            x -= pq / slope;
        }
        recurrence(x, pq, pq1, sumsq);
        nodes[i] = x;
        weights[i] = 1.0 / sumsq;
    }

    for (int i = 0; i < q / 2; ++i) {
        const int j = q - 1 - i;
        const double x = 0.5 * (nodes[j] - nodes[i]);
        const double w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = weights[j] = w;
    }
    if (q % 2 == 1) nodes[q / 2] = 0.0;

    double total = 0.0;
    for (double w : weights) total += w;
    for (double& w : weights) w /= total;
    return {std::move(nodes), std::move(weights)};
}

const QuadratureRule& default_rule() {
    static const QuadratureRule rule = gauss_hermite(100);
    return rule;
}

std::array<double, kMaxDerivative + 1> expectations(Link link, double lambda, double b,
                                                    const QuadratureRule& rule) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("expectation requires a finite lambda >= 0");
    }
    if (!std::isfinite(b)) throw std::invalid_argument("expectation requires a finite intercept");
    if (lambda == 0.0) return derivs(link, b);

    std::array<double, kMaxDerivative + 1> acc{};
    if (lambda <= kLambdaSwitch) {
        for (std::size_t i = 0; i < rule.size(); ++i) {
            const auto g = derivs(link, lambda * rule.nodes[i] + b);
            for (int s = 0; s <= kMaxDerivative; ++s) acc[s] += rule.weights[i] * g[s];
        }
        return acc;
    }

    // E[f(lambda Z + b)] = int f(u) phi((u - b) / lambda) / lambda du
    const int half = static_cast<int>(kTrapezoidHalfWidth / kTrapezoidStep);
    const double scale = kTrapezoidStep * kInvSqrt2Pi / lambda;
    // g itself does not decay at +inf, so integrate g - Phi and add the closed
    // form E[Phi(lambda Z + b)] = Phi(b / sqrt(1 + lambda^2)).
    double remainder = 0.0;
    for (int j = -half; j <= half; ++j) {
        const double u = j * kTrapezoidStep;
        const double t = (u - b) / lambda;
        const double density = scale * std::exp(-0.5 * t * t);
        const auto g = derivs(link, u);
        for (int s = 1; s <= kMaxDerivative; ++s) acc[s] += density * g[s];
        if (link == Link::logit) remainder += density * (g[0] - 0.5 * std::erfc(-u / std::numbers::sqrt2));
    }
    acc[0] = 0.5 * std::erfc(-b / std::sqrt(1.0 + lambda * lambda) / std::numbers::sqrt2) + remainder;
    return acc;
}

double expectation(Link link, int s, double lambda, double b, const QuadratureRule& rule) {
    check_order(s);
    return expectations(link, lambda, b, rule)[s];
}

}  // namespace mixmom
