#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace mixmom {

enum class Link { logit, probit };

Link parse_link(std::string_view name);
std::string to_string(Link link);

constexpr int kMaxDerivative = 5;

/// Nodes and weights for E[f(Z)], Z ~ N(0,1): sum_i w_i f(z_i).
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }
};

/// Gauss-Hermite rule for the standard normal weight (probabilists' Hermite).
/// Nodes come from the Golub-Welsch eigenproblem and are polished by Newton
/// steps on the orthonormal recurrence; the rule is made exactly symmetric.
QuadratureRule gauss_hermite(int order);

/// Process-wide 100-node rule, built on first use.
const QuadratureRule& default_rule();

/// s-th derivative of the link at x, s in [0, 5].
double deriv(Link link, int s, double x);

/// All derivatives g^(0..5)(x) in one evaluation.
std::array<double, kMaxDerivative + 1> derivs(Link link, double x);

/// E[g^(s)(lambda Z + b)] for Z ~ N(0,1), s in [0, 5], lambda >= 0.
///
/// For lambda <= 1 the integral is evaluated with `rule` in the z variable.
/// Larger lambda concentrates the integrand (probit) or moves the logistic
/// poles toward the real axis (logit), so the integral is instead taken in
/// u = lambda z + b with a fine trapezoid rule, which converges geometrically
/// for both links. lambda == 0 returns g^(s)(b).
double expectation(Link link, int s, double lambda, double b,
                   const QuadratureRule& rule = default_rule());

/// E[g^(s)(lambda Z + b)] for every s in [0, 5] at once.
std::array<double, kMaxDerivative + 1> expectations(Link link, double lambda, double b,
                                                    const QuadratureRule& rule = default_rule());

}  // namespace mixmom
