#include "support.hpp"

#include "mixmom/link.hpp"

#include <doctest.h>

#include <cmath>

using namespace mixmom;

namespace {

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
double big_phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Derivatives of the standard normal cdf written out by hand.
double normal_cdf_derivative(int s, double x) {
    switch (s) {
    case 0: return big_phi(x);
    case 1: return phi(x);
    case 2: return -x * phi(x);
    case 3: return (x * x - 1.0) * phi(x);
    case 4: return (3.0 * x - x * x * x) * phi(x);
    default: return (x * x * x * x - 6.0 * x * x + 3.0) * phi(x);
    }
}

double sigma(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logistic_derivative(int s, double x) {
    const double p = sigma(x), q = sigma(-x);
    switch (s) {
    case 0: return p;
    case 1: return p * q;
    case 2: return p * q * (q - p);
    case 3: return p * q * (1 - 6 * p * q);
    case 4: return p * q * (q - p) * (1 - 12 * p * q);
    default: return p * q * (1 - 30 * p * q + 120 * p * p * q * q);
    }
}

// Composite Simpson on [-L, L] for E[f(Z)].
template <class F>
double simpson_normal(F f, double half_width = 12.0, int intervals = 240000) {
    const double h = 2.0 * half_width / intervals;
    double acc = 0.0;
    for (int i = 0; i <= intervals; ++i) {
        const double z = -half_width + i * h;
        const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * f(z) * phi(z);
    }
    return acc * h / 3.0;
}

}  // namespace

TEST_CASE("link names round trip") {
    CHECK(parse_link("logit") == Link::logit);
    CHECK(parse_link("probit") == Link::probit);
    CHECK(to_string(Link::probit) == "probit");
    CHECK_THROWS_AS(parse_link("cloglog"), std::invalid_argument);
}

TEST_CASE("logistic derivatives match the closed forms") {
    for (double x : {-30.0, -5.0, -1.3, 0.0, 0.7, 4.0, 25.0}) {
        for (int s = 0; s <= 5; ++s) {
            const double expect = logistic_derivative(s, x);
            CHECK(deriv(Link::logit, s, x) == doctest::Approx(expect).epsilon(1e-12).scale(1e-14));
        }
    }
    CHECK(deriv(Link::logit, 1, 0.0) == doctest::Approx(0.25));
    CHECK(deriv(Link::logit, 0, -800.0) >= 0.0);
    CHECK(deriv(Link::logit, 0, 800.0) == 1.0);
}

TEST_CASE("probit derivatives match Hermite forms") {
    for (double x : {-9.0, -2.5, -0.3, 0.0, 1.1, 3.0, 8.5}) {
        for (int s = 0; s <= 5; ++s) {
            CHECK(deriv(Link::probit, s, x) == doctest::Approx(normal_cdf_derivative(s, x)).epsilon(1e-12).scale(1e-15));
        }
    }
}

TEST_CASE("each derivative is the finite difference of the previous one") {
    for (Link link : {Link::logit, Link::probit}) {
        for (double x : {-2.0, -0.4, 0.3, 1.7}) {
            const auto d = derivs(link, x);
            for (int s = 0; s < 5; ++s) {
                const double h = 1e-5;
                const double fd = (deriv(link, s, x + h) - deriv(link, s, x - h)) / (2 * h);
                CHECK(d[s + 1] == doctest::Approx(fd).epsilon(1e-7).scale(1e-9));
            }
        }
    }
}

TEST_CASE("derivative order and argument are validated") {
    CHECK_THROWS_AS(deriv(Link::logit, 6, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(deriv(Link::probit, -1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(deriv(Link::logit, 0, std::nan("")), std::invalid_argument);
    CHECK_THROWS_AS(expectation(Link::logit, 1, -0.5, 0.0), std::invalid_argument);
}

TEST_CASE("Gauss-Hermite rule integrates Gaussian moments") {
    for (int order : {2, 5, 10, 40, 100}) {
        const QuadratureRule r = gauss_hermite(order);
        REQUIRE(r.size() == static_cast<std::size_t>(order));
        double sum = 0.0;
        for (double w : r.weights) sum += w;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
        for (std::size_t i = 0; i < r.size(); ++i) CHECK(r.nodes[i] == doctest::Approx(-r.nodes[r.size() - 1 - i]));
        // E[Z^2k] = (2k - 1)!! up to degree 2 * order - 1
        double double_factorial = 1.0;
        for (int k = 1; 2 * k <= std::min(2 * order - 1, 20); ++k) {
            double_factorial *= 2 * k - 1;
            double even = 0.0, odd = 0.0;
            for (std::size_t i = 0; i < r.size(); ++i) {
                even += r.weights[i] * std::pow(r.nodes[i], 2 * k);
                odd += r.weights[i] * std::pow(r.nodes[i], 2 * k - 1);
            }
            CHECK(even == doctest::Approx(double_factorial).epsilon(1e-11));
            CHECK(std::abs(odd) < 1e-9 * double_factorial);
        }
    }
    CHECK_THROWS(gauss_hermite(0));
}

TEST_CASE("probit expectations match the Gaussian convolution closed form") {
    // E[Phi^(s)(lambda Z + b)] = tau^-s Phi^(s)(b / tau), tau = sqrt(1 + lambda^2)
    for (double lambda : {0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 4.0, 8.0}) {
        for (double b : {-2.0, -1.0, -0.2, 0.0, 0.5, 1.0, 2.0}) {
            const double tau = std::sqrt(1.0 + lambda * lambda);
            const auto e = expectations(Link::probit, lambda, b);
            for (int s = 0; s <= 5; ++s) {
                const double expect = normal_cdf_derivative(s, b / tau) / std::pow(tau, s);
                CHECK(std::abs(e[s] - expect) <= 1e-10 * std::max(1.0, std::abs(expect)));
                CHECK(expectation(Link::probit, s, lambda, b) == e[s]);
            }
        }
    }
}

TEST_CASE("logit expectations agree with fine Simpson integration") {
    for (double lambda : {0.3, 1.0, 1.01, 2.5, 6.7}) {
        for (double b : {-0.7, 0.0, 0.5}) {
            const auto e = expectations(Link::logit, lambda, b);
            for (int s = 0; s <= 5; ++s) {
                const double ref = simpson_normal([&](double z) { return logistic_derivative(s, lambda * z + b); });
                CHECK(std::abs(e[s] - ref) <= 1e-10);
            }
        }
    }
}

TEST_CASE("zero slope reduces to a point evaluation") {
    const auto e = expectations(Link::logit, 0.0, 0.3);
    for (int s = 0; s <= 5; ++s) CHECK(e[s] == doctest::Approx(logistic_derivative(s, 0.3)));
}

TEST_CASE("symmetric links give vanishing even derivatives at zero intercept") {
    for (Link link : {Link::logit, Link::probit}) {
        for (double lambda : {0.5, 3.0}) {
            const auto e = expectations(link, lambda, 0.0);
            CHECK(e[0] == doctest::Approx(0.5).epsilon(1e-13));
            CHECK(std::abs(e[2]) < 1e-15);
            CHECK(std::abs(e[4]) < 1e-15);
        }
    }
}

TEST_CASE("reference values") {
    CHECK(deriv(Link::logit, 0, 0.0) == 0.5);
    CHECK(deriv(Link::logit, 1, 0.0) == 0.25);
    CHECK(deriv(Link::probit, 2, 0.0) == 0.0);
    CHECK(deriv(Link::logit, 3, 0.0) == doctest::Approx(-0.125).epsilon(1e-14));
    CHECK(expectation(Link::probit, 1, 1.0, 0.0) == doctest::Approx(1.0 / (2.0 * std::sqrt(M_PI))).epsilon(1e-12));
    CHECK(std::abs(expectation(Link::logit, 2, 1.0, 0.0)) < 1e-15);
    CHECK(expectation(Link::probit, 1, 0.0, 0.3) == doctest::Approx(phi(0.3)).epsilon(1e-14));
}
