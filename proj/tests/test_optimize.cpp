#include "mixmom/optimize.hpp"

#include <doctest.h>

#include <cmath>

using namespace mixmom;

namespace {

BarrierProblem quadratic(const Eigen::MatrixXd& h, const Eigen::VectorXd& center) {
    BarrierProblem p;
    p.value_and_gradient = [h, center](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        const Eigen::VectorXd r = x - center;
        g = h * r;
        return 0.5 * r.dot(h * r);
    };
    return p;
}

}  // namespace

TEST_CASE("unconstrained quadratic reaches its center") {
    Eigen::MatrixXd h(3, 3);
    h << 4, 1, 0,
         1, 3, 0.5,
         0, 0.5, 2;
    const Eigen::Vector3d center(1.0, -2.0, 0.5);
    BarrierProblem p = quadratic(h, center);
    p.a = Eigen::RowVector3d(1, 0, 0);
    p.c = Eigen::VectorXd::Constant(1, 100.0);
    const OptimizeResult r = minimize_barrier(p, Eigen::Vector3d::Zero());
    CHECK(r.converged);
    CHECK((r.x - center).norm() < 1e-7);
    CHECK(r.projected_gradient_norm <= 1e-8);
}

TEST_CASE("active bound is approached from the feasible side") {
    BarrierProblem p = quadratic(Eigen::Matrix2d::Identity() * 2.0, Eigen::Vector2d(-1.0, 2.0));
    p.a = Eigen::RowVector2d(1, 0);
    p.c = Eigen::VectorXd::Zero(1);
    const OptimizeResult r = minimize_barrier(p, Eigen::Vector2d(0.5, 0.0));
    CHECK(r.converged);
    CHECK(r.x[0] > 0.0);
    CHECK(r.x[0] < 1e-7);
    CHECK(r.x[1] == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("simplex-type constraints") {
    // minimize (x0 - 0.8)^2 + (x1 - 0.6)^2 with x0, x1 >= 0 and x0 + x1 <= 1
    BarrierProblem p = quadratic(Eigen::Matrix2d::Identity() * 2.0, Eigen::Vector2d(0.8, 0.6));
    p.a.resize(3, 2);
    p.a << 1, 0,
           0, 1,
           -1, -1;
    p.c = Eigen::Vector3d(0, 0, 1);
    const OptimizeResult r = minimize_barrier(p, Eigen::Vector2d(0.2, 0.2));
    CHECK(r.converged);
    CHECK(r.x[0] == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(r.x[1] == doctest::Approx(0.4).epsilon(1e-6));
    CHECK((p.a * r.x + p.c).minCoeff() > 0.0);
}

TEST_CASE("Rosenbrock valley") {
    BarrierProblem p;
    p.value_and_gradient = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
        g.resize(2);
        g[0] = -2.0 * a - 400.0 * x[0] * b;
        g[1] = 200.0 * b;
        return a * a + 100.0 * b * b;
    };
    p.a = Eigen::RowVector2d(1, 0);
    p.c = Eigen::VectorXd::Constant(1, 5.0);
    const OptimizeResult r = minimize_barrier(p, Eigen::Vector2d(-1.2, 1.0));
    CHECK(r.converged);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("curvature model is accepted") {
    Eigen::MatrixXd h = Eigen::Vector2d(1e4, 1.0).asDiagonal();
    BarrierProblem p = quadratic(h, Eigen::Vector2d(0.3, -0.7));
    p.curvature = [h](const Eigen::VectorXd&) { return h; };
    p.a = Eigen::RowVector2d(0, 1);
    p.c = Eigen::VectorXd::Constant(1, 10.0);
    const OptimizeResult r = minimize_barrier(p, Eigen::Vector2d(2.0, 2.0));
    CHECK(r.converged);
    CHECK(r.iterations < 30);
    CHECK((r.x - Eigen::Vector2d(0.3, -0.7)).norm() < 1e-8);
}

TEST_CASE("infeasible start is rejected") {
    BarrierProblem p = quadratic(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero());
    p.a = Eigen::RowVector2d(1, 0);
    p.c = Eigen::VectorXd::Zero(1);
    CHECK_THROWS_AS(minimize_barrier(p, Eigen::Vector2d(-0.1, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(minimize_barrier(p, Eigen::Vector2d(0.0, 0.0)), std::invalid_argument);
}

TEST_CASE("projected gradient drops outward normal components") {
    BarrierProblem p;
    p.a = Eigen::RowVector2d(1, 0);
    p.c = Eigen::VectorXd::Zero(1);
    const Eigen::Vector2d x(1e-9, 0.0);
    // gradient pushing through the bound is removed
    CHECK((projected_gradient(p, x, Eigen::Vector2d(3.0, 0.5), 1e-7) - Eigen::Vector2d(0.0, 0.5)).norm() < 1e-15);
    // gradient pulling back inside is kept
    CHECK((projected_gradient(p, x, Eigen::Vector2d(-3.0, 0.5), 1e-7) - Eigen::Vector2d(-3.0, 0.5)).norm() < 1e-15);
    // inactive bound keeps everything
    CHECK((projected_gradient(p, Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(3.0, 0.5), 1e-7) -
           Eigen::Vector2d(3.0, 0.5)).norm() < 1e-15);
}
