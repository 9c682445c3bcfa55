#include "support.hpp"

#include "mixmom/errors.hpp"
#include "mixmom/simbench.hpp"
#include "mixmom/spectral.hpp"

#include <doctest.h>

#include <random>

using namespace mixmom;
using mixmom::testing::matched_cosines;

namespace {

SlicePencil pencil_from(const Eigen::MatrixXd& a, const std::vector<Eigen::VectorXd>& diagonals) {
    SlicePencil pencil;
    pencil.z = Eigen::MatrixXd::Identity(a.rows(), static_cast<Eigen::Index>(diagonals.size()));
    for (const auto& c : diagonals) pencil.slices.push_back(a * c.asDiagonal() * a.transpose());
    return pencil;
}

}  // namespace

TEST_CASE("slices contract the third mode") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    Tensor3 t(3);
    for (int l = 0; l < 3; ++l)
        for (int k = 0; k < 3; ++k)
            for (int j = 0; j < 3; ++j) t(j, k, l) = z(rng);
    Eigen::MatrixXd dirs(3, 2);
    dirs << 1, 0.5,
            0, -1,
            0, 2;
    const SlicePencil p = build_slices(t, dirs);
    REQUIRE(p.count() == 2);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            CHECK(p.slices[0](i, j) == doctest::Approx(t(i, j, 0)));
            CHECK(p.slices[1](i, j) == doctest::Approx(0.5 * t(i, j, 0) - t(i, j, 1) + 2 * t(i, j, 2)));
        }
    CHECK_THROWS_AS(build_slices(t, dirs.leftCols(1)), std::invalid_argument);
    CHECK_THROWS_AS(build_slices(t, Eigen::MatrixXd::Identity(2, 2)), std::invalid_argument);
}

TEST_CASE("off-diagonal criterion by hand") {
    SlicePencil p;
    p.z = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd b1(2, 2), b2(2, 2);
    b1 << 1, 2,
          2, 1;
    b2 << 3, 0,
          0, -1;
    p.slices = {b1, b2};
    CHECK(off_diagonal_criterion(p, Eigen::MatrixXd::Identity(2, 2)) == doctest::Approx(8.0));
    Eigen::MatrixXd v(2, 2);
    v << 1, 1,
         1, -1;
    // V b1 V^T = diag(6, -2), V b2 V^T = [[2, 4], [4, 2]]
    CHECK(off_diagonal_criterion(p, v) == doctest::Approx(32.0));
}

TEST_CASE("exactly diagonalizable pencil is diagonalized") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    for (int d : {2, 3, 5}) {
        Eigen::MatrixXd a(d, d);
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i) a(i, j) = z(rng);
        std::vector<Eigen::VectorXd> diags;
        for (int p = 0; p < d; ++p) {
            Eigen::VectorXd c(d);
            for (int i = 0; i < d; ++i) c[i] = z(rng);
            diags.push_back(c);
        }
        const SlicePencil pencil = pencil_from(a, diags);
        const JointDiagonalization jd = joint_diagonalize(pencil);
        CHECK(jd.converged);
        double scale = 0.0;
        for (const auto& b : pencil.slices) scale += b.squaredNorm();
        CHECK(jd.criterion <= 1e-20 * scale);
        for (std::size_t i = 1; i < jd.trace.size(); ++i) CHECK(jd.trace[i] <= jd.trace[i - 1]);
        for (int r = 0; r < d; ++r) CHECK(jd.v.row(r).norm() == doctest::Approx(1.0));
        // V A is a scaled permutation
        const Eigen::MatrixXd va = jd.v * a;
        for (int r = 0; r < d; ++r) {
            Eigen::Index col;
            const double peak = va.row(r).cwiseAbs().maxCoeff(&col);
            CHECK(va.row(r).norm() == doctest::Approx(peak).epsilon(1e-8));
        }
    }
}

TEST_CASE("rank deficient pencil recovers the spanned directions") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> z;
    const int d = 5, k = 2;
    Eigen::MatrixXd a(d, k);
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < d; ++i) a(i, j) = z(rng);
    SlicePencil pencil;
    pencil.z = Eigen::MatrixXd::Identity(d, d);
    for (int p = 0; p < d; ++p) {
        Eigen::VectorXd c(k);
        for (int i = 0; i < k; ++i) c[i] = z(rng);
        pencil.slices.push_back(a * c.asDiagonal() * a.transpose());
    }
    const JointDiagonalization jd = joint_diagonalize(pencil);
    double scale = 0.0;
    for (const auto& b : pencil.slices) scale += b.squaredNorm();
    CHECK(jd.criterion <= 1e-20 * scale);
}

TEST_CASE("directions from exact moments") {
    std::mt19937_64 rng(31);
    for (Link link : {Link::logit, Link::probit}) {
        for (auto [d, k] : {std::pair{2, 2}, std::pair{3, 2}, std::pair{4, 3}}) {
            const Parameters p = mixmom::testing::random_parameters(d, k, rng);
            const DirectionEstimate est = init_directions(theoretical_moments(p, link), k);
            REQUIRE(est.mu.cols() == k);
            const auto cos = matched_cosines(est.mu, p.beta);
            for (double c : cos) CHECK(c > 1.0 - 1e-8);
            for (int j = 0; j < k; ++j) {
                CHECK(est.mu.col(j).norm() == doctest::Approx(1.0));
                CHECK(est.signal[j] >= 0.0);
            }
        }
    }
}

TEST_CASE("sign fix follows the first moment") {
    Parameters p;
    p.omega = Eigen::Vector2d(0.5, 0.5);
    p.beta.resize(2, 2);
    p.beta << -1.0, 0.2,
              0.3, -0.9;
    p.b = Eigen::Vector2d(0.3, -0.2);
    const DirectionEstimate est = init_directions(theoretical_moments(p, Link::logit), 2);
    const auto cos = matched_cosines(est.mu, p.beta);
    CHECK(cos[0] > 0.999999);
    CHECK(cos[1] > 0.999999);
}

TEST_CASE("one dimensional directions are signs") {
    Parameters p;
    p.omega = Eigen::VectorXd::Ones(1);
    p.beta = Eigen::MatrixXd::Constant(1, 1, -1.5);
    p.b = Eigen::VectorXd::Constant(1, 0.4);
    const DirectionEstimate est = init_directions(theoretical_moments(p, Link::probit), 1);
    CHECK(est.mu(0, 0) == -1.0);
    p.beta(0, 0) = 0.7;
    CHECK(init_directions(theoretical_moments(p, Link::probit), 1).mu(0, 0) == 1.0);
}

TEST_CASE("pseudo-inverse satisfies the Penrose conditions") {
    Eigen::MatrixXd a(4, 3);
    a << 1, 2, 3,
         2, 4, 6,
         0, 1, 1,
         1, 0, 1;
    const Eigen::MatrixXd g = pinv(a);
    CHECK(g.rows() == 3);
    CHECK((a * g * a - a).norm() < 1e-12);
    CHECK((g * a * g - g).norm() < 1e-12);
    CHECK(((a * g).transpose() - a * g).norm() < 1e-12);
    CHECK(((g * a).transpose() - g * a).norm() < 1e-12);
}

TEST_CASE("reference pencils") {
    Tensor3 t(2);
    t(0, 0, 0) = 1.0;
    const SlicePencil p = build_slices(t, Eigen::MatrixXd::Identity(2, 2));
    CHECK(p.slices[0](0, 0) == 1.0);
    CHECK(p.slices[0].cwiseAbs().sum() == 1.0);
    CHECK(p.slices[1].cwiseAbs().sum() == 0.0);

    SlicePencil diag;
    diag.z = Eigen::MatrixXd::Identity(2, 2);
    diag.slices = {Eigen::Vector2d(2.0, -1.0).asDiagonal(), Eigen::Vector2d(0.5, 3.0).asDiagonal()};
    const JointDiagonalization jd = joint_diagonalize(diag);
    CHECK(jd.criterion == 0.0);
    CHECK((jd.v.cwiseAbs() * jd.v.cwiseAbs().transpose() - Eigen::Matrix2d::Identity()).norm() < 1e-12);
}

TEST_CASE("rank one third moment gives the direction with the sign of the first moment") {
    const Eigen::Vector3d mu = Eigen::Vector3d(1.0, -2.0, 0.5).normalized();
    Tensor3 t(3);
    for (int l = 0; l < 3; ++l)
        for (int k = 0; k < 3; ++k)
            for (int j = 0; j < 3; ++j) t(j, k, l) = -0.7 * mu[j] * mu[k] * mu[l];
    const Eigen::MatrixXd z = Eigen::MatrixXd::Identity(3, 3);
    const DirectionEstimate up = init_directions(t, 0.4 * mu, 1, z);
    CHECK(up.mu.col(0).dot(mu) == doctest::Approx(1.0));
    const DirectionEstimate down = init_directions(t, -0.4 * mu, 1, z);
    CHECK(down.mu.col(0).dot(mu) == doctest::Approx(-1.0));
}

TEST_CASE("builtin experiment pencils diagonalize") {
    for (int id : {1, 2, 3}) {
        const Parameters p = builtin_experiment(id, Link::logit).theta_star;
        const MomentSet ms = theoretical_moments(p, Link::logit);
        const DirectionEstimate est = init_directions(ms, p.components());
        CHECK(est.diagonalization.criterion < 1e-8);
        for (double c : matched_cosines(est.mu, p.beta)) CHECK(c > 0.999);
    }
}
