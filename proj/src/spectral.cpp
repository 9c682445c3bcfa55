#include "mixmom/spectral.hpp"

#include "mixmom/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mixmom {

namespace {

void normalize_rows(Eigen::MatrixXd& v) {
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        const double n = v.row(r).norm();
        if (n > 0.0) v.row(r) /= n;
    }
}

// Minimum-norm solution of the symmetric PSD system [a c; c e] x = rhs;
// eigenvalues at or below `floor` are treated as zero.
Eigen::Vector2d solve_pair(double a, double c, double e, const Eigen::Vector2d& rhs, double floor) {
    const double det = a * e - c * c;
    if (a > floor && e > floor && det > 1e-12 * a * e) {
        return Eigen::Vector2d((e * rhs[0] - c * rhs[1]) / det, (a * rhs[1] - c * rhs[0]) / det);
    }
    Eigen::Matrix2d m;
    m << a, c, c, e;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    Eigen::Vector2d x = Eigen::Vector2d::Zero();
    if (top <= floor) return x;
    for (int i = 0; i < 2; ++i) {
        const double ev = es.eigenvalues()[i];
        if (ev > floor && ev > 1e-12 * top) {
            const Eigen::Vector2d u = es.eigenvectors().col(i);
            x += u * (u.dot(rhs) / ev);
        }
    }
    return x;
}

Eigen::MatrixXd initial_diagonalizer(const SlicePencil& pencil) {
    const int d = pencil.dim();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
    for (const auto& b : pencil.slices) s.noalias() += b * b.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    // Rows are eigenvectors, largest eigenvalue first.
    return es.eigenvectors().rowwise().reverse().transpose();
}

}  // namespace

SlicePencil build_slices(const Tensor3& m3, const Eigen::MatrixXd& z) {
    const int d = m3.dim();
    if (z.rows() != d) throw std::invalid_argument("slice vectors must have the tensor dimension");
    if (z.cols() < 2) throw std::invalid_argument("joint diagonalization needs at least two slices");
    SlicePencil pencil;
    pencil.z = z;
    pencil.slices.reserve(z.cols());
    for (Eigen::Index p = 0; p < z.cols(); ++p) {
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(d, d);
        for (int s = 0; s < d; ++s) {
            const double w = z(s, p);
            if (w == 0.0) continue;
            for (int j = 0; j < d; ++j)
                for (int i = 0; i < d; ++i) b(i, j) += m3(i, j, s) * w;
        }
        pencil.slices.push_back(std::move(b));
    }
    return pencil;
}

double off_diagonal_criterion(const SlicePencil& pencil, const Eigen::MatrixXd& v) {
    double total = 0.0;
    for (const auto& b : pencil.slices) {
        const Eigen::MatrixXd c = v * b * v.transpose();
        for (Eigen::Index j = 0; j < c.cols(); ++j)
            for (Eigen::Index i = 0; i < c.rows(); ++i)
                if (i != j) total += c(i, j) * c(i, j);
    }
    return total;
}

JointDiagonalization joint_diagonalize(const SlicePencil& pencil, double tol, int max_iter) {
    const int d = pencil.dim();
    const int count = pencil.count();
    if (count < 2) throw std::invalid_argument("joint diagonalization needs at least two slices");
    for (const auto& b : pencil.slices) {
        if (b.rows() != d || b.cols() != d) throw std::invalid_argument("slices must be d x d");
    }

    JointDiagonalization result;
    Eigen::MatrixXd v = initial_diagonalizer(pencil);
    normalize_rows(v);
    double crit = off_diagonal_criterion(pencil, v);
    result.trace.push_back(crit);

    double scale = 0.0;
    for (const auto& b : pencil.slices) scale += b.squaredNorm();
    const double floor = 1e-32 * scale;

    std::vector<Eigen::MatrixXd> c(count);
    for (int it = 0; it < max_iter; ++it) {
        if (crit <= floor) {
            result.converged = true;
            break;
        }
        for (int p = 0; p < count; ++p) c[p] = v * pencil.slices[p] * v.transpose();

        // Rows whose diagonal energy is negligible against the strongest row
        // span the null space of a rank-deficient pencil; pairs among them
        // are left untouched.
        double energy = 0.0;
        for (int i = 0; i < d; ++i) {
            double zi = 0.0;
            for (int p = 0; p < count; ++p) zi += c[p](i, i) * c[p](i, i);
            energy = std::max(energy, zi);
        }
        const double floor = 1e-10 * energy;

        Eigen::MatrixXd e = Eigen::MatrixXd::Zero(d, d);
        for (int i = 0; i < d; ++i) {
            for (int j = i + 1; j < d; ++j) {
                double zii = 0.0, zjj = 0.0, zij = 0.0, yi = 0.0, yj = 0.0;
                for (int p = 0; p < count; ++p) {
                    const double di = c[p](i, i), dj = c[p](j, j), off = c[p](i, j);
                    zii += di * di;
                    zjj += dj * dj;
                    zij += di * dj;
                    yi += off * di;
                    yj += off * dj;
                }
                // minimize sum_p (C_ij + E_ij D_jj + E_ji D_ii)^2
                const Eigen::Vector2d x = solve_pair(zjj, zij, zii, Eigen::Vector2d(-yj, -yi), floor);
                e(i, j) = x[0];
                e(j, i) = x[1];
            }
        }
        const double en = e.norm();
        if (en == 0.0) {
            result.converged = true;
            break;
        }
        if (en > 0.9) e *= 0.9 / en;

        bool accepted = false;
        double step = 1.0;
        Eigen::MatrixXd candidate;
        double next = crit;
        for (int h = 0; h < 40; ++h, step *= 0.5) {
            candidate = (Eigen::MatrixXd::Identity(d, d) + step * e) * v;
            normalize_rows(candidate);
            next = off_diagonal_criterion(pencil, candidate);
            if (next <= crit) {
                accepted = true;
                break;
            }
        }
        result.iterations = it + 1;
        if (!accepted) {
            // No descent along the linearized update: stationary to working precision.
            result.converged = true;
            break;
        }
        const double decrease = crit > 0.0 ? (crit - next) / crit : 0.0;
        v = std::move(candidate);
        crit = next;
        result.trace.push_back(crit);
        if (decrease < tol) {
            result.converged = true;
            break;
        }
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(v);
    const auto& sv = svd.singularValues();
    if (!(sv[sv.size() - 1] > 1e-12 * sv[0])) {
        throw NumericalError("joint diagonalization produced a singular diagonalizer");
    }
    result.v = std::move(v);
    result.criterion = crit;
    return result;
}

Eigen::MatrixXd pinv(const Eigen::MatrixXd& a, double rcond) {
    if (a.size() == 0) return Eigen::MatrixXd(a.cols(), a.rows());
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cutoff = rcond * sv[0];
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > cutoff) inv[i] = 1.0 / sv[i];
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

DirectionEstimate init_directions(const Tensor3& m3, const Eigen::VectorXd& m1, int k, const Eigen::MatrixXd& z) {
    const int d = m3.dim();
    if (k < 1 || k > d) throw std::invalid_argument("number of components must satisfy 1 <= K <= d");
    if (m1.size() != d) throw std::invalid_argument("first moment must have the tensor dimension");

    DirectionEstimate out;
    if (d == 1) {
        // A single direction up to sign; nothing to diagonalize.
        out.diagonalization.v = Eigen::MatrixXd::Ones(1, 1);
        out.diagonalization.converged = true;
        out.diagonalization.trace = {0.0};
        out.mu = Eigen::MatrixXd::Ones(1, 1);
        out.diagonal_scores = Eigen::VectorXd::Constant(1, m3(0, 0, 0) * m3(0, 0, 0));
    } else {
        const SlicePencil pencil = build_slices(m3, z);
        out.diagonalization = joint_diagonalize(pencil);
        if (!out.diagonalization.converged) out.warnings.push_back("joint diagonalization did not converge");

        const Eigen::MatrixXd& v = out.diagonalization.v;
        Eigen::VectorXd scores = Eigen::VectorXd::Zero(d);
        for (const auto& b : pencil.slices) {
            const Eigen::MatrixXd c = v * b * v.transpose();
            scores += c.diagonal().cwiseAbs2();
        }
        std::vector<int> order(d);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });

        const Eigen::MatrixXd v_inv = v.fullPivLu().inverse();
        out.mu.resize(d, k);
        out.diagonal_scores.resize(k);
        for (int j = 0; j < k; ++j) {
            out.mu.col(j) = v_inv.col(order[j]).normalized();
            out.diagonal_scores[j] = scores[order[j]];
        }
    }

    out.signal = pinv(out.mu) * m1;
    for (int j = 0; j < k; ++j) {
        if (std::abs(out.signal[j]) < 1e-12) {
            out.warnings.push_back("degenerate first-moment signal for direction " + std::to_string(j) +
                                   "; sign left unresolved");
        } else if (out.signal[j] < 0.0) {
            out.mu.col(j) *= -1.0;
            out.signal[j] *= -1.0;
        }
    }
    return out;
}

DirectionEstimate init_directions(const MomentSet& ms, int k) {
    return init_directions(ms.m3, ms.m1, k, Eigen::MatrixXd::Identity(ms.dim(), ms.dim()));
}

}  // namespace mixmom
