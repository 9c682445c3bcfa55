#include "mixmom/moments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

namespace mixmom {

const SymmetricLayout& symmetric_layout(int d) {
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<SymmetricLayout>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[d];
    if (!slot) slot = std::make_unique<SymmetricLayout>(d);
    return *slot;
}

namespace {

const SymmetricLayout& layout_for(int d) { return symmetric_layout(d); }

// Product of beta entries over the first `order` slots of a multi-index.
double index_product(const std::array<int, 3>& idx, int order, const Eigen::MatrixXd& beta, int k) {
    double p = 1.0;
    for (int t = 0; t < order; ++t) p *= beta(idx[t], k);
    return p;
}

}  // namespace

Eigen::VectorXd Parameters::direction(int k) const {
    const double lambda = norm(k);
    if (lambda == 0.0) return Eigen::VectorXd::Zero(dim());
    return beta.col(k) / lambda;
}

void Parameters::validate() const {
    const int d = dim();
    const int k = components();
    if (d < 1 || k < 1) throw std::invalid_argument("parameters need d >= 1 and K >= 1");
    if (omega.size() != k || b.size() != k) {
        throw std::invalid_argument("omega and b must have one entry per component (K = " + std::to_string(k) + ")");
    }
    if (!omega.allFinite() || !beta.allFinite() || !b.allFinite()) {
        throw std::invalid_argument("parameters must be finite");
    }
    if ((omega.array() < 0.0).any()) throw std::invalid_argument("mixture weights must be non-negative");
    if (std::abs(omega.sum() - 1.0) > 1e-10) throw std::invalid_argument("mixture weights must sum to one");
}

Eigen::VectorXd Parameters::to_vector() const {
    const int d = dim();
    const int k = components();
    Eigen::VectorXd theta(parameter_count(d, k));
    theta.head(k - 1) = omega.head(k - 1);
    theta.segment(k - 1, k) = b;
    theta.tail(static_cast<Eigen::Index>(d) * k) = Eigen::Map<const Eigen::VectorXd>(beta.data(), beta.size());
    return theta;
}

Parameters Parameters::from_vector(const Eigen::VectorXd& theta, int d, int k) {
    if (theta.size() != parameter_count(d, k)) throw std::invalid_argument("parameter vector has the wrong length");
    Parameters p;
    p.omega.resize(k);
    p.omega.head(k - 1) = theta.head(k - 1);
    p.omega[k - 1] = 1.0 - theta.head(k - 1).sum();
    p.b = theta.segment(k - 1, k);
    p.beta = Eigen::Map<const Eigen::MatrixXd>(theta.tail(static_cast<Eigen::Index>(d) * k).data(), d, k);
    return p;
}

int parameter_count(int d, int k) { return k * (2 + d) - 1; }

void Dataset::validate() const {
    if (x.rows() < 1) throw std::invalid_argument("dataset is empty");
    if (x.cols() < 1) throw std::invalid_argument("dataset needs at least one covariate");
    if (static_cast<Eigen::Index>(y.size()) != x.rows()) {
        throw std::invalid_argument("covariate rows and responses differ in length");
    }
    for (auto v : y) {
        if (v > 1) throw std::invalid_argument("responses must be 0 or 1");
    }
    if (!x.allFinite()) throw std::invalid_argument("covariates must be finite");
}

MomentSet MomentSet::zeros(int d) {
    return {Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d), Tensor3(d)};
}

int flat_size(int d) { return d + d * d + d * d * d; }

SymmetricLayout::SymmetricLayout(int d) : d_(d) {
    if (d < 1) throw std::invalid_argument("layout dimension must be positive");
    std::vector<int> idx2(static_cast<std::size_t>(d) * d, -1);
    std::vector<int> idx3(static_cast<std::size_t>(d) * d * d, -1);
    for (int a = 0; a < d; ++a) multi_index_.push_back({a, -1, -1});
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            idx2[a * d + b] = static_cast<int>(multi_index_.size());
            multi_index_.push_back({a, b, -1});
        }
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b)
            for (int c = b; c < d; ++c) {
                idx3[(a * d + b) * d + c] = static_cast<int>(multi_index_.size());
                multi_index_.push_back({a, b, c});
            }

    unique_of_flat_.resize(mixmom::flat_size(d));
    for (int j = 0; j < d; ++j) unique_of_flat_[j] = j;
    for (int k = 0; k < d; ++k)
        for (int j = 0; j < d; ++j) {
            const int lo = std::min(j, k), hi = std::max(j, k);
            unique_of_flat_[d + k * d + j] = idx2[lo * d + hi];
        }
    for (int l = 0; l < d; ++l)
        for (int k = 0; k < d; ++k)
            for (int j = 0; j < d; ++j) {
                std::array<int, 3> s{j, k, l};
                std::sort(s.begin(), s.end());
                unique_of_flat_[d + d * d + (l * d + k) * d + j] = idx3[(s[0] * d + s[1]) * d + s[2]];
            }
}

int SymmetricLayout::order(int unique) const {
    const auto& m = multi_index_[unique];
    return m[2] >= 0 ? 3 : (m[1] >= 0 ? 2 : 1);
}

void SymmetricLayout::features(const double* x, double* out) const {
    const int u = unique_size();
    for (int i = 0; i < u; ++i) {
        const auto& m = multi_index_[i];
        if (m[1] < 0) {
            out[i] = x[m[0]];
        } else if (m[2] < 0) {
            out[i] = x[m[0]] * x[m[1]] - (m[0] == m[1] ? 1.0 : 0.0);
        } else {
            const int a = m[0], b = m[1], c = m[2];
            double v = x[a] * x[b] * x[c];
            if (b == c) v -= x[a];
            if (a == c) v -= x[b];
            if (a == b) v -= x[c];
            out[i] = v;
        }
    }
}

Eigen::VectorXd SymmetricLayout::expand(const Eigen::VectorXd& unique) const {
    Eigen::VectorXd flat(flat_size());
    for (int i = 0; i < flat_size(); ++i) flat[i] = unique[unique_of_flat_[i]];
    return flat;
}

Eigen::MatrixXd SymmetricLayout::expand_rows(const Eigen::MatrixXd& unique) const {
    Eigen::MatrixXd out(flat_size(), unique.cols());
    for (int i = 0; i < flat_size(); ++i) out.row(i) = unique.row(unique_of_flat_[i]);
    return out;
}

Eigen::MatrixXd SymmetricLayout::expand_square(const Eigen::MatrixXd& unique) const {
    const int m = flat_size();
    Eigen::MatrixXd out(m, m);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) out(i, j) = unique(unique_of_flat_[i], unique_of_flat_[j]);
    return out;
}

Eigen::MatrixXd SymmetricLayout::asymmetric_projector() const {
    const int m = flat_size();
    std::vector<int> orbit_size(unique_size(), 0);
    for (int i = 0; i < m; ++i) ++orbit_size[unique_of_flat_[i]];
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (unique_of_flat_[i] == unique_of_flat_[j]) p(i, j) -= 1.0 / orbit_size[unique_of_flat_[i]];
    return p;
}

MomentSet empirical_moments(const Dataset& data) {
    data.validate();
    const int d = data.dim();
    const auto& layout = layout_for(d);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(layout.unique_size());
    Eigen::VectorXd f(layout.unique_size());
    for (int i = 0; i < data.size(); ++i) {
        if (data.y[i] == 0) continue;
        layout.features(data.x.row(i).data(), f.data());
        acc += f;
    }
    acc /= static_cast<double>(data.size());
    return unflatten(layout.expand(acc), d);
}

namespace {

Eigen::VectorXd theoretical_unique(const Parameters& theta, Link link, const SymmetricLayout& layout) {
    const int k_count = theta.components();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(layout.unique_size());
    for (int k = 0; k < k_count; ++k) {
        const auto e = expectations(link, theta.norm(k), theta.b[k]);
        for (int u = 0; u < layout.unique_size(); ++u) {
            const int o = layout.order(u);
            out[u] += theta.omega[k] * e[o] * index_product(layout.multi_index(u), o, theta.beta, k);
        }
    }
    return out;
}

}  // namespace

MomentSet theoretical_moments(const Parameters& theta, Link link) {
    theta.validate();
    const auto& layout = layout_for(theta.dim());
    return unflatten(layout.expand(theoretical_unique(theta, link, layout)), theta.dim());
}

Eigen::VectorXd flatten(const MomentSet& ms) {
    const int d = ms.dim();
    Eigen::VectorXd flat(flat_size(d));
    flat.head(d) = ms.m1;
    flat.segment(d, d * d) = Eigen::Map<const Eigen::VectorXd>(ms.m2.data(), d * d);
    flat.tail(d * d * d) = ms.m3.data();
    return flat;
}

MomentSet unflatten(const Eigen::VectorXd& flat, int d) {
    if (flat.size() != flat_size(d)) throw std::invalid_argument("flat moment vector has the wrong length");
    MomentSet ms = MomentSet::zeros(d);
    ms.m1 = flat.head(d);
    ms.m2 = Eigen::Map<const Eigen::MatrixXd>(flat.segment(d, d * d).data(), d, d);
    ms.m3.data() = flat.tail(d * d * d);
    return ms;
}

Eigen::VectorXd residual_vector(const MomentSet& data_ms, const Parameters& theta, Link link) {
    theta.validate();
    if (data_ms.dim() != theta.dim()) throw std::invalid_argument("moment and parameter dimensions differ");
    const auto& layout = layout_for(theta.dim());
    return flatten(data_ms) - layout.expand(theoretical_unique(theta, link, layout));
}

Eigen::MatrixXd moment_jacobian(const Parameters& theta, Link link) {
    theta.validate();
    const int d = theta.dim();
    const int kc = theta.components();
    const auto& layout = layout_for(d);
    const int nu = layout.unique_size();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(nu, parameter_count(d, kc));

    std::vector<std::array<double, kMaxDerivative + 1>> e(kc);
    for (int k = 0; k < kc; ++k) e[k] = expectations(link, theta.norm(k), theta.b[k]);

    const int b_col = kc - 1;
    const int beta_col = 2 * kc - 1;
    for (int u = 0; u < nu; ++u) {
        const int o = layout.order(u);
        const auto& idx = layout.multi_index(u);
        const double last = e[kc - 1][o] * index_product(idx, o, theta.beta, kc - 1);
        for (int k = 0; k < kc; ++k) {
            const double w = theta.omega[k];
            const double prod = index_product(idx, o, theta.beta, k);
            if (k < kc - 1) jac(u, k) = e[k][o] * prod - last;
            jac(u, b_col + k) = w * e[k][o + 1] * prod;
            // Stein term: d E[g^(o)(<beta, X> + b)] / d beta_m = beta_m E[g^(o+2)].
            for (int m = 0; m < d; ++m) jac(u, beta_col + k * d + m) = w * e[k][o + 2] * theta.beta(m, k) * prod;
            // Product-rule term from beta^{(o)}.
            for (int t = 0; t < o; ++t) {
                double rest = 1.0;
                for (int s = 0; s < o; ++s)
                    if (s != t) rest *= theta.beta(idx[s], k);
                jac(u, beta_col + k * d + idx[t]) += w * e[k][o] * rest;
            }
        }
    }
    return layout.expand_rows(jac);
}

SampleMomentStats sample_moment_stats(const Dataset& data) {
    data.validate();
    const int d = data.dim();
    const auto& layout = layout_for(d);
    const int nu = layout.unique_size();
    constexpr int kChunk = 512;

    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(nu, nu);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(nu);
    RowMatrix block(kChunk, nu);
    int filled = 0;
    auto flush = [&]() {
        if (filled == 0) return;
        second.selfadjointView<Eigen::Lower>().rankUpdate(block.topRows(filled).transpose());
        filled = 0;
    };
    for (int i = 0; i < data.size(); ++i) {
        if (data.y[i] == 0) continue;
        layout.features(data.x.row(i).data(), block.row(filled).data());
        sum += block.row(filled).transpose();
        if (++filled == kChunk) flush();
    }
    flush();
    second.triangularView<Eigen::StrictlyUpper>() = second.transpose();

    const double n = data.size();
    SampleMomentStats stats;
    stats.n = data.size();
    stats.mean = layout.expand(Eigen::VectorXd(sum / n));
    stats.second = layout.expand_square(second / n);
    return stats;
}

Eigen::VectorXd sample_moment_variance(const Dataset& data) {
    data.validate();
    const auto& layout = layout_for(data.dim());
    const int nu = layout.unique_size();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(nu);
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(nu);
    Eigen::VectorXd f(nu);
    for (int i = 0; i < data.size(); ++i) {
        if (data.y[i] == 0) continue;
        layout.features(data.x.row(i).data(), f.data());
        sum += f;
        sumsq += f.cwiseProduct(f);
    }
    const double n = data.size();
    const Eigen::VectorXd mean = sum / n;
    Eigen::VectorXd var = (sumsq / n - mean.cwiseProduct(mean)).cwiseMax(0.0);
    if (data.size() > 1) var *= n / (n - 1.0);
    return layout.expand(var);
}

}  // namespace mixmom
