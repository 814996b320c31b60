#pragma once

// Naive reference computations the library is checked against. They share
// no code with the implementation beyond the kernel value itself.

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "dechbo/kernel.hpp"

namespace oracle {

inline Eigen::MatrixXd random_points(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
    return X;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = u(rng);
    return y;
}

/// Random additive kernel with 1..4 factors of size 1..3 over d dims.
inline dechbo::AdditiveKernel random_kernel(std::mt19937_64& rng, int d) {
    std::uniform_int_distribution<int> nf(1, 4), sz(1, std::min(3, d));
    std::uniform_real_distribution<double> sv(0.3, 2.0), ls(0.15, 1.0);
    std::vector<dechbo::FactorKernel> fs;
    const int m = nf(rng);
    for (int f = 0; f < m; ++f) {
        std::vector<int> all(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) all[static_cast<std::size_t>(i)] = i;
        std::shuffle(all.begin(), all.end(), rng);
        dechbo::Subset s(all.begin(), all.begin() + sz(rng));
        std::sort(s.begin(), s.end());
        Eigen::VectorXd l(static_cast<Eigen::Index>(s.size()));
        for (Eigen::Index j = 0; j < l.size(); ++j) l[j] = ls(rng);
        fs.emplace_back(s, sv(rng), l);
    }
    return dechbo::AdditiveKernel(std::move(fs), d);
}

struct Dense {
    Eigen::MatrixXd Kinv;  // (K + sigma_n^2 I)^-1 by explicit inverse
    Eigen::MatrixXd X;
    Eigen::VectorXd y;

    Dense(const dechbo::AdditiveKernel& k, const Eigen::MatrixXd& x, const Eigen::VectorXd& yy, double nv) : X(x), y(yy) {
        const Eigen::Index n = X.rows();
        Eigen::MatrixXd K(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                double s = 0.0;
                for (const auto& f : k.factors) s += f.eval_full(X.row(i), X.row(j));
                K(i, j) = s;
            }
        Kinv = (K + nv * Eigen::MatrixXd::Identity(n, n)).inverse();
    }

    template <typename Cov>
    std::pair<double, double> posterior(const Eigen::VectorXd& x, Cov cov) const {
        Eigen::VectorXd kx(X.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i) kx[i] = cov(x, Eigen::VectorXd(X.row(i).transpose()));
        return {kx.dot(Kinv * y), cov(x, x) - kx.dot(Kinv * kx)};
    }

    std::pair<double, double> factor(const dechbo::FactorKernel& f, const Eigen::VectorXd& x) const {
        return posterior(x, [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return f.eval_full(a, b); });
    }

    std::pair<double, double> objective(const dechbo::AdditiveKernel& k, const Eigen::VectorXd& x) const {
        return posterior(x, [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
            double s = 0.0;
            for (const auto& f : k.factors) s += f.eval_full(a, b);
            return s;
        });
    }
};

inline bool rel_close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

}  // namespace oracle
