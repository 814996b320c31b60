#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dechbo/error.hpp"

namespace dechbo {

/// Ordered, strictly increasing list of 0-based input dimensions.
using Subset = std::vector<int>;

enum class KernelKind { SquaredExponential };

inline bool is_valid_subset(const Subset& s, int dims) {
    if (s.empty()) return false;
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (s[j] < 0 || s[j] >= dims) return false;
        if (j > 0 && s[j] <= s[j - 1]) return false;
    }
    return true;
}

/// Squared-exponential covariance restricted to the coordinates in `subset`,
/// with one lengthscale per restricted coordinate.
struct FactorKernel {
    Subset subset;
    KernelKind kind = KernelKind::SquaredExponential;
    double signal_variance = 1.0;
    Eigen::VectorXd lengthscales;

    FactorKernel() = default;
    FactorKernel(Subset s, double sv, Eigen::VectorXd ls)
        : subset(std::move(s)), signal_variance(sv), lengthscales(std::move(ls)) {
        validate();
    }

    /// Isotropic convenience: same lengthscale on every restricted coordinate.
    static FactorKernel isotropic(Subset s, double sv, double ls) {
        Eigen::VectorXd l = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(s.size()), ls);
        return FactorKernel(std::move(s), sv, std::move(l));
    }

    int arity() const { return static_cast<int>(subset.size()); }

    void validate(int dims = -1) const {
        DECHBO_REQUIRE(!subset.empty(), "factor kernel: empty subset");
        for (std::size_t j = 0; j < subset.size(); ++j) {
            DECHBO_REQUIRE(subset[j] >= 0, "factor kernel: negative index");
            DECHBO_REQUIRE(dims < 0 || subset[j] < dims, "factor kernel: index out of range");
            DECHBO_REQUIRE(j == 0 || subset[j] > subset[j - 1],
                           "factor kernel: subset must be strictly increasing");
        }
        DECHBO_REQUIRE(lengthscales.size() == static_cast<Eigen::Index>(subset.size()),
                       "factor kernel: one lengthscale per subset index required");
        DECHBO_REQUIRE((lengthscales.array() > 0.0).all(), "factor kernel: lengthscales must be > 0");
        DECHBO_REQUIRE(signal_variance > 0.0, "factor kernel: signal variance must be > 0");
    }

    /// Covariance of two already-restricted sub-vectors (length |subset|).
    template <typename A, typename B>
    double eval_sub(const Eigen::MatrixBase<A>& u, const Eigen::MatrixBase<B>& v) const {
        DECHBO_REQUIRE(u.size() == lengthscales.size() && v.size() == lengthscales.size(),
                       "factor kernel: sub-vector length mismatch");
        double q = 0.0;
        for (Eigen::Index j = 0; j < lengthscales.size(); ++j) {
            const double z = (u[j] - v[j]) / lengthscales[j];
            q += z * z;
        }
        return signal_variance * std::exp(-0.5 * q);
    }

    /// Covariance of two full d-dimensional inputs, reading only coordinates in `subset`.
    template <typename A, typename B>
    double eval_full(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& xp) const {
        double q = 0.0;
        for (std::size_t j = 0; j < subset.size(); ++j) {
            const int i = subset[j];
            DECHBO_REQUIRE(i < x.size() && i < xp.size(), "factor kernel: input too short");
            const double z = (x[i] - xp[i]) / lengthscales[static_cast<Eigen::Index>(j)];
            q += z * z;
        }
        return signal_variance * std::exp(-0.5 * q);
    }

    /// Restrict a full input to this factor's coordinates.
    template <typename A>
    Eigen::VectorXd restrict(const Eigen::MatrixBase<A>& x) const {
        Eigen::VectorXd out(static_cast<Eigen::Index>(subset.size()));
        for (std::size_t j = 0; j < subset.size(); ++j) out[static_cast<Eigen::Index>(j)] = x[subset[j]];
        return out;
    }
};

/// sigma_0(x, x') = sum over factors of the factor kernels.
struct AdditiveKernel {
    std::vector<FactorKernel> factors;
    int dims = 0;

    AdditiveKernel() = default;
    AdditiveKernel(std::vector<FactorKernel> f, int d) : factors(std::move(f)), dims(d) {
        DECHBO_REQUIRE(d >= 1, "additive kernel: dims must be >= 1");
        for (const auto& k : factors) k.validate(d);
    }

    std::size_t size() const { return factors.size(); }

    template <typename A, typename B>
    double eval(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& xp) const {
        DECHBO_REQUIRE(x.size() == dims && xp.size() == dims, "additive kernel: input dimension mismatch");
        double s = 0.0;
        for (const auto& k : factors) s += k.eval_full(x, xp);
        return s;
    }

    /// Prior variance sigma_0(x, x); constant for stationary kernels.
    double prior_variance() const {
        double s = 0.0;
        for (const auto& k : factors) s += k.signal_variance;
        return s;
    }
};

inline double eval_factor(const FactorKernel& k, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    return k.eval_sub(u, v);
}

inline double eval_additive(const AdditiveKernel& k, const Eigen::VectorXd& x, const Eigen::VectorXd& xp) {
    return k.eval(x, xp);
}

/// Gram matrix of one factor kernel over the rows of X (rows are full inputs).
inline Eigen::MatrixXd factor_gram(const FactorKernel& k, const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        K(i, i) = k.eval_full(X.row(i), X.row(i));
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = k.eval_full(X.row(i), X.row(j));
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    return K;
}

/// Gram matrix of the additive kernel over the rows of X.
inline Eigen::MatrixXd gram(const AdditiveKernel& k, const Eigen::MatrixXd& X) {
    DECHBO_REQUIRE(X.rows() == 0 || X.cols() == k.dims, "gram: input dimension mismatch");
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(X.rows(), X.rows());
    for (const auto& f : k.factors) K += factor_gram(f, X);
    return K;
}

}  // namespace dechbo
