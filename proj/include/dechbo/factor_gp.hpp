#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "dechbo/error.hpp"
#include "dechbo/kernel.hpp"

namespace dechbo {

/// Noisy observations y_i = f(x_i) + eps of the whole objective.
struct ObservationSet {
    Eigen::MatrixXd X;  // rows are inputs
    Eigen::VectorXd y;
    double noise_variance = 1e-2;

    ObservationSet() = default;
    ObservationSet(Eigen::MatrixXd x, Eigen::VectorXd yy, double nv)
        : X(std::move(x)), y(std::move(yy)), noise_variance(nv) {
        validate();
    }

    static ObservationSet empty(int dims, double nv) {
        return ObservationSet(Eigen::MatrixXd(0, dims), Eigen::VectorXd(0), nv);
    }

    Eigen::Index size() const { return y.size(); }
    int dims() const { return static_cast<int>(X.cols()); }

    void validate() const {
        DECHBO_REQUIRE(X.rows() == y.size(), "observations: |X| must equal |y|");
        DECHBO_REQUIRE(noise_variance > 0.0, "observations: noise variance must be > 0");
    }

    void append(const Eigen::VectorXd& x, double value) {
        DECHBO_REQUIRE(x.size() == X.cols(), "observations: input dimension mismatch");
        X.conservativeResize(X.rows() + 1, Eigen::NoChange);
        X.row(X.rows() - 1) = x.transpose();
        y.conservativeResize(y.size() + 1);
        y[y.size() - 1] = value;
    }
};

struct MeanVar {
    double mean = 0.0;
    double variance = 0.0;
};

struct MeanVarBatch {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
};

namespace detail {

constexpr double kNegativeVarianceTolerance = 1e-9;
constexpr Eigen::Index kBatchChunk = 2048;

inline double clamp_variance(double v) {
    if (v < -kNegativeVarianceTolerance) {
        std::ostringstream os;
        os << "posterior variance " << v << " is negative beyond roundoff";
        throw NumericalFailure(os.str());
    }
    return v < 0.0 ? 0.0 : v;
}

/// Cholesky of A with escalating diagonal jitter. Returns the jitter used (0 if none).
inline double robust_cholesky(const Eigen::MatrixXd& A, Eigen::LLT<Eigen::MatrixXd>& llt) {
    llt.compute(A);
    if (llt.info() == Eigen::Success) return 0.0;
    const Eigen::Index n = A.rows();
    double jitter = 1e-10 * A.trace() / static_cast<double>(std::max<Eigen::Index>(n, 1));
    if (!(jitter > 0.0)) jitter = 1e-10;
    for (int attempt = 0; attempt < 6; ++attempt, jitter *= 10.0) {
        Eigen::MatrixXd B = A;
        B.diagonal().array() += jitter;
        llt.compute(B);
        if (llt.info() == Eigen::Success) return jitter;
    }
    throw NumericalFailure("Cholesky factorization failed after jitter escalation", jitter / 10.0);
}

}  // namespace detail

/// Posterior over every factor function given observations of their sum.
/// Immutable after construction; all queries are const.
class FactorPosterior {
public:
    FactorPosterior(AdditiveKernel kernel, ObservationSet obs)
        : kernel_(std::move(kernel)), obs_(std::move(obs)) {
        obs_.validate();
        DECHBO_REQUIRE(obs_.size() == 0 || obs_.dims() == kernel_.dims,
                       "posterior: observation dimension does not match kernel");
        restricted_.reserve(kernel_.size());
        for (const auto& f : kernel_.factors) {
            Eigen::MatrixXd R(obs_.size(), f.arity());
            for (Eigen::Index i = 0; i < obs_.size(); ++i) R.row(i) = f.restrict(obs_.X.row(i).transpose()).transpose();
            restricted_.push_back(std::move(R));
        }
        if (obs_.size() == 0) return;
        Eigen::MatrixXd A = gram(kernel_, obs_.X);
        A.diagonal().array() += obs_.noise_variance;
        jitter_ = detail::robust_cholesky(A, llt_);
        alpha_ = llt_.solve(obs_.y);
    }

    const AdditiveKernel& kernel() const { return kernel_; }
    const ObservationSet& observations() const { return obs_; }
    /// (K + sigma_n^2 I + jitter)^-1 y
    const Eigen::VectorXd& weights() const { return alpha_; }
    double jitter() const { return jitter_; }
    std::size_t num_factors() const { return kernel_.size(); }
    bool empty() const { return obs_.size() == 0; }

    /// Lower Cholesky factor of K + sigma_n^2 I (+ jitter).
    Eigen::MatrixXd cholesky_lower() const { return llt_.matrixL(); }

    /// Posterior mean and variance of factor `f` at a full input x.
    MeanVar factor_mean_var(std::size_t f, const Eigen::VectorXd& x) const {
        check_factor(f);
        DECHBO_REQUIRE(x.size() == kernel_.dims, "posterior: input dimension mismatch");
        const FactorKernel& k = kernel_.factors[f];
        Eigen::MatrixXd q = k.restrict(x).transpose();
        auto b = factor_batch(f, q);
        return {b.mean[0], b.variance[0]};
    }

    /// Batched factor posterior; rows of Q are inputs already restricted to the factor subset.
    MeanVarBatch factor_batch(std::size_t f, const Eigen::MatrixXd& Q) const {
        check_factor(f);
        const FactorKernel& k = kernel_.factors[f];
        DECHBO_REQUIRE(Q.cols() == k.arity(), "posterior: restricted query has wrong width");
        const Eigen::MatrixXd& R = restricted_[f];
        return batch(Q.rows(), k.signal_variance, [&](Eigen::Index p, Eigen::Index i) {
            return k.eval_sub(Q.row(p), R.row(i));
        });
    }

    /// Full GP posterior of the objective under the additive kernel.
    MeanVar objective_mean_var(const Eigen::VectorXd& x) const {
        DECHBO_REQUIRE(x.size() == kernel_.dims, "posterior: input dimension mismatch");
        Eigen::MatrixXd q = x.transpose();
        auto b = objective_batch(q);
        return {b.mean[0], b.variance[0]};
    }

    /// Batched objective posterior; rows of Q are full inputs.
    MeanVarBatch objective_batch(const Eigen::MatrixXd& Q) const {
        DECHBO_REQUIRE(Q.cols() == kernel_.dims, "posterior: query dimension mismatch");
        return batch(Q.rows(), kernel_.prior_variance(), [&](Eigen::Index p, Eigen::Index i) {
            return kernel_.eval(Q.row(p), obs_.X.row(i));
        });
    }

    /// Log marginal likelihood of the observations under the additive kernel.
    double log_marginal_likelihood() const {
        const auto n = static_cast<double>(obs_.size());
        if (obs_.size() == 0) return 0.0;
        const double quad = obs_.y.dot(alpha_);
        const double logdet = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
        return -0.5 * quad - 0.5 * logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
    }

private:
    void check_factor(std::size_t f) const {
        DECHBO_REQUIRE(f < kernel_.size(), "posterior: factor index out of range");
    }

    template <typename Cross>
    MeanVarBatch batch(Eigen::Index m, double prior_var, Cross cross) const {
        MeanVarBatch out;
        out.mean = Eigen::VectorXd::Zero(m);
        out.variance = Eigen::VectorXd::Constant(m, prior_var);
        const Eigen::Index t = obs_.size();
        if (t == 0 || m == 0) return out;
        for (Eigen::Index start = 0; start < m; start += detail::kBatchChunk) {
            const Eigen::Index c = std::min(detail::kBatchChunk, m - start);
            Eigen::MatrixXd Ks(t, c);
            for (Eigen::Index p = 0; p < c; ++p)
                for (Eigen::Index i = 0; i < t; ++i) Ks(i, p) = cross(start + p, i);
            out.mean.segment(start, c).noalias() = Ks.transpose() * alpha_;
            llt_.matrixL().solveInPlace(Ks);
            for (Eigen::Index p = 0; p < c; ++p)
                out.variance[start + p] = detail::clamp_variance(prior_var - Ks.col(p).squaredNorm());
        }
        return out;
    }

    AdditiveKernel kernel_;
    ObservationSet obs_;
    std::vector<Eigen::MatrixXd> restricted_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
    double jitter_ = 0.0;
};

inline FactorPosterior fit(AdditiveKernel kernel, ObservationSet obs) {
    return FactorPosterior(std::move(kernel), std::move(obs));
}

inline MeanVar factor_mean_var(const FactorPosterior& p, std::size_t f, const Eigen::VectorXd& x) {
    return p.factor_mean_var(f, x);
}

inline MeanVar objective_mean_var(const FactorPosterior& p, const Eigen::VectorXd& x) {
    return p.objective_mean_var(x);
}

}  // namespace dechbo
