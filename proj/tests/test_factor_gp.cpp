#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dechbo/factor_gp.hpp"
#include "oracles.hpp"

using namespace dechbo;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double a : v) x[i++] = a;
    return x;
}

// Posterior variance of factor f if f itself had been observed at X with the
// same noise; the hypothetical per-factor quantity used in the regret analysis.
double per_factor_variance(const FactorKernel& f, const Eigen::MatrixXd& X, double nv, const Eigen::VectorXd& x) {
    const Eigen::MatrixXd K = factor_gram(f, X) + nv * Eigen::MatrixXd::Identity(X.rows(), X.rows());
    Eigen::VectorXd kx(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) kx[i] = f.eval_full(x, Eigen::VectorXd(X.row(i).transpose()));
    return f.eval_full(x, x) - kx.dot(K.inverse() * kx);
}

}  // namespace

TEST(Fit, EmptyObservationsGivePrior) {
    AdditiveKernel k({FactorKernel::isotropic({0}, 1.5, 0.3), FactorKernel::isotropic({0, 1}, 0.7, 0.4)}, 2);
    const auto post = fit(k, ObservationSet::empty(2, 0.1));
    const auto x = vec({0.2, 0.9});
    for (std::size_t f = 0; f < 2; ++f) {
        const auto mv = factor_mean_var(post, f, x);
        EXPECT_EQ(mv.mean, 0.0);
        EXPECT_EQ(mv.variance, k.factors[f].eval_full(x, x));
    }
    const auto o = objective_mean_var(post, x);
    EXPECT_EQ(o.mean, 0.0);
    EXPECT_DOUBLE_EQ(o.variance, k.eval(x, x));
}

TEST(Fit, OneObservationHandSolve) {
    AdditiveKernel k({FactorKernel::isotropic({0, 1}, 1.0, 0.5)}, 2);
    Eigen::MatrixXd X(1, 2);
    X << 0.3, 0.6;
    const double y1 = 1.7;
    const auto post = fit(k, ObservationSet(X, vec({y1}), 1.0));
    const auto mv = factor_mean_var(post, 0, vec({0.3, 0.6}));
    EXPECT_NEAR(mv.mean, y1 / 2.0, 1e-15);
    EXPECT_NEAR(mv.variance, 0.5, 1e-15);
}

TEST(Fit, WeightsReproduceObservations) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto k = oracle::random_kernel(rng, 4);
        const auto X = oracle::random_points(rng, 15, 4);
        const auto y = oracle::random_vector(rng, 15);
        const auto post = fit(k, ObservationSet(X, y, 0.05));
        const Eigen::VectorXd back = (gram(k, X) + 0.05 * Eigen::MatrixXd::Identity(15, 15)) * post.weights();
        EXPECT_LE((back - y).norm(), 1e-6 * y.norm());
    }
}

TEST(Fit, MatchesDenseInverseOracle) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        const int d = 5;
        const auto k = oracle::random_kernel(rng, d);
        std::uniform_int_distribution<int> nobs(1, 20);
        const int n = nobs(rng);
        const auto X = oracle::random_points(rng, n, d);
        const auto y = oracle::random_vector(rng, n);
        const auto post = fit(k, ObservationSet(X, y, 0.02));
        const oracle::Dense dense(k, X, y, 0.02);
        for (int q = 0; q < 5; ++q) {
            const Eigen::VectorXd x = oracle::random_points(rng, 1, d).row(0).transpose();
            double sum = 0.0;
            for (std::size_t f = 0; f < k.size(); ++f) {
                const auto mv = factor_mean_var(post, f, x);
                const auto [m, v] = dense.factor(k.factors[f], x);
                EXPECT_PRED3(oracle::rel_close, mv.mean, m, 1e-8);
                EXPECT_PRED3(oracle::rel_close, mv.variance, std::max(v, 0.0), 1e-8);
                sum += mv.mean;
            }
            const auto o = objective_mean_var(post, x);
            const auto [m, v] = dense.objective(k, x);
            EXPECT_PRED3(oracle::rel_close, o.mean, m, 1e-8);
            EXPECT_PRED3(oracle::rel_close, o.variance, std::max(v, 0.0), 1e-8);
            EXPECT_LT(std::abs(o.mean - sum), 1e-8);
        }
    }
}

TEST(FactorMeanVar, NearNoiseFreeInterpolation) {
    std::mt19937_64 rng(3);
    AdditiveKernel k({FactorKernel::isotropic({0, 1}, 1.0, 0.4), FactorKernel::isotropic({1, 2}, 0.6, 0.3),
                      FactorKernel::isotropic({2}, 0.4, 0.5)},
                     3);
    const auto X = oracle::random_points(rng, 6, 3);
    const auto y = oracle::random_vector(rng, 6);
    const auto post = fit(k, ObservationSet(X, y, 1e-10));
    const Eigen::VectorXd x1 = X.row(0).transpose();
    double sum = 0.0;
    for (std::size_t f = 0; f < k.size(); ++f) {
        const auto mv = factor_mean_var(post, f, x1);
        EXPECT_LE(mv.variance, k.factors[f].signal_variance + 1e-9);
        sum += mv.mean;
    }
    EXPECT_NEAR(sum, y[0], 1e-3);
}

TEST(FactorMeanVar, IdenticalFactorsAgree) {
    std::mt19937_64 rng(4);
    AdditiveKernel k({FactorKernel::isotropic({0, 2}, 0.8, 0.3), FactorKernel::isotropic({0, 2}, 0.8, 0.3)}, 3);
    const auto X = oracle::random_points(rng, 8, 3);
    const auto post = fit(k, ObservationSet(X, oracle::random_vector(rng, 8), 0.1));
    for (int q = 0; q < 10; ++q) {
        const Eigen::VectorXd x = oracle::random_points(rng, 1, 3).row(0).transpose();
        const auto a = factor_mean_var(post, 0, x), b = factor_mean_var(post, 1, x);
        EXPECT_DOUBLE_EQ(a.mean, b.mean);
        EXPECT_DOUBLE_EQ(a.variance, b.variance);
    }
}

TEST(FactorMeanVar, BadFactorIndexOrDimension) {
    AdditiveKernel k({FactorKernel::isotropic({0}, 1, 1)}, 2);
    const auto post = fit(k, ObservationSet::empty(2, 0.1));
    EXPECT_THROW(factor_mean_var(post, 1, vec({0.0, 0.0})), ContractViolation);
    EXPECT_THROW(factor_mean_var(post, 0, vec({0.0})), ContractViolation);
}

TEST(ObjectiveMeanVar, SingleFactorEqualsFactorPosterior) {
    std::mt19937_64 rng(5);
    AdditiveKernel k({FactorKernel::isotropic({0, 1, 2}, 1.2, 0.35)}, 3);
    const auto X = oracle::random_points(rng, 10, 3);
    const auto post = fit(k, ObservationSet(X, oracle::random_vector(rng, 10), 0.05));
    for (int q = 0; q < 10; ++q) {
        const Eigen::VectorXd x = oracle::random_points(rng, 1, 3).row(0).transpose();
        const auto a = objective_mean_var(post, x), b = factor_mean_var(post, 0, x);
        EXPECT_NEAR(a.mean, b.mean, 1e-14);
        EXPECT_NEAR(a.variance, b.variance, 1e-14);
    }
}

TEST(Invariants, VarianceNonIncreasingAsDataGrows) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const auto k = oracle::random_kernel(rng, 4);
        const auto X = oracle::random_points(rng, 20, 4);
        const auto y = oracle::random_vector(rng, 20);
        const auto probes = oracle::random_points(rng, 10, 4);
        Eigen::MatrixXd prev(static_cast<Eigen::Index>(k.size()), probes.rows());
        for (Eigen::Index n = 0; n <= 20; n += 4) {
            const auto post = fit(k, ObservationSet(X.topRows(n), y.head(n), 0.03));
            for (std::size_t f = 0; f < k.size(); ++f)
                for (Eigen::Index p = 0; p < probes.rows(); ++p) {
                    const double v = factor_mean_var(post, f, probes.row(p).transpose()).variance;
                    EXPECT_LE(v, k.factors[f].signal_variance + 1e-9);
                    if (n > 0) {
                        EXPECT_LE(std::sqrt(v), std::sqrt(prev(static_cast<Eigen::Index>(f), p)) + 1e-9);
                    }
                    prev(static_cast<Eigen::Index>(f), p) = v;
                }
        }
    }
}

TEST(Invariants, MeanAdditivityBatch) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const auto k = oracle::random_kernel(rng, 6);
        const auto post = fit(k, ObservationSet(oracle::random_points(rng, 12, 6), oracle::random_vector(rng, 12), 0.01));
        const auto Q = oracle::random_points(rng, 50, 6);
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(50);
        for (std::size_t f = 0; f < k.size(); ++f) {
            Eigen::MatrixXd R(50, k.factors[f].arity());
            for (Eigen::Index p = 0; p < 50; ++p) R.row(p) = k.factors[f].restrict(Q.row(p).transpose()).transpose();
            sum += post.factor_batch(f, R).mean;
        }
        EXPECT_LT((post.objective_batch(Q).mean - sum).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Jitter, DuplicatedPointsStillFactorize) {
    AdditiveKernel k({FactorKernel::isotropic({0}, 1.0, 0.5)}, 1);
    Eigen::MatrixXd X(4, 1);
    X << 0.5, 0.5, 0.5, 0.5;
    const auto post = fit(k, ObservationSet(X, vec({1.0, 1.1, 0.9, 1.0}), 1e-12));
    EXPECT_TRUE(std::isfinite(factor_mean_var(post, 0, vec({0.5})).mean));
}

TEST(Jitter, HopelessMatrixReportsAttemptedJitter) {
    Eigen::MatrixXd A(2, 2);
    A << 1.0, 0.0, 0.0, -1.0;
    Eigen::LLT<Eigen::MatrixXd> llt;
    try {
        detail::robust_cholesky(A, llt);
        FAIL() << "expected NumericalFailure";
    } catch (const NumericalFailure& e) {
        EXPECT_GT(e.attempted_jitter(), 0.0);
    }
}

TEST(Jitter, NegativeVarianceBeyondRoundoffIsAnError) {
    EXPECT_EQ(detail::clamp_variance(-5e-10), 0.0);
    EXPECT_EQ(detail::clamp_variance(0.25), 0.25);
    EXPECT_THROW(detail::clamp_variance(-1e-6), NumericalFailure);
}

TEST(ObservationSet, Validation) {
    EXPECT_THROW(ObservationSet(Eigen::MatrixXd(2, 1), Eigen::VectorXd(3), 0.1), ContractViolation);
    EXPECT_THROW(ObservationSet(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), 0.0), ContractViolation);
    auto obs = ObservationSet::empty(2, 0.1);
    obs.append(vec({0.1, 0.2}), 3.0);
    EXPECT_EQ(obs.size(), 1);
    EXPECT_THROW(obs.append(vec({0.1}), 1.0), ContractViolation);
}

// Observing f^I directly is at least as informative as observing the sum, so
// the hypothetical per-factor variance never exceeds the actual one.
TEST(PerFactorProbe, HypotheticalVarianceIsSmaller) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const auto k = oracle::random_kernel(rng, 3);
        const auto X = oracle::random_points(rng, 10, 3);
        const auto post = fit(k, ObservationSet(X, oracle::random_vector(rng, 10), 0.05));
        for (int q = 0; q < 5; ++q) {
            const Eigen::VectorXd x = oracle::random_points(rng, 1, 3).row(0).transpose();
            for (std::size_t f = 0; f < k.size(); ++f)
                EXPECT_LE(per_factor_variance(k.factors[f], X, 0.05, x), factor_mean_var(post, f, x).variance + 1e-9);
        }
    }
}

TEST(LogMarginalLikelihood, OneObservation) {
    AdditiveKernel k({FactorKernel::isotropic({0}, 0.7, 0.5), FactorKernel::isotropic({1}, 0.5, 0.5)}, 2);
    Eigen::MatrixXd X(1, 2);
    X << 0.4, 0.1;
    const double y1 = 0.8, v = 1.2, nv = 0.3;
    const auto post = fit(k, ObservationSet(X, vec({y1}), nv));
    const double expect = -0.5 * y1 * y1 / (v + nv) - 0.5 * std::log(v + nv) - 0.5 * std::log(2.0 * M_PI);
    EXPECT_NEAR(post.log_marginal_likelihood(), expect, 1e-14);
}
