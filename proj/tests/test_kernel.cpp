#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "dechbo/kernel.hpp"

using namespace dechbo;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double a : v) x[i++] = a;
    return x;
}

Eigen::MatrixXd random_points(std::mt19937_64& rng, int n, int d) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
    return X;
}

// Written out by hand from the closed form, independent of FactorKernel.
double se_oracle(double sv, const std::vector<double>& ls, const std::vector<double>& u, const std::vector<double>& v) {
    double q = 0.0;
    for (std::size_t j = 0; j < ls.size(); ++j) q += std::pow((u[j] - v[j]) / ls[j], 2);
    return sv * std::exp(-0.5 * q);
}

}  // namespace

TEST(FactorKernel, ZeroDistanceGivesSignalVariance) {
    auto k = FactorKernel::isotropic({0, 2}, 1.0, 0.3);
    EXPECT_DOUBLE_EQ(eval_factor(k, vec({0.4, 0.9}), vec({0.4, 0.9})), 1.0);
}

TEST(FactorKernel, UnitDistanceClosedForm) {
    FactorKernel k({0}, 2.0, vec({1.0}));
    EXPECT_NEAR(eval_factor(k, vec({0.0}), vec({1.0})), 2.0 * std::exp(-0.5), 1e-15);
    EXPECT_NEAR(eval_factor(k, vec({0.0}), vec({1.0})), 1.21306, 1e-5);
}

TEST(FactorKernel, ExtremeDistanceIsNegligible) {
    FactorKernel k({0, 1}, 3.0, vec({0.5, 0.7}));
    const double v = eval_factor(k, vec({0.0, 0.0}), vec({3.0 * 0.5 * 10.0, 0.0}));
    EXPECT_LT(v, 1e-15 * 3.0);
    EXPECT_GE(v, 0.0);
}

TEST(FactorKernel, MatchesHandOracleAndIsSymmetric) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0), pos(0.1, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::vector<double> ls{pos(rng), pos(rng), pos(rng)};
        const double sv = pos(rng);
        FactorKernel k({1, 3, 4}, sv, vec({ls[0], ls[1], ls[2]}));
        const std::vector<double> a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)};
        const auto ea = vec({a[0], a[1], a[2]}), eb = vec({b[0], b[1], b[2]});
        const double v = eval_factor(k, ea, eb);
        EXPECT_NEAR(v, se_oracle(sv, ls, a, b), 1e-14);
        EXPECT_EQ(v, eval_factor(k, eb, ea));
        EXPECT_GT(v, 0.0);
        EXPECT_LE(v, sv);
    }
}

TEST(FactorKernel, RejectsBadDefinitions) {
    EXPECT_THROW(FactorKernel({}, 1.0, Eigen::VectorXd()), ContractViolation);
    EXPECT_THROW(FactorKernel({1, 0}, 1.0, vec({1, 1})), ContractViolation);
    EXPECT_THROW(FactorKernel({0, 1}, 1.0, vec({1})), ContractViolation);
    EXPECT_THROW(FactorKernel({0}, 0.0, vec({1})), ContractViolation);
    EXPECT_THROW(FactorKernel({0}, 1.0, vec({-1})), ContractViolation);
    EXPECT_THROW(AdditiveKernel({FactorKernel::isotropic({0, 5}, 1, 1)}, 3), ContractViolation);
}

TEST(FactorKernel, SubVectorLengthMismatchIsContractViolation) {
    auto k = FactorKernel::isotropic({0, 1}, 1.0, 1.0);
    EXPECT_THROW(eval_factor(k, vec({0.0}), vec({0.0, 1.0})), ContractViolation);
}

TEST(FactorKernel, DependsOnlyOnItsSubset) {
    auto k = FactorKernel::isotropic({1, 3}, 1.3, 0.4);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd x(5), y(5);
        for (int i = 0; i < 5; ++i) x[i] = u(rng), y[i] = u(rng);
        const double before = k.eval_full(x, y);
        x[0] += 10.0;
        y[2] -= 3.0;
        y[4] = u(rng);
        EXPECT_EQ(k.eval_full(x, y), before);
    }
}

TEST(AdditiveKernel, SingleFullFactorEqualsFactorKernel) {
    auto f = FactorKernel::isotropic({0, 1, 2}, 1.7, 0.6);
    AdditiveKernel k({f}, 3);
    const auto x = vec({0.1, 0.5, 0.9}), y = vec({0.3, 0.2, 0.4});
    EXPECT_EQ(eval_additive(k, x, y), eval_factor(f, x, y));
}

TEST(AdditiveKernel, DisjointUnitFactorsAtZeroDistanceSumToTwo) {
    AdditiveKernel k({FactorKernel::isotropic({0}, 1, 1), FactorKernel::isotropic({1}, 1, 1)}, 2);
    const auto x = vec({0.3, 0.8});
    EXPECT_DOUBLE_EQ(eval_additive(k, x, x), 2.0);
}

TEST(AdditiveKernel, OverlappingFactorsMatchIndependentSum) {
    const std::vector<double> la{0.3, 0.5}, lb{0.7, 0.2};
    AdditiveKernel k({FactorKernel({1, 2}, 0.8, vec({la[0], la[1]})), FactorKernel({2, 3}, 1.4, vec({lb[0], lb[1]}))}, 4);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(4), y(4);
        for (int i = 0; i < 4; ++i) x[static_cast<std::size_t>(i)] = u(rng), y[static_cast<std::size_t>(i)] = u(rng);
        const double oracle = se_oracle(0.8, la, {x[1], x[2]}, {y[1], y[2]}) + se_oracle(1.4, lb, {x[2], x[3]}, {y[2], y[3]});
        const auto ex = vec({x[0], x[1], x[2], x[3]}), ey = vec({y[0], y[1], y[2], y[3]});
        EXPECT_NEAR(eval_additive(k, ex, ey), oracle, 1e-15);
        EXPECT_EQ(eval_additive(k, ex, ey), eval_additive(k, ey, ex));
    }
}

TEST(AdditiveKernel, InputDimensionMismatch) {
    AdditiveKernel k({FactorKernel::isotropic({0}, 1, 1)}, 2);
    EXPECT_THROW(eval_additive(k, vec({0.0}), vec({0.0, 1.0})), ContractViolation);
}

TEST(Gram, SinglePointEqualsNumberOfUnitFactors) {
    AdditiveKernel k({FactorKernel::isotropic({0}, 1, 1), FactorKernel::isotropic({0, 1}, 1, 1), FactorKernel::isotropic({1}, 1, 1)}, 2);
    Eigen::MatrixXd X(1, 2);
    X << 0.2, 0.7;
    const auto K = gram(k, X);
    ASSERT_EQ(K.rows(), 1);
    EXPECT_DOUBLE_EQ(K(0, 0), 3.0);
}

TEST(Gram, DuplicatedPointsAreRankDeficientButSolvableWithNoise) {
    AdditiveKernel k({FactorKernel::isotropic({0, 1}, 1, 0.5)}, 2);
    Eigen::MatrixXd X(3, 2);
    X << 0.1, 0.2, 0.1, 0.2, 0.6, 0.3;
    const Eigen::MatrixXd K = gram(k, X);
    EXPECT_NEAR(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K).eigenvalues().minCoeff(), 0.0, 1e-12);
    Eigen::LLT<Eigen::MatrixXd> llt(K + 1e-4 * Eigen::MatrixXd::Identity(3, 3));
    EXPECT_EQ(llt.info(), Eigen::Success);
}

TEST(Gram, RandomSetsAreSymmetricPsd) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        AdditiveKernel k({FactorKernel::isotropic({0, 1}, 0.5, 0.3), FactorKernel::isotropic({1, 2}, 1.5, 0.2),
                          FactorKernel::isotropic({3}, 1.0, 0.7)},
                         4);
        const auto X = random_points(rng, 5, 4);
        const Eigen::MatrixXd K = gram(k, X);
        EXPECT_EQ((K - K.transpose()).cwiseAbs().maxCoeff(), 0.0);
        const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K).eigenvalues().minCoeff();
        EXPECT_GE(lmin, -1e-9);
        EXPECT_GE(lmin, -1e-9 * K.trace());
    }
}

TEST(Gram, EqualsSumOfFactorGrams) {
    std::mt19937_64 rng(9);
    AdditiveKernel k({FactorKernel::isotropic({0, 1}, 0.5, 0.3), FactorKernel::isotropic({1, 2}, 1.5, 0.2)}, 3);
    const auto X = random_points(rng, 7, 3);
    const Eigen::MatrixXd K = gram(k, X);
    const Eigen::MatrixXd S = factor_gram(k.factors[0], X) + factor_gram(k.factors[1], X);
    EXPECT_LE((K - S).cwiseAbs().maxCoeff(), 1e-15);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) EXPECT_NEAR(K(i, j), k.eval(X.row(i), X.row(j)), 1e-15);
}
