#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "dechbo/acquisition.hpp"
#include "dechbo/bench.hpp"
#include "dechbo/factor_gp.hpp"
#include "dechbo/kernel.hpp"
#include "dechbo/maxsum.hpp"
#include "dechbo/random_graphs.hpp"

namespace dechbo::selftest {

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Benchmark constants under test; swap a table to build a negative control.
struct Fixtures {
    bench::ShekelConstants shekel;
    bench::HartmannConstants hartmann;
    bench::MichalewiczConstants michalewicz;
};

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

inline Check optimum_check(const std::string& name, bench::SyntheticObjective obj, double tol) {
    const double v = bench::evaluate(obj, *obj.known_argopt);
    const double err = std::abs(v - *obj.known_optimum);
    return {name, err <= tol, "f(x*) = " + fmt(v) + ", published " + fmt(*obj.known_optimum)};
}

inline AdditiveKernel random_kernel(std::mt19937_64& rng, int d) {
    std::uniform_real_distribution<double> u(0.3, 1.5);
    std::vector<FactorKernel> fs;
    fs.push_back(FactorKernel::isotropic({0, 1}, u(rng), u(rng)));
    fs.push_back(FactorKernel::isotropic({1, 2}, u(rng), u(rng)));
    fs.push_back(FactorKernel::isotropic({d - 1}, u(rng), u(rng)));
    return AdditiveKernel(std::move(fs), d);
}

}  // namespace detail

inline std::vector<Check> run(const Fixtures& fx = {}) {
    std::vector<Check> out;

    auto shekel = bench::shekel4();
    shekel.shekel = fx.shekel;
    auto hartmann = bench::hartmann6();
    hartmann.hartmann = fx.hartmann;
    auto michalewicz = bench::michalewicz10();
    michalewicz.michalewicz = fx.michalewicz;
    out.push_back(detail::optimum_check("benchmark optimum: shekel4", shekel, 1e-3));
    out.push_back(detail::optimum_check("benchmark optimum: hartmann6", hartmann, 1e-3));
    out.push_back(detail::optimum_check("benchmark optimum: michalewicz10", michalewicz, 1e-2));

    {
        BetaSchedule s;
        s.mode = BetaMode::DiscreteDomain;
        s.log_domain_size = std::log(100.0);
        s.num_factors = 3;
        s.delta = 0.1;
        const double b = beta(s, 1);
        const double expect = 2.0 * std::log(100.0 * 3.0 * (std::numbers::pi * std::numbers::pi / 6.0) / 0.1);
        // 2 log(100 * 3 * (pi^2 / 6) / 0.1) evaluated with 40-digit arithmetic
        constexpr double reference = 17.00813574024198418;
        out.push_back({"beta spot value (|D|=100, |U|=3, delta=0.1, t=1)",
                       std::abs(b - reference) < 1e-9 && std::abs(b - expect) < 1e-12, "beta_1 = " + detail::fmt(b)});
    }

    std::mt19937_64 rng(20240601);
    {
        bool ok = true;
        double worst = 0.0;
        for (int trial = 0; trial < 10 && ok; ++trial) {
            const int d = 4;
            const auto k = detail::random_kernel(rng, d);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            Eigen::MatrixXd X(8, d);
            for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
            Eigen::VectorXd y(8);
            for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = u(rng);
            const FactorPosterior post(k, ObservationSet(X, y, 0.05));
            const Eigen::MatrixXd Kinv = (gram(k, X) + 0.05 * Eigen::MatrixXd::Identity(8, 8)).inverse();
            Eigen::VectorXd x(d);
            for (Eigen::Index i = 0; i < d; ++i) x[i] = u(rng);
            double sum = 0.0;
            for (std::size_t f = 0; f < k.size(); ++f) {
                const auto mv = post.factor_mean_var(f, x);
                Eigen::VectorXd kx(8);
                for (int i = 0; i < 8; ++i) kx[i] = k.factors[f].eval_full(x, X.row(i).transpose());
                const double m = kx.dot(Kinv * y);
                const double v = k.factors[f].signal_variance - kx.dot(Kinv * kx);
                worst = std::max({worst, std::abs(mv.mean - m), std::abs(mv.variance - v)});
                sum += mv.mean;
            }
            worst = std::max(worst, std::abs(post.objective_mean_var(x).mean - sum));
            ok = worst < 1e-8;
        }
        out.push_back({"factor posterior matches dense inverse; mean additivity", ok, "max error " + detail::fmt(worst)});
    }

    {
        double worst = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            const auto k = detail::random_kernel(rng, 4);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            Eigen::MatrixXd X(12, 4);
            for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
            const Eigen::MatrixXd K = gram(k, X);
            const double asym = (K - K.transpose()).cwiseAbs().maxCoeff();
            const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K).eigenvalues().minCoeff();
            worst = std::max(worst, asym);
            if (lmin < -1e-9 * K.trace()) worst = std::max(worst, -lmin);
        }
        out.push_back({"additive Gram matrix symmetric PSD", worst <= 1e-12, "worst violation " + detail::fmt(worst)});
    }

    {
        int exact = 0;
        const int trials = 50;
        for (int trial = 0; trial < trials; ++trial) {
            const auto g = maxsum::random_tree_graph(rng);
            const auto rr = maxsum::run_rounds(g, {50, 0.0, 0.0, false});
            const auto a = maxsum::decode(g, rr.messages);
            if (g.value(a) == maxsum::brute_force(g).second) ++exact;
        }
        out.push_back({"max-sum tree exactness", exact == trials, std::to_string(exact) + "/" + std::to_string(trials) + " exact"});
    }

    {
        BetaSchedule s;
        s.dims = 3;
        s.num_factors = 2;
        s.box_edge = 1.0;
        s.delta = 0.1;
        const double expect = 3.0 * 4.0 * std::sqrt(std::log(2.0 * 2.0 / 0.1));
        bool mono = true;
        double prev = beta(s, 1);
        for (long t = 2; t <= 10000; ++t) {
            const double b = beta(s, t);
            mono = mono && b >= prev;
            prev = b;
        }
        const double tau = tau_formula(s, 2);
        out.push_back({"tau formula and beta monotonicity", mono && std::abs(tau - expect) < 1e-12 * expect,
                       "tau(2) = " + detail::fmt(tau)});
    }
    return out;
}

inline bool all_passed(const std::vector<Check>& checks) {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

inline void print(std::ostream& os, const std::vector<Check>& checks) {
    for (const auto& c : checks) os << (c.passed ? "PASS  " : "FAIL  ") << c.name << "  (" << c.detail << ")\n";
}

}  // namespace dechbo::selftest
