#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "dechbo/bench.hpp"
#include "dechbo/decomposition.hpp"
#include "dechbo/error.hpp"
#include "dechbo/factor_gp.hpp"
#include "dechbo/kernel.hpp"

namespace dechbo {

/// r = f(x*) - f(x) on the maximization form of the objective.
inline double instantaneous_regret(const bench::SyntheticObjective& obj, const Eigen::VectorXd& x) {
    const auto opt = obj.maximization_optimum();
    DECHBO_REQUIRE(opt.has_value(), "regret: objective has no known optimum");
    return *opt - obj.maximization_value(x);
}

/// Running sums R_t = r_1 + ... + r_t.
inline std::vector<double> cumulative_regret(const std::vector<double>& r) {
    std::vector<double> R(r.size());
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) R[i] = (s += r[i]);
    return R;
}

struct InformationGain {
    std::vector<double> per_factor;
    double total = 0.0;
};

/// 1/2 log det(I + K^I / sigma_n^2) for each factor kernel over the realized
/// query set, and their sum.
inline InformationGain information_gain(const AdditiveKernel& kernel, const Eigen::MatrixXd& queries, double noise_variance) {
    DECHBO_REQUIRE(queries.rows() > 0, "information_gain: needs queries");
    DECHBO_REQUIRE(noise_variance > 0.0, "information_gain: noise variance must be > 0");
    DECHBO_REQUIRE(queries.cols() == kernel.dims, "information_gain: query dimension mismatch");
    InformationGain g;
    for (const auto& f : kernel.factors) {
        Eigen::MatrixXd A = factor_gram(f, queries) / noise_variance;
        A.diagonal().array() += 1.0;
        Eigen::LLT<Eigen::MatrixXd> llt;
        detail::robust_cholesky(A, llt);
        const double v = llt.matrixLLT().diagonal().array().log().sum();
        g.per_factor.push_back(v);
        g.total += v;
    }
    return g;
}

inline InformationGain information_gain(const Decomposition& dec, const StructureHypers& hypers,
                                        const Eigen::MatrixXd& queries, double noise_variance) {
    return information_gain(make_kernel(dec, hypers), queries, noise_variance);
}

}  // namespace dechbo
