#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "dechbo/error.hpp"
#include "dechbo/factor_gp.hpp"
#include "dechbo/kernel.hpp"

namespace dechbo::bench {

enum class Kind { Shekel4, Hartmann6, Michalewicz10, PriorSample };

inline std::string to_string(Kind k) {
    switch (k) {
        case Kind::Shekel4: return "shekel4";
        case Kind::Hartmann6: return "hartmann6";
        case Kind::Michalewicz10: return "michalewicz10";
        case Kind::PriorSample: return "prior_sample";
    }
    return "?";
}

inline Kind kind_from_string(const std::string& s) {
    if (s == "shekel4" || s == "shekel") return Kind::Shekel4;
    if (s == "hartmann6" || s == "hartmann") return Kind::Hartmann6;
    if (s == "michalewicz10" || s == "michalewicz") return Kind::Michalewicz10;
    if (s == "prior_sample") return Kind::PriorSample;
    throw ConfigError("unknown objective '" + s + "'");
}

struct ShekelConstants {
    std::array<double, 10> beta{0.1, 0.2, 0.2, 0.4, 0.4, 0.6, 0.3, 0.7, 0.5, 0.5};
    // C[i][j]: centre i, coordinate j
    std::array<std::array<double, 4>, 10> C{{{4, 4, 4, 4},
                                             {1, 1, 1, 1},
                                             {8, 8, 8, 8},
                                             {6, 6, 6, 6},
                                             {3, 7, 3, 7},
                                             {2, 9, 2, 9},
                                             {5, 3, 5, 3},
                                             {8, 1, 8, 1},
                                             {6, 2, 6, 2},
                                             {7, 3.6, 7, 3.6}}};
};

struct HartmannConstants {
    std::array<double, 4> alpha{1.0, 1.2, 3.0, 3.2};
    std::array<std::array<double, 6>, 4> A{{{10, 3, 17, 3.5, 1.7, 8},
                                            {0.05, 10, 17, 0.1, 8, 14},
                                            {3, 3.5, 1.7, 10, 17, 8},
                                            {17, 8, 0.05, 10, 0.1, 14}}};
    std::array<std::array<double, 6>, 4> P{{{0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
                                            {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
                                            {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
                                            {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381}}};
};

struct MichalewiczConstants {
    int m = 10;
};

/// Additive function drawn from a GP prior: one independent draw per factor on
/// that factor's sub-grid, extended off-grid by noise-free kernel interpolation.
struct PriorSampleFunction {
    int dims = 0;
    AdditiveKernel kernel;
    std::vector<Eigen::MatrixXd> nodes;     // per factor, rows are restricted grid points
    std::vector<Eigen::VectorXd> samples;   // per factor, drawn values at the nodes
    std::vector<Eigen::VectorXd> weights;   // per factor, interpolation weights

    double factor_value(std::size_t f, const Eigen::VectorXd& x) const {
        const FactorKernel& k = kernel.factors[f];
        const Eigen::VectorXd u = k.restrict(x);
        double s = 0.0;
        for (Eigen::Index i = 0; i < nodes[f].rows(); ++i) s += k.eval_sub(u, nodes[f].row(i)) * weights[f][i];
        return s;
    }

    double operator()(const Eigen::VectorXd& x) const {
        double s = 0.0;
        for (std::size_t f = 0; f < kernel.size(); ++f) s += factor_value(f, x);
        return s;
    }
};

/// A benchmark objective. `evaluate` returns the value of the closed form;
/// `minimize` says whether the published task is minimization (the engine
/// negates those to obtain a maximization target).
struct SyntheticObjective {
    Kind kind = Kind::Hartmann6;
    Eigen::VectorXd low, high;
    std::optional<double> known_optimum;
    std::optional<Eigen::VectorXd> known_argopt;
    bool minimize = true;
    ShekelConstants shekel;
    HartmannConstants hartmann;
    MichalewiczConstants michalewicz;
    std::shared_ptr<const PriorSampleFunction> prior;

    int dims() const { return static_cast<int>(low.size()); }

    bool in_box(const Eigen::VectorXd& x, double slack = 1e-12) const {
        if (x.size() != low.size()) return false;
        for (Eigen::Index i = 0; i < x.size(); ++i)
            if (x[i] < low[i] - slack || x[i] > high[i] + slack) return false;
        return true;
    }

    /// Maximization-form value: -f for minimization benchmarks, f otherwise.
    double maximization_value(const Eigen::VectorXd& x) const;

    /// Optimum of the maximization form.
    std::optional<double> maximization_optimum() const {
        if (!known_optimum) return std::nullopt;
        return minimize ? -*known_optimum : *known_optimum;
    }
};

inline double evaluate(const SyntheticObjective& obj, const Eigen::VectorXd& x) {
    DECHBO_REQUIRE(x.size() == obj.dims(), "evaluate: input dimension mismatch");
    DECHBO_REQUIRE(obj.in_box(x), "evaluate: input outside the objective's box");
    switch (obj.kind) {
        case Kind::Shekel4: {
            const auto& c = obj.shekel;
            double s = 0.0;
            for (std::size_t i = 0; i < c.beta.size(); ++i) {
                double q = c.beta[i];
                for (std::size_t j = 0; j < 4; ++j) {
                    const double z = x[static_cast<Eigen::Index>(j)] - c.C[i][j];
                    q += z * z;
                }
                s += 1.0 / q;
            }
            return -s;
        }
        case Kind::Hartmann6: {
            const auto& c = obj.hartmann;
            double s = 0.0;
            for (std::size_t i = 0; i < 4; ++i) {
                double q = 0.0;
                for (std::size_t j = 0; j < 6; ++j) {
                    const double z = x[static_cast<Eigen::Index>(j)] - c.P[i][j];
                    q += c.A[i][j] * z * z;
                }
                s += c.alpha[i] * std::exp(-q);
            }
            return -s;
        }
        case Kind::Michalewicz10: {
            const int m = obj.michalewicz.m;
            double s = 0.0;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                const double xi = x[i];
                const double inner = std::sin(static_cast<double>(i + 1) * xi * xi / std::numbers::pi);
                s += std::sin(xi) * std::pow(inner, 2 * m);
            }
            return -s;
        }
        case Kind::PriorSample:
            DECHBO_REQUIRE(obj.prior != nullptr, "evaluate: prior-sample objective has no function");
            return (*obj.prior)(x);
    }
    return 0.0;
}

inline double SyntheticObjective::maximization_value(const Eigen::VectorXd& x) const {
    const double v = evaluate(*this, x);
    return minimize ? -v : v;
}

/// evaluate(x) + N(0, noise_variance)
template <typename Rng>
double noisy_evaluate(const SyntheticObjective& obj, const Eigen::VectorXd& x, double noise_variance, Rng& rng) {
    DECHBO_REQUIRE(noise_variance >= 0.0, "noisy_evaluate: noise variance must be >= 0");
    const double v = evaluate(obj, x);
    if (noise_variance == 0.0) return v;
    std::normal_distribution<double> eps(0.0, std::sqrt(noise_variance));
    return v + eps(rng);
}

inline SyntheticObjective shekel4() {
    SyntheticObjective o;
    o.kind = Kind::Shekel4;
    o.low = Eigen::VectorXd::Zero(4);
    o.high = Eigen::VectorXd::Constant(4, 10.0);
    o.known_optimum = -10.5364;
    o.known_argopt = Eigen::VectorXd::Constant(4, 4.0);
    return o;
}

inline SyntheticObjective hartmann6() {
    SyntheticObjective o;
    o.kind = Kind::Hartmann6;
    o.low = Eigen::VectorXd::Zero(6);
    o.high = Eigen::VectorXd::Ones(6);
    o.known_optimum = -3.32237;
    Eigen::VectorXd xs(6);
    xs << 0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573;
    o.known_argopt = xs;
    return o;
}

namespace detail {

/// Minimizer of -sin(x) sin^{2m}(i x^2 / pi) on [0, pi] by dense scan plus
/// golden-section refinement. The function is separable, so this gives the
/// global argmin of the whole sum.
inline double michalewicz_coordinate_argmin(int i, int m) {
    auto term = [&](double x) {
        return -std::sin(x) * std::pow(std::sin(static_cast<double>(i) * x * x / std::numbers::pi), 2 * m);
    };
    constexpr int kScan = 200000;
    double best_x = 0.0, best_v = term(0.0);
    for (int k = 1; k <= kScan; ++k) {
        const double x = std::numbers::pi * k / kScan;
        const double v = term(x);
        if (v < best_v) {
            best_v = v;
            best_x = x;
        }
    }
    double a = std::max(0.0, best_x - std::numbers::pi / kScan);
    double b = std::min(std::numbers::pi, best_x + std::numbers::pi / kScan);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 100; ++it) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        if (term(c) < term(d)) b = d;
        else a = c;
    }
    return 0.5 * (a + b);
}

}  // namespace detail

inline SyntheticObjective michalewicz10() {
    SyntheticObjective o;
    o.kind = Kind::Michalewicz10;
    o.low = Eigen::VectorXd::Zero(10);
    o.high = Eigen::VectorXd::Constant(10, std::numbers::pi);
    o.known_optimum = -9.66015;
    static const Eigen::VectorXd xs = [] {
        Eigen::VectorXd v(10);
        for (int i = 0; i < 10; ++i) v[i] = detail::michalewicz_coordinate_argmin(i + 1, MichalewiczConstants{}.m);
        return v;
    }();
    o.known_argopt = xs;
    return o;
}

inline SyntheticObjective by_name(const std::string& name) {
    switch (kind_from_string(name)) {
        case Kind::Shekel4: return shekel4();
        case Kind::Hartmann6: return hartmann6();
        case Kind::Michalewicz10: return michalewicz10();
        case Kind::PriorSample: break;
    }
    throw ConfigError("prior_sample objectives are built with prior_sample_objective()");
}

namespace detail {

/// Best value of a prior-sample function: exhaustive scan of a coarse joint
/// grid (about 2e5 points), then coordinate sweeps over `dense_points` values
/// per axis with a golden-section polish.
inline std::pair<Eigen::VectorXd, double> maximize_prior_sample(const PriorSampleFunction& fn, int dense_points) {
    const int d = fn.dims;
    std::vector<double> axis(static_cast<std::size_t>(dense_points));
    for (int k = 0; k < dense_points; ++k) axis[static_cast<std::size_t>(k)] = static_cast<double>(k) / (dense_points - 1);
    Eigen::VectorXd best = Eigen::VectorXd::Constant(d, 0.5);
    double best_v = fn(best);
    const int coarse = std::max(2, static_cast<int>(std::floor(std::pow(2.0e5, 1.0 / d))));
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    Eigen::VectorXd x(d);
    while (true) {
        for (int i = 0; i < d; ++i) x[i] = static_cast<double>(idx[static_cast<std::size_t>(i)]) / (coarse - 1);
        const double v = fn(x);
        if (v > best_v) {
            best_v = v;
            best = x;
        }
        int j = d - 1;
        while (j >= 0 && ++idx[static_cast<std::size_t>(j)] == coarse) idx[static_cast<std::size_t>(j--)] = 0;
        if (j < 0) break;
    }
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int sweep = 0; sweep < 6; ++sweep) {
        for (int i = 0; i < d; ++i) {
            Eigen::VectorXd y = best;
            double bx = best[i], bv = best_v;
            for (double a : axis) {
                y[i] = a;
                const double v = fn(y);
                if (v > bv) {
                    bv = v;
                    bx = a;
                }
            }
            const double h = 1.0 / (dense_points - 1);
            double lo = std::max(0.0, bx - h), hi = std::min(1.0, bx + h);
            for (int it = 0; it < 60; ++it) {
                const double c = hi - g * (hi - lo), e = lo + g * (hi - lo);
                y[i] = c;
                const double vc = fn(y);
                y[i] = e;
                const double ve = fn(y);
                if (vc > ve) hi = e;
                else lo = c;
            }
            y[i] = 0.5 * (lo + hi);
            const double v = fn(y);
            if (v > bv) {
                bv = v;
                bx = y[i];
            }
            best[i] = bx;
            best_v = bv;
        }
    }
    return {best, best_v};
}

}  // namespace detail

/// Draws an additive function from the GP prior with kernel `kernel` on the
/// unit box. Each factor is sampled exactly on a `grid_points`^|I| sub-grid.
template <typename Rng>
SyntheticObjective prior_sample_objective(const AdditiveKernel& kernel, int grid_points, Rng& rng) {
    DECHBO_REQUIRE(grid_points >= 1, "prior sample: grid_points must be >= 1");
    std::size_t joint = 0;
    for (const auto& f : kernel.factors) joint += static_cast<std::size_t>(std::pow(grid_points, f.arity()));
    DECHBO_REQUIRE(joint <= 4000, "prior sample: sub-grids too large for exact sampling (> 4000 points)");

    auto fn = std::make_shared<PriorSampleFunction>();
    fn->dims = kernel.dims;
    fn->kernel = kernel;
    std::normal_distribution<double> z(0.0, 1.0);
    for (const auto& f : kernel.factors) {
        const int n = static_cast<int>(std::pow(grid_points, f.arity()));
        Eigen::MatrixXd nodes(n, f.arity());
        std::vector<int> idx(static_cast<std::size_t>(f.arity()), 0);
        for (int r = 0; r < n; ++r) {
            for (int j = 0; j < f.arity(); ++j)
                nodes(r, j) = grid_points == 1 ? 0.5 : static_cast<double>(idx[static_cast<std::size_t>(j)]) / (grid_points - 1);
            int j = f.arity() - 1;
            while (j >= 0 && ++idx[static_cast<std::size_t>(j)] == grid_points) idx[static_cast<std::size_t>(j--)] = 0;
        }
        Eigen::MatrixXd K(n, n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) K(a, b) = f.eval_sub(nodes.row(a), nodes.row(b));
        Eigen::MatrixXd Kj = K;
        Kj.diagonal().array() += 1e-10 * f.signal_variance;
        Eigen::LLT<Eigen::MatrixXd> llt;
        ::dechbo::detail::robust_cholesky(Kj, llt);
        Eigen::VectorXd w(n);
        for (int a = 0; a < n; ++a) w[a] = z(rng);
        Eigen::VectorXd sample = llt.matrixL() * w;
        Eigen::VectorXd interp = llt.solve(sample);
        fn->nodes.push_back(std::move(nodes));
        fn->samples.push_back(std::move(sample));
        fn->weights.push_back(std::move(interp));
    }

    SyntheticObjective o;
    o.kind = Kind::PriorSample;
    o.low = Eigen::VectorXd::Zero(kernel.dims);
    o.high = Eigen::VectorXd::Ones(kernel.dims);
    o.minimize = false;
    o.prior = fn;
    auto [xs, vs] = detail::maximize_prior_sample(*fn, 65);
    o.known_optimum = vs;
    o.known_argopt = xs;
    return o;
}

/// Constant tables as JSON, for audit.
inline nlohmann::json dump_constants() {
    nlohmann::json j;
    ShekelConstants s;
    HartmannConstants h;
    j["shekel4"] = {{"beta", s.beta}, {"C", s.C}, {"box", {0.0, 10.0}}, {"published_minimum", -10.5364}};
    j["hartmann6"] = {{"alpha", h.alpha}, {"A", h.A}, {"P", h.P}, {"box", {0.0, 1.0}}, {"published_minimum", -3.32237}};
    const auto m = michalewicz10();
    std::vector<double> xs(m.known_argopt->data(), m.known_argopt->data() + m.known_argopt->size());
    j["michalewicz10"] = {{"m", m.michalewicz.m}, {"box", {0.0, std::numbers::pi}}, {"published_minimum", -9.66015}, {"argmin", xs}};
    return j;
}

}  // namespace dechbo::bench
