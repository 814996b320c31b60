#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dechbo/error.hpp"
#include "dechbo/factor_gp.hpp"
#include "dechbo/kernel.hpp"
#include "dechbo/table_index.hpp"

namespace dechbo {

enum class BetaMode { DiscreteDomain, ContinuousLipschitz, FixedConstant };

/// Exploration schedule beta_t and the discretization schedule tau_t.
///
/// DiscreteDomain:      2 log(|D| |U| pi^2 t^2 / (6 delta))
/// ContinuousLipschitz: 2 log(2 |U| pi_t / delta) + 2 d log(r d b t^2 sqrt(log(2 |U| a / delta)))
/// FixedConstant:       fixed_value
///
/// The domain size for DiscreteDomain is carried as its natural log so that
/// grids with tau^d points do not overflow.
struct BetaSchedule {
    BetaMode mode = BetaMode::ContinuousLipschitz;
    double delta = 0.1;
    double log_domain_size = 0.0;
    int num_factors = 1;
    int dims = 1;
    double box_edge = 1.0;
    double lipschitz_a = 1.0;
    double lipschitz_b = 1.0;
    double fixed_value = 1.0;

    void validate() const {
        if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("beta schedule: delta must lie in (0, 1)");
        if (num_factors < 1) throw ConfigError("beta schedule: num_factors must be >= 1");
        if (dims < 1) throw ConfigError("beta schedule: dims must be >= 1");
        if (!(box_edge > 0.0)) throw ConfigError("beta schedule: box edge must be > 0");
        if (!(lipschitz_a > 0.0 && lipschitz_b > 0.0)) throw ConfigError("beta schedule: Lipschitz constants must be > 0");
        if (mode == BetaMode::FixedConstant && !(fixed_value > 0.0))
            throw ConfigError("beta schedule: fixed value must be > 0");
        if (mode == BetaMode::DiscreteDomain && log_domain_size < 0.0)
            throw ConfigError("beta schedule: domain size must be >= 1");
    }
};

inline std::string to_string(BetaMode m) {
    switch (m) {
        case BetaMode::DiscreteDomain: return "discrete_domain";
        case BetaMode::ContinuousLipschitz: return "continuous_lipschitz";
        case BetaMode::FixedConstant: return "fixed";
    }
    return "?";
}

namespace detail {

inline double checked_log(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("beta schedule: nonpositive argument to log in ") + what);
    return std::log(v);
}

/// log(pi_t) with pi_t = pi^2 t^2 / 6
inline double log_pi_t(double t) {
    return std::log(std::numbers::pi * std::numbers::pi / 6.0) + 2.0 * std::log(t);
}

}  // namespace detail

/// r d b t^2 sqrt(log(2 |U| a / delta)), before rounding and capping.
inline double tau_formula(const BetaSchedule& s, long t) {
    DECHBO_REQUIRE(t >= 1, "tau: iteration must be >= 1");
    const double inner = detail::checked_log(2.0 * s.num_factors * s.lipschitz_a / s.delta, "tau inner");
    if (!(inner > 0.0)) throw ConfigError("tau: log(2|U|a/delta) must be > 0");
    const double td = static_cast<double>(t);
    return s.box_edge * s.dims * s.lipschitz_b * td * td * std::sqrt(inner);
}

inline double beta(const BetaSchedule& s, long t) {
    DECHBO_REQUIRE(t >= 1, "beta: iteration must be >= 1");
    const double td = static_cast<double>(t);
    double b = 0.0;
    switch (s.mode) {
        case BetaMode::FixedConstant:
            b = s.fixed_value;
            break;
        case BetaMode::DiscreteDomain:
            b = 2.0 * (s.log_domain_size + std::log(static_cast<double>(s.num_factors)) + detail::log_pi_t(td) -
                       std::log(s.delta));
            break;
        case BetaMode::ContinuousLipschitz: {
            const double first = 2.0 * (std::log(2.0 * s.num_factors) + detail::log_pi_t(td) - std::log(s.delta));
            const double second = 2.0 * s.dims * detail::checked_log(tau_formula(s, t), "continuous term");
            b = first + second;
            break;
        }
    }
    if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("beta schedule produced a nonpositive value");
    return b;
}

struct GridCaps {
    int min_points = 2;
    int max_points = 64;
};

/// Uniform per-dimension grid including both box endpoints.
struct GridSpec {
    int per_dim_points = 2;
    Eigen::VectorXd low;
    Eigen::VectorXd high;

    static GridSpec unit(int dims, int tau) {
        return GridSpec{tau, Eigen::VectorXd::Zero(dims), Eigen::VectorXd::Ones(dims)};
    }

    int dims() const { return static_cast<int>(low.size()); }

    double coord(int dim, int k) const {
        DECHBO_REQUIRE(dim >= 0 && dim < dims(), "grid: dimension out of range");
        DECHBO_REQUIRE(k >= 0 && k < per_dim_points, "grid: index out of range");
        if (k == per_dim_points - 1) return high[dim];
        return low[dim] + (high[dim] - low[dim]) * static_cast<double>(k) / static_cast<double>(per_dim_points - 1);
    }

    /// Full input for a per-dimension index vector.
    Eigen::VectorXd point(std::span<const int> idx) const {
        Eigen::VectorXd x(dims());
        for (int i = 0; i < dims(); ++i) x[i] = coord(i, idx[static_cast<std::size_t>(i)]);
        return x;
    }

    /// Index of the nearest grid value along one dimension.
    int nearest_index(int dim, double v) const {
        const double span = high[dim] - low[dim];
        if (span <= 0.0) return 0;
        const double pos = (v - low[dim]) / span * (per_dim_points - 1);
        return std::clamp(static_cast<int>(std::lround(pos)), 0, per_dim_points - 1);
    }
};

inline int clamp_tau(double formula_value, GridCaps caps) {
    DECHBO_REQUIRE(caps.min_points >= 2 && caps.max_points >= caps.min_points, "grid caps: need 2 <= min <= max");
    const double c = std::ceil(formula_value);
    if (!(c < static_cast<double>(caps.max_points))) return caps.max_points;
    return std::max(caps.min_points, static_cast<int>(c));
}

inline GridSpec grid_for_iteration(const BetaSchedule& s, long t, GridCaps caps) {
    const int tau = clamp_tau(tau_formula(s, t), caps);
    return GridSpec{tau, Eigen::VectorXd::Zero(s.dims), Eigen::VectorXd::Constant(s.dims, s.box_edge)};
}

/// One local acquisition table phi^I over the |I|-dimensional sub-grid.
struct FactorTable {
    Subset subset;
    TableShape shape;
    Eigen::VectorXd values;  // row-major over subset, last index fastest
};

struct DiscretizedAcquisition {
    std::vector<FactorTable> tables;
    GridSpec grid;
    double beta_used = 0.0;

    /// Sum of every table at a full per-dimension index assignment.
    double total(std::span<const int> idx) const {
        double s = 0.0;
        std::vector<int> local;
        for (const auto& tab : tables) {
            local.resize(tab.subset.size());
            for (std::size_t j = 0; j < tab.subset.size(); ++j) local[j] = idx[static_cast<std::size_t>(tab.subset[j])];
            s += tab.values[static_cast<Eigen::Index>(tab.shape.flatten(local))];
        }
        return s;
    }
};

/// Rows are every point of the sub-grid of `subset`, in TableShape order.
inline Eigen::MatrixXd subgrid_points(const GridSpec& grid, const Subset& subset) {
    TableShape shape(std::vector<int>(subset.size(), grid.per_dim_points));
    Eigen::MatrixXd Q(static_cast<Eigen::Index>(shape.size()), static_cast<Eigen::Index>(subset.size()));
    std::vector<int> idx(subset.size(), 0);
    Eigen::Index row = 0;
    do {
        for (std::size_t j = 0; j < subset.size(); ++j)
            Q(row, static_cast<Eigen::Index>(j)) = grid.coord(subset[j], idx[j]);
        ++row;
    } while (shape.next(idx));
    return Q;
}

/// phi^I = mu^I + sqrt(beta) sigma^I for one factor of a posterior, over the grid.
inline FactorTable tabulate_factor(const FactorPosterior& posterior, std::size_t f, const GridSpec& grid, double beta_value) {
    const Subset& subset = posterior.kernel().factors[f].subset;
    FactorTable tab;
    tab.subset = subset;
    tab.shape = TableShape(std::vector<int>(subset.size(), grid.per_dim_points));
    const auto mv = posterior.factor_batch(f, subgrid_points(grid, subset));
    const double root = std::sqrt(beta_value);
    tab.values = mv.mean + root * mv.variance.cwiseSqrt();
    return tab;
}

inline DiscretizedAcquisition tabulate(const FactorPosterior& posterior, const GridSpec& grid, double beta_value) {
    DECHBO_REQUIRE(beta_value > 0.0, "tabulate: beta must be > 0");
    DECHBO_REQUIRE(grid.dims() == posterior.kernel().dims, "tabulate: grid dimension mismatch");
    DiscretizedAcquisition acq;
    acq.grid = grid;
    acq.beta_used = beta_value;
    acq.tables.reserve(posterior.num_factors());
    for (std::size_t f = 0; f < posterior.num_factors(); ++f) acq.tables.push_back(tabulate_factor(posterior, f, grid, beta_value));
    return acq;
}

}  // namespace dechbo
