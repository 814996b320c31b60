#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dechbo/acquisition.hpp"
#include "dechbo/bench.hpp"
#include "dechbo/decomposition.hpp"
#include "dechbo/error.hpp"
#include "dechbo/factor_gp.hpp"
#include "dechbo/maxsum.hpp"
#include "dechbo/metrics.hpp"
#include "dechbo/table_index.hpp"

namespace dechbo {

enum class Algorithm { DecHbo, AddIndependent, CentralizedGpUcb, RandomSearch };

inline std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::DecHbo: return "dec_hbo";
        case Algorithm::AddIndependent: return "add_independent";
        case Algorithm::CentralizedGpUcb: return "centralized_gp_ucb";
        case Algorithm::RandomSearch: return "random_search";
    }
    return "?";
}

inline Algorithm algorithm_from_string(const std::string& s) {
    if (s == "dec_hbo") return Algorithm::DecHbo;
    if (s == "add_independent") return Algorithm::AddIndependent;
    if (s == "centralized_gp_ucb") return Algorithm::CentralizedGpUcb;
    if (s == "random_search") return Algorithm::RandomSearch;
    throw ConfigError("unknown algorithm '" + s + "'");
}

struct ObjectiveSpec {
    std::string name = "hartmann6";
    // prior_sample only
    int dims = 4;
    std::vector<Subset> subsets{{0, 1}, {1, 2, 3}};
    int grid_points = 10;
    double signal_variance = 1.0;
    double lengthscale = 0.25;
    std::optional<std::uint64_t> seed;
};

enum class DecompositionMode { Static, Random, Mcmc };

inline std::string to_string(DecompositionMode m) {
    switch (m) {
        case DecompositionMode::Static: return "static";
        case DecompositionMode::Random: return "random";
        case DecompositionMode::Mcmc: return "mcmc";
    }
    return "?";
}

struct DecompositionSpec {
    DecompositionMode mode = DecompositionMode::Random;
    std::vector<Subset> subsets;  // static mode
    int max_factor_size = 2;
    McmcConfig mcmc;
    double penalty = 0.0;
    /// Re-sample the ensemble every this many BO iterations (mcmc mode).
    int resample_every = 10;
};

struct KernelSpec {
    /// Total prior signal variance, split equally among factors.
    double signal_variance = 1.0;
    /// Lengthscale on the unit-box scale, shared by every dimension.
    double lengthscale = 0.2;
};

struct RunConfig {
    ObjectiveSpec objective;
    Algorithm algorithm = Algorithm::DecHbo;
    DecompositionSpec decomposition;
    KernelSpec kernel;
    BetaSchedule beta;  // num_factors, dims, box_edge and log_domain_size are filled in per run
    GridCaps grid{2, 64};
    maxsum::RoundsConfig maxsum{30, 0.0, 1e-8, false};
    int iterations = 150;
    int initial_evaluations = 5;
    double noise_variance = 1e-2;
    std::uint64_t seed = 0;
    bool record_wall_time = false;

    void validate() const {
        if (iterations < 1) throw ConfigError("iterations must be >= 1");
        if (initial_evaluations < 1) throw ConfigError("initial_evaluations must be >= 1");
        if (!(noise_variance > 0.0)) throw ConfigError("noise_variance must be > 0");
        if (!(kernel.signal_variance > 0.0) || !(kernel.lengthscale > 0.0))
            throw ConfigError("kernel signal_variance and lengthscale must be > 0");
        if (grid.min_points < 2 || grid.max_points < grid.min_points)
            throw ConfigError("grid caps must satisfy 2 <= min_points <= max_points");
        if (maxsum.max_rounds < 1) throw ConfigError("maxsum rounds must be >= 1");
        if (!(maxsum.damping >= 0.0 && maxsum.damping < 1.0)) throw ConfigError("maxsum damping must lie in [0, 1)");
        if (decomposition.max_factor_size < 1) throw ConfigError("max_factor_size must be >= 1");
        if (decomposition.resample_every < 1) throw ConfigError("resample_every must be >= 1");
        if (decomposition.mcmc.samples < 1 || decomposition.mcmc.thin < 1 || decomposition.mcmc.burn_in < 0 ||
            decomposition.mcmc.chain_length < 0)
            throw ConfigError("invalid mcmc settings");
        if (decomposition.mode == DecompositionMode::Static && decomposition.subsets.empty())
            throw ConfigError("static decomposition needs subsets");
        BetaSchedule b = beta;
        b.num_factors = 1;
        b.dims = 1;
        b.validate();
    }
};

struct TraceRecord {
    long t = 0;
    Eigen::VectorXd x;  // natural coordinates
    double y = 0.0;
    double f = 0.0;
    double r = 0.0;
    double R = 0.0;
    double best = 0.0;
    double wall_ms = 0.0;
    int rounds = 0;
    bool converged = false;
    // not part of the CSV contract
    std::uint64_t lookups = 0;
    int tau = 0;
    double beta = 0.0;
    bool perturbed = false;
};

struct RegretTrace {
    int dims = 0;
    bool has_regret = true;
    std::vector<TraceRecord> records;
    Decomposition decomposition;
    std::vector<std::string> log;

    double final_simple_regret() const {
        DECHBO_REQUIRE(!records.empty() && has_regret, "trace: no regret available");
        double m = std::numeric_limits<double>::infinity();
        for (const auto& r : records) m = std::min(m, r.r);
        return m;
    }

    /// Queries in unit order, one per row, natural coordinates.
    Eigen::MatrixXd queries() const {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(records.size()), dims);
        for (std::size_t i = 0; i < records.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = records[i].x.transpose();
        return X;
    }
};

/// CSV header: t,x0..x{d-1},y,f,r,R,best,wall_ms,rounds,converged (r and R
/// omitted when the optimum is unknown). Floats carry 17 significant digits.
inline void write_trace_csv(std::ostream& os, const RegretTrace& trace) {
    std::ostringstream buf;
    buf.precision(17);
    buf << "t";
    for (int i = 0; i < trace.dims; ++i) buf << ",x" << i;
    buf << ",y,f";
    if (trace.has_regret) buf << ",r,R";
    buf << ",best,wall_ms,rounds,converged\n";
    for (const auto& rec : trace.records) {
        buf << rec.t;
        for (Eigen::Index i = 0; i < rec.x.size(); ++i) buf << ',' << rec.x[i];
        buf << ',' << rec.y << ',' << rec.f;
        if (trace.has_regret) buf << ',' << rec.r << ',' << rec.R;
        buf << ',' << rec.best << ',' << rec.wall_ms << ',' << rec.rounds << ',' << (rec.converged ? 1 : 0) << '\n';
    }
    os << buf.str();
}

namespace detail {

inline std::mt19937_64 stream(std::uint64_t seed, std::uint32_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32), id};
    return std::mt19937_64(seq);
}

enum StreamId : std::uint32_t { kDecomposition = 1, kInitial = 2, kNoise = 3, kRandomSearch = 4, kObjective = 5, kMcmc = 6 };

}  // namespace detail

inline bench::SyntheticObjective build_objective(const ObjectiveSpec& spec, std::uint64_t run_seed) {
    if (spec.name != "prior_sample") return bench::by_name(spec.name);
    if (spec.dims < 1) throw ConfigError("prior_sample: dims must be >= 1");
    if (!(spec.signal_variance > 0.0 && spec.lengthscale > 0.0)) throw ConfigError("prior_sample: bad kernel");
    Decomposition dec;
    try {
        int m = 1;
        for (const auto& s : spec.subsets) m = std::max(m, static_cast<int>(s.size()));
        dec = Decomposition(spec.dims, spec.subsets, m);
    } catch (const ContractViolation& e) {
        throw ConfigError(std::string("prior_sample subsets: ") + e.what());
    }
    auto kernel = make_kernel(dec, StructureHypers::isotropic(spec.dims, spec.signal_variance, spec.lengthscale));
    auto rng = detail::stream(spec.seed.value_or(run_seed), detail::kObjective);
    return bench::prior_sample_objective(kernel, spec.grid_points, rng);
}

inline int build_dims(const RunConfig& cfg) {
    if (cfg.objective.name == "prior_sample") return cfg.objective.dims;
    return bench::by_name(cfg.objective.name).dims();
}

/// Decomposition the model uses for this run.
inline Decomposition resolve_decomposition(const RunConfig& cfg, int dims) {
    if (cfg.algorithm == Algorithm::AddIndependent) return Decomposition::singletons(dims);
    const auto& spec = cfg.decomposition;
    switch (spec.mode) {
        case DecompositionMode::Static:
            try {
                return Decomposition(dims, spec.subsets, spec.max_factor_size);
            } catch (const ContractViolation& e) {
                throw ConfigError(std::string("static decomposition: ") + e.what());
            }
        case DecompositionMode::Random:
        case DecompositionMode::Mcmc: {
            auto rng = detail::stream(cfg.seed, detail::kDecomposition);
            return random_covering(dims, spec.max_factor_size, rng);
        }
    }
    return Decomposition::singletons(dims);
}

/// Config with a random decomposition replaced by the static subsets it
/// resolves to and the objective seed made explicit. Running it reproduces the
/// original run.
inline RunConfig resolved_config(const RunConfig& cfg) {
    RunConfig out = cfg;
    const int d = build_dims(cfg);
    if (cfg.algorithm != Algorithm::AddIndependent && cfg.decomposition.mode == DecompositionMode::Random) {
        const Decomposition dec = resolve_decomposition(cfg, d);
        out.decomposition.mode = DecompositionMode::Static;
        out.decomposition.subsets = dec.subsets();
    }
    if (cfg.objective.name == "prior_sample" && !cfg.objective.seed) out.objective.seed = cfg.seed;
    return out;
}

namespace detail {

/// Nearest grid point not yet queried, within Chebyshev radius 2 of `idx`.
/// Candidates are ordered by Euclidean distance in index units, ties by
/// lexicographic offset order. Empty if every candidate was visited.
inline std::optional<std::vector<int>> unvisited_neighbor(const std::vector<int>& idx, const GridSpec& grid,
                                                          const std::function<bool(const std::vector<int>&)>& visited) {
    constexpr int kRadius = 2;
    const int d = static_cast<int>(idx.size());
    TableShape box(std::vector<int>(static_cast<std::size_t>(d), 2 * kRadius + 1));
    std::vector<std::pair<int, std::vector<int>>> offsets;
    std::vector<int> off(static_cast<std::size_t>(d), 0);
    do {
        std::vector<int> o(off);
        int dist2 = 0;
        for (int& v : o) {
            v -= kRadius;
            dist2 += v * v;
        }
        if (dist2 > 0) offsets.emplace_back(dist2, std::move(o));
    } while (box.next(off));
    std::stable_sort(offsets.begin(), offsets.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<int> cand(static_cast<std::size_t>(d));
    for (const auto& [dist2, o] : offsets) {
        bool inside = true;
        for (std::size_t i = 0; i < cand.size(); ++i) {
            cand[i] = idx[i] + o[i];
            inside = inside && cand[i] >= 0 && cand[i] < grid.per_dim_points;
        }
        if (inside && !visited(cand)) return cand;
    }
    return std::nullopt;
}

/// Argmax of mean + sqrt(beta) sd of the full objective posterior over the whole grid.
inline std::vector<int> centralized_argmax(const FactorPosterior& post, const GridSpec& grid, double beta_value,
                                           std::uint64_t& lookups) {
    const int d = grid.dims();
    TableShape joint(std::vector<int>(static_cast<std::size_t>(d), grid.per_dim_points));
    const std::size_t total = joint.size();
    const double root = std::sqrt(beta_value);
    constexpr std::size_t kChunk = 8192;
    std::vector<int> idx(static_cast<std::size_t>(d), 0), best_idx = idx;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t flat = 0;
    while (flat < total) {
        const std::size_t c = std::min(kChunk, total - flat);
        Eigen::MatrixXd Q(static_cast<Eigen::Index>(c), d);
        std::vector<int> cur(static_cast<std::size_t>(d));
        for (std::size_t p = 0; p < c; ++p) {
            joint.unflatten(flat + p, cur);
            for (int i = 0; i < d; ++i) Q(static_cast<Eigen::Index>(p), i) = grid.coord(i, cur[static_cast<std::size_t>(i)]);
        }
        const auto mv = post.objective_batch(Q);
        for (std::size_t p = 0; p < c; ++p) {
            const double v = mv.mean[static_cast<Eigen::Index>(p)] + root * std::sqrt(mv.variance[static_cast<Eigen::Index>(p)]);
            if (v > best) {
                best = v;
                joint.unflatten(flat + p, best_idx);
            }
        }
        lookups += c;
        flat += c;
    }
    return best_idx;
}

/// Independent per-table argmax; valid when every variable sits in exactly one table.
inline std::vector<int> independent_argmax(const DiscretizedAcquisition& acq, std::uint64_t& lookups) {
    std::vector<int> idx(static_cast<std::size_t>(acq.grid.dims()), 0);
    for (const auto& tab : acq.tables) {
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < tab.values.size(); ++k)
            if (tab.values[k] > tab.values[best]) best = k;
        std::vector<int> local(tab.subset.size());
        tab.shape.unflatten(static_cast<std::size_t>(best), local);
        for (std::size_t j = 0; j < tab.subset.size(); ++j) idx[static_cast<std::size_t>(tab.subset[j])] = local[j];
        lookups += static_cast<std::uint64_t>(tab.values.size());
    }
    return idx;
}

}  // namespace detail

/// The BO loop: t0 uniform random queries, then for every iteration fit the
/// factor posterior, pick beta and the grid for the iteration being selected,
/// tabulate the local acquisitions, maximize (max-sum or a baseline
/// selector), evaluate with noise and record.
inline RegretTrace run(const RunConfig& cfg, const bench::SyntheticObjective& objective) {
    cfg.validate();
    const int d = objective.dims();
    RegretTrace trace;
    trace.dims = d;
    const auto optimum = objective.maximization_optimum();
    trace.has_regret = optimum.has_value();

    Decomposition dec = resolve_decomposition(cfg, d);
    trace.decomposition = dec;
    const StructureHypers hypers = StructureHypers::isotropic(d, cfg.kernel.signal_variance, cfg.kernel.lengthscale);

    auto rng_init = detail::stream(cfg.seed, detail::kInitial);
    auto rng_noise = detail::stream(cfg.seed, detail::kNoise);
    auto rng_search = detail::stream(cfg.seed, detail::kRandomSearch);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    ObservationSet obs = ObservationSet::empty(d, cfg.noise_variance);
    double cumulative = 0.0;
    double best = -std::numeric_limits<double>::infinity();
    std::optional<DecompositionEnsemble> ensemble;

    const Eigen::VectorXd span = objective.high - objective.low;
    auto to_natural = [&](const Eigen::VectorXd& u) {
        Eigen::VectorXd x = objective.low + u.cwiseProduct(span);
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], objective.low[i], objective.high[i]);
        return x;
    };

    auto record = [&](const Eigen::VectorXd& unit, TraceRecord rec) {
        rec.t = static_cast<long>(obs.size()) + 1;
        rec.x = to_natural(unit);
        rec.f = objective.maximization_value(rec.x);
        std::normal_distribution<double> eps(0.0, std::sqrt(cfg.noise_variance));
        rec.y = rec.f + eps(rng_noise);
        if (trace.has_regret) {
            rec.r = *optimum - rec.f;
            cumulative += rec.r;
            rec.R = cumulative;
        }
        best = std::max(best, rec.f);
        rec.best = best;
        obs.append(unit, rec.y);
        trace.records.push_back(std::move(rec));
    };

    for (int s = 0; s < cfg.initial_evaluations; ++s) {
        Eigen::VectorXd u(d);
        for (int i = 0; i < d; ++i) u[i] = unif(rng_init);
        record(u, TraceRecord{});
    }

    for (int it = 1; it <= cfg.iterations; ++it) {
        const auto start = std::chrono::steady_clock::now();
        const long next = static_cast<long>(obs.size()) + 1;
        TraceRecord rec;
        Eigen::VectorXd unit(d);
        try {
            if (cfg.algorithm == Algorithm::RandomSearch) {
                for (int i = 0; i < d; ++i) unit[i] = unif(rng_search);
            } else {
                if (cfg.decomposition.mode == DecompositionMode::Mcmc && cfg.algorithm == Algorithm::DecHbo &&
                    (it - 1) % cfg.decomposition.resample_every == 0) {
                    DecompositionPrior prior{cfg.decomposition.max_factor_size, cfg.decomposition.penalty, hypers};
                    auto seeder = detail::stream(cfg.seed, detail::kMcmc);
                    seeder.discard(static_cast<unsigned long long>(it));
                    ensemble = sample_posterior(obs, prior, cfg.decomposition.mcmc, seeder(), dec);
                    dec = ensemble->samples.back();
                    std::ostringstream os;
                    os << "iteration " << it << ": decomposition ensemble resampled, last = " << dec.to_json()["subsets"].dump();
                    trace.log.push_back(os.str());
                }

                BetaSchedule schedule = cfg.beta;
                schedule.dims = d;
                schedule.box_edge = 1.0;
                schedule.num_factors = ensemble ? static_cast<int>(merge_for_acquisition(*ensemble).size())
                                                : static_cast<int>(dec.size());
                const GridSpec grid = grid_for_iteration(schedule, next, cfg.grid);
                schedule.log_domain_size = d * std::log(static_cast<double>(grid.per_dim_points));
                const double b = beta(schedule, next);
                rec.tau = grid.per_dim_points;
                rec.beta = b;

                std::vector<int> idx;
                if (cfg.algorithm == Algorithm::CentralizedGpUcb) {
                    const FactorPosterior post(make_kernel(dec, hypers), obs);
                    idx = detail::centralized_argmax(post, grid, b, rec.lookups);
                } else if (ensemble) {
                    const auto acq = tabulate_ensemble(*ensemble, obs, hypers, grid, b);
                    auto sol = maxsum::solve(acq, cfg.maxsum);
                    idx = sol.indices;
                    rec.rounds = sol.diagnostics.rounds_used;
                    rec.converged = sol.diagnostics.converged;
                    rec.lookups = sol.diagnostics.lookups;
                } else {
                    const FactorPosterior post(make_kernel(dec, hypers), obs);
                    const auto acq = tabulate(post, grid, b);
                    if (cfg.algorithm == Algorithm::AddIndependent) {
                        idx = detail::independent_argmax(acq, rec.lookups);
                    } else {
                        auto sol = maxsum::solve(acq, cfg.maxsum);
                        idx = sol.indices;
                        rec.rounds = sol.diagnostics.rounds_used;
                        rec.converged = sol.diagnostics.converged;
                        rec.lookups = sol.diagnostics.lookups;
                    }
                }

                auto visited = [&](const std::vector<int>& cand) {
                    const Eigen::VectorXd p = grid.point(cand);
                    for (Eigen::Index r = 0; r < obs.X.rows(); ++r)
                        if ((obs.X.row(r).transpose().array() == p.array()).all()) return true;
                    return false;
                };
                if (visited(idx)) {
                    if (auto alt = detail::unvisited_neighbor(idx, grid, visited)) {
                        idx = *alt;
                        rec.perturbed = true;
                        trace.log.push_back("iteration " + std::to_string(it) + ": repeated grid point, moved to nearest unvisited neighbor");
                    } else {
                        trace.log.push_back("iteration " + std::to_string(it) + ": repeated grid point, no unvisited neighbor within radius 2");
                    }
                }
                unit = grid.point(idx);
            }
        } catch (const NumericalFailure& e) {
            throw NumericalFailure("iteration " + std::to_string(it) + ": " + e.what(), e.attempted_jitter());
        }
        if (cfg.record_wall_time)
            rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        record(unit, std::move(rec));
    }
    return trace;
}

inline RegretTrace run(const RunConfig& cfg) {
    return run(cfg, build_objective(cfg.objective, cfg.seed));
}

}  // namespace dechbo
