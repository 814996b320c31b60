#pragma once

#include <fstream>
#include <initializer_list>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "dechbo/engine.hpp"
#include "dechbo/error.hpp"

namespace dechbo::config {

using nlohmann::json;

namespace detail {

inline void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(std::string(section) + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) throw ConfigError(std::string(section) + ": unknown key '" + it.key() + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline BetaMode beta_mode_from_string(const std::string& s) {
    if (s == "discrete_domain") return BetaMode::DiscreteDomain;
    if (s == "continuous_lipschitz") return BetaMode::ContinuousLipschitz;
    if (s == "fixed") return BetaMode::FixedConstant;
    throw ConfigError("unknown beta mode '" + s + "'");
}

inline DecompositionMode decomposition_mode_from_string(const std::string& s) {
    if (s == "static") return DecompositionMode::Static;
    if (s == "random") return DecompositionMode::Random;
    if (s == "mcmc") return DecompositionMode::Mcmc;
    throw ConfigError("unknown decomposition mode '" + s + "'");
}

}  // namespace detail

/// Parse a run configuration. Every section except `seed` is optional and
/// falls back to the RunConfig defaults; unknown keys anywhere are errors.
/// A top-level `meta` object is accepted and ignored (manifests carry one).
inline RunConfig from_json(const json& j) {
    using detail::check_keys;
    using detail::read;
    RunConfig c;
    try {
        check_keys(j, "config", {"objective", "algorithm", "decomposition", "kernel", "beta", "grid", "maxsum", "iterations",
                                 "initial_evaluations", "noise_variance", "seed", "record_wall_time", "meta"});
        if (!j.contains("seed")) throw ConfigError("config: 'seed' is required");
        if (j.contains("objective")) {
            const auto& o = j.at("objective");
            check_keys(o, "objective", {"name", "dims", "subsets", "grid_points", "signal_variance", "lengthscale", "seed"});
            read(o, "name", c.objective.name);
            read(o, "dims", c.objective.dims);
            read(o, "subsets", c.objective.subsets);
            read(o, "grid_points", c.objective.grid_points);
            read(o, "signal_variance", c.objective.signal_variance);
            read(o, "lengthscale", c.objective.lengthscale);
            if (o.contains("seed")) c.objective.seed = o.at("seed").get<std::uint64_t>();
            if (c.objective.name != "prior_sample") bench::kind_from_string(c.objective.name);
        }
        if (j.contains("algorithm")) c.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
        if (j.contains("decomposition")) {
            const auto& d = j.at("decomposition");
            check_keys(d, "decomposition", {"mode", "subsets", "max_factor_size", "mcmc", "penalty", "resample_every"});
            if (d.contains("mode")) c.decomposition.mode = detail::decomposition_mode_from_string(d.at("mode").get<std::string>());
            read(d, "subsets", c.decomposition.subsets);
            read(d, "max_factor_size", c.decomposition.max_factor_size);
            read(d, "penalty", c.decomposition.penalty);
            read(d, "resample_every", c.decomposition.resample_every);
            if (d.contains("mcmc")) {
                const auto& m = d.at("mcmc");
                check_keys(m, "decomposition.mcmc", {"chain_length", "burn_in", "thin", "samples"});
                read(m, "chain_length", c.decomposition.mcmc.chain_length);
                read(m, "burn_in", c.decomposition.mcmc.burn_in);
                read(m, "thin", c.decomposition.mcmc.thin);
                read(m, "samples", c.decomposition.mcmc.samples);
            }
            if (c.decomposition.mode == DecompositionMode::Static && !d.contains("max_factor_size")) {
                int m = 1;
                for (const auto& s : c.decomposition.subsets) m = std::max(m, static_cast<int>(s.size()));
                c.decomposition.max_factor_size = m;
            }
        }
        if (j.contains("kernel")) {
            const auto& k = j.at("kernel");
            check_keys(k, "kernel", {"signal_variance", "lengthscale"});
            read(k, "signal_variance", c.kernel.signal_variance);
            read(k, "lengthscale", c.kernel.lengthscale);
        }
        if (j.contains("beta")) {
            const auto& b = j.at("beta");
            check_keys(b, "beta", {"mode", "delta", "lipschitz_a", "lipschitz_b", "value"});
            if (b.contains("mode")) c.beta.mode = detail::beta_mode_from_string(b.at("mode").get<std::string>());
            read(b, "delta", c.beta.delta);
            read(b, "lipschitz_a", c.beta.lipschitz_a);
            read(b, "lipschitz_b", c.beta.lipschitz_b);
            read(b, "value", c.beta.fixed_value);
        }
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            check_keys(g, "grid", {"min_points", "max_points"});
            read(g, "min_points", c.grid.min_points);
            read(g, "max_points", c.grid.max_points);
        }
        if (j.contains("maxsum")) {
            const auto& m = j.at("maxsum");
            check_keys(m, "maxsum", {"rounds", "damping", "tolerance"});
            read(m, "rounds", c.maxsum.max_rounds);
            read(m, "damping", c.maxsum.damping);
            read(m, "tolerance", c.maxsum.tolerance);
        }
        read(j, "iterations", c.iterations);
        read(j, "initial_evaluations", c.initial_evaluations);
        read(j, "noise_variance", c.noise_variance);
        read(j, "seed", c.seed);
        read(j, "record_wall_time", c.record_wall_time);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

/// Fully resolved configuration; feeding it back through from_json gives the same RunConfig.
inline json to_json(const RunConfig& c) {
    json j;
    json o = {{"name", c.objective.name}};
    if (c.objective.name == "prior_sample") {
        o["dims"] = c.objective.dims;
        o["subsets"] = c.objective.subsets;
        o["grid_points"] = c.objective.grid_points;
        o["signal_variance"] = c.objective.signal_variance;
        o["lengthscale"] = c.objective.lengthscale;
        if (c.objective.seed) o["seed"] = *c.objective.seed;
    }
    j["objective"] = o;
    j["algorithm"] = to_string(c.algorithm);
    json d = {{"mode", to_string(c.decomposition.mode)},
              {"max_factor_size", c.decomposition.max_factor_size},
              {"penalty", c.decomposition.penalty},
              {"resample_every", c.decomposition.resample_every},
              {"mcmc",
               {{"chain_length", c.decomposition.mcmc.chain_length},
                {"burn_in", c.decomposition.mcmc.burn_in},
                {"thin", c.decomposition.mcmc.thin},
                {"samples", c.decomposition.mcmc.samples}}}};
    if (!c.decomposition.subsets.empty()) d["subsets"] = c.decomposition.subsets;
    j["decomposition"] = d;
    j["kernel"] = {{"signal_variance", c.kernel.signal_variance}, {"lengthscale", c.kernel.lengthscale}};
    j["beta"] = {{"mode", to_string(c.beta.mode)},
                 {"delta", c.beta.delta},
                 {"lipschitz_a", c.beta.lipschitz_a},
                 {"lipschitz_b", c.beta.lipschitz_b},
                 {"value", c.beta.fixed_value}};
    j["grid"] = {{"min_points", c.grid.min_points}, {"max_points", c.grid.max_points}};
    j["maxsum"] = {{"rounds", c.maxsum.max_rounds}, {"damping", c.maxsum.damping}, {"tolerance", c.maxsum.tolerance}};
    j["iterations"] = c.iterations;
    j["initial_evaluations"] = c.initial_evaluations;
    j["noise_variance"] = c.noise_variance;
    j["seed"] = c.seed;
    j["record_wall_time"] = c.record_wall_time;
    return j;
}

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("'" + path + "': " + e.what());
    }
}

inline RunConfig load(const std::string& path) { return from_json(load_json(path)); }

}  // namespace dechbo::config
