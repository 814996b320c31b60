#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "dechbo/acquisition.hpp"
#include "dechbo/error.hpp"
#include "dechbo/factor_gp.hpp"
#include "dechbo/kernel.hpp"

namespace dechbo {

/// A covering collection of distinct, possibly overlapping coordinate subsets.
/// Subsets are kept sorted lexicographically so equal decompositions compare equal.
class Decomposition {
public:
    Decomposition() = default;
    Decomposition(int dims, std::vector<Subset> subsets, int max_factor_size)
        : dims_(dims), subsets_(std::move(subsets)), max_factor_size_(max_factor_size) {
        for (auto& s : subsets_) std::sort(s.begin(), s.end());
        std::sort(subsets_.begin(), subsets_.end());
        validate();
    }

    int dims() const { return dims_; }
    int max_factor_size() const { return max_factor_size_; }
    const std::vector<Subset>& subsets() const { return subsets_; }
    std::size_t size() const { return subsets_.size(); }
    int total_size() const {
        int s = 0;
        for (const auto& x : subsets_) s += static_cast<int>(x.size());
        return s;
    }

    bool operator==(const Decomposition& o) const { return dims_ == o.dims_ && subsets_ == o.subsets_; }
    bool operator<(const Decomposition& o) const { return subsets_ < o.subsets_; }

    bool contains(const Subset& s) const { return std::binary_search(subsets_.begin(), subsets_.end(), s); }

    void validate() const {
        DECHBO_REQUIRE(dims_ >= 1, "decomposition: dims must be >= 1");
        DECHBO_REQUIRE(max_factor_size_ >= 1, "decomposition: max_factor_size must be >= 1");
        DECHBO_REQUIRE(!subsets_.empty(), "decomposition: needs at least one subset");
        std::vector<int> cover(static_cast<std::size_t>(dims_), 0);
        for (std::size_t k = 0; k < subsets_.size(); ++k) {
            const auto& s = subsets_[k];
            DECHBO_REQUIRE(is_valid_subset(s, dims_), "decomposition: invalid subset");
            DECHBO_REQUIRE(static_cast<int>(s.size()) <= max_factor_size_, "decomposition: subset exceeds max_factor_size");
            DECHBO_REQUIRE(k == 0 || subsets_[k - 1] != s, "decomposition: duplicate subset");
            for (int i : s) cover[static_cast<std::size_t>(i)] = 1;
        }
        for (int c : cover) DECHBO_REQUIRE(c == 1, "decomposition: some dimension is not covered");
    }

    static Decomposition singletons(int dims) {
        std::vector<Subset> s;
        for (int i = 0; i < dims; ++i) s.push_back({i});
        return Decomposition(dims, std::move(s), 1);
    }

    static Decomposition full(int dims) {
        Subset s(static_cast<std::size_t>(dims));
        std::iota(s.begin(), s.end(), 0);
        return Decomposition(dims, {s}, dims);
    }

    nlohmann::json to_json() const {
        return {{"dims", dims_}, {"max_factor_size", max_factor_size_}, {"subsets", subsets_}};
    }

    static Decomposition from_json(const nlohmann::json& j) {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (it.key() != "dims" && it.key() != "max_factor_size" && it.key() != "subsets")
                throw ConfigError("decomposition: unknown key '" + it.key() + "'");
        try {
            const auto subsets = j.at("subsets").get<std::vector<Subset>>();
            int m = 0;
            for (const auto& s : subsets) m = std::max(m, static_cast<int>(s.size()));
            return Decomposition(j.at("dims").get<int>(), subsets, j.value("max_factor_size", m));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("decomposition: ") + e.what());
        } catch (const ContractViolation& e) {
            throw ConfigError(e.what());
        }
    }

private:
    int dims_ = 0;
    std::vector<Subset> subsets_;
    int max_factor_size_ = 1;
};

/// Chain of overlapping windows over a random permutation of the dimensions:
/// {p0..p_{m-1}}, {p_{m-1}..p_{2m-2}}, ... Consecutive windows share one
/// coordinate, so the resulting factor graph is a path. Size 1 gives singletons.
template <typename Rng>
Decomposition random_covering(int dims, int max_factor_size, Rng& rng) {
    DECHBO_REQUIRE(dims >= 1 && max_factor_size >= 1, "random_covering: bad arguments");
    const int m = std::min(max_factor_size, dims);
    std::vector<int> perm(static_cast<std::size_t>(dims));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = dims - 1; i > 0; --i) {
        std::uniform_int_distribution<int> pick(0, i);
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<Subset> out;
    if (m == 1) {
        for (int i = 0; i < dims; ++i) out.push_back({i});
    } else {
        int start = 0;
        while (true) {
            const int end = std::min(dims, start + m);
            out.emplace_back(perm.begin() + start, perm.begin() + end);
            if (end >= dims) break;
            start = end - 1;
        }
    }
    return Decomposition(dims, std::move(out), max_factor_size);
}

/// Hyperparameters shared across factors while comparing structures: the total
/// signal variance is split equally among factors, lengthscales are per dimension.
struct StructureHypers {
    double signal_variance = 1.0;
    Eigen::VectorXd lengthscales;  // size d

    static StructureHypers isotropic(int dims, double signal_variance, double lengthscale) {
        return {signal_variance, Eigen::VectorXd::Constant(dims, lengthscale)};
    }
};

inline AdditiveKernel make_kernel(const Decomposition& dec, const StructureHypers& h) {
    DECHBO_REQUIRE(h.lengthscales.size() == dec.dims(), "make_kernel: need one lengthscale per dimension");
    std::vector<FactorKernel> ks;
    const double sv = h.signal_variance / static_cast<double>(dec.size());
    for (const auto& s : dec.subsets()) {
        Eigen::VectorXd ls(static_cast<Eigen::Index>(s.size()));
        for (std::size_t j = 0; j < s.size(); ++j) ls[static_cast<Eigen::Index>(j)] = h.lengthscales[s[j]];
        ks.emplace_back(s, sv, ls);
    }
    return AdditiveKernel(std::move(ks), dec.dims());
}

/// Log marginal likelihood of the observations under an additive kernel.
inline double log_marginal_likelihood(const AdditiveKernel& k, const ObservationSet& obs) {
    DECHBO_REQUIRE(obs.size() > 0, "log evidence: needs observations");
    return FactorPosterior(k, obs).log_marginal_likelihood();
}

inline double log_evidence(const Decomposition& dec, const ObservationSet& obs, const StructureHypers& h) {
    return log_marginal_likelihood(make_kernel(dec, h), obs);
}

struct DecompositionPrior {
    int max_factor_size = 2;
    /// log prior = -penalty * sum |I|
    double penalty = 0.0;
    StructureHypers hypers;
};

struct McmcConfig {
    int chain_length = 500;
    int burn_in = 250;
    int thin = 25;
    int samples = 10;
};

/// Every decomposition reachable in one move, listed with multiplicity.
/// Moves: relocate a coordinate between subsets, swap coordinates between two
/// subsets, split a subset in two, merge two disjoint subsets, add or drop an
/// overlapping membership, insert a new subset or remove a redundant one. The
/// move relation is symmetric, which the Hastings ratio relies on.
inline std::vector<Decomposition> neighbors(const Decomposition& dec) {
    const auto& S = dec.subsets();
    const int M = dec.max_factor_size();
    const int d = dec.dims();
    std::vector<Decomposition> out;
    auto emit = [&](std::vector<Subset> next) {
        for (auto& s : next) std::sort(s.begin(), s.end());
        std::sort(next.begin(), next.end());
        if (std::adjacent_find(next.begin(), next.end()) != next.end() || next == S) return;
        out.emplace_back(d, std::move(next), M);
    };
    auto without = [](const Subset& s, int i) {
        Subset r;
        for (int v : s)
            if (v != i) r.push_back(v);
        return r;
    };
    auto with = [](Subset s, int i) {
        s.insert(std::upper_bound(s.begin(), s.end(), i), i);
        return s;
    };
    auto has = [](const Subset& s, int i) { return std::binary_search(s.begin(), s.end(), i); };
    std::vector<int> coverage(static_cast<std::size_t>(d), 0);
    for (const auto& s : S)
        for (int i : s) ++coverage[static_cast<std::size_t>(i)];

    const std::size_t n = S.size();
    for (std::size_t a = 0; a < n; ++a) {
        // relocate i from S[a] to S[b]
        if (S[a].size() >= 2)
            for (int i : S[a])
                for (std::size_t b = 0; b < n; ++b) {
                    if (b == a || has(S[b], i) || static_cast<int>(S[b].size()) >= M) continue;
                    auto next = S;
                    next[a] = without(S[a], i);
                    next[b] = with(S[b], i);
                    emit(std::move(next));
                }
        // swap i in S[a] with j in S[b]
        for (std::size_t b = a + 1; b < n; ++b)
            for (int i : S[a]) {
                if (has(S[b], i)) continue;
                for (int j : S[b]) {
                    if (has(S[a], j)) continue;
                    auto next = S;
                    next[a] = with(without(S[a], i), j);
                    next[b] = with(without(S[b], j), i);
                    emit(std::move(next));
                }
            }
        // split S[a] into P (containing its first element) and the rest
        if (S[a].size() >= 2) {
            const std::size_t k = S[a].size();
            for (unsigned mask = 1; mask < (1u << k) - 1; ++mask) {
                if (!(mask & 1u)) continue;
                Subset p, q;
                for (std::size_t j = 0; j < k; ++j) ((mask >> j) & 1u ? p : q).push_back(S[a][j]);
                auto next = S;
                next[a] = p;
                next.push_back(q);
                emit(std::move(next));
            }
        }
        // merge disjoint S[a], S[b]
        for (std::size_t b = a + 1; b < n; ++b) {
            if (static_cast<int>(S[a].size() + S[b].size()) > M) continue;
            bool disjoint = true;
            for (int i : S[a])
                if (has(S[b], i)) disjoint = false;
            if (!disjoint) continue;
            std::vector<Subset> next;
            for (std::size_t c = 0; c < n; ++c)
                if (c != a && c != b) next.push_back(S[c]);
            Subset u = S[a];
            u.insert(u.end(), S[b].begin(), S[b].end());
            next.push_back(u);
            emit(std::move(next));
        }
        // add an overlapping membership
        if (static_cast<int>(S[a].size()) < M)
            for (int i = 0; i < d; ++i) {
                if (has(S[a], i)) continue;
                auto next = S;
                next[a] = with(S[a], i);
                emit(std::move(next));
            }
        // drop an overlapping membership
        if (S[a].size() >= 2)
            for (int i : S[a]) {
                if (coverage[static_cast<std::size_t>(i)] < 2) continue;
                auto next = S;
                next[a] = without(S[a], i);
                emit(std::move(next));
            }
        // remove S[a] when every coordinate stays covered
        if (n >= 2 && std::all_of(S[a].begin(), S[a].end(), [&](int i) { return coverage[static_cast<std::size_t>(i)] >= 2; })) {
            auto next = S;
            next.erase(next.begin() + static_cast<std::ptrdiff_t>(a));
            emit(std::move(next));
        }
    }
    // insert any absent subset of size <= M
    Subset s;
    auto insert_from = [&](auto&& self, int lo) -> void {
        for (int i = lo; i < d; ++i) {
            s.push_back(i);
            if (!dec.contains(s)) {
                auto next = S;
                next.push_back(s);
                emit(std::move(next));
            }
            if (static_cast<int>(s.size()) < M) self(self, i + 1);
            s.pop_back();
        }
    };
    insert_from(insert_from, 0);
    return out;
}

/// Every valid decomposition of `dims` coordinates with subsets of size <= max_factor_size.
/// Exponential; only for tiny spaces.
inline std::vector<Decomposition> enumerate_decompositions(int dims, int max_factor_size) {
    std::vector<Subset> all;
    for (unsigned mask = 1; mask < (1u << dims); ++mask) {
        Subset s;
        for (int i = 0; i < dims; ++i)
            if ((mask >> i) & 1u) s.push_back(i);
        if (static_cast<int>(s.size()) <= max_factor_size) all.push_back(s);
    }
    DECHBO_REQUIRE(all.size() < 24, "enumerate_decompositions: space too large");
    std::vector<Decomposition> out;
    for (unsigned long pick = 1; pick < (1ul << all.size()); ++pick) {
        std::vector<Subset> chosen;
        std::vector<int> cover(static_cast<std::size_t>(dims), 0);
        for (std::size_t k = 0; k < all.size(); ++k)
            if ((pick >> k) & 1ul) {
                chosen.push_back(all[k]);
                for (int i : all[k]) cover[static_cast<std::size_t>(i)] = 1;
            }
        if (std::find(cover.begin(), cover.end(), 0) != cover.end()) continue;
        out.emplace_back(dims, std::move(chosen), max_factor_size);
    }
    return out;
}

/// Metropolis-Hastings over decompositions, targeting
/// p(U | data) proportional to exp(log_evidence(U) - penalty * sum |I|).
class DecompositionChain {
public:
    DecompositionChain(ObservationSet obs, DecompositionPrior prior, Decomposition initial, std::uint64_t seed)
        : obs_(std::move(obs)), prior_(std::move(prior)), state_(std::move(initial)), rng_(seed) {
        DECHBO_REQUIRE(obs_.size() > 0, "decomposition chain: needs observations");
        DECHBO_REQUIRE(state_.max_factor_size() == prior_.max_factor_size,
                       "decomposition chain: initial state has a different max_factor_size");
        current_neighbors_ = neighbors(state_);
        current_log_post_ = log_posterior(state_);
    }

    const Decomposition& state() const { return state_; }
    std::size_t accepted() const { return accepted_; }
    std::size_t steps() const { return steps_; }

    double log_posterior(const Decomposition& dec) {
        auto it = cache_.find(dec);
        double ev;
        if (it != cache_.end()) {
            ev = it->second;
        } else {
            ev = log_evidence(dec, obs_, prior_.hypers);
            cache_.emplace(dec, ev);
        }
        return ev - prior_.penalty * dec.total_size();
    }

    void step() {
        ++steps_;
        if (current_neighbors_.empty()) return;
        std::uniform_int_distribution<std::size_t> pick(0, current_neighbors_.size() - 1);
        const Decomposition proposal = current_neighbors_[pick(rng_)];
        auto back = neighbors(proposal);
        const double forward_count = static_cast<double>(std::count(current_neighbors_.begin(), current_neighbors_.end(), proposal));
        const double reverse_count = static_cast<double>(std::count(back.begin(), back.end(), state_));
        const double lp = log_posterior(proposal);
        const double log_ratio = lp - current_log_post_ + std::log(reverse_count / static_cast<double>(back.size())) -
                                 std::log(forward_count / static_cast<double>(current_neighbors_.size()));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (log_ratio >= 0.0 || std::log(u(rng_)) < log_ratio) {
            state_ = proposal;
            current_neighbors_ = std::move(back);
            current_log_post_ = lp;
            ++accepted_;
        }
    }

private:
    ObservationSet obs_;
    DecompositionPrior prior_;
    Decomposition state_;
    std::mt19937_64 rng_;
    std::vector<Decomposition> current_neighbors_;
    double current_log_post_ = 0.0;
    std::map<Decomposition, double> cache_;
    std::size_t accepted_ = 0;
    std::size_t steps_ = 0;
};

struct DecompositionEnsemble {
    std::vector<Decomposition> samples;
    std::size_t k() const { return samples.size(); }
};

/// Thinned post-burn-in states of one chain: the states after steps
/// burn_in + thin * j for j = 1..samples. Steps past chain_length reuse the
/// final state, so chain_length 0 yields copies of `initial`.
inline DecompositionEnsemble sample_posterior(const ObservationSet& obs, const DecompositionPrior& prior,
                                              const McmcConfig& cfg, std::uint64_t seed,
                                              const Decomposition& initial) {
    DECHBO_REQUIRE(cfg.samples >= 1 && cfg.thin >= 1 && cfg.burn_in >= 0 && cfg.chain_length >= 0,
                   "sample_posterior: invalid MCMC configuration");
    DecompositionEnsemble ens;
    if (cfg.chain_length == 0) {
        ens.samples.assign(static_cast<std::size_t>(cfg.samples), initial);
        return ens;
    }
    DecompositionChain chain(obs, prior, initial, seed);
    long step = 0;
    for (int j = 1; j <= cfg.samples; ++j) {
        const long target = std::min<long>(cfg.burn_in + static_cast<long>(cfg.thin) * j, cfg.chain_length);
        while (step < target) {
            chain.step();
            ++step;
        }
        ens.samples.push_back(chain.state());
    }
    return ens;
}

/// One subset of the union of ensemble members with its weight
/// (occurrence count / k) and the members it came from.
struct MergedFactor {
    Subset subset;
    double weight = 0.0;
    std::vector<std::size_t> sources;
};

inline std::vector<MergedFactor> merge_for_acquisition(const DecompositionEnsemble& ens) {
    DECHBO_REQUIRE(ens.k() >= 1, "merge_for_acquisition: empty ensemble");
    std::map<Subset, std::vector<std::size_t>> occ;
    for (std::size_t s = 0; s < ens.k(); ++s)
        for (const auto& sub : ens.samples[s].subsets()) occ[sub].push_back(s);
    std::vector<MergedFactor> out;
    for (auto& [sub, src] : occ)
        out.push_back({sub, static_cast<double>(src.size()) / static_cast<double>(ens.k()), src});
    return out;
}

/// Averaged acquisition k^-1 sum_s sum_{I in U_s} phi^I_s as one table per
/// merged subset. Each member keeps its own posterior (its kernel differs), so a
/// merged table holds k^-1 times the sum of that subset's tables over the
/// members containing it; with identical posteriors this is weight * phi^I.
inline DiscretizedAcquisition tabulate_ensemble(const DecompositionEnsemble& ens, const ObservationSet& obs,
                                                const StructureHypers& hypers, const GridSpec& grid, double beta_value) {
    const auto merged = merge_for_acquisition(ens);
    std::map<Decomposition, DiscretizedAcquisition> per_member;
    for (const auto& dec : ens.samples)
        if (!per_member.count(dec)) per_member.emplace(dec, tabulate(FactorPosterior(make_kernel(dec, hypers), obs), grid, beta_value));
    DiscretizedAcquisition acq;
    acq.grid = grid;
    acq.beta_used = beta_value;
    const double inv_k = 1.0 / static_cast<double>(ens.k());
    for (const auto& mf : merged) {
        FactorTable tab;
        tab.subset = mf.subset;
        tab.shape = TableShape(std::vector<int>(mf.subset.size(), grid.per_dim_points));
        tab.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(tab.shape.size()));
        for (std::size_t s : mf.sources) {
            const auto& member = per_member.at(ens.samples[s]);
            for (const auto& t : member.tables)
                if (t.subset == mf.subset) tab.values += t.values;
        }
        tab.values *= inv_k;
        acq.tables.push_back(std::move(tab));
    }
    return acq;
}

}  // namespace dechbo
