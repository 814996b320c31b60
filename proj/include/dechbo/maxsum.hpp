#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dechbo/acquisition.hpp"
#include "dechbo/error.hpp"
#include "dechbo/table_index.hpp"

namespace dechbo::maxsum {

/// Bipartite graph of local tables (factor nodes) and discrete input
/// components (variable nodes). Edges are addressed by (factor, position in
/// the factor's subset) and numbered contiguously.
class FactorGraph {
public:
    struct Edge {
        std::size_t factor;
        std::size_t position;
        int variable;
    };

    FactorGraph(std::vector<int> domain_sizes, std::vector<FactorTable> factors)
        : domains_(std::move(domain_sizes)), factors_(std::move(factors)) {
        const int d = static_cast<int>(domains_.size());
        DECHBO_REQUIRE(d >= 1, "factor graph: need at least one variable");
        neighbors_.assign(domains_.size(), {});
        for (std::size_t f = 0; f < factors_.size(); ++f) {
            const auto& tab = factors_[f];
            DECHBO_REQUIRE(is_valid_subset(tab.subset, d), "factor graph: invalid factor subset");
            DECHBO_REQUIRE(tab.shape.rank() == tab.subset.size(), "factor graph: table rank mismatch");
            DECHBO_REQUIRE(tab.values.size() == static_cast<Eigen::Index>(tab.shape.size()),
                           "factor graph: table size mismatch");
            first_edge_.push_back(edges_.size());
            for (std::size_t j = 0; j < tab.subset.size(); ++j) {
                const int v = tab.subset[j];
                DECHBO_REQUIRE(tab.shape.extent(j) == domains_[static_cast<std::size_t>(v)],
                               "factor graph: table extent differs from variable domain");
                neighbors_[static_cast<std::size_t>(v)].push_back(edges_.size());
                edges_.push_back({f, j, v});
            }
        }
        for (std::size_t i = 0; i < neighbors_.size(); ++i)
            DECHBO_REQUIRE(!neighbors_[i].empty(), "factor graph: variable belongs to no factor");
    }

    static FactorGraph from_acquisition(const DiscretizedAcquisition& acq) {
        return FactorGraph(std::vector<int>(static_cast<std::size_t>(acq.grid.dims()), acq.grid.per_dim_points), acq.tables);
    }

    std::size_t num_variables() const { return domains_.size(); }
    std::size_t num_factors() const { return factors_.size(); }
    std::size_t num_edges() const { return edges_.size(); }
    int domain(int v) const { return domains_[static_cast<std::size_t>(v)]; }
    const std::vector<int>& domains() const { return domains_; }
    const FactorTable& factor(std::size_t f) const { return factors_[f]; }
    const Edge& edge(std::size_t e) const { return edges_[e]; }
    std::size_t edge_id(std::size_t f, std::size_t position) const { return first_edge_[f] + position; }
    /// Edges incident to variable v, ordered by factor index; A(i) in message terms.
    const std::vector<std::size_t>& incident(int v) const { return neighbors_[static_cast<std::size_t>(v)]; }

    /// Sum of every factor table at a full assignment.
    double value(std::span<const int> assignment) const {
        double s = 0.0;
        std::vector<int> local;
        for (const auto& tab : factors_) {
            local.resize(tab.subset.size());
            for (std::size_t j = 0; j < tab.subset.size(); ++j) local[j] = assignment[static_cast<std::size_t>(tab.subset[j])];
            s += tab.values[static_cast<Eigen::Index>(tab.shape.flatten(local))];
        }
        return s;
    }

private:
    std::vector<int> domains_;
    std::vector<FactorTable> factors_;
    std::vector<Edge> edges_;
    std::vector<std::size_t> first_edge_;
    std::vector<std::vector<std::size_t>> neighbors_;
};

using Message = std::vector<double>;

struct MessageTable {
    std::vector<Message> factor_to_var;  // indexed by edge id
    std::vector<Message> var_to_factor;
    int round = 0;

    static MessageTable zeros(const FactorGraph& g) {
        MessageTable m;
        m.factor_to_var.resize(g.num_edges());
        m.var_to_factor.resize(g.num_edges());
        for (std::size_t e = 0; e < g.num_edges(); ++e) {
            const auto n = static_cast<std::size_t>(g.domain(g.edge(e).variable));
            m.factor_to_var[e].assign(n, 0.0);
            m.var_to_factor[e].assign(n, 0.0);
        }
        return m;
    }
};

/// Max over all joint settings of the other variables of (their incoming
/// messages + table). Adds the number of table entries read to `lookups`.
inline Message factor_to_variable_message(const FactorGraph& g, const MessageTable& msgs, std::size_t f,
                                          std::size_t position, std::uint64_t* lookups = nullptr) {
    const FactorTable& tab = g.factor(f);
    DECHBO_REQUIRE(position < tab.subset.size(), "factor message: variable not in factor");
    const std::size_t arity = tab.subset.size();
    Message out(static_cast<std::size_t>(tab.shape.extent(position)), -std::numeric_limits<double>::infinity());
    std::vector<const Message*> incoming(arity);
    for (std::size_t j = 0; j < arity; ++j) incoming[j] = &msgs.var_to_factor[g.edge_id(f, j)];
    std::vector<int> idx(arity, 0);
    std::size_t flat = 0;
    do {
        double v = tab.values[static_cast<Eigen::Index>(flat)];
        for (std::size_t j = 0; j < arity; ++j)
            if (j != position) v += (*incoming[j])[static_cast<std::size_t>(idx[j])];
        double& slot = out[static_cast<std::size_t>(idx[position])];
        if (v > slot) slot = v;
        ++flat;
    } while (tab.shape.next(idx));
    if (lookups) *lookups += tab.shape.size();
    return out;
}

/// Pointwise sum of the messages from every other factor incident to variable v.
inline Message variable_to_factor_message(const FactorGraph& g, const MessageTable& msgs, int v, std::size_t f) {
    Message out(static_cast<std::size_t>(g.domain(v)), 0.0);
    bool member = false;
    for (std::size_t e : g.incident(v)) {
        if (g.edge(e).factor == f) {
            member = true;
            continue;
        }
        const Message& m = msgs.factor_to_var[e];
        for (std::size_t h = 0; h < out.size(); ++h) out[h] += m[h];
    }
    DECHBO_REQUIRE(member, "variable message: factor is not incident to variable");
    return out;
}

struct RoundsConfig {
    int max_rounds = 30;
    double damping = 0.0;
    double tolerance = 1e-8;
    bool record_trace = false;
};

struct TraceRow {
    int round;
    double max_delta;
    double current_value;
};

struct RoundsResult {
    MessageTable messages;
    int rounds_used = 0;
    bool converged = false;
    std::vector<double> deltas;
    std::vector<TraceRow> trace;
    std::uint64_t lookups = 0;
};

inline void normalize(Message& m) {
    const double mx = *std::max_element(m.begin(), m.end());
    for (double& v : m) v -= mx;
}

inline std::vector<int> decode(const FactorGraph& g, const MessageTable& msgs, std::uint64_t* lookups = nullptr);

/// Synchronous rounds: every round-k message is computed from round k-1,
/// blended as damping*old + (1-damping)*new, then shifted so its max is 0.
inline RoundsResult run_rounds(const FactorGraph& g, const RoundsConfig& cfg) {
    DECHBO_REQUIRE(cfg.max_rounds >= 1, "max-sum: max_rounds must be >= 1");
    DECHBO_REQUIRE(cfg.damping >= 0.0 && cfg.damping < 1.0, "max-sum: damping must lie in [0, 1)");
    RoundsResult res;
    res.messages = MessageTable::zeros(g);
    MessageTable next = res.messages;
    for (int round = 1; round <= cfg.max_rounds; ++round) {
        const MessageTable& prev = res.messages;
        for (std::size_t e = 0; e < g.num_edges(); ++e) {
            const auto& edge = g.edge(e);
            next.var_to_factor[e] = variable_to_factor_message(g, prev, edge.variable, edge.factor);
            next.factor_to_var[e] = factor_to_variable_message(g, prev, edge.factor, edge.position, &res.lookups);
        }
        double delta = 0.0;
        auto blend = [&](Message& fresh, const Message& old) {
            if (cfg.damping > 0.0)
                for (std::size_t h = 0; h < fresh.size(); ++h) fresh[h] = cfg.damping * old[h] + (1.0 - cfg.damping) * fresh[h];
            normalize(fresh);
            for (std::size_t h = 0; h < fresh.size(); ++h) delta = std::max(delta, std::abs(fresh[h] - old[h]));
        };
        for (std::size_t e = 0; e < g.num_edges(); ++e) {
            blend(next.var_to_factor[e], prev.var_to_factor[e]);
            blend(next.factor_to_var[e], prev.factor_to_var[e]);
        }
        next.round = round;
        std::swap(res.messages, next);
        res.rounds_used = round;
        res.deltas.push_back(delta);
        if (cfg.record_trace) {
            const auto a = decode(g, res.messages);
            res.trace.push_back({round, delta, g.value(a)});
        }
        if (delta < cfg.tolerance) {
            res.converged = true;
            break;
        }
    }
    return res;
}

/// Factor used to decode variable v: the incident factor whose subset is
/// lexicographically smallest (lowest factor index on equal subsets).
inline std::size_t decode_edge(const FactorGraph& g, int v) {
    const auto& inc = g.incident(v);
    std::size_t best = inc.front();
    for (std::size_t e : inc) {
        const auto& a = g.factor(g.edge(e).factor).subset;
        const auto& b = g.factor(g.edge(best).factor).subset;
        if (std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end())) best = e;
    }
    return best;
}

/// Per-variable argmax of the max-marginal seen through one incident factor:
/// max over the other variables of (table + their incoming messages), plus
/// the variable's own message into that factor. Ties go to the lowest index.
inline std::vector<int> decode(const FactorGraph& g, const MessageTable& msgs, std::uint64_t* lookups) {
    std::vector<int> assignment(g.num_variables(), 0);
    for (int v = 0; v < static_cast<int>(g.num_variables()); ++v) {
        const std::size_t e = decode_edge(g, v);
        const auto& edge = g.edge(e);
        Message belief = factor_to_variable_message(g, msgs, edge.factor, edge.position, lookups);
        const Message& own = msgs.var_to_factor[e];
        int best = 0;
        double best_val = -std::numeric_limits<double>::infinity();
        for (std::size_t h = 0; h < belief.size(); ++h) {
            const double val = belief[h] + own[h];
            if (val > best_val) {
                best_val = val;
                best = static_cast<int>(h);
            }
        }
        assignment[static_cast<std::size_t>(v)] = best;
    }
    return assignment;
}

struct Diagnostics {
    int rounds_used = 0;
    bool converged = false;
    std::vector<double> deltas;
    std::vector<TraceRow> trace;
    /// Table entries read by message computation and decoding.
    std::uint64_t lookups = 0;
};

struct Solution {
    std::vector<int> indices;
    Eigen::VectorXd x;
    double value = 0.0;
    Diagnostics diagnostics;
};

inline Solution solve(const DiscretizedAcquisition& acq, const RoundsConfig& cfg) {
    const FactorGraph g = FactorGraph::from_acquisition(acq);
    RoundsResult rr = run_rounds(g, cfg);
    Solution sol;
    sol.diagnostics.lookups = rr.lookups;
    sol.indices = decode(g, rr.messages, &sol.diagnostics.lookups);
    sol.x = acq.grid.point(sol.indices);
    sol.value = g.value(sol.indices);
    sol.diagnostics.rounds_used = rr.rounds_used;
    sol.diagnostics.converged = rr.converged;
    sol.diagnostics.deltas = std::move(rr.deltas);
    sol.diagnostics.trace = std::move(rr.trace);
    return sol;
}

/// Per-round trace as CSV: round,max_delta,current_value
inline void write_trace_csv(std::ostream& os, const Diagnostics& d) {
    const auto old = os.precision(17);
    os << "round,max_delta,current_value\n";
    for (const auto& r : d.trace) os << r.round << ',' << r.max_delta << ',' << r.current_value << '\n';
    os.precision(old);
}

/// Exhaustive joint maximization; the reference the message passing is checked against.
inline std::pair<std::vector<int>, double> brute_force(const FactorGraph& g) {
    TableShape joint(g.domains());
    std::vector<int> idx(g.num_variables(), 0), best = idx;
    double best_val = -std::numeric_limits<double>::infinity();
    do {
        const double v = g.value(idx);
        if (v > best_val) {
            best_val = v;
            best = idx;
        }
    } while (joint.next(idx));
    return {best, best_val};
}

}  // namespace dechbo::maxsum
