#include <iostream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "dechbo/random_graphs.hpp"

using namespace dechbo;
using namespace dechbo::maxsum;

namespace {

FactorTable table(Subset s, std::vector<int> ext, std::vector<double> v) {
    FactorTable t;
    t.subset = std::move(s);
    t.shape = TableShape(std::move(ext));
    t.values = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    return t;
}

// Exhaustive maximum written without TableShape or FactorGraph::value; the
// per-assignment sum adds factors in graph order so it is bitwise comparable.
double oracle_max(const FactorGraph& g) {
    const std::size_t n = g.num_variables();
    std::vector<int> a(n, 0);
    double best = -std::numeric_limits<double>::infinity();
    while (true) {
        double s = 0.0;
        for (std::size_t f = 0; f < g.num_factors(); ++f) {
            const auto& tab = g.factor(f);
            std::size_t flat = 0;
            for (std::size_t j = 0; j < tab.subset.size(); ++j)
                flat = flat * static_cast<std::size_t>(g.domain(tab.subset[j])) + static_cast<std::size_t>(a[static_cast<std::size_t>(tab.subset[j])]);
            s += tab.values[static_cast<Eigen::Index>(flat)];
        }
        best = std::max(best, s);
        std::size_t i = n;
        while (i > 0 && ++a[i - 1] == g.domain(static_cast<int>(i - 1))) a[--i] = 0;
        if (i == 0) break;
    }
    return best;
}

}  // namespace

TEST(MaxSum, SingleFactorDecodesTableArgmax) {
    FactorGraph g({2, 3}, {table({0, 1}, {2, 3}, {0.1, 0.9, 0.3, 0.4, 0.2, 0.8})});
    const auto rr = run_rounds(g, {5, 0.0, 1e-12, false});
    EXPECT_EQ(decode(g, rr.messages), (std::vector<int>{0, 1}));
}

TEST(MaxSum, HandWorkedChain) {
    // x0 - A - x1 - B - x2, all binary. Joint maximum 5 + 4 = 9 at (1, 0, 1).
    FactorGraph g({2, 2, 2}, {table({0, 1}, {2, 2}, {1, 2, 5, 0}), table({1, 2}, {2, 2}, {0, 4, 3, 1})});
    const auto rr = run_rounds(g, {10, 0.0, 1e-12, false});
    EXPECT_TRUE(rr.converged);
    const auto a = decode(g, rr.messages);
    EXPECT_EQ(a, (std::vector<int>{1, 0, 1}));
    EXPECT_EQ(g.value(a), 9.0);
}

TEST(MaxSum, SharedVariableNeedsOwnMessageToDecode) {
    // x0 prefers 1 through its lexicographically first factor but the
    // second factor outweighs it; only the full max-marginal picks 0.
    FactorGraph g({2, 2}, {table({0}, {2}, {0.0, 1.0}), table({0, 1}, {2, 2}, {3.0, 0.0, 0.0, 0.5})});
    const auto rr = run_rounds(g, {10, 0.0, 1e-12, false});
    EXPECT_EQ(decode(g, rr.messages), (std::vector<int>{0, 0}));
}

TEST(MaxSum, MessagesAreMaxNormalized) {
    std::mt19937_64 rng(1);
    const auto g = random_tree_graph(rng);
    const auto rr = run_rounds(g, {7, 0.3, 0.0, false});
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        EXPECT_EQ(*std::max_element(rr.messages.factor_to_var[e].begin(), rr.messages.factor_to_var[e].end()), 0.0);
        EXPECT_EQ(*std::max_element(rr.messages.var_to_factor[e].begin(), rr.messages.var_to_factor[e].end()), 0.0);
    }
}

TEST(MaxSum, TreeExactnessAgainstExhaustiveOracle) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const auto g = random_tree_graph(rng, 6, 3, 8);
        const auto rr = run_rounds(g, {50, 0.0, 0.0, false});
        const auto a = decode(g, rr.messages);
        EXPECT_EQ(g.value(a), oracle_max(g)) << "trial " << trial;
        EXPECT_EQ(brute_force(g).second, oracle_max(g));
    }
}

TEST(MaxSum, TreesConvergeUnderTolerance) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto g = random_tree_graph(rng);
        const auto rr = run_rounds(g, {100, 0.0, 1e-12, false});
        EXPECT_TRUE(rr.converged);
        EXPECT_LE(rr.rounds_used, 2 * static_cast<int>(g.num_variables()) + 3);
    }
}

TEST(MaxSum, DampingKeepsTreeExactness) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const auto g = random_tree_graph(rng);
        const auto rr = run_rounds(g, {400, 0.5, 1e-13, false});
        EXPECT_DOUBLE_EQ(g.value(decode(g, rr.messages)), oracle_max(g));
    }
}

TEST(MaxSum, LoopyAcquisitionStaysNearOptimum) {
    std::mt19937_64 rng(5);
    int good = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto acq = random_loopy_acquisition(rng);
        const FactorGraph g(std::vector<int>(4, 6), acq.tables);
        const auto rr = run_rounds(g, {30, 0.0, 1e-10, false});
        if (g.value(decode(g, rr.messages)) >= 0.95 * oracle_max(g)) ++good;
    }
    EXPECT_GE(good, 48);
}

TEST(MaxSum, DampingDoesNotDegradeLoopyDecode) {
    std::mt19937_64 rng(8);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto acq = random_loopy_acquisition(rng);
        const FactorGraph g(std::vector<int>(4, 6), acq.tables);
        const double plain = g.value(decode(g, run_rounds(g, {30, 0.0, 1e-10, false}).messages));
        for (double lambda : {0.3, 0.5}) {
            const double damped = g.value(decode(g, run_rounds(g, {30, lambda, 1e-10, false}).messages));
            worst = std::max(worst, (plain - damped) / oracle_max(g));
        }
    }
    std::cout << "largest relative loss from damping: " << worst << "\n";
    EXPECT_LE(worst, 0.02);
}

TEST(MaxSum, SymmetricTwoFactorCycleIsDeterministic) {
    const std::vector<double> v{1, 0, 0, 1};
    const FactorGraph g({2, 2}, {table({0, 1}, {2, 2}, v), table({0, 1}, {2, 2}, v)});
    const auto a = run_rounds(g, {10, 0.0, -1.0, false}), b = run_rounds(g, {10, 0.0, -1.0, false});
    EXPECT_EQ(a.messages.factor_to_var, b.messages.factor_to_var);
    EXPECT_EQ(decode(g, a.messages), decode(g, b.messages));
    EXPECT_EQ(decode(g, a.messages), (std::vector<int>{0, 0}));
}

TEST(MaxSum, LookupsCountTableReads) {
    FactorGraph g({3, 4, 5}, {table({0, 1}, {3, 4}, std::vector<double>(12, 0.0)),
                              table({1, 2}, {4, 5}, std::vector<double>(20, 0.0))});
    const auto rr = run_rounds(g, {3, 0.0, -1.0, false});
    EXPECT_EQ(rr.rounds_used, 3);
    EXPECT_EQ(rr.lookups, 3u * (2u * 12u + 2u * 20u));
    std::uint64_t dec = 0;
    decode(g, rr.messages, &dec);
    EXPECT_EQ(dec, 12u + 12u + 20u);
}

TEST(MaxSum, TraceRecordsEveryRound) {
    std::mt19937_64 rng(6);
    const auto g = random_loopy_graph(rng);
    const auto rr = run_rounds(g, {6, 0.0, -1.0, true});
    ASSERT_EQ(rr.trace.size(), 6u);
    ASSERT_EQ(rr.deltas.size(), 6u);
    for (int r = 0; r < 6; ++r) {
        EXPECT_EQ(rr.trace[static_cast<std::size_t>(r)].round, r + 1);
        EXPECT_EQ(rr.trace[static_cast<std::size_t>(r)].max_delta, rr.deltas[static_cast<std::size_t>(r)]);
    }
    Diagnostics d;
    d.trace = rr.trace;
    std::ostringstream os;
    write_trace_csv(os, d);
    std::string header;
    std::istringstream is(os.str());
    std::getline(is, header);
    EXPECT_EQ(header, "round,max_delta,current_value");
}

TEST(MaxSum, SolveMapsIndicesToGrid) {
    DiscretizedAcquisition acq;
    acq.grid = GridSpec::unit(2, 3);
    acq.tables = {table({0}, {3}, {0.0, 0.0, 1.0}), table({1}, {3}, {0.0, 2.0, 0.0})};
    const auto sol = solve(acq, {});
    EXPECT_EQ(sol.indices, (std::vector<int>{2, 1}));
    EXPECT_DOUBLE_EQ(sol.x[0], 1.0);
    EXPECT_DOUBLE_EQ(sol.x[1], 0.5);
    EXPECT_EQ(sol.value, 3.0);
    EXPECT_TRUE(sol.diagnostics.converged);
    EXPECT_GT(sol.diagnostics.lookups, 0u);
}

TEST(MaxSum, BruteForceBreaksTiesTowardLowestIndex) {
    FactorGraph g({3}, {table({0}, {3}, {1.0, 1.0, 0.5})});
    EXPECT_EQ(brute_force(g).first, (std::vector<int>{0}));
}

TEST(MaxSum, RejectsMalformedGraphs) {
    EXPECT_THROW(FactorGraph({2, 2}, {table({0}, {2}, {0, 1})}), ContractViolation);
    EXPECT_THROW(FactorGraph({2, 3}, {table({0, 1}, {2, 2}, {0, 1, 2, 3})}), ContractViolation);
    EXPECT_THROW(FactorGraph({2}, {table({0}, {2}, {0, 1, 2})}), ContractViolation);
    FactorGraph ok({2}, {table({0}, {2}, {0, 1})});
    EXPECT_THROW(run_rounds(ok, {0, 0.0, 0.0, false}), ContractViolation);
    EXPECT_THROW(run_rounds(ok, {5, 1.0, 0.0, false}), ContractViolation);
}
