#pragma once

#include <algorithm>
#include <bit>
#include <numeric>
#include <random>
#include <vector>

#include "dechbo/acquisition.hpp"
#include "dechbo/factor_gp.hpp"
#include "dechbo/maxsum.hpp"

namespace dechbo::maxsum {

/// Factor with uniform [0, 1) entries over the given variables.
template <typename Rng>
FactorTable random_table(const Subset& subset, const std::vector<int>& domains, Rng& rng) {
    std::vector<int> ext;
    for (int v : subset) ext.push_back(domains[static_cast<std::size_t>(v)]);
    FactorTable t;
    t.subset = subset;
    t.shape = TableShape(ext);
    t.values.resize(static_cast<Eigen::Index>(t.shape.size()));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Eigen::Index k = 0; k < t.values.size(); ++k) t.values[k] = u(rng);
    return t;
}

/// Random acyclic factor graph: every non-unary factor joins exactly one
/// already-connected variable to fresh ones, so the graph is a tree. Some
/// unary factors are sprinkled on top.
template <typename Rng>
FactorGraph random_tree_graph(Rng& rng, int max_variables = 6, int max_arity = 3, int max_values = 8) {
    std::uniform_int_distribution<int> nvar(1, max_variables), nval(2, max_values);
    const int n = nvar(rng);
    std::vector<int> domains(static_cast<std::size_t>(n));
    for (int& d : domains) d = nval(rng);

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<Subset> subsets;
    std::vector<int> placed{order[0]};
    std::size_t next = 1;
    while (next < order.size()) {
        const int room = static_cast<int>(order.size() - next);
        std::uniform_int_distribution<int> ar(2, std::min(max_arity, room + 1));
        const int k = ar(rng);
        std::uniform_int_distribution<std::size_t> anchor(0, placed.size() - 1);
        Subset s{placed[anchor(rng)]};
        for (int j = 1; j < k; ++j) {
            s.push_back(order[next]);
            placed.push_back(order[next++]);
        }
        std::sort(s.begin(), s.end());
        subsets.push_back(s);
    }
    std::bernoulli_distribution unary(0.3);
    for (int v = 0; v < n; ++v)
        if (subsets.empty() || unary(rng)) subsets.push_back({v});

    std::vector<FactorTable> tables;
    for (const auto& s : subsets) tables.push_back(random_table(s, domains, rng));
    return FactorGraph(domains, std::move(tables));
}

/// Random connected factor graph on `n` variables with distinct factors of
/// size 2 or 3 that contains at least one cycle (edges >= nodes).
template <typename Rng>
FactorGraph random_loopy_graph(Rng& rng, int n = 4, int values = 6) {
    std::vector<Subset> candidates;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        const int c = std::popcount(mask);
        if (c < 2 || c > 3) continue;
        Subset s;
        for (int i = 0; i < n; ++i)
            if ((mask >> i) & 1u) s.push_back(i);
        candidates.push_back(s);
    }
    std::uniform_int_distribution<int> count(3, 5);
    while (true) {
        std::shuffle(candidates.begin(), candidates.end(), rng);
        const int m = std::min<int>(count(rng), static_cast<int>(candidates.size()));
        std::vector<Subset> chosen(candidates.begin(), candidates.begin() + m);
        std::vector<int> parent(static_cast<std::size_t>(n));
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int x) {
            while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
            return x;
        };
        std::size_t edges = 0;
        for (const auto& s : chosen) {
            edges += s.size();
            for (std::size_t j = 1; j < s.size(); ++j) parent[static_cast<std::size_t>(find(s[j]))] = find(s[0]);
        }
        bool connected = true;
        for (int v = 0; v < n; ++v) connected = connected && find(v) == find(0);
        if (!connected || edges < static_cast<std::size_t>(n + m)) continue;
        std::sort(chosen.begin(), chosen.end());
        const std::vector<int> domains(static_cast<std::size_t>(n), values);
        std::vector<FactorTable> tables;
        for (const auto& s : chosen) tables.push_back(random_table(s, domains, rng));
        return FactorGraph(domains, std::move(tables));
    }
}

/// UCB tables over the unit grid for the factors of a random loopy graph,
/// from a posterior fitted to 1..10 random standard-normal observations.
template <typename Rng>
DiscretizedAcquisition random_loopy_acquisition(Rng& rng, int n = 4, int values = 6, double beta_value = 2.0) {
    const auto g = random_loopy_graph(rng, n, values);
    std::vector<FactorKernel> factors;
    for (std::size_t f = 0; f < g.num_factors(); ++f) factors.push_back(FactorKernel::isotropic(g.factor(f).subset, 1.0, 0.3));
    std::uniform_int_distribution<int> count(1, 10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    const int m = count(rng);
    Eigen::MatrixXd X(m, n);
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) X(i, j) = u(rng);
        y[i] = z(rng);
    }
    const auto post = fit(AdditiveKernel(std::move(factors), n), ObservationSet(std::move(X), std::move(y), 1e-2));
    return tabulate(post, GridSpec::unit(n, values), beta_value);
}

}  // namespace dechbo::maxsum
