// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

namespace kumo::testing
{

using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;

/// Modularity straight from the definition, summing over all node pairs.
inline double pairwise_modularity(std::size_t n, const EdgeList& edges, const std::vector<std::size_t>& comm)
{
    std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
    std::vector<double> k(n, 0.0);
    for (auto [u, v] : edges)
    {
        a[u][v] = a[v][u] = 1;
        k[u] += 1;
        k[v] += 1;
    }
    const double two_m = 2.0 * static_cast<double>(edges.size());
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (comm[i] == comm[j])
                q += a[i][j] - k[i] * k[j] / two_m;
    return q / two_m;
}

struct BestPartition
{
    double modularity = -1.0;
    std::vector<std::size_t> community;
};

/// Exhaustive search over all set partitions (restricted growth strings).
/// Feasible up to about n = 10.
inline BestPartition best_partition(std::size_t n, const EdgeList& edges)
{
    BestPartition best;
    std::vector<std::size_t> rgs(n, 0);
    while (true)
    {
        const double q = pairwise_modularity(n, edges, rgs);
        if (q > best.modularity + 1e-12)
            best = { q, rgs };
        // Advance to the next restricted growth string: bump the last position
        // that may grow, then zero everything after it.
        std::size_t i = n;
        bool advanced = false;
        while (i > 1 && !advanced)
        {
            --i;
            std::size_t prefix_max = 0;
            for (std::size_t j = 0; j < i; ++j)
                prefix_max = std::max(prefix_max, rgs[j]);
            if (rgs[i] <= prefix_max)
            {
                ++rgs[i];
                for (std::size_t j = i + 1; j < n; ++j)
                    rgs[j] = 0;
                advanced = true;
            }
        }
        if (!advanced)
            return best;
    }
}

/// Relabels communities by first appearance so partitions compare directly.
inline std::vector<std::size_t> canonical_labels(const std::vector<std::size_t>& comm)
{
    std::vector<std::size_t> out(comm.size());
    std::vector<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t i = 0; i < comm.size(); ++i)
    {
        std::size_t label = seen.size();
        for (auto [c, l] : seen)
            if (c == comm[i])
                label = l;
        if (label == seen.size())
            seen.emplace_back(comm[i], label);
        out[i] = label;
    }
    return out;
}

} // namespace kumo::testing
