// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <kumo/env_model.hpp>
#include <kumo/taskgen.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace kumo
{

/// Simple undirected graph over truths: an edge joins two truths ruled out
/// together by some outcome state.
struct DomainGraph
{
    std::vector<std::string> nodes;
    std::vector<std::vector<std::size_t>> adjacency; // sorted, no self-loops
    std::size_t edge_count = 0;

    [[nodiscard]] std::size_t degree(std::size_t i) const { return adjacency.at(i).size(); }
    [[nodiscard]] bool has_edge(std::size_t u, std::size_t v) const;

    /// Builds a graph from an explicit edge list (used for tests and imports).
    static DomainGraph from_edges(std::vector<std::string> nodes, const std::vector<std::pair<std::size_t, std::size_t>>& edges);
};

DomainGraph build_domain_graph(const SeedConfig& cfg);

/// Components as node-index lists, each sorted ascending, in order of their smallest node.
std::vector<std::vector<std::size_t>> connected_components(const DomainGraph& graph);

struct Partition
{
    std::vector<std::size_t> community; // per node, ids 0..k-1 by first appearance
    double modularity = 0.0;
    std::vector<double> level_modularity; // Q after each Louvain level

    [[nodiscard]] std::size_t community_count() const;
};

/// Newman modularity. Throws EmptyGraph when the graph has no edges.
double modularity(const DomainGraph& graph, const std::vector<std::size_t>& community);

/// Louvain: local moves to the best neighboring community, then aggregation,
/// until no move improves modularity. Node visit order is shuffled by rng_seed.
Partition louvain(const DomainGraph& graph, std::uint64_t rng_seed = 0);

struct EnvironmentSplit
{
    SeedConfig first;
    SeedConfig second;
};

/// Splits along connected components (alternating, largest first). An action
/// goes to the first half iff all the truths it can rule out are there.
/// Throws SingleComponent, or SplitInvalid if a half fails validation.
EnvironmentSplit split_environment(const SeedConfig& cfg, const std::string& first_name = {},
                                   const std::string& second_name = {});

/// Sorted (descending) truth degrees, '|', sorted action degrees of the task's
/// truth-action graph, e.g. "2,1,1|3,1,0".
std::string structure_signature(const TaskInstance& task);

struct ContingencyTable
{
    std::vector<std::vector<std::int64_t>> counts;

    [[nodiscard]] std::size_t rows() const noexcept { return counts.size(); }
    [[nodiscard]] std::size_t cols() const noexcept { return counts.empty() ? 0 : counts.front().size(); }
    [[nodiscard]] std::int64_t total() const;
};

struct ChiSquareResult
{
    double statistic = 0.0;
    double p_value = 1.0;
    int dof = 0;
};

/// Upper regularized incomplete gamma Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);

/// Upper tail of the chi-square distribution with k degrees of freedom.
double chi_square_sf(double statistic, int k);

/// Pearson chi-square test of independence (no continuity correction).
/// Throws DegenerateMargins when a row or column sums to zero.
ChiSquareResult chi_square_independence(const ContingencyTable& table);

/// Throws DegenerateTable for an empty table or fewer than two rows/columns.
double cramers_v(const ContingencyTable& table);

struct StructureTestResult
{
    ChiSquareResult chi;
    double cramers_v = 0.0;
    ContingencyTable table;              // rows: signatures; columns: correct, incorrect
    std::vector<std::string> signatures; // row labels
};

/// A task counts as correct when it succeeds in a strict majority of its
/// trials. `trials` maps task id -> per-trial success flags (at least 5 each).
StructureTestResult structure_performance_test(const std::vector<TaskInstance>& tasks,
                                               const std::map<std::string, std::vector<bool>>& trials);

} // namespace kumo
