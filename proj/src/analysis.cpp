// SPDX-License-Identifier: Apache-2.0
#include <kumo/analysis.hpp>
#include <kumo/errors.hpp>
#include <kumo/rng.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace kumo
{

bool DomainGraph::has_edge(std::size_t u, std::size_t v) const
{
    const auto& row = adjacency.at(u);
    return std::binary_search(row.begin(), row.end(), v);
}

DomainGraph DomainGraph::from_edges(std::vector<std::string> nodes, const std::vector<std::pair<std::size_t, std::size_t>>& edges)
{
    DomainGraph g;
    g.nodes = std::move(nodes);
    std::vector<std::set<std::size_t>> adj(g.nodes.size());
    for (auto [u, v] : edges)
    {
        if (u >= g.nodes.size() || v >= g.nodes.size())
            throw std::out_of_range("edge endpoint out of range");
        if (u == v)
            continue;
        adj[u].insert(v);
        adj[v].insert(u);
    }
    g.adjacency.resize(g.nodes.size());
    for (std::size_t i = 0; i < adj.size(); ++i)
    {
        g.adjacency[i].assign(adj[i].begin(), adj[i].end());
        g.edge_count += adj[i].size();
    }
    g.edge_count /= 2;
    return g;
}

DomainGraph build_domain_graph(const SeedConfig& cfg)
{
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < cfg.truths.size(); ++i)
        index.emplace(cfg.truths[i], i);

    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& action : cfg.actions)
        for (const auto& state : action.states)
            for (std::size_t i = 0; i < state.ruled_out.size(); ++i)
                for (std::size_t j = i + 1; j < state.ruled_out.size(); ++j)
                    edges.emplace_back(index.at(state.ruled_out[i]), index.at(state.ruled_out[j]));
    return DomainGraph::from_edges(cfg.truths, edges);
}

std::vector<std::vector<std::size_t>> connected_components(const DomainGraph& graph)
{
    const auto n = graph.nodes.size();
    std::vector<bool> seen(n, false);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t root = 0; root < n; ++root)
    {
        if (seen[root])
            continue;
        std::vector<std::size_t> comp, stack { root };
        seen[root] = true;
        while (!stack.empty())
        {
            auto u = stack.back();
            stack.pop_back();
            comp.push_back(u);
            for (auto v : graph.adjacency[u])
                if (!seen[v])
                {
                    seen[v] = true;
                    stack.push_back(v);
                }
        }
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
    }
    return out;
}

std::size_t Partition::community_count() const
{
    return std::set<std::size_t>(community.begin(), community.end()).size();
}

double modularity(const DomainGraph& graph, const std::vector<std::size_t>& community)
{
    if (community.size() != graph.nodes.size())
        throw std::invalid_argument("partition size does not match the graph");
    if (graph.edge_count == 0)
        throw EmptyGraph("modularity is undefined for a graph without edges");

    const double m2 = 2.0 * static_cast<double>(graph.edge_count);
    std::map<std::size_t, double> inside, total;
    for (std::size_t u = 0; u < graph.nodes.size(); ++u)
    {
        total[community[u]] += static_cast<double>(graph.degree(u));
        for (auto v : graph.adjacency[u])
            if (community[v] == community[u])
                inside[community[u]] += 1.0;
    }
    double q = 0.0;
    for (const auto& [c, tot] : total)
    {
        const double in = inside.count(c) ? inside[c] : 0.0;
        q += in / m2 - (tot / m2) * (tot / m2);
    }
    return q;
}

namespace
{

// Weighted graph for the aggregation levels. adj[i][j] sums ordered pairs,
// so a community's self-loop carries twice its internal edge weight.
struct WeightedGraph
{
    std::vector<std::map<std::size_t, double>> adj;
    std::vector<double> strength;
    double m2 = 0.0;

    [[nodiscard]] std::size_t size() const noexcept { return adj.size(); }
};

WeightedGraph weighted(const DomainGraph& g)
{
    WeightedGraph w;
    w.adj.resize(g.nodes.size());
    w.strength.assign(g.nodes.size(), 0.0);
    for (std::size_t u = 0; u < g.nodes.size(); ++u)
        for (auto v : g.adjacency[u])
        {
            w.adj[u][v] = 1.0;
            w.strength[u] += 1.0;
        }
    w.m2 = 2.0 * static_cast<double>(g.edge_count);
    return w;
}

// Relabels to 0..k-1 in order of first appearance.
std::vector<std::size_t> canonical(const std::vector<std::size_t>& community)
{
    std::unordered_map<std::size_t, std::size_t> ids;
    std::vector<std::size_t> out(community.size());
    for (std::size_t i = 0; i < community.size(); ++i)
        out[i] = ids.emplace(community[i], ids.size()).first->second;
    return out;
}

constexpr double GainTolerance = 1e-12;

bool local_moving(const WeightedGraph& g, std::vector<std::size_t>& community, Rng& rng)
{
    const auto n = g.size();
    std::vector<double> tot(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        tot[community[i]] += g.strength[i];

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    bool moved_any = false;
    for (bool moved = true; moved;)
    {
        moved = false;
        for (auto i : order)
        {
            const auto own = community[i];
            const double ki = g.strength[i];
            std::map<std::size_t, double> links; // community -> weight from i, excluding self-loops
            links[own] += 0.0;
            for (const auto& [j, w] : g.adj[i])
                if (j != i)
                    links[community[j]] += w;

            tot[own] -= ki;
            auto gain = [&](std::size_t c) { return links[c] - tot[c] * ki / g.m2; };
            std::size_t best = own;
            double best_gain = gain(own);
            for (const auto& [c, w] : links)
            {
                (void)w;
                if (c == own)
                    continue;
                const double gc = gain(c);
                if (gc > best_gain + GainTolerance)
                {
                    best = c;
                    best_gain = gc;
                }
            }
            tot[best] += ki;
            if (best != own)
            {
                community[i] = best;
                moved = true;
                moved_any = true;
            }
        }
    }
    return moved_any;
}

WeightedGraph aggregate(const WeightedGraph& g, const std::vector<std::size_t>& community, std::size_t k)
{
    WeightedGraph out;
    out.adj.resize(k);
    out.strength.assign(k, 0.0);
    out.m2 = g.m2;
    for (std::size_t i = 0; i < g.size(); ++i)
    {
        out.strength[community[i]] += g.strength[i];
        for (const auto& [j, w] : g.adj[i])
            out.adj[community[i]][community[j]] += w;
    }
    return out;
}

} // namespace

Partition louvain(const DomainGraph& graph, std::uint64_t rng_seed)
{
    if (graph.edge_count == 0)
        throw EmptyGraph("cannot detect communities in a graph without edges");

    Rng rng(rng_seed);
    std::vector<std::size_t> node_comm(graph.nodes.size());
    std::iota(node_comm.begin(), node_comm.end(), 0);

    Partition p;
    auto level = weighted(graph);
    while (true)
    {
        std::vector<std::size_t> comm(level.size());
        std::iota(comm.begin(), comm.end(), 0);
        if (!local_moving(level, comm, rng))
            break;
        comm = canonical(comm);
        const auto k = *std::max_element(comm.begin(), comm.end()) + 1;
        for (auto& c : node_comm)
            c = comm[c];
        p.level_modularity.push_back(modularity(graph, node_comm));
        if (k == level.size())
            break;
        level = aggregate(level, comm, k);
    }
    p.community = canonical(node_comm);
    p.modularity = modularity(graph, p.community);
    return p;
}

EnvironmentSplit split_environment(const SeedConfig& cfg, const std::string& first_name, const std::string& second_name)
{
    const auto graph = build_domain_graph(cfg);
    auto comps = connected_components(graph);
    if (comps.size() < 2)
        throw SingleComponent("environment '" + cfg.domain + "' has a single connected component");

    auto representative = [&](const std::vector<std::size_t>& comp) {
        std::string best = cfg.truths[comp.front()];
        for (auto i : comp)
            best = std::min(best, cfg.truths[i]);
        return best;
    };
    std::stable_sort(comps.begin(), comps.end(), [&](const auto& a, const auto& b) {
        if (a.size() != b.size())
            return a.size() > b.size();
        return representative(a) < representative(b);
    });

    std::set<std::string> first_truths;
    for (std::size_t c = 0; c < comps.size(); c += 2)
        for (auto i : comps[c])
            first_truths.insert(cfg.truths[i]);

    EnvironmentSplit out;
    out.first.domain = first_name.empty() ? cfg.domain + "_1" : first_name;
    out.second.domain = second_name.empty() ? cfg.domain + "_2" : second_name;
    out.first.goal = out.second.goal = cfg.goal;
    for (const auto& t : cfg.truths)
        (first_truths.contains(t) ? out.first : out.second).truths.push_back(t);

    for (const auto& action : cfg.actions)
    {
        bool all_first = true;
        for (const auto& s : action.states)
            for (const auto& t : s.ruled_out)
                all_first = all_first && first_truths.contains(t);
        auto& half = all_first ? out.first : out.second;
        ActionSpec restricted = action;
        for (auto& s : restricted.states)
            std::erase_if(s.ruled_out, [&](const std::string& t) { return first_truths.contains(t) != all_first; });
        half.actions.push_back(std::move(restricted));
    }

    for (const auto* half : { &out.first, &out.second })
        if (auto report = validate_seed_config(*half); !report.ok)
            throw SplitInvalid("split half '" + half->domain + "' is invalid: " + report.summary());
    return out;
}

std::string structure_signature(const TaskInstance& task)
{
    std::vector<int> truth_deg, action_deg;
    for (const auto& t : task.truths)
    {
        int d = 0;
        for (const auto& a : task.actions)
            d += std::any_of(a.states.begin(), a.states.end(), [&](const TaskState& s) {
                return std::find(s.excluded.begin(), s.excluded.end(), t) != s.excluded.end();
            });
        truth_deg.push_back(d);
    }
    for (const auto& a : task.actions)
    {
        std::set<std::string> related;
        for (const auto& s : a.states)
            related.insert(s.excluded.begin(), s.excluded.end());
        action_deg.push_back(static_cast<int>(related.size()));
    }
    std::sort(truth_deg.rbegin(), truth_deg.rend());
    std::sort(action_deg.rbegin(), action_deg.rend());

    std::string out;
    for (std::size_t i = 0; i < truth_deg.size(); ++i)
        out += (i ? "," : "") + std::to_string(truth_deg[i]);
    out += '|';
    for (std::size_t i = 0; i < action_deg.size(); ++i)
        out += (i ? "," : "") + std::to_string(action_deg[i]);
    return out;
}

std::int64_t ContingencyTable::total() const
{
    std::int64_t n = 0;
    for (const auto& row : counts)
        for (auto v : row)
            n += v;
    return n;
}

double regularized_gamma_q(double a, double x)
{
    if (!(a > 0.0) || !(x >= 0.0) || !std::isfinite(a))
        throw std::invalid_argument("regularized_gamma_q requires a > 0 and x >= 0");
    if (x == 0.0)
        return 1.0;
    if (std::isinf(x))
        return 0.0;

    constexpr double eps = 1e-16;
    constexpr int max_iter = 100000;
    const double log_prefix = -x + a * std::log(x) - std::lgamma(a);

    if (x < a + 1.0)
    {
        double ap = a, del = 1.0 / a, sum = del;
        for (int i = 0; i < max_iter; ++i)
        {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * eps)
                break;
        }
        return std::clamp(1.0 - sum * std::exp(log_prefix), 0.0, 1.0);
    }

    // Lentz's method for the continued fraction.
    constexpr double tiny = std::numeric_limits<double>::min() / eps;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < max_iter; ++i)
    {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny)
            d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny)
            c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps)
            break;
    }
    return std::clamp(std::exp(log_prefix) * h, 0.0, 1.0);
}

double chi_square_sf(double statistic, int k)
{
    if (k <= 0)
        throw std::invalid_argument("chi-square needs positive degrees of freedom");
    if (statistic <= 0.0)
        return 1.0;
    return regularized_gamma_q(0.5 * k, 0.5 * statistic);
}

namespace
{

void check_shape(const ContingencyTable& table)
{
    if (table.rows() < 2 || table.cols() < 2)
        throw DegenerateTable("contingency table needs at least two rows and two columns");
    for (const auto& row : table.counts)
    {
        if (row.size() != table.cols())
            throw DegenerateTable("contingency table rows differ in length");
        for (auto v : row)
            if (v < 0)
                throw DegenerateTable("contingency table has a negative count");
    }
}

} // namespace

ChiSquareResult chi_square_independence(const ContingencyTable& table)
{
    check_shape(table);
    const auto r = table.rows(), c = table.cols();
    std::vector<double> row_sum(r, 0.0), col_sum(c, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
        {
            row_sum[i] += static_cast<double>(table.counts[i][j]);
            col_sum[j] += static_cast<double>(table.counts[i][j]);
        }
    for (auto s : row_sum)
        if (s == 0.0)
            throw DegenerateMargins("a row of the contingency table sums to zero");
    for (auto s : col_sum)
        if (s == 0.0)
            throw DegenerateMargins("a column of the contingency table sums to zero");

    const double n = static_cast<double>(table.total());
    ChiSquareResult out;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
        {
            const double expected = row_sum[i] * col_sum[j] / n;
            const double diff = static_cast<double>(table.counts[i][j]) - expected;
            out.statistic += diff * diff / expected;
        }
    out.dof = static_cast<int>((r - 1) * (c - 1));
    out.p_value = chi_square_sf(out.statistic, out.dof);
    return out;
}

double cramers_v(const ContingencyTable& table)
{
    check_shape(table);
    const auto chi = chi_square_independence(table);
    const double n = static_cast<double>(table.total());
    const double k = static_cast<double>(std::min(table.rows(), table.cols()) - 1);
    return std::clamp(std::sqrt(chi.statistic / (n * k)), 0.0, 1.0);
}

StructureTestResult structure_performance_test(const std::vector<TaskInstance>& tasks,
                                               const std::map<std::string, std::vector<bool>>& trials)
{
    std::map<std::string, std::array<std::int64_t, 2>> by_signature;
    for (const auto& task : tasks)
    {
        auto it = trials.find(task.id);
        if (it == trials.end() || it->second.size() < 5)
            throw EmptyInput("task '" + task.id + "' needs at least 5 trials");
        const auto wins = std::count(it->second.begin(), it->second.end(), true);
        const bool correct = 2 * static_cast<std::size_t>(wins) > it->second.size();
        ++by_signature[structure_signature(task)][correct ? 0 : 1];
    }
    if (by_signature.size() < 2)
        throw DegenerateTable("need at least two distinct structure signatures");

    StructureTestResult out;
    for (const auto& [sig, cells] : by_signature)
    {
        out.signatures.push_back(sig);
        out.table.counts.push_back({ cells[0], cells[1] });
    }

    // A column with no tasks carries no information; with one column left the
    // outcome cannot depend on structure.
    const bool all_one_column = std::all_of(out.table.counts.begin(), out.table.counts.end(), [](const auto& row) { return row[1] == 0; })
                                || std::all_of(out.table.counts.begin(), out.table.counts.end(), [](const auto& row) { return row[0] == 0; });
    if (all_one_column)
    {
        out.chi = ChiSquareResult { 0.0, 1.0, 0 };
        out.cramers_v = 0.0;
        return out;
    }
    out.chi = chi_square_independence(out.table);
    const double k = static_cast<double>(std::min(out.table.rows(), out.table.cols()) - 1);
    out.cramers_v = std::clamp(std::sqrt(out.chi.statistic / (static_cast<double>(out.table.total()) * k)), 0.0, 1.0);
    return out;
}

} // namespace kumo
