// SPDX-License-Identifier: Apache-2.0
#include <kumo/analysis.hpp>
#include <kumo/errors.hpp>

#include <fixtures.hpp>
#include <gtest/gtest.h>
#include <partition_search.hpp>

#include <set>

using namespace kumo;
using namespace kumo::testing;

namespace
{

std::vector<std::string> names(std::size_t n)
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back("n" + std::to_string(i));
    return out;
}

EdgeList clique(std::size_t from, std::size_t size)
{
    EdgeList e;
    for (std::size_t i = from; i < from + size; ++i)
        for (std::size_t j = i + 1; j < from + size; ++j)
            e.emplace_back(i, j);
    return e;
}

} // namespace

TEST(Analysis, TwoTrianglesModularity)
{
    auto edges = clique(0, 3);
    const auto second = clique(3, 3);
    edges.insert(edges.end(), second.begin(), second.end());
    const auto g = DomainGraph::from_edges(names(6), edges);
    EXPECT_NEAR(modularity(g, { 0, 0, 0, 1, 1, 1 }), 0.5, 1e-9);
    EXPECT_NEAR(modularity(g, { 0, 0, 0, 0, 0, 0 }), 0.0, 1e-12);
    EXPECT_NEAR(pairwise_modularity(6, edges, { 0, 0, 0, 1, 1, 1 }), 0.5, 1e-12);
}

TEST(Analysis, LouvainRecoversPlantedCliques)
{
    for (std::size_t a = 3; a <= 5; ++a)
        for (std::size_t b = 3; a + b <= 10 && b <= 5; ++b)
            for (bool bridge : { false, true })
            {
                auto edges = clique(0, a);
                const auto second = clique(a, b);
                edges.insert(edges.end(), second.begin(), second.end());
                if (bridge)
                    edges.emplace_back(0, a);
                const std::size_t n = a + b;
                std::vector<std::size_t> planted(n, 0);
                for (std::size_t i = a; i < n; ++i)
                    planted[i] = 1;

                const auto best = best_partition(n, edges);
                ASSERT_EQ(canonical_labels(best.community), planted) << a << "+" << b << " bridge=" << bridge;

                const auto g = DomainGraph::from_edges(names(n), edges);
                for (std::uint64_t seed : { 0, 1, 2 })
                {
                    const auto p = louvain(g, seed);
                    EXPECT_EQ(canonical_labels(p.community), planted);
                    EXPECT_NEAR(p.modularity, best.modularity, 1e-9);
                    EXPECT_NEAR(modularity(g, p.community), p.modularity, 1e-12);
                    EXPECT_EQ(p.community_count(), 2u);
                }
            }
}

TEST(Analysis, LouvainNeverBeatsExhaustiveSearch)
{
    for (std::uint64_t seed = 0; seed < 15; ++seed)
    {
        Rng rng(seed);
        const std::size_t n = 6 + rng.below(3);
        EdgeList edges;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (rng.uniform() < 0.35)
                    edges.emplace_back(i, j);
        if (edges.empty())
            continue;
        const auto g = DomainGraph::from_edges(names(n), edges);
        const auto p = louvain(g, seed);
        const auto best = best_partition(n, edges);
        EXPECT_NEAR(pairwise_modularity(n, edges, p.community), p.modularity, 1e-9);
        EXPECT_LE(p.modularity, best.modularity + 1e-9);
    }
}

TEST(Analysis, EmptyGraphThrows)
{
    const auto g = DomainGraph::from_edges(names(3), {});
    EXPECT_THROW(louvain(g), EmptyGraph);
    EXPECT_THROW(modularity(g, { 0, 1, 2 }), EmptyGraph);
}

TEST(Analysis, ComponentsOfSyntheticConfigs)
{
    for (int comps : { 1, 2, 3 })
    {
        const auto cfg = fixture_config(4, "Syn", comps);
        const auto g = build_domain_graph(cfg);
        EXPECT_EQ(g.nodes.size(), cfg.truths.size());
        EXPECT_EQ(connected_components(g).size(), static_cast<std::size_t>(comps));
    }
}

TEST(Analysis, ChiSquareTail)
{
    EXPECT_NEAR(chi_square_sf(3.841, 1), 0.05, 1e-3);
    EXPECT_NEAR(chi_square_sf(5.991, 2), 0.05, 1e-3);
    // k = 2 has the closed form exp(-x/2).
    EXPECT_NEAR(chi_square_sf(4.0, 2), std::exp(-2.0), 1e-12);
    EXPECT_NEAR(chi_square_sf(0.0, 3), 1.0, 1e-12);
}

TEST(Analysis, IndependenceTestByHand)
{
    // Expected counts are all 25; statistic = 4 * 25 / 25 = 4.
    const ContingencyTable t { { { 30, 20 }, { 20, 30 } } };
    const auto r = chi_square_independence(t);
    EXPECT_NEAR(r.statistic, 4.0, 1e-12);
    EXPECT_EQ(r.dof, 1);
    EXPECT_NEAR(r.p_value, chi_square_sf(4.0, 1), 1e-15);
    EXPECT_NEAR(cramers_v(t), 0.2, 1e-12);
    EXPECT_THROW(chi_square_independence(ContingencyTable { { { 1, 0 }, { 2, 0 } } }), DegenerateMargins);
}

TEST(Analysis, CramersV)
{
    EXPECT_NEAR(cramers_v(ContingencyTable { { { 10, 0 }, { 0, 10 } } }), 1.0, 1e-12);
    EXPECT_NEAR(cramers_v(ContingencyTable { { { 5, 5 }, { 5, 5 } } }), 0.0, 1e-12);
    EXPECT_THROW(cramers_v(ContingencyTable {}), DegenerateTable);
    EXPECT_THROW(cramers_v(ContingencyTable { { { 1, 2 } } }), DegenerateTable);
}

TEST(Analysis, SplitProperties)
{
    for (std::uint64_t seed : { 1, 2, 3, 4 })
    {
        const auto cfg = fixture_config(seed, "Whole", 2);
        const auto halves = split_environment(cfg, "Left", "Right");
        EXPECT_EQ(halves.first.domain, "Left");
        EXPECT_EQ(halves.second.domain, "Right");

        std::set<std::string> a(halves.first.truths.begin(), halves.first.truths.end());
        std::set<std::string> b(halves.second.truths.begin(), halves.second.truths.end());
        for (const auto& t : a)
            EXPECT_FALSE(b.count(t)) << t;
        std::set<std::string> all(cfg.truths.begin(), cfg.truths.end());
        std::set<std::string> both = a;
        both.insert(b.begin(), b.end());
        EXPECT_EQ(both, all);

        std::multiset<std::string> actions;
        for (const auto& x : halves.first.actions)
            actions.insert(x.name);
        for (const auto& x : halves.second.actions)
            actions.insert(x.name);
        for (const auto& x : cfg.actions)
            EXPECT_EQ(actions.count(x.name), 1u) << x.name;
        EXPECT_EQ(actions.size(), cfg.actions.size());

        // Every ruled-out truth stays inside its half.
        for (const auto* half : { &halves.first, &halves.second })
        {
            std::set<std::string> own(half->truths.begin(), half->truths.end());
            for (const auto& x : half->actions)
                for (const auto& s : x.states)
                    for (const auto& r : s.ruled_out)
                        EXPECT_TRUE(own.count(r));
            EXPECT_TRUE(validate_seed_config(*half).ok) << validate_seed_config(*half).summary();
        }
    }
    EXPECT_THROW(split_environment(fixture_config(1, "One", 1)), SingleComponent);
}

TEST(Analysis, StructureSignatureAndTest)
{
    const auto t1 = make_task({ "a", "b" }, "a", { { "X", { { "p", { "b" } }, { "q", {} } }, 0 } }, "one");
    const auto t2 = make_task({ "a", "b" }, "a", { { "X", { { "p", { "b" } }, { "q", { "a", "b" } } }, 0 } }, "two");
    EXPECT_EQ(structure_signature(t1), "1,0|1");
    EXPECT_EQ(structure_signature(t2), "1,1|2");

    std::map<std::string, std::vector<bool>> trials {
        { "one", { true, true, true, false, false } },
        { "two", { false, false, true, false, true } },
    };
    const auto r = structure_performance_test({ t1, t2 }, trials);
    ASSERT_EQ(r.signatures.size(), 2u);
    EXPECT_EQ(r.table.total(), 2);
    EXPECT_NEAR(r.cramers_v, 1.0, 1e-12);

    trials["two"] = { true, true, true, true, true };
    const auto flat = structure_performance_test({ t1, t2 }, trials);
    EXPECT_EQ(flat.chi.p_value, 1.0);
    EXPECT_EQ(flat.cramers_v, 0.0);

    trials["two"] = { true };
    EXPECT_THROW(structure_performance_test({ t1, t2 }, trials), EmptyInput);
}
