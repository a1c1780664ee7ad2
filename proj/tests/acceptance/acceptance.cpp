// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <kumo/agents.hpp>
#include <kumo/analysis.hpp>
#include <kumo/cli.hpp>
#include <kumo/env_model.hpp>
#include <kumo/llm.hpp>
#include <kumo/llm_gen.hpp>
#include <kumo/metrics.hpp>
#include <kumo/oracle.hpp>
#include <kumo/simulator.hpp>
#include <kumo/task_io.hpp>
#include <kumo/taskgen.hpp>

#include <fixtures.hpp>
#include <partition_search.hpp>
#include <reference_oracle.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace kumo;
using namespace kumo::testing;

namespace
{

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict
{
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const char* id, const char* name, const std::function<Verdict()>& check)
{
    Verdict v;
    const auto t0 = Clock::now();
    try
    {
        v = check();
    }
    catch (const std::exception& e)
    {
        v = { false, std::string("exception: ") + e.what() };
    }
    const double dt = seconds_since(t0);
    if (!v.pass)
        ++failures;
    std::printf("[%s] %s %s: %s (%.2fs)\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(), dt);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

/// Independent soundness check of a generated task against its config.
bool sound(const TaskInstance& t, const SeedConfig& cfg, const GenParams& p)
{
    if (t.truths.size() != static_cast<std::size_t>(p.n_truth) || t.actions.size() != static_cast<std::size_t>(p.n_action))
        return false;
    const std::set<std::string> truths(t.truths.begin(), t.truths.end());
    if (truths.size() != t.truths.size() || !truths.count(t.valid_truth))
        return false;
    std::set<std::string> excluded;
    std::set<std::string> names;
    for (const auto& a : t.actions)
    {
        const auto* spec = cfg.find_action(a.name);
        if (!spec || !names.insert(a.name).second || a.states.size() != spec->states.size() || a.realized >= a.states.size())
            return false;
        for (std::size_t s = 0; s < a.states.size(); ++s)
        {
            std::set<std::string> expect;
            for (const auto& r : spec->states[s].ruled_out)
                if (truths.count(r))
                    expect.insert(r);
            if (std::set<std::string>(a.states[s].excluded.begin(), a.states[s].excluded.end()) != expect)
                return false;
        }
        for (const auto& x : a.states[a.realized].excluded)
        {
            if (x == t.valid_truth)
                return false;
            excluded.insert(x);
        }
    }
    for (const auto& x : t.truths)
        if (x != t.valid_truth && !excluded.count(x))
            return false;
    return true;
}

Verdict generator()
{
    const auto t0 = Clock::now();
    std::size_t total = 0, bad = 0, dup = 0;
    std::set<std::string> configs;
    for (int c = 0; c < 4; ++c)
    {
        const auto cfg = fixture_config(500 + c, "Gen" + std::to_string(c));
        configs.insert(config_hash(cfg));
        for (auto p : { EasyParams, HardParams })
        {
            p.count = 125;
            p.rng_seed = 1000 + c;
            std::set<std::string> keys;
            for (const auto& t : generate_tasks(cfg, p))
            {
                ++total;
                bad += !sound(t, cfg, p) || !check_task_invariants(t).empty();
                dup += !keys.insert(dedup_key(t)).second;
            }
        }
    }
    const double dt = seconds_since(t0);
    const bool ok = total == 1000 && bad == 0 && dup == 0 && configs.size() >= 3 && dt < 60.0;
    return { ok, std::to_string(total) + " tasks over " + std::to_string(configs.size()) + " configs, " + std::to_string(bad)
                     + " unsound, " + std::to_string(dup) + " duplicates, " + fmt("%.2fs (limit 60s)", dt) };
}

Verdict oracle_exactness()
{
    double worst = 0.0;
    std::size_t memo_mismatch = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed)
    {
        const std::size_t nt = 1 + seed % 4;
        const std::size_t na = 1 + (seed / 4) % 4;
        const auto task = random_small_task(seed * 7919 + 1, nt, na);
        const double reference = reference_expected_steps(task);
        const double fast = optimal_action_count(task);
        const double brute = brute_force_expected_steps(task);
        worst = std::max({ worst, std::abs(fast - reference), std::abs(brute - reference) });
        for (bool prune : { false, true })
        {
            const double on = optimal_action_count(task, { true, prune, 1e-9 });
            const double off = optimal_action_count(task, { false, prune, 1e-9 });
            memo_mismatch += std::memcmp(&on, &off, sizeof on) != 0;
        }
    }
    return { worst <= 1e-9 && memo_mismatch == 0,
             "200 instances, max |oracle - brute force| = " + fmt("%.3g", worst) + " (tol 1e-9), memo on/off bit mismatches = "
                 + std::to_string(memo_mismatch) };
}

Verdict oracle_agent()
{
    std::vector<Trajectory> trajs;
    OptimalLookup optimal;
    std::size_t degenerate = 0;
    std::vector<double> rel;
    for (int c = 0; c < 5; ++c)
    {
        const auto cfg = fixture_config(700 + c, "Agent" + std::to_string(c));
        auto p = EasyParams;
        p.count = 100;
        p.rng_seed = 31 + c;
        for (const auto& task : generate_tasks(cfg, p))
        {
            Session s(task, render_plain_book(task));
            OracleAgent agent(task);
            auto t = run_episode(s, agent, { "oracle", 0 });
            const double opt = optimal_action_count(task);
            optimal[task.id] = opt;
            if (opt > 0.0)
                rel.push_back(relative_action_count(t, opt));
            else
                ++degenerate;
            trajs.push_back(std::move(t));
        }
    }
    const double sr = success_rate(trajs);
    double mean = 0.0;
    for (double r : rel)
        mean += r;
    mean /= static_cast<double>(rel.size());
    const bool ok = trajs.size() == 500 && sr == 1.0 && std::abs(mean) <= 0.05;
    return { ok, std::to_string(trajs.size()) + " Easy tasks, SR = " + fmt("%.4f", sr) + ", mean relative action count = "
                     + fmt("%+.4f", mean) + " (tol 0.05) over " + std::to_string(rel.size()) + " tasks; "
                     + std::to_string(degenerate) + " tasks with optimum 0 excluded" };
}

Trajectory outcome_only(TrajectoryOutcome o, int actions, int bad_turns, int good_turns)
{
    Trajectory t;
    t.task_id = "t";
    t.outcome = o;
    t.action_count = actions;
    for (int i = 0; i < bad_turns; ++i)
        t.turns.push_back({ "?", std::nullopt, ParseError {}, std::nullopt, i });
    for (int i = 0; i < good_turns; ++i)
        t.turns.push_back({ "<ACTION>A</ACTION>", Move::action("A"), std::nullopt, "s", i });
    return t;
}

Verdict metrics()
{
    std::vector<Trajectory> all;
    for (int i = 0; i < 5000; ++i)
        all.push_back(outcome_only(i < 4300 ? TrajectoryOutcome::Success : TrajectoryOutcome::WrongPrediction, 1, 0, 1));
    const double sr = success_rate(all);
    const double rel = relative_action_count(outcome_only(TrajectoryOutcome::Success, 5, 0, 5), 4.0);

    // 7 parse errors among 7 + 13 turns.
    std::vector<Trajectory> parse { outcome_only(TrajectoryOutcome::ParseFailure, 0, 3, 0),
                                    outcome_only(TrajectoryOutcome::Success, 4, 2, 5),
                                    outcome_only(TrajectoryOutcome::Success, 8, 2, 8) };
    int bad = 0;
    for (const auto& t : parse)
        bad += t.parse_error_turns();
    const double per = parsing_error_rate(parse);
    const bool ok = sr == 0.86 && rel == 0.25 && bad == 7 && per == 7.0 / 20.0;
    return { ok, "SR 4300/5000 = " + fmt("%.15g", sr) + ", rel (5-4)/4 = " + fmt("%.15g", rel) + ", parse errors = "
                     + std::to_string(bad) + "/20 rate " + fmt("%.15g", per) + " (exact)" };
}

Verdict analysis()
{
    std::vector<std::string> six { "a", "b", "c", "d", "e", "f" };
    const EdgeList triangles { { 0, 1 }, { 1, 2 }, { 0, 2 }, { 3, 4 }, { 4, 5 }, { 3, 5 } };
    const double q = modularity(DomainGraph::from_edges(six, triangles), { 0, 0, 0, 1, 1, 1 });

    std::size_t planted_cases = 0, recovered = 0;
    for (std::size_t a = 3; a <= 5; ++a)
        for (std::size_t b = 3; a + b <= 10 && b <= 5; ++b)
            for (int bridges = 0; bridges <= 1; ++bridges)
            {
                EdgeList edges;
                for (std::size_t i = 0; i < a; ++i)
                    for (std::size_t j = i + 1; j < a; ++j)
                        edges.emplace_back(i, j);
                for (std::size_t i = a; i < a + b; ++i)
                    for (std::size_t j = i + 1; j < a + b; ++j)
                        edges.emplace_back(i, j);
                if (bridges)
                    edges.emplace_back(a - 1, a);
                const std::size_t n = a + b;
                std::vector<std::string> nodes;
                for (std::size_t i = 0; i < n; ++i)
                    nodes.push_back("n" + std::to_string(i));
                std::vector<std::size_t> planted(n, 0);
                for (std::size_t i = a; i < n; ++i)
                    planted[i] = 1;
                const auto best = best_partition(n, edges);
                const auto found = louvain(DomainGraph::from_edges(nodes, edges), planted_cases);
                ++planted_cases;
                recovered += canonical_labels(best.community) == planted && canonical_labels(found.community) == planted
                             && std::abs(found.modularity - best.modularity) <= 1e-9;
            }

    const double p = chi_square_sf(3.841, 1);
    const double v = cramers_v(ContingencyTable { { { 10, 0 }, { 0, 10 } } });
    const bool ok = std::abs(q - 0.5) <= 1e-9 && recovered == planted_cases && std::abs(p - 0.05) <= 1e-3 && std::abs(v - 1.0) <= 1e-12;
    return { ok, "two-triangle Q = " + fmt("%.12f", q) + ", Louvain matched exhaustive optimum on " + std::to_string(recovered) + "/"
                     + std::to_string(planted_cases) + " planted graphs, chi2 sf(3.841, 1) = " + fmt("%.6f", p)
                     + ", Cramer's V = " + fmt("%.6f", v) };
}

Verdict split()
{
    int checked = 0, good = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
    {
        const auto cfg = fixture_config(seed, "Whole", 2 + static_cast<int>(seed % 2));
        const auto h = split_environment(cfg, "A", "B");
        ++checked;
        const std::set<std::string> a(h.first.truths.begin(), h.first.truths.end());
        const std::set<std::string> b(h.second.truths.begin(), h.second.truths.end());
        std::set<std::string> both = a;
        both.insert(b.begin(), b.end());
        bool ok = both == std::set<std::string>(cfg.truths.begin(), cfg.truths.end()) && a.size() + b.size() == cfg.truths.size();
        std::multiset<std::string> acts;
        for (const auto& x : h.first.actions)
            acts.insert(x.name);
        for (const auto& x : h.second.actions)
            acts.insert(x.name);
        ok = ok && acts.size() == cfg.actions.size();
        for (const auto& x : cfg.actions)
            ok = ok && acts.count(x.name) == 1;
        ok = ok && validate_seed_config(h.first).ok && validate_seed_config(h.second).ok;
        good += ok;
    }
    return { good == checked, std::to_string(good) + "/" + std::to_string(checked)
                                  + " splits with disjoint covering truths, each action in one half, both halves valid" };
}

struct PipelineRun
{
    int code = 0;
    std::map<std::string, std::string> files;
    std::string log;
};

PipelineRun pipeline(const TempDir& dir)
{
    PipelineRun r;
    const auto reg = (dir / "registry").string();
    auto step = [&](std::vector<std::string> args) {
        std::vector<std::string> full { "--seed", "11", "--registry", reg, "--endpoint", "mock" };
        full.insert(full.end(), args.begin(), args.end());
        std::ostringstream out, err;
        const int code = cli_main(full, out, err);
        r.log += err.str();
        if (code != 0 && r.code == 0)
            r.code = code;
    };
    step({ "--out", (dir / "proposals.json").string(), "propose", "--domain", "Lighthouse" });
    step({ "--out", (dir / "config.json").string(), "gen-seed", "--domain", "Lighthouse", "--proposal",
           (dir / "proposals.json").string(), "--register" });
    step({ "--out", (dir / "tasks.jsonl").string(), "gen-tasks", "--env", "Lighthouse", "--count", "10" });
    step({ "--out", (dir / "book.md").string(), "gen-book", "--env", "Lighthouse", "--save" });
    step({ "--out", (dir / "trajectories.jsonl").string(), "eval", "--tasks", (dir / "tasks.jsonl").string(), "--agent", "random" });
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path()))
        if (e.is_regular_file())
            r.files[std::filesystem::relative(e.path(), dir.path()).string()] = slurp(e.path());
    return r;
}

Verdict hermetic()
{
    const auto t0 = Clock::now();
    TempDir d1, d2;
    const auto a = pipeline(d1);
    const auto b = pipeline(d2);
    const double dt = seconds_since(t0);
    std::size_t bytes = 0;
    for (const auto& [_, content] : a.files)
        bytes += content.size();
    const bool has_all = a.files.count("trajectories.jsonl") && a.files.count("book.md") && a.files.count("tasks.jsonl");
    const bool ok = a.code == 0 && b.code == 0 && has_all && a.files == b.files && dt < 30.0;
    return { ok, "propose -> gen-seed -> gen-tasks(10) -> gen-book -> eval(random): exit " + std::to_string(a.code) + "/"
                     + std::to_string(b.code) + ", " + std::to_string(a.files.size()) + " files, " + std::to_string(bytes)
                     + " bytes, identical = " + (a.files == b.files ? "yes" : "no") + fmt(", %.2fs for both runs (limit 30s)", dt) };
}

Verdict truncation()
{
    Rng rng(99);
    int cases = 0, rebuilt = 0;
    for (int i = 0; i < 60; ++i)
    {
        const auto doc = serialize_seed_config(fixture_config(900 + i));
        const int chunks = 1 + i % 3;
        std::vector<std::size_t> cuts { 0 };
        for (int c = 1; c < chunks; ++c)
            cuts.push_back(cuts.back() + 1 + rng.below((doc.size() - cuts.back()) / 2));
        cuts.push_back(doc.size());
        ScriptedChatBackend backend;
        for (int c = 0; c < chunks; ++c)
            backend.push(doc.substr(cuts[c], cuts[c + 1] - cuts[c]), c + 1 < chunks ? FinishReason::Truncated : FinishReason::Complete);

        // Every third case travels through the HTTP client.
        std::unique_ptr<MockLlmServer> server;
        std::unique_ptr<HttpChatClient> client;
        ChatBackend* via = &backend;
        if (i % 3 == 2)
        {
            server = std::make_unique<MockLlmServer>(backend);
            server->start();
            client = std::make_unique<HttpChatClient>(HttpChatOptions { server->base_url(), "k", 0, 1, 10 });
            via = client.get();
        }
        const auto c = complete_with_continuation(*via, { "m", { { "user", "write" } }, std::nullopt, std::nullopt });
        ++cases;
        rebuilt += c.text == doc && c.chunks == chunks && parse_seed_config(c.text) == fixture_config(900 + i);
    }

    // The generation pipeline reassembles chunked replies into the same config.
    const DomainProposal proposal { "Find the fault.", "Faults", "Checks" };
    SimulatedLlm whole({ .seed = 2 });
    SimulatedLlm chunked({ .seed = 2, .chunk_chars = 6000 });
    const bool same = generate_seed_config(whole, "mock", "Boiler", proposal) == generate_seed_config(chunked, "mock", "Boiler", proposal);
    return { rebuilt == cases && same, std::to_string(rebuilt) + "/" + std::to_string(cases)
                                           + " documents in 1-3 chunks reconstructed exactly; chunked config generation identical = "
                                           + (same ? "yes" : "no") };
}

} // namespace

int main()
{
    report("C1", "generator", generator);
    report("C2", "oracle-exactness", oracle_exactness);
    report("C3", "oracle-agent", oracle_agent);
    report("C4", "metrics", metrics);
    report("C5", "analysis", analysis);
    report("C6", "split", split);
    report("C7", "hermetic-pipeline", hermetic);
    report("C8", "truncation", truncation);
    std::printf("%d of 8 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
