// SPDX-License-Identifier: Apache-2.0
#include <kumo/errors.hpp>
#include <kumo/sat.hpp>
#include <kumo/taskgen.hpp>

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_set>

namespace kumo
{

namespace
{

bool contains(const std::vector<std::string>& v, std::string_view x)
{
    return std::find(v.begin(), v.end(), x) != v.end();
}

} // namespace

void GenParams::check(const SeedConfig& cfg) const
{
    if (n_truth <= 0 || n_valid <= 0 || n_action < 0 || count <= 0 || max_resamples <= 0)
        throw InvalidParams("n_truth, n_valid, count and max_resamples must be positive; n_action non-negative");
    if (n_valid >= n_truth)
        throw InvalidParams("n_valid must be smaller than n_truth");
    if (static_cast<std::size_t>(n_truth) > cfg.truths.size())
        throw InsufficientUniverse("n_truth = " + std::to_string(n_truth) + " exceeds the " + std::to_string(cfg.truths.size())
                                   + " truths of '" + cfg.domain + "'");
    if (static_cast<std::size_t>(n_action) > cfg.actions.size())
        throw InsufficientActions("n_action = " + std::to_string(n_action) + " exceeds the "
                                  + std::to_string(cfg.actions.size()) + " actions of '" + cfg.domain + "'");
}

const TaskAction* TaskInstance::find_action(std::string_view name) const
{
    auto it = std::find_if(actions.begin(), actions.end(), [&](const TaskAction& a) { return a.name == name; });
    return it == actions.end() ? nullptr : &*it;
}

bool TaskInstance::has_truth(std::string_view name) const
{
    return contains(truths, name);
}

std::string TaskInstance::difficulty() const
{
    const auto t = truths.size();
    const auto a = actions.size();
    if (t == 4 && a == 6)
        return "easy";
    if (t == 12 && a == 16)
        return "hard";
    return "t" + std::to_string(t) + "a" + std::to_string(a);
}

std::vector<std::string> check_task_invariants(const TaskInstance& task)
{
    std::vector<std::string> problems;
    auto fail = [&](std::string msg) { problems.push_back(std::move(msg)); };

    if (!task.has_truth(task.valid_truth))
        fail("valid truth '" + task.valid_truth + "' is not among the task truths");
    if (task.truths.size() != static_cast<std::size_t>(task.params.n_truth))
        fail("truth count " + std::to_string(task.truths.size()) + " != n_truth " + std::to_string(task.params.n_truth));
    if (task.actions.size() != static_cast<std::size_t>(task.params.n_action))
        fail("action count " + std::to_string(task.actions.size()) + " != n_action "
             + std::to_string(task.params.n_action));
    if (std::unordered_set<std::string>(task.truths.begin(), task.truths.end()).size() != task.truths.size())
        fail("duplicate truths");

    std::unordered_set<std::string> names;
    std::unordered_set<std::string> excluded_by_realized;
    for (const auto& a : task.actions)
    {
        if (!names.insert(a.name).second)
            fail("duplicate action '" + a.name + "'");
        if (a.realized >= a.states.size())
        {
            fail("action '" + a.name + "' has no realized state");
            continue;
        }
        for (const auto& s : a.states)
            for (const auto& t : s.excluded)
                if (!task.has_truth(t))
                    fail("state '" + s.label + "' of '" + a.name + "' excludes out-of-task truth '" + t + "'");
        for (const auto& t : a.realized_state().excluded)
        {
            if (t == task.valid_truth)
                fail("realized outcome of '" + a.name + "' excludes the valid truth");
            excluded_by_realized.insert(t);
        }
    }
    for (const auto& t : task.truths)
        if (t != task.valid_truth && !excluded_by_realized.contains(t))
            fail("invalid truth '" + t + "' is not excluded by any realized outcome");
    return problems;
}

TruthSample sample_truths(const SeedConfig& cfg, const GenParams& params, Rng& rng)
{
    params.check(cfg);
    std::vector<std::string> pool = cfg.truths;
    // Partial Fisher-Yates: the first n_truth slots are a uniform sample without replacement.
    const auto n = static_cast<std::size_t>(params.n_truth);
    for (std::size_t i = 0; i < n; ++i)
        std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    pool.resize(n);

    TruthSample sample;
    sample.sub = pool;
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i)
        idx[i] = i;
    rng.shuffle(idx);
    std::vector<char> is_valid(n, 0);
    for (int i = 0; i < params.n_valid; ++i)
        is_valid[idx[static_cast<std::size_t>(i)]] = 1;
    for (std::size_t i = 0; i < n; ++i)
        (is_valid[i] ? sample.valid : sample.invalid).push_back(sample.sub[i]);
    return sample;
}

OutcomePool classify_outcomes(const SeedConfig& cfg, const TruthSample& sample)
{
    const std::unordered_set<std::string> sub(sample.sub.begin(), sample.sub.end());
    const std::unordered_set<std::string> valid(sample.valid.begin(), sample.valid.end());
    OutcomePool pool;
    for (std::size_t a = 0; a < cfg.actions.size(); ++a)
        for (std::size_t s = 0; s < cfg.actions[a].states.size(); ++s)
        {
            std::vector<std::string> hit;
            bool contradicts = false;
            for (const auto& t : cfg.actions[a].states[s].ruled_out)
                if (sub.contains(t))
                {
                    hit.push_back(t);
                    contradicts = contradicts || valid.contains(t);
                }
            if (hit.empty())
                continue;
            pool.related_actions.insert(a);
            if (contradicts)
                pool.contradictory.insert({ a, s });
            else
                pool.valid_outcomes.push_back({ { a, s }, std::move(hit) });
        }
    return pool;
}

std::optional<Selection> solve_selection(const OutcomePool& pool, const std::vector<std::string>& invalid,
                                         int n_action, std::uint64_t order_seed)
{
    sat::Cnf cnf;
    std::vector<sat::Var> x(pool.valid_outcomes.size());
    for (auto& v : x)
        v = cnf.new_var();

    // Unique state per action, and y_a <-> "action a has a selected state".
    std::map<std::size_t, std::vector<sat::Lit>> by_action;
    for (std::size_t i = 0; i < x.size(); ++i)
        by_action[pool.valid_outcomes[i].ref.first].push_back(sat::Lit::pos(x[i]));
    std::vector<sat::Lit> chosen_actions;
    for (const auto& [action, lits] : by_action)
    {
        cnf.at_most_one(lits);
        const auto y = sat::Lit::pos(cnf.new_var());
        cnf.define_or(y, lits);
        chosen_actions.push_back(y);
    }

    // Action limit.
    cnf.at_most_k(chosen_actions, n_action);

    // Every invalid truth is excluded by some selected outcome.
    for (const auto& t : invalid)
    {
        std::vector<sat::Lit> cover;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (contains(pool.valid_outcomes[i].excluded, t))
                cover.push_back(sat::Lit::pos(x[i]));
        if (cover.empty())
            return std::nullopt;
        cnf.add_clause(std::move(cover));
    }

    std::vector<sat::Var> order = x;
    Rng rng(order_seed);
    rng.shuffle(order);
    auto model = sat::solve(cnf, order);
    if (!model)
        return std::nullopt;

    Selection sel;
    for (std::size_t i = 0; i < x.size(); ++i)
        if ((*model)[x[i]])
            sel.push_back(pool.valid_outcomes[i].ref);
    return sel;
}

Selection pad_actions(const Selection& sel, const OutcomePool& pool, const SeedConfig& cfg,
                      const TruthSample& sample, int n_action, Rng& rng)
{
    Selection out = sel;
    std::set<std::size_t> used;
    for (const auto& [a, s] : sel)
        used.insert(a);
    const auto target = static_cast<std::size_t>(n_action);

    std::vector<std::size_t> related;
    for (auto a : pool.related_actions)
        if (!used.contains(a))
            related.push_back(a);
    rng.shuffle(related);
    for (auto a : related)
    {
        if (out.size() >= target)
            break;
        std::vector<std::size_t> ok;
        for (std::size_t s = 0; s < cfg.actions[a].states.size(); ++s)
            if (!pool.contradictory.contains({ a, s }))
                ok.push_back(s);
        if (ok.empty())
            continue; // every state of this action contradicts the valid truth
        out.emplace_back(a, ok[rng.below(ok.size())]);
        used.insert(a);
    }

    std::vector<std::size_t> irrelevant;
    for (std::size_t a = 0; a < cfg.actions.size(); ++a)
        if (!used.contains(a) && !pool.related_actions.contains(a))
            irrelevant.push_back(a);
    rng.shuffle(irrelevant);
    for (auto a : irrelevant)
    {
        if (out.size() >= target)
            break;
        out.emplace_back(a, rng.below(cfg.actions[a].states.size()));
    }

    if (out.size() < target)
        throw InsufficientActions("only " + std::to_string(out.size()) + " usable actions for "
                                  + std::to_string(target) + " slots with " + std::to_string(sample.sub.size())
                                  + " truths in '" + cfg.domain + "'");
    return out;
}

std::optional<TaskInstance> generate_instance(const SeedConfig& cfg, const GenParams& params,
                                              std::uint64_t instance_seed)
{
    if (params.n_valid != 1)
        throw InvalidParams("task instances are played with exactly one valid truth");
    Rng rng(instance_seed);
    auto sample = sample_truths(cfg, params, rng);
    auto pool = classify_outcomes(cfg, sample);
    auto sel = solve_selection(pool, sample.invalid, params.n_action, rng.next());
    if (!sel)
        return std::nullopt;

    Selection full;
    try
    {
        full = pad_actions(*sel, pool, cfg, sample, params.n_action, rng);
    }
    catch (const InsufficientActions&)
    {
        return std::nullopt;
    }
    rng.shuffle(full);

    const std::unordered_set<std::string> sub(sample.sub.begin(), sample.sub.end());
    TaskInstance task;
    task.domain = cfg.domain;
    task.truths = sample.sub;
    task.valid_truth = sample.valid.front();
    task.params = params;
    task.instance_seed = instance_seed;
    for (const auto& [a, s] : full)
    {
        const auto& spec = cfg.actions[a];
        TaskAction ta { spec.name, spec.kind, {}, s };
        for (const auto& st : spec.states)
        {
            TaskState ts { st.label, {} };
            for (const auto& t : st.ruled_out)
                if (sub.contains(t))
                    ts.excluded.push_back(t);
            ta.states.push_back(std::move(ts));
        }
        task.actions.push_back(std::move(ta));
    }
    return task;
}

std::string dedup_key(const TaskInstance& task)
{
    auto truths = task.truths;
    std::sort(truths.begin(), truths.end());
    std::vector<std::pair<std::string, std::string>> realized;
    for (const auto& a : task.actions)
        realized.emplace_back(a.name, a.realized_state().label);
    std::sort(realized.begin(), realized.end());

    // Unit separators keep the key injective for arbitrary names.
    std::ostringstream key;
    for (const auto& t : truths)
        key << t << '\x1f';
    key << '\x1e' << task.valid_truth << '\x1e';
    for (const auto& [a, s] : realized)
        key << a << '\x1f' << s << '\x1d';
    return key.str();
}

std::vector<TaskInstance> generate_tasks(const SeedConfig& cfg, const GenParams& params)
{
    params.check(cfg);
    if (auto report = validate_seed_config(cfg); !report.ok)
        throw InvalidConfig("config '" + cfg.domain + "' is invalid: " + report.summary());

    std::vector<TaskInstance> tasks;
    std::unordered_set<std::string> seen;
    for (int slot = 0; slot < params.count; ++slot)
    {
        bool placed = false;
        for (int attempt = 0; attempt < params.max_resamples && !placed; ++attempt)
        {
            const auto seed = derive_seed(params.rng_seed,
                                          { static_cast<std::uint64_t>(slot), static_cast<std::uint64_t>(attempt) });
            auto task = generate_instance(cfg, params, seed);
            if (!task || !seen.insert(dedup_key(*task)).second)
                continue;
            task->id = cfg.domain + "-" + task->difficulty() + "-s" + std::to_string(params.rng_seed) + "-"
                       + std::to_string(slot);
            tasks.push_back(std::move(*task));
            placed = true;
        }
        if (!placed)
            throw GenerationExhausted("slot " + std::to_string(slot) + " of '" + cfg.domain + "': no new satisfiable instance in "
                                      + std::to_string(params.max_resamples) + " draws");
    }
    return tasks;
}

} // namespace kumo
