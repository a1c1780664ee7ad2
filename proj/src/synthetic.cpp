// SPDX-License-Identifier: Apache-2.0
#include <kumo/errors.hpp>
#include <kumo/rng.hpp>
#include <kumo/synthetic.hpp>

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>

namespace kumo
{

namespace
{

constexpr const char* CategoricalLabels[] = { "normal", "mild", "moderate", "severe", "absent", "present" };

std::string numbered(const std::string& noun, int i, int width)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%0*d", width, i + 1);
    return noun + " " + buf;
}

struct UnionFind
{
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n): parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x)
    {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    }
    bool unite(std::size_t a, std::size_t b)
    {
        a = find(a);
        b = find(b);
        if (a == b)
            return false;
        parent[b] = a;
        return true;
    }
};

void add_unique(std::vector<std::string>& v, const std::string& s)
{
    if (std::find(v.begin(), v.end(), s) == v.end())
        v.push_back(s);
}

} // namespace

SeedConfig synthetic_config(const SyntheticSpec& spec)
{
    if (spec.n_truths < 2 || spec.n_actions < 1 || spec.n_components < 1)
        throw InvalidParams("synthetic config needs at least 2 truths, 1 action and 1 component");
    if (spec.n_components * 2 > spec.n_truths || spec.n_components > spec.n_actions)
        throw InvalidParams("too many components for the requested truths and actions");
    if (spec.min_states < 2 || spec.max_states < spec.min_states || spec.max_states > 6)
        throw InvalidParams("states per action must satisfy 2 <= min <= max <= 6");

    Rng rng(derive_seed(spec.seed, { 0x5e, static_cast<std::uint64_t>(spec.n_truths) }));
    SeedConfig cfg;
    cfg.domain = spec.domain;
    cfg.goal = spec.goal;

    const int tw = spec.n_truths >= 100 ? 3 : 2;
    const int aw = spec.n_actions >= 100 ? 3 : 2;
    for (int i = 0; i < spec.n_truths; ++i)
        cfg.truths.push_back(numbered(spec.truth_noun, i, tw));

    // Truth and action membership per component.
    std::vector<std::size_t> truth_order(cfg.truths.size());
    std::iota(truth_order.begin(), truth_order.end(), 0);
    rng.shuffle(truth_order);
    const auto k = static_cast<std::size_t>(spec.n_components);
    std::vector<std::vector<std::size_t>> comp_truths(k), comp_actions(k);
    for (std::size_t i = 0; i < truth_order.size(); ++i)
        comp_truths[i % k].push_back(truth_order[i]);
    for (auto& c : comp_truths)
        std::sort(c.begin(), c.end());

    for (int a = 0; a < spec.n_actions; ++a)
    {
        const auto comp = static_cast<std::size_t>(a) < k ? static_cast<std::size_t>(a) : rng.below(k);
        comp_actions[comp].push_back(static_cast<std::size_t>(a));

        ActionSpec action;
        action.name = numbered(spec.action_noun, a, aw);
        const bool numeric = rng.uniform() < spec.numeric_fraction;
        action.kind = numeric ? OutcomeKind::Numeric : OutcomeKind::Categorical;
        const int n_states = spec.min_states + static_cast<int>(rng.below(static_cast<std::size_t>(spec.max_states - spec.min_states + 1)));

        int edge = 0;
        for (int s = 0; s < n_states; ++s)
        {
            OutcomeState state;
            if (numeric)
            {
                const int next = edge + 5 * (1 + static_cast<int>(rng.below(6)));
                state.label = "[" + std::to_string(edge) + "," + std::to_string(next) + "]";
                state.interval = Interval { static_cast<double>(edge), static_cast<double>(next) };
                edge = next;
            }
            else
            {
                state.label = CategoricalLabels[s];
            }
            if (s > 0)
                for (auto t : comp_truths[comp])
                    if (rng.uniform() < spec.exclusion_density)
                        state.ruled_out.push_back(cfg.truths[t]);
            action.states.push_back(std::move(state));
        }
        cfg.actions.push_back(std::move(action));
    }

    // Link every component into one connected piece and make sure every truth
    // can be ruled out somewhere.
    UnionFind uf(cfg.truths.size());
    auto index = [&](const std::string& name) {
        return static_cast<std::size_t>(std::find(cfg.truths.begin(), cfg.truths.end(), name) - cfg.truths.begin());
    };
    std::set<std::size_t> excludable;
    for (const auto& action : cfg.actions)
        for (const auto& state : action.states)
            for (std::size_t i = 0; i < state.ruled_out.size(); ++i)
            {
                excludable.insert(index(state.ruled_out[i]));
                if (i > 0)
                    uf.unite(index(state.ruled_out[0]), index(state.ruled_out[i]));
            }

    for (std::size_t c = 0; c < k; ++c)
    {
        const auto& truths = comp_truths[c];
        const auto& actions = comp_actions[c];
        auto random_state = [&]() -> OutcomeState& {
            auto& action = cfg.actions[actions[rng.below(actions.size())]];
            return action.states[1 + rng.below(action.states.size() - 1)];
        };
        for (std::size_t i = 1; i < truths.size(); ++i)
            if (uf.unite(truths[i - 1], truths[i]))
            {
                auto& state = random_state();
                add_unique(state.ruled_out, cfg.truths[truths[i - 1]]);
                add_unique(state.ruled_out, cfg.truths[truths[i]]);
                excludable.insert(truths[i - 1]);
                excludable.insert(truths[i]);
            }
        for (auto t : truths)
            if (!excludable.contains(t))
                add_unique(random_state().ruled_out, cfg.truths[t]);
    }

    // Keep ruled-out lists in truth order so the output reads predictably.
    for (auto& action : cfg.actions)
        for (auto& state : action.states)
            std::sort(state.ruled_out.begin(), state.ruled_out.end(),
                      [&](const std::string& a, const std::string& b) { return index(a) < index(b); });

    if (auto report = validate_seed_config(cfg); !report.ok)
        throw InvalidConfig("synthetic config failed validation: " + report.summary());
    return cfg;
}

namespace
{

std::string join_names(const std::vector<std::string>& names)
{
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i)
    {
        if (i > 0)
            out += i + 1 == names.size() ? " and " : ", ";
        out += names[i];
    }
    return out;
}

std::string rule_sentence(const ActionSpec& action, const OutcomeState& state)
{
    const std::string shown = action.kind == OutcomeKind::Numeric ? "a value in " + state.label : "'" + state.label + "'";
    if (state.ruled_out.empty())
        return "When " + action.name + " shows " + shown + ", no candidate is ruled out.";
    return "When " + action.name + " shows " + shown + ", this rules out " + join_names(state.ruled_out) + ".";
}

} // namespace

std::vector<std::string> reference_book_rules(const SeedConfig& cfg)
{
    std::vector<std::string> out;
    for (const auto& action : cfg.actions)
        for (const auto& state : action.states)
            out.push_back(rule_sentence(action, state));
    return out;
}

std::string reference_book(const SeedConfig& cfg, std::size_t omit_tail_actions)
{
    std::string out = "# " + cfg.domain + " knowledge book\n\n" + cfg.goal + "\n\nThe candidates are " + join_names(cfg.truths)
                      + ". Exactly one of them holds. Each action below shows one outcome, and an outcome can only "
                        "rule candidates out.\n";
    const auto keep = cfg.actions.size() - std::min(omit_tail_actions, cfg.actions.size());
    for (std::size_t a = 0; a < keep; ++a)
    {
        const auto& action = cfg.actions[a];
        out += "\n## " + action.name + "\n\n";
        out += action.kind == OutcomeKind::Numeric ? "This action reports a measured value." : "This action reports a category.";
        out += "\n";
        for (const auto& state : action.states)
            out += "- " + rule_sentence(action, state) + "\n";
    }
    return out;
}

} // namespace kumo
