// SPDX-License-Identifier: Apache-2.0
#include <kumo/errors.hpp>
#include <kumo/oracle.hpp>
#include <kumo/rng.hpp>
#include <kumo/task_io.hpp>

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <limits>

namespace kumo
{

namespace
{

std::uint64_t low_bits(std::size_t n)
{
    return n >= 64 ? ~std::uint64_t { 0 } : (std::uint64_t { 1 } << n) - 1;
}

bool has_bit(std::uint64_t mask, std::size_t i)
{
    return (mask >> i) & 1U;
}

} // namespace

ExclusionModel ExclusionModel::from_task(const TaskInstance& task)
{
    if (task.truths.size() + task.actions.size() > OptimalSearch::MaxElements)
        throw StateSpaceTooLarge(std::to_string(task.truths.size()) + " truths + " + std::to_string(task.actions.size())
                                 + " actions exceed the " + std::to_string(OptimalSearch::MaxElements) + "-bit state key");
    ExclusionModel m;
    m.n_truths = task.truths.size();
    for (const auto& a : task.actions)
    {
        std::vector<std::uint64_t> masks;
        for (const auto& s : a.states)
        {
            std::uint64_t mask = 0;
            for (const auto& t : s.excluded)
                for (std::size_t i = 0; i < task.truths.size(); ++i)
                    if (task.truths[i] == t)
                        mask |= std::uint64_t { 1 } << i;
            masks.push_back(mask);
        }
        m.state_masks.push_back(std::move(masks));
    }
    return m;
}

std::uint64_t ExclusionModel::all_truths() const noexcept
{
    return low_bits(n_truths);
}

std::uint64_t ExclusionModel::all_actions() const noexcept
{
    return low_bits(state_masks.size());
}

std::uint64_t ExclusionModel::related(std::size_t action) const
{
    std::uint64_t mask = 0;
    for (auto m : state_masks.at(action))
        mask |= m;
    return mask;
}

OptimalSearch::OptimalSearch(ExclusionModel model, SearchOptions options)
    : _model(std::move(model)), _options(options)
{
    if (_model.n_truths + _model.n_actions() > MaxElements)
        throw StateSpaceTooLarge("state key wider than " + std::to_string(MaxElements) + " bits");
    for (std::size_t a = 0; a < _model.n_actions(); ++a)
        _related.push_back(_model.related(a));
}

SearchState OptimalSearch::canonical(SearchState state) const
{
    // An action that cannot rule out any remaining candidate is never strictly
    // better than skipping it, and does not affect the base-case test.
    for (std::size_t a = 0; a < _related.size(); ++a)
        if (has_bit(state.actions, a) && (_related[a] & state.truths) == 0)
            state.actions &= ~(std::uint64_t { 1 } << a);
    return state;
}

bool OptimalSearch::is_base(SearchState state) const
{
    if (std::popcount(state.truths) <= 1 || state.actions == 0)
        return true;
    std::uint64_t reachable = 0;
    for (std::size_t a = 0; a < _related.size(); ++a)
        if (has_bit(state.actions, a))
            reachable |= _related[a];
    return (state.truths & ~reachable) != 0;
}

SearchState OptimalSearch::canonical_fast(SearchState state, bool& base) const
{
    std::uint64_t reachable = 0;
    for (auto rest = state.actions; rest != 0; rest &= rest - 1)
    {
        const auto a = static_cast<std::size_t>(std::countr_zero(rest));
        if ((_related[a] & state.truths) == 0)
            state.actions &= ~(std::uint64_t { 1 } << a);
        else
            reachable |= _related[a];
    }
    base = std::popcount(state.truths) <= 1 || state.actions == 0 || (state.truths & ~reachable) != 0;
    return state;
}

MemoEntry OptimalSearch::solve(SearchState state)
{
    bool base = false;
    state = canonical_fast(state, base);
    if (base)
        return { 0.0, std::nullopt };
    if (!_options.prune)
        return full(state);
    const auto r = bounded(state, std::numeric_limits<double>::infinity());
    return { r.value, r.best_action };
}

std::size_t OptimalSearch::Memo::slot(std::uint64_t key) const
{
    const auto mask = _slots.size() - 1;
    auto i = static_cast<std::size_t>(mix64(key)) & mask;
    while (_slots[i].tagged != Empty && (_slots[i].tagged & ~ExactBit) != key)
        i = (i + 1) & mask;
    return i;
}

const OptimalSearch::Node* OptimalSearch::Memo::find(std::uint64_t key) const
{
    if (_slots.empty())
        return nullptr;
    const auto i = slot(key);
    const auto& s = _slots[i];
    if (s.tagged == Empty)
        return nullptr;
    thread_local Node node;
    node.value = s.value;
    node.exact = (s.tagged & ExactBit) != 0;
    node.best_action = _best[i] == 0xFF ? std::nullopt : std::optional<std::size_t>(_best[i]);
    return &node;
}

void OptimalSearch::Memo::put(std::uint64_t key, const Node& node)
{
    if ((_size + 1) * 10 > _slots.size() * 7)
        grow();
    const auto i = slot(key);
    if (_slots[i].tagged == Empty)
        ++_size;
    _slots[i] = { key | (node.exact ? ExactBit : 0), node.value };
    _best[i] = node.best_action ? static_cast<std::uint8_t>(*node.best_action) : std::uint8_t { 0xFF };
}

void OptimalSearch::Memo::grow()
{
    auto slots = std::move(_slots);
    auto best = std::move(_best);
    const auto capacity = slots.empty() ? std::size_t { 1024 } : slots.size() * 2;
    _slots.assign(capacity, Slot {});
    _best.assign(capacity, 0xFF);
    for (std::size_t j = 0; j < slots.size(); ++j)
        if (slots[j].tagged != Empty)
        {
            const auto i = slot(slots[j].tagged & ~ExactBit);
            _slots[i] = slots[j];
            _best[i] = best[j];
        }
}

MemoEntry OptimalSearch::full(SearchState state)
{
    const auto key = state.key(_model.n_truths);
    if (_options.memoize)
        if (const auto* hit = _memo.find(key))
            return { hit->value, hit->best_action };

    ++_expansions;
    const auto current = static_cast<double>(std::popcount(state.truths));
    double best = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> best_action;
    for (auto rest = state.actions; rest != 0; rest &= rest - 1)
    {
        const auto a = static_cast<std::size_t>(std::countr_zero(rest));
        const auto next_actions = state.actions & ~(std::uint64_t { 1 } << a);
        const auto& states = _model.state_masks[a];

        double z = _options.epsilon;
        for (auto m : states)
            z += current - static_cast<double>(std::popcount(m & state.truths));

        double expected = 0.0;
        for (auto m : states)
        {
            const auto remaining = state.truths & ~m;
            const auto weight = static_cast<double>(std::popcount(remaining));
            if (weight == 0.0)
                continue; // impossible outcome
            expected += (weight / z) * solve({ remaining, next_actions }).expected_steps;
        }
        if (expected < best)
        {
            best = expected;
            best_action = a;
        }
    }

    MemoEntry entry { 1.0 + best, best_action };
    if (_options.memoize)
        _memo.put(key, Node { entry.expected_steps, entry.best_action, true });
    return entry;
}

OptimalSearch::Node OptimalSearch::bounded(SearchState state, double cap)
{
    // Any state that still needs an action costs at least one.
    if (cap <= 1.0)
        return { 1.0, std::nullopt, false };

    const auto key = state.key(_model.n_truths);
    double known_lower = 1.0;
    if (_options.memoize)
        if (const auto* hit = _memo.find(key))
        {
            if (hit->exact || hit->value >= cap)
                return *hit;
            known_lower = hit->value;
        }

    ++_expansions;
    const auto current = static_cast<double>(std::popcount(state.truths));
    const auto outcome_base = _outcomes.size();
    const auto candidate_base = _candidates.size();

    for (auto rest = state.actions; rest != 0; rest &= rest - 1)
    {
        const auto a = static_cast<std::size_t>(std::countr_zero(rest));
        const auto next_actions = state.actions & ~(std::uint64_t { 1 } << a);
        const auto& states = _model.state_masks[a];

        double z = _options.epsilon, sq = 0.0;
        for (auto m : states)
        {
            const auto w = current - static_cast<double>(std::popcount(m & state.truths));
            z += w;
            sq += w * w;
        }
        Candidate c { a, sq / z, 0.0, _outcomes.size(), 0 };
        for (auto m : states)
        {
            const auto remaining = state.truths & ~m;
            const auto weight = static_cast<double>(std::popcount(remaining));
            if (weight == 0.0)
                continue; // impossible outcome
            Outcome o { weight / z, 0.0, 0.0, {}, false };
            o.child = canonical_fast({ remaining, next_actions }, o.base);
            if (!o.base)
            {
                o.lower = 1.0;
            }
            _outcomes.push_back(o);
            ++c.count;
        }
        double later = 0.0;
        for (auto i = c.first + c.count; i-- > c.first;)
        {
            _outcomes[i].later = later;
            later += _outcomes[i].p * _outcomes[i].lower;
        }
        c.bound = later;
        _candidates.push_back(c);
    }
    // Promising actions first so the incumbent tightens early; ties still go
    // to the lowest index, so the order never changes the result.
    auto before = [](const Candidate& x, const Candidate& y) {
        return x.bound != y.bound ? x.bound < y.bound : x.spread < y.spread;
    };
    for (auto i = candidate_base + 1; i < _candidates.size(); ++i)
        for (auto j = i; j > candidate_base && before(_candidates[j], _candidates[j - 1]); --j)
            std::swap(_candidates[j], _candidates[j - 1]);

    // Slack keeps near-ties exact despite rounding in the budgets.
    constexpr double slack = 1e-9;
    const double need = cap - 1.0; // a candidate matters only below this
    bool found = false;
    double best = 0.0;
    std::optional<std::size_t> best_action;
    double min_lower = std::numeric_limits<double>::infinity();

    for (auto ci = candidate_base; ci < _candidates.size(); ++ci)
    {
        const auto c = _candidates[ci];
        const double limit = found ? best : need;
        if (c.bound > limit + slack)
        {
            min_lower = std::min(min_lower, c.bound);
            continue;
        }
        double expected = 0.0;
        bool cut = false;
        for (auto i = c.first; i < c.first + c.count; ++i)
        {
            const auto o = _outcomes[i];
            if (o.base)
                continue; // contributes p * 0
            const auto r = bounded(o.child, (limit + slack - expected - o.later) / o.p);
            if (!r.exact)
            {
                min_lower = std::min(min_lower, expected + o.p * r.value + o.later);
                cut = true;
                break;
            }
            expected += o.p * r.value;
        }
        if (cut)
            continue;
        if (!found)
        {
            if (expected < need)
            {
                found = true;
                best = expected;
                best_action = c.action;
            }
            else
                min_lower = std::min(min_lower, expected);
        }
        else if (expected < best || (expected == best && c.action < *best_action))
        {
            best = expected;
            best_action = c.action;
        }
    }
    _outcomes.resize(outcome_base);
    _candidates.resize(candidate_base);

    // Without a winner, every candidate was shown to reach the cap.
    const Node node = found ? Node { 1.0 + best, best_action, true }
                            : Node { std::max({ 1.0 + min_lower, cap, known_lower }), std::nullopt, false };
    if (_options.memoize)
        _memo.put(key, node);
    return node;
}

std::optional<std::size_t> deduce_truth(const ExclusionModel& model, SearchState state)
{
    const auto n = std::popcount(state.truths);
    if (n == 0)
        return std::nullopt;
    if (n == 1)
        return static_cast<std::size_t>(std::countr_zero(state.truths));
    std::uint64_t reachable = 0;
    for (std::size_t a = 0; a < model.n_actions(); ++a)
        if (has_bit(state.actions, a))
            reachable |= model.related(a);
    const auto stuck = state.truths & ~reachable;
    if (std::popcount(stuck) != 1)
        return std::nullopt;
    return static_cast<std::size_t>(std::countr_zero(stuck));
}

double optimal_action_count(const TaskInstance& task, SearchOptions options)
{
    OptimalSearch search(ExclusionModel::from_task(task), options);
    return search.solve_root().expected_steps;
}

namespace
{

std::string golden_rules(const TaskInstance& task)
{
    std::string text =
        "You are playing a deduction game in the " + task.domain
        + " domain. Exactly one of the candidate truths is valid. Each action reveals one observed outcome; "
          "an outcome rules out the truths listed for it in the knowledge book and never confirms anything. "
          "Reply with <ACTION>name</ACTION> to take an action or <ANSWER>truth</ANSWER> to name the valid truth. "
          "Use as few actions as possible.\n\nCandidate truths: ";
    for (std::size_t i = 0; i < task.truths.size(); ++i)
        text += (i ? ", " : "") + task.truths[i];
    text += "\nActions: ";
    for (std::size_t i = 0; i < task.actions.size(); ++i)
        text += (i ? ", " : "") + task.actions[i].name;
    text += "\n\nKnowledge book (action -> outcome -> ruled-out truths):\n" + symbolic_book_json(task);
    return text;
}

} // namespace

GoldenTrajectory golden_trajectory(const TaskInstance& task)
{
    auto model = ExclusionModel::from_task(task);
    OptimalSearch search(model);
    GoldenTrajectory golden;
    golden.task_id = task.id;
    golden.system_preamble = golden_rules(task);

    SearchState state { model.all_truths(), model.all_actions() };
    for (;;)
    {
        auto entry = search.solve(state);
        if (!entry.best_action)
            break;
        const auto a = *entry.best_action;
        const auto& action = task.actions[a];
        golden.turns.push_back({ action.name, action.realized_state().label });
        state.truths &= ~model.state_masks[a][action.realized];
        state.actions &= ~(std::uint64_t { 1 } << a);
    }
    auto truth = deduce_truth(model, state);
    if (!truth || task.truths[*truth] != task.valid_truth)
        throw InvalidTask("task '" + task.id + "' does not determine its valid truth from its realized outcomes");
    golden.final_prediction = task.truths[*truth];
    return golden;
}

bool replay_matches(const GoldenTrajectory& golden, const TaskInstance& task)
{
    if (golden.final_prediction != task.valid_truth || golden.turns.size() > task.actions.size())
        return false;
    for (const auto& turn : golden.turns)
    {
        const auto* a = task.find_action(turn.action);
        if (!a || a->realized_state().label != turn.observation)
            return false;
    }
    return true;
}

std::string golden_to_json(const GoldenTrajectory& golden)
{
    nlohmann::ordered_json turns = nlohmann::ordered_json::array();
    for (const auto& t : golden.turns)
        turns.push_back({ { "action", t.action }, { "observation", t.observation } });
    return nlohmann::ordered_json {
        { "task_id", golden.task_id },
        { "preamble", golden.system_preamble },
        { "turns", std::move(turns) },
        { "prediction", golden.final_prediction },
    }
        .dump();
}

} // namespace kumo
