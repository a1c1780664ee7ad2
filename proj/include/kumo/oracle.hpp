// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <kumo/taskgen.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kumo
{

/// Task outcomes as truth bitmasks: bit i stands for task.truths[i].
struct ExclusionModel
{
    std::size_t n_truths = 0;
    std::vector<std::vector<std::uint64_t>> state_masks; // [action][state]

    static ExclusionModel from_task(const TaskInstance& task);

    [[nodiscard]] std::size_t n_actions() const noexcept { return state_masks.size(); }
    [[nodiscard]] std::uint64_t all_truths() const noexcept;
    [[nodiscard]] std::uint64_t all_actions() const noexcept;
    /// Union of what any state of the action can rule out.
    [[nodiscard]] std::uint64_t related(std::size_t action) const;
};

/// Remaining candidate truths and unused actions, each as a bitmask over task indices.
struct SearchState
{
    std::uint64_t truths = 0;
    std::uint64_t actions = 0;

    /// Combined key: truth bits at [0, |T|), action bits at [|T|, |T|+|A|).
    [[nodiscard]] std::uint64_t key(std::size_t n_truths) const noexcept { return truths | (actions << n_truths); }
};

struct MemoEntry
{
    double expected_steps = 0.0;
    std::optional<std::size_t> best_action; // none on base cases
};

struct SearchOptions
{
    bool memoize = true;
    bool prune = true;
    double epsilon = 1e-9;
};

/// Minimal expected number of actions to pin down the valid truth, assuming
/// a uniform distribution over the remaining candidates.
///
/// One instance owns one memo table, keyed by the combined bitmask and only
/// meaningful for the model it was built with.
class OptimalSearch
{
public:
    static constexpr std::size_t MaxElements = 62;

    explicit OptimalSearch(ExclusionModel model, SearchOptions options = {});

    MemoEntry solve(SearchState state);
    MemoEntry solve_root() { return solve({ _model.all_truths(), _model.all_actions() }); }

    /// True when no action is needed: at most one candidate, no actions left,
    /// or some candidate that no remaining action can rule out.
    [[nodiscard]] bool is_base(SearchState state) const;

    /// Drops actions that cannot rule out any remaining candidate; does not change the value.
    [[nodiscard]] SearchState canonical(SearchState state) const;

    [[nodiscard]] const ExclusionModel& model() const noexcept { return _model; }
    [[nodiscard]] std::size_t memo_size() const noexcept { return _memo.size(); }
    [[nodiscard]] std::size_t expansions() const noexcept { return _expansions; }

private:
    ExclusionModel _model;
    struct Node
    {
        double value = 0.0;
        std::optional<std::size_t> best_action;
        bool exact = true; // false: value is a lower bound
    };

    // Open-addressing table; keys never use all 64 bits, so ~0 marks an empty slot.
    class Memo
    {
    public:
        [[nodiscard]] std::size_t size() const noexcept { return _size; }
        [[nodiscard]] const Node* find(std::uint64_t key) const;
        void put(std::uint64_t key, const Node& node);

    private:
        [[nodiscard]] std::size_t slot(std::uint64_t key) const;
        void grow();

        struct Slot
        {
            std::uint64_t tagged = Empty; // key | exact flag in bit 63
            double value = 0.0;
        };
        static constexpr std::uint64_t Empty = ~std::uint64_t { 0 };
        static constexpr std::uint64_t ExactBit = std::uint64_t { 1 } << 63;

        std::vector<Slot> _slots;
        std::vector<std::uint8_t> _best; // 0xFF = none
        std::size_t _size = 0;
    };

    struct Outcome
    {
        double p;
        double lower;      // admissible bound on the child's value
        double later;      // sum of p * lower over the following outcomes
        SearchState child;
        bool base;
    };
    struct Candidate
    {
        std::size_t action;
        double spread;
        double bound; // sum of p * lower over all outcomes
        std::size_t first;
        std::size_t count;
    };

    SearchState canonical_fast(SearchState state, bool& base) const;
    MemoEntry full(SearchState state);
    /// Exact value when it is below cap, else a lower bound of at least cap.
    Node bounded(SearchState state, double cap);

    SearchOptions _options;
    std::vector<std::uint64_t> _related;
    Memo _memo;
    std::vector<Outcome> _outcomes;     // scratch stack shared by the recursion
    std::vector<Candidate> _candidates; // ditto
    std::size_t _expansions = 0;
};

/// The truth forced by the observations so far, if the state is a base case:
/// the single candidate, or the one candidate no remaining action can rule out.
std::optional<std::size_t> deduce_truth(const ExclusionModel& model, SearchState state);

/// Root expected value of the search; the reference for relative action count.
double optimal_action_count(const TaskInstance& task, SearchOptions options = {});

/// Exhaustive minimum over every deterministic policy, without memoization or
/// pruning. Independent check for OptimalSearch on small tasks.
double brute_force_expected_steps(const TaskInstance& task, double epsilon = 1e-9);

struct GoldenTurn
{
    std::string action;
    std::string observation;

    friend bool operator==(const GoldenTurn&, const GoldenTurn&) = default;
};

struct GoldenTrajectory
{
    std::string task_id;
    std::string system_preamble;
    std::vector<GoldenTurn> turns;
    std::string final_prediction;

    friend bool operator==(const GoldenTrajectory&, const GoldenTrajectory&) = default;
};

/// Plays the task with the optimal policy against its realized outcomes.
GoldenTrajectory golden_trajectory(const TaskInstance& task);

/// Replays the turns against the task; true if every observation matches and
/// the prediction is the valid truth.
bool replay_matches(const GoldenTrajectory& golden, const TaskInstance& task);

std::string golden_to_json(const GoldenTrajectory& golden);

} // namespace kumo
