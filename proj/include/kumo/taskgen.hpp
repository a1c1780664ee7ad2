// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <kumo/env_model.hpp>
#include <kumo/rng.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace kumo
{

struct GenParams
{
    int n_truth = 4;
    int n_action = 6;
    int n_valid = 1;
    int count = 1;
    std::uint64_t rng_seed = 0;
    int max_resamples = 100;

    /// Throws InvalidParams / InsufficientUniverse when the params cannot apply to cfg.
    void check(const SeedConfig& cfg) const;

    friend bool operator==(const GenParams&, const GenParams&) = default;
};

inline constexpr GenParams EasyParams { .n_truth = 4, .n_action = 6 };
inline constexpr GenParams HardParams { .n_truth = 12, .n_action = 16 };

struct TruthSample
{
    std::vector<std::string> sub;     // in-task truths, shuffled
    std::vector<std::string> valid;   // designated valid truths
    std::vector<std::string> invalid; // sub minus valid
};

/// (action index, state index) into a SeedConfig.
using StateRef = std::pair<std::size_t, std::size_t>;

struct CandidateOutcome
{
    StateRef ref;
    std::vector<std::string> excluded; // ruled_out ∩ sub
};

struct OutcomePool
{
    std::vector<CandidateOutcome> valid_outcomes;
    std::set<StateRef> contradictory;
    std::set<std::size_t> related_actions;
};

/// Chosen (action, state) pairs; at most one state per action.
using Selection = std::vector<StateRef>;

/// One state of an action as seen inside a task: exclusions are restricted to the task's truths.
struct TaskState
{
    std::string label;
    std::vector<std::string> excluded;

    friend bool operator==(const TaskState&, const TaskState&) = default;
};

struct TaskAction
{
    std::string name;
    OutcomeKind kind = OutcomeKind::Categorical;
    std::vector<TaskState> states;
    std::size_t realized = 0; // index into states

    [[nodiscard]] const TaskState& realized_state() const { return states.at(realized); }
    friend bool operator==(const TaskAction&, const TaskAction&) = default;
};

/// A playable game. Carries the task-restricted symbolic knowledge book so it
/// is self-contained: the oracle and simulator need nothing else.
struct TaskInstance
{
    std::string id;
    std::string domain;
    std::vector<std::string> truths;
    std::string valid_truth;
    std::vector<TaskAction> actions;
    GenParams params;
    std::uint64_t instance_seed = 0;

    [[nodiscard]] const TaskAction* find_action(std::string_view name) const;
    [[nodiscard]] bool has_truth(std::string_view name) const;
    [[nodiscard]] std::string difficulty() const;

    friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

/// Lists every violated TaskInstance invariant; empty means invariant-clean.
std::vector<std::string> check_task_invariants(const TaskInstance& task);

TruthSample sample_truths(const SeedConfig& cfg, const GenParams& params, Rng& rng);

OutcomePool classify_outcomes(const SeedConfig& cfg, const TruthSample& sample);

/// Selects outcomes covering every invalid truth with at most one state per
/// action and at most n_action actions. nullopt means unsatisfiable.
std::optional<Selection> solve_selection(const OutcomePool& pool, const std::vector<std::string>& invalid,
                                         int n_action, std::uint64_t order_seed);

/// Tops the selection up to exactly n_action actions: unused related actions
/// first (with a non-contradictory state), then irrelevant ones.
Selection pad_actions(const Selection& sel, const OutcomePool& pool, const SeedConfig& cfg,
                      const TruthSample& sample, int n_action, Rng& rng);

/// Builds one instance from a single seed, or nullopt when the draw is unsatisfiable.
std::optional<TaskInstance> generate_instance(const SeedConfig& cfg, const GenParams& params,
                                              std::uint64_t instance_seed);

/// Generates params.count pairwise-distinct instances. Deterministic in (cfg, params).
std::vector<TaskInstance> generate_tasks(const SeedConfig& cfg, const GenParams& params);

/// Dedup key: truth set, valid truth, action set and realized mapping.
std::string dedup_key(const TaskInstance& task);

} // namespace kumo
