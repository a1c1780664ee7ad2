// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <kumo/env_model.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace kumo
{

/// Knobs for procedurally generated seed configs.
struct SyntheticSpec
{
    std::string domain = "Synthetic";
    std::string goal = "Identify the hidden condition.";
    std::string truth_noun = "Condition";
    std::string action_noun = "Probe";
    int n_truths = 20;
    int n_actions = 24;
    int n_components = 1; // truths split into this many disconnected groups
    int min_states = 2;
    int max_states = 4;
    double numeric_fraction = 0.3;
    double exclusion_density = 0.35; // chance a component truth is ruled out by a non-baseline state
    std::uint64_t seed = 0;
};

/// Builds a valid config. Each action draws its exclusions from one component,
/// its first state rules nothing out, and numeric states are touching
/// intervals. Components are internally connected and never linked to each other.
SeedConfig synthetic_config(const SyntheticSpec& spec);

/// One sentence per (action, state) stating what the state rules out.
std::vector<std::string> reference_book_rules(const SeedConfig& cfg);

/// Prose book stating every rule of cfg; the last `omit_tail_actions`
/// actions are left out.
std::string reference_book(const SeedConfig& cfg, std::size_t omit_tail_actions = 0);

} // namespace kumo
