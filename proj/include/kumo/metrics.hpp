// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <kumo/simulator.hpp>

#include <map>
#include <span>
#include <string>
#include <vector>

namespace kumo
{

/// Fraction of trajectories ending in a correct identification. Throws EmptyInput.
double success_rate(std::span<const Trajectory> trajectories);

/// (actions taken - optimal) / optimal. Throws DegenerateOptimal when optimal <= 0.
double relative_action_count(const Trajectory& trajectory, double optimal);

/// Parse-error turns over all agent turns. Throws EmptyInput.
double parsing_error_rate(std::span<const Trajectory> trajectories);

/// Sample Pearson correlation. Throws ZeroVariance for a constant series.
double pearson(std::span<const double> x, std::span<const double> y);

enum class GroupKey
{
    Domain,
    Difficulty,
    Model,
};

GroupKey group_key(std::string_view name);

struct ScoreReport
{
    std::string group;
    std::size_t n = 0;
    double success_rate = 0.0;
    double rel_action_mean = 0.0; // NaN when every trajectory had a degenerate optimum
    double parse_err_rate = 0.0;
    double tokens_in = 0.0;
    double tokens_out = 0.0;
    std::size_t degenerate_optimal = 0; // excluded from rel_action_mean
};

/// Task id -> optimal expected action count.
using OptimalLookup = std::map<std::string, double>;

/// One report per distinct combination of the group keys, ordered by group
/// label. Throws MissingOptimal if a trajectory's task has no optimal entry.
std::vector<ScoreReport> aggregate(std::span<const Trajectory> trajectories, const OptimalLookup& optimal,
                                   std::span<const GroupKey> keys);

std::string reports_to_csv(std::span<const ScoreReport> reports);
std::string reports_to_table(std::span<const ScoreReport> reports);

} // namespace kumo
