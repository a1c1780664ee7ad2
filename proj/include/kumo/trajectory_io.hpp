// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <kumo/simulator.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace kumo
{

std::string trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(std::string_view line);

/// Appends one line per trajectory and flushes, so a crash leaves a valid prefix.
void store_trajectories(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories);
void append_trajectory(const std::filesystem::path& path, const Trajectory& trajectory);

struct LoadedTrajectories
{
    std::vector<Trajectory> trajectories;
    std::size_t corrupt_records = 0;
    std::vector<std::string> warnings;
};

/// Reads a JSONL trajectory log, skipping (and counting) unreadable lines.
/// A missing file is an IoError; an empty file yields no trajectories.
LoadedTrajectories load_trajectories(const std::filesystem::path& path);

} // namespace kumo
