// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <kumo/env_model.hpp>
#include <kumo/taskgen.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace kumo
{

std::string task_to_json(const TaskInstance& task);
TaskInstance task_from_json(std::string_view line);

std::string params_to_json(const GenParams& params);
GenParams params_from_json(std::string_view text);

struct BundleHeader
{
    std::string domain;
    std::string cfg_hash;
    GenParams params;
};

/// JSONL bundle: one header line ({"bundle": {...}}) then one task per line.
void write_task_bundle(const std::filesystem::path& path, const BundleHeader& header,
                       const std::vector<TaskInstance>& tasks);
std::string task_bundle_text(const BundleHeader& header, const std::vector<TaskInstance>& tasks);

struct TaskBundle
{
    BundleHeader header;
    std::vector<TaskInstance> tasks;
};
TaskBundle read_task_bundle(const std::filesystem::path& path);

/// The task's action -> state -> ruled-out mapping in the seed-config outcome
/// shape, compact single-line JSON.
std::string symbolic_book_json(const TaskInstance& task);

/// Deterministic prose rendering of the symbolic mapping; used wherever no
/// model-written book is available.
std::string render_plain_book(const TaskInstance& task);

} // namespace kumo
