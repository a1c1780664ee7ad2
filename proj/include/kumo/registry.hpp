// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <kumo/env_model.hpp>

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace kumo
{

struct EnvironmentEntry
{
    std::string name;
    std::filesystem::path config_path;
};

/// Directory of seed-config documents plus an index file ("name\tpath" per line).
///
/// Writes are serialized within a process; concurrent readers see either the
/// old or the new index because the index is replaced atomically.
class Registry
{
public:
    explicit Registry(std::filesystem::path root);

    /// Registers a validated config under cfg.domain.
    /// Throws InvalidConfig if validation fails and DuplicateEnvironment if the name exists.
    EnvironmentEntry register_environment(const DomainProposal& proposal, const SeedConfig& cfg);

    [[nodiscard]] std::vector<EnvironmentEntry> list() const;
    [[nodiscard]] std::optional<EnvironmentEntry> find(const std::string& name) const;
    [[nodiscard]] SeedConfig load(const std::string& name) const;
    [[nodiscard]] std::optional<DomainProposal> load_proposal(const std::string& name) const;

    /// Knowledge book stored next to the config.
    void save_book(const std::string& name, const std::string& book) const;
    [[nodiscard]] std::optional<std::string> load_book(const std::string& name) const;

    [[nodiscard]] const std::filesystem::path& root() const noexcept { return _root; }

    static constexpr const char* IndexFile = "index.tsv";

private:
    std::filesystem::path _root;
    mutable std::mutex _mutex;
};

} // namespace kumo
