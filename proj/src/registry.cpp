// SPDX-License-Identifier: Apache-2.0
#include <kumo/errors.hpp>
#include <kumo/registry.hpp>

#include <cctype>
#include <fstream>
#include <sstream>

namespace kumo
{

namespace fs = std::filesystem;

namespace
{

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text))
        throw IoError("cannot write " + p.string());
}

// File names are derived from environment names; keep them portable.
std::string file_stem(const std::string& name)
{
    std::string out;
    for (unsigned char c : name)
        out += (std::isalnum(c) || c == '-' || c == '_') ? static_cast<char>(c) : '_';
    return out.empty() ? "env" : out;
}

std::vector<EnvironmentEntry> read_index(const fs::path& root)
{
    std::vector<EnvironmentEntry> entries;
    std::ifstream in(root / Registry::IndexFile);
    std::string line;
    while (std::getline(in, line))
    {
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            continue;
        fs::path p = line.substr(tab + 1);
        entries.push_back({ line.substr(0, tab), p.is_absolute() ? p : root / p });
    }
    return entries;
}

} // namespace

Registry::Registry(fs::path root): _root(std::move(root))
{
    fs::create_directories(_root);
}

EnvironmentEntry Registry::register_environment(const DomainProposal& proposal, const SeedConfig& cfg)
{
    if (auto report = validate_seed_config(cfg); !report.ok)
        throw InvalidConfig("cannot register '" + cfg.domain + "': " + report.summary());

    std::lock_guard lock(_mutex);
    auto entries = read_index(_root);
    for (const auto& e : entries)
        if (e.name == cfg.domain)
            throw DuplicateEnvironment("environment '" + cfg.domain + "' is already registered");

    auto stem = file_stem(cfg.domain);
    for (int n = 2; fs::exists(_root / (stem + ".json")); ++n)
        stem = file_stem(cfg.domain) + "_" + std::to_string(n);

    write_file(_root / (stem + ".json"), serialize_seed_config(cfg) + "\n");
    write_file(_root / (stem + ".proposal.json"), serialize_proposal(proposal) + "\n");

    std::ostringstream index;
    for (const auto& e : entries)
        index << e.name << '\t' << fs::relative(e.config_path, _root).string() << '\n';
    index << cfg.domain << '\t' << stem << ".json\n";
    const auto tmp = _root / (std::string(IndexFile) + ".tmp");
    write_file(tmp, index.str());
    fs::rename(tmp, _root / IndexFile);

    return { cfg.domain, _root / (stem + ".json") };
}

std::vector<EnvironmentEntry> Registry::list() const
{
    std::lock_guard lock(_mutex);
    return read_index(_root);
}

std::optional<EnvironmentEntry> Registry::find(const std::string& name) const
{
    for (auto& e : list())
        if (e.name == name)
            return e;
    return std::nullopt;
}

SeedConfig Registry::load(const std::string& name) const
{
    auto entry = find(name);
    if (!entry)
        throw UnknownEnvironment("no environment named '" + name + "' in " + _root.string());
    return parse_seed_config(read_file(entry->config_path));
}

std::optional<DomainProposal> Registry::load_proposal(const std::string& name) const
{
    auto entry = find(name);
    if (!entry)
        return std::nullopt;
    auto p = entry->config_path;
    p.replace_extension(".proposal.json");
    if (!fs::exists(p))
        return std::nullopt;
    return parse_proposal(read_file(p));
}

void Registry::save_book(const std::string& name, const std::string& book) const
{
    auto entry = find(name);
    if (!entry)
        throw UnknownEnvironment("no environment named '" + name + "' in " + _root.string());
    auto p = entry->config_path;
    p.replace_extension(".book.md");
    write_file(p, book);
}

std::optional<std::string> Registry::load_book(const std::string& name) const
{
    auto entry = find(name);
    if (!entry)
        throw UnknownEnvironment("no environment named '" + name + "' in " + _root.string());
    auto p = entry->config_path;
    p.replace_extension(".book.md");
    if (!fs::exists(p))
        return std::nullopt;
    return read_file(p);
}

} // namespace kumo
