// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <kumo/env_model.hpp>
#include <kumo/llm.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kumo
{

/// Raw text of a bundled prompt template. Throws std::out_of_range for unknown names.
std::string_view prompt_template(std::string_view name);
std::vector<std::string> prompt_names();

/// Substitutes {{key}} placeholders. Throws std::invalid_argument if any remain.
std::string render_prompt(std::string_view name, const std::map<std::string, std::string>& vars);

/// Model per pipeline stage.
struct StageModels
{
    std::string propose;
    std::string config;
    std::string book;
    std::string verify;

    static StageModels uniform(const std::string& model) { return { model, model, model, model }; }
};

struct Completion
{
    std::string text;
    int chunks = 0;
    TokenUsage usage;
    std::int64_t created = 0;
};

/// Sends the request; while the reply is truncated, asks the model to
/// continue, up to max_continuations extra calls. Throws GenerationFailed if
/// the reply is still incomplete or the backend reports an error.
Completion complete_with_continuation(ChatBackend& backend, ChatRequest request, int max_continuations = 3);

/// Extracts Goal/Truths/Actions triples. Values may be wrapped in single or
/// double quotes; incomplete triples are dropped.
std::vector<DomainProposal> parse_proposals(std::string_view text);

/// Incomplete proposals are dropped and the missing ones requested again, up
/// to max_attempts requests. Throws GenerationFailed if fewer than count remain.
std::vector<DomainProposal> propose_domains(ChatBackend& backend, const std::string& model, const std::string& domain,
                                            int count, std::optional<double> temperature = std::nullopt, int max_attempts = 3);

/// The contents of the first ```json fenced block, else the outermost {...} span.
/// Throws GenerationFailed when there is none.
std::string extract_json_block(std::string_view text);

struct SeedGenOptions
{
    int n_truths = 20;
    int n_actions = 24;
    int max_continuations = 3;
    int max_attempts = 3; // regenerations after schema or validation failures
    std::optional<int> max_tokens;
    std::uint64_t seed = 0;
};

/// Two steps: outline (truths, actions, states), then exclusions. A reply that
/// fails parsing or validation is regenerated; PersistentlyInvalid after max_attempts.
SeedConfig generate_seed_config(ChatBackend& backend, const std::string& model, const std::string& domain,
                                const DomainProposal& proposal, const SeedGenOptions& options = {});

std::string write_knowledge_book(ChatBackend& backend, const std::string& model, const SeedConfig& cfg,
                                 int max_continuations = 3);

/// <ANSWER>True</ANSWER> / <ANSWER>False</ANSWER>, case-insensitive; nullopt otherwise.
std::optional<bool> parse_verdict(std::string_view text);

/// Text between <BOOK> and </BOOK>; nullopt when absent.
std::optional<std::string> extract_book(std::string_view text);

struct BookReview
{
    std::string book;
    int rounds = 0; // revisions applied
    bool verified = false;
    std::vector<std::string> notes;
};

/// Verify, and revise on a False verdict, for at most max_rounds revisions.
/// Throws VerdictUnparseable when the verifier gives no verdict.
BookReview review_knowledge_book(ChatBackend& backend, const std::string& verifier_model, const std::string& writer_model,
                                 const SeedConfig& cfg, std::string book, int max_rounds = 2);

struct EnvironmentBuild
{
    DomainProposal proposal;
    SeedConfig config;
    BookReview book;
};

/// Full pipeline for one domain: propose, take the first proposal, build the
/// config, write and review the book.
EnvironmentBuild build_environment(ChatBackend& backend, const StageModels& models, const std::string& domain,
                                   const SeedGenOptions& options = {});

/// ISO-8601 UTC text for unix seconds.
std::string iso_timestamp(std::int64_t unix_seconds);

} // namespace kumo
