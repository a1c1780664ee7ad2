// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kumo
{

enum class OutcomeKind
{
    Categorical, // "str"
    Numeric,     // "float"
};

std::string_view to_string(OutcomeKind kind);
OutcomeKind outcome_kind_from_tag(std::string_view tag);

/// Closed numeric interval [lo, hi] with finite endpoints.
struct Interval
{
    double lo = 0.0;
    double hi = 0.0;

    /// True when the two intervals share more than a boundary point.
    [[nodiscard]] bool overlaps(const Interval& other) const noexcept
    {
        return lo < other.hi && other.lo < hi;
    }

    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Parses a "[lo,hi]" state key. Returns nullopt if the text is not an interval.
std::optional<Interval> parse_interval_label(std::string_view text);

struct OutcomeState
{
    /// The state key as written in the config; for numeric states the exact "[lo,hi]" text.
    std::string label;
    std::optional<Interval> interval;
    std::vector<std::string> ruled_out;

    friend bool operator==(const OutcomeState&, const OutcomeState&) = default;
};

struct ActionSpec
{
    std::string name;
    OutcomeKind kind = OutcomeKind::Categorical;
    std::vector<OutcomeState> states;

    friend bool operator==(const ActionSpec&, const ActionSpec&) = default;
};

struct Provenance
{
    std::string model;
    std::string timestamp;
    std::uint64_t seed = 0;

    [[nodiscard]] bool empty() const noexcept { return model.empty() && timestamp.empty() && seed == 0; }
    friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// A domain's universe: truths, actions, and for every action the outcome
/// states with the truths each state rules out.
struct SeedConfig
{
    std::string domain;
    std::string goal;
    std::vector<std::string> truths;
    std::vector<ActionSpec> actions;
    Provenance provenance;

    [[nodiscard]] const ActionSpec* find_action(std::string_view name) const;
    [[nodiscard]] bool has_truth(std::string_view name) const;

    friend bool operator==(const SeedConfig&, const SeedConfig&) = default;
};

struct DomainProposal
{
    std::string goal;
    std::string truths_desc;
    std::string actions_desc;

    [[nodiscard]] bool complete() const noexcept
    {
        return !goal.empty() && !truths_desc.empty() && !actions_desc.empty();
    }
    friend bool operator==(const DomainProposal&, const DomainProposal&) = default;
};

struct Violation
{
    std::string code;
    std::string message;
    std::string element;
};

struct ValidationReport
{
    bool ok = true;
    std::vector<Violation> violations;

    [[nodiscard]] bool has(std::string_view code) const;
    [[nodiscard]] std::string summary() const;
};

// Violation codes reported by validate_seed_config.
namespace violation
{
inline constexpr std::string_view EmptyName = "EMPTY_NAME";
inline constexpr std::string_view UntrimmedName = "UNTRIMMED_NAME";
inline constexpr std::string_view DuplicateTruth = "DUPLICATE_TRUTH";
inline constexpr std::string_view DuplicateAction = "DUPLICATE_ACTION";
inline constexpr std::string_view TooFewStates = "TOO_FEW_STATES";
inline constexpr std::string_view DuplicateState = "DUPLICATE_STATE";
inline constexpr std::string_view BadInterval = "BAD_INTERVAL";
inline constexpr std::string_view OverlappingIntervals = "OVERLAPPING_INTERVALS";
inline constexpr std::string_view DanglingTruth = "DANGLING_TRUTH";
inline constexpr std::string_view UniversallyExcluded = "UNIVERSALLY_EXCLUDED";
} // namespace violation

/// Parses the JSON seed-config document.
///
/// Throws SchemaError for structural problems (missing fields, wrong kind tag,
/// malformed interval keys, fewer than two states), DuplicateName for repeated
/// truths/actions/states and DanglingTruthReference for ruled-out names that
/// are not in the truth list.
SeedConfig parse_seed_config(std::string_view text);

/// Serializes to the same schema, preserving the order of every list and map.
std::string serialize_seed_config(const SeedConfig& cfg);

/// Checks every config invariant and reports all failures.
ValidationReport validate_seed_config(const SeedConfig& cfg);

std::string serialize_proposal(const DomainProposal& proposal);
DomainProposal parse_proposal(std::string_view text);

/// Hex SHA-256 of the canonical serialization.
std::string config_hash(const SeedConfig& cfg);

} // namespace kumo
