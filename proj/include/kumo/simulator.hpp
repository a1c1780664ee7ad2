// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <kumo/chat.hpp>
#include <kumo/errors.hpp>
#include <kumo/taskgen.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace kumo
{

struct Move
{
    enum class Kind
    {
        TakeAction,
        Predict,
    };
    Kind kind = Kind::TakeAction;
    std::string name;

    static Move action(std::string name) { return { Kind::TakeAction, std::move(name) }; }
    static Move predict(std::string name) { return { Kind::Predict, std::move(name) }; }
    friend bool operator==(const Move&, const Move&) = default;
};

enum class ParseErrorCode
{
    Malformed,
    UnknownAction,
    UnknownTruth,
    MultipleDirectives,
};

std::string_view to_string(ParseErrorCode code);
ParseErrorCode parse_error_code(std::string_view text);

struct ParseError
{
    ParseErrorCode code = ParseErrorCode::Malformed;
    std::string detail;

    friend bool operator==(const ParseError&, const ParseError&) = default;
};

using ParsedReply = std::variant<Move, ParseError>;

/// Extracts the single <ACTION>..</ACTION> or <ANSWER>..</ANSWER> directive.
/// Tags are case-insensitive; the enclosed name is whitespace-trimmed.
ParsedReply parse_directive(std::string_view text);

/// parse_directive plus an exact-name check against the task's actions and truths.
ParsedReply parse_agent_reply(std::string_view text, const TaskInstance& task);

enum class SessionStatus
{
    Active,
    Succeeded,
    Failed,
};

enum class TrajectoryOutcome
{
    Success,
    WrongPrediction,
    ParseFailure,
    Exhausted,
};

std::string_view to_string(TrajectoryOutcome outcome);
TrajectoryOutcome trajectory_outcome(std::string_view text);

struct TurnRecord
{
    std::string raw_agent_text;
    std::optional<Move> move;
    std::optional<ParseError> error;
    std::optional<std::string> observation;
    std::int64_t timestamp_ms = 0;

    friend bool operator==(const TurnRecord&, const TurnRecord&) = default;
};

struct Trajectory
{
    std::string task_id;
    std::string domain;
    std::string difficulty;
    std::string model;
    std::string task_set; // human play: the assignment the task belonged to
    int run = 0;
    std::vector<TurnRecord> turns;
    TrajectoryOutcome outcome = TrajectoryOutcome::Exhausted;
    int action_count = 0;
    std::optional<std::string> prediction;
    TokenUsage tokens;

    [[nodiscard]] int parse_error_turns() const;
    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct TurnResult
{
    std::optional<std::string> observation;
    std::optional<ParseError> error;
    SessionStatus status = SessionStatus::Active;
    bool repeated_action = false;
};

/// What a player may see: names, remaining actions and its own observations.
struct GameView
{
    std::vector<std::string> truths;
    std::vector<std::string> actions;
    std::vector<std::string> remaining_actions;
    std::vector<std::pair<std::string, std::string>> observations; // (action, state label)
};

/// Single-owner game state. Realized outcomes and the valid truth are kept
/// private and only surface through step().
class Session
{
public:
    using Clock = std::function<std::int64_t()>;
    static constexpr int DefaultParseFailureBudget = 3;

    /// Throws InvalidTask for an empty book or a task that violates its invariants.
    Session(TaskInstance task, std::string knowledge_book, Clock clock = {},
            int parse_failure_budget = DefaultParseFailureBudget);

    /// Throws SessionTerminated once the session is no longer active.
    TurnResult step(std::string_view raw_agent_text);

    /// Applies an already-parsed move (the play service validates names itself).
    TurnResult apply(const Move& move, std::string raw_text);

    /// Ends an active session as exhausted (turn cap reached).
    void exhaust();

    void add_usage(TokenUsage usage) { _tokens += usage; }

    [[nodiscard]] const std::string& task_id() const noexcept { return _task.id; }
    [[nodiscard]] const std::string& knowledge_book() const noexcept { return _book; }
    [[nodiscard]] GameView view() const;
    [[nodiscard]] std::size_t action_total() const noexcept { return _task.actions.size(); }
    [[nodiscard]] bool has_action(std::string_view name) const { return _task.find_action(name) != nullptr; }
    [[nodiscard]] bool has_truth(std::string_view name) const { return _task.has_truth(name); }
    [[nodiscard]] const std::vector<TurnRecord>& turns() const noexcept { return _turns; }
    [[nodiscard]] SessionStatus status() const noexcept { return _status; }
    [[nodiscard]] std::optional<TrajectoryOutcome> outcome() const noexcept { return _outcome; }
    [[nodiscard]] int action_count() const noexcept { return _action_count; }
    [[nodiscard]] int parse_failure_streak() const noexcept { return _parse_streak; }
    [[nodiscard]] const TokenUsage& token_usage() const noexcept { return _tokens; }

    /// Snapshot of everything recorded so far.
    [[nodiscard]] Trajectory trajectory() const;

private:
    TurnResult record(TurnRecord turn, TurnResult result);

    TaskInstance _task;
    std::string _book;
    Clock _clock;
    int _parse_budget;
    std::vector<TurnRecord> _turns;
    std::set<std::string> _remaining;
    SessionStatus _status = SessionStatus::Active;
    std::optional<TrajectoryOutcome> _outcome;
    std::optional<std::string> _prediction;
    int _parse_streak = 0;
    int _action_count = 0;
    TokenUsage _tokens;
};

struct AgentReply
{
    std::string text;
    TokenUsage usage;
};

/// Message-in/message-out player.
class Agent
{
public:
    virtual ~Agent() = default;
    virtual AgentReply respond(const std::vector<ChatMessage>& transcript, const GameView& view) = 0;
};

/// Raised when the agent transport fails mid-episode; carries what was played.
class EpisodeAborted : public AgentTransportError
{
public:
    EpisodeAborted(const std::string& what, Trajectory partial)
        : AgentTransportError(what), partial(std::move(partial))
    {
    }
    Trajectory partial;
};

struct EpisodeOptions
{
    std::string model;
    int run = 0;
};

/// Turn cap for an episode over a task with n actions.
constexpr int episode_turn_cap(std::size_t n_actions)
{
    return 2 * static_cast<int>(n_actions) + 2;
}

std::string system_prompt(const Session& session);

/// Plays until a terminal move or the turn cap. Agent exceptions derived from
/// kumo::Error surface as EpisodeAborted with the partial trajectory.
Trajectory run_episode(Session& session, Agent& agent, const EpisodeOptions& options = {});

} // namespace kumo
