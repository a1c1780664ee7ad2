// SPDX-License-Identifier: Apache-2.0
#include <kumo/simulator.hpp>
#include <kumo/task_io.hpp>

#include <algorithm>
#include <cctype>
#include <sstream>

namespace kumo
{

std::int64_t approx_tokens(std::string_view text)
{
    std::int64_t n = 0;
    bool in_word = false;
    for (unsigned char c : text)
    {
        const bool space = std::isspace(c) != 0;
        if (!space && !in_word)
            ++n;
        in_word = !space;
    }
    return n;
}

std::string_view to_string(ParseErrorCode code)
{
    switch (code)
    {
        case ParseErrorCode::Malformed: return "malformed";
        case ParseErrorCode::UnknownAction: return "unknown_action";
        case ParseErrorCode::UnknownTruth: return "unknown_truth";
        case ParseErrorCode::MultipleDirectives: return "multiple_directives";
    }
    return "malformed";
}

ParseErrorCode parse_error_code(std::string_view text)
{
    for (auto c : { ParseErrorCode::Malformed, ParseErrorCode::UnknownAction, ParseErrorCode::UnknownTruth,
                    ParseErrorCode::MultipleDirectives })
        if (to_string(c) == text)
            return c;
    throw SchemaError("unknown parse error code '" + std::string(text) + "'");
}

std::string_view to_string(TrajectoryOutcome outcome)
{
    switch (outcome)
    {
        case TrajectoryOutcome::Success: return "success";
        case TrajectoryOutcome::WrongPrediction: return "wrong_prediction";
        case TrajectoryOutcome::ParseFailure: return "parse_failure";
        case TrajectoryOutcome::Exhausted: return "exhausted";
    }
    return "exhausted";
}

TrajectoryOutcome trajectory_outcome(std::string_view text)
{
    for (auto o : { TrajectoryOutcome::Success, TrajectoryOutcome::WrongPrediction, TrajectoryOutcome::ParseFailure,
                    TrajectoryOutcome::Exhausted })
        if (to_string(o) == text)
            return o;
    throw SchemaError("unknown trajectory outcome '" + std::string(text) + "'");
}

int Trajectory::parse_error_turns() const
{
    return static_cast<int>(std::count_if(turns.begin(), turns.end(), [](const TurnRecord& t) { return t.error.has_value(); }));
}

namespace
{

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::size_t count_occurrences(std::string_view hay, std::string_view needle)
{
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size()))
        ++n;
    return n;
}

} // namespace

ParsedReply parse_directive(std::string_view text)
{
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

    const auto n_action = count_occurrences(lower, "<action>");
    const auto n_answer = count_occurrences(lower, "<answer>");
    if (n_action + n_answer == 0)
        return ParseError { ParseErrorCode::Malformed, "no <ACTION> or <ANSWER> directive" };
    if (n_action + n_answer > 1)
        return ParseError { ParseErrorCode::MultipleDirectives, "expected exactly one directive" };

    const bool is_action = n_action == 1;
    const std::string_view open = is_action ? "<action>" : "<answer>";
    const std::string_view close = is_action ? "</action>" : "</answer>";
    const auto start = lower.find(open) + open.size();
    const auto end = lower.find(close, start);
    if (end == std::string::npos)
        return ParseError { ParseErrorCode::Malformed, "unterminated directive" };
    auto name = trim(text.substr(start, end - start));
    if (name.empty())
        return ParseError { ParseErrorCode::Malformed, "empty directive" };
    return is_action ? Move::action(std::string(name)) : Move::predict(std::string(name));
}

ParsedReply parse_agent_reply(std::string_view text, const TaskInstance& task)
{
    auto parsed = parse_directive(text);
    if (const auto* move = std::get_if<Move>(&parsed))
    {
        if (move->kind == Move::Kind::TakeAction && !task.find_action(move->name))
            return ParseError { ParseErrorCode::UnknownAction, move->name };
        if (move->kind == Move::Kind::Predict && !task.has_truth(move->name))
            return ParseError { ParseErrorCode::UnknownTruth, move->name };
    }
    return parsed;
}

Session::Session(TaskInstance task, std::string knowledge_book, Clock clock, int parse_failure_budget)
    : _task(std::move(task)), _book(std::move(knowledge_book)), _clock(std::move(clock)), _parse_budget(parse_failure_budget)
{
    if (_book.empty())
        throw InvalidTask("knowledge book is empty");
    if (auto problems = check_task_invariants(_task); !problems.empty())
        throw InvalidTask("task '" + _task.id + "' is not playable: " + problems.front());
    if (_parse_budget <= 0)
        throw InvalidTask("parse failure budget must be positive");
    for (const auto& a : _task.actions)
        _remaining.insert(a.name);
}

GameView Session::view() const
{
    GameView v;
    v.truths = _task.truths;
    for (const auto& a : _task.actions)
    {
        v.actions.push_back(a.name);
        if (_remaining.contains(a.name))
            v.remaining_actions.push_back(a.name);
    }
    for (const auto& t : _turns)
        if (t.observation && t.move)
            v.observations.emplace_back(t.move->name, *t.observation);
    return v;
}

TurnResult Session::record(TurnRecord turn, TurnResult result)
{
    turn.timestamp_ms = _clock ? _clock() : static_cast<std::int64_t>(_turns.size());
    _turns.push_back(std::move(turn));
    result.status = _status;
    return result;
}

TurnResult Session::step(std::string_view raw_agent_text)
{
    if (_status != SessionStatus::Active)
        throw SessionTerminated("session for task '" + _task.id + "' has ended");

    auto parsed = parse_agent_reply(raw_agent_text, _task);
    if (auto* err = std::get_if<ParseError>(&parsed))
    {
        TurnRecord turn { std::string(raw_agent_text), std::nullopt, *err, std::nullopt, 0 };
        if (++_parse_streak >= _parse_budget)
        {
            _status = SessionStatus::Failed;
            _outcome = TrajectoryOutcome::ParseFailure;
        }
        return record(std::move(turn), TurnResult { std::nullopt, *err });
    }
    return apply(std::get<Move>(parsed), std::string(raw_agent_text));
}

TurnResult Session::apply(const Move& move, std::string raw_text)
{
    if (_status != SessionStatus::Active)
        throw SessionTerminated("session for task '" + _task.id + "' has ended");
    _parse_streak = 0;

    if (move.kind == Move::Kind::Predict)
    {
        if (!_task.has_truth(move.name))
            throw UnknownTruth("'" + move.name + "' is not a candidate truth");
        const bool correct = move.name == _task.valid_truth;
        _status = correct ? SessionStatus::Succeeded : SessionStatus::Failed;
        _outcome = correct ? TrajectoryOutcome::Success : TrajectoryOutcome::WrongPrediction;
        _prediction = move.name;
        return record(TurnRecord { std::move(raw_text), move, std::nullopt, std::nullopt, 0 }, TurnResult {});
    }

    const auto* action = _task.find_action(move.name);
    if (!action)
        throw UnknownAction("'" + move.name + "' is not an action of this task");
    const auto& state = action->realized_state();
    if (std::find(state.excluded.begin(), state.excluded.end(), _task.valid_truth) != state.excluded.end())
        throw InvalidTask("realized outcome of '" + action->name + "' rules out the valid truth");

    TurnResult result;
    result.observation = state.label;
    result.repeated_action = _remaining.erase(action->name) == 0;
    ++_action_count;
    return record(TurnRecord { std::move(raw_text), move, std::nullopt, state.label, 0 }, result);
}

void Session::exhaust()
{
    if (_status != SessionStatus::Active)
        return;
    _status = SessionStatus::Failed;
    _outcome = TrajectoryOutcome::Exhausted;
}

Trajectory Session::trajectory() const
{
    Trajectory t;
    t.task_id = _task.id;
    t.domain = _task.domain;
    t.difficulty = _task.difficulty();
    t.turns = _turns;
    t.outcome = _outcome.value_or(TrajectoryOutcome::Exhausted);
    t.action_count = _action_count;
    t.prediction = _prediction;
    t.tokens = _tokens;
    return t;
}

std::string system_prompt(const Session& session)
{
    const auto v = session.view();
    std::ostringstream out;
    out << "You are playing a deduction game. Exactly one of the candidate truths is valid.\n"
           "Each action reveals an observed outcome. Use the knowledge book to see which truths an outcome rules out; "
           "outcomes only eliminate, they never confirm.\n"
           "Reply with exactly one directive: <ACTION>action name</ACTION> to take an action, or "
           "<ANSWER>truth name</ANSWER> to name the valid truth. Answering ends the game. "
           "Use as few actions as possible.\n\nCandidate truths: ";
    for (std::size_t i = 0; i < v.truths.size(); ++i)
        out << (i ? ", " : "") << v.truths[i];
    out << "\nActions: ";
    for (std::size_t i = 0; i < v.actions.size(); ++i)
        out << (i ? ", " : "") << v.actions[i];
    out << "\n\nKnowledge book:\n" << session.knowledge_book() << '\n';
    return out.str();
}

namespace
{

std::string state_message(const GameView& v, std::string_view feedback)
{
    std::ostringstream out;
    if (!feedback.empty())
        out << feedback << "\n\n";
    out << "Remaining actions: ";
    for (std::size_t i = 0; i < v.remaining_actions.size(); ++i)
        out << (i ? ", " : "") << v.remaining_actions[i];
    if (v.remaining_actions.empty())
        out << "(none)";
    out << "\nObservations so far:";
    if (v.observations.empty())
        out << " (none)";
    for (const auto& [a, s] : v.observations)
        out << "\n- " << a << ": " << s;
    out << "\nWhat is your next move?";
    return out.str();
}

} // namespace

Trajectory run_episode(Session& session, Agent& agent, const EpisodeOptions& options)
{
    auto finish = [&](Trajectory t) {
        t.model = options.model;
        t.run = options.run;
        return t;
    };

    std::vector<ChatMessage> transcript { { "system", system_prompt(session) },
                                          { "user", state_message(session.view(), {}) } };
    const int cap = episode_turn_cap(session.action_total());
    for (int turn = 0; turn < cap && session.status() == SessionStatus::Active; ++turn)
    {
        AgentReply reply;
        try
        {
            reply = agent.respond(transcript, session.view());
        }
        catch (const Error& e)
        {
            throw EpisodeAborted(std::string("agent failed: ") + e.what(), finish(session.trajectory()));
        }
        session.add_usage(reply.usage);
        transcript.push_back({ "assistant", reply.text });
        auto result = session.step(reply.text);
        if (session.status() != SessionStatus::Active)
            break;
        std::string feedback;
        if (result.error)
            feedback = "Your reply could not be parsed (" + std::string(to_string(result.error->code)) + ": "
                       + result.error->detail + ").";
        else if (result.observation)
            feedback = "Observation: " + *result.observation;
        transcript.push_back({ "user", state_message(session.view(), feedback) });
    }
    session.exhaust();
    return finish(session.trajectory());
}

} // namespace kumo
