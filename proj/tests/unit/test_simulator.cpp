// SPDX-License-Identifier: Apache-2.0
#include <kumo/agents.hpp>
#include <kumo/errors.hpp>
#include <kumo/simulator.hpp>
#include <kumo/task_io.hpp>

#include <fixtures.hpp>
#include <gtest/gtest.h>

using namespace kumo;
using namespace kumo::testing;

namespace
{

TaskInstance small_task()
{
    return make_task({ "a", "b", "c" }, "b",
                     { { "X", { { "x0", { "a" } }, { "x1", { "b", "c" } } }, 0 },
                       { "Y", { { "y0", { "b" } }, { "y1", { "c" } } }, 1 } });
}

ParseErrorCode code_of(const ParsedReply& r)
{
    return std::get<ParseError>(r).code;
}

} // namespace

TEST(Parser, Directives)
{
    EXPECT_EQ(std::get<Move>(parse_directive("I pick <ACTION> X </ACTION>.")), Move::action("X"));
    EXPECT_EQ(std::get<Move>(parse_directive("<answer>b</Answer>")), Move::predict("b"));
    EXPECT_EQ(code_of(parse_directive("no tags")), ParseErrorCode::Malformed);
    EXPECT_EQ(code_of(parse_directive("<ACTION>X")), ParseErrorCode::Malformed);
    EXPECT_EQ(code_of(parse_directive("<ACTION> </ACTION>")), ParseErrorCode::Malformed);
    EXPECT_EQ(code_of(parse_directive("<ACTION>X</ACTION><ANSWER>a</ANSWER>")), ParseErrorCode::MultipleDirectives);
}

TEST(Parser, NamesAreCheckedAgainstTheTask)
{
    const auto task = small_task();
    EXPECT_EQ(code_of(parse_agent_reply("<ACTION>Z</ACTION>", task)), ParseErrorCode::UnknownAction);
    EXPECT_EQ(code_of(parse_agent_reply("<ANSWER>zz</ANSWER>", task)), ParseErrorCode::UnknownTruth);
    // Names are matched exactly, without case folding.
    EXPECT_EQ(code_of(parse_agent_reply("<ACTION>x</ACTION>", task)), ParseErrorCode::UnknownAction);
}

TEST(Session, ObservationsAndPrediction)
{
    Session s(small_task(), "book");
    auto r = s.step("<ACTION>X</ACTION>");
    EXPECT_EQ(r.observation, std::optional<std::string>("x0"));
    EXPECT_EQ(r.status, SessionStatus::Active);
    EXPECT_EQ(s.view().remaining_actions, std::vector<std::string>({ "Y" }));

    r = s.step("<ACTION>X</ACTION>");
    EXPECT_TRUE(r.repeated_action);
    EXPECT_EQ(s.action_count(), 2);

    r = s.step("<ANSWER>b</ANSWER>");
    EXPECT_EQ(s.status(), SessionStatus::Succeeded);
    EXPECT_EQ(s.outcome(), std::optional(TrajectoryOutcome::Success));
    EXPECT_THROW(s.step("<ACTION>Y</ACTION>"), SessionTerminated);

    const auto t = s.trajectory();
    EXPECT_EQ(t.action_count, 2);
    EXPECT_EQ(t.turns.size(), 3u);
    EXPECT_EQ(t.prediction, std::optional<std::string>("b"));
    // Without a clock, timestamps are the turn index.
    EXPECT_EQ(t.turns[2].timestamp_ms, 2);
}

TEST(Session, WrongPredictionFails)
{
    Session s(small_task(), "book");
    s.step("<ANSWER>a</ANSWER>");
    EXPECT_EQ(s.status(), SessionStatus::Failed);
    EXPECT_EQ(s.outcome(), std::optional(TrajectoryOutcome::WrongPrediction));
}

TEST(Session, ParseFailureBudget)
{
    Session s(small_task(), "book", {}, 2);
    s.step("hello");
    EXPECT_EQ(s.parse_failure_streak(), 1);
    s.step("<ACTION>X</ACTION>");
    EXPECT_EQ(s.parse_failure_streak(), 0);
    s.step("garbage");
    EXPECT_EQ(s.status(), SessionStatus::Active);
    s.step("<ACTION>nope</ACTION>");
    EXPECT_EQ(s.status(), SessionStatus::Failed);
    EXPECT_EQ(s.outcome(), std::optional(TrajectoryOutcome::ParseFailure));
    EXPECT_EQ(s.trajectory().parse_error_turns(), 3);
    // Malformed turns are not actions.
    EXPECT_EQ(s.action_count(), 1);
}

TEST(Session, ApplyRejectsUnknownNames)
{
    Session s(small_task(), "book");
    EXPECT_THROW(s.apply(Move::action("Q"), "Q"), UnknownAction);
    EXPECT_THROW(s.apply(Move::predict("q"), "q"), UnknownTruth);
    EXPECT_EQ(s.turns().size(), 0u);
}

TEST(Session, RejectsBrokenTasks)
{
    auto t = small_task();
    t.actions[0].realized = 1; // x1 rules out the valid truth
    EXPECT_THROW(Session(t, "book"), InvalidTask);
    EXPECT_THROW(Session(small_task(), ""), InvalidTask);
}

TEST(Session, ViewHidesTheAnswer)
{
    Session s(small_task(), "book");
    const auto prompt = system_prompt(s);
    EXPECT_NE(prompt.find("Candidate truths: a, b, c"), std::string::npos);
    EXPECT_EQ(prompt.find("x0"), std::string::npos); // realized labels stay hidden until observed
}

TEST(Episode, OracleAgentSolvesGeneratedTasks)
{
    const auto cfg = fixture_config(21);
    auto p = EasyParams;
    p.count = 40;
    for (const auto& task : generate_tasks(cfg, p))
    {
        Session s(task, render_plain_book(task));
        OracleAgent agent(task);
        const auto t = run_episode(s, agent, { "oracle", 0 });
        EXPECT_EQ(t.outcome, TrajectoryOutcome::Success) << task.id;
        const double opt = optimal_action_count(task);
        EXPECT_LE(t.action_count, static_cast<int>(task.actions.size()));
        if (opt == 0.0)
            EXPECT_EQ(t.action_count, 0);
    }
}

TEST(Episode, TurnCapExhausts)
{
    const auto task = small_task();
    Session s(task, "book", {}, 100);
    ScriptedAgent agent({ "<ACTION>X</ACTION>" });
    const auto t = run_episode(s, agent);
    EXPECT_EQ(t.outcome, TrajectoryOutcome::Exhausted);
    EXPECT_EQ(static_cast<int>(t.turns.size()), episode_turn_cap(task.actions.size()));
}

TEST(Episode, RandomAgentIsDeterministic)
{
    const auto cfg = fixture_config(22);
    const auto task = generate_tasks(cfg, EasyParams).front();
    auto play = [&](std::uint64_t seed) {
        Session s(task, "book");
        RandomAgent agent(seed);
        return run_episode(s, agent, { "random", 0 });
    };
    EXPECT_EQ(play(5), play(5));
}

TEST(Episode, ScriptedRepliesAreRecordedVerbatim)
{
    Session s(small_task(), "book");
    ScriptedAgent agent({ "thinking... <ACTION>X</ACTION>", "<ANSWER>b</ANSWER>" });
    const auto t = run_episode(s, agent, { "scripted", 3 });
    ASSERT_EQ(t.turns.size(), 2u);
    EXPECT_EQ(t.turns[0].raw_agent_text, "thinking... <ACTION>X</ACTION>");
    EXPECT_EQ(t.run, 3);
    EXPECT_EQ(t.model, "scripted");
    EXPECT_EQ(t.outcome, TrajectoryOutcome::Success);
}
