// SPDX-License-Identifier: Apache-2.0
#include <kumo/errors.hpp>
#include <kumo/service.hpp>
#include <kumo/trajectory_io.hpp>

#include <fixtures.hpp>
#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <fstream>
#include <set>

using namespace kumo;
using namespace kumo::testing;

namespace
{

const std::vector<Participant> People { { "alice", "tok-a" }, { "bob", "tok-b" } };

struct Fixture
{
    TempDir dir;
    Registry registry { dir / "registry" };
    std::atomic<std::int64_t> clock_ms { 1'000'000 };

    explicit Fixture(int n_envs = 5)
    {
        for (int i = 0; i < n_envs; ++i)
            registry.register_environment({ "g", "t", "a" }, fixture_config(100 + i, "Env" + std::to_string(i)));
    }

    ServiceOptions options(int pool = 3)
    {
        ServiceOptions o;
        o.data_dir = dir / "data";
        o.seed = 17;
        o.task_set_pool = pool;
        o.clock = [this] { return clock_ms.load(); };
        return o;
    }
};

/// Truths left once every observation in the view is applied to the domain config.
std::vector<std::string> survivors(const Registry& reg, const TaskView& task)
{
    const auto cfg = reg.load(task.domain);
    std::set<std::string> out(task.game.truths.begin(), task.game.truths.end());
    for (const auto& [action, label] : task.game.observations)
        for (const auto& s : cfg.find_action(action)->states)
            if (s.label == label)
                for (const auto& r : s.ruled_out)
                    out.erase(r);
    return { out.begin(), out.end() };
}

/// Plays every action of the current task and then answers; `right` picks the
/// deduced truth or a wrong one.
PredictionResult play_current(PlayService& svc, const Registry& reg, const std::string& who, const std::string& sid,
                              bool right, std::atomic<std::int64_t>* clock = nullptr, std::int64_t step_ms = 0)
{
    auto a = svc.get_session(who, sid);
    const auto idx = *a.current;
    for (const auto& name : a.tasks[idx].game.actions)
    {
        if (clock)
            *clock += step_ms;
        svc.post_action(who, sid, name);
    }
    a = svc.get_session(who, sid);
    const auto left = survivors(reg, a.tasks[idx]);
    EXPECT_EQ(left.size(), 1u);
    std::string answer = left.front();
    if (!right)
        for (const auto& t : a.tasks[idx].game.truths)
            if (t != answer)
            {
                answer = t;
                break;
            }
    if (clock)
        *clock += step_ms;
    return svc.post_prediction(who, sid, answer);
}

} // namespace

TEST(Earnings, HandValues)
{
    const auto e = compute_earnings(1.0, 30);
    EXPECT_NEAR(e.total, 37.0, 1e-12);
    EXPECT_NEAR(e.action_penalty, 3.0, 1e-12);
    EXPECT_NEAR(compute_earnings(0.6, 0).total, 34.0, 1e-12);
    EXPECT_NEAR(compute_earnings(0.0, 0).total, 25.0, 1e-12);
}

TEST(Earnings, FromTrajectories)
{
    std::vector<Trajectory> ts(10);
    for (int i = 0; i < 10; ++i)
    {
        ts[i].outcome = i < 7 ? TrajectoryOutcome::Success : TrajectoryOutcome::WrongPrediction;
        ts[i].action_count = 2;
    }
    EXPECT_NEAR(earnings_from_trajectories(ts).total, 25.0 + 15.0 * 0.7 - 2.0, 1e-12);
    EXPECT_THROW(earnings_from_trajectories({}), EmptyInput);
}

TEST(Participants, LoadsTabSeparatedFile)
{
    TempDir dir;
    std::ofstream(dir / "p.tsv") << "# comment\nalice\ttok-a\n\nbob\ttok-b\n";
    const auto got = load_participants(dir / "p.tsv");
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[1].token, "tok-b");
    std::ofstream(dir / "bad.tsv") << "alice tok-a\n";
    EXPECT_THROW(load_participants(dir / "bad.tsv"), SchemaError);
    EXPECT_THROW(load_participants(dir / "missing.tsv"), IoError);
}

TEST(Latency, MedianOfTurnGaps)
{
    Trajectory a;
    a.turns.resize(3);
    a.turns[0].timestamp_ms = 1100; // 100 after start
    a.turns[1].timestamp_ms = 1400; // 300
    a.turns[2].timestamp_ms = 1600; // 200
    Trajectory b;
    b.turns.resize(1);
    b.turns[0].timestamp_ms = 5000; // 1000 after start
    const std::vector<Trajectory> ts { a, b };
    const std::vector<std::int64_t> starts { 1000, 4000 };
    EXPECT_DOUBLE_EQ(median_turn_latency_ms(ts, starts), 250.0);
}

TEST(Service, AssignmentCoversFiveDomainsAndBothDifficulties)
{
    Fixture f;
    PlayService svc(f.registry, People, f.options());
    EXPECT_EQ(svc.authenticate("tok-a"), "alice");
    EXPECT_THROW((void)svc.authenticate("nope"), AuthFailure);

    const auto a = svc.create_session("alice");
    ASSERT_EQ(a.tasks.size(), 10u);
    EXPECT_EQ(a.current, std::optional<std::size_t>(0));
    std::map<std::string, std::multiset<std::string>> by_domain;
    for (const auto& t : a.tasks)
        by_domain[t.domain].insert(t.difficulty);
    ASSERT_EQ(by_domain.size(), 5u);
    for (const auto& [d, diffs] : by_domain)
        EXPECT_EQ(diffs, (std::multiset<std::string> { "easy", "hard" })) << d;
    EXPECT_EQ(a.tasks[0].status, TaskStatus::Active);
    EXPECT_EQ(a.tasks[1].status, TaskStatus::Pending);
    EXPECT_FALSE(svc.knowledge_book("alice", a.session_id).empty());
}

TEST(Service, InsufficientPool)
{
    Fixture f(4);
    PlayService svc(f.registry, People, f.options());
    EXPECT_THROW(svc.create_session("alice"), InsufficientTaskPool);
}

TEST(Service, RejectsBadMovesAndOtherParticipants)
{
    Fixture f;
    PlayService svc(f.registry, People, f.options());
    const auto a = svc.create_session("alice");
    EXPECT_THROW(svc.post_action("alice", a.session_id, "No such action"), UnknownAction);
    EXPECT_THROW(svc.post_prediction("alice", a.session_id, "No such truth"), UnknownTruth);
    EXPECT_THROW(svc.post_action("alice", a.session_id, a.tasks[1].game.actions[0], {}, 1), SessionTerminated);
    EXPECT_THROW((void)svc.get_session("bob", a.session_id), UnknownSession);
    EXPECT_THROW((void)svc.get_session("alice", "s999"), UnknownSession);

    play_current(svc, f.registry, "alice", a.session_id, true);
    EXPECT_THROW(svc.post_action("alice", a.session_id, a.tasks[0].game.actions[0], {}, 0), SessionTerminated);
}

TEST(Service, RequestIdsAreIdempotent)
{
    Fixture f;
    PlayService svc(f.registry, People, f.options());
    const auto a = svc.create_session("alice", "create-1");
    EXPECT_EQ(svc.create_session("alice", "create-1").session_id, a.session_id);
    EXPECT_NE(svc.create_session("alice", "create-2").session_id, a.session_id);

    const auto name = a.tasks[0].game.actions[0];
    const auto r1 = svc.post_action("alice", a.session_id, name, "act-1");
    const auto r2 = svc.post_action("alice", a.session_id, name, "act-1");
    EXPECT_EQ(r1.action_count, 1);
    EXPECT_EQ(r2.action_count, 1);
    EXPECT_EQ(r1.observation, r2.observation);
    EXPECT_EQ(svc.get_session("alice", a.session_id).tasks[0].action_count, 1);
    EXPECT_TRUE(svc.post_action("alice", a.session_id, name, "act-2").repeated);
}

TEST(Service, FullPlayScoresFromPersistedTrajectories)
{
    Fixture f;
    PlayService svc(f.registry, People, f.options());
    const auto a = svc.create_session("alice");
    int actions = 0;
    for (int i = 0; i < 10; ++i)
    {
        const auto idx = *svc.get_session("alice", a.session_id).current;
        actions += static_cast<int>(a.tasks[idx].game.actions.size());
        const auto r = play_current(svc, f.registry, "alice", a.session_id, i % 2 == 0, &f.clock_ms, 3000);
        EXPECT_EQ(r.correct, i % 2 == 0);
        if (i < 9)
            EXPECT_FALSE(r.score.earnings.has_value());
        else
            ASSERT_TRUE(r.score.earnings.has_value());
    }
    const auto s = svc.score("alice", a.session_id);
    EXPECT_TRUE(s.finished);
    EXPECT_DOUBLE_EQ(s.success_rate, 0.5);
    EXPECT_EQ(s.actions, actions);
    ASSERT_TRUE(s.earnings.has_value());
    EXPECT_NEAR(s.earnings->total, 25.0 + 7.5 - 0.1 * actions, 1e-9);
    EXPECT_DOUBLE_EQ(s.median_latency_ms, 3000.0);
    EXPECT_FALSE(s.low_quality);
    EXPECT_FALSE(svc.get_session("alice", a.session_id).current.has_value());
    EXPECT_THROW(svc.post_prediction("alice", a.session_id, a.tasks[0].game.truths[0]), SessionTerminated);

    // The score matches a recomputation over the trajectory log.
    const auto log = load_trajectories(svc.trajectories_path());
    std::vector<Trajectory> mine;
    for (const auto& t : log.trajectories)
        if (t.model == "human:alice" && t.task_set == s.task_set)
            mine.push_back(t);
    ASSERT_EQ(mine.size(), 10u);
    EXPECT_NEAR(earnings_from_trajectories(mine).total, s.earnings->total, 1e-12);
}

TEST(Service, FastChanceLevelPlayIsFlagged)
{
    Fixture f;
    PlayService svc(f.registry, People, f.options());
    const auto fast = svc.create_session("alice");
    const auto slow = svc.create_session("bob");
    for (int i = 0; i < 10; ++i)
    {
        play_current(svc, f.registry, "alice", fast.session_id, false, &f.clock_ms, 100);
        play_current(svc, f.registry, "bob", slow.session_id, false, &f.clock_ms, 5000);
    }
    const auto sf = svc.score("alice", fast.session_id);
    const auto ss = svc.score("bob", slow.session_id);
    EXPECT_DOUBLE_EQ(sf.success_rate, 0.0);
    EXPECT_GT(sf.chance_rate, 0.0);
    EXPECT_TRUE(sf.low_quality);
    EXPECT_FALSE(ss.low_quality);

    // Only the unflagged session is eligible for selection.
    const auto all = svc.summaries();
    ASSERT_EQ(all.size(), 2u);
    EXPECT_EQ(select_one_per_task_set(all, 3), std::vector<std::string>({ slow.session_id }));
}

TEST(Service, RestoresFromEventLogs)
{
    Fixture f;
    std::string sid;
    SessionSummary before;
    {
        PlayService svc(f.registry, People, f.options());
        sid = svc.create_session("alice", "c1").session_id;
        for (int i = 0; i < 4; ++i)
            play_current(svc, f.registry, "alice", sid, true, &f.clock_ms, 1000);
        svc.post_action("alice", sid, svc.get_session("alice", sid).tasks[4].game.actions[0], "mid");
        before = svc.score("alice", sid);
    }
    PlayService again(f.registry, People, f.options());
    const auto a = again.get_session("alice", sid);
    EXPECT_EQ(a.current, std::optional<std::size_t>(4));
    EXPECT_EQ(a.tasks[4].action_count, 1);
    EXPECT_EQ(again.create_session("alice", "c1").session_id, sid);
    const auto after = again.score("alice", sid);
    EXPECT_EQ(after.actions, before.actions);
    EXPECT_DOUBLE_EQ(after.success_rate, before.success_rate);
    for (int i = 4; i < 10; ++i)
        play_current(again, f.registry, "alice", sid, true, &f.clock_ms, 1000);
    EXPECT_TRUE(again.score("alice", sid).finished);
    EXPECT_EQ(load_trajectories(again.trajectories_path()).trajectories.size(), 10u);
}

TEST(Service, SelectionIsSeededAndSkipsFlagged)
{
    std::vector<SessionSummary> s(5);
    for (int i = 0; i < 5; ++i)
    {
        s[i].session_id = "s" + std::to_string(i);
        s[i].task_set = i < 3 ? "ts000" : "ts001";
        s[i].finished = true;
    }
    s[3].low_quality = true;
    s[2].finished = false;
    const auto p = select_one_per_task_set(s, 1);
    ASSERT_EQ(p.size(), 2u);
    EXPECT_TRUE(p[0] == "s0" || p[0] == "s1");
    EXPECT_EQ(p[1], "s4");
    EXPECT_EQ(select_one_per_task_set(s, 1), p);
}

TEST(ServiceHttp, EndToEnd)
{
    Fixture f;
    PlayService svc(f.registry, People, f.options());
    PlayServer server(svc);
    server.start();
    httplib::Client client("127.0.0.1", server.port());
    const httplib::Headers auth { { "Authorization", "Bearer tok-a" } };

    auto unauth = client.Post("/sessions", "", "application/json");
    ASSERT_TRUE(unauth);
    EXPECT_EQ(unauth->status, 401);
    EXPECT_EQ(nlohmann::json::parse(unauth->body)["error"]["code"], "AuthFailure");

    auto created = client.Post("/sessions", auth, "{}", "application/json");
    ASSERT_TRUE(created);
    EXPECT_EQ(created->status, 201);
    const auto a = nlohmann::json::parse(created->body);
    const std::string sid = a["session_id"];
    ASSERT_EQ(a["tasks"].size(), 10u);

    const std::string action = a["tasks"][0]["actions"][0];
    auto acted = client.Post("/sessions/" + sid + "/action", auth, nlohmann::json { { "action", action } }.dump(), "application/json");
    ASSERT_TRUE(acted);
    EXPECT_EQ(acted->status, 200);
    EXPECT_EQ(nlohmann::json::parse(acted->body)["action_count"], 1);

    auto bad = client.Post("/sessions/" + sid + "/action", auth, R"({"action":"zzz"})", "application/json");
    EXPECT_EQ(bad->status, 400);
    EXPECT_EQ(nlohmann::json::parse(bad->body)["error"]["code"], "UnknownAction");
    EXPECT_EQ(client.Post("/sessions/" + sid + "/action", auth, "[1]", "application/json")->status, 400);

    const httplib::Headers other { { "Authorization", "Bearer tok-b" } };
    EXPECT_EQ(client.Get("/sessions/" + sid, other)->status, 404);

    auto book = client.Get("/sessions/" + sid + "/book", auth);
    EXPECT_EQ(book->status, 200);
    EXPECT_FALSE(nlohmann::json::parse(book->body)["book"].get<std::string>().empty());

    const std::string truth = a["tasks"][0]["truths"][0];
    auto predicted = client.Post("/sessions/" + sid + "/predict", auth, nlohmann::json { { "truth", truth } }.dump(), "application/json");
    EXPECT_EQ(predicted->status, 200);
    EXPECT_EQ(nlohmann::json::parse(predicted->body)["score"]["completed"], 1);

    auto late = client.Post("/sessions/" + sid + "/action", auth, nlohmann::json { { "action", action }, { "task", 0 } }.dump(),
                            "application/json");
    EXPECT_EQ(late->status, 409);

    auto score = client.Get("/sessions/" + sid + "/score", auth);
    EXPECT_EQ(score->status, 200);
    EXPECT_EQ(nlohmann::json::parse(score->body)["finished"], false);
    server.stop();
}
