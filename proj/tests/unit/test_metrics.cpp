// SPDX-License-Identifier: Apache-2.0
#include <kumo/errors.hpp>
#include <kumo/metrics.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace kumo;

namespace
{

Trajectory traj(std::string id, TrajectoryOutcome outcome, int actions, int parse_errors = 0, int good_turns = 1)
{
    Trajectory t;
    t.task_id = std::move(id);
    t.domain = "D";
    t.difficulty = "easy";
    t.model = "m";
    t.outcome = outcome;
    t.action_count = actions;
    for (int i = 0; i < parse_errors; ++i)
        t.turns.push_back({ "x", std::nullopt, ParseError { ParseErrorCode::Malformed, "" }, std::nullopt, i });
    for (int i = 0; i < good_turns; ++i)
        t.turns.push_back({ "<ACTION>A</ACTION>", Move::action("A"), std::nullopt, "s", i });
    return t;
}

} // namespace

TEST(Metrics, SuccessRateByHand)
{
    std::vector<Trajectory> all;
    for (int i = 0; i < 5000; ++i)
        all.push_back(traj("t" + std::to_string(i), i < 4300 ? TrajectoryOutcome::Success : TrajectoryOutcome::WrongPrediction, 1));
    EXPECT_EQ(success_rate(all), 0.86);
    EXPECT_THROW(success_rate({}), EmptyInput);
}

TEST(Metrics, RelativeActionCount)
{
    EXPECT_EQ(relative_action_count(traj("a", TrajectoryOutcome::Success, 5), 4.0), 0.25);
    EXPECT_EQ(relative_action_count(traj("a", TrajectoryOutcome::Success, 2), 4.0), -0.5);
    EXPECT_THROW(relative_action_count(traj("a", TrajectoryOutcome::Success, 2), 0.0), DegenerateOptimal);
}

TEST(Metrics, ParsingErrorRateCountsTurns)
{
    // 3 bad turns out of 3 + 1 + 0 + 4 = 8 total.
    std::vector<Trajectory> all { traj("a", TrajectoryOutcome::ParseFailure, 0, 3, 0),
                                  traj("b", TrajectoryOutcome::Success, 1, 0, 1),
                                  traj("c", TrajectoryOutcome::Success, 0, 0, 4) };
    EXPECT_EQ(all[0].parse_error_turns(), 3);
    EXPECT_EQ(parsing_error_rate(all), 3.0 / 8.0);
    EXPECT_THROW(parsing_error_rate({}), EmptyInput);
}

TEST(Metrics, Pearson)
{
    const std::vector<double> x { 1, 2, 3, 4 };
    const std::vector<double> y { 2, 4, 6, 8 };
    const std::vector<double> z { 4, 3, 2, 1 };
    EXPECT_NEAR(pearson(x, y), 1.0, 1e-12);
    EXPECT_NEAR(pearson(x, z), -1.0, 1e-12);
    // Hand value: x = 1,2,3 and y = 1,3,2 give r = 0.5.
    const std::vector<double> a { 1, 2, 3 };
    const std::vector<double> b { 1, 3, 2 };
    EXPECT_NEAR(pearson(a, b), 0.5, 1e-12);
    const std::vector<double> flat { 5, 5, 5, 5 };
    EXPECT_THROW(pearson(x, flat), ZeroVariance);
}

TEST(Metrics, AggregateGroupsAndExcludesDegenerate)
{
    auto a = traj("a", TrajectoryOutcome::Success, 5);
    auto b = traj("b", TrajectoryOutcome::WrongPrediction, 3, 1, 1);
    auto c = traj("c", TrajectoryOutcome::Success, 0);
    b.model = "n";
    a.tokens = { 10, 2 };
    c.tokens = { 20, 4 };
    const std::vector<Trajectory> all { a, b, c };
    const OptimalLookup opt { { "a", 4.0 }, { "b", 2.0 }, { "c", 0.0 } };

    const std::vector<GroupKey> by_model { GroupKey::Model };
    const auto reports = aggregate(all, opt, by_model);
    ASSERT_EQ(reports.size(), 2u);
    EXPECT_EQ(reports[0].group, "model=m");
    EXPECT_EQ(reports[0].n, 2u);
    EXPECT_EQ(reports[0].success_rate, 1.0);
    EXPECT_EQ(reports[0].rel_action_mean, 0.25);
    EXPECT_EQ(reports[0].degenerate_optimal, 1u);
    EXPECT_EQ(reports[0].tokens_in, 15.0);
    EXPECT_EQ(reports[1].rel_action_mean, 0.5);
    EXPECT_EQ(reports[1].parse_err_rate, 0.5);

    const auto overall = aggregate(all, opt, {});
    ASSERT_EQ(overall.size(), 1u);
    EXPECT_EQ(overall[0].group, "all");

    const std::vector<Trajectory> only_c { c };
    EXPECT_TRUE(std::isnan(aggregate(only_c, opt, {})[0].rel_action_mean));
    EXPECT_THROW(aggregate(all, OptimalLookup { { "a", 1.0 } }, {}), MissingOptimal);
    EXPECT_NE(reports_to_csv(reports).find("model=n,1,0.000000,0.500000,0.500000"), std::string::npos);
}

TEST(Metrics, GroupKeyNames)
{
    EXPECT_EQ(group_key("domain"), GroupKey::Domain);
    EXPECT_THROW(group_key("colour"), std::invalid_argument);
}
