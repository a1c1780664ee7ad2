// SPDX-License-Identifier: Apache-2.0
#include <kumo/errors.hpp>
#include <kumo/metrics.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace kumo
{

double success_rate(std::span<const Trajectory> trajectories)
{
    if (trajectories.empty())
        throw EmptyInput("success rate of an empty trajectory set");
    const auto ok = std::count_if(trajectories.begin(), trajectories.end(),
                                  [](const Trajectory& t) { return t.outcome == TrajectoryOutcome::Success; });
    return static_cast<double>(ok) / static_cast<double>(trajectories.size());
}

double relative_action_count(const Trajectory& trajectory, double optimal)
{
    if (!(optimal > 0.0))
        throw DegenerateOptimal("optimal action count of task '" + trajectory.task_id + "' is "
                                + std::to_string(optimal) + "; relative action count is undefined");
    return (static_cast<double>(trajectory.action_count) - optimal) / optimal;
}

double parsing_error_rate(std::span<const Trajectory> trajectories)
{
    if (trajectories.empty())
        throw EmptyInput("parsing error rate of an empty trajectory set");
    std::size_t bad = 0;
    std::size_t total = 0;
    for (const auto& t : trajectories)
    {
        bad += static_cast<std::size_t>(t.parse_error_turns());
        total += t.turns.size();
    }
    return total == 0 ? 0.0 : static_cast<double>(bad) / static_cast<double>(total);
}

double pearson(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw std::invalid_argument("pearson: series lengths differ");
    if (x.size() < 2)
        throw EmptyInput("pearson needs at least two paired observations");
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw ZeroVariance("pearson: a series is constant");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

GroupKey group_key(std::string_view name)
{
    if (name == "domain")
        return GroupKey::Domain;
    if (name == "difficulty")
        return GroupKey::Difficulty;
    if (name == "model")
        return GroupKey::Model;
    throw std::invalid_argument("unknown group key '" + std::string(name) + "'");
}

namespace
{

std::string group_label(const Trajectory& t, std::span<const GroupKey> keys)
{
    if (keys.empty())
        return "all";
    std::string label;
    for (auto k : keys)
    {
        if (!label.empty())
            label += '|';
        switch (k)
        {
            case GroupKey::Domain: label += "domain=" + t.domain; break;
            case GroupKey::Difficulty: label += "difficulty=" + t.difficulty; break;
            case GroupKey::Model: label += "model=" + t.model; break;
        }
    }
    return label;
}

// Sorting before summation keeps the result independent of input order.
double ordered_mean(std::vector<double> values)
{
    if (values.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (auto v : values)
        sum += v;
    return sum / static_cast<double>(values.size());
}

} // namespace

std::vector<ScoreReport> aggregate(std::span<const Trajectory> trajectories, const OptimalLookup& optimal,
                                   std::span<const GroupKey> keys)
{
    std::map<std::string, std::vector<const Trajectory*>> groups;
    for (const auto& t : trajectories)
    {
        if (!optimal.contains(t.task_id))
            throw MissingOptimal("no optimal action count for task '" + t.task_id + "'");
        groups[group_label(t, keys)].push_back(&t);
    }

    std::vector<ScoreReport> reports;
    for (const auto& [label, members] : groups)
    {
        ScoreReport r;
        r.group = label;
        r.n = members.size();
        std::size_t ok = 0, bad_turns = 0, turns = 0;
        std::int64_t tin = 0, tout = 0;
        std::vector<double> rel;
        for (const auto* t : members)
        {
            ok += t->outcome == TrajectoryOutcome::Success;
            bad_turns += static_cast<std::size_t>(t->parse_error_turns());
            turns += t->turns.size();
            tin += t->tokens.input;
            tout += t->tokens.output;
            const double opt = optimal.at(t->task_id);
            if (opt > 0.0)
                rel.push_back(relative_action_count(*t, opt));
            else
                ++r.degenerate_optimal;
        }
        const auto n = static_cast<double>(r.n);
        r.success_rate = static_cast<double>(ok) / n;
        r.parse_err_rate = turns == 0 ? 0.0 : static_cast<double>(bad_turns) / static_cast<double>(turns);
        r.rel_action_mean = ordered_mean(std::move(rel));
        r.tokens_in = static_cast<double>(tin) / n;
        r.tokens_out = static_cast<double>(tout) / n;
        reports.push_back(std::move(r));
    }
    return reports;
}

namespace
{

std::string fmt(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s)
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

} // namespace

std::string reports_to_csv(std::span<const ScoreReport> reports)
{
    std::ostringstream out;
    out << "group,n,success_rate,rel_action_mean,parse_err_rate,tokens_in,tokens_out\n";
    for (const auto& r : reports)
        out << csv_field(r.group) << ',' << r.n << ',' << fmt(r.success_rate) << ',' << fmt(r.rel_action_mean) << ','
            << fmt(r.parse_err_rate) << ',' << fmt(r.tokens_in) << ',' << fmt(r.tokens_out) << '\n';
    return out.str();
}

std::string reports_to_table(std::span<const ScoreReport> reports)
{
    std::vector<std::vector<std::string>> rows {
        { "group", "n", "success_rate", "rel_action_mean", "parse_err_rate", "tokens_in", "tokens_out" }
    };
    for (const auto& r : reports)
        rows.push_back({ r.group, std::to_string(r.n), fmt(r.success_rate), fmt(r.rel_action_mean), fmt(r.parse_err_rate),
                         fmt(r.tokens_in), fmt(r.tokens_out) });
    std::vector<std::size_t> width(rows.front().size(), 0);
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c)
            width[c] = std::max(width[c], row[c].size());
    std::ostringstream out;
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        for (std::size_t c = 0; c < rows[i].size(); ++c)
        {
            const auto pad = width[c] - rows[i][c].size();
            if (c == 0)
                out << rows[i][c] << std::string(pad, ' ');
            else
                out << "  " << std::string(pad, ' ') << rows[i][c];
        }
        out << '\n';
        if (i == 0)
        {
            std::size_t total = 0;
            for (auto w : width)
                total += w + 2;
            out << std::string(total - 2, '-') << '\n';
        }
    }
    return out.str();
}

} // namespace kumo
