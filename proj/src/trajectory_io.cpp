// SPDX-License-Identifier: Apache-2.0
#include <kumo/errors.hpp>
#include <kumo/trajectory_io.hpp>

#include <json.hpp>

#include <fstream>

namespace kumo
{

using ojson = nlohmann::ordered_json;

std::string trajectory_to_json(const Trajectory& t)
{
    ojson turns = ojson::array();
    for (const auto& turn : t.turns)
    {
        ojson j { { "raw", turn.raw_agent_text } };
        j["move"] = turn.move ? ojson { { "kind", turn.move->kind == Move::Kind::Predict ? "predict" : "take_action" },
                                        { "name", turn.move->name } }
                              : ojson(nullptr);
        j["error"] = turn.error ? ojson { { "code", to_string(turn.error->code) }, { "detail", turn.error->detail } }
                                : ojson(nullptr);
        j["observation"] = turn.observation ? ojson(*turn.observation) : ojson(nullptr);
        j["t_ms"] = turn.timestamp_ms;
        turns.push_back(std::move(j));
    }
    ojson j {
        { "task_id", t.task_id },
        { "domain", t.domain },
        { "difficulty", t.difficulty },
        { "model", t.model },
        { "task_set", t.task_set },
        { "run", t.run },
        { "outcome", to_string(t.outcome) },
        { "action_count", t.action_count },
        { "prediction", t.prediction ? ojson(*t.prediction) : ojson(nullptr) },
        { "tokens", { { "input", t.tokens.input }, { "output", t.tokens.output } } },
        { "turns", std::move(turns) },
    };
    // Agent text is untrusted; invalid UTF-8 is replaced rather than rejected.
    return j.dump(-1, ' ', false, ojson::error_handler_t::replace);
}

Trajectory trajectory_from_json(std::string_view line)
{
    try
    {
        const auto j = ojson::parse(line);
        Trajectory t;
        t.task_id = j.at("task_id").get<std::string>();
        t.domain = j.value("domain", "");
        t.difficulty = j.value("difficulty", "");
        t.model = j.value("model", "");
        t.task_set = j.value("task_set", "");
        t.run = j.value("run", 0);
        t.outcome = trajectory_outcome(j.at("outcome").get<std::string>());
        t.action_count = j.at("action_count").get<int>();
        if (const auto& p = j.at("prediction"); !p.is_null())
            t.prediction = p.get<std::string>();
        t.tokens.input = j.at("tokens").at("input").get<std::int64_t>();
        t.tokens.output = j.at("tokens").at("output").get<std::int64_t>();
        for (const auto& tj : j.at("turns"))
        {
            TurnRecord turn;
            turn.raw_agent_text = tj.at("raw").get<std::string>();
            if (const auto& m = tj.at("move"); !m.is_null())
                turn.move = Move { m.at("kind").get<std::string>() == "predict" ? Move::Kind::Predict : Move::Kind::TakeAction,
                                   m.at("name").get<std::string>() };
            if (const auto& e = tj.at("error"); !e.is_null())
                turn.error = ParseError { parse_error_code(e.at("code").get<std::string>()), e.at("detail").get<std::string>() };
            if (const auto& o = tj.at("observation"); !o.is_null())
                turn.observation = o.get<std::string>();
            turn.timestamp_ms = tj.value("t_ms", std::int64_t { 0 });
            t.turns.push_back(std::move(turn));
        }
        return t;
    }
    catch (const ojson::exception& e)
    {
        throw SchemaError(std::string("malformed trajectory record: ") + e.what());
    }
}

void append_trajectory(const std::filesystem::path& path, const Trajectory& trajectory)
{
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out || !(out << trajectory_to_json(trajectory) << '\n') || !out.flush())
        throw IoError("cannot append to " + path.string());
}

void store_trajectories(const std::filesystem::path& path, const std::vector<Trajectory>& trajectories)
{
    for (const auto& t : trajectories)
        append_trajectory(path, t);
}

LoadedTrajectories load_trajectories(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path.string());
    LoadedTrajectories loaded;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.empty())
            continue;
        try
        {
            loaded.trajectories.push_back(trajectory_from_json(line));
        }
        catch (const Error& e)
        {
            ++loaded.corrupt_records;
            loaded.warnings.push_back(path.string() + ":" + std::to_string(line_no) + ": skipped: " + e.what());
        }
    }
    return loaded;
}

} // namespace kumo
