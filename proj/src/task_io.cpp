// SPDX-License-Identifier: Apache-2.0
#include <kumo/errors.hpp>
#include <kumo/task_io.hpp>

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace kumo
{

using ojson = nlohmann::ordered_json;

namespace
{

ojson params_json(const GenParams& p)
{
    return ojson {
        { "n_truth", p.n_truth }, { "n_action", p.n_action },   { "n_valid", p.n_valid },
        { "count", p.count },     { "rng_seed", p.rng_seed },   { "max_resamples", p.max_resamples },
    };
}

GenParams params_value(const ojson& j)
{
    GenParams p;
    p.n_truth = j.at("n_truth").get<int>();
    p.n_action = j.at("n_action").get<int>();
    p.n_valid = j.value("n_valid", 1);
    p.count = j.value("count", 1);
    p.rng_seed = j.value("rng_seed", std::uint64_t { 0 });
    p.max_resamples = j.value("max_resamples", 100);
    return p;
}

ojson outcomes_json(const TaskInstance& task)
{
    ojson outcomes = ojson::object();
    for (const auto& a : task.actions)
    {
        ojson states = ojson::object();
        for (const auto& s : a.states)
            states[s.label] = s.excluded;
        outcomes[a.name] = ojson { { "type", to_string(a.kind) }, { "states", std::move(states) } };
    }
    return outcomes;
}

} // namespace

std::string params_to_json(const GenParams& params)
{
    return params_json(params).dump();
}

GenParams params_from_json(std::string_view text)
{
    return params_value(ojson::parse(text));
}

std::string task_to_json(const TaskInstance& task)
{
    ojson realized = ojson::object();
    for (const auto& a : task.actions)
        realized[a.name] = a.realized_state().label;
    std::vector<std::string> actions;
    for (const auto& a : task.actions)
        actions.push_back(a.name);
    ojson j {
        { "id", task.id },
        { "domain", task.domain },
        { "truths", task.truths },
        { "valid_truth", task.valid_truth },
        { "actions", actions },
        { "outcomes", outcomes_json(task) },
        { "realized_outcome", realized },
        { "params", params_json(task.params) },
        { "instance_seed", task.instance_seed },
    };
    return j.dump();
}

TaskInstance task_from_json(std::string_view line)
{
    try
    {
        const auto j = ojson::parse(line);
        TaskInstance task;
        task.id = j.value("id", "");
        task.domain = j.at("domain").get<std::string>();
        task.truths = j.at("truths").get<std::vector<std::string>>();
        task.valid_truth = j.at("valid_truth").get<std::string>();
        task.params = params_value(j.at("params"));
        task.instance_seed = j.value("instance_seed", std::uint64_t { 0 });
        const auto& outcomes = j.at("outcomes");
        const auto& realized = j.at("realized_outcome");
        for (const auto& name : j.at("actions"))
        {
            TaskAction a;
            a.name = name.get<std::string>();
            const auto& spec = outcomes.at(a.name);
            a.kind = outcome_kind_from_tag(spec.at("type").get<std::string>());
            const auto realized_label = realized.at(a.name).get<std::string>();
            bool found = false;
            for (const auto& [label, excluded] : spec.at("states").items())
            {
                if (label == realized_label)
                {
                    a.realized = a.states.size();
                    found = true;
                }
                a.states.push_back({ label, excluded.get<std::vector<std::string>>() });
            }
            if (!found)
                throw SchemaError("realized state '" + realized_label + "' of '" + a.name + "' is not one of its states");
            task.actions.push_back(std::move(a));
        }
        return task;
    }
    catch (const ojson::exception& e)
    {
        throw SchemaError(std::string("malformed task record: ") + e.what());
    }
}

std::string task_bundle_text(const BundleHeader& header, const std::vector<TaskInstance>& tasks)
{
    std::ostringstream out;
    out << ojson { { "bundle",
                     { { "domain", header.domain }, { "cfg_hash", header.cfg_hash }, { "params", params_json(header.params) } } } }
               .dump()
        << '\n';
    for (const auto& t : tasks)
        out << task_to_json(t) << '\n';
    return out.str();
}

void write_task_bundle(const std::filesystem::path& path, const BundleHeader& header,
                       const std::vector<TaskInstance>& tasks)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << task_bundle_text(header, tasks)))
        throw IoError("cannot write task bundle " + path.string());
}

TaskBundle read_task_bundle(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read task bundle " + path.string());
    TaskBundle bundle;
    std::string line;
    bool first = true;
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        if (first)
        {
            first = false;
            auto j = ojson::parse(line, nullptr, false);
            if (!j.is_discarded() && j.contains("bundle"))
            {
                const auto& h = j["bundle"];
                bundle.header.domain = h.value("domain", "");
                bundle.header.cfg_hash = h.value("cfg_hash", "");
                bundle.header.params = params_value(h.at("params"));
                continue;
            }
        }
        bundle.tasks.push_back(task_from_json(line));
    }
    return bundle;
}

std::string symbolic_book_json(const TaskInstance& task)
{
    return outcomes_json(task).dump();
}

std::string render_plain_book(const TaskInstance& task)
{
    std::ostringstream out;
    out << "Knowledge book for " << task.domain << "\n\nCandidates:\n";
    for (const auto& t : task.truths)
        out << "- " << t << '\n';
    out << "\nEach observation rules out the candidates listed with it. "
           "An outcome never confirms a candidate; it only eliminates.\n";
    for (const auto& a : task.actions)
    {
        out << "\n" << a.name << (a.kind == OutcomeKind::Numeric ? " (numeric reading)" : "") << ":\n";
        for (const auto& s : a.states)
        {
            out << "  - " << s.label << ": ";
            if (s.excluded.empty())
                out << "rules out nothing";
            else
            {
                out << "rules out ";
                for (std::size_t i = 0; i < s.excluded.size(); ++i)
                    out << (i ? ", " : "") << s.excluded[i];
            }
            out << '\n';
        }
    }
    return out.str();
}

} // namespace kumo
