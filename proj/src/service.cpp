// SPDX-License-Identifier: Apache-2.0
#include <kumo/errors.hpp>
#include <kumo/metrics.hpp>
#include <kumo/service.hpp>
#include <kumo/task_io.hpp>
#include <kumo/trajectory_io.hpp>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <tuple>

namespace kumo
{

using nlohmann::json;
namespace fs = std::filesystem;

Earnings compute_earnings(double success_rate, int action_count)
{
    Earnings e;
    e.base = EarningsBase;
    e.success_component = EarningsPerSuccessRate * success_rate;
    e.action_penalty = EarningsPerAction * action_count;
    e.total = e.base + e.success_component - e.action_penalty;
    return e;
}

Earnings earnings_from_trajectories(std::span<const Trajectory> trajectories)
{
    int actions = 0;
    for (const auto& t : trajectories)
        actions += t.action_count;
    return compute_earnings(success_rate(trajectories), actions);
}

std::vector<Participant> load_participants(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read participant table '" + path.string() + "'");
    std::vector<Participant> out;
    int lineno = 0;
    for (std::string line; std::getline(in, line);)
    {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
            throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": expected 'id<TAB>token'");
        out.push_back({ line.substr(0, tab), line.substr(tab + 1) });
    }
    return out;
}

std::string_view to_string(TaskStatus status)
{
    switch (status)
    {
    case TaskStatus::Pending: return "pending";
    case TaskStatus::Active: return "active";
    case TaskStatus::Succeeded: return "succeeded";
    case TaskStatus::Failed: return "failed";
    }
    return "pending";
}

double median_turn_latency_ms(std::span<const Trajectory> trajectories, std::span<const std::int64_t> task_starts)
{
    std::vector<double> gaps;
    for (std::size_t i = 0; i < trajectories.size(); ++i)
    {
        auto prev = i < task_starts.size() ? task_starts[i] : (trajectories[i].turns.empty() ? 0 : trajectories[i].turns.front().timestamp_ms);
        for (const auto& turn : trajectories[i].turns)
        {
            gaps.push_back(static_cast<double>(turn.timestamp_ms - prev));
            prev = turn.timestamp_ms;
        }
    }
    if (gaps.empty())
        throw EmptyInput("no turns to measure");
    std::sort(gaps.begin(), gaps.end());
    const auto n = gaps.size();
    return n % 2 ? gaps[n / 2] : 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]);
}

std::vector<std::string> select_one_per_task_set(std::span<const SessionSummary> sessions, std::uint64_t seed)
{
    std::map<std::string, std::vector<const SessionSummary*>> by_set;
    for (const auto& s : sessions)
        if (s.finished && !s.low_quality)
            by_set[s.task_set].push_back(&s);
    std::vector<std::string> out;
    std::uint64_t k = 0;
    for (auto& [set, members] : by_set)
    {
        std::sort(members.begin(), members.end(), [](auto* a, auto* b) { return a->session_id < b->session_id; });
        Rng rng(derive_seed(seed, { k++ }));
        out.push_back(members[rng.below(members.size())]->session_id);
    }
    return out;
}

namespace
{

std::int64_t system_now_ms()
{
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string hex32(std::uint64_t x)
{
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(x & 0xffffffffu));
    return buf;
}

std::string session_name(std::uint64_t ordinal, std::uint64_t seed)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%06llu-", static_cast<unsigned long long>(ordinal));
    return buf + hex32(derive_seed(seed, { ordinal, 0x51d }));
}

std::string human_model(const std::string& participant)
{
    return "human:" + participant;
}

} // namespace

struct PlayService::TaskSet
{
    std::string id;
    std::vector<TaskInstance> tasks;
    std::vector<std::string> books;
};

struct PlayService::PlaySession
{
    mutable std::mutex mutex;
    std::string id;
    std::uint64_t ordinal = 0;
    std::string participant;
    std::string task_set;
    std::vector<TaskInstance> tasks;
    std::vector<std::string> books;
    std::vector<std::unique_ptr<Session>> games;
    std::vector<std::int64_t> starts;
    std::size_t current = 0;
    std::int64_t clock_now = 0; // timestamp applied to the move being recorded
    std::map<std::string, ActionResult> action_replies;
    std::map<std::string, PredictionResult> predict_replies;
    fs::path log;
    bool replaying = false;

    void build_games()
    {
        games.clear();
        for (std::size_t i = 0; i < tasks.size(); ++i)
            games.push_back(std::make_unique<Session>(tasks[i], books[i], [this] { return clock_now; }));
        starts.assign(tasks.size(), 0);
    }

    [[nodiscard]] bool finished() const { return current >= games.size(); }

    Trajectory trajectory(std::size_t i) const
    {
        auto t = games[i]->trajectory();
        t.model = human_model(participant);
        t.task_set = task_set;
        t.run = static_cast<int>(ordinal);
        return t;
    }

    RunningScore running() const
    {
        RunningScore s;
        for (const auto& g : games)
        {
            s.actions += g->action_count();
            if (g->status() != SessionStatus::Active)
            {
                ++s.completed;
                s.correct += g->status() == SessionStatus::Succeeded;
            }
        }
        if (finished())
            s.earnings = compute_earnings(static_cast<double>(s.correct) / static_cast<double>(games.size()), s.actions);
        return s;
    }

    void append_event(const json& event) const
    {
        if (replaying)
            return;
        std::ofstream out(log, std::ios::app);
        out << event.dump() << '\n';
        out.flush();
        if (!out)
            throw IoError("cannot append to session log '" + log.string() + "'");
    }

    std::size_t target(std::optional<std::size_t> task) const
    {
        if (finished())
            throw SessionTerminated("every task of session '" + id + "' has finished");
        if (!task)
            return current;
        if (*task >= games.size())
            throw UnknownAction("session has no task " + std::to_string(*task));
        if (*task < current)
            throw SessionTerminated("task " + std::to_string(*task) + " has finished");
        if (*task > current)
            throw SessionTerminated("task " + std::to_string(*task) + " is not open yet");
        return current;
    }

    TaskSetAssignment view() const
    {
        TaskSetAssignment a;
        a.session_id = id;
        a.participant = participant;
        a.task_set = task_set;
        for (std::size_t i = 0; i < games.size(); ++i)
        {
            TaskView v;
            v.index = i;
            v.task_id = tasks[i].id;
            v.domain = tasks[i].domain;
            v.difficulty = tasks[i].difficulty();
            v.action_count = games[i]->action_count();
            v.game = games[i]->view();
            switch (games[i]->status())
            {
            case SessionStatus::Active: v.status = i == current ? TaskStatus::Active : TaskStatus::Pending; break;
            case SessionStatus::Succeeded: v.status = TaskStatus::Succeeded; break;
            case SessionStatus::Failed: v.status = TaskStatus::Failed; break;
            }
            a.tasks.push_back(std::move(v));
        }
        if (!finished())
            a.current = current;
        return a;
    }
};

PlayService::PlayService(const Registry& registry, std::vector<Participant> participants, ServiceOptions options)
    : _registry(registry.root()), _options(std::move(options))
{
    for (auto& p : participants)
    {
        if (p.id.empty() || p.token.empty())
            throw InvalidParams("participant entries need an id and a token");
        if (!_token_to_participant.emplace(p.token, p.id).second)
            throw DuplicateName("two participants share a token");
    }
    if (_options.domains_per_set <= 0)
        throw InvalidParams("domains_per_set must be positive");
    if (_options.task_set_pool < 0)
        throw InvalidParams("task_set_pool must not be negative");
    if (_options.data_dir.empty())
    {
        const char* env = std::getenv("KUMO_DATA_DIR");
        _options.data_dir = env && *env ? fs::path(env) : fs::path("kumo-data");
    }
    std::error_code ec;
    fs::create_directories(_options.data_dir / "sessions", ec);
    if (ec)
        throw IoError("cannot create data directory '" + _options.data_dir.string() + "': " + ec.message());
    restore();
}

PlayService::~PlayService() = default;

std::int64_t PlayService::now() const
{
    return _options.clock ? _options.clock() : system_now_ms();
}

fs::path PlayService::trajectories_path() const
{
    return _options.data_dir / "trajectories.jsonl";
}

std::string PlayService::authenticate(const std::string& token) const
{
    auto it = _token_to_participant.find(token);
    if (token.empty() || it == _token_to_participant.end())
        throw AuthFailure("unknown participant credential");
    return it->second;
}

const std::vector<PlayService::TaskSet>& PlayService::task_sets()
{
    std::lock_guard lock(_pool_mutex);
    if (_pool)
        return *_pool;

    struct Source
    {
        std::string name;
        SeedConfig cfg;
        std::string book;
    };
    std::vector<Source> sources;
    for (const auto& entry : _registry.list())
    {
        auto cfg = _registry.load(entry.name);
        try
        {
            GenParams easy = EasyParams, hard = HardParams;
            easy.check(cfg);
            hard.check(cfg);
        }
        catch (const Error&)
        {
            continue;
        }
        sources.push_back({ entry.name, std::move(cfg), _registry.load_book(entry.name).value_or("") });
    }
    const auto need = static_cast<std::size_t>(_options.domains_per_set);
    if (sources.size() < need)
        throw InsufficientTaskPool("need " + std::to_string(need) + " environments that support Easy and Hard tasks, found "
                                   + std::to_string(sources.size()));

    const int sets = std::max(1, _options.task_set_pool);
    std::vector<TaskSet> pool;
    for (int k = 0; k < sets; ++k)
    {
        Rng rng(derive_seed(_options.seed, { 0x7a5c, static_cast<std::uint64_t>(k) }));
        std::vector<std::size_t> order(sources.size());
        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = i;
        rng.shuffle(order);

        TaskSet set;
        char id[16];
        std::snprintf(id, sizeof id, "ts%03d", k);
        set.id = id;
        std::size_t used = 0;
        for (auto src : order)
        {
            if (used == need)
                break;
            std::vector<TaskInstance> pair;
            for (int level = 0; level < 2; ++level)
            {
                GenParams p = level == 0 ? EasyParams : HardParams;
                p.count = 1;
                p.rng_seed = derive_seed(_options.seed, { static_cast<std::uint64_t>(k), src, static_cast<std::uint64_t>(level) });
                try
                {
                    auto tasks = generate_tasks(sources[src].cfg, p);
                    pair.push_back(std::move(tasks.front()));
                }
                catch (const Error&)
                {
                    break;
                }
            }
            if (pair.size() != 2)
                continue;
            for (auto& t : pair)
            {
                t.domain = sources[src].name;
                set.books.push_back(sources[src].book.empty() ? render_plain_book(t) : sources[src].book);
                set.tasks.push_back(std::move(t));
            }
            ++used;
        }
        if (used < need)
            throw InsufficientTaskPool("could not generate a complete task set from the registered environments");

        // Shuffle the task order, keeping tasks and books aligned.
        std::vector<std::size_t> perm(set.tasks.size());
        for (std::size_t i = 0; i < perm.size(); ++i)
            perm[i] = i;
        rng.shuffle(perm);
        TaskSet shuffled { set.id, {}, {} };
        for (auto i : perm)
        {
            shuffled.tasks.push_back(set.tasks[i]);
            shuffled.books.push_back(set.books[i]);
        }
        pool.push_back(std::move(shuffled));
    }
    _pool = std::move(pool);
    return *_pool;
}

TaskSetAssignment PlayService::create_session(const std::string& participant, const std::string& request_id)
{
    const auto request_key = participant + '\n' + request_id;
    if (!request_id.empty())
    {
        std::shared_lock lock(_sessions_mutex);
        if (auto it = _create_requests.find(request_key); it != _create_requests.end())
        {
            const auto& s = _sessions.at(it->second);
            std::lock_guard session_lock(s->mutex);
            return s->view();
        }
    }

    const auto& pool = task_sets();
    std::unique_lock lock(_sessions_mutex);
    if (!request_id.empty())
        if (auto it = _create_requests.find(request_key); it != _create_requests.end())
        {
            const auto& s = _sessions.at(it->second);
            std::lock_guard session_lock(s->mutex);
            return s->view();
        }

    const auto ordinal = _created++;
    Rng rng(derive_seed(_options.seed, { ordinal, 0xa551 }));
    const auto& set = pool[rng.below(pool.size())];

    auto s = std::make_shared<PlaySession>();
    s->id = session_name(ordinal, _options.seed);
    s->ordinal = ordinal;
    s->participant = participant;
    s->task_set = set.id;
    s->tasks = set.tasks;
    s->books = set.books;
    s->log = _options.data_dir / "sessions" / (s->id + ".jsonl");
    s->build_games();
    s->starts[0] = now();

    json event { { "event", "create" },       { "session", s->id },       { "ordinal", ordinal },
                 { "participant", participant }, { "task_set", set.id },   { "ts", s->starts[0] },
                 { "request_id", request_id },  { "tasks", json::array() }, { "books", s->books } };
    for (const auto& t : s->tasks)
        event["tasks"].push_back(json::parse(task_to_json(t)));
    s->append_event(event);

    _sessions.emplace(s->id, s);
    if (!request_id.empty())
        _create_requests.emplace(request_key, s->id);
    return s->view();
}

std::shared_ptr<PlayService::PlaySession> PlayService::find(const std::string& participant, const std::string& session_id) const
{
    std::shared_lock lock(_sessions_mutex);
    auto it = _sessions.find(session_id);
    // Another participant's session is reported exactly like a missing one.
    if (it == _sessions.end() || it->second->participant != participant)
        throw UnknownSession("no session '" + session_id + "'");
    return it->second;
}

TaskSetAssignment PlayService::get_session(const std::string& participant, const std::string& session_id) const
{
    auto s = find(participant, session_id);
    std::lock_guard lock(s->mutex);
    return s->view();
}

std::string PlayService::knowledge_book(const std::string& participant, const std::string& session_id,
                                        std::optional<std::size_t> task) const
{
    auto s = find(participant, session_id);
    std::lock_guard lock(s->mutex);
    const auto i = task.value_or(std::min(s->current, s->tasks.size() - 1));
    if (i >= s->tasks.size())
        throw UnknownAction("session has no task " + std::to_string(i));
    return s->books[i];
}

ActionResult PlayService::post_action(const std::string& participant, const std::string& session_id, const std::string& action,
                                      const std::string& request_id, std::optional<std::size_t> task)
{
    auto s = find(participant, session_id);
    std::lock_guard lock(s->mutex);
    if (!request_id.empty())
        if (auto it = s->action_replies.find(request_id); it != s->action_replies.end())
            return it->second;

    const auto i = s->target(task);
    auto& game = *s->games[i];
    if (!game.has_action(action))
        throw UnknownAction("'" + action + "' is not an action of task " + std::to_string(i));
    if (!s->replaying)
        s->clock_now = now();
    const auto result = game.apply(Move::action(action), action);

    ActionResult out { i, action, result.observation.value_or(""), result.repeated_action, game.action_count() };
    s->append_event({ { "event", "action" }, { "task", i }, { "name", action }, { "ts", s->clock_now }, { "request_id", request_id } });
    if (!request_id.empty())
        s->action_replies.emplace(request_id, out);
    return out;
}

PredictionResult PlayService::post_prediction(const std::string& participant, const std::string& session_id, const std::string& truth,
                                              const std::string& request_id, std::optional<std::size_t> task)
{
    auto s = find(participant, session_id);
    std::lock_guard lock(s->mutex);
    if (!request_id.empty())
        if (auto it = s->predict_replies.find(request_id); it != s->predict_replies.end())
            return it->second;

    const auto i = s->target(task);
    auto& game = *s->games[i];
    if (!game.has_truth(truth))
        throw UnknownTruth("'" + truth + "' is not a candidate truth of task " + std::to_string(i));
    if (!s->replaying)
        s->clock_now = now();
    game.apply(Move::predict(truth), truth);
    s->current = i + 1;
    if (s->current < s->starts.size())
        s->starts[s->current] = s->clock_now;

    PredictionResult out;
    out.task_index = i;
    out.truth = truth;
    out.correct = game.status() == SessionStatus::Succeeded;
    out.score = s->running();
    s->append_event({ { "event", "predict" }, { "task", i }, { "name", truth }, { "ts", s->clock_now }, { "request_id", request_id } });
    if (!s->replaying)
    {
        std::lock_guard log_lock(_log_mutex);
        append_trajectory(trajectories_path(), s->trajectory(i));
    }
    if (!request_id.empty())
        s->predict_replies.emplace(request_id, out);
    return out;
}

namespace
{

SessionSummary summarize(const std::string& id, const std::string& participant, const std::string& task_set,
                         std::size_t n_tasks, std::span<const Trajectory> persisted, std::span<const std::int64_t> starts,
                         const std::vector<TaskInstance>& tasks, const QualityThresholds& q)
{
    SessionSummary s;
    s.session_id = id;
    s.participant = participant;
    s.task_set = task_set;
    s.finished = persisted.size() == n_tasks;
    int correct = 0;
    for (const auto& t : persisted)
    {
        s.actions += t.action_count;
        correct += t.outcome == TrajectoryOutcome::Success;
    }
    s.success_rate = persisted.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(persisted.size());
    for (const auto& t : tasks)
        s.chance_rate += 1.0 / static_cast<double>(t.truths.size());
    s.chance_rate /= static_cast<double>(std::max<std::size_t>(1, tasks.size()));
    if (s.finished)
    {
        s.earnings = earnings_from_trajectories(persisted);
        s.median_latency_ms = median_turn_latency_ms(persisted, starts);
        s.low_quality = s.median_latency_ms < q.median_latency_ms && s.success_rate <= s.chance_rate * q.chance_factor;
    }
    return s;
}

} // namespace

SessionSummary PlayService::score(const std::string& participant, const std::string& session_id) const
{
    auto s = find(participant, session_id);
    std::vector<std::int64_t> starts;
    std::vector<TaskInstance> tasks;
    {
        std::lock_guard lock(s->mutex);
        starts = s->starts;
        tasks = s->tasks;
    }

    LoadedTrajectories loaded;
    {
        std::lock_guard log_lock(_log_mutex);
        if (fs::exists(trajectories_path()))
            loaded = load_trajectories(trajectories_path());
    }
    // Keep the last record per task; order follows the assignment.
    std::map<std::string, Trajectory> by_task;
    const auto model = human_model(s->participant);
    for (auto& t : loaded.trajectories)
        if (t.model == model && t.run == static_cast<int>(s->ordinal) && t.task_set == s->task_set)
            by_task[t.task_id] = std::move(t);
    std::vector<Trajectory> persisted;
    std::vector<std::int64_t> persisted_starts;
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (auto it = by_task.find(tasks[i].id); it != by_task.end())
        {
            persisted.push_back(it->second);
            persisted_starts.push_back(starts[i]);
        }
    return summarize(s->id, s->participant, s->task_set, tasks.size(), persisted, persisted_starts, tasks, _options.quality);
}

std::vector<SessionSummary> PlayService::summaries() const
{
    std::vector<std::pair<std::string, std::string>> ids;
    {
        std::shared_lock lock(_sessions_mutex);
        for (const auto& [id, s] : _sessions)
            ids.emplace_back(s->participant, id);
    }
    std::vector<SessionSummary> out;
    for (const auto& [participant, id] : ids)
        out.push_back(score(participant, id));
    return out;
}

void PlayService::restore()
{
    std::vector<fs::path> logs;
    for (const auto& entry : fs::directory_iterator(_options.data_dir / "sessions"))
        if (entry.path().extension() == ".jsonl")
            logs.push_back(entry.path());
    std::sort(logs.begin(), logs.end());

    std::set<std::tuple<std::string, int, std::string>> persisted;
    if (fs::exists(trajectories_path()))
        for (const auto& t : load_trajectories(trajectories_path()).trajectories)
            persisted.emplace(t.model, t.run, t.task_id);

    for (const auto& path : logs)
    {
        std::ifstream in(path);
        std::vector<json> events;
        for (std::string line; std::getline(in, line);)
        {
            if (line.empty())
                continue;
            try
            {
                events.push_back(json::parse(line));
            }
            catch (const json::exception&)
            {
                std::cerr << "warning: skipping unreadable event in " << path.string() << "\n";
            }
        }
        if (events.empty() || events.front().value("event", "") != "create")
        {
            std::cerr << "warning: session log " << path.string() << " has no create event; ignored\n";
            continue;
        }

        const auto& c = events.front();
        auto s = std::make_shared<PlaySession>();
        s->id = c.at("session").get<std::string>();
        s->ordinal = c.at("ordinal").get<std::uint64_t>();
        s->participant = c.at("participant").get<std::string>();
        s->task_set = c.at("task_set").get<std::string>();
        for (const auto& t : c.at("tasks"))
            s->tasks.push_back(task_from_json(t.dump()));
        s->books = c.at("books").get<std::vector<std::string>>();
        s->log = path;
        s->build_games();
        s->starts[0] = c.at("ts").get<std::int64_t>();
        {
            std::unique_lock lock(_sessions_mutex);
            _sessions.emplace(s->id, s);
            _created = std::max(_created, s->ordinal + 1);
            if (auto rid = c.value("request_id", std::string()); !rid.empty())
                _create_requests.emplace(s->participant + '\n' + rid, s->id);
        }

        s->replaying = true;
        for (std::size_t e = 1; e < events.size(); ++e)
        {
            const auto& ev = events[e];
            s->clock_now = ev.at("ts").get<std::int64_t>();
            const auto task = ev.at("task").get<std::size_t>();
            const auto name = ev.at("name").get<std::string>();
            const auto rid = ev.value("request_id", std::string());
            if (ev.at("event") == "action")
                post_action(s->participant, s->id, name, rid, task);
            else if (ev.at("event") == "predict")
                post_prediction(s->participant, s->id, name, rid, task);
        }
        s->replaying = false;

        // A crash between the event and the trajectory append leaves the log ahead.
        for (std::size_t i = 0; i < s->current && i < s->games.size(); ++i)
        {
            auto t = s->trajectory(i);
            if (!persisted.count({ t.model, t.run, t.task_id }))
                append_trajectory(trajectories_path(), t);
        }
    }
}

} // namespace kumo
