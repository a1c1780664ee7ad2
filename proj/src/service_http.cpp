// SPDX-License-Identifier: Apache-2.0
#include <kumo/errors.hpp>
#include <kumo/service.hpp>

#include <httplib.h>
#include <json.hpp>

#include <thread>

namespace kumo
{

using nlohmann::json;

namespace
{

json earnings_json(const std::optional<Earnings>& e)
{
    if (!e)
        return nullptr;
    return { { "base", e->base }, { "success_component", e->success_component }, { "action_penalty", e->action_penalty }, { "total", e->total } };
}

json assignment_json(const TaskSetAssignment& a)
{
    json j { { "session_id", a.session_id }, { "participant", a.participant }, { "task_set", a.task_set } };
    j["current"] = a.current ? json(*a.current) : json(nullptr);
    j["tasks"] = json::array();
    for (const auto& t : a.tasks)
    {
        json obs = json::array();
        for (const auto& [action, label] : t.game.observations)
            obs.push_back({ { "action", action }, { "observation", label } });
        j["tasks"].push_back({ { "index", t.index },
                               { "task_id", t.task_id },
                               { "domain", t.domain },
                               { "difficulty", t.difficulty },
                               { "status", to_string(t.status) },
                               { "action_count", t.action_count },
                               { "truths", t.game.truths },
                               { "actions", t.game.actions },
                               { "remaining_actions", t.game.remaining_actions },
                               { "observations", obs } });
    }
    return j;
}

json summary_json(const SessionSummary& s)
{
    return { { "session_id", s.session_id },       { "participant", s.participant }, { "task_set", s.task_set },
             { "finished", s.finished },           { "success_rate", s.success_rate }, { "actions", s.actions },
             { "median_latency_ms", s.median_latency_ms }, { "chance_rate", s.chance_rate }, { "low_quality", s.low_quality },
             { "earnings", earnings_json(s.earnings) } };
}

struct HttpFailure
{
    int status;
    const char* code;
};

HttpFailure classify(const std::exception& e)
{
    if (dynamic_cast<const AuthFailure*>(&e))
        return { 401, "AuthFailure" };
    if (dynamic_cast<const UnknownSession*>(&e))
        return { 404, "UnknownSession" };
    if (dynamic_cast<const UnknownAction*>(&e))
        return { 400, "UnknownAction" };
    if (dynamic_cast<const UnknownTruth*>(&e))
        return { 400, "UnknownTruth" };
    if (dynamic_cast<const SessionTerminated*>(&e))
        return { 409, "SessionTerminated" };
    if (dynamic_cast<const InsufficientTaskPool*>(&e))
        return { 503, "InsufficientTaskPool" };
    if (dynamic_cast<const json::exception*>(&e) || dynamic_cast<const std::invalid_argument*>(&e))
        return { 400, "BadRequest" };
    return { 500, "InternalError" };
}

std::string bearer(const httplib::Request& req)
{
    const auto h = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    return h.rfind(prefix, 0) == 0 ? h.substr(prefix.size()) : std::string();
}

json body_of(const httplib::Request& req)
{
    if (req.body.empty())
        return json::object();
    auto j = json::parse(req.body);
    if (!j.is_object())
        throw std::invalid_argument("request body must be a JSON object");
    return j;
}

std::string request_id(const httplib::Request& req, const json& body)
{
    if (req.has_header("Idempotency-Key"))
        return req.get_header_value("Idempotency-Key");
    return body.value("request_id", std::string());
}

std::optional<std::size_t> task_param(const httplib::Request& req, const json& body)
{
    if (body.contains("task") && !body["task"].is_null())
        return body["task"].get<std::size_t>();
    if (req.has_param("task"))
        return static_cast<std::size_t>(std::stoul(req.get_param_value("task")));
    return std::nullopt;
}

std::string required_string(const json& body, const char* key)
{
    if (!body.contains(key) || !body[key].is_string())
        throw std::invalid_argument(std::string("body needs a string '") + key + "'");
    return body[key].get<std::string>();
}

} // namespace

struct PlayServer::Impl
{
    httplib::Server server;
    std::thread thread;
};

PlayServer::PlayServer(PlayService& service): _impl(std::make_unique<Impl>())
{
    using Handler = std::function<json(const std::string& participant, const httplib::Request&, httplib::Response&)>;
    auto wrap = [&service](Handler h) {
        return [&service, h](const httplib::Request& req, httplib::Response& res) {
            try
            {
                const auto participant = service.authenticate(bearer(req));
                const auto out = h(participant, req, res);
                res.set_content(out.dump(), "application/json");
            }
            catch (const std::exception& e)
            {
                const auto f = classify(e);
                res.status = f.status;
                res.set_content(json { { "error", { { "code", f.code }, { "message", e.what() } } } }.dump(), "application/json");
            }
        };
    };

    auto& s = _impl->server;
    s.Post("/sessions", wrap([&service](const std::string& p, const httplib::Request& req, httplib::Response& res) {
        const auto body = body_of(req);
        res.status = 201;
        return assignment_json(service.create_session(p, request_id(req, body)));
    }));
    s.Get(R"(/sessions/([^/]+))", wrap([&service](const std::string& p, const httplib::Request& req, httplib::Response&) {
        return assignment_json(service.get_session(p, req.matches[1]));
    }));
    s.Get(R"(/sessions/([^/]+)/book)", wrap([&service](const std::string& p, const httplib::Request& req, httplib::Response&) {
        const auto task = task_param(req, json::object());
        return json { { "task", task ? json(*task) : json(nullptr) }, { "book", service.knowledge_book(p, req.matches[1], task) } };
    }));
    s.Post(R"(/sessions/([^/]+)/action)", wrap([&service](const std::string& p, const httplib::Request& req, httplib::Response&) {
        const auto body = body_of(req);
        const auto r = service.post_action(p, req.matches[1], required_string(body, "action"), request_id(req, body), task_param(req, body));
        return json { { "task", r.task_index },
                      { "action", r.action },
                      { "observation", r.observation },
                      { "repeated", r.repeated },
                      { "action_count", r.action_count } };
    }));
    s.Post(R"(/sessions/([^/]+)/predict)", wrap([&service](const std::string& p, const httplib::Request& req, httplib::Response&) {
        const auto body = body_of(req);
        const auto r = service.post_prediction(p, req.matches[1], required_string(body, "truth"), request_id(req, body), task_param(req, body));
        return json { { "task", r.task_index },
                      { "truth", r.truth },
                      { "correct", r.correct },
                      { "score",
                        { { "completed", r.score.completed },
                          { "correct", r.score.correct },
                          { "actions", r.score.actions },
                          { "earnings", earnings_json(r.score.earnings) } } } };
    }));
    s.Get(R"(/sessions/([^/]+)/score)", wrap([&service](const std::string& p, const httplib::Request& req, httplib::Response&) {
        return summary_json(service.score(p, req.matches[1]));
    }));
}

PlayServer::~PlayServer()
{
    stop();
}

void PlayServer::start(const std::string& host, int port)
{
    if (_impl->thread.joinable())
        return;
    if (port == 0)
        _port = _impl->server.bind_to_any_port(host);
    else
        _port = _impl->server.bind_to_port(host, port) ? port : -1;
    if (_port <= 0)
        throw IoError("play service could not bind " + host + ":" + std::to_string(port));
    _impl->thread = std::thread([this] { _impl->server.listen_after_bind(); });
    _impl->server.wait_until_ready();
}

void PlayServer::listen(const std::string& host, int port)
{
    _port = port;
    if (!_impl->server.listen(host, port))
        throw IoError("play service could not listen on " + host + ":" + std::to_string(port));
}

void PlayServer::stop()
{
    if (!_impl)
        return;
    _impl->server.stop();
    if (_impl->thread.joinable())
        _impl->thread.join();
}

} // namespace kumo
