// SPDX-License-Identifier: Apache-2.0
#include <kumo/errors.hpp>
#include <kumo/llm.hpp>

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <thread>

namespace kumo
{

using nlohmann::json;

namespace
{

json request_to_json(const ChatRequest& r)
{
    json j;
    j["model"] = r.model;
    j["messages"] = json::array();
    for (const auto& m : r.messages)
        j["messages"].push_back({ { "role", m.role }, { "content", m.content } });
    if (r.temperature)
        j["temperature"] = *r.temperature;
    if (r.max_tokens)
        j["max_tokens"] = *r.max_tokens;
    return j;
}

ChatRequest request_from_json(const json& j)
{
    ChatRequest r;
    r.model = j.value("model", "");
    for (const auto& m : j.at("messages"))
        r.messages.push_back({ m.at("role").get<std::string>(), m.at("content").get<std::string>() });
    if (j.contains("temperature") && !j["temperature"].is_null())
        r.temperature = j["temperature"].get<double>();
    if (j.contains("max_tokens") && !j["max_tokens"].is_null())
        r.max_tokens = j["max_tokens"].get<int>();
    return r;
}

json response_to_json(const ChatResponse& r, const std::string& model)
{
    const char* finish = r.finish == FinishReason::Truncated ? "length" : r.finish == FinishReason::Error ? "error" : "stop";
    return { { "id", "chatcmpl-mock" },
             { "object", "chat.completion" },
             { "created", r.created },
             { "model", model },
             { "choices", json::array({ { { "index", 0 },
                                          { "message", { { "role", "assistant" }, { "content", r.content } } },
                                          { "finish_reason", finish } } }) },
             { "usage", { { "prompt_tokens", r.usage.input }, { "completion_tokens", r.usage.output } } } };
}

ChatResponse response_from_json(const json& j)
{
    ChatResponse r;
    const auto& choice = j.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    r.content = content.is_null() ? "" : content.get<std::string>();
    const auto finish = choice.value("finish_reason", std::string("stop"));
    r.finish = finish == "length" ? FinishReason::Truncated : (finish == "stop" || finish.empty()) ? FinishReason::Complete : FinishReason::Error;
    if (j.contains("usage") && j["usage"].is_object())
    {
        r.usage.input = j["usage"].value("prompt_tokens", std::int64_t { 0 });
        r.usage.output = j["usage"].value("completion_tokens", std::int64_t { 0 });
    }
    r.created = j.value("created", std::int64_t { 0 });
    return r;
}

} // namespace

HttpChatClient::HttpChatClient(HttpChatOptions options): _options(std::move(options))
{
    if (_options.api_key.empty())
        if (const char* key = std::getenv("KUMO_LLM_API_KEY"))
            _options.api_key = key;

    const auto& url = _options.base_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw TransportError("endpoint URL needs a scheme: '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    _host = url.substr(0, path_start);
    _path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!_path.empty() && _path.back() == '/')
        _path.pop_back();
}

ChatResponse HttpChatClient::chat(const ChatRequest& request)
{
    httplib::Client client(_host);
    client.set_connection_timeout(_options.timeout_s, 0);
    client.set_read_timeout(_options.timeout_s, 0);
    client.set_write_timeout(_options.timeout_s, 0);
    httplib::Headers headers;
    if (!_options.api_key.empty())
        headers.emplace("Authorization", "Bearer " + _options.api_key);

    const auto body = request_to_json(request).dump();
    std::string last_error;
    int last_status = 0;
    for (int attempt = 0; attempt <= _options.max_retries; ++attempt)
    {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(_options.initial_backoff_ms << (attempt - 1)));

        auto res = client.Post(_path + "/chat/completions", headers, body, "application/json");
        if (!res)
        {
            last_status = 0;
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        last_status = res->status;
        if (res->status == 401 || res->status == 403)
            throw AuthError("endpoint rejected the credentials (HTTP " + std::to_string(res->status) + ")");
        if (res->status == 429 || res->status >= 500)
        {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw TransportError("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
        try
        {
            return response_from_json(json::parse(res->body));
        }
        catch (const json::exception& e)
        {
            throw TransportError(std::string("malformed completion response: ") + e.what());
        }
    }
    if (last_status == 429)
        throw RateLimited("still rate limited after " + std::to_string(_options.max_retries) + " retries");
    throw TransportError(last_error + " after " + std::to_string(_options.max_retries) + " retries");
}

ScriptedChatBackend::ScriptedChatBackend(std::vector<ChatResponse> responses): _queue(responses.begin(), responses.end()) {}

void ScriptedChatBackend::push(ChatResponse response)
{
    _queue.push_back(std::move(response));
}

void ScriptedChatBackend::push(std::string content, FinishReason finish)
{
    ChatResponse r;
    r.content = std::move(content);
    r.finish = finish;
    r.usage.output = approx_tokens(r.content);
    _queue.push_back(std::move(r));
}

ChatResponse ScriptedChatBackend::chat(const ChatRequest& request)
{
    _requests.push_back(request);
    if (_queue.empty())
        throw TransportError("scripted backend has no reply left");
    auto r = std::move(_queue.front());
    _queue.pop_front();
    for (const auto& m : request.messages)
        r.usage.input += approx_tokens(m.content);
    return r;
}

struct MockLlmServer::Impl
{
    httplib::Server server;
    std::thread thread;
    std::mutex mutex;
    int failures_left = 0;
};

MockLlmServer::MockLlmServer(ChatBackend& backend, MockServerOptions options): _impl(std::make_unique<Impl>())
{
    _impl->failures_left = options.fail_first;
    _impl->server.Post("/v1/chat/completions", [this, &backend, options](const httplib::Request& req, httplib::Response& res) {
        ++_served;
        if (!options.required_key.empty() && req.get_header_value("Authorization") != "Bearer " + options.required_key)
        {
            res.status = 401;
            res.set_content(R"({"error":{"message":"invalid api key"}})", "application/json");
            return;
        }
        std::lock_guard lock(_impl->mutex);
        if (_impl->failures_left > 0)
        {
            --_impl->failures_left;
            res.status = options.fail_status;
            res.set_content(R"({"error":{"message":"injected failure"}})", "application/json");
            return;
        }
        try
        {
            const auto request = request_from_json(json::parse(req.body));
            const auto response = backend.chat(request);
            res.set_content(response_to_json(response, request.model).dump(), "application/json");
        }
        catch (const std::exception& e)
        {
            res.status = 400;
            res.set_content(json { { "error", { { "message", e.what() } } } }.dump(), "application/json");
        }
    });
}

MockLlmServer::~MockLlmServer()
{
    stop();
}

void MockLlmServer::start()
{
    if (_impl->thread.joinable())
        return;
    _port = _impl->server.bind_to_any_port("127.0.0.1");
    if (_port <= 0)
        throw IoError("mock endpoint could not bind a port");
    _impl->thread = std::thread([this] { _impl->server.listen_after_bind(); });
    _impl->server.wait_until_ready();
}

void MockLlmServer::stop()
{
    if (!_impl || !_impl->thread.joinable())
        return;
    _impl->server.stop();
    _impl->thread.join();
}

std::string MockLlmServer::base_url() const
{
    return "http://127.0.0.1:" + std::to_string(_port) + "/v1";
}

} // namespace kumo
