// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <kumo/chat.hpp>

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace kumo
{

enum class FinishReason
{
    Complete,
    Truncated, // stopped at the output length limit
    Error,
};

struct ChatRequest
{
    std::string model;
    std::vector<ChatMessage> messages;
    std::optional<double> temperature;
    std::optional<int> max_tokens;
};

struct ChatResponse
{
    std::string content;
    FinishReason finish = FinishReason::Complete;
    TokenUsage usage;
    std::int64_t created = 0; // unix seconds reported by the backend
};

class ChatBackend
{
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse chat(const ChatRequest& request) = 0;
};

struct HttpChatOptions
{
    std::string base_url = "http://127.0.0.1:8000/v1";
    std::string api_key; // empty: read KUMO_LLM_API_KEY
    int max_retries = 3;
    int initial_backoff_ms = 250;
    int timeout_s = 120;
};

/// OpenAI-compatible chat-completions client. Retries rate limits, server
/// errors and connection failures with exponential backoff. Throws AuthError
/// on 401/403, RateLimited when 429 persists and TransportError otherwise.
class HttpChatClient : public ChatBackend
{
public:
    explicit HttpChatClient(HttpChatOptions options);
    ChatResponse chat(const ChatRequest& request) override;

private:
    HttpChatOptions _options;
    std::string _host; // scheme://host:port
    std::string _path; // path prefix without trailing slash
};

/// Serves a scripted queue of responses and records every request.
class ScriptedChatBackend : public ChatBackend
{
public:
    ScriptedChatBackend() = default;
    explicit ScriptedChatBackend(std::vector<ChatResponse> responses);

    void push(ChatResponse response);
    void push(std::string content, FinishReason finish = FinishReason::Complete);
    ChatResponse chat(const ChatRequest& request) override;

    [[nodiscard]] const std::vector<ChatRequest>& requests() const noexcept { return _requests; }

private:
    std::deque<ChatResponse> _queue;
    std::vector<ChatRequest> _requests;
};

struct SimulatedLlmOptions
{
    std::uint64_t seed = 0;
    int chunk_chars = 0;             // > 0: replies longer than this are cut and need continuing
    bool flawed_first_book = false;  // first book omits the last action's rules
    int invalid_configs = 0;         // number of leading outcome replies that reference an unknown truth
};

/// Deterministic stand-in for a language model. Recognizes the pipeline's
/// prompt templates and answers each stage from a synthetic config derived
/// from the domain; game prompts get a naive in-order player.
class SimulatedLlm : public ChatBackend
{
public:
    explicit SimulatedLlm(SimulatedLlmOptions options = {}): _options(options) {}
    ChatResponse chat(const ChatRequest& request) override;

    [[nodiscard]] std::size_t calls() const noexcept { return _calls; }

private:
    std::string full_reply(const std::string& stage, const std::string& prompt);

    SimulatedLlmOptions _options;
    std::mutex _mutex;
    std::size_t _calls = 0;
    int _invalid_left = -1;
    bool _book_drafted = false;
    // Decisions taken on a stage's first chunk, reused for its continuations.
    bool _fresh = true;
    bool _corrupt_outcomes = false;
    bool _flawed_book = false;
};

struct MockServerOptions
{
    int fail_first = 0;   // leading requests answered with fail_status
    int fail_status = 429;
    std::string required_key; // non-empty: demand this bearer token
};

/// Local OpenAI-compatible endpoint backed by any ChatBackend.
class MockLlmServer
{
public:
    explicit MockLlmServer(ChatBackend& backend, MockServerOptions options = {});
    ~MockLlmServer();
    MockLlmServer(const MockLlmServer&) = delete;
    MockLlmServer& operator=(const MockLlmServer&) = delete;

    /// Binds to 127.0.0.1 on a free port and serves in a background thread.
    void start();
    void stop();

    [[nodiscard]] int port() const noexcept { return _port; }
    [[nodiscard]] std::string base_url() const;
    [[nodiscard]] int requests_served() const noexcept { return _served.load(); }

private:
    struct Impl;
    std::unique_ptr<Impl> _impl;
    int _port = 0;
    std::atomic<int> _served { 0 };
};

} // namespace kumo
