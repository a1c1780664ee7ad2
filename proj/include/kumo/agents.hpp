// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <kumo/oracle.hpp>
#include <kumo/rng.hpp>
#include <kumo/simulator.hpp>

#include <deque>
#include <string>
#include <vector>

namespace kumo
{

class ChatBackend;

/// Takes a uniformly random unused action, or answers a random truth with
/// probability 1/(remaining + 1).
class RandomAgent : public Agent
{
public:
    explicit RandomAgent(std::uint64_t seed): _rng(seed) {}
    AgentReply respond(const std::vector<ChatMessage>& transcript, const GameView& view) override;

private:
    Rng _rng;
};

/// Plays the optimal policy using only the task's public outcome mapping and
/// the observations reported in the view.
class OracleAgent : public Agent
{
public:
    explicit OracleAgent(const TaskInstance& task);
    AgentReply respond(const std::vector<ChatMessage>& transcript, const GameView& view) override;

private:
    TaskInstance _mapping; // realized outcomes and the valid truth are ignored
    OptimalSearch _search;
};

/// Replays canned replies in order; repeats the last one when exhausted.
class ScriptedAgent : public Agent
{
public:
    explicit ScriptedAgent(std::vector<std::string> replies): _replies(replies.begin(), replies.end()) {}
    AgentReply respond(const std::vector<ChatMessage>& transcript, const GameView& view) override;

private:
    std::deque<std::string> _replies;
    std::string _last;
};

/// Forwards the transcript to a chat backend.
class ChatAgent : public Agent
{
public:
    ChatAgent(ChatBackend& backend, std::string model): _backend(backend), _model(std::move(model)) {}
    AgentReply respond(const std::vector<ChatMessage>& transcript, const GameView& view) override;

private:
    ChatBackend& _backend;
    std::string _model;
};

} // namespace kumo
