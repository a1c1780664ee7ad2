// SPDX-License-Identifier: Apache-2.0
#include <kumo/agents.hpp>
#include <kumo/llm.hpp>

#include <algorithm>

namespace kumo
{

namespace
{

std::int64_t transcript_tokens(const std::vector<ChatMessage>& transcript)
{
    std::int64_t n = 0;
    for (const auto& m : transcript)
        n += approx_tokens(m.content);
    return n;
}

AgentReply reply(const std::vector<ChatMessage>& transcript, std::string text)
{
    TokenUsage usage { transcript_tokens(transcript), approx_tokens(text) };
    return { std::move(text), usage };
}

} // namespace

AgentReply RandomAgent::respond(const std::vector<ChatMessage>& transcript, const GameView& view)
{
    const auto& left = view.remaining_actions;
    if (left.empty() || _rng.below(left.size() + 1) == left.size())
        return reply(transcript, "<ANSWER>" + view.truths[_rng.below(view.truths.size())] + "</ANSWER>");
    return reply(transcript, "<ACTION>" + left[_rng.below(left.size())] + "</ACTION>");
}

OracleAgent::OracleAgent(const TaskInstance& task): _mapping(task), _search(ExclusionModel::from_task(task))
{
}

AgentReply OracleAgent::respond(const std::vector<ChatMessage>& transcript, const GameView& view)
{
    const auto& model = _search.model();
    SearchState state { model.all_truths(), model.all_actions() };
    for (const auto& [name, label] : view.observations)
        for (std::size_t a = 0; a < _mapping.actions.size(); ++a)
        {
            const auto& action = _mapping.actions[a];
            if (action.name != name)
                continue;
            for (std::size_t s = 0; s < action.states.size(); ++s)
                if (action.states[s].label == label)
                    state.truths &= ~model.state_masks[a][s];
            state.actions &= ~(std::uint64_t { 1 } << a);
        }

    auto entry = _search.solve(state);
    if (entry.best_action)
        return reply(transcript, "<ACTION>" + _mapping.actions[*entry.best_action].name + "</ACTION>");
    auto truth = deduce_truth(model, state);
    // Without a forced truth the game was unsound; fall back to the first candidate.
    std::size_t pick = 0;
    if (truth)
        pick = *truth;
    else
        for (std::size_t i = 0; i < _mapping.truths.size(); ++i)
            if ((state.truths >> i) & 1U)
            {
                pick = i;
                break;
            }
    return reply(transcript, "<ANSWER>" + _mapping.truths[pick] + "</ANSWER>");
}

AgentReply ScriptedAgent::respond(const std::vector<ChatMessage>& transcript, const GameView&)
{
    if (!_replies.empty())
    {
        _last = _replies.front();
        _replies.pop_front();
    }
    return reply(transcript, _last);
}

AgentReply ChatAgent::respond(const std::vector<ChatMessage>& transcript, const GameView&)
{
    ChatRequest request;
    request.model = _model;
    request.messages = transcript;
    auto response = _backend.chat(request);
    if (response.finish == FinishReason::Error)
        throw AgentTransportError("chat backend returned an error reply");
    return { std::move(response.content), response.usage };
}

} // namespace kumo
