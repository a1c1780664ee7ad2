// SPDX-License-Identifier: Apache-2.0
#include <kumo/errors.hpp>
#include <kumo/llm.hpp>
#include <kumo/llm_gen.hpp>
#include <kumo/rng.hpp>
#include <kumo/synthetic.hpp>

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <sstream>

namespace kumo
{

namespace
{

struct Nouns
{
    const char* domain;
    const char* truth;
    const char* action;
};

constexpr Nouns KnownNouns[] = {
    { "medical", "Disease", "Test" },       { "chemistry", "Compound", "Assay" },  { "music", "Genre", "Listening check" },
    { "education", "Learning gap", "Quiz" }, { "mechanics", "Fault", "Inspection" }, { "botany", "Species", "Observation" },
    { "astronomy", "Object", "Measurement" }, { "cooking", "Ingredient", "Tasting" }, { "network", "Outage cause", "Probe" },
};

Nouns nouns_for(const std::string& domain)
{
    std::string lowered(domain);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const auto& n : KnownNouns)
        if (lowered.find(n.domain) != std::string::npos)
            return n;
    return { "", "Candidate", "Probe" };
}

std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s)
        h = (h ^ c) * 0x100000001b3ULL;
    return h;
}

std::string field(const std::string& prompt, const std::string& name)
{
    std::istringstream in(prompt);
    const auto prefix = name + ":";
    for (std::string line; std::getline(in, line);)
        if (line.rfind(prefix, 0) == 0)
        {
            auto v = line.substr(prefix.size());
            v.erase(0, v.find_first_not_of(' '));
            return v;
        }
    return {};
}

int int_field(const std::string& prompt, const std::string& name, int fallback)
{
    const auto v = field(prompt, name);
    try
    {
        return v.empty() ? fallback : std::stoi(v);
    }
    catch (const std::exception&)
    {
        return fallback;
    }
}

SyntheticSpec spec_for(const std::string& domain, const std::string& goal, int n_truths, int n_actions, std::uint64_t seed)
{
    const auto nouns = nouns_for(domain);
    SyntheticSpec spec;
    spec.domain = domain;
    spec.goal = goal.empty() ? "Identify the hidden " + std::string(nouns.truth) + "." : goal;
    spec.truth_noun = nouns.truth;
    spec.action_noun = nouns.action;
    spec.n_truths = n_truths;
    spec.n_actions = n_actions;
    spec.seed = derive_seed(seed, { fnv1a(domain) });
    return spec;
}

SeedConfig config_from_prompt(const std::string& prompt)
{
    return parse_seed_config(extract_json_block(prompt));
}

std::string json_reply(const std::string& lead, const std::string& body)
{
    return lead + "\n\n```json\n" + body + "\n```\n";
}

// Naive player: takes the remaining actions in order, then names the first candidate.
std::string play(const std::vector<ChatMessage>& messages)
{
    std::string truths, remaining;
    for (const auto& m : messages)
    {
        if (auto v = field(m.content, "Candidate truths"); !v.empty())
            truths = v;
        if (auto v = field(m.content, "Remaining actions"); !v.empty())
            remaining = v;
    }
    if (!remaining.empty() && remaining != "(none)")
        return "<ACTION>" + remaining.substr(0, remaining.find(", ")) + "</ACTION>";
    return "<ANSWER>" + truths.substr(0, truths.find(", ")) + "</ANSWER>";
}

} // namespace

ChatResponse SimulatedLlm::chat(const ChatRequest& request)
{
    std::lock_guard lock(_mutex);
    ++_calls;
    if (_invalid_left < 0)
        _invalid_left = _options.invalid_configs;

    ChatResponse response;
    for (const auto& m : request.messages)
        response.usage.input += approx_tokens(m.content);

    // The stage prompt is the last user message that starts with a task line;
    // everything the assistant said after it is already-delivered output.
    std::size_t prompt_at = request.messages.size();
    for (std::size_t i = 0; i < request.messages.size(); ++i)
        if (request.messages[i].role == "user" && request.messages[i].content.rfind("Task: ", 0) == 0)
            prompt_at = i;

    std::string full;
    std::size_t offset = 0;
    if (prompt_at == request.messages.size())
    {
        full = play(request.messages);
    }
    else
    {
        const auto& prompt = request.messages[prompt_at].content;
        const auto stage = prompt.substr(6, prompt.find_first_of(" \n", 6) - 6);
        for (std::size_t i = prompt_at + 1; i < request.messages.size(); ++i)
            if (request.messages[i].role == "assistant")
                offset += request.messages[i].content.size();
        _fresh = offset == 0;
        full = full_reply(stage, prompt);
    }

    const auto chunk = _options.chunk_chars > 0 ? static_cast<std::size_t>(_options.chunk_chars) : full.size();
    response.content = offset < full.size() ? full.substr(offset, chunk) : std::string();
    response.finish = offset + chunk < full.size() ? FinishReason::Truncated : FinishReason::Complete;
    response.usage.output = approx_tokens(response.content);
    return response;
}

std::string SimulatedLlm::full_reply(const std::string& stage, const std::string& prompt)
{
    const auto domain = field(prompt, "Domain");
    if (stage == "propose-domains")
    {
        const auto nouns = nouns_for(domain);
        const int count = std::max(1, int_field(prompt, "Count", 1));
        std::ostringstream out;
        out << "Here are " << count << " settings.\n";
        for (int i = 1; i <= count; ++i)
            out << "\nGoal: 'Identify the " << nouns.truth << " behind case " << i << " in the " << domain << " domain.'\n"
                << "Truths: 'Candidate " << nouns.truth << " entries, each a distinct possibility.'\n"
                << "Actions: \"" << nouns.action << " procedures whose outcomes rule candidates out.\"\n";
        return out.str();
    }
    if (stage == "seed-config-outline")
    {
        auto cfg = synthetic_config(spec_for(domain, field(prompt, "Goal"), int_field(prompt, "Number of truths", 20),
                                             int_field(prompt, "Number of actions", 24), _options.seed));
        for (auto& a : cfg.actions)
            for (auto& s : a.states)
                s.ruled_out.clear();
        return json_reply("Here is the outline.", serialize_seed_config(cfg));
    }
    if (stage == "seed-config-outcomes")
    {
        const auto outline = config_from_prompt(prompt);
        auto cfg = synthetic_config(spec_for(outline.domain, outline.goal, static_cast<int>(outline.truths.size()),
                                             static_cast<int>(outline.actions.size()), _options.seed));
        if (_fresh)
        {
            _corrupt_outcomes = _invalid_left > 0;
            if (_corrupt_outcomes)
                --_invalid_left;
        }
        auto text = serialize_seed_config(cfg);
        if (_corrupt_outcomes)
        {
            // Reference a truth the outline never listed.
            auto j = nlohmann::ordered_json::parse(text);
            auto& states = j["outcomes"].begin().value()["states"];
            states.begin().value().push_back("Unlisted " + std::string(nouns_for(outline.domain).truth));
            text = j.dump(2);
        }
        return json_reply("Here is the completed config.", text);
    }
    if (stage == "knowledge-book")
    {
        const auto cfg = config_from_prompt(prompt);
        if (_fresh)
        {
            _flawed_book = _options.flawed_first_book && !_book_drafted;
            _book_drafted = true;
        }
        return reference_book(cfg, _flawed_book ? 1 : 0);
    }
    if (stage == "verify-book")
    {
        const auto cfg = config_from_prompt(prompt);
        const auto book = extract_book(prompt).value_or("");
        std::vector<std::string> missing;
        for (const auto& rule : reference_book_rules(cfg))
            if (book.find(rule) == std::string::npos)
                missing.push_back(rule);
        if (missing.empty())
            return "Every rule is stated correctly.\n<ANSWER>True</ANSWER>";
        std::string out = "<ANSWER>False</ANSWER>\nMissing rules:";
        for (const auto& m : missing)
            out += "\n- " + m;
        return out;
    }
    if (stage == "revise-book")
        return "<BOOK>\n" + reference_book(config_from_prompt(prompt)) + "\n</BOOK>";
    return "I do not recognize this request.";
}

} // namespace kumo
