// SPDX-License-Identifier: Apache-2.0
#include <kumo/errors.hpp>
#include <kumo/llm_gen.hpp>

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <ctime>
#include <regex>
#include <stdexcept>
#include <utility>

namespace kumo
{

namespace detail
{
// Defined in the build-generated prompt table.
const std::vector<std::pair<std::string_view, std::string_view>>& prompt_assets();
} // namespace detail

namespace
{

constexpr const char* OutlineExample = R"({
  "domain": "Example",
  "goal": "Identify the faulty component.",
  "truths": ["Worn belt", "Loose wire"],
  "outcomes": {
    "Listen to the motor": {
      "type": "str",
      "states": { "quiet": [], "squealing": [] }
    },
    "Measure the voltage": {
      "type": "float",
      "states": { "[0,5]": [], "[5,12]": [] }
    }
  }
})";

std::string trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return std::string(s);
}

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

ChatRequest single_prompt(const std::string& model, std::string prompt, std::optional<int> max_tokens = std::nullopt)
{
    ChatRequest r;
    r.model = model;
    r.messages.push_back({ "user", std::move(prompt) });
    r.max_tokens = max_tokens;
    return r;
}

} // namespace

std::string_view prompt_template(std::string_view name)
{
    for (const auto& [n, text] : detail::prompt_assets())
        if (n == name)
            return text;
    throw std::out_of_range("no prompt template named '" + std::string(name) + "'");
}

std::vector<std::string> prompt_names()
{
    std::vector<std::string> out;
    for (const auto& [n, text] : detail::prompt_assets())
        out.emplace_back(n);
    return out;
}

std::string render_prompt(std::string_view name, const std::map<std::string, std::string>& vars)
{
    const auto tmpl = prompt_template(name);
    std::string out;
    std::size_t pos = 0;
    while (true)
    {
        const auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos)
        {
            out.append(tmpl.substr(pos));
            break;
        }
        const auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos)
            throw std::invalid_argument("unterminated placeholder in prompt '" + std::string(name) + "'");
        const std::string key(tmpl.substr(open + 2, close - open - 2));
        auto it = vars.find(key);
        if (it == vars.end())
            throw std::invalid_argument("prompt '" + std::string(name) + "' needs a value for '" + key + "'");
        out.append(tmpl.substr(pos, open - pos));
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

Completion complete_with_continuation(ChatBackend& backend, ChatRequest request, int max_continuations)
{
    Completion out;
    while (true)
    {
        auto response = backend.chat(request);
        ++out.chunks;
        out.usage += response.usage;
        out.created = std::max(out.created, response.created);
        if (response.finish == FinishReason::Error)
            throw GenerationFailed("backend reported an error while generating");
        out.text += response.content;
        if (response.finish == FinishReason::Complete)
            return out;
        if (out.chunks > max_continuations)
            throw GenerationFailed("reply still truncated after " + std::to_string(max_continuations) + " continuations");
        request.messages.push_back({ "assistant", std::move(response.content) });
        request.messages.push_back({ "user", std::string(prompt_template("continue")) });
    }
}

std::vector<DomainProposal> parse_proposals(std::string_view text)
{
    static const std::regex line_re(R"(^\s*\**\s*(goal|truths|actions)\s*\**\s*:\s*(.*?)\s*$)", std::regex::icase);
    std::vector<DomainProposal> out;
    std::optional<DomainProposal> current;
    auto flush = [&] {
        if (current && current->complete())
            out.push_back(*current);
        current.reset();
    };

    std::string buffer(text);
    std::size_t start = 0;
    while (start <= buffer.size())
    {
        auto end = buffer.find('\n', start);
        if (end == std::string::npos)
            end = buffer.size();
        const std::string line = buffer.substr(start, end - start);
        start = end + 1;

        std::smatch m;
        if (!std::regex_match(line, m, line_re))
            continue;
        std::string value = m[2].str();
        if (value.size() >= 2 && (value.front() == '\'' || value.front() == '"') && value.back() == value.front())
            value = value.substr(1, value.size() - 2);
        value = trim(value);
        const auto key = lower(m[1].str());
        if (key == "goal")
        {
            flush();
            current = DomainProposal { value, {}, {} };
        }
        else if (current)
            (key == "truths" ? current->truths_desc : current->actions_desc) = value;
    }
    flush();
    return out;
}

std::vector<DomainProposal> propose_domains(ChatBackend& backend, const std::string& model, const std::string& domain,
                                            int count, std::optional<double> temperature, int max_attempts)
{
    if (count <= 0)
        throw InvalidParams("proposal count must be positive");
    std::vector<DomainProposal> proposals;
    for (int attempt = 0; attempt < max_attempts && proposals.size() < static_cast<std::size_t>(count); ++attempt)
    {
        const auto missing = count - static_cast<int>(proposals.size());
        auto request = single_prompt(model, render_prompt("propose_domains", { { "domain", domain }, { "count", std::to_string(missing) } }));
        request.temperature = temperature;
        for (auto& p : parse_proposals(complete_with_continuation(backend, request).text))
            if (proposals.size() < static_cast<std::size_t>(count)
                && std::find(proposals.begin(), proposals.end(), p) == proposals.end())
                proposals.push_back(std::move(p));
    }
    if (proposals.size() < static_cast<std::size_t>(count))
        throw GenerationFailed("only " + std::to_string(proposals.size()) + " of " + std::to_string(count)
                               + " complete Goal/Truths/Actions proposals after " + std::to_string(max_attempts) + " requests");
    return proposals;
}

std::string extract_json_block(std::string_view text)
{
    const auto lowered = lower(text);
    if (auto fence = lowered.find("```json"); fence != std::string::npos)
    {
        const auto body = text.find('\n', fence);
        const auto close = body == std::string_view::npos ? body : text.find("```", body);
        if (close != std::string_view::npos)
            return trim(text.substr(body + 1, close - body - 1));
    }
    const auto open = text.find('{');
    const auto close = text.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
        throw GenerationFailed("reply contains no JSON object");
    return std::string(text.substr(open, close - open + 1));
}

std::string iso_timestamp(std::int64_t unix_seconds)
{
    const auto t = static_cast<std::time_t>(unix_seconds);
    std::tm tm {};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

SeedConfig generate_seed_config(ChatBackend& backend, const std::string& model, const std::string& domain,
                                const DomainProposal& proposal, const SeedGenOptions& options)
{
    if (!proposal.complete())
        throw InvalidParams("proposal for '" + domain + "' is incomplete");
    if (options.max_attempts <= 0)
        throw InvalidParams("max_attempts must be positive");

    const auto outline_prompt = render_prompt("seed_config_outline", { { "domain", domain },
                                                                       { "goal", proposal.goal },
                                                                       { "truths_desc", proposal.truths_desc },
                                                                       { "actions_desc", proposal.actions_desc },
                                                                       { "n_truths", std::to_string(options.n_truths) },
                                                                       { "n_actions", std::to_string(options.n_actions) },
                                                                       { "schema", OutlineExample } });
    std::string last_problem;
    for (int attempt = 0; attempt < options.max_attempts; ++attempt)
    {
        std::string outline;
        try
        {
            outline = extract_json_block(
                complete_with_continuation(backend, single_prompt(model, outline_prompt, options.max_tokens), options.max_continuations).text);
            outline = nlohmann::ordered_json::parse(outline).dump(2);
        }
        catch (const nlohmann::json::exception& e)
        {
            last_problem = std::string("outline is not valid JSON: ") + e.what();
            continue;
        }

        const auto outcomes_prompt = render_prompt("seed_config_outcomes", { { "domain", domain }, { "outline", outline } });
        const auto completion = complete_with_continuation(backend, single_prompt(model, outcomes_prompt, options.max_tokens),
                                                           options.max_continuations);
        SeedConfig cfg;
        try
        {
            cfg = parse_seed_config(extract_json_block(completion.text));
        }
        catch (const SchemaError& e)
        {
            last_problem = e.what();
            continue;
        }
        catch (const GenerationFailed& e)
        {
            last_problem = e.what();
            continue;
        }
        cfg.domain = domain;
        if (cfg.goal.empty())
            cfg.goal = proposal.goal;
        if (auto report = validate_seed_config(cfg); !report.ok)
        {
            last_problem = report.summary();
            continue;
        }
        cfg.provenance = Provenance { model, iso_timestamp(completion.created), options.seed };
        return cfg;
    }
    throw PersistentlyInvalid("no valid config for '" + domain + "' after " + std::to_string(options.max_attempts)
                              + " attempts: " + last_problem);
}

std::string write_knowledge_book(ChatBackend& backend, const std::string& model, const SeedConfig& cfg, int max_continuations)
{
    const auto prompt = render_prompt("knowledge_book", { { "domain", cfg.domain }, { "config", serialize_seed_config(cfg) } });
    auto book = trim(complete_with_continuation(backend, single_prompt(model, prompt), max_continuations).text);
    if (auto inner = extract_book(book))
        book = *inner;
    if (book.empty())
        throw GenerationFailed("empty knowledge book for '" + cfg.domain + "'");
    return book;
}

std::optional<bool> parse_verdict(std::string_view text)
{
    static const std::regex re(R"(<answer>\s*(true|false)\s*</answer>)", std::regex::icase);
    std::cmatch m;
    if (!std::regex_search(text.begin(), text.end(), m, re))
        return std::nullopt;
    return lower(m[1].str()) == "true";
}

std::optional<std::string> extract_book(std::string_view text)
{
    const auto lowered = lower(text);
    const auto open = lowered.find("<book>");
    if (open == std::string::npos)
        return std::nullopt;
    const auto close = lowered.find("</book>", open);
    if (close == std::string::npos)
        return std::nullopt;
    return trim(text.substr(open + 6, close - open - 6));
}

BookReview review_knowledge_book(ChatBackend& backend, const std::string& verifier_model, const std::string& writer_model,
                                 const SeedConfig& cfg, std::string book, int max_rounds)
{
    BookReview review;
    review.book = std::move(book);
    const auto config = serialize_seed_config(cfg);
    while (true)
    {
        const auto verify = render_prompt("verify_book", { { "domain", cfg.domain }, { "config", config }, { "book", review.book } });
        const auto verdict_text = complete_with_continuation(backend, single_prompt(verifier_model, verify)).text;
        const auto verdict = parse_verdict(verdict_text);
        if (!verdict)
            throw VerdictUnparseable("verifier reply has no <ANSWER>True/False</ANSWER> verdict");
        if (*verdict)
        {
            review.verified = true;
            return review;
        }
        review.notes.push_back(trim(verdict_text));
        if (review.rounds >= max_rounds)
            return review;

        const auto revise = render_prompt("revise_book", { { "domain", cfg.domain },
                                                           { "notes", review.notes.back() },
                                                           { "config", config },
                                                           { "book", review.book } });
        const auto revised = complete_with_continuation(backend, single_prompt(writer_model, revise)).text;
        review.book = extract_book(revised).value_or(trim(revised));
        ++review.rounds;
    }
}

EnvironmentBuild build_environment(ChatBackend& backend, const StageModels& models, const std::string& domain,
                                   const SeedGenOptions& options)
{
    EnvironmentBuild out;
    out.proposal = propose_domains(backend, models.propose, domain, 3).front();
    out.config = generate_seed_config(backend, models.config, domain, out.proposal, options);
    auto draft = write_knowledge_book(backend, models.book, out.config, options.max_continuations);
    out.book = review_knowledge_book(backend, models.verify, models.book, out.config, std::move(draft));
    return out;
}

} // namespace kumo
