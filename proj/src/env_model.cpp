// SPDX-License-Identifier: Apache-2.0
#include <kumo/env_model.hpp>
#include <kumo/errors.hpp>

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_set>

namespace kumo
{

using ojson = nlohmann::ordered_json;

std::string_view to_string(OutcomeKind kind)
{
    return kind == OutcomeKind::Numeric ? "float" : "str";
}

OutcomeKind outcome_kind_from_tag(std::string_view tag)
{
    if (tag == "str")
        return OutcomeKind::Categorical;
    if (tag == "float")
        return OutcomeKind::Numeric;
    throw SchemaError("unknown outcome type tag '" + std::string(tag) + "' (expected \"str\" or \"float\")");
}

namespace
{

std::string_view trim(std::string_view s)
{
    constexpr std::string_view ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::optional<double> parse_decimal(std::string_view s)
{
    s = trim(s);
    if (s.empty())
        return std::nullopt;
    // Decimal notation only: optional sign, digits, optional fraction.
    std::size_t i = 0;
    if (s[i] == '-' || s[i] == '+')
        ++i;
    bool digits = false;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
        ++i, digits = true;
    if (i < s.size() && s[i] == '.')
    {
        ++i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
            ++i, digits = true;
    }
    if (!digits || i != s.size())
        return std::nullopt;
    const auto start = s.front() == '+' ? 1 : 0;
    double value = 0.0;
    const auto* first = s.data() + start;
    const auto* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc {} || ptr != last || !std::isfinite(value))
        return std::nullopt;
    return value;
}

} // namespace

std::optional<Interval> parse_interval_label(std::string_view text)
{
    auto t = trim(text);
    if (t.size() < 5 || t.front() != '[' || t.back() != ']')
        return std::nullopt;
    t = t.substr(1, t.size() - 2);
    const auto comma = t.find(',');
    if (comma == std::string_view::npos || t.find(',', comma + 1) != std::string_view::npos)
        return std::nullopt;
    auto lo = parse_decimal(t.substr(0, comma));
    auto hi = parse_decimal(t.substr(comma + 1));
    if (!lo || !hi)
        return std::nullopt;
    return Interval { *lo, *hi };
}

const ActionSpec* SeedConfig::find_action(std::string_view name) const
{
    auto it = std::find_if(actions.begin(), actions.end(), [&](const ActionSpec& a) { return a.name == name; });
    return it == actions.end() ? nullptr : &*it;
}

bool SeedConfig::has_truth(std::string_view name) const
{
    return std::find(truths.begin(), truths.end(), name) != truths.end();
}

bool ValidationReport::has(std::string_view code) const
{
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.code == code; });
}

std::string ValidationReport::summary() const
{
    std::ostringstream out;
    for (const auto& v : violations)
        out << v.code << '(' << v.element << "): " << v.message << '\n';
    return out.str();
}

namespace
{

/// Rejects repeated keys inside any JSON object; nlohmann would silently keep the last.
ojson parse_rejecting_duplicate_keys(std::string_view text)
{
    std::vector<std::set<std::string>> seen;
    ojson::parser_callback_t cb = [&](int /*depth*/, ojson::parse_event_t event, ojson& parsed) {
        switch (event)
        {
            case ojson::parse_event_t::object_start: seen.emplace_back(); break;
            case ojson::parse_event_t::object_end: seen.pop_back(); break;
            case ojson::parse_event_t::key: {
                auto key = parsed.get<std::string>();
                if (!seen.empty() && !seen.back().insert(key).second)
                    throw DuplicateName("duplicate key '" + key + "'");
                break;
            }
            default: break;
        }
        return true;
    };
    try
    {
        return ojson::parse(text.begin(), text.end(), cb);
    }
    catch (const ojson::exception& e)
    {
        throw SchemaError(std::string("malformed JSON: ") + e.what());
    }
}

const ojson& require(const ojson& obj, const char* key, ojson::value_t type, const char* what)
{
    auto it = obj.find(key);
    if (it == obj.end())
        throw SchemaError(std::string("missing field '") + key + "' in " + what);
    if (it->type() != type)
        throw SchemaError(std::string("field '") + key + "' in " + what + " has the wrong type");
    return *it;
}

} // namespace

SeedConfig parse_seed_config(std::string_view text)
{
    const auto doc = parse_rejecting_duplicate_keys(text);
    if (!doc.is_object())
        throw SchemaError("seed config must be a JSON object");

    SeedConfig cfg;
    cfg.domain = require(doc, "domain", ojson::value_t::string, "config").get<std::string>();
    cfg.goal = require(doc, "goal", ojson::value_t::string, "config").get<std::string>();

    std::unordered_set<std::string> truth_set;
    for (const auto& t : require(doc, "truths", ojson::value_t::array, "config"))
    {
        if (!t.is_string())
            throw SchemaError("truths must be strings");
        auto name = t.get<std::string>();
        if (!truth_set.insert(name).second)
            throw DuplicateName("duplicate truth '" + name + "'");
        cfg.truths.push_back(std::move(name));
    }

    for (const auto& [action, spec] : require(doc, "outcomes", ojson::value_t::object, "config").items())
    {
        if (!spec.is_object())
            throw SchemaError("outcome spec for '" + action + "' must be an object");
        ActionSpec a;
        a.name = action;
        a.kind = outcome_kind_from_tag(require(spec, "type", ojson::value_t::string, "outcome spec").get<std::string>());
        const auto& states = require(spec, "states", ojson::value_t::object, "outcome spec");
        if (states.size() < 2)
            throw SchemaError("action '" + action + "' has " + std::to_string(states.size())
                              + " outcome state(s); at least 2 are required");
        for (const auto& [label, excluded] : states.items())
        {
            OutcomeState s;
            s.label = label;
            if (a.kind == OutcomeKind::Numeric)
            {
                s.interval = parse_interval_label(label);
                if (!s.interval)
                    throw SchemaError("numeric state '" + label + "' of action '" + action
                                      + "' is not a finite \"[lo,hi]\" interval");
            }
            if (!excluded.is_array())
                throw SchemaError("ruled-out set of state '" + label + "' must be a list");
            std::unordered_set<std::string> local;
            for (const auto& t : excluded)
            {
                if (!t.is_string())
                    throw SchemaError("ruled-out entries must be strings");
                auto name = t.get<std::string>();
                if (!truth_set.contains(name))
                    throw DanglingTruthReference("state '" + label + "' of action '" + action
                                                 + "' rules out unknown truth '" + name + "'");
                if (!local.insert(name).second)
                    throw DuplicateName("truth '" + name + "' listed twice in state '" + label + "'");
                s.ruled_out.push_back(std::move(name));
            }
            a.states.push_back(std::move(s));
        }
        cfg.actions.push_back(std::move(a));
    }

    if (auto it = doc.find("provenance"); it != doc.end() && it->is_object())
    {
        cfg.provenance.model = it->value("model", "");
        cfg.provenance.timestamp = it->value("timestamp", "");
        cfg.provenance.seed = it->value("seed", std::uint64_t { 0 });
    }
    return cfg;
}

std::string serialize_seed_config(const SeedConfig& cfg)
{
    ojson doc;
    doc["domain"] = cfg.domain;
    doc["goal"] = cfg.goal;
    doc["truths"] = cfg.truths;
    auto& outcomes = doc["outcomes"] = ojson::object();
    for (const auto& a : cfg.actions)
    {
        ojson states = ojson::object();
        for (const auto& s : a.states)
            states[s.label] = s.ruled_out;
        outcomes[a.name] = ojson { { "type", to_string(a.kind) }, { "states", std::move(states) } };
    }
    if (!cfg.provenance.empty())
        doc["provenance"] = ojson {
            { "model", cfg.provenance.model },
            { "timestamp", cfg.provenance.timestamp },
            { "seed", cfg.provenance.seed },
        };
    return doc.dump(2);
}

ValidationReport validate_seed_config(const SeedConfig& cfg)
{
    ValidationReport report;
    auto flag = [&](std::string_view code, std::string message, std::string element) {
        report.violations.push_back({ std::string(code), std::move(message), std::move(element) });
    };
    auto check_name = [&](const std::string& name, const char* what) {
        if (name.empty())
            flag(violation::EmptyName, std::string(what) + " name is empty", name);
        else if (trim(name).size() != name.size())
            flag(violation::UntrimmedName, std::string(what) + " name has leading/trailing whitespace", name);
    };

    std::set<std::string> truths;
    for (const auto& t : cfg.truths)
    {
        check_name(t, "truth");
        if (!truths.insert(t).second)
            flag(violation::DuplicateTruth, "truth listed more than once", t);
    }

    std::set<std::string> actions;
    std::size_t state_count = 0;
    for (const auto& a : cfg.actions)
    {
        check_name(a.name, "action");
        if (!actions.insert(a.name).second)
            flag(violation::DuplicateAction, "action appears more than once", a.name);
        if (a.states.size() < 2)
            flag(violation::TooFewStates, "action has fewer than 2 outcome states", a.name);
        state_count += a.states.size();

        std::set<std::string> labels;
        for (std::size_t i = 0; i < a.states.size(); ++i)
        {
            const auto& s = a.states[i];
            if (!labels.insert(s.label).second)
                flag(violation::DuplicateState, "state label repeated", a.name + "/" + s.label);
            if (a.kind == OutcomeKind::Numeric)
            {
                if (!s.interval || !std::isfinite(s.interval->lo) || !std::isfinite(s.interval->hi)
                    || s.interval->lo > s.interval->hi)
                    flag(violation::BadInterval, "numeric state is not a finite interval with lo <= hi",
                         a.name + "/" + s.label);
                else
                    for (std::size_t j = 0; j < i; ++j)
                    {
                        const auto& o = a.states[j];
                        if (o.interval && *o.interval == *s.interval)
                            flag(violation::DuplicateState, "interval repeated", a.name + "/" + s.label);
                        else if (o.interval && o.interval->overlaps(*s.interval))
                            flag(violation::OverlappingIntervals, "intervals " + o.label + " and " + s.label + " overlap",
                                 a.name);
                    }
            }
            for (const auto& t : s.ruled_out)
                if (!truths.contains(t))
                    flag(violation::DanglingTruth, "ruled-out truth is not in the truth list",
                         a.name + "/" + s.label + "/" + t);
        }
    }

    // A truth ruled out by every state of every action can never be valid.
    if (state_count > 0)
        for (const auto& t : cfg.truths)
        {
            bool everywhere = true;
            for (const auto& a : cfg.actions)
                for (const auto& s : a.states)
                    if (std::find(s.ruled_out.begin(), s.ruled_out.end(), t) == s.ruled_out.end())
                        everywhere = false;
            if (everywhere)
                flag(violation::UniversallyExcluded, "truth is ruled out by every outcome state", t);
        }

    report.ok = report.violations.empty();
    return report;
}

std::string serialize_proposal(const DomainProposal& proposal)
{
    return ojson { { "Goal", proposal.goal }, { "Truths", proposal.truths_desc }, { "Actions", proposal.actions_desc } }
        .dump(-1);
}

DomainProposal parse_proposal(std::string_view text)
{
    ojson doc;
    try
    {
        doc = ojson::parse(text);
    }
    catch (const ojson::exception& e)
    {
        throw SchemaError(std::string("malformed proposal: ") + e.what());
    }
    DomainProposal p;
    p.goal = require(doc, "Goal", ojson::value_t::string, "proposal").get<std::string>();
    p.truths_desc = require(doc, "Truths", ojson::value_t::string, "proposal").get<std::string>();
    p.actions_desc = require(doc, "Actions", ojson::value_t::string, "proposal").get<std::string>();
    return p;
}

std::string config_hash(const SeedConfig& cfg)
{
    const auto text = serialize_seed_config(cfg);
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest {};
    unsigned int len = 0;
    EVP_Digest(text.data(), text.size(), digest.data(), &len, EVP_sha256(), nullptr);
    std::ostringstream out;
    out << std::hex << std::setfill('0');
    for (unsigned i = 0; i < len; ++i)
        out << std::setw(2) << static_cast<int>(digest[i]);
    return out.str();
}

} // namespace kumo
