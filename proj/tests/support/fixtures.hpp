// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <kumo/rng.hpp>
#include <kumo/synthetic.hpp>
#include <kumo/taskgen.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

namespace kumo::testing
{

struct StateSpec
{
    std::string label;
    std::vector<std::string> excluded;
};

struct ActionFixture
{
    std::string name;
    std::vector<StateSpec> states;
    std::size_t realized = 0;
};

/// Hand-built task; params are set to match its own sizes.
inline TaskInstance make_task(std::vector<std::string> truths, std::string valid, std::vector<ActionFixture> actions,
                              std::string id = "t0")
{
    TaskInstance t;
    t.id = std::move(id);
    t.domain = "Fixture";
    t.truths = std::move(truths);
    t.valid_truth = std::move(valid);
    for (auto& a : actions)
    {
        TaskAction ta;
        ta.name = a.name;
        for (auto& s : a.states)
            ta.states.push_back({ s.label, s.excluded });
        ta.realized = a.realized;
        t.actions.push_back(std::move(ta));
    }
    t.params.n_truth = static_cast<int>(t.truths.size());
    t.params.n_action = static_cast<int>(t.actions.size());
    return t;
}

/// Random small task: each action gets 2-3 states with random exclusions, and
/// realized states are picked so the valid truth survives. Invariants other
/// than coverage are not enforced.
inline TaskInstance random_small_task(std::uint64_t seed, std::size_t n_truths, std::size_t n_actions)
{
    Rng rng(seed);
    TaskInstance t;
    t.id = "r" + std::to_string(seed);
    t.domain = "Random";
    for (std::size_t i = 0; i < n_truths; ++i)
        t.truths.push_back("T" + std::to_string(i));
    t.valid_truth = t.truths[rng.below(n_truths)];
    for (std::size_t a = 0; a < n_actions; ++a)
    {
        TaskAction ta;
        ta.name = "A" + std::to_string(a);
        const auto n_states = 2 + rng.below(2);
        for (std::size_t s = 0; s < n_states; ++s)
        {
            TaskState st;
            st.label = "s" + std::to_string(s);
            for (const auto& truth : t.truths)
                if (rng.uniform() < 0.4)
                    st.excluded.push_back(truth);
            ta.states.push_back(std::move(st));
        }
        ta.realized = 0;
        for (std::size_t s = 0; s < ta.states.size(); ++s)
        {
            const auto& ex = ta.states[s].excluded;
            if (std::find(ex.begin(), ex.end(), t.valid_truth) == ex.end())
            {
                ta.realized = s;
                break;
            }
        }
        t.actions.push_back(std::move(ta));
    }
    t.params.n_truth = static_cast<int>(n_truths);
    t.params.n_action = static_cast<int>(n_actions);
    return t;
}

inline SeedConfig fixture_config(std::uint64_t seed = 1, const std::string& domain = "Synthetic", int n_components = 1)
{
    SyntheticSpec spec;
    spec.domain = domain;
    spec.seed = seed;
    spec.n_components = n_components;
    return synthetic_config(spec);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir
{
public:
    TempDir()
    {
        static std::atomic<int> counter { 0 };
        _path = std::filesystem::temp_directory_path()
              / ("kumo-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(_path);
        std::filesystem::create_directories(_path);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(_path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return _path; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return _path / name; }

private:
    std::filesystem::path _path;
};

inline std::string slurp(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace kumo::testing
