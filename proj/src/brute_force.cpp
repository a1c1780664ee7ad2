// SPDX-License-Identifier: Apache-2.0
#include <kumo/errors.hpp>
#include <kumo/oracle.hpp>

#include <algorithm>
#include <limits>
#include <set>

namespace kumo
{

// Works on names and ordered sets rather than bitmasks so it shares no code
// with OptimalSearch. Each call returns the expected action count of every
// deterministic policy rooted at the given history node.
namespace
{

constexpr std::size_t PolicyLimit = 4'000'000;

using Names = std::set<std::string>;

struct Node
{
    Names candidates;
    std::vector<const TaskAction*> unused;
};

bool must_stop(const Node& node)
{
    if (node.candidates.size() <= 1 || node.unused.empty())
        return true;
    for (const auto& t : node.candidates)
    {
        bool excludable = false;
        for (const auto* a : node.unused)
            for (const auto& s : a->states)
                if (std::find(s.excluded.begin(), s.excluded.end(), t) != s.excluded.end())
                    excludable = true;
        if (!excludable)
            return true;
    }
    return false;
}

std::vector<double> policy_values(const Node& node, double epsilon)
{
    if (must_stop(node))
        return { 0.0 };

    std::vector<double> values;
    for (std::size_t i = 0; i < node.unused.size(); ++i)
    {
        const auto* action = node.unused[i];
        Node child_base;
        child_base.unused = node.unused;
        child_base.unused.erase(child_base.unused.begin() + static_cast<std::ptrdiff_t>(i));

        // Outcome weights: candidates still consistent after observing each state.
        std::vector<Names> survivors;
        double z = epsilon;
        for (const auto& s : action->states)
        {
            Names left;
            for (const auto& t : node.candidates)
                if (std::find(s.excluded.begin(), s.excluded.end(), t) == s.excluded.end())
                    left.insert(t);
            z += static_cast<double>(left.size());
            survivors.push_back(std::move(left));
        }

        std::vector<double> probs;
        std::vector<std::vector<double>> branches;
        for (auto& left : survivors)
        {
            if (left.empty())
                continue;
            probs.push_back(static_cast<double>(left.size()) / z);
            Node child = child_base;
            child.candidates = std::move(left);
            branches.push_back(policy_values(child, epsilon));
        }

        std::size_t combos = 1;
        for (const auto& b : branches)
        {
            if (combos > PolicyLimit / b.size())
                throw TooLargeForBruteForce("more than " + std::to_string(PolicyLimit) + " policies");
            combos *= b.size();
        }
        if (values.size() + combos > PolicyLimit)
            throw TooLargeForBruteForce("more than " + std::to_string(PolicyLimit) + " policies");

        // Odometer over one sub-policy per outcome branch.
        std::vector<std::size_t> pick(branches.size(), 0);
        for (std::size_t c = 0; c < combos; ++c)
        {
            double e = 0.0;
            for (std::size_t b = 0; b < branches.size(); ++b)
                e += probs[b] * branches[b][pick[b]];
            values.push_back(1.0 + e);
            for (std::size_t b = 0; b < branches.size(); ++b)
            {
                if (++pick[b] < branches[b].size())
                    break;
                pick[b] = 0;
            }
        }
    }
    return values;
}

} // namespace

double brute_force_expected_steps(const TaskInstance& task, double epsilon)
{
    if (task.actions.size() > 5)
        throw TooLargeForBruteForce("brute force is limited to 5 actions, task has " + std::to_string(task.actions.size()));
    Node root;
    root.candidates = Names(task.truths.begin(), task.truths.end());
    for (const auto& a : task.actions)
        root.unused.push_back(&a);
    const auto values = policy_values(root, epsilon);
    return *std::min_element(values.begin(), values.end());
}

} // namespace kumo
