// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace kumo::sat
{

using Var = int;

/// Literal packed as 2*var + sign, sign = 1 for negation.
struct Lit
{
    int code = 0;

    static constexpr Lit pos(Var v) noexcept { return Lit { 2 * v }; }
    static constexpr Lit neg(Var v) noexcept { return Lit { 2 * v + 1 }; }
    [[nodiscard]] constexpr Var var() const noexcept { return code >> 1; }
    [[nodiscard]] constexpr bool negated() const noexcept { return (code & 1) != 0; }
    constexpr Lit operator~() const noexcept { return Lit { code ^ 1 }; }
    friend constexpr bool operator==(Lit, Lit) = default;
};

/// Clause database with the cardinality encodings used by task generation.
class Cnf
{
public:
    Var new_var() { return _num_vars++; }
    [[nodiscard]] int num_vars() const noexcept { return _num_vars; }

    void add_clause(std::vector<Lit> clause) { _clauses.push_back(std::move(clause)); }
    [[nodiscard]] const std::vector<std::vector<Lit>>& clauses() const noexcept { return _clauses; }

    /// Sinz sequential counter: at most k of lits are true. k = 0 forbids all.
    void at_most_k(std::span<const Lit> lits, int k);
    void at_most_one(std::span<const Lit> lits) { at_most_k(lits, 1); }

    /// out <-> OR(lits)
    void define_or(Lit out, std::span<const Lit> lits);

private:
    int _num_vars = 0;
    std::vector<std::vector<Lit>> _clauses;
};

struct Model
{
    std::vector<bool> values;
    [[nodiscard]] bool operator[](Var v) const { return values.at(static_cast<std::size_t>(v)); }
    [[nodiscard]] bool satisfies(const Cnf& cnf) const;
};

/// Conflict-driven clause learning with two watched literals.
///
/// Decisions take the first unassigned variable of `decision_order` (then the
/// remaining variables by index) and try `false` first, so the result is a
/// deterministic function of the formula and the order. Returns nullopt iff
/// the formula is unsatisfiable.
std::optional<Model> solve(const Cnf& cnf, std::span<const Var> decision_order = {});

} // namespace kumo::sat
