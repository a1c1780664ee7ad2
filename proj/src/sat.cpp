// SPDX-License-Identifier: Apache-2.0
#include <kumo/sat.hpp>

#include <algorithm>
#include <cassert>

namespace kumo::sat
{

void Cnf::at_most_k(std::span<const Lit> lits, int k)
{
    const auto n = static_cast<int>(lits.size());
    if (k >= n)
        return;
    if (k <= 0)
    {
        for (auto l : lits)
            add_clause({ ~l });
        return;
    }
    // s[i][j]: at least j+1 of lits[0..i] are true.
    std::vector<std::vector<Var>> s(static_cast<std::size_t>(n - 1), std::vector<Var>(static_cast<std::size_t>(k)));
    for (auto& row : s)
        for (auto& v : row)
            v = new_var();
    auto S = [&](int i, int j) { return Lit::pos(s[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]); };

    add_clause({ ~lits[0], S(0, 0) });
    for (int j = 1; j < k; ++j)
        add_clause({ ~S(0, j) });
    for (int i = 1; i < n - 1; ++i)
    {
        add_clause({ ~lits[static_cast<std::size_t>(i)], S(i, 0) });
        add_clause({ ~S(i - 1, 0), S(i, 0) });
        for (int j = 1; j < k; ++j)
        {
            add_clause({ ~lits[static_cast<std::size_t>(i)], ~S(i - 1, j - 1), S(i, j) });
            add_clause({ ~S(i - 1, j), S(i, j) });
        }
        add_clause({ ~lits[static_cast<std::size_t>(i)], ~S(i - 1, k - 1) });
    }
    add_clause({ ~lits[static_cast<std::size_t>(n - 1)], ~S(n - 2, k - 1) });
}

void Cnf::define_or(Lit out, std::span<const Lit> lits)
{
    std::vector<Lit> big { ~out };
    for (auto l : lits)
    {
        add_clause({ ~l, out });
        big.push_back(l);
    }
    add_clause(std::move(big));
}

bool Model::satisfies(const Cnf& cnf) const
{
    return std::all_of(cnf.clauses().begin(), cnf.clauses().end(), [&](const std::vector<Lit>& c) {
        return std::any_of(c.begin(), c.end(), [&](Lit l) { return (*this)[l.var()] != l.negated(); });
    });
}

namespace
{

constexpr signed char Unassigned = -1;

class Solver
{
public:
    Solver(const Cnf& cnf, std::span<const Var> order)
        : _n(static_cast<std::size_t>(cnf.num_vars())),
          _value(_n, Unassigned),
          _level(_n, 0),
          _reason(_n, -1),
          _seen(_n, 0),
          _watches(2 * _n)
    {
        std::vector<char> listed(_n, 0);
        for (auto v : order)
            if (v >= 0 && static_cast<std::size_t>(v) < _n && !listed[static_cast<std::size_t>(v)])
            {
                listed[static_cast<std::size_t>(v)] = 1;
                _order.push_back(v);
            }
        for (Var v = 0; static_cast<std::size_t>(v) < _n; ++v)
            if (!listed[static_cast<std::size_t>(v)])
                _order.push_back(v);

        for (const auto& c : cnf.clauses())
            if (!add_input_clause(c))
            {
                _unsat = true;
                break;
            }
    }

    std::optional<Model> run()
    {
        if (_unsat || propagate() >= 0)
            return std::nullopt;
        for (;;)
        {
            if (auto conflict = propagate(); conflict >= 0)
            {
                if (decision_level() == 0)
                    return std::nullopt;
                auto [learnt, back_level] = analyze(conflict);
                backtrack(back_level);
                if (learnt.size() == 1)
                    enqueue(learnt[0], -1);
                else
                {
                    const auto idx = static_cast<int>(_clauses.size());
                    _clauses.push_back(std::move(learnt));
                    watch(idx);
                    enqueue(_clauses.back()[0], idx);
                }
                continue;
            }
            auto next = pick_branch();
            if (!next)
                break;
            _trail_lim.push_back(_trail.size());
            enqueue(Lit::neg(*next), -1);
        }
        Model m;
        m.values.resize(_n);
        for (std::size_t v = 0; v < _n; ++v)
            m.values[v] = _value[v] == 1;
        return m;
    }

private:
    [[nodiscard]] signed char lit_value(Lit l) const
    {
        auto v = _value[static_cast<std::size_t>(l.var())];
        return v == Unassigned ? Unassigned : static_cast<signed char>(v ^ static_cast<signed char>(l.negated()));
    }
    [[nodiscard]] int decision_level() const { return static_cast<int>(_trail_lim.size()); }

    bool add_input_clause(std::vector<Lit> c)
    {
        std::sort(c.begin(), c.end(), [](Lit a, Lit b) { return a.code < b.code; });
        c.erase(std::unique(c.begin(), c.end()), c.end());
        for (std::size_t i = 1; i < c.size(); ++i)
            if (c[i].var() == c[i - 1].var())
                return true; // tautology
        if (c.empty())
            return false;
        if (c.size() == 1)
        {
            auto v = lit_value(c[0]);
            if (v == 0)
                return false;
            if (v == Unassigned)
                enqueue(c[0], -1);
            return true;
        }
        const auto idx = static_cast<int>(_clauses.size());
        _clauses.push_back(std::move(c));
        watch(idx);
        return true;
    }

    void watch(int idx)
    {
        const auto& c = _clauses[static_cast<std::size_t>(idx)];
        _watches[static_cast<std::size_t>(c[0].code)].push_back(idx);
        _watches[static_cast<std::size_t>(c[1].code)].push_back(idx);
    }

    void enqueue(Lit l, int reason)
    {
        const auto v = static_cast<std::size_t>(l.var());
        _value[v] = l.negated() ? 0 : 1;
        _level[v] = decision_level();
        _reason[v] = reason;
        _trail.push_back(l);
    }

    /// Returns the index of a conflicting clause, or -1.
    int propagate()
    {
        while (_qhead < _trail.size())
        {
            const Lit falsified = ~_trail[_qhead++];
            auto& ws = _watches[static_cast<std::size_t>(falsified.code)];
            std::size_t keep = 0;
            for (std::size_t i = 0; i < ws.size(); ++i)
            {
                const int ci = ws[i];
                auto& c = _clauses[static_cast<std::size_t>(ci)];
                if (c[0] == falsified)
                    std::swap(c[0], c[1]);
                if (lit_value(c[0]) == 1)
                {
                    ws[keep++] = ci;
                    continue;
                }
                bool moved = false;
                for (std::size_t k = 2; k < c.size(); ++k)
                    if (lit_value(c[k]) != 0)
                    {
                        std::swap(c[1], c[k]);
                        _watches[static_cast<std::size_t>(c[1].code)].push_back(ci);
                        moved = true;
                        break;
                    }
                if (moved)
                    continue;
                ws[keep++] = ci;
                if (lit_value(c[0]) == 0)
                {
                    for (++i; i < ws.size(); ++i)
                        ws[keep++] = ws[i];
                    ws.resize(keep);
                    _qhead = _trail.size();
                    return ci;
                }
                enqueue(c[0], ci);
            }
            ws.resize(keep);
        }
        return -1;
    }

    /// First-UIP learning. Returns the learnt clause (asserting literal first) and the backjump level.
    std::pair<std::vector<Lit>, int> analyze(int conflict)
    {
        std::vector<Lit> learnt { Lit {} };
        int pending = 0;
        Lit p {};
        bool have_p = false;
        auto index = _trail.size();
        int ci = conflict;
        for (;;)
        {
            const auto& c = _clauses[static_cast<std::size_t>(ci)];
            for (std::size_t j = have_p ? 1 : 0; j < c.size(); ++j)
            {
                const Lit q = c[j];
                const auto v = static_cast<std::size_t>(q.var());
                if (_seen[v] || _level[v] == 0)
                    continue;
                _seen[v] = 1;
                if (_level[v] >= decision_level())
                    ++pending;
                else
                    learnt.push_back(q);
            }
            do
                p = _trail[--index];
            while (!_seen[static_cast<std::size_t>(p.var())]);
            _seen[static_cast<std::size_t>(p.var())] = 0;
            have_p = true;
            if (--pending == 0)
                break;
            ci = _reason[static_cast<std::size_t>(p.var())];
            assert(ci >= 0);
            // Ensure the implied literal sits at position 0 so the loop skips it.
            auto& rc = _clauses[static_cast<std::size_t>(ci)];
            if (rc[0] != p)
                for (std::size_t k = 1; k < rc.size(); ++k)
                    if (rc[k] == p)
                    {
                        std::swap(rc[0], rc[k]);
                        break;
                    }
        }
        learnt[0] = ~p;
        for (std::size_t j = 1; j < learnt.size(); ++j)
            _seen[static_cast<std::size_t>(learnt[j].var())] = 0;

        int back = 0;
        if (learnt.size() > 1)
        {
            std::size_t max_i = 1;
            for (std::size_t j = 2; j < learnt.size(); ++j)
                if (_level[static_cast<std::size_t>(learnt[j].var())] > _level[static_cast<std::size_t>(learnt[max_i].var())])
                    max_i = j;
            std::swap(learnt[1], learnt[max_i]);
            back = _level[static_cast<std::size_t>(learnt[1].var())];
        }
        return { std::move(learnt), back };
    }

    void backtrack(int level)
    {
        if (decision_level() <= level)
            return;
        const auto lim = _trail_lim[static_cast<std::size_t>(level)];
        for (auto i = _trail.size(); i > lim; --i)
        {
            const auto v = static_cast<std::size_t>(_trail[i - 1].var());
            _value[v] = Unassigned;
            _reason[v] = -1;
        }
        _trail.resize(lim);
        _trail_lim.resize(static_cast<std::size_t>(level));
        _qhead = _trail.size();
    }

    std::optional<Var> pick_branch() const
    {
        for (auto v : _order)
            if (_value[static_cast<std::size_t>(v)] == Unassigned)
                return v;
        return std::nullopt;
    }

    std::size_t _n;
    std::vector<signed char> _value;
    std::vector<int> _level;
    std::vector<int> _reason;
    std::vector<char> _seen;
    std::vector<std::vector<int>> _watches;
    std::vector<std::vector<Lit>> _clauses;
    std::vector<Lit> _trail;
    std::vector<std::size_t> _trail_lim;
    std::size_t _qhead = 0;
    std::vector<Var> _order;
    bool _unsat = false;
};

} // namespace

std::optional<Model> solve(const Cnf& cnf, std::span<const Var> decision_order)
{
    return Solver(cnf, decision_order).run();
}

} // namespace kumo::sat
