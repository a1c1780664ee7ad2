// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>

namespace kumo
{

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) noexcept
{
    auto h = mix64(base);
    for (auto p : parts)
        h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

/// Seeded generator with library-independent bounded draws and shuffles.
///
/// std::uniform_int_distribution and std::shuffle are implementation-defined,
/// so output would differ across standard libraries. Everything here is
/// defined purely in terms of mt19937_64 output words.
class Rng
{
public:
    explicit Rng(std::uint64_t seed): _engine(seed) {}

    std::uint64_t next() { return _engine(); }

    /// Uniform integer in [0, bound). bound must be positive.
    std::size_t below(std::size_t bound)
    {
        const auto b = static_cast<std::uint64_t>(bound);
        const auto limit = ~std::uint64_t { 0 } - (~std::uint64_t { 0 } % b);
        std::uint64_t x;
        do
            x = next();
        while (x >= limit);
        return static_cast<std::size_t>(x % b);
    }

    /// Uniform real in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    template <typename T>
    void shuffle(std::span<T> items)
    {
        for (auto i = items.size(); i > 1; --i)
            std::swap(items[i - 1], items[below(i)]);
    }

    template <typename Container>
    void shuffle(Container& c)
    {
        shuffle(std::span { c.data(), c.size() });
    }

private:
    std::mt19937_64 _engine;
};

} // namespace kumo
