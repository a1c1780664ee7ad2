// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kumo
{

struct ChatMessage
{
    std::string role; // system | user | assistant
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct TokenUsage
{
    std::int64_t input = 0;
    std::int64_t output = 0;

    TokenUsage& operator+=(const TokenUsage& o)
    {
        input += o.input;
        output += o.output;
        return *this;
    }
    friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

/// Whitespace-delimited word count; stands in for token counts when a backend reports none.
std::int64_t approx_tokens(std::string_view text);

} // namespace kumo
