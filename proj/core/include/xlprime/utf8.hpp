#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xlp::utf8 {

/// Byte offset of the first malformed sequence, or nullopt if `text` is valid UTF-8.
std::optional<std::size_t> first_invalid(std::string_view text);

/// Number of code points. Input must be valid UTF-8.
std::size_t length(std::string_view text);

/// Prefix containing the first `n` code points (or all of `text`).
std::string_view prefix(std::string_view text, std::size_t n);

/// Splits valid UTF-8 into one string per code point.
std::vector<std::string_view> characters(std::string_view text);

}  // namespace xlp::utf8
