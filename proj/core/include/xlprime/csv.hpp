#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace xlp::csv {

using Row = std::vector<std::string>;

/// RFC 4180 parsing: quoted fields may contain commas, quotes ("") and newlines.
/// Accepts `\n` or `\r\n` record separators. A trailing newline does not produce an empty row.
std::vector<Row> parse(std::string_view text);

std::vector<Row> read_file(const std::filesystem::path& path);

/// Quotes a field only when it contains a comma, quote, or line break.
std::string escape(std::string_view field);

std::string join(const Row& fields);

}  // namespace xlp::csv
