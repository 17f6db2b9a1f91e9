#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace xlp {

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// printf-style "%.17g": round-trips every double.
std::string format_double(double value);

}  // namespace xlp
