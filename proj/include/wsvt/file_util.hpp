#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace wsvt {

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a half-written file. Creates parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double value);

}  // namespace wsvt
