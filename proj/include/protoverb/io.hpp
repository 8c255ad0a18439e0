#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace protoverb::io {

std::string read_text(const std::filesystem::path& path);

// Lines without their terminators; a trailing "\r" is removed as well.
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partial file.
void write_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace protoverb::io
