#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace lexcurate {

/// Whole file as bytes. Throws IoError.
std::string read_text(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames it into place. Throws IoError.
void write_text(const std::filesystem::path& path, std::string_view content);

/// Lowercase hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

}  // namespace lexcurate
