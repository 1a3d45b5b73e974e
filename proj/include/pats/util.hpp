#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pats::util {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Lowercase, strip punctuation, collapse runs of whitespace to single spaces.
/// Used wherever free-form model output is matched against known names.
std::string normalize_token(std::string_view s);

std::vector<std::string> split(std::string_view s, char delim);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool starts_with_ci(std::string_view s, std::string_view prefix);

std::string read_file(const std::filesystem::path& p);

/// Write-to-temp-then-rename so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& p, std::string_view content);

std::string base64_encode(std::string_view bytes);

} // namespace pats::util
