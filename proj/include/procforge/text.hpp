// Copyright 2026 The procforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace procforge::text {

/// Number of Unicode code points in a UTF-8 string. Lean reports columns
/// in code points, and all character counts in datasets use this measure.
std::size_t codepoint_length(std::string_view s);

/// True if the byte starts a code point (is not a UTF-8 continuation byte).
inline bool is_codepoint_start(char c) {
  return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
}

std::string_view trim(std::string_view s);
std::string_view rtrim(std::string_view s);
std::string_view ltrim(std::string_view s);

bool starts_with_word(std::string_view line, std::string_view word);

/// Splits on '\n'. A trailing newline does not produce an empty last line.
std::vector<std::string_view> split_lines(std::string_view s);

/// Number of lines as a text editor would count them; "" has zero lines.
std::size_t line_count(std::string_view s);

/// Collapses every run of whitespace to one space and trims both ends.
std::string normalize_whitespace(std::string_view s);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace procforge::text
