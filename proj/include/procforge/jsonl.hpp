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

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "procforge/error.hpp"
#include "procforge/text.hpp"

namespace procforge::jsonl {

using nlohmann::json;

/// Parses one JSON object per non-blank line.
inline std::vector<json> parse(std::string_view contents, const std::string& origin = "<memory>") {
  std::vector<json> out;
  std::size_t lineno = 0;
  for (auto line : text::split_lines(contents)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw InvalidInput(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<json> read(const std::filesystem::path& path) {
  return parse(text::read_file(path), path.string());
}

inline std::string dump(const std::vector<json>& rows) {
  std::string out;
  for (const auto& row : rows) {
    out += row.dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

inline void write(const std::filesystem::path& path, const std::vector<json>& rows) {
  text::write_file_atomic(path, dump(rows));
}

template <typename T>
std::vector<T> read_as(const std::filesystem::path& path) {
  std::vector<T> out;
  for (const auto& row : read(path)) out.push_back(row.get<T>());
  return out;
}

template <typename T>
void write_as(const std::filesystem::path& path, const std::vector<T>& values) {
  std::vector<json> rows;
  rows.reserve(values.size());
  for (const auto& v : values) rows.emplace_back(v);
  write(path, rows);
}

}  // namespace procforge::jsonl
