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
#include <cstdint>
#include <string_view>
#include <vector>

namespace procforge::lexer {

enum class ByteClass : std::uint8_t { code, comment, string };

/// Per-byte classification of Lean 4 source plus the bracket depth in
/// effect *before* each byte. Block comments nest; `--` runs to end of line.
struct SourceMap {
  std::vector<ByteClass> cls;
  std::vector<int> depth;
  int final_depth = 0;
  int min_depth = 0;

  bool is_code(std::size_t i) const { return cls[i] == ByteClass::code; }
};

SourceMap scan(std::string_view src);

/// If `src[i]` begins an opening/closing bracket (ASCII or one of the Unicode
/// pairs Lean uses), returns its byte length, else 0.
std::size_t opening_bracket_at(std::string_view src, std::size_t i);
std::size_t closing_bracket_at(std::string_view src, std::size_t i);

/// Position in a text as Lean reports it: 1-based line, 0-based code-point column.
struct Position {
  int line = 1;
  int column = 0;

  friend auto operator<=>(const Position&, const Position&) = default;
};

/// Maps byte offsets to Lean positions.
class PositionIndex {
 public:
  explicit PositionIndex(std::string_view src);

  Position at(std::size_t byte_offset) const;

 private:
  std::string_view src_;
  std::vector<std::size_t> line_starts_;
};

}  // namespace procforge::lexer
