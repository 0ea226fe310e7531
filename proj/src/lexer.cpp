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

#include "procforge/lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "procforge/text.hpp"

namespace procforge::lexer {

namespace {

// ⟨ ⟩ ⦃ ⦄ ‹ › ⟦ ⟧
constexpr std::array<std::string_view, 4> kUnicodeOpen = {"⟨", "⦃", "‹", "⟦"};
constexpr std::array<std::string_view, 4> kUnicodeClose = {"⟩", "⦄", "›", "⟧"};

bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' || c == '.' ||
         (static_cast<unsigned char>(c) & 0x80);
}

// Length of a char literal starting at i ('a', '\n', 'λ'), or 0.
std::size_t char_literal_at(std::string_view s, std::size_t i) {
  if (s[i] != '\'') return 0;
  if (i > 0 && ident_char(s[i - 1])) return 0;
  std::size_t j = i + 1;
  if (j >= s.size()) return 0;
  if (s[j] == '\\') {
    j += 2;
  } else {
    ++j;
    while (j < s.size() && !text::is_codepoint_start(s[j])) ++j;
  }
  if (j < s.size() && s[j] == '\'') return j + 1 - i;
  return 0;
}

}  // namespace

std::size_t opening_bracket_at(std::string_view src, std::size_t i) {
  const char c = src[i];
  if (c == '(' || c == '[' || c == '{') return 1;
  for (auto b : kUnicodeOpen)
    if (src.substr(i, b.size()) == b) return b.size();
  return 0;
}

std::size_t closing_bracket_at(std::string_view src, std::size_t i) {
  const char c = src[i];
  if (c == ')' || c == ']' || c == '}') return 1;
  for (auto b : kUnicodeClose)
    if (src.substr(i, b.size()) == b) return b.size();
  return 0;
}

SourceMap scan(std::string_view src) {
  SourceMap m;
  m.cls.assign(src.size(), ByteClass::code);
  m.depth.assign(src.size(), 0);
  int depth = 0;
  std::size_t i = 0;
  auto mark = [&](std::size_t from, std::size_t to, ByteClass c) {
    for (std::size_t k = from; k < to && k < src.size(); ++k) {
      m.cls[k] = c;
      m.depth[k] = depth;
    }
  };
  while (i < src.size()) {
    if (src.substr(i, 2) == "--") {
      std::size_t end = src.find('\n', i);
      if (end == std::string_view::npos) end = src.size();
      mark(i, end, ByteClass::comment);
      i = end;
      continue;
    }
    if (src.substr(i, 2) == "/-") {
      int nest = 0;
      std::size_t j = i;
      while (j < src.size()) {
        if (src.substr(j, 2) == "/-") {
          ++nest;
          j += 2;
        } else if (src.substr(j, 2) == "-/") {
          j += 2;
          if (--nest == 0) break;
        } else {
          ++j;
        }
      }
      mark(i, j, ByteClass::comment);
      i = j;
      continue;
    }
    if (src[i] == '"') {
      std::size_t j = i + 1;
      while (j < src.size() && src[j] != '"') j += (src[j] == '\\') ? 2 : 1;
      j = std::min(j + 1, src.size());
      mark(i, j, ByteClass::string);
      i = j;
      continue;
    }
    if (const std::size_t n = char_literal_at(src, i); n > 0) {
      mark(i, i + n, ByteClass::string);
      i += n;
      continue;
    }
    if (const std::size_t n = opening_bracket_at(src, i); n > 0) {
      mark(i, i + n, ByteClass::code);
      ++depth;
      i += n;
      continue;
    }
    if (const std::size_t n = closing_bracket_at(src, i); n > 0) {
      mark(i, i + n, ByteClass::code);
      --depth;
      m.min_depth = std::min(m.min_depth, depth);
      i += n;
      continue;
    }
    mark(i, i + 1, ByteClass::code);
    ++i;
  }
  m.final_depth = depth;
  return m;
}

PositionIndex::PositionIndex(std::string_view src) : src_(src) {
  line_starts_.push_back(0);
  for (std::size_t i = 0; i < src.size(); ++i)
    if (src[i] == '\n') line_starts_.push_back(i + 1);
}

Position PositionIndex::at(std::size_t byte_offset) const {
  auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), byte_offset);
  const std::size_t line_idx = static_cast<std::size_t>(it - line_starts_.begin()) - 1;
  const std::size_t start = line_starts_[line_idx];
  const auto col = text::codepoint_length(src_.substr(start, byte_offset - start));
  return Position{static_cast<int>(line_idx + 1), static_cast<int>(col)};
}

}  // namespace procforge::lexer
