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

#include "procforge/steps.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "procforge/error.hpp"
#include "procforge/text.hpp"

namespace procforge::steps {

using nlohmann::json;
using compile::CompilationResult;
using compile::Status;

namespace {

constexpr std::size_t npos = std::string_view::npos;

// Column-0 words that end a tactic block.
constexpr std::array<std::string_view, 14> kCommandWords = {
    "theorem", "lemma",   "def",     "example", "instance", "end",     "namespace",
    "section", "open",    "#align",  "#check",  "#eval",    "variable", "@["};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' || c == '.' ||
         (static_cast<unsigned char>(c) & 0x80);
}

bool word_at(std::string_view s, std::size_t i, std::string_view w) {
  if (s.substr(i, w.size()) != w) return false;
  if (i > 0 && ident_char(s[i - 1])) return false;
  const std::size_t j = i + w.size();
  return j >= s.size() || !ident_char(s[j]);
}

// Next code byte at or after i that is not whitespace.
std::size_t skip_blank(std::string_view s, const lexer::SourceMap& map, std::size_t i,
                       std::size_t limit) {
  while (i < limit && (!map.is_code(i) || is_space(s[i]))) ++i;
  return i;
}

struct Span {
  std::size_t begin;
  std::size_t end;
  bool after_newline;
};

// Trims a raw range down to its first and last non-blank code bytes.
std::optional<Span> code_span(std::string_view s, const lexer::SourceMap& map, Span raw) {
  std::size_t b = raw.begin;
  while (b < raw.end && (!map.is_code(b) || is_space(s[b]))) ++b;
  if (b >= raw.end) return std::nullopt;
  std::size_t e = raw.end;
  while (e > b && (!map.is_code(e - 1) || is_space(s[e - 1]))) --e;
  return Span{b, e, raw.after_newline};
}

std::size_t tactic_block_limit(std::string_view s, const lexer::SourceMap& map, std::size_t from) {
  std::size_t i = s.find('\n', from);
  while (i != npos) {
    const std::size_t line = i + 1;
    if (line < s.size() && map.is_code(line) && map.depth[line] == 0) {
      for (auto w : kCommandWords) {
        if (s.substr(line, w.size()) == w && (w == "@[" || word_at(s, line, w))) return line;
      }
    }
    i = s.find('\n', line);
  }
  return s.size();
}

// Byte offset where the proof starts, or npos for a degenerate body.
std::size_t find_proof_start(std::string_view s, const lexer::SourceMap& map) {
  const std::size_t first = skip_blank(s, map, 0, s.size());
  if (first >= s.size()) return npos;
  if (word_at(s, first, "by")) return first;

  std::size_t decl = npos;
  for (std::size_t i = first; i < s.size(); ++i) {
    if (!map.is_code(i) || map.depth[i] != 0) continue;
    if (word_at(s, i, "theorem") || word_at(s, i, "lemma") || word_at(s, i, "example")) {
      decl = i;
      break;
    }
  }
  if (decl == npos) return first;  // bare term proof
  for (std::size_t i = decl; i + 1 < s.size(); ++i) {
    if (map.is_code(i) && map.depth[i] == 0 && s.substr(i, 2) == ":=") {
      const std::size_t p = skip_blank(s, map, i + 2, s.size());
      return p < s.size() ? p : npos;
    }
  }
  return npos;
}

ProofStep make_step(std::string_view s, const lexer::PositionIndex& pos, Span span, int index) {
  ProofStep step;
  step.index = index;
  step.text = std::string(s.substr(span.begin, span.end - span.begin));
  step.begin = pos.at(span.begin);
  step.end = pos.at(span.end);
  step.line_start = step.begin.line;
  step.line_end = pos.at(span.end - 1).line;
  return step;
}

}  // namespace

std::vector<ProofStep> segment_proof(std::string_view body) {
  const auto map = lexer::scan(body);
  const lexer::PositionIndex pos(body);

  auto whole = [&](std::size_t from, std::size_t to) -> std::vector<ProofStep> {
    const auto span = code_span(body, map, {from, to, false});
    if (!span) return {};
    return {make_step(body, pos, *span, 0)};
  };

  const std::size_t start = find_proof_start(body, map);
  if (start == npos) return whole(0, body.size());
  const std::size_t limit = tactic_block_limit(body, map, start);
  if (!word_at(body, start, "by")) return whole(start, limit);

  const std::size_t region = start + 2;
  const int base = map.depth[start];
  std::vector<Span> raw;
  std::size_t seg = region;
  bool after_newline = false;
  for (std::size_t i = region; i < limit; ++i) {
    if (!map.is_code(i) || map.depth[i] != base) continue;
    const bool newline = body[i] == '\n';
    const bool semicolon = body[i] == ';' && !(i > 0 && body[i - 1] == '<' &&
                                               i + 1 < body.size() && body[i + 1] == '>');
    if (!newline && !semicolon) continue;
    raw.push_back({seg, i, after_newline});
    seg = i + 1;
    after_newline = newline;
  }
  raw.push_back({seg, limit, after_newline});

  std::vector<Span> spans;
  bool pending_newline = false;
  for (const auto& r : raw) {
    pending_newline = pending_newline || r.after_newline;
    auto span = code_span(body, map, r);
    if (!span) continue;
    span->after_newline = pending_newline;
    pending_newline = false;
    if (!spans.empty() && span->after_newline) {
      const auto prev = body.substr(spans.back().begin, spans.back().end - spans.back().begin);
      const auto cur = body.substr(span->begin, span->end - span->begin);
      if (prev.ends_with("<;>") || cur.starts_with("<;>")) {
        spans.back().end = span->end;
        continue;
      }
    }
    spans.push_back(*span);
  }
  std::vector<ProofStep> out;
  out.reserve(spans.size());
  for (std::size_t k = 0; k < spans.size(); ++k)
    out.push_back(make_step(body, pos, spans[k], static_cast<int>(k)));
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Label l) { return l == Label::correct ? "correct" : "incorrect"; }

std::string_view to_string(Scheme s) { return s == Scheme::process ? "process" : "outcome"; }

Scheme scheme_from_string(std::string_view s) {
  if (s == "process") return Scheme::process;
  if (s == "outcome") return Scheme::outcome;
  throw InvalidInput("unknown labeling scheme '" + std::string(s) + "'");
}

bool StepLabels::all_correct() const {
  return std::all_of(labels.begin(), labels.end(), [](Label l) { return l == Label::correct; });
}

void to_json(json& j, const StepLabels& l) {
  json steps = json::array();
  for (const auto& s : l.steps)
    steps.push_back({{"text", s.text}, {"line_start", s.line_start}, {"line_end", s.line_end}});
  json labels = json::array();
  for (auto x : l.labels) labels.push_back(to_string(x));
  j = json{{"candidate_id", l.candidate_id},
           {"scheme", to_string(l.scheme)},
           {"steps", std::move(steps)},
           {"labels", std::move(labels)},
           {"first_error_step", l.first_error_step ? json(*l.first_error_step) : json(nullptr)}};
}

void from_json(const json& j, StepLabels& l) {
  l.candidate_id = j.at("candidate_id").get<std::string>();
  l.scheme = scheme_from_string(j.at("scheme").get<std::string>());
  l.steps.clear();
  int index = 0;
  for (const auto& s : j.at("steps")) {
    ProofStep step;
    step.index = index++;
    step.text = s.at("text").get<std::string>();
    step.line_start = s.at("line_start").get<int>();
    step.line_end = s.at("line_end").get<int>();
    step.begin = {step.line_start, 0};
    step.end = {step.line_end, 0};
    l.steps.push_back(std::move(step));
  }
  l.labels.clear();
  for (const auto& x : j.at("labels")) {
    const auto s = x.get<std::string>();
    if (s == "correct") {
      l.labels.push_back(Label::correct);
    } else if (s == "incorrect") {
      l.labels.push_back(Label::incorrect);
    } else {
      throw InvalidInput("unknown label '" + s + "'");
    }
  }
  const auto& f = j.at("first_error_step");
  l.first_error_step = f.is_null() ? std::nullopt : std::optional<int>(f.get<int>());
  if (l.labels.size() != l.steps.size()) throw ShapeMismatch("labels and steps differ in length");
}

std::optional<lexer::Position> first_failure(const std::vector<compile::Diagnostic>& diagnostics) {
  std::optional<lexer::Position> best;
  for (const auto& d : diagnostics) {
    if (d.severity != compile::Severity::error && !d.is_sorry_warning()) continue;
    if (!best || d.position() < *best) best = d.position();
  }
  return best;
}

namespace {

void require_labelable(const CompilationResult& result) {
  if (result.status == Status::timeout || result.status == Status::backend_error) {
    throw UnlabelableResult(result.candidate_id + ": status " +
                            std::string(compile::to_string(result.status)));
  }
}

}  // namespace

StepLabels label_process(const std::vector<ProofStep>& steps, const CompilationResult& result) {
  require_labelable(result);
  StepLabels out;
  out.candidate_id = result.candidate_id;
  out.scheme = Scheme::process;
  out.steps = steps;
  out.labels.assign(steps.size(), Label::correct);
  if (result.status == Status::success || steps.empty()) return out;

  const auto failure = first_failure(result.diagnostics);
  std::size_t first_bad = steps.size() - 1;
  if (failure) {
    for (std::size_t k = 0; k < steps.size(); ++k) {
      if (!(steps[k].end <= *failure)) {
        first_bad = k;
        break;
      }
    }
  }
  for (std::size_t k = first_bad; k < steps.size(); ++k) out.labels[k] = Label::incorrect;
  out.first_error_step = static_cast<int>(first_bad);
  return out;
}

StepLabels label_outcome(const std::vector<ProofStep>& steps, const CompilationResult& result) {
  require_labelable(result);
  StepLabels out;
  out.candidate_id = result.candidate_id;
  out.scheme = Scheme::outcome;
  out.steps = steps;
  const Label l = result.status == Status::success ? Label::correct : Label::incorrect;
  out.labels.assign(steps.size(), l);
  return out;
}

}  // namespace procforge::steps
