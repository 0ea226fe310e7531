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

#include "procforge/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <regex>

#include "procforge/error.hpp"
#include "procforge/lexer.hpp"
#include "procforge/text.hpp"

namespace procforge::corpus {

using nlohmann::json;

std::size_t ParallelRecord::char_count_nl() const {
  return text::codepoint_length(nl_question) + text::codepoint_length(nl_answer);
}

std::size_t ParallelRecord::char_count_formal() const {
  return theorem ? text::codepoint_length(theorem->statement) + text::codepoint_length(theorem->proof) : 0;
}

void to_json(json& j, const TheoremRecord& r) {
  j = json{{"id", r.id},   {"source_path", r.source_path}, {"env", r.env},
           {"statement", r.statement}, {"proof", r.proof}};
}

void to_json(json& j, const ParallelRecord& r) {
  j = json{{"id", r.id},
           {"source_path", r.theorem ? r.theorem->source_path : ""},
           {"env", r.theorem ? r.theorem->env : ""},
           {"statement", r.theorem ? r.theorem->statement : ""},
           {"proof", r.theorem ? r.theorem->proof : ""},
           {"nl_question", r.nl_question},
           {"nl_answer", r.nl_answer}};
}

void from_json(const json& j, ParallelRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.nl_question = j.value("nl_question", "");
  r.nl_answer = j.value("nl_answer", "");
  const std::string statement = j.value("statement", "");
  const std::string proof = j.value("proof", "");
  if (statement.empty() && proof.empty()) {
    r.theorem.reset();
    return;
  }
  TheoremRecord t;
  t.id = r.id;
  t.source_path = j.value("source_path", "");
  t.env = j.value("env", "");
  t.statement = statement;
  t.proof = proof;
  t.char_count_formal = text::codepoint_length(statement) + text::codepoint_length(proof);
  r.theorem = std::move(t);
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<std::string_view, 6> kModifiers = {
    "private", "protected", "noncomputable", "nonrec", "unsafe", "partial"};

constexpr std::array<std::string_view, 9> kScopeCommands = {
    "import", "open",     "namespace",  "section",       "end",
    "variable", "universe", "set_option", "noncomputable"};

struct Command {
  std::size_t begin = 0;  // byte offset of the first character
  std::size_t end = 0;    // exclusive; start of the next boundary line
};

// Skips attributes and modifiers; returns the offset of the declaration keyword.
std::size_t skip_decl_prefix(std::string_view src, const lexer::SourceMap& map, std::size_t i,
                             std::size_t end) {
  for (;;) {
    while (i < end && std::isspace(static_cast<unsigned char>(src[i]))) ++i;
    if (i >= end) return i;
    if (src.substr(i, 2) == "@[") {
      const int base = map.depth[i];
      std::size_t j = i + 1;
      while (j < end && !(map.is_code(j) && src[j] == ']' && map.depth[j] == base + 1)) ++j;
      if (j >= end) return end;
      i = j + 1;
      continue;
    }
    bool matched = false;
    for (auto m : kModifiers) {
      if (text::starts_with_word(src.substr(i, end - i), m)) {
        i += m.size();
        matched = true;
        break;
      }
    }
    if (!matched) return i;
  }
}

std::string decl_name(std::string_view after_keyword) {
  auto s = text::ltrim(after_keyword);
  std::size_t n = 0;
  while (n < s.size() && !std::isspace(static_cast<unsigned char>(s[n])) && s[n] != ':' &&
         lexer::opening_bracket_at(s, n) == 0)
    ++n;
  return std::string(s.substr(0, n));
}

// First whitespace-delimited word of a command.
std::string_view head_word(std::string_view s) {
  s = text::ltrim(s);
  std::size_t n = 0;
  while (n < s.size() && !std::isspace(static_cast<unsigned char>(s[n]))) ++n;
  return s.substr(0, n);
}

// Commands of the form `open Foo in` / `set_option x y in` scope over the
// next declaration only.
bool is_one_shot(std::string_view command_text) {
  auto t = text::rtrim(command_text);
  return t.ends_with(" in") || t.ends_with("\nin");
}

std::string join_qualified(const std::vector<std::string>& scopes, const std::string& name) {
  std::string out;
  for (const auto& s : scopes) {
    if (s.empty()) continue;
    out += s;
    out += '.';
  }
  return out + name;
}

}  // namespace

std::vector<TheoremRecord> extract_theorems(std::string_view src, std::string_view path) {
  const auto map = lexer::scan(src);
  if (map.final_depth != 0 || map.min_depth < 0) {
    throw UnbalancedSource(std::string(path) + ": bracket depth " +
                           std::to_string(map.final_depth) + " at end of file");
  }

  // Boundary lines start at column 0 with a non-blank character at depth 0.
  // Code boundaries begin commands; comment boundaries only end the previous one.
  struct Boundary {
    std::size_t offset;
    bool code;
  };
  std::vector<Boundary> boundaries;
  for (std::size_t i = 0; i < src.size();) {
    const std::size_t nl = src.find('\n', i);
    const std::size_t line_end = nl == std::string_view::npos ? src.size() : nl;
    if (line_end > i && !std::isspace(static_cast<unsigned char>(src[i])) && map.depth[i] == 0) {
      const bool starts_comment = src.substr(i, 2) == "--" || src.substr(i, 2) == "/-";
      if (map.is_code(i) || starts_comment) boundaries.push_back({i, map.is_code(i)});
    }
    i = line_end + 1;
  }

  std::vector<TheoremRecord> records;
  std::vector<std::string> env_lines;
  std::vector<std::string> one_shot;
  std::vector<std::string> scopes;  // namespace components; "" for sections
  std::map<std::string, int> seen_ids;
  const lexer::PositionIndex positions(src);

  for (std::size_t b = 0; b < boundaries.size(); ++b) {
    if (!boundaries[b].code) continue;
    Command cmd{boundaries[b].offset, src.size()};
    if (b + 1 < boundaries.size()) cmd.end = boundaries[b + 1].offset;

    const std::size_t kw = skip_decl_prefix(src, map, cmd.begin, cmd.end);
    const auto rest = src.substr(kw, cmd.end - kw);
    const bool is_theorem =
        text::starts_with_word(rest, "theorem") || text::starts_with_word(rest, "lemma");

    if (!is_theorem) {
      const auto command = text::rtrim(src.substr(cmd.begin, cmd.end - cmd.begin));
      const auto head = head_word(command);
      const bool scope_cmd =
          std::find(kScopeCommands.begin(), kScopeCommands.end(), head) != kScopeCommands.end();
      if (!scope_cmd) {
        // Attribute-only lines fall through to the next declaration; anything
        // else (defs, instances, examples) clears pending `... in` prefixes.
        if (!command.starts_with("@[")) one_shot.clear();
        continue;
      }
      if ((head == "open" || head == "set_option") && is_one_shot(command)) {
        one_shot.emplace_back(command);
        continue;
      }
      if (head == "noncomputable" && !text::starts_with_word(text::ltrim(command.substr(13)), "section"))
        continue;
      env_lines.emplace_back(command);
      if (head == "namespace") {
        scopes.emplace_back(text::trim(command.substr(head.size())));
      } else if (head == "section" || head == "noncomputable") {
        scopes.emplace_back();
      } else if (head == "end" && !scopes.empty()) {
        scopes.pop_back();
      }
      continue;
    }

    // Extend the declaration through trailing `#align` commands.
    std::size_t region_end = cmd.end;
    while (b + 1 < boundaries.size() && boundaries[b + 1].code &&
           text::starts_with_word(src.substr(boundaries[b + 1].offset), "#align")) {
      ++b;
      region_end = b + 1 < boundaries.size() ? boundaries[b + 1].offset : src.size();
    }

    const std::string_view region = text::rtrim(src.substr(kw, region_end - kw));
    const int base_depth = map.depth[kw];
    std::size_t assign = std::string_view::npos;
    for (std::size_t i = 0; i + 1 < region.size(); ++i) {
      const std::size_t at = kw + i;
      if (map.is_code(at) && map.depth[at] == base_depth && region.substr(i, 2) == ":=") {
        assign = i;
        break;
      }
    }
    std::vector<std::string> prefix = std::move(one_shot);
    one_shot.clear();
    // Equation-compiler style declarations (no top-level `:=`) are not extracted.
    if (assign == std::string_view::npos) continue;

    TheoremRecord rec;
    rec.source_path = std::string(path);
    rec.statement = std::string(text::rtrim(region.substr(0, assign)));
    rec.proof = std::string(text::trim(region.substr(assign + 2)));
    if (rec.proof.empty()) continue;

    std::vector<std::string> env = env_lines;
    env.insert(env.end(), prefix.begin(), prefix.end());
    for (std::size_t i = 0; i < env.size(); ++i) {
      if (i) rec.env += '\n';
      rec.env += env[i];
    }

    const auto keyword = text::starts_with_word(rest, "theorem") ? std::string_view("theorem")
                                                                  : std::string_view("lemma");
    std::string id = rec.source_path + "::" +
                     join_qualified(scopes, decl_name(region.substr(keyword.size())));
    if (seen_ids[id]++ > 0) id += "@" + std::to_string(positions.at(kw).line);
    rec.id = std::move(id);
    rec.char_count_formal =
        text::codepoint_length(rec.statement) + text::codepoint_length(rec.proof);
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::empty_field: return "EMPTY_FIELD";
    case RejectReason::nl_too_short: return "NL_TOO_SHORT";
    case RejectReason::formal_too_short: return "FORMAL_TOO_SHORT";
    case RejectReason::manual_reject: return "MANUAL_REJECT";
  }
  return "UNKNOWN";
}

CurationResult curate(const std::vector<ParallelRecord>& records,
                      const std::set<std::string>& reject_list) {
  CurationResult out;
  for (const auto& r : records) {
    std::optional<RejectReason> reason;
    const bool empty_nl = text::trim(r.nl_question).empty() || text::trim(r.nl_answer).empty();
    const bool empty_formal = r.theorem && (text::trim(r.theorem->statement).empty() ||
                                            text::trim(r.theorem->proof).empty());
    if (reject_list.contains(r.id)) {
      reason = RejectReason::manual_reject;
    } else if (empty_nl || empty_formal) {
      reason = RejectReason::empty_field;
    } else if (r.char_count_nl() <= kMinNlChars) {
      reason = RejectReason::nl_too_short;
    } else if (r.theorem && r.char_count_formal() <= kMinFormalChars) {
      reason = RejectReason::formal_too_short;
    }
    if (reason) {
      out.rejected.push_back({r, *reason});
    } else {
      out.kept.push_back(r);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(SplitName s) {
  switch (s) {
    case SplitName::training: return "training";
    case SplitName::random_test: return "random_test";
    case SplitName::basic_test: return "basic_test";
    case SplitName::real_test: return "real_test";
  }
  return "unknown";
}

void to_json(json& j, const SplitManifest& m) {
  j = json{{"split_name", to_string(m.split_name)}, {"ids", m.ids}, {"seed", m.seed}};
}

SplitName split_name_from_string(std::string_view s) {
  for (auto n : {SplitName::training, SplitName::random_test, SplitName::basic_test, SplitName::real_test})
    if (to_string(n) == s) return n;
  throw InvalidInput("unknown split name '" + std::string(s) + "'");
}

void from_json(const json& j, SplitManifest& m) {
  m.split_name = split_name_from_string(j.at("split_name").get<std::string>());
  m.ids = j.at("ids").get<std::vector<std::string>>();
  m.seed = j.value("seed", std::uint64_t{0});
}

std::vector<SplitManifest> split(const std::vector<ParallelRecord>& records,
                                 const SplitOptions& options) {
  if (options.ratios.empty() || options.ratios.size() > 2) {
    throw InvalidInput("split ratios must name (training[, random_test]) fractions");
  }
  double total = 0.0;
  for (double r : options.ratios) {
    if (r < 0.0) throw InvalidInput("split ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("split ratios must sum to 1");

  std::vector<std::string> theorem_ids;
  std::vector<std::string> basic_pool;
  std::vector<std::string> real_ids;
  for (const auto& r : records) {
    if (!r.theorem) {
      real_ids.push_back(r.id);
      continue;
    }
    theorem_ids.push_back(r.id);
    if (r.theorem->source_path.ends_with("Basic.lean")) basic_pool.push_back(r.id);
  }
  // Input order must not influence the draw.
  std::sort(theorem_ids.begin(), theorem_ids.end());
  std::sort(basic_pool.begin(), basic_pool.end());
  std::sort(real_ids.begin(), real_ids.end());
  theorem_ids.erase(std::unique(theorem_ids.begin(), theorem_ids.end()), theorem_ids.end());
  basic_pool.erase(std::unique(basic_pool.begin(), basic_pool.end()), basic_pool.end());

  if (basic_pool.size() < options.basic_size) {
    throw InsufficientBasicPool("requested " + std::to_string(options.basic_size) +
                                " basic theorems, pool has " + std::to_string(basic_pool.size()));
  }

  std::mt19937_64 rng(options.seed);
  std::shuffle(basic_pool.begin(), basic_pool.end(), rng);
  std::vector<std::string> basic(basic_pool.begin(),
                                 basic_pool.begin() + static_cast<long>(options.basic_size));
  const std::set<std::string> reserved(basic.begin(), basic.end());

  std::vector<std::string> pool;
  for (auto& id : theorem_ids)
    if (!reserved.contains(id)) pool.push_back(id);
  std::shuffle(pool.begin(), pool.end(), rng);

  const auto n_train = static_cast<std::size_t>(
      std::llround(options.ratios[0] * static_cast<double>(pool.size())));
  std::vector<std::string> train(pool.begin(), pool.begin() + static_cast<long>(n_train));
  std::vector<std::string> random_test(pool.begin() + static_cast<long>(n_train), pool.end());

  std::sort(train.begin(), train.end());
  std::sort(random_test.begin(), random_test.end());
  std::sort(basic.begin(), basic.end());
  return {
      {SplitName::training, std::move(train), options.seed},
      {SplitName::random_test, std::move(random_test), options.seed},
      {SplitName::basic_test, std::move(basic), options.seed},
      {SplitName::real_test, std::move(real_ids), options.seed},
  };
}

// ---------------------------------------------------------------------------

const std::string_view kInformalizationTemplate =
    "You are a math expert familiar with the Lean 4 theorem prover, a tool used for formal "
    "verification of mathematical theorems and proofs. Given below is a statement and its proof "
    "written in Lean 4's syntax:\n"
    "{Theorem}.\n"
    "\n"
    "Please translate the lemma and its corresponding proof into the identical natural language. "
    "The translation should accurately convey the same logical structure and content as the "
    "original Isabelle syntax. Explain the meaning of the lemma, detail the steps of the proof, "
    "and maintain the fidelity of the original mathematical reasoning.\n"
    "\n"
    "You must respond in the following format:\n"
    "\n"
    "# Problem: ...\n"
    "\n"
    "# Proof: ...\n";

std::string build_informalization_prompt(const TheoremRecord& t) {
  std::string out(kInformalizationTemplate);
  const std::string_view slot = "{Theorem}";
  out.replace(out.find(slot), slot.size(), t.formal_text());
  return out;
}

InformalReply parse_informalization_reply(std::string_view reply) {
  static const std::regex problem_re(R"(#[ \t]*Problem[ \t]*:)");
  static const std::regex proof_re(R"(#[ \t]*Proof[ \t]*:)");
  const std::string s(reply);
  std::smatch problem;
  if (!std::regex_search(s, problem, problem_re)) throw MalformedReply("missing '# Problem:' header");
  const auto after_problem = static_cast<std::size_t>(problem.position(0) + problem.length(0));
  std::smatch proof;
  const std::string tail = s.substr(after_problem);
  if (!std::regex_search(tail, proof, proof_re)) throw MalformedReply("missing '# Proof:' header");
  InformalReply out;
  out.question = std::string(text::trim(tail.substr(0, static_cast<std::size_t>(proof.position(0)))));
  out.answer = std::string(
      text::trim(tail.substr(static_cast<std::size_t>(proof.position(0) + proof.length(0)))));
  return out;
}

}  // namespace procforge::corpus
