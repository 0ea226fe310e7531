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

// Theorem extraction from Lean 4 sources, dataset curation, splitting and
// the informalization prompt round trip.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace procforge::corpus {

struct TheoremRecord {
  std::string id;
  std::string source_path;
  std::string env;
  std::string statement;
  std::string proof;
  std::size_t char_count_formal = 0;

  /// statement + " := " + proof, the text a model is asked to reproduce.
  std::string formal_text() const { return statement + " := " + proof; }
};

/// A theorem paired with its natural-language rendering. Real-world test
/// items carry no theorem.
struct ParallelRecord {
  std::string id;
  std::optional<TheoremRecord> theorem;
  std::string nl_question;
  std::string nl_answer;

  std::size_t char_count_nl() const;
  std::size_t char_count_formal() const;
};

void to_json(nlohmann::json& j, const ParallelRecord& r);
void from_json(const nlohmann::json& j, ParallelRecord& r);
void to_json(nlohmann::json& j, const TheoremRecord& r);

// ---------------------------------------------------------------------------
// Extraction

/// One record per top-level `theorem`/`lemma`. The environment of each record
/// is every scope-setting command (`import`, `open`, `namespace`, `section`,
/// `end`, `variable`, `universe`, `set_option`) that precedes it. `open ... in`
/// applies only to the declaration right after it.
///
/// Throws UnbalancedSource if bracket depth does not return to zero.
std::vector<TheoremRecord> extract_theorems(std::string_view source, std::string_view path);

// ---------------------------------------------------------------------------
// Curation

inline constexpr std::size_t kMinNlChars = 400;
inline constexpr std::size_t kMinFormalChars = 200;

enum class RejectReason { empty_field, nl_too_short, formal_too_short, manual_reject };

std::string_view to_string(RejectReason r);

struct Rejection {
  ParallelRecord record;
  RejectReason reason;
};

struct CurationResult {
  std::vector<ParallelRecord> kept;
  std::vector<Rejection> rejected;
};

/// Lengths are in code points. A record is rejected when its NL text
/// (question + answer) is <= 400 chars, its formal text (statement + proof)
/// is <= 200 chars, any text field is empty, or its id is in `reject_list`.
CurationResult curate(const std::vector<ParallelRecord>& records,
                      const std::set<std::string>& reject_list = {});

// ---------------------------------------------------------------------------
// Splitting

enum class SplitName { training, random_test, basic_test, real_test };

std::string_view to_string(SplitName s);

struct SplitManifest {
  SplitName split_name = SplitName::training;
  std::vector<std::string> ids;
  std::uint64_t seed = 0;
};

SplitName split_name_from_string(std::string_view s);
void to_json(nlohmann::json& j, const SplitManifest& m);
void from_json(const nlohmann::json& j, SplitManifest& m);

struct SplitOptions {
  /// Fractions for (training, random_test) over the non-basic theorem pool.
  std::vector<double> ratios{0.8, 0.2};
  std::size_t basic_size = 0;
  std::uint64_t seed = 0;
};

/// Samples without replacement. The basic test set is reserved first from
/// records whose source path ends in `Basic.lean`; the remaining theorem
/// records are split by `ratios`. Records without a theorem form the real
/// test set. Always returns the four manifests in SplitName order.
std::vector<SplitManifest> split(const std::vector<ParallelRecord>& records,
                                 const SplitOptions& options);

// ---------------------------------------------------------------------------
// Informalization prompt

extern const std::string_view kInformalizationTemplate;

std::string build_informalization_prompt(const TheoremRecord& t);

struct InformalReply {
  std::string question;
  std::string answer;
};

/// Splits a reply on its `# Problem:` and `# Proof:` headers. Throws
/// MalformedReply if either header is missing or they appear out of order.
InformalReply parse_informalization_reply(std::string_view reply);

}  // namespace procforge::corpus
