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

// One round of the autoformalizer/verifier enhancement loop.
//
// Workspace layout:
//   rounds/<k>/candidates.jsonl  generated (or bootstrapped) candidates
//   rounds/<k>/results.jsonl     compilation results, no timing
//   rounds/<k>/scores.jsonl      verifier scores (empty without a scorer)
//   rounds/<k>/labels.jsonl      process and outcome labels of labelable candidates
//   rounds/<k>/sft.jsonl         {prompt, completion} pairs selected by the policy
//   rounds/<k>/verifier.jsonl    process labels for the next verifier
//   rounds/<k>/manifest.json     written last; marks the round complete

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "procforge/compile.hpp"
#include "procforge/corpus.hpp"
#include "procforge/gateway.hpp"
#include "procforge/steps.hpp"
#include "procforge/verifier.hpp"

namespace procforge::loop {

enum class FilterPolicy { rft, verifier, rft_and_verifier };

std::string_view to_string(FilterPolicy p);
/// Accepts "rft", "verifier", "both" and "rft_and_verifier".
FilterPolicy policy_from_string(std::string_view s);

std::vector<std::string> filter_rft(const std::vector<compile::CompilationResult>& results);
std::vector<std::string> filter_verifier(const std::vector<verifier::VerifierScore>& scores);
std::vector<std::string> filter_both(const std::vector<compile::CompilationResult>& results,
                                     const std::vector<verifier::VerifierScore>& scores);

/// Fraction of `selected` that compiled; nullopt for an empty selection.
std::optional<double> dataset_quality(const std::vector<std::string>& selected,
                                      const std::vector<compile::CompilationResult>& results);

/// Writes {prompt, completion} lines ordered by (instance_id, candidate_id).
/// An empty selection logs a warning and still writes an empty file.
/// Returns the number of lines written.
std::size_t emit_sft_dataset(const std::vector<std::string>& selected,
                             const std::vector<gateway::Candidate>& candidates,
                             const std::map<std::string, std::string>& prompts,
                             const std::filesystem::path& out);

/// Writes the given labels in the step_labeler output schema.
std::size_t emit_verifier_dataset(const std::vector<steps::StepLabels>& labels,
                                  const std::filesystem::path& out);

/// Builds the compile job for a candidate. Candidates that carry their own
/// `import` header are compiled standalone; others get the instance's
/// theorem environment prepended.
compile::CompileJob make_compile_job(const gateway::Candidate& c, const std::string& env,
                                     int timeout_ms);

/// Process labels for every labelable result whose candidate has steps.
std::vector<steps::StepLabels> label_candidates(const std::vector<gateway::Candidate>& candidates,
                                                const std::vector<compile::CompilationResult>& results,
                                                steps::Scheme scheme);

struct RoundCounts {
  std::size_t generated = 0;
  std::size_t compiled_success = 0;
  std::size_t selected_rft = 0;
  std::size_t selected_verifier = 0;
  std::size_t selected_both = 0;

  friend bool operator==(const RoundCounts&, const RoundCounts&) = default;
};

struct RoundManifest {
  int round = 0;
  std::string workspace;
  FilterPolicy policy = FilterPolicy::rft_and_verifier;
  RoundCounts counts;
  std::optional<double> dataset_quality;
  std::size_t sft_records = 0;
  std::size_t verifier_records = 0;
  std::string input_hash;
  std::map<std::string, std::string> files;  // name -> sha256
  std::string created_at;
  bool already_complete = false;  // set when a rerun found the round finished
  bool partial = false;           // interrupted; no manifest was written
};

nlohmann::json to_json(const RoundManifest& m);
RoundManifest manifest_from_json(const nlohmann::json& j);

struct RoundConfig {
  std::filesystem::path workspace;
  int round = 0;
  FilterPolicy policy = FilterPolicy::rft_and_verifier;

  std::filesystem::path dataset;  // ParallelRecord JSON-lines
  /// Round 0 may start from an existing candidate file instead of generating.
  std::optional<std::filesystem::path> candidates;

  std::string gen_backend;  // gateway::make_generation_backend spec
  std::string prompt_wrapper = "{prompt}";
  int n = 1;
  double temperature = 0.0;
  int max_tokens = 2048;

  std::string compiler = "mock";  // recorded in the input hash
  compile::BackendFactory compiler_factory;
  int timeout_ms = compile::kDefaultTimeoutMs;
  int workers = 4;

  std::string scorer;  // verifier::make_scorer spec; empty for none
  verifier::Aggregation aggregation = verifier::Aggregation::min;

  std::optional<std::string> webhook;  // POSTed {round, dataset_path}
  const std::atomic<bool>* cancel = nullptr;
};

std::filesystem::path round_dir(const std::filesystem::path& workspace, int round);

/// Hash over everything that determines the round's outputs.
std::string input_hash(const RoundConfig& cfg);

/// Runs one round. A rerun with identical inputs returns the stored manifest
/// with `already_complete` set and touches nothing. Throws StalePipeline when
/// round k-1 is incomplete or the dataset is missing, RoundConflict when a
/// finished round was produced from different inputs, and InvalidInput when
/// the policy needs a scorer that was not configured.
RoundManifest run_round(const RoundConfig& cfg);

}  // namespace procforge::loop
