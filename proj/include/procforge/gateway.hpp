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

// Client side of the generation contract:
//   POST /generate {prompt, n, temperature, max_tokens} -> {samples: [{text, logprob?}]}

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace procforge::gateway {

extern const std::string_view kAutoformalizationTemplate;

/// Fills the autoformalization template; `wrapper` may embed the result in a
/// model-specific chat template through a `{prompt}` placeholder.
std::string build_autoformalization_prompt(std::string_view question, std::string_view answer,
                                           std::string_view wrapper = "{prompt}");

struct GenerationRequest {
  std::string prompt;
  int n = 1;
  double temperature = 0.0;
  int max_tokens = 2048;

  /// Throws InvalidInput unless n >= 1, temperature >= 0, and n == 1 at
  /// temperature 0.
  void validate() const;
  nlohmann::json to_json() const;
};

struct Sample {
  std::string text;
  std::optional<double> logprob;
};

struct Candidate {
  std::string candidate_id;
  std::string instance_id;
  std::string text;  // extracted Lean code
  std::optional<double> gen_logprob;
  bool negative = false;  // no Lean code could be extracted
  bool padded = false;    // the backend returned fewer samples than asked

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

void to_json(nlohmann::json& j, const Candidate& c);
void from_json(const nlohmann::json& j, Candidate& c);

std::string candidate_id(std::string_view instance_id, int index);

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  /// `instance_id` is routing metadata for scripted backends; it is not sent
  /// over the wire.
  virtual std::vector<Sample> generate(const GenerationRequest& req,
                                       const std::string& instance_id) = 0;
};

class HttpGenerationBackend final : public GenerationBackend {
 public:
  HttpGenerationBackend(std::string url, int timeout_ms = 120'000, int max_retries = 2);
  std::vector<Sample> generate(const GenerationRequest& req, const std::string& instance_id) override;

  int retry_count() const { return retries_.load(); }

 private:
  std::string url_;
  int timeout_ms_;
  int max_retries_;
  std::atomic<int> retries_{0};
};

/// Scripted replies from a JSON-lines file of
/// `{"instance_id": ..., "samples": [{"text": ..., "logprob": ...}]}`,
/// falling back to `{"prompt_sha256": ...}` keys.
class ScriptedGenerationBackend final : public GenerationBackend {
 public:
  explicit ScriptedGenerationBackend(const std::filesystem::path& script);
  std::vector<Sample> generate(const GenerationRequest& req, const std::string& instance_id) override;

 private:
  std::map<std::string, std::vector<Sample>> by_instance_;
  std::map<std::string, std::vector<Sample>> by_prompt_;
};

/// Record/replay wrapper. Entries are keyed by sha256 of the request JSON.
class CassetteBackend final : public GenerationBackend {
 public:
  /// Replay only.
  explicit CassetteBackend(std::filesystem::path cassette);
  /// Records calls to `live` (appending to the cassette), replaying hits.
  CassetteBackend(std::filesystem::path cassette, std::unique_ptr<GenerationBackend> live);

  std::vector<Sample> generate(const GenerationRequest& req, const std::string& instance_id) override;

  static std::string request_key(const GenerationRequest& req);

 private:
  std::filesystem::path path_;
  std::unique_ptr<GenerationBackend> live_;
  std::mutex mutex_;
  std::map<std::string, std::vector<Sample>> entries_;
};

/// "http(s)://...", "mock:<script.jsonl>", "replay:<cassette>" or
/// "record:<cassette>=<url>".
std::unique_ptr<GenerationBackend> make_generation_backend(const std::string& spec);

/// Pulls Lean code out of a model reply. Prefers ```lean / ```lean4 fenced
/// blocks (the longest one); otherwise takes the longest run of code lines
/// that contains a `theorem`, `lemma` or `import` line. Returns "" when no
/// Lean code is found.
std::string extract_lean_block(std::string_view raw);

/// Always returns exactly `req.n` candidates; missing samples are padded as
/// negative. Throws BackendUnavailable if the backend fails.
std::vector<Candidate> generate(const GenerationRequest& req, GenerationBackend& backend,
                                const std::string& instance_id);

struct GenerationItem {
  std::string instance_id;
  GenerationRequest request;
};

/// Runs generate() over many instances with at most `max_in_flight`
/// concurrent requests; output is grouped in item order.
std::vector<Candidate> generate_all(const std::vector<GenerationItem>& items,
                                    GenerationBackend& backend, int max_in_flight = 4);

}  // namespace procforge::gateway
