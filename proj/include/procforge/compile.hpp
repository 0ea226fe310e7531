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

// Compiling candidates through a Lean 4 REPL (or a scripted mock of one).
//
// A job's submitted text is `env + "\n" + body`, with `env` newline-terminated
// when non-empty, so the body always starts on line `env_line_offset + 1` of
// the submission. Backends report positions in submission coordinates.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "procforge/lexer.hpp"

namespace procforge {
class Subprocess;
}

namespace procforge::compile {

inline constexpr int kDefaultTimeoutMs = 60'000;
inline constexpr std::string_view kSorryMessage = "declaration uses 'sorry'";

enum class Severity { error, warning, info };

std::string_view to_string(Severity s);
Severity severity_from_string(std::string_view s);

struct Diagnostic {
  Severity severity = Severity::error;
  int line = 1;    // 1-based
  int column = 0;  // 0-based, code points
  std::string message;
  bool environment = false;  // reported inside the prepended environment

  bool is_sorry_warning() const;
  lexer::Position position() const { return {line, column}; }

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

enum class Status { success, failed, timeout, backend_error };

std::string_view to_string(Status s);
Status status_from_string(std::string_view s);

struct CompilationResult {
  std::string candidate_id;
  std::string instance_id;
  Status status = Status::backend_error;
  std::vector<Diagnostic> diagnostics;  // sorted by (line, column)
  int env_line_offset = 0;
  std::int64_t elapsed_ms = 0;
  std::string error;  // backend failure detail, empty otherwise
};

/// Equality of everything except wall-clock timing.
bool same_outcome(const CompilationResult& a, const CompilationResult& b);

struct CompileJob {
  std::string candidate_id;
  std::string instance_id;
  std::string env;
  std::string body;
  int timeout_ms = kDefaultTimeoutMs;

  std::string submitted_text() const;
  /// Number of submission lines that precede the body.
  int env_line_offset() const;
};

/// The success rule: no error and no "declaration uses 'sorry'" warning.
/// Info messages are neutral.
Status classify(const std::vector<Diagnostic>& diagnostics);

/// Returns a copy of `result` with diagnostics shifted into body coordinates
/// (line 1 = first body line). Environment-level diagnostics are dropped.
CompilationResult to_body_coordinates(const CompilationResult& result);

void to_json(nlohmann::json& j, const Diagnostic& d);
void from_json(const nlohmann::json& j, Diagnostic& d);
void to_json(nlohmann::json& j, const CompileJob& job);
void from_json(const nlohmann::json& j, CompileJob& job);
/// `elapsed_ms` is only serialized when `with_timing` is set, so result
/// files are byte-identical across reruns.
nlohmann::json to_json(const CompilationResult& r, bool with_timing);
void from_json(const nlohmann::json& j, CompilationResult& r);

// ---------------------------------------------------------------------------
// REPL protocol

struct SorryInfo {
  lexer::Position pos;
  std::string goal;
  std::optional<int> proof_state;
};

struct TacticInfo {
  lexer::Position pos;
  std::string tactic;
  std::string goals;
  std::optional<int> proof_state;
};

/// One decoded REPL reply.
struct ReplReply {
  std::vector<Diagnostic> diagnostics;  // in reply order
  std::vector<SorryInfo> sorries;
  std::vector<TacticInfo> tactics;
  std::optional<int> env;
  std::optional<std::string> repl_error;  // top-level {"message": ...} replies

  bool has_sorry_warning() const;
};

/// Decodes one complete reply. Unknown fields are ignored. Throws
/// ProtocolError if `raw` is not a JSON object.
ReplReply parse_repl_message(std::string_view raw);

/// The request line for a command, `{"cmd": ..., "env": ...}`.
std::string make_repl_request(std::string_view cmd, std::optional<int> env);

// ---------------------------------------------------------------------------
// Backends

class CompilerBackend {
 public:
  virtual ~CompilerBackend() = default;

  virtual void handshake() {}

  /// Compiles `job.submitted_text()`. Returns nullopt on timeout. Throws
  /// BackendCrashed or ProtocolError when the backend misbehaves.
  virtual std::optional<ReplReply> run(const CompileJob& job,
                                       std::chrono::milliseconds timeout) = 0;
};

using BackendFactory = std::function<std::unique_ptr<CompilerBackend>()>;

/// Scripted reply for one body, in body coordinates.
struct MockScript {
  std::vector<Diagnostic> messages;
  int latency_ms = -1;  // -1: use the fixture default
  bool crash = false;
  bool garbage = false;  // emit an unparseable reply
};

/// Fixture map: sha256(body) -> script. Bodies not in the map fall back to a
/// lexical check: each `sorry` token yields the sorry warning at its
/// position and each identifier starting with `bad_` an "unknown identifier"
/// error.
struct MockFixtures {
  std::map<std::string, MockScript> entries;
  int default_latency_ms = 0;

  static MockFixtures load(const std::filesystem::path& path);
  static MockFixtures from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

std::string body_hash(std::string_view body);

/// The lexical fallback used by the mock, in body coordinates.
ReplReply mock_check(std::string_view body);

class MockBackend final : public CompilerBackend {
 public:
  explicit MockBackend(std::shared_ptr<const MockFixtures> fixtures);

  std::optional<ReplReply> run(const CompileJob& job, std::chrono::milliseconds timeout) override;

 private:
  std::shared_ptr<const MockFixtures> fixtures_;
};

struct ReplOptions {
  std::string command;  // e.g. "lake exe repl", run through /bin/sh
  /// Library pins ({"mathlib": "3cecb82", ...}) compared against the
  /// project's lake-manifest.json at startup. Mismatches only warn.
  std::optional<std::filesystem::path> pins;
  std::optional<std::filesystem::path> lake_manifest;
};

/// Checks pins against a lake manifest; returns one message per mismatch.
std::vector<std::string> check_library_pins(const nlohmann::json& pins,
                                            const nlohmann::json& lake_manifest);

/// Long-lived REPL child. Leading `import` lines of a submission are
/// loaded once per distinct header and reused through the REPL's `env`
/// field; they are blanked in the command so line numbers are unchanged.
/// The child is restarted after a crash or timeout.
class ReplBackend final : public CompilerBackend {
 public:
  explicit ReplBackend(ReplOptions options);
  ~ReplBackend() override;

  void handshake() override;
  std::optional<ReplReply> run(const CompileJob& job, std::chrono::milliseconds timeout) override;

 private:
  std::optional<std::string> exchange(const std::string& request,
                                      std::chrono::steady_clock::time_point deadline);
  void restart();

  ReplOptions options_;
  std::unique_ptr<Subprocess> child_;
  std::map<std::string, int> header_envs_;
};

// ---------------------------------------------------------------------------
// Operations

/// Runs one job and normalizes the reply: sorry warnings are anchored at the
/// first reported `sorry` position, diagnostics are sorted, and any error
/// inside the environment turns the result into backend_error.
CompilationResult compile_one(const CompileJob& job, CompilerBackend& backend);

/// Runs `jobs` on `workers` threads, each owning one backend from `factory`.
/// Results come back in job order; a job never started because `cancel`
/// was raised is reported as backend_error "cancelled".
std::vector<CompilationResult> compile_batch(const std::vector<CompileJob>& jobs,
                                             const BackendFactory& factory, int workers,
                                             const std::atomic<bool>* cancel = nullptr);

}  // namespace procforge::compile
