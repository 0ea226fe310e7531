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

#include "procforge/compile.hpp"

#include <algorithm>
#include <cctype>
#include <thread>

#include <spdlog/spdlog.h>

#include "procforge/error.hpp"
#include "procforge/process.hpp"
#include "procforge/text.hpp"

namespace procforge::compile {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::error: return "error";
    case Severity::warning: return "warning";
    case Severity::info: return "info";
  }
  return "error";
}

Severity severity_from_string(std::string_view s) {
  if (s == "error") return Severity::error;
  if (s == "warning") return Severity::warning;
  if (s == "info" || s == "information") return Severity::info;
  throw ProtocolError("unknown severity '" + std::string(s) + "'");
}

std::string_view to_string(Status s) {
  switch (s) {
    case Status::success: return "success";
    case Status::failed: return "failed";
    case Status::timeout: return "timeout";
    case Status::backend_error: return "backend_error";
  }
  return "backend_error";
}

Status status_from_string(std::string_view s) {
  if (s == "success") return Status::success;
  if (s == "failed") return Status::failed;
  if (s == "timeout") return Status::timeout;
  if (s == "backend_error") return Status::backend_error;
  throw InvalidInput("unknown status '" + std::string(s) + "'");
}

bool Diagnostic::is_sorry_warning() const {
  return severity == Severity::warning && message.find(kSorryMessage) != std::string::npos;
}

bool same_outcome(const CompilationResult& a, const CompilationResult& b) {
  return a.candidate_id == b.candidate_id && a.instance_id == b.instance_id &&
         a.status == b.status && a.diagnostics == b.diagnostics &&
         a.env_line_offset == b.env_line_offset && a.error == b.error;
}

std::string CompileJob::submitted_text() const {
  std::string out = env;
  if (!out.empty() && out.back() != '\n') out += '\n';
  out += '\n';
  out += body;
  return out;
}

int CompileJob::env_line_offset() const {
  return static_cast<int>(text::line_count(env)) + 1;
}

Status classify(const std::vector<Diagnostic>& diagnostics) {
  for (const auto& d : diagnostics) {
    if (d.severity == Severity::error || d.is_sorry_warning()) return Status::failed;
  }
  return Status::success;
}

CompilationResult to_body_coordinates(const CompilationResult& result) {
  CompilationResult out = result;
  out.diagnostics.clear();
  for (auto d : result.diagnostics) {
    if (d.environment || d.line <= result.env_line_offset) continue;
    d.line -= result.env_line_offset;
    out.diagnostics.push_back(std::move(d));
  }
  out.env_line_offset = 0;
  return out;
}

void to_json(json& j, const Diagnostic& d) {
  j = json{{"severity", to_string(d.severity)},
           {"line", d.line},
           {"column", d.column},
           {"message", d.message}};
  if (d.environment) j["environment"] = true;
}

void from_json(const json& j, Diagnostic& d) {
  d.severity = severity_from_string(j.at("severity").get<std::string>());
  d.line = j.at("line").get<int>();
  d.column = j.value("column", 0);
  d.message = j.value("message", "");
  d.environment = j.value("environment", false);
}

void to_json(json& j, const CompileJob& job) {
  j = json{{"candidate_id", job.candidate_id},
           {"instance_id", job.instance_id},
           {"env", job.env},
           {"body", job.body},
           {"timeout_ms", job.timeout_ms}};
}

void from_json(const json& j, CompileJob& job) {
  job.candidate_id = j.at("candidate_id").get<std::string>();
  job.instance_id = j.value("instance_id", "");
  job.env = j.value("env", "");
  job.body = j.at("body").get<std::string>();
  job.timeout_ms = j.value("timeout_ms", kDefaultTimeoutMs);
}

json to_json(const CompilationResult& r, bool with_timing) {
  json j{{"candidate_id", r.candidate_id},
         {"instance_id", r.instance_id},
         {"status", to_string(r.status)},
         {"diagnostics", r.diagnostics},
         {"env_line_offset", r.env_line_offset}};
  if (!r.error.empty()) j["error"] = r.error;
  if (with_timing) j["elapsed_ms"] = r.elapsed_ms;
  return j;
}

void from_json(const json& j, CompilationResult& r) {
  r.candidate_id = j.at("candidate_id").get<std::string>();
  r.instance_id = j.value("instance_id", "");
  r.status = status_from_string(j.at("status").get<std::string>());
  r.diagnostics = j.value("diagnostics", std::vector<Diagnostic>{});
  r.env_line_offset = j.value("env_line_offset", 0);
  r.elapsed_ms = j.value("elapsed_ms", std::int64_t{0});
  r.error = j.value("error", "");
}

// ---------------------------------------------------------------------------

bool ReplReply::has_sorry_warning() const {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [](const Diagnostic& d) { return d.is_sorry_warning(); });
}

namespace {

lexer::Position read_pos(const json& j) {
  lexer::Position p;
  if (j.is_object()) {
    p.line = j.value("line", 1);
    p.column = j.value("column", 0);
  }
  return p;
}

std::optional<int> read_int(const json& j, const char* key) {
  if (auto it = j.find(key); it != j.end() && it->is_number_integer()) return it->get<int>();
  return std::nullopt;
}

}  // namespace

ReplReply parse_repl_message(std::string_view raw) {
  json j = json::parse(raw, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ProtocolError("unparseable REPL reply: " + std::string(raw.substr(0, 200)));
  }
  ReplReply reply;
  reply.env = read_int(j, "env");
  if (auto it = j.find("message"); it != j.end() && it->is_string() && !j.contains("messages")) {
    reply.repl_error = it->get<std::string>();
  }
  try {
    if (auto it = j.find("messages"); it != j.end() && it->is_array()) {
      for (const auto& m : *it) {
        Diagnostic d;
        d.severity = severity_from_string(m.value("severity", "error"));
        const auto pos = read_pos(m.value("pos", json::object()));
        d.line = std::max(pos.line, 1);
        d.column = std::max(pos.column, 0);
        d.message = m.value("data", "");
        reply.diagnostics.push_back(std::move(d));
      }
    }
    if (auto it = j.find("sorries"); it != j.end() && it->is_array()) {
      for (const auto& s : *it) {
        reply.sorries.push_back(
            {read_pos(s.value("pos", json::object())), s.value("goal", ""), read_int(s, "proofState")});
      }
    }
    if (auto it = j.find("tactics"); it != j.end() && it->is_array()) {
      for (const auto& t : *it) {
        reply.tactics.push_back({read_pos(t.value("pos", json::object())), t.value("tactic", ""),
                                 t.value("goals", ""), read_int(t, "proofState")});
      }
    }
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed REPL reply: ") + e.what());
  }
  return reply;
}

std::string make_repl_request(std::string_view cmd, std::optional<int> env) {
  json j{{"cmd", cmd}};
  if (env) j["env"] = *env;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Mock backend

std::string body_hash(std::string_view body) { return text::sha256_hex(body); }

MockFixtures MockFixtures::from_json(const json& j) {
  MockFixtures f;
  f.default_latency_ms = j.value("default_latency_ms", 0);
  if (auto it = j.find("entries"); it != j.end()) {
    for (const auto& [hash, e] : it->items()) {
      MockScript s;
      s.latency_ms = e.value("latency_ms", -1);
      s.crash = e.value("crash", false);
      s.garbage = e.value("garbage", false);
      if (auto m = e.find("messages"); m != e.end()) s.messages = m->get<std::vector<Diagnostic>>();
      f.entries.emplace(hash, std::move(s));
    }
  }
  return f;
}

MockFixtures MockFixtures::load(const std::filesystem::path& path) {
  const auto contents = text::read_file(path);
  json j = json::parse(contents, nullptr, false);
  if (j.is_discarded()) throw InvalidInput("mock fixture file is not JSON: " + path.string());
  return from_json(j);
}

json MockFixtures::to_json() const {
  json entries = json::object();
  for (const auto& [hash, s] : this->entries) {
    json e{{"messages", s.messages}};
    if (s.latency_ms >= 0) e["latency_ms"] = s.latency_ms;
    if (s.crash) e["crash"] = true;
    if (s.garbage) e["garbage"] = true;
    entries[hash] = std::move(e);
  }
  return json{{"default_latency_ms", default_latency_ms}, {"entries", std::move(entries)}};
}

ReplReply mock_check(std::string_view body) {
  ReplReply reply;
  const auto map = lexer::scan(body);
  const lexer::PositionIndex positions(body);
  auto ident = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' || c == '.' ||
           c == '?' || c == '!';
  };
  std::size_t i = 0;
  while (i < body.size()) {
    if (!map.is_code(i) || !ident(body[i]) || (i > 0 && ident(body[i - 1]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < body.size() && map.is_code(j) && ident(body[j])) ++j;
    const auto word = body.substr(i, j - i);
    const auto pos = positions.at(i);
    if (word == "sorry") {
      reply.diagnostics.push_back(
          {Severity::warning, pos.line, pos.column, std::string(kSorryMessage), false});
      reply.sorries.push_back({pos, "", std::nullopt});
    } else if (word.starts_with("bad_")) {
      reply.diagnostics.push_back({Severity::error, pos.line, pos.column,
                                   "unknown identifier '" + std::string(word) + "'", false});
    }
    i = j;
  }
  return reply;
}

MockBackend::MockBackend(std::shared_ptr<const MockFixtures> fixtures)
    : fixtures_(std::move(fixtures)) {
  if (!fixtures_) fixtures_ = std::make_shared<MockFixtures>();
}

std::optional<ReplReply> MockBackend::run(const CompileJob& job,
                                          std::chrono::milliseconds timeout) {
  const MockScript* script = nullptr;
  if (auto it = fixtures_->entries.find(body_hash(job.body)); it != fixtures_->entries.end()) {
    script = &it->second;
  }
  const int latency = (script && script->latency_ms >= 0) ? script->latency_ms
                                                          : fixtures_->default_latency_ms;
  if (std::chrono::milliseconds(latency) > timeout) {
    std::this_thread::sleep_for(timeout);
    return std::nullopt;
  }
  if (latency > 0) std::this_thread::sleep_for(std::chrono::milliseconds(latency));

  if (script && script->crash) throw BackendCrashed("mock backend scripted crash");
  if (script && script->garbage) return parse_repl_message("{not json");

  ReplReply reply;
  if (script) {
    reply.diagnostics = script->messages;
    for (const auto& d : reply.diagnostics)
      if (d.is_sorry_warning()) reply.sorries.push_back({d.position(), "", std::nullopt});
  } else {
    reply = mock_check(job.body);
  }
  // Report in submission coordinates, as a real REPL would.
  const int offset = job.env_line_offset();
  for (auto& d : reply.diagnostics) d.line += offset;
  for (auto& s : reply.sorries) s.pos.line += offset;
  return reply;
}

// ---------------------------------------------------------------------------
// REPL backend

std::vector<std::string> check_library_pins(const json& pins, const json& lake_manifest) {
  std::map<std::string, std::string> revs;
  if (auto it = lake_manifest.find("packages"); it != lake_manifest.end() && it->is_array()) {
    for (const auto& p : *it) revs[p.value("name", "")] = p.value("rev", "");
  }
  std::vector<std::string> problems;
  for (const auto& [name, want] : pins.items()) {
    const auto expected = want.get<std::string>();
    auto it = revs.find(name);
    if (it == revs.end()) {
      problems.push_back(name + ": not in lake manifest (pinned " + expected + ")");
    } else if (!it->second.starts_with(expected)) {
      problems.push_back(name + ": revision " + it->second + " does not match pin " + expected);
    }
  }
  return problems;
}

ReplBackend::ReplBackend(ReplOptions options) : options_(std::move(options)) {
  if (options_.command.empty()) throw InvalidInput("REPL backend needs a launch command");
}

ReplBackend::~ReplBackend() = default;

void ReplBackend::handshake() {
  if (options_.pins && options_.lake_manifest) {
    try {
      const auto pins = json::parse(text::read_file(*options_.pins));
      const auto manifest = json::parse(text::read_file(*options_.lake_manifest));
      for (const auto& p : check_library_pins(pins, manifest)) spdlog::warn("library pin: {}", p);
    } catch (const std::exception& e) {
      spdlog::warn("library pin check skipped: {}", e.what());
    }
  }
  restart();
}

void ReplBackend::restart() {
  child_.reset();
  header_envs_.clear();
  child_ = std::make_unique<Subprocess>(options_.command);
}

std::optional<std::string> ReplBackend::exchange(const std::string& request,
                                                 Clock::time_point deadline) {
  try {
    // The REPL reads commands separated by a blank line.
    child_->write_all(request + "\n\n");
    std::string acc;
    for (;;) {
      auto line = child_->read_line(deadline);
      if (!line) {
        child_.reset();
        return std::nullopt;
      }
      if (text::trim(*line).empty()) {
        if (!acc.empty()) return acc;
        continue;
      }
      acc += *line;
      acc += '\n';
      if (json::accept(acc)) return acc;
    }
  } catch (const BackendCrashed&) {
    child_.reset();
    throw;
  }
}

std::optional<ReplReply> ReplBackend::run(const CompileJob& job,
                                          std::chrono::milliseconds timeout) {
  if (!child_) restart();
  const auto deadline = Clock::now() + timeout;

  std::string submission = job.submitted_text();
  std::string header;
  {
    std::string blanked;
    bool in_header = true;
    for (auto line : text::split_lines(submission)) {
      if (in_header && text::starts_with_word(line, "import")) {
        header += std::string(line) + "\n";
        blanked += "\n";
        continue;
      }
      if (!text::trim(line).empty()) in_header = false;
      blanked += std::string(line) + "\n";
    }
    if (!header.empty()) submission = std::move(blanked);
  }

  std::optional<int> env;
  if (!header.empty()) {
    if (auto it = header_envs_.find(header); it != header_envs_.end()) {
      env = it->second;
    } else {
      // Loading imports (e.g. Mathlib) is paid once per worker, outside the job budget.
      auto raw = exchange(make_repl_request(header, std::nullopt),
                          Clock::now() + std::chrono::minutes(10));
      if (!raw) throw BackendCrashed("timed out loading imports");
      const auto reply = parse_repl_message(*raw);
      if (reply.repl_error || !reply.env) {
        throw BackendCrashed("REPL rejected imports: " + reply.repl_error.value_or("no env id"));
      }
      header_envs_[header] = *reply.env;
      env = *reply.env;
    }
  }

  auto raw = exchange(make_repl_request(submission, env), deadline);
  if (!raw) return std::nullopt;
  return parse_repl_message(*raw);
}

// ---------------------------------------------------------------------------

CompilationResult compile_one(const CompileJob& job, CompilerBackend& backend) {
  CompilationResult result;
  result.candidate_id = job.candidate_id;
  result.instance_id = job.instance_id;
  result.env_line_offset = job.env_line_offset();

  const auto start = Clock::now();
  auto elapsed = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
  };

  std::optional<ReplReply> reply;
  try {
    reply = backend.run(job, std::chrono::milliseconds(std::max(job.timeout_ms, 0)));
  } catch (const std::exception& e) {
    result.status = Status::backend_error;
    result.error = e.what();
    result.elapsed_ms = elapsed();
    return result;
  }
  result.elapsed_ms = elapsed();
  if (!reply) {
    result.status = Status::timeout;
    return result;
  }
  if (reply->repl_error) {
    result.status = Status::backend_error;
    result.error = *reply->repl_error;
    return result;
  }

  auto sorries = reply->sorries;
  std::sort(sorries.begin(), sorries.end(),
            [](const SorryInfo& a, const SorryInfo& b) { return a.pos < b.pos; });
  for (auto d : reply->diagnostics) {
    // Lean reports the sorry warning at the declaration; move it onto the
    // first `sorry` inside that declaration.
    if (d.is_sorry_warning()) {
      auto it = std::find_if(sorries.begin(), sorries.end(),
                             [&](const SorryInfo& s) { return !(s.pos < d.position()); });
      if (it != sorries.end()) {
        d.line = it->pos.line;
        d.column = it->pos.column;
      }
    }
    d.environment = d.line <= result.env_line_offset;
    result.diagnostics.push_back(std::move(d));
  }
  std::stable_sort(result.diagnostics.begin(), result.diagnostics.end(),
                   [](const Diagnostic& a, const Diagnostic& b) { return a.position() < b.position(); });

  const bool env_broken =
      std::any_of(result.diagnostics.begin(), result.diagnostics.end(), [](const Diagnostic& d) {
        return d.environment && d.severity == Severity::error;
      });
  if (env_broken) {
    result.status = Status::backend_error;
    result.error = "error inside the theorem environment";
  } else {
    result.status = classify(result.diagnostics);
  }
  return result;
}

std::vector<CompilationResult> compile_batch(const std::vector<CompileJob>& jobs,
                                             const BackendFactory& factory, int workers,
                                             const std::atomic<bool>* cancel) {
  if (workers < 1) throw InvalidInput("workers must be >= 1");
  std::vector<CompilationResult> results(jobs.size());
  std::vector<char> done(jobs.size(), 0);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    std::unique_ptr<CompilerBackend> backend;
    std::string startup_error;
    try {
      backend = factory();
      backend->handshake();
    } catch (const std::exception& e) {
      startup_error = e.what();
      backend.reset();
    }
    for (;;) {
      if (cancel && cancel->load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      if (backend) {
        results[i] = compile_one(jobs[i], *backend);
      } else {
        results[i].candidate_id = jobs[i].candidate_id;
        results[i].instance_id = jobs[i].instance_id;
        results[i].env_line_offset = jobs[i].env_line_offset();
        results[i].status = Status::backend_error;
        results[i].error = "backend startup failed: " + startup_error;
      }
      done[i] = 1;
    }
  };

  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers), jobs.size());
  {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (done[i]) continue;
    results[i].candidate_id = jobs[i].candidate_id;
    results[i].instance_id = jobs[i].instance_id;
    results[i].env_line_offset = jobs[i].env_line_offset();
    results[i].status = Status::backend_error;
    results[i].error = "cancelled";
  }
  return results;
}

}  // namespace procforge::compile
