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

#include "procforge/loop.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "procforge/error.hpp"
#include "procforge/http.hpp"
#include "procforge/jsonl.hpp"
#include "procforge/text.hpp"

namespace procforge::loop {

namespace fs = std::filesystem;
using compile::CompilationResult;
using compile::Status;
using gateway::Candidate;
using nlohmann::json;

std::string_view to_string(FilterPolicy p) {
  switch (p) {
    case FilterPolicy::rft: return "rft";
    case FilterPolicy::verifier: return "verifier";
    case FilterPolicy::rft_and_verifier: return "rft_and_verifier";
  }
  return "rft";
}

FilterPolicy policy_from_string(std::string_view s) {
  if (s == "rft") return FilterPolicy::rft;
  if (s == "verifier") return FilterPolicy::verifier;
  if (s == "both" || s == "rft_and_verifier") return FilterPolicy::rft_and_verifier;
  throw InvalidInput(fmt::format("unknown filter policy '{}'", s));
}

std::vector<std::string> filter_rft(const std::vector<CompilationResult>& results) {
  std::vector<std::string> out;
  for (const auto& r : results)
    if (r.status == Status::success) out.push_back(r.candidate_id);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> filter_verifier(const std::vector<verifier::VerifierScore>& scores) {
  std::vector<std::string> out;
  for (const auto& s : scores)
    if (s.predicted_label == steps::Label::correct) out.push_back(s.candidate_id);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> filter_both(const std::vector<CompilationResult>& results,
                                     const std::vector<verifier::VerifierScore>& scores) {
  const auto a = filter_rft(results);
  const auto b = filter_verifier(scores);
  std::vector<std::string> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::optional<double> dataset_quality(const std::vector<std::string>& selected,
                                      const std::vector<CompilationResult>& results) {
  if (selected.empty()) return std::nullopt;
  std::set<std::string> ok;
  for (const auto& r : results)
    if (r.status == Status::success) ok.insert(r.candidate_id);
  const auto hits = std::count_if(selected.begin(), selected.end(),
                                  [&](const std::string& id) { return ok.contains(id); });
  return static_cast<double>(hits) / static_cast<double>(selected.size());
}

std::size_t emit_sft_dataset(const std::vector<std::string>& selected, const std::vector<Candidate>& candidates,
                             const std::map<std::string, std::string>& prompts, const fs::path& out) {
  const std::set<std::string> chosen(selected.begin(), selected.end());
  std::vector<const Candidate*> rows;
  for (const auto& c : candidates)
    if (chosen.contains(c.candidate_id)) rows.push_back(&c);
  if (rows.size() != chosen.size()) throw KeyMismatch("selected ids missing from the candidate set");
  std::sort(rows.begin(), rows.end(), [](const Candidate* a, const Candidate* b) {
    return std::tie(a->instance_id, a->candidate_id) < std::tie(b->instance_id, b->candidate_id);
  });
  std::vector<json> lines;
  for (const auto* c : rows) {
    auto it = prompts.find(c->instance_id);
    if (it == prompts.end()) throw KeyMismatch("no prompt for instance " + c->instance_id);
    lines.push_back(json{{"prompt", it->second}, {"completion", c->text}});
  }
  if (lines.empty()) spdlog::warn("empty selection; {} will be empty", out.string());
  jsonl::write(out, lines);
  return lines.size();
}

std::size_t emit_verifier_dataset(const std::vector<steps::StepLabels>& labels, const fs::path& out) {
  jsonl::write_as(out, labels);
  return labels.size();
}

compile::CompileJob make_compile_job(const Candidate& c, const std::string& env, int timeout_ms) {
  compile::CompileJob job;
  job.candidate_id = c.candidate_id;
  job.instance_id = c.instance_id;
  job.body = c.text;
  job.env = text::starts_with_word(text::ltrim(c.text), "import") ? "" : env;
  job.timeout_ms = timeout_ms;
  return job;
}

std::vector<steps::StepLabels> label_candidates(const std::vector<Candidate>& candidates,
                                                const std::vector<CompilationResult>& results,
                                                steps::Scheme scheme) {
  std::map<std::string, const CompilationResult*> by_id;
  for (const auto& r : results) by_id[r.candidate_id] = &r;
  std::vector<steps::StepLabels> out;
  for (const auto& c : candidates) {
    auto it = by_id.find(c.candidate_id);
    if (it == by_id.end()) throw MissingResult("no compilation result for " + c.candidate_id);
    const auto& r = *it->second;
    if (r.status == Status::timeout || r.status == Status::backend_error) continue;
    const auto segs = steps::segment_proof(c.text);
    if (segs.empty()) continue;
    const auto body = compile::to_body_coordinates(r);
    out.push_back(scheme == steps::Scheme::process ? steps::label_process(segs, body)
                                                   : steps::label_outcome(segs, body));
  }
  return out;
}

// ---------------------------------------------------------------------------

json to_json(const RoundManifest& m) {
  return json{{"round", m.round},
              {"workspace", m.workspace},
              {"policy", to_string(m.policy)},
              {"counts",
               {{"generated", m.counts.generated},
                {"compiled_success", m.counts.compiled_success},
                {"selected_rft", m.counts.selected_rft},
                {"selected_verifier", m.counts.selected_verifier},
                {"selected_both", m.counts.selected_both}}},
              {"dataset_quality", m.dataset_quality ? json(*m.dataset_quality) : json(nullptr)},
              {"sft_records", m.sft_records},
              {"verifier_records", m.verifier_records},
              {"input_hash", m.input_hash},
              {"files", m.files},
              {"created_at", m.created_at}};
}

RoundManifest manifest_from_json(const json& j) {
  RoundManifest m;
  m.round = j.at("round").get<int>();
  m.workspace = j.value("workspace", "");
  m.policy = policy_from_string(j.at("policy").get<std::string>());
  const auto& c = j.at("counts");
  m.counts.generated = c.at("generated").get<std::size_t>();
  m.counts.compiled_success = c.at("compiled_success").get<std::size_t>();
  m.counts.selected_rft = c.at("selected_rft").get<std::size_t>();
  m.counts.selected_verifier = c.at("selected_verifier").get<std::size_t>();
  m.counts.selected_both = c.at("selected_both").get<std::size_t>();
  if (j.contains("dataset_quality") && !j.at("dataset_quality").is_null())
    m.dataset_quality = j.at("dataset_quality").get<double>();
  m.sft_records = j.value("sft_records", std::size_t{0});
  m.verifier_records = j.value("verifier_records", std::size_t{0});
  m.input_hash = j.value("input_hash", "");
  m.files = j.value("files", std::map<std::string, std::string>{});
  m.created_at = j.value("created_at", "");
  return m;
}

fs::path round_dir(const fs::path& workspace, int round) {
  return workspace / "rounds" / std::to_string(round);
}

namespace {

std::string file_hash(const fs::path& p) { return text::sha256_hex(text::read_file(p)); }

std::optional<RoundManifest> read_manifest(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  if (!fs::exists(path)) return std::nullopt;
  try {
    return manifest_from_json(json::parse(text::read_file(path)));
  } catch (const json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

std::string utc_now() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                  std::chrono::system_clock::now())));
}

void post_webhook(const std::string& url, int round, const fs::path& dataset) {
  try {
    http::post_json(http::parse_url(url, "/"), json{{"round", round}, {"dataset_path", dataset.string()}},
                    5'000);
  } catch (const std::exception& e) {
    spdlog::warn("webhook {} failed: {}", url, e.what());
  }
}

}  // namespace

std::string input_hash(const RoundConfig& cfg) {
  json h{{"round", cfg.round},
         {"policy", to_string(cfg.policy)},
         {"dataset", fs::exists(cfg.dataset) ? file_hash(cfg.dataset) : ""},
         {"candidates", cfg.candidates ? json(file_hash(*cfg.candidates)) : json(nullptr)},
         {"gen_backend", cfg.candidates ? "" : cfg.gen_backend},
         {"prompt_wrapper", cfg.prompt_wrapper},
         {"n", cfg.n},
         {"temperature", cfg.temperature},
         {"max_tokens", cfg.max_tokens},
         {"compiler", cfg.compiler},
         {"timeout_ms", cfg.timeout_ms},
         {"scorer", cfg.scorer},
         {"aggregation", verifier::to_string(cfg.aggregation)}};
  if (cfg.round > 0) {
    const auto prev = read_manifest(round_dir(cfg.workspace, cfg.round - 1));
    h["previous"] = prev ? prev->input_hash : "";
  }
  return text::sha256_hex(h.dump());
}

RoundManifest run_round(const RoundConfig& cfg) {
  if (cfg.round < 0) throw InvalidInput("round must be >= 0");
  if (!fs::exists(cfg.dataset)) throw StalePipeline("dataset " + cfg.dataset.string() + " does not exist");
  if (cfg.round > 0 && !read_manifest(round_dir(cfg.workspace, cfg.round - 1))) {
    throw StalePipeline(fmt::format("round {} has no manifest; run it first", cfg.round - 1));
  }
  if (cfg.candidates && cfg.round > 0) throw InvalidInput("only round 0 may bootstrap from a candidate file");
  if (cfg.candidates && !fs::exists(*cfg.candidates))
    throw StalePipeline("candidate file " + cfg.candidates->string() + " does not exist");
  if (cfg.policy != FilterPolicy::rft && cfg.scorer.empty())
    throw InvalidInput(fmt::format("policy {} needs a scorer", to_string(cfg.policy)));
  if (!cfg.candidates && cfg.gen_backend.empty()) throw InvalidInput("no generation backend configured");
  if (!cfg.compiler_factory) throw InvalidInput("no compiler backend configured");

  const auto dir = round_dir(cfg.workspace, cfg.round);
  const auto hash = input_hash(cfg);
  if (auto done = read_manifest(dir)) {
    if (done->input_hash != hash) {
      throw RoundConflict(fmt::format("round {} was already completed with different inputs", cfg.round));
    }
    done->already_complete = true;
    return *done;
  }
  fs::create_directories(dir);
  if (cfg.round > 0) spdlog::warn("rounds beyond 0 are experimental");

  // Prompts and environments per instance.
  const auto records = jsonl::read_as<corpus::ParallelRecord>(cfg.dataset);
  std::map<std::string, std::string> prompts;
  std::map<std::string, std::string> envs;
  std::vector<gateway::GenerationItem> items;
  for (const auto& r : records) {
    envs[r.id] = r.theorem ? r.theorem->env : "";
    if (text::trim(r.nl_question).empty() || text::trim(r.nl_answer).empty()) {
      spdlog::warn("{}: no natural-language pair; skipped", r.id);
      continue;
    }
    prompts[r.id] = gateway::build_autoformalization_prompt(r.nl_question, r.nl_answer, cfg.prompt_wrapper);
    gateway::GenerationItem item;
    item.instance_id = r.id;
    item.request.prompt = prompts[r.id];
    item.request.n = cfg.n;
    item.request.temperature = cfg.temperature;
    item.request.max_tokens = cfg.max_tokens;
    items.push_back(std::move(item));
  }

  // 1. Candidates.
  std::vector<Candidate> candidates;
  if (cfg.candidates) {
    candidates = jsonl::read_as<Candidate>(*cfg.candidates);
    for (const auto& c : candidates)
      if (!prompts.contains(c.instance_id))
        throw KeyMismatch(fmt::format("candidate {} refers to unknown instance '{}'", c.candidate_id, c.instance_id));
  } else {
    auto backend = gateway::make_generation_backend(cfg.gen_backend);
    candidates = gateway::generate_all(items, *backend, cfg.workers);
  }
  jsonl::write_as(dir / "candidates.jsonl", candidates);

  // 2. Compilation. Negative candidates are failures without a compiler run.
  std::vector<compile::CompileJob> jobs;
  for (const auto& c : candidates)
    if (!c.negative) jobs.push_back(make_compile_job(c, envs[c.instance_id], cfg.timeout_ms));
  auto compiled = compile::compile_batch(jobs, cfg.compiler_factory, cfg.workers, cfg.cancel);
  if (cfg.cancel && cfg.cancel->load()) {
    text::write_file_atomic(dir / ".partial", "compilation interrupted\n");
    RoundManifest m;
    m.round = cfg.round;
    m.workspace = cfg.workspace.string();
    m.policy = cfg.policy;
    m.partial = true;
    return m;
  }
  std::map<std::string, CompilationResult> by_id;
  for (auto& r : compiled) by_id[r.candidate_id] = std::move(r);
  std::vector<CompilationResult> results;
  for (const auto& c : candidates) {
    if (auto it = by_id.find(c.candidate_id); it != by_id.end()) {
      results.push_back(it->second);
    } else {
      CompilationResult r;
      r.candidate_id = c.candidate_id;
      r.instance_id = c.instance_id;
      r.status = Status::failed;
      r.error = "no Lean output";
      results.push_back(std::move(r));
    }
  }
  {
    std::vector<json> rows;
    for (const auto& r : results) rows.push_back(compile::to_json(r, false));
    jsonl::write(dir / "results.jsonl", rows);
  }

  // 3. Verifier scores.
  std::vector<verifier::VerifierScore> scores;
  if (!cfg.scorer.empty()) {
    auto scorer = verifier::make_scorer(cfg.scorer);
    std::vector<verifier::ScoringItem> scoring;
    for (const auto& c : candidates) {
      verifier::ScoringItem item{c.candidate_id, c.instance_id, prompts[c.instance_id], {}};
      for (const auto& s : steps::segment_proof(c.text)) item.steps.push_back(s.text);
      scoring.push_back(std::move(item));
    }
    verifier::ScoreOptions opts;
    opts.aggregation = cfg.aggregation;
    opts.max_in_flight = cfg.workers;
    scores = verifier::score_candidates(scoring, *scorer, opts);
  }
  jsonl::write_as(dir / "scores.jsonl", scores);

  // 4. Labels from this round's compiler feedback.
  const auto process = label_candidates(candidates, results, steps::Scheme::process);
  const auto outcome = label_candidates(candidates, results, steps::Scheme::outcome);
  {
    std::vector<json> rows;
    for (std::size_t i = 0; i < process.size(); ++i) {
      rows.emplace_back(process[i]);
      rows.emplace_back(outcome[i]);
    }
    jsonl::write(dir / "labels.jsonl", rows);
  }

  // 5. Filters and datasets.
  const auto rft = filter_rft(results);
  const auto ver = filter_verifier(scores);
  const auto both = filter_both(results, scores);
  const auto& selected =
      cfg.policy == FilterPolicy::rft ? rft : cfg.policy == FilterPolicy::verifier ? ver : both;

  RoundManifest m;
  m.round = cfg.round;
  m.workspace = cfg.workspace.string();
  m.policy = cfg.policy;
  m.counts.generated = candidates.size();
  m.counts.compiled_success = rft.size();
  m.counts.selected_rft = rft.size();
  m.counts.selected_verifier = ver.size();
  m.counts.selected_both = both.size();
  m.dataset_quality = dataset_quality(selected, results);
  m.sft_records = emit_sft_dataset(selected, candidates, prompts, dir / "sft.jsonl");
  m.verifier_records = emit_verifier_dataset(process, dir / "verifier.jsonl");
  m.input_hash = hash;
  for (const char* name : {"candidates", "results", "scores", "labels", "sft", "verifier"}) {
    m.files[name] = file_hash(dir / (std::string(name) + ".jsonl"));
  }
  m.created_at = utc_now();
  fs::remove(dir / ".partial");
  text::write_file_atomic(dir / "manifest.json", to_json(m).dump(2) + "\n");

  if (cfg.webhook) post_webhook(*cfg.webhook, cfg.round, dir / "sft.jsonl");
  return m;
}

}  // namespace procforge::loop
