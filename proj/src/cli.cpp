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

#include "procforge/cli.hpp"

#include <algorithm>
#include <csignal>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "procforge/corpus.hpp"
#include "procforge/error.hpp"
#include "procforge/gateway.hpp"
#include "procforge/jsonl.hpp"
#include "procforge/loop.hpp"
#include "procforge/metrics.hpp"
#include "procforge/steps.hpp"
#include "procforge/text.hpp"
#include "procforge/verifier.hpp"

namespace procforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::atomic<bool>& cancel_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

namespace {

void on_sigint(int) { cancel_flag().store(true); }

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

}  // namespace

std::pair<compile::BackendFactory, std::string> make_compiler(const CompilerSelection& sel) {
  if (sel.backend == "mock") {
    const auto path = sel.fixtures.value_or(env_or("PROCFORGE_MOCK_FIXTURES", ""));
    auto fixtures = std::make_shared<const compile::MockFixtures>(
        path.empty() ? compile::MockFixtures{} : compile::MockFixtures::load(path));
    const auto desc = "mock:" + text::sha256_hex(fixtures->to_json().dump());
    compile::BackendFactory f = [fixtures] { return std::make_unique<compile::MockBackend>(fixtures); };
    return {f, desc};
  }
  if (sel.backend == "lean") {
    compile::ReplOptions opts;
    opts.command = sel.lean_cmd.value_or(env_or("PROCFORGE_LEAN_CMD", "lake exe repl"));
    if (sel.pins) opts.pins = *sel.pins;
    if (sel.lake_manifest) opts.lake_manifest = *sel.lake_manifest;
    const auto desc = "lean:" + opts.command;
    compile::BackendFactory f = [opts] { return std::make_unique<compile::ReplBackend>(opts); };
    return {f, desc};
  }
  throw InvalidInput("unknown compiler backend '" + sel.backend + "' (expected lean or mock)");
}

namespace {

struct Globals {
  std::uint64_t seed = kDefaultSeed;
  int workers = 4;
  std::string log_level = "info";
};

// Everything a subcommand reports ends up in one JSON line.
struct Context {
  std::ostream& out;
  json summary;
};

std::map<std::string, corpus::ParallelRecord> index_records(const std::vector<corpus::ParallelRecord>& rs) {
  std::map<std::string, corpus::ParallelRecord> out;
  for (const auto& r : rs) out[r.id] = r;
  return out;
}

std::vector<fs::path> lean_files(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".lean") found.push_back(e.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p)) {
      out.push_back(p);
    } else {
      throw InvalidInput("no such file or directory: " + in);
    }
  }
  return out;
}

std::vector<json> compile_rows(const std::vector<compile::CompilationResult>& rs, bool timing) {
  std::vector<json> rows;
  rows.reserve(rs.size());
  for (const auto& r : rs) rows.push_back(compile::to_json(r, timing));
  return rows;
}

std::vector<compile::CompilationResult> read_results(const fs::path& p) {
  return jsonl::read_as<compile::CompilationResult>(p);
}

std::map<std::string, std::size_t> status_counts(const std::vector<compile::CompilationResult>& rs) {
  std::map<std::string, std::size_t> c;
  for (auto s : {compile::Status::success, compile::Status::failed, compile::Status::timeout,
                 compile::Status::backend_error})
    c[std::string(compile::to_string(s))] = 0;
  for (const auto& r : rs) ++c[std::string(compile::to_string(r.status))];
  return c;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out) {
  static auto logger = [] {
    auto l = spdlog::stderr_color_mt("procforge");
    spdlog::set_default_logger(l);
    return l;
  }();
  (void)logger;

  CLI::App app{"procforge: Lean 4 compiler feedback to process supervision", "procforge"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--workers", g.workers, "Parallel workers")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  Context ctx{out, json::object()};
  std::function<void()> action;

  // extract ------------------------------------------------------------------
  std::vector<std::string> extract_in;
  std::string extract_out;
  std::optional<std::string> extract_root;
  auto* extract = app.add_subcommand("extract", "Extract theorems from .lean sources");
  extract->add_option("--input,-i", extract_in, "Source files or directories")->required();
  extract->add_option("--root", extract_root, "Record source paths relative to this directory");
  extract->add_option("--out,-o", extract_out, "Output JSON-lines")->required();
  extract->callback([&] {
    action = [&] {
      std::vector<json> rows;
      std::size_t files = 0;
      for (const auto& f : lean_files(extract_in)) {
        const auto rel = extract_root ? fs::relative(f, *extract_root) : f;
        for (auto& t : corpus::extract_theorems(text::read_file(f), rel.generic_string())) {
          corpus::ParallelRecord r;
          r.id = t.id;
          r.theorem = std::move(t);
          rows.emplace_back(r);
        }
        ++files;
      }
      jsonl::write(extract_out, rows);
      ctx.summary["files"] = files;
      ctx.summary["records"] = rows.size();
      ctx.summary["out"] = extract_out;
    };
  });

  // curate -------------------------------------------------------------------
  std::string curate_in, curate_out;
  std::optional<std::string> curate_rejected, curate_reject_list, curate_replies;
  auto* curate = app.add_subcommand("curate", "Merge informalizations and apply the curation filters");
  curate->add_option("--dataset,-d", curate_in, "Input records")->required();
  curate->add_option("--replies", curate_replies, "Informalization replies {id, reply}");
  curate->add_option("--reject-list", curate_reject_list, "File with one rejected id per line");
  curate->add_option("--rejected", curate_rejected, "Where to write {id, reason} for dropped records");
  curate->add_option("--out,-o", curate_out, "Kept records")->required();
  curate->callback([&] {
    action = [&] {
      auto records = jsonl::read_as<corpus::ParallelRecord>(curate_in);
      std::size_t malformed = 0;
      if (curate_replies) {
        std::map<std::string, std::string> replies;
        for (const auto& row : jsonl::read(*curate_replies))
          replies[row.at("id").get<std::string>()] = row.at("reply").get<std::string>();
        for (auto& r : records) {
          auto it = replies.find(r.id);
          if (it == replies.end()) continue;
          try {
            const auto parsed = corpus::parse_informalization_reply(it->second);
            r.nl_question = parsed.question;
            r.nl_answer = parsed.answer;
          } catch (const MalformedReply& e) {
            ++malformed;
            spdlog::warn("{}: {}", r.id, e.what());
          }
        }
      }
      std::set<std::string> reject_list;
      if (curate_reject_list) {
        for (auto line : text::split_lines(text::read_file(*curate_reject_list))) {
          const auto id = text::trim(line);
          if (!id.empty()) reject_list.emplace(id);
        }
      }
      const auto res = corpus::curate(records, reject_list);
      jsonl::write_as(curate_out, res.kept);
      std::map<std::string, std::size_t> reasons;
      std::vector<json> rejected;
      for (const auto& r : res.rejected) {
        ++reasons[std::string(corpus::to_string(r.reason))];
        rejected.push_back(json{{"id", r.record.id}, {"reason", corpus::to_string(r.reason)}});
      }
      if (curate_rejected) jsonl::write(*curate_rejected, rejected);
      ctx.summary["kept"] = res.kept.size();
      ctx.summary["rejected"] = reasons;
      ctx.summary["malformed_replies"] = malformed;
      ctx.summary["out"] = curate_out;
    };
  });

  // split --------------------------------------------------------------------
  std::string split_in, split_dir;
  corpus::SplitOptions split_opts;
  auto* splitc = app.add_subcommand("split", "Partition records into training/random/basic/real splits");
  splitc->add_option("--dataset,-d", split_in, "Curated records")->required();
  splitc->add_option("--out-dir", split_dir, "Directory for <split>.jsonl and <split>.manifest.json")->required();
  splitc->add_option("--ratios", split_opts.ratios, "training,random_test fractions")
      ->delimiter(',')
      ->capture_default_str();
  splitc->add_option("--basic-size", split_opts.basic_size, "Records reserved from Basic.lean sources")
      ->capture_default_str();
  splitc->callback([&] {
    action = [&] {
      split_opts.seed = g.seed;
      const auto records = jsonl::read_as<corpus::ParallelRecord>(split_in);
      const auto by_id = index_records(records);
      const auto manifests = corpus::split(records, split_opts);
      json sizes = json::object();
      for (const auto& m : manifests) {
        const std::string name(corpus::to_string(m.split_name));
        std::vector<corpus::ParallelRecord> members;
        for (const auto& id : m.ids) members.push_back(by_id.at(id));
        jsonl::write_as(fs::path(split_dir) / (name + ".jsonl"), members);
        text::write_file_atomic(fs::path(split_dir) / (name + ".manifest.json"), json(m).dump(2) + "\n");
        sizes[name] = m.ids.size();
      }
      ctx.summary["splits"] = sizes;
      ctx.summary["out"] = split_dir;
    };
  });

  // prompt -------------------------------------------------------------------
  std::string prompt_kind = "autoformalize", prompt_in, prompt_out, prompt_wrapper = "{prompt}";
  auto* prompt = app.add_subcommand("prompt", "Render informalization or autoformalization prompts");
  prompt->add_option("--kind", prompt_kind, "informalize|autoformalize")
      ->check(CLI::IsMember({"informalize", "autoformalize"}))
      ->capture_default_str();
  prompt->add_option("--dataset,-d", prompt_in, "Records")->required();
  prompt->add_option("--wrapper", prompt_wrapper, "Chat template with a {prompt} slot");
  prompt->add_option("--out,-o", prompt_out, "Output {id, prompt} JSON-lines")->required();
  prompt->callback([&] {
    action = [&] {
      std::vector<json> rows;
      std::size_t skipped = 0;
      for (const auto& r : jsonl::read_as<corpus::ParallelRecord>(prompt_in)) {
        if (prompt_kind == "informalize") {
          if (!r.theorem) {
            ++skipped;
            continue;
          }
          rows.push_back(json{{"id", r.id}, {"prompt", corpus::build_informalization_prompt(*r.theorem)}});
        } else {
          if (text::trim(r.nl_question).empty() || text::trim(r.nl_answer).empty()) {
            ++skipped;
            continue;
          }
          rows.push_back(json{{"id", r.id},
                              {"prompt", gateway::build_autoformalization_prompt(r.nl_question, r.nl_answer,
                                                                                 prompt_wrapper)}});
        }
      }
      jsonl::write(prompt_out, rows);
      ctx.summary["prompts"] = rows.size();
      ctx.summary["skipped"] = skipped;
      ctx.summary["out"] = prompt_out;
    };
  });

  // generate -----------------------------------------------------------------
  std::string gen_in, gen_out, gen_backend, gen_wrapper = "{prompt}";
  gateway::GenerationRequest gen_req;
  auto* generate = app.add_subcommand("generate", "Sample candidate formalizations");
  generate->add_option("--dataset,-d", gen_in, "Records with NL question/answer")->required();
  generate->add_option("--backend-url,--backend", gen_backend,
                       "http(s)://host:port, mock:<script>, replay:<cassette> or record:<cassette>=<url>")
      ->required();
  generate->add_option("--n", gen_req.n, "Samples per instance")->capture_default_str();
  generate->add_option("--temperature", gen_req.temperature)->capture_default_str();
  generate->add_option("--max-tokens", gen_req.max_tokens)->capture_default_str();
  generate->add_option("--wrapper", gen_wrapper, "Chat template with a {prompt} slot");
  generate->add_option("--out,-o", gen_out, "Candidates JSON-lines")->required();
  generate->callback([&] {
    action = [&] {
      gen_req.validate();
      std::vector<gateway::GenerationItem> items;
      for (const auto& r : jsonl::read_as<corpus::ParallelRecord>(gen_in)) {
        if (text::trim(r.nl_question).empty() || text::trim(r.nl_answer).empty()) continue;
        gateway::GenerationItem item{r.id, gen_req};
        item.request.prompt = gateway::build_autoformalization_prompt(r.nl_question, r.nl_answer, gen_wrapper);
        items.push_back(std::move(item));
      }
      auto backend = gateway::make_generation_backend(gen_backend);
      const auto candidates = gateway::generate_all(items, *backend, g.workers);
      jsonl::write_as(gen_out, candidates);
      ctx.summary["instances"] = items.size();
      ctx.summary["candidates"] = candidates.size();
      ctx.summary["negative"] = std::count_if(candidates.begin(), candidates.end(),
                                              [](const gateway::Candidate& c) { return c.negative; });
      ctx.summary["padded"] = std::count_if(candidates.begin(), candidates.end(),
                                            [](const gateway::Candidate& c) { return c.padded; });
      if (auto* http = dynamic_cast<gateway::HttpGenerationBackend*>(backend.get()))
        ctx.summary["retries"] = http->retry_count();
      ctx.summary["out"] = gen_out;
    };
  });

  // compile ------------------------------------------------------------------
  std::optional<std::string> comp_jobs, comp_candidates, comp_dataset;
  std::string comp_out;
  CompilerSelection comp_sel;
  int comp_timeout = compile::kDefaultTimeoutMs;
  bool comp_timing = false;
  auto* compilec = app.add_subcommand("compile", "Compile candidates through a Lean REPL or the mock");
  compilec->add_option("--jobs", comp_jobs, "CompileJob JSON-lines");
  compilec->add_option("--candidates", comp_candidates, "Candidates JSON-lines (instead of --jobs)");
  compilec->add_option("--dataset,-d", comp_dataset, "Records providing theorem environments");
  compilec->add_option("--backend", comp_sel.backend, "lean|mock")
      ->check(CLI::IsMember({"lean", "mock"}))
      ->capture_default_str();
  compilec->add_option("--lean-cmd", comp_sel.lean_cmd, "REPL launch command (PROCFORGE_LEAN_CMD)");
  compilec->add_option("--fixtures", comp_sel.fixtures, "Mock fixture map (PROCFORGE_MOCK_FIXTURES)");
  compilec->add_option("--pins", comp_sel.pins, "Expected library revisions");
  compilec->add_option("--lake-manifest", comp_sel.lake_manifest, "lake-manifest.json to check pins against");
  compilec->add_option("--timeout-ms", comp_timeout)->check(CLI::PositiveNumber)->capture_default_str();
  compilec->add_flag("--timing", comp_timing, "Include elapsed_ms in results");
  compilec->add_option("--out,-o", comp_out, "Results JSON-lines")->required();
  compilec->callback([&] {
    action = [&] {
      std::vector<compile::CompileJob> jobs;
      if (comp_jobs) {
        jobs = jsonl::read_as<compile::CompileJob>(*comp_jobs);
        for (auto& j : jobs)
          if (j.timeout_ms <= 0) j.timeout_ms = comp_timeout;
      } else if (comp_candidates) {
        std::map<std::string, std::string> envs;
        if (comp_dataset)
          for (const auto& r : jsonl::read_as<corpus::ParallelRecord>(*comp_dataset))
            envs[r.id] = r.theorem ? r.theorem->env : "";
        for (const auto& c : jsonl::read_as<gateway::Candidate>(*comp_candidates))
          jobs.push_back(loop::make_compile_job(c, envs[c.instance_id], comp_timeout));
      } else {
        throw InvalidInput("compile needs --jobs or --candidates");
      }
      const auto [factory, desc] = make_compiler(comp_sel);
      const auto results = compile::compile_batch(jobs, factory, g.workers, &cancel_flag());
      jsonl::write(comp_out, compile_rows(results, comp_timing));
      ctx.summary["jobs"] = jobs.size();
      ctx.summary["status"] = status_counts(results);
      ctx.summary["backend"] = desc;
      ctx.summary["out"] = comp_out;
      if (cancel_flag().load()) {
        text::write_file_atomic(comp_out + ".partial", "interrupted\n");
        ctx.summary["partial"] = true;
      }
    };
  });

  // label --------------------------------------------------------------------
  std::string label_cands, label_results, label_out, label_scheme = "process";
  auto* label = app.add_subcommand("label", "Derive step labels from compilation results");
  label->add_option("--candidates", label_cands, "Candidates JSON-lines")->required();
  label->add_option("--results", label_results, "Results JSON-lines")->required();
  label->add_option("--scheme", label_scheme, "process|outcome")
      ->check(CLI::IsMember({"process", "outcome"}))
      ->capture_default_str();
  label->add_option("--out,-o", label_out, "StepLabels JSON-lines")->required();
  label->callback([&] {
    action = [&] {
      const auto candidates = jsonl::read_as<gateway::Candidate>(label_cands);
      const auto results = read_results(label_results);
      const auto labels =
          loop::label_candidates(candidates, results, steps::scheme_from_string(label_scheme));
      jsonl::write_as(label_out, labels);
      ctx.summary["labeled"] = labels.size();
      ctx.summary["skipped"] = candidates.size() - labels.size();
      ctx.summary["out"] = label_out;
    };
  });

  // score --------------------------------------------------------------------
  std::string score_cands, score_out, score_scorer = "toy", score_agg = "min";
  std::optional<std::string> score_dataset;
  std::string score_wrapper = "{prompt}";
  auto* score = app.add_subcommand("score", "Score candidate steps with a verifier");
  score->add_option("--candidates", score_cands, "Candidates JSON-lines")->required();
  score->add_option("--dataset,-d", score_dataset, "Records used to rebuild prompts");
  score->add_option("--wrapper", score_wrapper, "Chat template with a {prompt} slot");
  score->add_option("--scorer", score_scorer, "toy, const:<p> or an http(s) URL")->capture_default_str();
  score->add_option("--aggregation", score_agg, "min|product|last")
      ->check(CLI::IsMember({"min", "product", "last"}))
      ->capture_default_str();
  score->add_option("--out,-o", score_out, "VerifierScore JSON-lines")->required();
  score->callback([&] {
    action = [&] {
      std::map<std::string, std::string> prompts;
      if (score_dataset)
        for (const auto& r : jsonl::read_as<corpus::ParallelRecord>(*score_dataset))
          if (!text::trim(r.nl_question).empty() && !text::trim(r.nl_answer).empty())
            prompts[r.id] = gateway::build_autoformalization_prompt(r.nl_question, r.nl_answer, score_wrapper);
      std::vector<verifier::ScoringItem> items;
      for (const auto& c : jsonl::read_as<gateway::Candidate>(score_cands)) {
        verifier::ScoringItem item{c.candidate_id, c.instance_id, prompts[c.instance_id], {}};
        for (const auto& s : steps::segment_proof(c.text)) item.steps.push_back(s.text);
        items.push_back(std::move(item));
      }
      auto scorer = verifier::make_scorer(score_scorer);
      verifier::ScoreOptions opts;
      opts.aggregation = verifier::aggregation_from_string(score_agg);
      opts.max_in_flight = g.workers;
      const auto scores = verifier::score_candidates(items, *scorer, opts);
      jsonl::write_as(score_out, scores);
      ctx.summary["scored"] = scores.size();
      ctx.summary["predicted_correct"] = loop::filter_verifier(scores).size();
      ctx.summary["out"] = score_out;
    };
  });

  // select -------------------------------------------------------------------
  std::string select_mode = "mp1", select_out;
  std::optional<std::string> select_scores, select_results;
  auto* select = app.add_subcommand("select", "MP1 selection or RFT/verifier filtering");
  select->add_option("--mode", select_mode, "mp1|rft|verifier|both")
      ->check(CLI::IsMember({"mp1", "rft", "verifier", "both"}))
      ->capture_default_str();
  select->add_option("--scores", select_scores, "VerifierScore JSON-lines");
  select->add_option("--results", select_results, "Results JSON-lines");
  select->add_option("--out,-o", select_out, "Selected ids JSON-lines")->required();
  select->callback([&] {
    action = [&] {
      auto need = [](const std::optional<std::string>& p, const char* flag) -> const std::string& {
        if (!p) throw InvalidInput(fmt::format("this mode needs {}", flag));
        return *p;
      };
      std::vector<json> rows;
      if (select_mode == "mp1") {
        const auto scores = jsonl::read_as<verifier::VerifierScore>(need(select_scores, "--scores"));
        std::size_t fallbacks = 0;
        for (const auto& [instance, sel] : verifier::select_per_instance(scores)) {
          rows.push_back(json{{"instance_id", instance}, {"candidate_id", sel.candidate_id}, {"fallback", sel.fallback}});
          fallbacks += sel.fallback ? 1 : 0;
        }
        ctx.summary["fallbacks"] = fallbacks;
      } else {
        std::vector<std::string> ids;
        if (select_mode == "rft") {
          ids = loop::filter_rft(read_results(need(select_results, "--results")));
        } else if (select_mode == "verifier") {
          ids = loop::filter_verifier(jsonl::read_as<verifier::VerifierScore>(need(select_scores, "--scores")));
        } else {
          ids = loop::filter_both(read_results(need(select_results, "--results")),
                                  jsonl::read_as<verifier::VerifierScore>(need(select_scores, "--scores")));
        }
        for (const auto& id : ids) rows.push_back(json{{"candidate_id", id}});
        if (select_results) {
          const auto q = loop::dataset_quality(ids, read_results(*select_results));
          ctx.summary["dataset_quality"] = q ? json(*q) : json(nullptr);
        }
      }
      jsonl::write(select_out, rows);
      ctx.summary["mode"] = select_mode;
      ctx.summary["selected"] = rows.size();
      ctx.summary["out"] = select_out;
    };
  });

  // evaluate -----------------------------------------------------------------
  std::string eval_results;
  std::optional<std::string> eval_scores, eval_greedy, eval_out;
  std::vector<int> eval_k{1, 5};
  auto* evaluate = app.add_subcommand("evaluate", "Greedy rate, pass@k, MP1, precision and recall");
  evaluate->add_option("--results", eval_results, "Results of the sampled candidates")->required();
  evaluate->add_option("--scores", eval_scores, "Verifier scores for the same candidates");
  evaluate->add_option("--greedy", eval_greedy, "Results of greedy (temperature 0) decoding");
  evaluate->add_option("--k", eval_k, "k values")->delimiter(',')->capture_default_str();
  evaluate->add_option("--out,-o", eval_out, "Report JSON");
  evaluate->callback([&] {
    action = [&] {
      metrics::EvalInputs in;
      in.results = read_results(eval_results);
      if (eval_scores) in.scores = jsonl::read_as<verifier::VerifierScore>(*eval_scores);
      if (eval_greedy) in.greedy_results = read_results(*eval_greedy);
      in.ks = eval_k;
      in.seed = g.seed;
      const auto report = metrics::to_json(metrics::evaluate(in));
      if (eval_out) text::write_file_atomic(*eval_out, report.dump(2) + "\n");
      ctx.summary["report"] = report;
      if (eval_out) ctx.summary["out"] = *eval_out;
    };
  });

  // loop ---------------------------------------------------------------------
  loop::RoundConfig round;
  std::string loop_policy = "both", loop_workspace, loop_dataset;
  std::optional<std::string> loop_gen, loop_candidates, loop_webhook;
  std::string loop_scorer, loop_agg = "min";
  CompilerSelection loop_sel;
  auto* loopc = app.add_subcommand("loop", "Enhancement loop");
  loopc->require_subcommand(1);
  auto* run = loopc->add_subcommand("run", "Run one round");
  run->add_option("--policy", loop_policy, "rft|verifier|both")
      ->check(CLI::IsMember({"rft", "verifier", "both", "rft_and_verifier"}))
      ->capture_default_str();
  run->add_option("--workspace", loop_workspace, "Workspace directory")->required();
  run->add_option("--dataset,-d", loop_dataset, "Records with NL pairs and theorem environments")->required();
  run->add_option("--round", round.round, "Round index")->capture_default_str();
  run->add_option("--gen-backend", loop_gen, "Generation backend (see generate --backend-url)");
  run->add_option("--candidates", loop_candidates, "Bootstrap round 0 from this candidate file");
  run->add_option("--wrapper", round.prompt_wrapper, "Chat template with a {prompt} slot");
  run->add_option("--n", round.n, "Samples per instance")->capture_default_str();
  run->add_option("--temperature", round.temperature)->capture_default_str();
  run->add_option("--max-tokens", round.max_tokens)->capture_default_str();
  run->add_option("--scorer", loop_scorer, "toy, const:<p> or an http(s) URL");
  run->add_option("--aggregation", loop_agg)->check(CLI::IsMember({"min", "product", "last"}))->capture_default_str();
  run->add_option("--compiler", loop_sel.backend, "lean|mock")
      ->check(CLI::IsMember({"lean", "mock"}))
      ->capture_default_str();
  run->add_option("--lean-cmd", loop_sel.lean_cmd, "REPL launch command (PROCFORGE_LEAN_CMD)");
  run->add_option("--fixtures", loop_sel.fixtures, "Mock fixture map (PROCFORGE_MOCK_FIXTURES)");
  run->add_option("--timeout-ms", round.timeout_ms)->check(CLI::PositiveNumber)->capture_default_str();
  run->add_option("--webhook", loop_webhook, "POST {round, dataset_path} here when done");
  run->callback([&] {
    action = [&] {
      round.workspace = loop_workspace;
      round.dataset = loop_dataset;
      round.policy = loop::policy_from_string(loop_policy);
      if (loop_gen) round.gen_backend = *loop_gen;
      if (loop_candidates) round.candidates = fs::path(*loop_candidates);
      round.scorer = loop_scorer;
      round.aggregation = verifier::aggregation_from_string(loop_agg);
      round.webhook = loop_webhook;
      round.workers = g.workers;
      round.cancel = &cancel_flag();
      auto [factory, desc] = make_compiler(loop_sel);
      round.compiler_factory = std::move(factory);
      round.compiler = desc;
      const auto m = loop::run_round(round);
      if (m.already_complete) spdlog::info("round {} already complete", m.round);
      ctx.summary["round"] = m.round;
      ctx.summary["status"] = m.partial ? "partial" : m.already_complete ? "already complete" : "complete";
      if (!m.partial) ctx.summary["manifest"] = loop::to_json(m);
    };
  });

  // stats --------------------------------------------------------------------
  std::string stats_in;
  std::vector<std::string> stats_manifests;
  bool stats_json = false;
  auto* stats = app.add_subcommand("stats", "Character-count statistics per split");
  stats->add_option("--dataset,-d", stats_in, "Records")->required();
  stats->add_option("--manifest", stats_manifests, "Split manifests (one row each)");
  stats->add_flag("--json", stats_json, "Print the table as JSON instead of text");
  stats->callback([&] {
    action = [&] {
      const auto records = jsonl::read_as<corpus::ParallelRecord>(stats_in);
      std::vector<corpus::SplitManifest> manifests;
      for (const auto& p : stats_manifests)
        manifests.push_back(json::parse(text::read_file(p)).get<corpus::SplitManifest>());
      const auto rows = metrics::dataset_stats(records, manifests);
      if (stats_json) {
        ctx.summary["rows"] = metrics::stats_to_json(rows);
      } else {
        out << metrics::format_stats_table(rows);
        ctx.summary["rows"] = rows.size();
      }
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    out << json{{"ok", false}, {"error", e.what()}, {"kind", "usage"}}.dump() << '\n';
    return kValidation;
  }

  spdlog::set_level(spdlog::level::from_str(g.log_level));
  std::string command;
  for (const auto* sub : app.get_subcommands()) {
    command = sub->get_name();
    for (const auto* inner : sub->get_subcommands()) command += " " + inner->get_name();
  }
  ctx.summary["command"] = command;

  cancel_flag().store(false);
  auto previous = std::signal(SIGINT, on_sigint);
  int code = kOk;
  try {
    if (action) action();
    ctx.summary["ok"] = true;
    if (ctx.summary.contains("partial")) code = kBackend;
  } catch (const Error& e) {
    code = e.kind() == ErrorKind::backend ? kBackend : kValidation;
    spdlog::error("{}", e.what());
    ctx.summary["ok"] = false;
    ctx.summary["error"] = e.what();
    ctx.summary["kind"] = e.kind() == ErrorKind::backend ? "backend" : "validation";
  } catch (const json::exception& e) {
    code = kValidation;
    spdlog::error("malformed JSON: {}", e.what());
    ctx.summary["ok"] = false;
    ctx.summary["error"] = e.what();
    ctx.summary["kind"] = "validation";
  } catch (const fs::filesystem_error& e) {
    code = kValidation;
    spdlog::error("{}", e.what());
    ctx.summary["ok"] = false;
    ctx.summary["error"] = e.what();
    ctx.summary["kind"] = "validation";
  } catch (const std::exception& e) {
    code = kBackend;
    spdlog::error("{}", e.what());
    ctx.summary["ok"] = false;
    ctx.summary["error"] = e.what();
    ctx.summary["kind"] = "backend";
  }
  std::signal(SIGINT, previous);
  out << ctx.summary.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  return code;
}

}  // namespace procforge::cli
