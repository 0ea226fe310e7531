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

#include <doctest.h>

#include <httplib.h>

#include <mutex>
#include <set>
#include <thread>

#include "loop_fixture.hpp"
#include "procforge/error.hpp"
#include "procforge/jsonl.hpp"
#include "procforge/loop.hpp"
#include "procforge/metrics.hpp"
#include "test_util.hpp"

using namespace procforge;
using namespace procforge::loop;
using compile::CompilationResult;
using compile::Status;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

CompilationResult result(const std::string& id, Status s) {
  CompilationResult r;
  r.candidate_id = id;
  r.instance_id = id.substr(0, id.find('/'));
  r.status = s;
  return r;
}

std::vector<std::string> ids_with(const json& categories, const std::string& letters) {
  std::vector<std::string> out;
  for (const auto& [id, cat] : categories.items())
    if (letters.find(cat.get<std::string>()) != std::string::npos) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("filters on a 100-candidate batch with 65 successes") {
  std::vector<CompilationResult> results;
  std::vector<verifier::VerifierScore> scores;
  for (int i = 0; i < 100; ++i) {
    const auto id = gateway::candidate_id("x" + std::to_string(i / 10), i % 10);
    results.push_back(result(id, i < 65 ? Status::success : (i % 2 ? Status::failed : Status::timeout)));
    scores.push_back(verifier::make_score(id, "x", {i % 3 == 0 ? 0.2 : 0.9}));
  }
  const auto rft = filter_rft(results);
  const auto ver = filter_verifier(scores);
  const auto both = filter_both(results, scores);
  CHECK(rft.size() == 65);
  CHECK(ver.size() == 66);
  std::vector<std::string> expected;
  std::set_intersection(rft.begin(), rft.end(), ver.begin(), ver.end(), std::back_inserter(expected));
  CHECK(both == expected);
  CHECK(std::includes(rft.begin(), rft.end(), both.begin(), both.end()));
  CHECK(std::includes(ver.begin(), ver.end(), both.begin(), both.end()));
  CHECK(dataset_quality(rft, results) == 1.0);
  CHECK(dataset_quality(both, results) == 1.0);
  CHECK(dataset_quality(ver, results) == metrics::precision_recall(scores, results).precision);
  CHECK_FALSE(dataset_quality({}, results).has_value());
}

TEST_CASE("policy names") {
  CHECK(policy_from_string("both") == FilterPolicy::rft_and_verifier);
  CHECK(policy_from_string("rft_and_verifier") == FilterPolicy::rft_and_verifier);
  CHECK(policy_from_string("rft") == FilterPolicy::rft);
  CHECK(to_string(FilterPolicy::verifier) == "verifier");
  CHECK_THROWS_AS(policy_from_string("all"), InvalidInput);
}

TEST_CASE("SFT emission is ordered and byte-stable") {
  testutil::TempDir dir;
  const std::vector<gateway::Candidate> cands = {{"b/001", "b", "theorem b1 : True := trivial", {}, false, false},
                                                 {"a/000", "a", "theorem a0 : True := trivial", {}, false, false},
                                                 {"b/000", "b", "theorem b0 : True := trivial", {}, false, false}};
  const std::map<std::string, std::string> prompts = {{"a", "PA"}, {"b", "PB"}};
  CHECK(emit_sft_dataset({"b/001", "a/000", "b/000"}, cands, prompts, dir / "one.jsonl") == 3);
  CHECK(emit_sft_dataset({"b/000", "b/001", "a/000"}, cands, prompts, dir / "two.jsonl") == 3);
  const auto one = text::read_file(dir / "one.jsonl");
  CHECK(one == text::read_file(dir / "two.jsonl"));
  const auto rows = jsonl::read(dir / "one.jsonl");
  CHECK(rows[0] == json{{"prompt", "PA"}, {"completion", "theorem a0 : True := trivial"}});
  CHECK(rows[1]["completion"] == "theorem b0 : True := trivial");
  CHECK(emit_sft_dataset({}, cands, prompts, dir / "empty.jsonl") == 0);
  CHECK(text::read_file(dir / "empty.jsonl").empty());
}

TEST_CASE("compile jobs keep standalone candidates standalone") {
  gateway::Candidate c{"a/000", "a", "theorem t : True := trivial", {}, false, false};
  const auto with_env = make_compile_job(c, "import Mathlib", 1000);
  CHECK(with_env.env == "import Mathlib");
  CHECK(with_env.timeout_ms == 1000);
  c.text = "import Mathlib\ntheorem t : True := trivial";
  CHECK(make_compile_job(c, "import Mathlib", 1000).env.empty());
}

TEST_CASE("end-to-end round on the bundled fixture") {
  const auto expected = testutil::load_json(testutil::fixtures() / "loop/expected.json");
  const auto categories = testutil::load_json(testutil::fixtures() / "loop/categories.json");
  for (const auto& [name, want] : expected["policies"].items()) {
    CAPTURE(name);
    testutil::TempDir ws;
    const auto cfg = testutil::fixture_round(ws.path(), policy_from_string(name));
    const auto m = run_round(cfg);
    CHECK_FALSE(m.already_complete);
    CHECK(m.counts.generated == expected["counts"]["generated"].get<std::size_t>());
    CHECK(m.counts.compiled_success == expected["counts"]["compiled_success"].get<std::size_t>());
    CHECK(m.counts.selected_rft == expected["counts"]["selected_rft"].get<std::size_t>());
    CHECK(m.counts.selected_verifier == expected["counts"]["selected_verifier"].get<std::size_t>());
    CHECK(m.counts.selected_both == expected["counts"]["selected_both"].get<std::size_t>());
    REQUIRE(m.dataset_quality.has_value());
    CHECK(*m.dataset_quality == doctest::Approx(want["dataset_quality"].get<double>()));
    CHECK(m.sft_records == want["sft_records"].get<std::size_t>());
    CHECK(m.verifier_records == expected["verifier_records"].get<std::size_t>());

    const auto dir = round_dir(ws.path(), 0);
    for (const char* f : {"candidates.jsonl", "results.jsonl", "scores.jsonl", "labels.jsonl", "sft.jsonl",
                          "verifier.jsonl", "manifest.json"})
      CHECK(fs::exists(dir / f));
    CHECK_FALSE(fs::exists(dir / ".partial"));

    const auto candidates = jsonl::read_as<gateway::Candidate>(dir / "candidates.jsonl");
    CHECK(std::count_if(candidates.begin(), candidates.end(), [](const auto& c) { return c.negative; }) ==
          expected["negative_candidates"].get<long>());
    CHECK(std::count_if(candidates.begin(), candidates.end(), [](const auto& c) { return c.padded; }) ==
          expected["padded_candidates"].get<long>());
    const auto results = jsonl::read_as<CompilationResult>(dir / "results.jsonl");
    CHECK(std::count_if(results.begin(), results.end(), [](const auto& r) { return r.status == Status::timeout; }) ==
          expected["timeouts"].get<long>());
    const auto scores = jsonl::read_as<verifier::VerifierScore>(dir / "scores.jsonl");

    // Per-candidate trace.
    CHECK(filter_rft(results) == ids_with(categories, "AB"));
    CHECK(filter_verifier(scores) == ids_with(categories, "ACT"));
    CHECK(filter_both(results, scores) == ids_with(categories, "A"));
    if (name == "verifier") {
      CHECK(*m.dataset_quality == metrics::precision_recall(scores, results).precision);
    }

    // Rerun is a no-op.
    const auto before = text::read_file(dir / "manifest.json");
    const auto again = run_round(cfg);
    CHECK(again.already_complete);
    CHECK(again.counts == m.counts);
    CHECK(text::read_file(dir / "manifest.json") == before);
  }
}

TEST_CASE("two workspaces produce byte-identical datasets") {
  testutil::TempDir a, b;
  const auto ma = run_round(testutil::fixture_round(a.path(), FilterPolicy::rft_and_verifier));
  auto cfg_b = testutil::fixture_round(b.path(), FilterPolicy::rft_and_verifier);
  cfg_b.workers = 1;
  const auto mb = run_round(cfg_b);
  CHECK(ma.files == mb.files);
  CHECK(text::read_file(round_dir(a.path(), 0) / "sft.jsonl") == text::read_file(round_dir(b.path(), 0) / "sft.jsonl"));
}

TEST_CASE("conflicts and stale pipelines") {
  testutil::TempDir ws;
  auto cfg = testutil::fixture_round(ws.path(), FilterPolicy::rft_and_verifier);
  run_round(cfg);

  auto other = cfg;
  other.policy = FilterPolicy::rft;
  CHECK_THROWS_AS(run_round(other), RoundConflict);

  auto skip = cfg;
  skip.round = 2;
  CHECK_THROWS_AS(run_round(skip), StalePipeline);

  auto missing = cfg;
  missing.dataset = ws / "nope.jsonl";
  CHECK_THROWS_AS(run_round(missing), StalePipeline);

  auto no_scorer = cfg;
  no_scorer.round = 1;
  no_scorer.scorer.clear();
  CHECK_THROWS_AS(run_round(no_scorer), InvalidInput);

  auto next = cfg;
  next.round = 1;
  CHECK(run_round(next).counts == run_round(cfg).counts);
}

TEST_CASE("round 0 can bootstrap from an existing candidate file") {
  testutil::TempDir src, ws;
  const auto generated = run_round(testutil::fixture_round(src.path(), FilterPolicy::rft));
  auto cfg = testutil::fixture_round(ws.path(), FilterPolicy::rft);
  cfg.gen_backend.clear();
  cfg.candidates = round_dir(src.path(), 0) / "candidates.jsonl";
  const auto boot = run_round(cfg);
  CHECK(boot.counts == generated.counts);
  CHECK(boot.files.at("sft") == generated.files.at("sft"));

  cfg.round = 1;
  CHECK_THROWS_AS(run_round(cfg), InvalidInput);
}

TEST_CASE("a round where everything times out has no verifier data") {
  testutil::TempDir ws;
  auto cfg = testutil::fixture_round(ws.path(), FilterPolicy::rft);
  auto slow = std::make_shared<compile::MockFixtures>();
  slow->default_latency_ms = 10'000;
  cfg.compiler = "mock:slow";
  cfg.compiler_factory = [slow] { return std::make_unique<compile::MockBackend>(slow); };
  cfg.timeout_ms = 20;
  const auto m = run_round(cfg);
  CHECK(m.counts.compiled_success == 0);
  CHECK(m.verifier_records == 0);
  CHECK(m.sft_records == 0);
  CHECK_FALSE(m.dataset_quality.has_value());
  CHECK(text::read_file(round_dir(ws.path(), 0) / "verifier.jsonl").empty());
}

TEST_CASE("cancelled round leaves a partial marker and no manifest") {
  testutil::TempDir ws;
  auto cfg = testutil::fixture_round(ws.path(), FilterPolicy::rft);
  std::atomic<bool> cancel{true};
  cfg.cancel = &cancel;
  const auto m = run_round(cfg);
  CHECK(m.partial);
  CHECK(fs::exists(round_dir(ws.path(), 0) / ".partial"));
  CHECK_FALSE(fs::exists(round_dir(ws.path(), 0) / "manifest.json"));

  cancel = false;
  const auto done = run_round(cfg);
  CHECK_FALSE(done.partial);
  CHECK_FALSE(fs::exists(round_dir(ws.path(), 0) / ".partial"));
}

TEST_CASE("webhook receives the dataset path") {
  httplib::Server server;
  std::mutex mu;
  std::vector<json> received;
  server.Post("/hook", [&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mu);
    received.push_back(json::parse(req.body));
    res.set_content("{}", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  testutil::TempDir ws;
  auto cfg = testutil::fixture_round(ws.path(), FilterPolicy::rft);
  cfg.webhook = "http://127.0.0.1:" + std::to_string(port) + "/hook";
  run_round(cfg);
  server.stop();
  t.join();
  REQUIRE(received.size() == 1);
  CHECK(received[0]["round"] == 0);
  CHECK(received[0]["dataset_path"] == (round_dir(ws.path(), 0) / "sft.jsonl").string());
}

TEST_CASE("manifest JSON round trip") {
  RoundManifest m;
  m.round = 3;
  m.policy = FilterPolicy::verifier;
  m.counts = {1, 2, 3, 4, 5};
  m.dataset_quality = 0.5;
  m.files = {{"sft", "abc"}};
  const auto back = manifest_from_json(to_json(m));
  CHECK(back.round == 3);
  CHECK(back.policy == FilterPolicy::verifier);
  CHECK(back.counts == m.counts);
  CHECK(back.dataset_quality == 0.5);
  CHECK(back.files == m.files);
}
