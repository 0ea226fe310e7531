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

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "procforge/error.hpp"
#include "procforge/metrics.hpp"

using namespace procforge;
using namespace procforge::metrics;
using compile::CompilationResult;
using compile::Status;

namespace {

CompilationResult result(const std::string& id, Status s) {
  CompilationResult r;
  r.candidate_id = id;
  r.instance_id = id.substr(0, id.find('/'));
  r.status = s;
  return r;
}

}  // namespace

TEST_CASE("pass@k exact values and domain") {
  CHECK(pass_at_k(5, 2, 3) == 0.9);
  CHECK(pass_at_k(20, 0, 5) == 0.0);
  CHECK(pass_at_k(20, 20, 1) == 1.0);
  CHECK(pass_at_k(10, 3, 1) == doctest::Approx(0.3));
  CHECK(pass_at_k(4, 1, 4) == 1.0);
  CHECK_THROWS_AS(pass_at_k(5, 6, 1), DomainError);
  CHECK_THROWS_AS(pass_at_k(5, 1, 0), DomainError);
  CHECK_THROWS_AS(pass_at_k(5, 1, 6), DomainError);
  CHECK_THROWS_AS(pass_at_k(0, 0, 1), DomainError);
}

TEST_CASE("pass@k matches the direct formula and is monotone") {
  for (int n = 1; n <= 20; ++n)
    for (int c = 0; c <= n; ++c)
      for (int k = 1; k <= n; ++k) {
        const double v = pass_at_k(n, c, k);
        CHECK(v == doctest::Approx(oracle::pass_at_k_reference(n, c, k)).epsilon(1e-12));
        if (k > 1) CHECK(v >= pass_at_k(n, c, k - 1) - 1e-15);
        if (c > 0) CHECK(v >= pass_at_k(n, c - 1, k) - 1e-15);
      }
}

TEST_CASE("pass@k agrees with sampling without replacement") {
  std::mt19937_64 rng(2024);
  std::vector<int> pool(20, 0);
  std::fill(pool.begin(), pool.begin() + 7, 1);
  for (int k : {1, 5}) {
    int hits = 0;
    const int trials = 20000;
    for (int t = 0; t < trials; ++t) {
      std::shuffle(pool.begin(), pool.end(), rng);
      hits += std::any_of(pool.begin(), pool.begin() + k, [](int x) { return x == 1; }) ? 1 : 0;
    }
    CHECK(std::abs(static_cast<double>(hits) / trials - pass_at_k(20, 7, k)) < 0.02);
  }
}

TEST_CASE("rates and precision/recall") {
  const std::vector<CompilationResult> rs = {result("a/000", Status::success), result("a/001", Status::failed),
                                             result("b/000", Status::timeout), result("b/001", Status::success)};
  CHECK(greedy_rate(rs) == 0.5);
  CHECK(greedy_rate({}) == 0.0);
  CHECK(mp1_rate({"a/000", "b/000"}, rs) == 0.5);
  CHECK_THROWS_AS(mp1_rate({"zzz"}, rs), MissingResult);

  const std::vector<verifier::VerifierScore> scores = {
      verifier::make_score("a/000", "a", {0.9}), verifier::make_score("a/001", "a", {0.8}),
      verifier::make_score("b/000", "b", {0.1}), verifier::make_score("b/001", "b", {0.2})};
  const auto pr = precision_recall(scores, rs);
  CHECK(pr.selected == 2);
  CHECK(pr.succeeded == 2);
  CHECK(pr.precision == 0.5);
  CHECK(pr.recall == 0.5);

  const auto none = precision_recall({verifier::make_score("a/000", "a", {0.1})}, {result("a/000", Status::failed)});
  CHECK_FALSE(none.precision.has_value());
  CHECK_FALSE(none.recall.has_value());
  CHECK_THROWS_AS(precision_recall(scores, {rs[0]}), KeyMismatch);
}

TEST_CASE("bootstrap interval is seeded and brackets the mean") {
  std::vector<double> v;
  for (int i = 0; i < 50; ++i) v.push_back(i % 3 == 0 ? 1.0 : 0.0);
  const auto a = bootstrap_mean_ci(v, 1);
  const auto b = bootstrap_mean_ci(v, 1);
  CHECK(a.lo == b.lo);
  CHECK(a.hi == b.hi);
  const double mean = 17.0 / 50.0;
  CHECK(a.lo <= mean);
  CHECK(a.hi >= mean);
  CHECK(a.lo < a.hi);
  const auto constant = bootstrap_mean_ci(std::vector<double>(10, 1.0), 3);
  CHECK(constant.lo == 1.0);
  CHECK(constant.hi == 1.0);
}

TEST_CASE("evaluate builds a full report") {
  std::vector<CompilationResult> rs;
  std::vector<verifier::VerifierScore> scores;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 5; ++j) {
      const auto id = "i" + std::to_string(i) + "/00" + std::to_string(j);
      const bool ok = j < i;
      rs.push_back(result(id, ok ? Status::success : Status::failed));
      scores.push_back(verifier::make_score(id, "i" + std::to_string(i), {ok ? 0.8 : 0.3}));
    }
  }
  EvalInputs in;
  in.results = rs;
  in.scores = scores;
  in.greedy_results = {result("i0/g", Status::failed), result("i1/g", Status::success)};
  in.ks = {1, 5};
  in.seed = 42;
  const auto report = evaluate(in);
  CHECK(report.instances == 4);
  CHECK(report.candidates == 20);
  CHECK(report.pass_at.at(1) == doctest::Approx((0.0 + 0.2 + 0.4 + 0.6) / 4));
  CHECK(report.pass_at.at(5) == doctest::Approx(0.75));
  CHECK(report.greedy_rate == 0.5);
  CHECK(report.mp1 == doctest::Approx(0.75));
  CHECK(report.fallback_rate == doctest::Approx(0.25));
  CHECK(report.precision == 1.0);
  CHECK(report.recall == 1.0);
  CHECK(report.ci95.contains("pass@1"));
  CHECK(report.ci95.contains("mp1"));
  const auto j = to_json(report);
  for (const char* key : {"greedy_rate", "pass_at", "mp1", "precision", "recall", "fallback_rate", "ci95", "counts"})
    CHECK(j.contains(key));

  in.ks = {6};
  CHECK_THROWS_AS(evaluate(in), DomainError);
}

TEST_CASE("dataset statistics") {
  const auto s = summarize({3, 1, 2, 10});
  CHECK(s.mean == 4.0);
  CHECK(s.median == 2.5);
  CHECK(s.min == 1);
  CHECK(s.max == 10);

  corpus::ParallelRecord a;
  a.id = "a";
  a.nl_question = "abc";
  a.nl_answer = "de";
  corpus::TheoremRecord t;
  t.statement = "theorem x";
  t.proof = "rfl";
  a.theorem = t;
  corpus::ParallelRecord b;
  b.id = "b";
  b.nl_question = "q";
  b.nl_answer = "a";

  const auto all = dataset_stats({a, b});
  REQUIRE(all.size() == 1);
  CHECK(all[0].split == "all");
  CHECK(all[0].size == 2);
  REQUIRE(all[0].nl);
  CHECK(all[0].nl->max == 5);
  REQUIRE(all[0].formal);
  CHECK(all[0].formal->max == 12);

  corpus::SplitManifest m;
  m.split_name = corpus::SplitName::real_test;
  m.ids = {"b"};
  const auto rows = dataset_stats({a, b}, {m});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].size == 1);
  CHECK_FALSE(rows[0].formal.has_value());
  CHECK(format_stats_table(rows).find("real_test") != std::string::npos);
  CHECK(stats_to_json(rows).is_array());
}
