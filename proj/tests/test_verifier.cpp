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

#include <cmath>
#include <random>

#include "procforge/error.hpp"
#include "procforge/verifier.hpp"
#include "test_util.hpp"

using namespace procforge;
using namespace procforge::verifier;
using steps::Label;
using steps::Scheme;
using steps::StepLabels;

namespace {

StepLabels labels(const std::string& id, Scheme scheme, std::vector<Label> ls) {
  StepLabels l;
  l.candidate_id = id;
  l.scheme = scheme;
  l.labels = std::move(ls);
  l.steps.resize(l.labels.size());
  return l;
}

}  // namespace

TEST_CASE("aggregation and clamping") {
  const std::vector<double> p = {0.9, 0.4, 0.7};
  CHECK(aggregate(p, Aggregation::min) == doctest::Approx(0.4));
  CHECK(aggregate(p, Aggregation::product) == doctest::Approx(0.9 * 0.4 * 0.7));
  CHECK(aggregate(p, Aggregation::last) == doctest::Approx(0.7));
  CHECK(clamp_probability(0.0) == kEpsilon);
  CHECK(clamp_probability(1.0) == 1.0 - kEpsilon);
  CHECK(aggregation_from_string("product") == Aggregation::product);
  CHECK_THROWS_AS(aggregation_from_string("max"), InvalidInput);

  const auto s = make_score("a/000", "a", {1.0, 0.6});
  CHECK(s.step_probs[0] == 1.0 - kEpsilon);
  CHECK(s.sample_score == doctest::Approx(0.6));
  CHECK(s.predicted_label == Label::correct);
  CHECK(make_score("a/001", "a", {0.5}).predicted_label == Label::correct);
  CHECK(make_score("a/001", "a", {0.4999}).predicted_label == Label::incorrect);
  CHECK(make_score("a/002", "a", {}).predicted_label == Label::incorrect);
}

TEST_CASE("outcome and process losses") {
  SUBCASE("analytic value") {
    CHECK(cross_entropy_outcome({{0.5}}, {1.0}).value == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(cross_entropy_process({{0.5, 0.5}}, {{1.0, 0.0}}).value == doctest::Approx(std::log(2.0)));
  }
  SUBCASE("equal when process labels are constant per sample") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int b = 0; b < 100; ++b) {
      std::vector<std::vector<double>> probs;
      std::vector<double> y;
      std::vector<std::vector<double>> ys;
      for (int i = 0; i < 8; ++i) {
        const int m = 1 + static_cast<int>(u(rng) * 6);
        std::vector<double> row;
        for (int t = 0; t < m; ++t) row.push_back(u(rng));
        const double label = u(rng) < 0.5 ? 0.0 : 1.0;
        probs.push_back(row);
        y.push_back(label);
        ys.emplace_back(m, label);
      }
      CHECK(std::abs(cross_entropy_outcome(probs, y).value - cross_entropy_process(probs, ys).value) < 1e-12);
    }
  }
  SUBCASE("extreme probabilities stay finite") {
    const auto r = cross_entropy_process({{0.0, 1.0}}, {{1.0, 0.0}});
    CHECK(std::isfinite(r.value));
    CHECK(r.value == doctest::Approx(-std::log(kEpsilon)));
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(cross_entropy_process({{0.5}}, {{1.0, 1.0}}), ShapeMismatch);
    CHECK_THROWS_AS(cross_entropy_outcome({{0.5}}, {}), ShapeMismatch);
    CHECK_THROWS_AS(cross_entropy_outcome({{}}, {1.0}), ShapeMismatch);
  }
}

TEST_CASE("finite-difference check of the process loss") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  const double h = 1e-5;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> probs(4);
    std::vector<std::vector<double>> ys(4);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const int m = 1 + trial % 5 + static_cast<int>(i);
      for (int t = 0; t < m; ++t) {
        probs[i].push_back(u(rng));
        ys[i].push_back(u(rng) < 0.5 ? 0.0 : 1.0);
      }
    }
    const std::size_t i = static_cast<std::size_t>(trial) % probs.size();
    const std::size_t t = static_cast<std::size_t>(trial) % probs[i].size();
    const double base = cross_entropy_process(probs, ys).value;
    const double r = probs[i][t];
    const double y = ys[i][t];
    probs[i][t] += h;
    const double moved = cross_entropy_process(probs, ys).value;
    const double dl = (y / r - (1.0 - y) / (1.0 - r)) *
                      (-1.0 / (static_cast<double>(probs.size()) * static_cast<double>(probs[i].size())));
    CHECK(std::abs((moved - base) - dl * h) < 1e-7);
  }
}

TEST_CASE("losses over scores and label files") {
  const std::vector<VerifierScore> scores = {make_score("a/000", "a", {0.9, 0.2}),
                                             make_score("a/001", "a", {0.8})};
  const std::vector<StepLabels> process = {labels("a/000", Scheme::process, {Label::correct, Label::incorrect}),
                                           labels("a/001", Scheme::process, {Label::correct})};
  const std::vector<StepLabels> outcome = {labels("a/000", Scheme::outcome, {Label::incorrect, Label::incorrect}),
                                           labels("a/001", Scheme::outcome, {Label::correct})};
  const auto psv = loss_psv(scores, process);
  CHECK(psv.n == 2);
  CHECK(psv.value == doctest::Approx(((-std::log(0.9) - std::log(0.8)) / 2 - std::log(0.8)) / 2));
  const auto osv = loss_osv(scores, outcome);
  CHECK(osv.value == doctest::Approx(((-std::log(0.1) - std::log(0.8)) / 2 - std::log(0.8)) / 2));

  CHECK_THROWS_AS(loss_psv(scores, outcome), ShapeMismatch);
  CHECK_THROWS_AS(loss_psv(scores, {process[0]}), ShapeMismatch);
  CHECK_THROWS_AS(loss_psv(scores, {labels("a/000", Scheme::process, {Label::correct}), process[1]}),
                  ShapeMismatch);
}

TEST_CASE("MP1 selection") {
  SUBCASE("best predicted-correct candidate wins") {
    const auto sel = select_mp1({make_score("x/000", "x", {0.6}), make_score("x/001", "x", {0.9}),
                                 make_score("x/002", "x", {0.3})});
    CHECK(sel.candidate_id == "x/001");
    CHECK_FALSE(sel.fallback);
  }
  SUBCASE("ties go to the smallest id") {
    const auto sel = select_mp1({make_score("x/002", "x", {0.7}), make_score("x/001", "x", {0.7})});
    CHECK(sel.candidate_id == "x/001");
  }
  SUBCASE("fallback to the global maximum") {
    const auto sel = select_mp1({make_score("x/000", "x", {0.2}), make_score("x/001", "x", {0.4})});
    CHECK(sel.candidate_id == "x/001");
    CHECK(sel.fallback);
  }
  SUBCASE("empty set") { CHECK_THROWS_AS(select_mp1({}), EmptyCandidateSet); }
  SUBCASE("per instance") {
    const auto sel = select_per_instance({make_score("a/000", "a", {0.9}), make_score("b/000", "b", {0.1}),
                                          make_score("b/001", "b", {0.8})});
    REQUIRE(sel.size() == 2);
    CHECK(sel.at("a").candidate_id == "a/000");
    CHECK(sel.at("b").candidate_id == "b/001");
  }
}

TEST_CASE("toy scorer") {
  ToyScorer toy;
  CHECK(ToyScorer::unknown_token_count("simp") == 0);
  CHECK(ToyScorer::unknown_token_count("sorry") == 1);
  CHECK(ToyScorer::unknown_token_count("frobnicate h") == 1);
  const auto p = toy.score("", {"simp", "sorry", std::string(400, 'x')});
  REQUIRE(p.size() == 3);
  CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(-(3.0 - 0.04)))));
  CHECK(p[0] > 0.5);
  CHECK(p[1] < 0.5);
  CHECK(p[2] < 0.5);
  CHECK(make_scorer("toy") != nullptr);
  CHECK(make_scorer("const:0.25")->score("", {"a", "b"}) == std::vector<double>{0.25, 0.25});
  CHECK_THROWS_AS(make_scorer("nonsense"), InvalidInput);
}

TEST_CASE("score_candidates keeps order and fails as a batch") {
  ToyScorer toy;
  std::vector<ScoringItem> items;
  for (int i = 0; i < 30; ++i)
    items.push_back({"c" + std::to_string(i), "c", "p", i % 2 ? std::vector<std::string>{"simp"}
                                                             : std::vector<std::string>{"sorry", "ring"}});
  const auto a = score_candidates(items, toy, {Aggregation::min, 1});
  const auto b = score_candidates(items, toy, {Aggregation::min, 8});
  for (std::size_t i = 0; i < items.size(); ++i) {
    CHECK(a[i].candidate_id == items[i].candidate_id);
    CHECK(a[i].step_probs == b[i].step_probs);
  }

  struct Short final : StepScorer {
    std::vector<double> score(const std::string&, const std::vector<std::string>&) const override { return {}; }
  };
  CHECK_THROWS_AS(score_candidates(items, Short{}), ScorerUnavailable);
}

TEST_CASE("HTTP scorer against the mock server") {
  testutil::MockServer server;
  HttpScorer http(server.url());
  ToyScorer toy;
  const std::vector<std::string> steps = {"simp", "exact bad_x", "sorry"};
  const auto remote = http.score("prompt", steps);
  const auto local = toy.score("prompt", steps);
  REQUIRE(remote.size() == local.size());
  for (std::size_t i = 0; i < local.size(); ++i) CHECK(remote[i] == doctest::Approx(local[i]));

  HttpScorer dead("http://127.0.0.1:1", 500);
  CHECK_THROWS_AS(dead.score("p", steps), ScorerUnavailable);
}

TEST_CASE("score JSON round trip") {
  const auto s = make_score("a/000", "a", {0.9, 0.6});
  const nlohmann::json j = s;
  const auto back = j.get<VerifierScore>();
  CHECK(back.candidate_id == s.candidate_id);
  CHECK(back.step_probs == s.step_probs);
  CHECK(back.sample_score == s.sample_score);
  CHECK(back.predicted_label == s.predicted_label);
}
