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

#include "procforge/verifier.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <mutex>
#include <thread>

#include "procforge/error.hpp"
#include "procforge/http.hpp"
#include "procforge/text.hpp"

namespace procforge::verifier {

using nlohmann::json;
using steps::Label;

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::min: return "min";
    case Aggregation::product: return "product";
    case Aggregation::last: return "last";
  }
  return "min";
}

Aggregation aggregation_from_string(std::string_view s) {
  if (s == "min") return Aggregation::min;
  if (s == "product") return Aggregation::product;
  if (s == "last") return Aggregation::last;
  throw InvalidInput("unknown aggregation '" + std::string(s) + "'");
}

double clamp_probability(double p) {
  if (std::isnan(p)) throw InvalidInput("probability is NaN");
  return std::clamp(p, kEpsilon, 1.0 - kEpsilon);
}

double aggregate(std::span<const double> probs, Aggregation how) {
  if (probs.empty()) return kEpsilon;
  switch (how) {
    case Aggregation::min: return *std::min_element(probs.begin(), probs.end());
    case Aggregation::product: {
      double p = 1.0;
      for (double x : probs) p *= x;
      return clamp_probability(p);
    }
    case Aggregation::last: return probs.back();
  }
  return kEpsilon;
}

VerifierScore make_score(std::string candidate_id, std::string instance_id,
                         std::vector<double> step_probs, Aggregation how) {
  VerifierScore s;
  s.candidate_id = std::move(candidate_id);
  s.instance_id = std::move(instance_id);
  for (auto& p : step_probs) p = clamp_probability(p);
  s.step_probs = std::move(step_probs);
  s.sample_score = aggregate(s.step_probs, how);
  s.predicted_label = s.sample_score >= kDecisionThreshold ? Label::correct : Label::incorrect;
  return s;
}

void to_json(json& j, const VerifierScore& s) {
  j = json{{"candidate_id", s.candidate_id},
           {"instance_id", s.instance_id},
           {"step_probs", s.step_probs},
           {"sample_score", s.sample_score},
           {"predicted_label", steps::to_string(s.predicted_label)}};
}

void from_json(const json& j, VerifierScore& s) {
  s.candidate_id = j.at("candidate_id").get<std::string>();
  s.instance_id = j.value("instance_id", "");
  s.step_probs = j.at("step_probs").get<std::vector<double>>();
  s.sample_score = j.at("sample_score").get<double>();
  const auto label = j.at("predicted_label").get<std::string>();
  if (label != "correct" && label != "incorrect") throw InvalidInput("bad predicted_label " + label);
  s.predicted_label = label == "correct" ? Label::correct : Label::incorrect;
}

// ---------------------------------------------------------------------------

const std::set<std::string, std::less<>>& ToyScorer::tactic_whitelist() {
  static const std::set<std::string, std::less<>> kTactics = {
      "abel",         "all_goals",   "any_goals",    "apply",          "apply_fun",
      "assumption",   "aesop",       "by_cases",     "by_contra",      "calc",
      "case",         "cases",       "change",       "classical",      "congr",
      "constructor",  "contradiction", "contrapose", "convert",        "decide",
      "dsimp",        "exact",       "exact_mod_cast", "exfalso",      "exists",
      "ext",          "field_simp",  "filter_upwards", "first",        "funext",
      "gcongr",       "generalize",  "have",         "induction",      "infer_instance",
      "interval_cases", "intro",     "intros",       "left",           "let",
      "linarith",     "linear_combination", "next",  "nlinarith",      "norm_cast",
      "norm_num",     "nth_rewrite", "nth_rw",       "obtain",         "omega",
      "polyrith",     "positivity",  "push_cast",    "push_neg",       "rcases",
      "refine",       "refine'",     "repeat",       "revert",         "rfl",
      "right",        "ring",        "ring_nf",      "rintro",         "rw",
      "rwa",          "rewrite",     "set",          "show",           "simp",
      "simp_all",     "simp_rw",     "simpa",        "specialize",     "split",
      "split_ifs",    "subst",       "suffices",     "symm",           "tauto",
      "trans",        "trivial",     "try",          "unfold",         "use",
      "zify",         "clear",       "conv",         "exact?",         "fin_cases",
      "choose",       "lift",        "wlog",         "qify",           "swap",
  };
  return kTactics;
}

namespace {

bool word_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'' || c == '?' ||
         c == '!';
}

// Splits a step at `<;>` and returns each piece's leading word, if any.
std::vector<std::string_view> tactic_heads(std::string_view step) {
  std::vector<std::string_view> heads;
  std::size_t from = 0;
  for (;;) {
    const auto cut = step.find("<;>", from);
    auto piece = text::ltrim(step.substr(from, cut == std::string_view::npos ? cut : cut - from));
    // Focusing bullets.
    for (std::string_view bullet : {"· ", ". "}) {
      if (piece.starts_with(bullet)) piece = text::ltrim(piece.substr(bullet.size()));
    }
    if (!piece.empty() && word_start(piece[0])) {
      std::size_t n = 0;
      while (n < piece.size() && word_char(piece[n])) ++n;
      heads.push_back(piece.substr(0, n));
    }
    if (cut == std::string_view::npos) break;
    from = cut + 3;
  }
  return heads;
}

}  // namespace

int ToyScorer::unknown_token_count(std::string_view step) {
  int unknown = 0;
  for (auto head : tactic_heads(step)) {
    if (head != "sorry" && !tactic_whitelist().contains(head)) ++unknown;
  }
  for (std::size_t i = 0; i < step.size();) {
    if (!word_start(step[i]) || (i > 0 && word_char(step[i - 1]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < step.size() && word_char(step[j])) ++j;
    if (step.substr(i, j - i) == "sorry") ++unknown;
    i = j;
  }
  return unknown;
}

std::vector<double> ToyScorer::score(const std::string&, const std::vector<std::string>& steps) const {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const auto& s : steps) {
    const double length = static_cast<double>(text::codepoint_length(s));
    const double unknown = unknown_token_count(s);
    const double z = w_.bias + w_.length_weight * length + w_.unknown_weight * unknown;
    out.push_back(1.0 / (1.0 + std::exp(-z)));
  }
  return out;
}

HttpScorer::HttpScorer(std::string url, int timeout_ms)
    : url_(std::move(url)), timeout_ms_(timeout_ms) {}

std::vector<double> HttpScorer::score(const std::string& prompt,
                                      const std::vector<std::string>& steps) const {
  json reply;
  try {
    reply = http::post_json(http::parse_url(url_, "/score"), json{{"prompt", prompt}, {"steps", steps}},
                            timeout_ms_);
  } catch (const http::TransportError& e) {
    throw ScorerUnavailable(e.what());
  }
  auto it = reply.find("p_correct");
  if (it == reply.end() || !it->is_array()) throw ScorerUnavailable("scorer reply lacks p_correct");
  std::vector<double> out;
  for (const auto& p : *it) {
    if (!p.is_number()) throw ScorerUnavailable("scorer reply has a non-numeric probability");
    out.push_back(p.get<double>());
  }
  return out;
}

std::unique_ptr<StepScorer> make_scorer(const std::string& spec) {
  if (spec == "toy") return std::make_unique<ToyScorer>();
  if (spec.starts_with("const:")) return std::make_unique<ConstantScorer>(std::stod(spec.substr(6)));
  if (spec.starts_with("http://") || spec.starts_with("https://"))
    return std::make_unique<HttpScorer>(spec);
  throw InvalidInput("unknown scorer '" + spec + "' (expected toy, const:<p> or a URL)");
}

std::vector<VerifierScore> score_candidates(const std::vector<ScoringItem>& items,
                                            const StepScorer& scorer, const ScoreOptions& options) {
  std::vector<VerifierScore> out(items.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::string first_error;

  auto worker = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      const auto& item = items[i];
      try {
        auto probs = scorer.score(item.prompt, item.steps);
        if (probs.size() != item.steps.size()) {
          throw ScorerUnavailable(item.candidate_id + ": scorer returned " +
                                  std::to_string(probs.size()) + " probabilities for " +
                                  std::to_string(item.steps.size()) + " steps");
        }
        out[i] = make_score(item.candidate_id, item.instance_id, std::move(probs), options.aggregation);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (!failed.exchange(true)) first_error = e.what();
        return;
      }
    }
  };

  const auto n = std::min<std::size_t>(static_cast<std::size_t>(std::max(options.max_in_flight, 1)),
                                       items.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failed) throw ScorerUnavailable(first_error);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double step_term(double r, double y) {
  r = clamp_probability(r);
  return y * std::log(r) + (1.0 - y) * std::log(1.0 - r);
}

LossReport finish(LossScheme scheme, std::vector<double> per_sample) {
  LossReport report;
  report.scheme = scheme;
  report.n = per_sample.size();
  double total = 0.0;
  for (double v : per_sample) total += v;
  report.value = per_sample.empty() ? 0.0 : total / static_cast<double>(per_sample.size());
  report.per_sample = std::move(per_sample);
  return report;
}

double label_value(Label l) { return l == Label::correct ? 1.0 : 0.0; }

const steps::StepLabels& find_labels(const std::map<std::string, const steps::StepLabels*>& by_id,
                                     const VerifierScore& s) {
  auto it = by_id.find(s.candidate_id);
  if (it == by_id.end()) throw ShapeMismatch("no labels for candidate " + s.candidate_id);
  if (it->second->labels.size() != s.step_probs.size()) {
    throw ShapeMismatch(s.candidate_id + ": " + std::to_string(s.step_probs.size()) +
                        " step probabilities vs " + std::to_string(it->second->labels.size()) +
                        " labels");
  }
  return *it->second;
}

std::map<std::string, const steps::StepLabels*> index_labels(
    const std::vector<steps::StepLabels>& labels, steps::Scheme scheme) {
  std::map<std::string, const steps::StepLabels*> by_id;
  for (const auto& l : labels) {
    if (l.scheme != scheme) {
      throw ShapeMismatch(l.candidate_id + ": expected " + std::string(steps::to_string(scheme)) +
                          " labels");
    }
    by_id[l.candidate_id] = &l;
  }
  return by_id;
}

}  // namespace

LossReport cross_entropy_outcome(const std::vector<std::vector<double>>& probs,
                                 const std::vector<double>& sample_labels) {
  if (probs.size() != sample_labels.size()) throw ShapeMismatch("one label per sample expected");
  std::vector<double> per_sample;
  per_sample.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i].empty()) throw ShapeMismatch("sample " + std::to_string(i) + " has no steps");
    double sum = 0.0;
    for (double r : probs[i]) sum += step_term(r, sample_labels[i]);
    per_sample.push_back(-sum / static_cast<double>(probs[i].size()));
  }
  return finish(LossScheme::osv, std::move(per_sample));
}

LossReport cross_entropy_process(const std::vector<std::vector<double>>& probs,
                                 const std::vector<std::vector<double>>& step_labels) {
  if (probs.size() != step_labels.size()) throw ShapeMismatch("one label vector per sample expected");
  std::vector<double> per_sample;
  per_sample.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i].size() != step_labels[i].size()) {
      throw ShapeMismatch("sample " + std::to_string(i) + ": probabilities and labels differ in length");
    }
    if (probs[i].empty()) throw ShapeMismatch("sample " + std::to_string(i) + " has no steps");
    double sum = 0.0;
    for (std::size_t t = 0; t < probs[i].size(); ++t) sum += step_term(probs[i][t], step_labels[i][t]);
    per_sample.push_back(-sum / static_cast<double>(probs[i].size()));
  }
  return finish(LossScheme::psv, std::move(per_sample));
}

LossReport loss_osv(const std::vector<VerifierScore>& scores,
                    const std::vector<steps::StepLabels>& outcome_labels) {
  const auto by_id = index_labels(outcome_labels, steps::Scheme::outcome);
  std::vector<std::vector<double>> probs;
  std::vector<double> y;
  for (const auto& s : scores) {
    const auto& l = find_labels(by_id, s);
    probs.push_back(s.step_probs);
    y.push_back(l.labels.empty() ? 0.0 : label_value(l.labels.front()));
  }
  return cross_entropy_outcome(probs, y);
}

LossReport loss_psv(const std::vector<VerifierScore>& scores,
                    const std::vector<steps::StepLabels>& process_labels) {
  const auto by_id = index_labels(process_labels, steps::Scheme::process);
  std::vector<std::vector<double>> probs;
  std::vector<std::vector<double>> y;
  for (const auto& s : scores) {
    const auto& l = find_labels(by_id, s);
    probs.push_back(s.step_probs);
    std::vector<double> row;
    for (auto x : l.labels) row.push_back(label_value(x));
    y.push_back(std::move(row));
  }
  return cross_entropy_process(probs, y);
}

// ---------------------------------------------------------------------------

Selection select_mp1(const std::vector<VerifierScore>& scores) {
  if (scores.empty()) throw EmptyCandidateSet("no candidates to select from");
  auto better = [](const VerifierScore& a, const VerifierScore* b) {
    if (!b) return true;
    if (a.sample_score != b->sample_score) return a.sample_score > b->sample_score;
    return a.candidate_id < b->candidate_id;
  };
  const VerifierScore* best_correct = nullptr;
  const VerifierScore* best_any = nullptr;
  for (const auto& s : scores) {
    if (s.predicted_label == Label::correct && better(s, best_correct)) best_correct = &s;
    if (better(s, best_any)) best_any = &s;
  }
  if (best_correct) return {best_correct->candidate_id, false};
  return {best_any->candidate_id, true};
}

std::map<std::string, Selection> select_per_instance(const std::vector<VerifierScore>& scores) {
  std::map<std::string, std::vector<VerifierScore>> grouped;
  for (const auto& s : scores) grouped[s.instance_id].push_back(s);
  std::map<std::string, Selection> out;
  for (const auto& [instance, group] : grouped) out[instance] = select_mp1(group);
  return out;
}

}  // namespace procforge::verifier
