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

#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "procforge/steps.hpp"

namespace procforge::verifier {

inline constexpr double kEpsilon = 1e-7;
inline constexpr double kDecisionThreshold = 0.5;

/// How step probabilities reduce to one sample-level probability.
enum class Aggregation { min, product, last };

std::string_view to_string(Aggregation a);
Aggregation aggregation_from_string(std::string_view s);

double clamp_probability(double p);
double aggregate(std::span<const double> step_probs, Aggregation how);

struct VerifierScore {
  std::string candidate_id;
  std::string instance_id;
  std::vector<double> step_probs;  // clamped to [eps, 1 - eps]
  double sample_score = 0.0;
  steps::Label predicted_label = steps::Label::incorrect;
};

/// Clamps the probabilities and derives sample_score and predicted_label.
VerifierScore make_score(std::string candidate_id, std::string instance_id,
                         std::vector<double> step_probs, Aggregation how = Aggregation::min);

void to_json(nlohmann::json& j, const VerifierScore& s);
void from_json(const nlohmann::json& j, VerifierScore& s);

// ---------------------------------------------------------------------------
// Step scorers. Implementations must be safe to call concurrently.

class StepScorer {
 public:
  virtual ~StepScorer() = default;
  /// One probability of "correct" per step prefix.
  virtual std::vector<double> score(const std::string& prompt,
                                    const std::vector<std::string>& steps) const = 0;
};

class ConstantScorer final : public StepScorer {
 public:
  explicit ConstantScorer(double p) : p_(p) {}
  std::vector<double> score(const std::string&, const std::vector<std::string>& steps) const override {
    return std::vector<double>(steps.size(), p_);
  }

 private:
  double p_;
};

/// Offline reference scorer: a logistic model over two features of each
/// step, its length in code points and how many of its tokens look wrong
/// (a leading tactic outside the whitelist, or `sorry`).
///
///   p = sigmoid(bias + length_weight * length + unknown_weight * unknown)
class ToyScorer final : public StepScorer {
 public:
  struct Weights {
    double bias = 3.0;
    double length_weight = -0.01;
    double unknown_weight = -4.0;
  };

  ToyScorer() = default;
  explicit ToyScorer(Weights w) : w_(w) {}

  std::vector<double> score(const std::string& prompt,
                            const std::vector<std::string>& steps) const override;

  static const std::set<std::string, std::less<>>& tactic_whitelist();
  static int unknown_token_count(std::string_view step);

  const Weights& weights() const { return w_; }

 private:
  Weights w_;
};

/// Remote scorer: POST {prompt, steps:[...]} -> {p_correct:[...]}.
class HttpScorer final : public StepScorer {
 public:
  explicit HttpScorer(std::string url, int timeout_ms = 30'000);
  std::vector<double> score(const std::string& prompt,
                            const std::vector<std::string>& steps) const override;

 private:
  std::string url_;
  int timeout_ms_;
};

/// "toy", "const:<p>" or an http(s) URL.
std::unique_ptr<StepScorer> make_scorer(const std::string& spec);

struct ScoringItem {
  std::string candidate_id;
  std::string instance_id;
  std::string prompt;
  std::vector<std::string> steps;
};

struct ScoreOptions {
  Aggregation aggregation = Aggregation::min;
  int max_in_flight = 4;
};

/// Scores every item; results are in input order. Any scorer failure aborts
/// the whole batch with ScorerUnavailable.
std::vector<VerifierScore> score_candidates(const std::vector<ScoringItem>& items,
                                            const StepScorer& scorer,
                                            const ScoreOptions& options = {});

// ---------------------------------------------------------------------------
// Losses

enum class LossScheme { osv, psv };

struct LossReport {
  LossScheme scheme = LossScheme::psv;
  double value = 0.0;
  std::size_t n = 0;
  std::vector<double> per_sample;
};

/// Step-averaged, then sample-averaged binary cross-entropy,
///   L = -(1/n) sum_i (1/m_i) sum_t [y log r + (1 - y) log(1 - r)],
/// with r clamped to [eps, 1 - eps]. The outcome form takes one label per
/// sample; the process form one label per step.
LossReport cross_entropy_outcome(const std::vector<std::vector<double>>& probs,
                                 const std::vector<double>& sample_labels);
LossReport cross_entropy_process(const std::vector<std::vector<double>>& probs,
                                 const std::vector<std::vector<double>>& step_labels);

/// Scores and labels are matched by candidate_id. Throws ShapeMismatch when a
/// label set is missing, has the wrong scheme, or differs in step count.
LossReport loss_osv(const std::vector<VerifierScore>& scores,
                    const std::vector<steps::StepLabels>& outcome_labels);
LossReport loss_psv(const std::vector<VerifierScore>& scores,
                    const std::vector<steps::StepLabels>& process_labels);

// ---------------------------------------------------------------------------
// Selection

struct Selection {
  std::string candidate_id;
  bool fallback = false;  // nothing was predicted correct
};

/// MP1: the highest-scoring candidate among those predicted correct, ties to
/// the smallest candidate_id; falls back to the global maximum.
Selection select_mp1(const std::vector<VerifierScore>& scores);

/// select_mp1 applied to each instance's candidates.
std::map<std::string, Selection> select_per_instance(const std::vector<VerifierScore>& scores);

}  // namespace procforge::verifier
