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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "procforge/compile.hpp"
#include "procforge/corpus.hpp"
#include "procforge/verifier.hpp"

namespace procforge::metrics {

inline constexpr int kDefaultSamples = 20;
inline constexpr int kBootstrapResamples = 1000;

/// Unbiased pass@k, 1 - C(n-c, k) / C(n, k), evaluated as
/// 1 - prod_{i=n-c+1..n} (1 - k/i). Throws DomainError unless
/// 0 <= c <= n and 1 <= k <= n.
double pass_at_k(int n, int c, int k);

/// Fraction of results with status success; 0 for an empty list.
double greedy_rate(const std::vector<compile::CompilationResult>& results);

/// Fraction of chosen candidates that compiled. Throws MissingResult if a
/// chosen id has no result.
double mp1_rate(const std::vector<std::string>& chosen,
                const std::vector<compile::CompilationResult>& results);

struct PrecisionRecall {
  std::optional<double> precision;  // null when nothing was selected
  std::optional<double> recall;     // null when nothing compiled
  std::size_t selected = 0;
  std::size_t succeeded = 0;
  std::size_t selected_and_succeeded = 0;
};

/// Selected = predicted correct. Scores and results must cover the same
/// candidate ids, else KeyMismatch.
PrecisionRecall precision_recall(const std::vector<verifier::VerifierScore>& scores,
                                 const std::vector<compile::CompilationResult>& results);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Percentile bootstrap of the mean over instances, seeded.
Interval bootstrap_mean_ci(const std::vector<double>& per_instance, std::uint64_t seed,
                           int resamples = kBootstrapResamples, double level = 0.95);

// ---------------------------------------------------------------------------

struct FieldStats {
  double mean = 0.0;
  double median = 0.0;
  std::size_t min = 0;
  std::size_t max = 0;
};

FieldStats summarize(std::vector<std::size_t> values);

struct StatsRow {
  std::string split;
  std::size_t size = 0;
  std::optional<FieldStats> formal;  // statement + proof characters
  std::optional<FieldStats> nl;      // question + answer characters
};

/// One row per manifest (records looked up by id); one "all" row when no
/// manifests are given.
std::vector<StatsRow> dataset_stats(const std::vector<corpus::ParallelRecord>& records,
                                    const std::vector<corpus::SplitManifest>& manifests = {});

std::string format_stats_table(const std::vector<StatsRow>& rows);
nlohmann::json stats_to_json(const std::vector<StatsRow>& rows);

// ---------------------------------------------------------------------------

struct EvalReport {
  std::optional<double> greedy_rate;
  std::map<int, double> pass_at;
  std::optional<double> mp1;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> fallback_rate;
  std::map<std::string, Interval> ci95;
  std::size_t instances = 0;
  std::size_t candidates = 0;
};

nlohmann::json to_json(const EvalReport& r);

struct EvalInputs {
  std::vector<compile::CompilationResult> results;         // all sampled candidates
  std::vector<verifier::VerifierScore> scores;             // optional
  std::vector<compile::CompilationResult> greedy_results;  // optional, one per instance
  std::vector<int> ks{1, 5};
  std::uint64_t seed = 0;
};

/// Instances are identified by instance_id. Throws DomainError if some
/// instance has fewer than k samples.
EvalReport evaluate(const EvalInputs& in);

}  // namespace procforge::metrics
