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

#include "procforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include <fmt/format.h>

#include "procforge/error.hpp"

namespace procforge::metrics {

using compile::CompilationResult;
using compile::Status;
using nlohmann::json;

double pass_at_k(int n, int c, int k) {
  if (n < 1 || c < 0 || c > n || k < 1 || k > n) {
    throw DomainError(fmt::format("pass@k needs 0 <= c <= n and 1 <= k <= n (n={}, c={}, k={})", n, c, k));
  }
  if (c == 0) return 0.0;
  if (n - c < k) return 1.0;
  double miss = 1.0;
  for (int i = n - c + 1; i <= n; ++i) miss *= 1.0 - static_cast<double>(k) / i;
  return 1.0 - miss;
}

double greedy_rate(const std::vector<CompilationResult>& results) {
  if (results.empty()) return 0.0;
  const auto ok = std::count_if(results.begin(), results.end(),
                                [](const CompilationResult& r) { return r.status == Status::success; });
  return static_cast<double>(ok) / static_cast<double>(results.size());
}

double mp1_rate(const std::vector<std::string>& chosen, const std::vector<CompilationResult>& results) {
  if (chosen.empty()) return 0.0;
  std::map<std::string, Status> status;
  for (const auto& r : results) status[r.candidate_id] = r.status;
  std::size_t ok = 0;
  for (const auto& id : chosen) {
    auto it = status.find(id);
    if (it == status.end()) throw MissingResult("no compilation result for chosen candidate " + id);
    if (it->second == Status::success) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(chosen.size());
}

PrecisionRecall precision_recall(const std::vector<verifier::VerifierScore>& scores,
                                 const std::vector<CompilationResult>& results) {
  std::map<std::string, bool> success;
  for (const auto& r : results) success[r.candidate_id] = r.status == Status::success;
  std::set<std::string> scored;
  for (const auto& s : scores) scored.insert(s.candidate_id);
  if (scored.size() != success.size() ||
      !std::all_of(scored.begin(), scored.end(), [&](const std::string& id) { return success.contains(id); })) {
    throw KeyMismatch("scores and results do not cover the same candidates");
  }

  PrecisionRecall pr;
  for (const auto& [id, ok] : success) pr.succeeded += ok ? 1 : 0;
  for (const auto& s : scores) {
    if (s.predicted_label != steps::Label::correct) continue;
    ++pr.selected;
    if (success.at(s.candidate_id)) ++pr.selected_and_succeeded;
  }
  if (pr.selected > 0)
    pr.precision = static_cast<double>(pr.selected_and_succeeded) / static_cast<double>(pr.selected);
  if (pr.succeeded > 0)
    pr.recall = static_cast<double>(pr.selected_and_succeeded) / static_cast<double>(pr.succeeded);
  return pr;
}

Interval bootstrap_mean_ci(const std::vector<double>& values, std::uint64_t seed, int resamples,
                           double level) {
  if (values.empty()) return {};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) sum += values[pick(rng)];
    means.push_back(sum / static_cast<double>(values.size()));
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - level) / 2.0;
  auto quantile = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(means.size() - 1)));
    return means[std::min(idx, means.size() - 1)];
  };
  return {quantile(alpha), quantile(1.0 - alpha)};
}

// ---------------------------------------------------------------------------

FieldStats summarize(std::vector<std::size_t> values) {
  FieldStats s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (auto v : values) total += static_cast<double>(v);
  s.mean = total / static_cast<double>(values.size());
  const std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 == 1
                 ? static_cast<double>(values[mid])
                 : (static_cast<double>(values[mid - 1]) + static_cast<double>(values[mid])) / 2.0;
  s.min = values.front();
  s.max = values.back();
  return s;
}

namespace {

StatsRow make_row(std::string name, const std::vector<const corpus::ParallelRecord*>& records) {
  StatsRow row;
  row.split = std::move(name);
  row.size = records.size();
  std::vector<std::size_t> formal;
  std::vector<std::size_t> nl;
  for (const auto* r : records) {
    if (r->theorem) formal.push_back(r->char_count_formal());
    nl.push_back(r->char_count_nl());
  }
  if (!formal.empty()) row.formal = summarize(std::move(formal));
  if (!nl.empty()) row.nl = summarize(std::move(nl));
  return row;
}

}  // namespace

std::vector<StatsRow> dataset_stats(const std::vector<corpus::ParallelRecord>& records,
                                    const std::vector<corpus::SplitManifest>& manifests) {
  std::vector<StatsRow> rows;
  if (manifests.empty()) {
    std::vector<const corpus::ParallelRecord*> all;
    for (const auto& r : records) all.push_back(&r);
    rows.push_back(make_row("all", all));
    return rows;
  }
  std::map<std::string, const corpus::ParallelRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  for (const auto& m : manifests) {
    std::vector<const corpus::ParallelRecord*> members;
    for (const auto& id : m.ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw InvalidInput("manifest references unknown record " + id);
      members.push_back(it->second);
    }
    rows.push_back(make_row(std::string(corpus::to_string(m.split_name)), members));
  }
  return rows;
}

std::string format_stats_table(const std::vector<StatsRow>& rows) {
  std::string out = fmt::format("{:<12} {:>7} | {:>6} {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6} {:>6}\n",
                                "Dataset", "Size", "Mean", "Median", "Min", "Max", "Mean", "Median",
                                "Min", "Max");
  out += fmt::format("{:<12} {:>7} | {:^27} | {:^27}\n", "", "", "Lean 4 chars (S+P)", "NL chars (Q+A)");
  auto cells = [](const std::optional<FieldStats>& f) {
    if (!f) return fmt::format("{:>6} {:>6} {:>6} {:>6}", "-", "-", "-", "-");
    return fmt::format("{:>6.0f} {:>6.0f} {:>6} {:>6}", f->mean, f->median, f->min, f->max);
  };
  for (const auto& r : rows) {
    out += fmt::format("{:<12} {:>7} | {} | {}\n", r.split, r.size, cells(r.formal), cells(r.nl));
  }
  return out;
}

json stats_to_json(const std::vector<StatsRow>& rows) {
  auto field = [](const std::optional<FieldStats>& f) -> json {
    if (!f) return nullptr;
    return json{{"mean", f->mean}, {"median", f->median}, {"min", f->min}, {"max", f->max}};
  };
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"split", r.split}, {"size", r.size}, {"formal", field(r.formal)}, {"nl", field(r.nl)}});
  return out;
}

// ---------------------------------------------------------------------------

json to_json(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) -> json { return v ? json(*v) : json(nullptr); };
  json pass = json::object();
  for (const auto& [k, v] : r.pass_at) pass[std::to_string(k)] = v;
  json ci = json::object();
  for (const auto& [name, iv] : r.ci95) ci[name] = json::array({iv.lo, iv.hi});
  return json{{"greedy_rate", opt(r.greedy_rate)},
              {"pass_at", std::move(pass)},
              {"mp1", opt(r.mp1)},
              {"precision", opt(r.precision)},
              {"recall", opt(r.recall)},
              {"fallback_rate", opt(r.fallback_rate)},
              {"ci95", std::move(ci)},
              {"counts", {{"instances", r.instances}, {"candidates", r.candidates}}}};
}

namespace {

std::string instance_of(const CompilationResult& r) {
  if (!r.instance_id.empty()) return r.instance_id;
  const auto slash = r.candidate_id.rfind('/');
  return slash == std::string::npos ? r.candidate_id : r.candidate_id.substr(0, slash);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

EvalReport evaluate(const EvalInputs& in) {
  EvalReport report;
  report.candidates = in.results.size();

  std::map<std::string, std::pair<int, int>> per_instance;  // (n, c)
  for (const auto& r : in.results) {
    auto& [n, c] = per_instance[instance_of(r)];
    ++n;
    if (r.status == Status::success) ++c;
  }
  report.instances = per_instance.size();

  for (int k : in.ks) {
    std::vector<double> values;
    for (const auto& [id, nc] : per_instance) values.push_back(pass_at_k(nc.first, nc.second, k));
    if (values.empty()) continue;
    report.pass_at[k] = mean(values);
    report.ci95["pass@" + std::to_string(k)] = bootstrap_mean_ci(values, in.seed);
  }

  if (!in.greedy_results.empty()) {
    std::vector<double> values;
    for (const auto& r : in.greedy_results) values.push_back(r.status == Status::success ? 1.0 : 0.0);
    report.greedy_rate = greedy_rate(in.greedy_results);
    report.ci95["greedy"] = bootstrap_mean_ci(values, in.seed);
  }

  if (!in.scores.empty()) {
    const auto pr = precision_recall(in.scores, in.results);
    report.precision = pr.precision;
    report.recall = pr.recall;

    const auto selections = verifier::select_per_instance(in.scores);
    std::vector<std::string> chosen;
    std::size_t fallbacks = 0;
    for (const auto& [instance, sel] : selections) {
      chosen.push_back(sel.candidate_id);
      fallbacks += sel.fallback ? 1 : 0;
    }
    report.mp1 = mp1_rate(chosen, in.results);
    report.fallback_rate = static_cast<double>(fallbacks) / static_cast<double>(selections.size());

    std::map<std::string, bool> ok;
    for (const auto& r : in.results) ok[r.candidate_id] = r.status == Status::success;
    std::vector<double> values;
    for (const auto& id : chosen) values.push_back(ok.at(id) ? 1.0 : 0.0);
    report.ci95["mp1"] = bootstrap_mean_ci(values, in.seed);
  }
  return report;
}

}  // namespace procforge::metrics
