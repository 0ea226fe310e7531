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

#include "procforge/gateway.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "procforge/error.hpp"
#include "procforge/http.hpp"
#include "procforge/jsonl.hpp"
#include "procforge/text.hpp"

namespace procforge::gateway {

using nlohmann::json;

const std::string_view kAutoformalizationTemplate =
    "Statement and proof in natural language:\n"
    "\n"
    "# Statement:\n"
    "{question}\n"
    "\n"
    "# Proof:\n"
    "{answer}\n"
    "\n"
    "Translate the statement and proof in natural language to lean4:";

namespace {

void replace_once(std::string& s, std::string_view slot, std::string_view value) {
  const auto at = s.find(slot);
  if (at != std::string::npos) s.replace(at, slot.size(), value);
}

}  // namespace

std::string build_autoformalization_prompt(std::string_view question, std::string_view answer,
                                           std::string_view wrapper) {
  if (text::trim(question).empty() || text::trim(answer).empty()) {
    throw InvalidInput("autoformalization prompt needs a question and an answer");
  }
  std::string prompt(kAutoformalizationTemplate);
  // Fill {answer} first so a question containing "{answer}" is left alone.
  replace_once(prompt, "{answer}", answer);
  replace_once(prompt, "{question}", question);
  std::string out(wrapper);
  if (out.find("{prompt}") == std::string::npos) {
    throw InvalidInput("prompt wrapper lacks a {prompt} placeholder");
  }
  replace_once(out, "{prompt}", prompt);
  return out;
}

void GenerationRequest::validate() const {
  if (n < 1) throw InvalidInput("n must be >= 1");
  if (temperature < 0.0) throw InvalidInput("temperature must be >= 0");
  if (temperature == 0.0 && n != 1) throw InvalidInput("greedy decoding (temperature 0) needs n = 1");
  if (max_tokens < 1) throw InvalidInput("max_tokens must be >= 1");
}

json GenerationRequest::to_json() const {
  return json{{"prompt", prompt}, {"n", n}, {"temperature", temperature}, {"max_tokens", max_tokens}};
}

void to_json(json& j, const Candidate& c) {
  j = json{{"candidate_id", c.candidate_id}, {"instance_id", c.instance_id}, {"text", c.text}};
  if (c.gen_logprob) j["gen_logprob"] = *c.gen_logprob;
  if (c.negative) j["negative"] = true;
  if (c.padded) j["padded"] = true;
}

void from_json(const json& j, Candidate& c) {
  c.candidate_id = j.at("candidate_id").get<std::string>();
  c.instance_id = j.value("instance_id", "");
  c.text = j.value("text", "");
  c.gen_logprob.reset();
  if (auto it = j.find("gen_logprob"); it != j.end() && it->is_number()) c.gen_logprob = it->get<double>();
  c.negative = j.value("negative", c.text.empty());
  c.padded = j.value("padded", false);
}

std::string candidate_id(std::string_view instance_id, int index) {
  return fmt::format("{}/{:03d}", instance_id, index);
}

namespace {

std::vector<Sample> samples_from_json(const json& reply) {
  auto it = reply.find("samples");
  if (it == reply.end() || !it->is_array()) throw BackendUnavailable("generation reply lacks samples");
  std::vector<Sample> out;
  for (const auto& s : *it) {
    Sample sample;
    sample.text = s.value("text", "");
    if (auto lp = s.find("logprob"); lp != s.end() && lp->is_number()) sample.logprob = lp->get<double>();
    out.push_back(std::move(sample));
  }
  return out;
}

json samples_to_json(const std::vector<Sample>& samples) {
  json arr = json::array();
  for (const auto& s : samples) {
    json o{{"text", s.text}};
    if (s.logprob) o["logprob"] = *s.logprob;
    arr.push_back(std::move(o));
  }
  return json{{"samples", std::move(arr)}};
}

}  // namespace

HttpGenerationBackend::HttpGenerationBackend(std::string url, int timeout_ms, int max_retries)
    : url_(std::move(url)), timeout_ms_(timeout_ms), max_retries_(max_retries) {}

std::vector<Sample> HttpGenerationBackend::generate(const GenerationRequest& req, const std::string&) {
  const auto url = http::parse_url(url_, "/generate");
  std::string last_error;
  for (int attempt = 0; attempt <= max_retries_; ++attempt) {
    if (attempt > 0) {
      ++retries_;
      std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
    }
    try {
      return samples_from_json(http::post_json(url, req.to_json(), timeout_ms_));
    } catch (const http::TransportError& e) {
      last_error = e.what();
      spdlog::debug("generation attempt {} failed: {}", attempt + 1, last_error);
    }
  }
  throw BackendUnavailable(last_error);
}

ScriptedGenerationBackend::ScriptedGenerationBackend(const std::filesystem::path& script) {
  for (const auto& row : jsonl::read(script)) {
    auto samples = samples_from_json(row);
    if (row.contains("instance_id")) {
      by_instance_[row.at("instance_id").get<std::string>()] = std::move(samples);
    } else if (row.contains("prompt_sha256")) {
      by_prompt_[row.at("prompt_sha256").get<std::string>()] = std::move(samples);
    }
  }
}

std::vector<Sample> ScriptedGenerationBackend::generate(const GenerationRequest& req,
                                                        const std::string& instance_id) {
  const std::vector<Sample>* samples = nullptr;
  if (auto it = by_instance_.find(instance_id); it != by_instance_.end()) {
    samples = &it->second;
  } else if (auto p = by_prompt_.find(text::sha256_hex(req.prompt)); p != by_prompt_.end()) {
    samples = &p->second;
  }
  if (!samples) return {};
  const auto n = std::min<std::size_t>(samples->size(), static_cast<std::size_t>(req.n));
  return {samples->begin(), samples->begin() + static_cast<long>(n)};
}

CassetteBackend::CassetteBackend(std::filesystem::path cassette) : path_(std::move(cassette)) {
  for (const auto& row : jsonl::read(path_)) {
    entries_[row.at("key").get<std::string>()] = samples_from_json(row.at("response"));
  }
}

CassetteBackend::CassetteBackend(std::filesystem::path cassette, std::unique_ptr<GenerationBackend> live)
    : path_(std::move(cassette)), live_(std::move(live)) {
  if (std::filesystem::exists(path_)) {
    for (const auto& row : jsonl::read(path_)) {
      entries_[row.at("key").get<std::string>()] = samples_from_json(row.at("response"));
    }
  }
}

std::string CassetteBackend::request_key(const GenerationRequest& req) {
  return text::sha256_hex(req.to_json().dump());
}

std::vector<Sample> CassetteBackend::generate(const GenerationRequest& req, const std::string& instance_id) {
  const auto key = request_key(req);
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  if (!live_) throw BackendUnavailable("cassette " + path_.string() + " has no entry for request " + key);
  auto samples = live_->generate(req, instance_id);
  std::lock_guard lock(mutex_);
  entries_[key] = samples;
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  out << json{{"key", key}, {"request", req.to_json()}, {"response", samples_to_json(samples)}}.dump() << '\n';
  return samples;
}

std::unique_ptr<GenerationBackend> make_generation_backend(const std::string& spec) {
  if (spec.starts_with("http://") || spec.starts_with("https://"))
    return std::make_unique<HttpGenerationBackend>(spec);
  if (spec.starts_with("mock:")) return std::make_unique<ScriptedGenerationBackend>(spec.substr(5));
  if (spec.starts_with("replay:")) return std::make_unique<CassetteBackend>(spec.substr(7));
  if (spec.starts_with("record:")) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw InvalidInput("record backend needs record:<cassette>=<url>");
    return std::make_unique<CassetteBackend>(spec.substr(7, eq - 7),
                                             std::make_unique<HttpGenerationBackend>(spec.substr(eq + 1)));
  }
  throw InvalidInput("unknown generation backend '" + spec + "'");
}

// ---------------------------------------------------------------------------
// Lean block extraction

namespace {

constexpr std::array<std::string_view, 20> kCommandStarts = {
    "theorem", "lemma",    "import",        "open",    "namespace", "section", "end",
    "variable", "universe", "set_option",   "example", "def",       "noncomputable", "instance",
    "@[",      "--",       "/-",            "#",       "|",         "·"};

bool starts_command(std::string_view line) {
  for (auto w : kCommandStarts) {
    if (w.size() <= 2 && !std::isalpha(static_cast<unsigned char>(w[0]))) {
      if (line.starts_with(w)) return true;
    } else if (text::starts_with_word(line, w)) {
      return true;
    }
  }
  return false;
}

bool anchors_region(std::string_view line) {
  return text::starts_with_word(line, "theorem") || text::starts_with_word(line, "lemma") ||
         text::starts_with_word(line, "import");
}

int alpha_words(std::string_view line) {
  int words = 0;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    auto w = line.substr(i, j - i);
    while (!w.empty() && (w.back() == ',' || w.back() == '.' || w.back() == ':' || w.back() == ';'))
      w.remove_suffix(1);
    if (!w.empty() && std::all_of(w.begin(), w.end(), [](char c) {
          return std::isalpha(static_cast<unsigned char>(c)) || c == '\'' || c == '-';
        }))
      ++words;
    i = j;
  }
  return words;
}

// A column-0 line that is not Lean: sentences and headings around the code.
bool is_prose(std::string_view line) {
  if (line.empty() || line[0] == ' ' || line[0] == '\t') return false;
  if (starts_command(line)) return false;
  if (line.starts_with("```") || line.starts_with("<|")) return true;
  const auto t = text::rtrim(line);
  const int words = alpha_words(t);
  if ((t.ends_with('.') || t.ends_with(':') || t.ends_with('!')) &&
      (words >= 2 || std::isupper(static_cast<unsigned char>(t[0]))))
    return true;
  return words >= 5;
}

struct Fence {
  std::string lang;
  std::string_view body;
};

std::vector<Fence> fenced_blocks(std::string_view raw) {
  std::vector<Fence> out;
  std::size_t pos = 0;
  for (;;) {
    const auto open = raw.find("```", pos);
    if (open == std::string_view::npos) break;
    const auto eol = raw.find('\n', open);
    if (eol == std::string_view::npos) break;
    const auto close = raw.find("```", eol + 1);
    if (close == std::string_view::npos) break;
    Fence f;
    f.lang = std::string(text::trim(raw.substr(open + 3, eol - open - 3)));
    std::transform(f.lang.begin(), f.lang.end(), f.lang.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    f.body = raw.substr(eol + 1, close - eol - 1);
    out.push_back(f);
    pos = close + 3;
  }
  return out;
}

std::string longest_code_region(std::string_view raw) {
  const auto lines = text::split_lines(raw);
  std::string best;
  std::size_t i = 0;
  while (i < lines.size()) {
    if (!anchors_region(text::ltrim(lines[i])) && !(starts_command(lines[i]) && !lines[i].empty())) {
      ++i;
      continue;
    }
    // Run of code lines starting at a command; blank lines are kept inside.
    std::size_t j = i;
    bool anchored = false;
    while (j < lines.size() && !is_prose(lines[j])) {
      anchored = anchored || anchors_region(text::ltrim(lines[j]));
      ++j;
    }
    if (anchored) {
      const auto begin = static_cast<std::size_t>(lines[i].data() - raw.data());
      const auto end = static_cast<std::size_t>(lines[j - 1].data() - raw.data()) + lines[j - 1].size();
      const auto region = text::trim(raw.substr(begin, end - begin));
      if (region.size() > best.size()) best = std::string(region);
    }
    i = std::max(j, i + 1);
  }
  return best;
}

}  // namespace

std::string extract_lean_block(std::string_view raw) {
  std::string best;
  for (const auto& f : fenced_blocks(raw)) {
    if (f.lang != "lean" && f.lang != "lean4") continue;
    const auto body = text::trim(f.body);
    if (body.size() > best.size()) best = std::string(body);
  }
  if (!best.empty()) return best;
  for (const auto& f : fenced_blocks(raw)) {
    if (!f.lang.empty()) continue;
    auto region = longest_code_region(f.body);
    if (region.size() > best.size()) best = std::move(region);
  }
  if (!best.empty()) return best;
  return longest_code_region(raw);
}

std::vector<Candidate> generate(const GenerationRequest& req, GenerationBackend& backend,
                                const std::string& instance_id) {
  req.validate();
  std::vector<Sample> samples;
  try {
    samples = backend.generate(req, instance_id);
  } catch (const BackendUnavailable&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendUnavailable(e.what());
  }
  if (samples.size() < static_cast<std::size_t>(req.n)) {
    spdlog::warn("{}: backend returned {} of {} samples; padding", instance_id, samples.size(), req.n);
  }
  std::vector<Candidate> out;
  out.reserve(static_cast<std::size_t>(req.n));
  for (int i = 0; i < req.n; ++i) {
    Candidate c;
    c.candidate_id = candidate_id(instance_id, i);
    c.instance_id = instance_id;
    if (static_cast<std::size_t>(i) < samples.size()) {
      c.text = extract_lean_block(samples[static_cast<std::size_t>(i)].text);
      c.gen_logprob = samples[static_cast<std::size_t>(i)].logprob;
    } else {
      c.padded = true;
    }
    c.negative = c.text.empty();
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Candidate> generate_all(const std::vector<GenerationItem>& items, GenerationBackend& backend,
                                    int max_in_flight) {
  std::vector<std::vector<Candidate>> per_item(items.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::string first_error;
  auto worker = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      try {
        per_item[i] = generate(items[i].request, backend, items[i].instance_id);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (!failed.exchange(true)) first_error = e.what();
        return;
      }
    }
  };
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(std::max(max_in_flight, 1)), items.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failed) throw BackendUnavailable(first_error);
  std::vector<Candidate> out;
  for (auto& group : per_item) out.insert(out.end(), group.begin(), group.end());
  return out;
}

}  // namespace procforge::gateway
