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

// Scripted HTTP backend for offline runs:
//   POST /generate {prompt, n, temperature, max_tokens} -> {samples: [...]}
//   POST /score    {prompt, steps}                      -> {p_correct: [...]}
// Prints "listening on <port>" once the socket is bound.

#include <atomic>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "procforge/gateway.hpp"
#include "procforge/verifier.hpp"

using nlohmann::json;

int main(int argc, char** argv) {
  CLI::App app{"procforge mock generation/scoring server"};
  int port = 0;
  std::optional<std::string> script;
  int fail_first = 0;
  int short_by = 0;
  app.add_option("--port", port, "Port (0 picks a free one)");
  app.add_option("--script", script, "JSON-lines of {prompt_sha256, samples}");
  app.add_option("--fail-first", fail_first, "Answer the first N /generate calls with 503");
  app.add_option("--short", short_by, "Return this many fewer samples than requested");
  CLI11_PARSE(app, argc, argv);

  std::optional<procforge::gateway::ScriptedGenerationBackend> scripted;
  if (script) scripted.emplace(*script);
  const procforge::verifier::ToyScorer toy;
  std::atomic<int> calls{0};

  httplib::Server server;
  server.Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
    if (calls.fetch_add(1) < fail_first) {
      res.status = 503;
      return;
    }
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("prompt")) {
      res.status = 400;
      return;
    }
    procforge::gateway::GenerationRequest g;
    g.prompt = body.at("prompt").get<std::string>();
    g.n = body.value("n", 1);
    g.temperature = body.value("temperature", 0.0);
    g.max_tokens = body.value("max_tokens", 2048);
    std::vector<procforge::gateway::Sample> samples;
    if (scripted) samples = scripted->generate(g, "");
    if (samples.empty()) {
      for (int i = 0; i < g.n; ++i) {
        samples.push_back({fmt::format("Here is the formalization:\n```lean\ntheorem t_{} : 1 + 1 = 2 := by\n  norm_num\n```",
                                       i),
                           -0.5 * (i + 1)});
      }
    }
    const int keep = std::max(0, std::min<int>(static_cast<int>(samples.size()), g.n - short_by));
    json arr = json::array();
    for (int i = 0; i < keep; ++i) {
      json s{{"text", samples[static_cast<std::size_t>(i)].text}};
      if (samples[static_cast<std::size_t>(i)].logprob) s["logprob"] = *samples[static_cast<std::size_t>(i)].logprob;
      arr.push_back(std::move(s));
    }
    res.set_content(json{{"samples", arr}}.dump(), "application/json");
  });
  server.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("steps")) {
      res.status = 400;
      return;
    }
    const auto p = toy.score(body.value("prompt", ""), body.at("steps").get<std::vector<std::string>>());
    res.set_content(json{{"p_correct", p}}.dump(), "application/json");
  });

  if (port == 0) {
    port = server.bind_to_any_port("127.0.0.1");
  } else if (!server.bind_to_port("127.0.0.1", port)) {
    std::cerr << "cannot bind port " << port << "\n";
    return 2;
  }
  std::cout << "listening on " << port << std::endl;
  server.listen_after_bind();
  return 0;
}
