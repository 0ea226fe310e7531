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

// Stand-in for the Lean REPL: reads blank-line separated JSON commands on
// stdin and answers in the REPL's reply format. Diagnostics come from the
// lexical mock (each `sorry` warns, each `bad_*` identifier is unknown).
//
// Test directives inside a command:
//   #mock_crash      exit without replying
//   #mock_hang       never reply
//   #mock_garbage    reply with something that is not JSON
//   #mock_sleep <ms> delay the reply

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <set>
#include <string>
#include <thread>

#include <json.hpp>

#include "procforge/compile.hpp"

using nlohmann::json;

namespace {

json pos_json(procforge::lexer::Position p) { return json{{"line", p.line}, {"column", p.column}}; }

json answer(const std::string& cmd, int env_id) {
  const auto reply = procforge::compile::mock_check(cmd);
  json messages = json::array();
  for (const auto& d : reply.diagnostics) {
    messages.push_back(json{{"severity", procforge::compile::to_string(d.severity)},
                            {"pos", pos_json(d.position())},
                            {"endPos", pos_json({d.line, d.column + 5})},
                            {"data", d.message}});
  }
  json sorries = json::array();
  for (const auto& s : reply.sorries) {
    sorries.push_back(json{{"pos", pos_json(s.pos)},
                           {"endPos", pos_json({s.pos.line, s.pos.column + 5})},
                           {"goal", "⊢ False"}});
  }
  json out = json::object();
  if (!sorries.empty()) out["sorries"] = sorries;
  if (!messages.empty()) out["messages"] = messages;
  out["env"] = env_id;
  return out;
}

}  // namespace

int main() {
  std::ios::sync_with_stdio(false);
  int next_env = 0;
  std::set<int> envs;
  std::string buffer;
  std::string line;
  auto handle = [&](const std::string& request) {
    const json req = json::parse(request, nullptr, false);
    if (req.is_discarded() || !req.contains("cmd")) {
      std::cout << json{{"message", "Could not parse JSON"}}.dump(2) << "\n\n" << std::flush;
      return;
    }
    const auto cmd = req.at("cmd").get<std::string>();
    if (req.contains("env") && !envs.contains(req.at("env").get<int>())) {
      std::cout << json{{"message", "Unknown environment."}}.dump(2) << "\n\n" << std::flush;
      return;
    }
    if (cmd.find("#mock_crash") != std::string::npos) std::_Exit(3);
    if (cmd.find("#mock_hang") != std::string::npos) std::this_thread::sleep_for(std::chrono::hours(1));
    if (auto at = cmd.find("#mock_sleep"); at != std::string::npos) {
      std::this_thread::sleep_for(std::chrono::milliseconds(std::atoi(cmd.c_str() + at + 11)));
    }
    if (cmd.find("#mock_garbage") != std::string::npos) {
      std::cout << "uncaught exception: <garbage>\n\n" << std::flush;
      return;
    }
    envs.insert(next_env);
    std::cout << answer(cmd, next_env++).dump(2) << "\n\n" << std::flush;
  };
  while (std::getline(std::cin, line)) {
    if (line.empty()) {
      if (!buffer.empty()) handle(buffer);
      buffer.clear();
      continue;
    }
    buffer += line;
    buffer += '\n';
  }
  if (!buffer.empty()) handle(buffer);
  return 0;
}
