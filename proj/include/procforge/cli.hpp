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

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "procforge/compile.hpp"

namespace procforge::cli {

inline constexpr std::uint64_t kDefaultSeed = 42;

enum ExitCode : int { kOk = 0, kValidation = 1, kBackend = 2 };

struct CompilerSelection {
  std::string backend = "mock";  // "lean" or "mock"
  std::optional<std::string> lean_cmd;   // else PROCFORGE_LEAN_CMD, else "lake exe repl"
  std::optional<std::string> fixtures;   // else PROCFORGE_MOCK_FIXTURES, else lexical mock
  std::optional<std::string> pins;
  std::optional<std::string> lake_manifest;
};

/// Factory plus a stable description of the backend (for input hashes).
std::pair<compile::BackendFactory, std::string> make_compiler(const CompilerSelection& sel);

/// Runs one command line (without the program name). The one-line JSON
/// summary and any tables go to `out`; logs go to stderr. SIGINT sets
/// `cancel`, in-flight work finishes and a `.partial` marker is written.
int dispatch(const std::vector<std::string>& args, std::ostream& out);

/// Flag polled by long-running subcommands; exposed for tests.
std::atomic<bool>& cancel_flag();

}  // namespace procforge::cli
