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

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

#include <sys/types.h>

namespace procforge {

/// A child process started through `/bin/sh -c` with piped stdin/stdout.
/// stderr is inherited. The destructor kills and reaps the child.
class Subprocess {
 public:
  using Clock = std::chrono::steady_clock;

  explicit Subprocess(const std::string& command);
  ~Subprocess();

  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  /// Throws BackendCrashed if the child has closed its stdin.
  void write_all(std::string_view data);

  /// Reads one line (without the newline). Returns nullopt if `deadline`
  /// passes first; throws BackendCrashed on EOF.
  std::optional<std::string> read_line(Clock::time_point deadline);

  void kill();
  bool running() const { return pid_ > 0; }

 private:
  pid_t pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  std::string buffer_;
};

}  // namespace procforge
