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

#include <stdexcept>
#include <string>

namespace procforge {

/// Coarse classification used by the CLI to pick an exit code.
enum class ErrorKind {
  validation,  // bad input, bad arguments, violated preconditions
  backend,     // a compiler, scorer or generation backend failed
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define PROCFORGE_DEFINE_ERROR(Name, Kind)                              \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

// corpus
PROCFORGE_DEFINE_ERROR(UnbalancedSource, validation)
PROCFORGE_DEFINE_ERROR(InsufficientBasicPool, validation)
PROCFORGE_DEFINE_ERROR(MalformedReply, validation)

// compile
PROCFORGE_DEFINE_ERROR(ProtocolError, backend)
PROCFORGE_DEFINE_ERROR(BackendCrashed, backend)

// labels / verifier / metrics
PROCFORGE_DEFINE_ERROR(UnlabelableResult, validation)
PROCFORGE_DEFINE_ERROR(ShapeMismatch, validation)
PROCFORGE_DEFINE_ERROR(EmptyCandidateSet, validation)
PROCFORGE_DEFINE_ERROR(ScorerUnavailable, backend)
PROCFORGE_DEFINE_ERROR(DomainError, validation)
PROCFORGE_DEFINE_ERROR(MissingResult, validation)
PROCFORGE_DEFINE_ERROR(KeyMismatch, validation)

// generation / loop
PROCFORGE_DEFINE_ERROR(BackendUnavailable, backend)
PROCFORGE_DEFINE_ERROR(StalePipeline, validation)
PROCFORGE_DEFINE_ERROR(RoundConflict, validation)

// generic
PROCFORGE_DEFINE_ERROR(InvalidInput, validation)

#undef PROCFORGE_DEFINE_ERROR

}  // namespace procforge
