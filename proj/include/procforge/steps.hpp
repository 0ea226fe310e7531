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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "procforge/compile.hpp"
#include "procforge/lexer.hpp"

namespace procforge::steps {

struct ProofStep {
  int index = 0;
  std::string text;
  int line_start = 1;
  int line_end = 1;
  lexer::Position begin;  // first character
  lexer::Position end;    // one past the last character

  friend bool operator==(const ProofStep&, const ProofStep&) = default;
};

/// Splits a candidate into proof steps.
///
/// `body` may be a full declaration (`theorem ... := proof`, optionally after
/// imports and `open` lines) or a bare proof. A tactic proof (`by ...`) is split
/// at line breaks and at `;` outside brackets and strings; a line break inside
/// brackets, or next to a `<;>` combinator, does not end a step. Blank and
/// comment-only lines are not steps. A term proof is a single step.
std::vector<ProofStep> segment_proof(std::string_view body);

enum class Label { correct, incorrect };
enum class Scheme { process, outcome };

std::string_view to_string(Label l);
std::string_view to_string(Scheme s);
Scheme scheme_from_string(std::string_view s);

struct StepLabels {
  std::string candidate_id;
  Scheme scheme = Scheme::process;
  std::vector<ProofStep> steps;
  std::vector<Label> labels;
  std::optional<int> first_error_step;

  bool all_correct() const;
};

void to_json(nlohmann::json& j, const StepLabels& l);
void from_json(const nlohmann::json& j, StepLabels& l);

/// Position of the first error or sorry warning, if any. Ties on the line
/// go to the smallest column.
std::optional<lexer::Position> first_failure(const std::vector<compile::Diagnostic>& diagnostics);

/// First-error-location labels. `result` must be in body coordinates (see
/// compile::to_body_coordinates). Steps that end at or before the first
/// failure are correct; the step containing it and every later step are
/// incorrect. A failed result whose failure lies after every step charges
/// the last step. Throws UnlabelableResult for timeout/backend_error.
StepLabels label_process(const std::vector<ProofStep>& steps,
                         const compile::CompilationResult& result);

/// Uniform labels from the final status.
StepLabels label_outcome(const std::vector<ProofStep>& steps,
                         const compile::CompilationResult& result);

}  // namespace procforge::steps
