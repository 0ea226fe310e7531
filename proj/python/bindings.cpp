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

// Python bindings. Structured values cross the boundary as JSON text; the
// `procforge` package decodes them.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "procforge/cli.hpp"
#include "procforge/compile.hpp"
#include "procforge/corpus.hpp"
#include "procforge/error.hpp"
#include "procforge/gateway.hpp"
#include "procforge/metrics.hpp"
#include "procforge/steps.hpp"
#include "procforge/verifier.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace procforge;

namespace {

std::string extract_theorems(const std::string& source, const std::string& path) {
  return json(corpus::extract_theorems(source, path)).dump();
}

std::string segment(const std::string& body) {
  json out = json::array();
  for (const auto& s : steps::segment_proof(body))
    out.push_back({{"index", s.index}, {"text", s.text}, {"line_start", s.line_start}, {"line_end", s.line_end}});
  return out.dump();
}

std::string mock_compile(const std::string& body, const std::string& env, const std::string& fixtures,
                         int timeout_ms) {
  auto fx = std::make_shared<compile::MockFixtures>(fixtures.empty() ? compile::MockFixtures{}
                                                                     : compile::MockFixtures::from_json(json::parse(fixtures)));
  compile::MockBackend backend(fx);
  compile::CompileJob job;
  job.env = env;
  job.body = body;
  job.timeout_ms = timeout_ms;
  return compile::to_json(compile::compile_one(job, backend), false).dump();
}

std::string label(const std::string& body, const std::string& result_json, const std::string& scheme) {
  const auto result = compile::to_body_coordinates(json::parse(result_json).get<compile::CompilationResult>());
  const auto steps = steps::segment_proof(body);
  const auto s = steps::scheme_from_string(scheme);
  return json(s == steps::Scheme::process ? steps::label_process(steps, result)
                                          : steps::label_outcome(steps, result))
      .dump();
}

double loss(const std::vector<std::vector<double>>& probs, const std::vector<std::vector<double>>& labels,
            const std::string& scheme) {
  if (scheme == "psv") return verifier::cross_entropy_process(probs, labels).value;
  if (scheme != "osv") throw InvalidInput("scheme must be 'psv' or 'osv'");
  std::vector<double> y;
  for (const auto& row : labels) {
    if (row.size() != 1) throw ShapeMismatch("the outcome loss takes one label per sample");
    y.push_back(row[0]);
  }
  return verifier::cross_entropy_outcome(probs, y).value;
}

std::string score(const std::string& candidate_id, const std::string& instance_id, std::vector<double> probs,
                  const std::string& aggregation) {
  return json(verifier::make_score(candidate_id, instance_id, std::move(probs),
                                   verifier::aggregation_from_string(aggregation)))
      .dump();
}

py::tuple select_mp1(const std::string& scores_json) {
  const auto sel = verifier::select_mp1(json::parse(scores_json).get<std::vector<verifier::VerifierScore>>());
  return py::make_tuple(sel.candidate_id, sel.fallback);
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  int code = 0;
  {
    py::gil_scoped_release release;
    code = cli::dispatch(args, out);
  }
  return py::make_tuple(code, out.str());
}

}  // namespace

PYBIND11_MODULE(_procforge, m) {
  m.doc() = "procforge native core";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> validation;
  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> backend;
  const py::object base = py::exception<Error>(m, "ProcforgeError", PyExc_RuntimeError);
  validation.call_once_and_store_result(
      [&] { return py::object(py::exception<Error>(m, "ValidationError", base.ptr())); });
  backend.call_once_and_store_result(
      [&] { return py::object(py::exception<Error>(m, "BackendError", base.ptr())); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(e.kind() == ErrorKind::validation ? validation.get_stored() : backend.get_stored(), e.what());
    } catch (const json::exception& e) {
      py::set_error(validation.get_stored(), e.what());
    }
  });

  m.def("extract_theorems", &extract_theorems, py::arg("source"), py::arg("path"));
  m.def("build_informalization_prompt", [](const std::string& statement, const std::string& proof) {
    corpus::TheoremRecord t;
    t.statement = statement;
    t.proof = proof;
    return corpus::build_informalization_prompt(t);
  }, py::arg("statement"), py::arg("proof"));
  m.def("parse_informalization_reply", [](const std::string& reply) {
    const auto r = corpus::parse_informalization_reply(reply);
    return py::make_tuple(r.question, r.answer);
  }, py::arg("reply"));
  m.def("curate", [](const std::string& records_json, const std::vector<std::string>& reject) {
    const auto res = corpus::curate(json::parse(records_json).get<std::vector<corpus::ParallelRecord>>(),
                                    std::set<std::string>(reject.begin(), reject.end()));
    json rejected = json::array();
    for (const auto& r : res.rejected) rejected.push_back({{"id", r.record.id}, {"reason", corpus::to_string(r.reason)}});
    return json{{"kept", res.kept}, {"rejected", rejected}}.dump();
  }, py::arg("records_json"), py::arg("reject_list") = std::vector<std::string>{});
  m.def("build_autoformalization_prompt", [](const std::string& q, const std::string& a, const std::string& w) {
    return gateway::build_autoformalization_prompt(q, a, w);
  }, py::arg("question"), py::arg("answer"), py::arg("wrapper") = "{prompt}");
  m.def("extract_lean_block", [](const std::string& raw) { return gateway::extract_lean_block(raw); },
        py::arg("raw"));
  m.def("segment_proof", &segment, py::arg("body"));
  m.def("mock_compile", &mock_compile, py::arg("body"), py::arg("env") = "", py::arg("fixtures_json") = "",
        py::arg("timeout_ms") = compile::kDefaultTimeoutMs);
  m.def("label", &label, py::arg("body"), py::arg("result_json"), py::arg("scheme") = "process");
  m.def("pass_at_k", &metrics::pass_at_k, py::arg("n"), py::arg("c"), py::arg("k"));
  m.def("loss", &loss, py::arg("probs"), py::arg("labels"), py::arg("scheme") = "psv");
  m.def("toy_score", [](const std::vector<std::string>& steps) { return verifier::ToyScorer{}.score("", steps); },
        py::arg("steps"));
  m.def("make_score", &score, py::arg("candidate_id"), py::arg("instance_id"), py::arg("step_probs"),
        py::arg("aggregation") = "min");
  m.def("select_mp1", &select_mp1, py::arg("scores_json"));
  m.def("run_cli", &run_cli, py::arg("args"));
}
