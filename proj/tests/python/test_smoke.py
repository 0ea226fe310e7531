# Copyright 2026 The procforge Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json
import os
import pathlib

import pytest

import procforge

FIXTURES = pathlib.Path(
    os.environ.get("PROCFORGE_TEST_FIXTURES", pathlib.Path(__file__).resolve().parents[1] / "fixtures"))


def test_extract_basic_fixture():
    src = (FIXTURES / "corpus" / "basic.lean").read_text()
    got = procforge.extract_theorems(src, "basic.lean")
    expected = json.loads((FIXTURES / "corpus" / "basic.expected.json").read_text())
    assert [r["id"] for r in got] == [r["id"] for r in expected]
    assert got[0]["statement"] == expected[0]["statement"]


def test_unbalanced_source_is_a_validation_error():
    with pytest.raises(procforge.ValidationError):
        procforge.extract_theorems("theorem a : (1 = 1 := rfl\n", "U.lean")
    assert issubclass(procforge.ValidationError, procforge.ProcforgeError)


def test_prompts_match_golden_files():
    q = "Show that for every natural number n, n + 0 = n."
    a = "By the definition of addition, adding zero leaves n unchanged."
    assert procforge.build_autoformalization_prompt(q, a) == (FIXTURES / "prompts" / "autoformalization.txt").read_text()
    assert procforge.build_informalization_prompt("theorem t : 1 = 1", "rfl") == (
        FIXTURES / "prompts" / "informalization.txt").read_text()


def test_extract_lean_block():
    raw = "Sure:\n```lean4\ntheorem x : True := trivial\n```\nDone."
    assert procforge.extract_lean_block(raw) == "theorem x : True := trivial"
    assert procforge.extract_lean_block("no code at all") == ""


def test_compile_and_label_first_error():
    body = "theorem t : 1 = 1 := by\n  simp\n  exact bad_h\n  ring\n"
    result = procforge.mock_compile(body, env="import Mathlib")
    assert result["status"] == "failed"
    labels = procforge.label(body, result)
    assert labels["labels"] == ["correct", "incorrect", "incorrect"]
    assert labels["first_error_step"] == 1
    assert [s["text"] for s in procforge.segment_proof(body)] == ["simp", "exact bad_h", "ring"]


def test_sorry_never_succeeds():
    result = procforge.mock_compile("theorem t : 1 = 1 := by\n  sorry\n")
    assert result["status"] == "failed"
    assert result["diagnostics"][0]["message"] == "declaration uses 'sorry'"


def test_metrics_and_losses():
    assert procforge.pass_at_k(5, 2, 3) == 0.9
    with pytest.raises(procforge.ValidationError):
        procforge.pass_at_k(5, 6, 1)
    assert procforge.loss([[0.5]], [[1.0]], "osv") == pytest.approx(0.693147, abs=1e-6)
    assert procforge.loss([[0.3, 0.6]], [[1.0, 1.0]]) == pytest.approx(procforge.loss([[0.3, 0.6]], [[1.0]], "osv"))


def test_scores_and_selection():
    scores = [procforge.make_score("x/000", "x", [0.9, 0.4]),
              procforge.make_score("x/001", "x", [0.7, 0.8])]
    assert scores[0]["sample_score"] == pytest.approx(0.4)
    assert procforge.select_mp1(scores) == ("x/001", False)
    p = procforge.toy_score(["simp", "sorry"])
    assert p[0] > 0.5 > p[1]


def test_curation_boundary():
    rec = {"id": "r", "source_path": "", "env": "", "statement": "theorem " + "s" * 92, "proof": "p" * 101,
           "nl_question": "q" * 200, "nl_answer": "a" * 201}
    out = procforge.curate([rec])
    assert [r["id"] for r in out["kept"]] == ["r"]
    rec["nl_answer"] = "a" * 200
    assert procforge.curate([rec])["rejected"] == [{"id": "r", "reason": "NL_TOO_SHORT"}]


def test_cli_in_process(tmp_path):
    code, summary, _ = procforge.run_cli(["stats", "-d", str(FIXTURES / "loop" / "dataset.jsonl"), "--json"])
    assert code == 0
    code, summary, _ = procforge.run_cli([
        "loop", "run", "--policy", "both", "--workspace", str(tmp_path), "-d", str(FIXTURES / "loop" / "dataset.jsonl"),
        "--gen-backend", "mock:" + str(FIXTURES / "loop" / "gen_script.jsonl"), "--n", "2", "--temperature", "0.7",
        "--scorer", "toy", "--compiler", "mock", "--fixtures", str(FIXTURES / "loop" / "mock_fixtures.json"),
        "--timeout-ms", "300"])
    assert code == 0
    assert summary["manifest"]["counts"]["selected_both"] == 15
    code, _, _ = procforge.run_cli(["stats", "--bogus"])
    assert code == 1
