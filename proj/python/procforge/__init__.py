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

"""Python interface to the procforge core."""

from __future__ import annotations

import json
from typing import Any, Sequence

from . import _procforge as _core
from ._procforge import BackendError, ProcforgeError, ValidationError

__all__ = [
    "BackendError",
    "ProcforgeError",
    "ValidationError",
    "build_autoformalization_prompt",
    "build_informalization_prompt",
    "curate",
    "extract_lean_block",
    "extract_theorems",
    "label",
    "loss",
    "make_score",
    "mock_compile",
    "parse_informalization_reply",
    "pass_at_k",
    "run_cli",
    "segment_proof",
    "select_mp1",
    "toy_score",
]

build_autoformalization_prompt = _core.build_autoformalization_prompt
build_informalization_prompt = _core.build_informalization_prompt
extract_lean_block = _core.extract_lean_block
parse_informalization_reply = _core.parse_informalization_reply
pass_at_k = _core.pass_at_k
toy_score = _core.toy_score


def extract_theorems(source: str, path: str) -> list[dict[str, Any]]:
    return json.loads(_core.extract_theorems(source, path))


def curate(records: Sequence[dict[str, Any]], reject_list: Sequence[str] = ()) -> dict[str, Any]:
    return json.loads(_core.curate(json.dumps(list(records)), list(reject_list)))


def segment_proof(body: str) -> list[dict[str, Any]]:
    return json.loads(_core.segment_proof(body))


def mock_compile(body: str, env: str = "", fixtures: dict[str, Any] | None = None,
                 timeout_ms: int = 60_000) -> dict[str, Any]:
    """Compile with the offline mock. Positions are in submission coordinates."""
    fx = json.dumps(fixtures) if fixtures is not None else ""
    return json.loads(_core.mock_compile(body, env, fx, timeout_ms))


def label(body: str, result: dict[str, Any], scheme: str = "process") -> dict[str, Any]:
    return json.loads(_core.label(body, json.dumps(result), scheme))


def loss(probs: Sequence[Sequence[float]], labels: Sequence[Sequence[float]], scheme: str = "psv") -> float:
    return _core.loss([list(p) for p in probs], [list(y) for y in labels], scheme)


def make_score(candidate_id: str, instance_id: str, step_probs: Sequence[float],
               aggregation: str = "min") -> dict[str, Any]:
    return json.loads(_core.make_score(candidate_id, instance_id, list(step_probs), aggregation))


def select_mp1(scores: Sequence[dict[str, Any]]) -> tuple[str, bool]:
    return _core.select_mp1(json.dumps(list(scores)))


def run_cli(args: Sequence[str]) -> tuple[int, dict[str, Any] | None, str]:
    """Run a CLI command in-process; returns (exit code, summary, stdout)."""
    code, out = _core.run_cli(list(args))
    summary = None
    for line in reversed(out.splitlines()):
        if line.strip():
            try:
                summary = json.loads(line)
            except json.JSONDecodeError:
                pass
            break
    return code, summary, out
