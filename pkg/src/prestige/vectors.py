"""Reference reputation cases and a runner that checks ``compensate`` against them.

A case describes one campaign: the candidate's penalty history (oldest
first, the current penalty last), its compensation index ``ci``, the height
``ti`` of its latest txBlock and the view jump ``v -> v_new``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .reputation import compensate


@dataclass
class RepCase:
    name: str
    ti: int
    ci: int
    history: list[int]
    v: int
    v_new: int
    expected_rp: int
    c_delta: float = 1.0
    expected_delta_vc: float | None = None
    expected_delta: float | None = None
    delta_vc_tol: float = 0.01
    delta_tol: float = 0.06

    @classmethod
    def from_dict(cls, data: dict) -> "RepCase":
        return cls(**data)


@dataclass
class CaseOutcome:
    case: RepCase
    delta_tx: float
    delta_vc: float
    delta: float
    new_rp: int
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"name": self.case.name, "delta_tx": round(self.delta_tx, 4), "delta_vc": round(self.delta_vc, 4),
                "delta": round(self.delta, 4), "new_rp": self.new_rp, "expected_rp": self.case.expected_rp,
                "ok": self.ok, "failures": self.failures}


_RAMP = [1, 2, 3, 4, 5]
_PLATEAU = _RAMP + [5] * 9  # 5 held from V5 through V14

BUILTIN_CASES: list[RepCase] = [
    # campaign trajectory with no replication: every win adds exactly one
    RepCase("ramp-v2", 1, 1, [1], 1, 2, 2),
    RepCase("ramp-v3", 1, 1, [1, 2], 2, 3, 3),
    RepCase("ramp-v4", 1, 1, [1, 2, 3], 3, 4, 4),
    RepCase("ramp-v5", 1, 1, [1, 2, 3, 4], 4, 5, 5),
    RepCase("v6-no-blocks", 1, 1, _RAMP, 5, 6, 6, expected_delta_vc=0.19, expected_delta=0.0),
    RepCase("v6-twenty-blocks", 20, 1, _RAMP, 5, 6, 5, expected_delta_vc=0.19, expected_delta=1.14),
    RepCase("v7-fifty-blocks", 50, 20, _RAMP + [5], 6, 7, 6, expected_delta_vc=0.25, expected_delta=0.89),
    RepCase("v7-hundred-blocks", 100, 20, _RAMP + [5], 6, 7, 5, expected_delta_vc=0.25, expected_delta=1.2),
    RepCase("v15-after-rest", 50, 20, _PLATEAU, 14, 15, 5, expected_delta_vc=0.36, expected_delta=1.29),
    RepCase("v15-rest-and-replication", 400, 20, _PLATEAU, 14, 15, 4, expected_delta=2.05),
]


def load_cases(path) -> list[RepCase]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("cases", [data])
    return [RepCase.from_dict(item) for item in data]


def run_case(case: RepCase) -> CaseOutcome:
    rp = case.history[-1]
    b = compensate(rp, case.history, case.ti, case.ci, case.v, case.v_new, case.c_delta)
    out = CaseOutcome(case, b.delta_tx, b.delta_vc, b.delta, b.new_rp)
    if b.new_rp != case.expected_rp:
        out.failures.append(f"new_rp {b.new_rp} != {case.expected_rp}")
    if case.expected_delta_vc is not None and abs(b.delta_vc - case.expected_delta_vc) > case.delta_vc_tol:
        out.failures.append(f"delta_vc {b.delta_vc:.4f} not within {case.delta_vc_tol} of {case.expected_delta_vc}")
    if case.expected_delta is not None and abs(b.delta - case.expected_delta) > case.delta_tol:
        out.failures.append(f"delta {b.delta:.4f} not within {case.delta_tol} of {case.expected_delta}")
    return out


def run_cases(cases: list[RepCase]) -> list[CaseOutcome]:
    return [run_case(c) for c in cases]
