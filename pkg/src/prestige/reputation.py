"""Reputation engine: turns a server's block history into a penalty.

Everything here is a pure function over immutable inputs. Nothing in this
module writes to a ledger; the values it returns only become a server's
stored ``(rp, ci)`` once that server wins an election.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import fmean, pstdev
from typing import Iterable, Protocol, Sequence

INITIAL_RP = 1
INITIAL_CI = 1


class ReputationError(ValueError):
    """Raised for inputs that a correct caller can never produce."""


@dataclass(frozen=True)
class ReputationRecord:
    server_id: int
    rp: int
    ci: int

    def __post_init__(self) -> None:
        if self.rp < 1:
            raise ReputationError(f"rp must be >= 1, got {self.rp}")
        if self.ci < 1:
            raise ReputationError(f"ci must be >= 1, got {self.ci}")


@dataclass(frozen=True)
class CompensationBreakdown:
    """Intermediate values of one penalty calculation."""

    rp_temp: int
    delta_tx: float
    delta_vc: float
    delta: float
    new_rp: int
    new_ci: int


class _VcBlockLike(Protocol):
    v: int
    rp_map: dict
    ci_map: dict


class _TxBlockLike(Protocol):
    n: int


def penalize(rp_current: int, v_current: int, v_new: int) -> int:
    """Raise the penalty by the number of views skipped."""
    if v_new <= v_current:
        raise ReputationError(f"campaigned view {v_new} not above current view {v_current}")
    if rp_current < 1:
        raise ReputationError(f"rp must be >= 1, got {rp_current}")
    return rp_current + (v_new - v_current)


def delta_tx(ti: int, ci: int) -> float:
    """Incremental log responsiveness: share of blocks not yet used for compensation."""
    if ti < 1 or ci < 1:
        raise ReputationError(f"ti and ci must be >= 1 (ti={ti}, ci={ci})")
    if ci > ti:
        raise ReputationError(f"compensation index {ci} exceeds committed height {ti}")
    return (ti - ci) / ti


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def delta_vc(rp_current: int, history: Sequence[int]) -> float:
    """Leadership zealousness.

    One minus the logistic of the z-score of ``rp_current`` against the
    population mean/std of ``history``. A flat history (std 0) scores 0.5.
    """
    if not history:
        raise ReputationError("penalty history must not be empty")
    sigma = pstdev(history)
    if sigma == 0:
        return 0.5
    z = (rp_current - fmean(history)) / sigma
    return 1.0 - _sigmoid(z)


def compensate(
    rp_current: int,
    history: Sequence[int],
    ti: int,
    ci: int,
    v_current: int,
    v_new: int,
    c_delta: float = 1.0,
) -> CompensationBreakdown:
    """Penalize then compensate, returning every intermediate value."""
    rp_temp = penalize(rp_current, v_current, v_new)
    dtx = delta_tx(ti, ci)
    dvc = delta_vc(rp_current, history)
    delta = rp_temp * c_delta * dtx * dvc
    deduction = math.floor(delta)
    # c_delta > 1 could push the deduction past rp_temp - 1
    deduction = max(0, min(deduction, rp_temp - 1))
    return CompensationBreakdown(
        rp_temp=rp_temp,
        delta_tx=dtx,
        delta_vc=dvc,
        delta=delta,
        new_rp=rp_temp - deduction,
        new_ci=ti,
    )


def penalty_history(chain: Iterable[_VcBlockLike], server_id: int) -> list[int]:
    """Collect ``server_id``'s penalty from every block, head first."""
    out = []
    for block in chain:
        try:
            out.append(block.rp_map[server_id])
        except KeyError:
            raise ReputationError(f"server {server_id} missing from vcBlock v={block.v}") from None
    if not out:
        raise ReputationError("empty vcBlock chain")
    return out


def calc_rp(
    v_new: int,
    vc_chain: Sequence[_VcBlockLike],
    latest_tx_block: _TxBlockLike,
    server_id: int,
    c_delta: float = 1.0,
    head_segment: tuple[int, int] | None = None,
) -> tuple[int, int]:
    """Compute ``(new_rp, new_ci)`` for ``server_id`` campaigning for ``v_new``.

    ``vc_chain`` runs from the head vcBlock back to genesis. ``head_segment``
    overrides the head's stored ``(rp, ci)`` for the server when a refresh
    has amended it.
    """
    return calc_rp_breakdown(v_new, vc_chain, latest_tx_block, server_id, c_delta, head_segment)[:2]


def calc_rp_breakdown(
    v_new: int,
    vc_chain: Sequence[_VcBlockLike],
    latest_tx_block: _TxBlockLike,
    server_id: int,
    c_delta: float = 1.0,
    head_segment: tuple[int, int] | None = None,
) -> tuple[int, int, CompensationBreakdown]:
    if not vc_chain:
        raise ReputationError("empty vcBlock chain")
    for newer, older in zip(vc_chain, vc_chain[1:]):
        if older.v >= newer.v:
            raise ReputationError(f"malformed chain: view {older.v} follows {newer.v}")
    head = vc_chain[0]
    history = penalty_history(vc_chain, server_id)
    if head_segment is not None:
        rp, ci = head_segment
        history[0] = rp
    else:
        rp, ci = head.rp_map[server_id], head.ci_map[server_id]
    b = compensate(rp, history, latest_tx_block.n, ci, head.v, v_new, c_delta)
    return b.new_rp, b.new_ci, b


def refresh_values(initial_rp: int = INITIAL_RP, initial_ci: int = INITIAL_CI) -> tuple[int, int]:
    return initial_rp, initial_ci
