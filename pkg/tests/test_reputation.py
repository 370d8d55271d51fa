import math

import pytest
from hypothesis import given, strategies as st

from prestige.reputation import (
    INITIAL_RP, ReputationError, calc_rp, compensate, delta_tx, delta_vc, penalize,
)
from prestige.vectors import BUILTIN_CASES, RepCase, run_case, run_cases


def oracle_delta_vc(rp, history):
    # independent restatement: population std, logistic written out in full
    n = len(history)
    mean = sum(history) / n
    var = sum((h - mean) ** 2 for h in history) / n
    if var == 0:
        return 0.5
    return 1.0 - 1.0 / (1.0 + math.exp(-(rp - mean) / math.sqrt(var)))


# frozen oracle outputs for the reference rows
FROZEN = {
    "v6-no-blocks": (0.195570, 0.0, 6),
    "v6-twenty-blocks": (0.195570, 1.114751, 5),
    "v7-fifty-blocks": (0.246376, 0.886954, 6),
    "v7-hundred-blocks": (0.246376, 1.182605, 5),
    "v15-after-rest": (0.363775, 1.309590, 5),
    "v15-rest-and-replication": (0.363775, 2.073517, 4),
}


def test_oracle_matches_frozen_values():
    for case in BUILTIN_CASES:
        if case.name not in FROZEN:
            continue
        dvc, delta, rp = FROZEN[case.name]
        temp = case.history[-1] + case.v_new - case.v
        o_dvc = oracle_delta_vc(case.history[-1], case.history)
        o_delta = temp * (case.ti - case.ci) / case.ti * o_dvc
        assert o_dvc == pytest.approx(dvc, abs=1e-5)
        assert o_delta == pytest.approx(delta, abs=1e-5)
        assert temp - math.floor(o_delta) == rp


@pytest.mark.parametrize("case", BUILTIN_CASES, ids=lambda c: c.name)
def test_builtin_case_passes(case):
    out = run_case(case)
    assert out.ok, out.failures
    if case.name in FROZEN:
        dvc, delta, rp = FROZEN[case.name]
        assert out.delta_vc == pytest.approx(dvc, abs=1e-5)
        assert out.delta == pytest.approx(delta, abs=1e-5)


def test_final_penalties_of_reference_rows():
    rows = [o.new_rp for o in run_cases(BUILTIN_CASES) if o.case.name.startswith(("v6", "v7", "v15-after"))]
    assert rows == [6, 5, 6, 5, 5]


def test_perturbed_expectation_is_reported():
    bad = RepCase("bad", 20, 1, [1, 2, 3, 4, 5], 5, 6, expected_rp=6)
    out = run_case(bad)
    assert not out.ok and "new_rp" in out.failures[0]


def test_penalize_counts_skipped_views():
    assert penalize(3, 10, 11) == 4
    assert penalize(3, 10, 14) == 7
    with pytest.raises(ReputationError):
        penalize(3, 10, 10)


def test_delta_tx_edges():
    assert delta_tx(1, 1) == 0.0
    assert delta_tx(100, 20) == 0.8
    with pytest.raises(ReputationError):
        delta_tx(5, 6)


def test_flat_history_scores_half():
    assert delta_vc(3, [3, 3, 3]) == 0.5


class _Vc:
    def __init__(self, v, rp, ci):
        self.v, self.rp_map, self.ci_map = v, {0: rp}, {0: ci}


class _Tx:
    def __init__(self, n):
        self.n = n


def test_calc_rp_reads_chain_head_first():
    chain = [_Vc(5, 5, 1), _Vc(4, 4, 1), _Vc(3, 3, 1), _Vc(2, 2, 1), _Vc(1, 1, 1)]
    assert calc_rp(6, chain, _Tx(20), 0) == (5, 20)
    assert calc_rp(6, chain, _Tx(1), 0) == (6, 1)


histories = st.lists(st.integers(1, 50), min_size=1, max_size=30)


@given(histories, st.integers(1, 500), st.integers(1, 20))
def test_without_new_blocks_penalty_strictly_grows(history, ci, jump):
    b = compensate(history[-1], history, ci, ci, 10, 10 + jump)
    assert b.new_rp == history[-1] + jump
    assert b.new_rp > history[-1]


@given(histories, st.integers(1, 500), st.integers(0, 500), st.integers(1, 20), st.floats(0.0, 4.0))
def test_penalty_bounded_by_increase(history, ci, extra, jump, c_delta):
    ti = ci + extra
    b = compensate(history[-1], history, ti, ci, 3, 3 + jump, c_delta)
    assert INITIAL_RP <= b.new_rp <= b.rp_temp == history[-1] + jump
    assert b.new_ci == ti
    assert 0.0 <= b.delta_tx <= 1.0


@given(histories)
def test_delta_vc_open_unit_interval(history):
    value = delta_vc(history[-1], history)
    assert 0.0 < value < 1.0
    assert value == pytest.approx(oracle_delta_vc(history[-1], history), abs=1e-12)


@given(st.integers(1, 40), st.integers(1, 1000), st.integers(1, 1000))
def test_more_blocks_never_hurt(rp, ti_a, ti_b):
    lo, hi = sorted((ti_a, ti_b))
    history = list(range(1, rp + 1))
    a = compensate(rp, history, lo, 1, 5, 6)
    b = compensate(rp, history, hi, 1, 5, 6)
    assert b.new_rp <= a.new_rp
