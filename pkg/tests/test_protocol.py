"""Scenario-level invariants checked over short simulated runs."""

from collections import defaultdict

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from prestige.sim.audit import audit_safety, audit_validity
from prestige.sim.config import ConfigError, ScenarioConfig
from prestige.sim.scenario import run_scenario


def _run(**kw):
    kw.setdefault("duration_s", 6)
    return run_scenario(ScenarioConfig(**kw))


def test_failure_free_run_never_changes_view():
    r = _run(n=4)
    assert r.metrics["view_change_count"] == 0
    assert r.metrics["availability"] == pytest.approx(1.0)
    assert r.metrics["committed_tx"] > 0
    assert r.audit.ok


def test_faulty_clients_alone_cannot_force_a_view_change():
    r = _run(n=4, f_actual=1, fault_strategy="F3", faulty_clients=4, client_timeout=300.0)
    assert r.metrics["view_change_count"] == 0
    assert r.audit.ok


def test_same_seed_same_metrics():
    a = _run(n=4, f_actual=1, fault_strategy="F4+F2", rotation_s=2.0, seed=11).metrics
    b = _run(n=4, f_actual=1, fault_strategy="F4+F2", rotation_s=2.0, seed=11).metrics
    c = _run(n=4, f_actual=1, fault_strategy="F4+F2", rotation_s=2.0, seed=12).metrics
    assert a == b
    assert a != c


@pytest.fixture(scope="module")
def attacked():
    return run_scenario(ScenarioConfig(n=4, f_actual=1, fault_strategy="F4+F2", rotation_s=5.0, duration_s=60, seed=4))


def test_attacked_run_audits_clean(attacked):
    assert attacked.audit.ok, attacked.audit.to_dict()
    assert attacked.metrics["faulty_led_views"] >= 2


def test_lost_campaigns_leave_stored_reputation_untouched(attacked):
    chain = attacked.final_chain()
    for prev, block in zip(chain, chain[1:]):
        refreshed = {r.server_id for r in block.refreshes}
        for sid in block.rp_map:
            if sid != block.leader_id and sid not in refreshed:
                assert (block.rp_map[sid], block.ci_map[sid]) == (prev.rp_map[sid], prev.ci_map[sid])
    winners = {(b.v, b.leader_id) for b in chain}
    for ev in attacked.trace:
        if ev["kind"] == "split_vote":
            assert (ev["v_new"], ev["server"]) not in winners


def test_wins_without_new_blocks_strictly_raise_rp():
    # every elected leader crashes at once, so no txBlock separates two wins
    r = run_scenario(ScenarioConfig(n=4, crash_leaders=True, rotation_s=2.0, client_timeout=300.0,
                                    duration_s=40, seed=2))
    assert r.audit.ok
    wins = defaultdict(list)
    for b in r.final_chain()[1:]:
        wins[b.leader_id].append((b.rp_map[b.leader_id], b.ci_map[b.leader_id], b.refreshes))
    checked = 0
    for seq in wins.values():
        for (rp0, ci0, _), (rp1, ci1, refreshes) in zip(seq, seq[1:]):
            if ci1 == ci0 and not refreshes:
                assert rp1 > rp0
                checked += 1
    assert checked >= 3


def test_faulty_rp_never_decreases(attacked):
    faulty = attacked.faulty_ids[0]
    rps = [b.rp_map[faulty] for b in attacked.final_chain()]
    assert rps == sorted(rps)


def test_passive_baseline_runs_clean():
    r = _run(n=4, protocol="passive", passive_rotation_s=1.0)
    assert r.audit.ok
    assert r.metrics["view_change_count"] >= 3


def test_injected_double_commit_is_caught():
    r = _run(n=4, duration_s=3)
    t, sid, n, d = r.registry.commits[-1]
    other = next(dd for dd in r.registry.first_commit if dd != d)
    r.registry.commits.append((t, (sid + 1) % 4, n, other))
    assert audit_safety(r.registry)


def test_unproposed_transaction_is_caught():
    r = _run(n=4, duration_s=3)
    trace = [ev for ev in r.trace if ev["kind"] != "propose"]
    assert audit_validity(trace, r.registry, r.keyring, 4)


@pytest.mark.parametrize("bad", [dict(n=5), dict(n=4, f_actual=2, fault_strategy="F2"), dict(f_actual=1),
                                 dict(protocol="lazy"), dict(epsilon=-1)])
def test_bad_configs_rejected(bad):
    with pytest.raises((ConfigError, ValueError)):
        ScenarioConfig(**bad)


@settings(max_examples=8, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seed=st.integers(0, 10_000), fault=st.sampled_from(["F1", "F2", "F3", "F4+F2", "F4+F3"]),
       rotation=st.sampled_from([None, 2.0]))
def test_audits_hold_for_arbitrary_seeds(seed, fault, rotation):
    r = _run(n=4, f_actual=1, fault_strategy=fault, rotation_s=rotation, seed=seed, duration_s=8)
    assert r.audit.ok, r.audit.to_dict()
