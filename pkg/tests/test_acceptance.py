"""Acceptance criteria, one test each, run at their stated tolerances.

Every test appends a PASS/FAIL line to the terminal summary before
asserting, so a full run prints one line per criterion.
"""

from __future__ import annotations

import os
import random
import time
from multiprocessing import Pool
from statistics import fmean, median

import pytest

from conftest import ACCEPTANCE_LINES
from prestige.crypto import HashPuzzle, QCVerifier, digest
from prestige.ledger import ref_digest
from prestige.sim import metrics as mx
from prestige.sim.audit import audit_rp_conservation, instance_stats
from prestige.sim.config import ScenarioConfig
from prestige.sim.scenario import run_scenario, split_vote_study
from prestige.vectors import BUILTIN_CASES, run_cases

pytestmark = pytest.mark.acceptance
WORKERS = os.cpu_count() or 1


def report(number: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def _map(fn, items):
    if WORKERS > 1 and len(items) > 1:
        with Pool(WORKERS) as pool:
            return pool.map(fn, items)
    return [fn(x) for x in items]


# -- 1 ----------------------------------------------------------------------


def test_c01_reputation_golden_vectors():
    t0 = time.perf_counter()
    outcomes = {o.case.name: o for o in run_cases(BUILTIN_CASES)}
    rows = ["v6-no-blocks", "v6-twenty-blocks", "v7-fifty-blocks", "v7-hundred-blocks", "v15-after-rest"]
    finals = [outcomes[r].new_rp for r in rows]
    dvc_ok = all(abs(outcomes[r].delta_vc - e) <= 0.01 for r, e in zip(rows, [0.19, 0.19, 0.25, 0.25, 0.36]))
    delta_ok = all(abs(outcomes[r].delta - e) <= 0.06 for r, e in zip(rows, [0.0, 1.14, 0.89, 1.2, 1.29]))
    trajectory = [outcomes[f"ramp-v{v}"].new_rp for v in (2, 3, 4, 5)]
    elapsed = time.perf_counter() - t0
    ok = (finals == [6, 5, 6, 5, 5] and dvc_ok and delta_ok and trajectory == [2, 3, 4, 5]
          and outcomes["v15-rest-and-replication"].new_rp == 4 and all(o.ok for o in outcomes.values())
          and elapsed < 1.0)
    report(1, "reputation golden vectors", ok, f"final rp {finals}, ramp {trajectory}, {elapsed * 1000:.1f} ms")
    assert ok


# -- 2, 3 -------------------------------------------------------------------

SWEEP_FAULTS = ["none", "F1", "F2", "F3", "F4+F2", "F4+F3"]


def _sweep_configs() -> list[ScenarioConfig]:
    out = []
    sizes = [4] * 120 + [7] * 56 + [16] * 24
    for i, n in enumerate(sizes):
        fault = SWEEP_FAULTS[i % len(SWEEP_FAULTS)]
        f = (n - 1) // 3
        out.append(ScenarioConfig(
            n=n, f_actual=0 if fault == "none" else f, fault_strategy=fault, rotation_s=1.5,
            attack_policy="S1" if i % 2 else "S2", duration_s=12 if n < 16 else 8, clients=4, seed=1000 + i,
        ))
    return out


def _sweep_one(cfg: ScenarioConfig) -> dict:
    r = run_scenario(cfg)
    return {"n": cfg.n, "fault": cfg.fault_strategy.value, "views": len(r.timeline),
            "violations": {k: len(v) for k, v in r.audit.violations.items()},
            "examples": {k: v[:2] for k, v in r.audit.violations.items() if v}}


@pytest.fixture(scope="module")
def sweep():
    return _map(_sweep_one, _sweep_configs())


def _violations(sweep, names) -> tuple[int, list]:
    total, examples = 0, []
    for row in sweep:
        for name in names:
            total += row["violations"].get(name, 0)
            examples += row["examples"].get(name, [])
    return total, examples[:3]


def test_c02_protocol_properties(sweep):
    views = sum(r["views"] for r in sweep)
    bad, examples = _violations(sweep, ["unique_leader", "leader_height", "vote_reverification", "qc_thresholds"])
    sizes = sorted({r["n"] for r in sweep})
    faults = sorted({r["fault"] for r in sweep})
    ok = len(sweep) >= 200 and views >= 1000 and bad == 0 and sizes == [4, 7, 16] and len(faults) == 6
    report(2, "protocol properties P1-P3", ok, f"{len(sweep)} scenarios, {views} views, {bad} violations {examples}")
    assert ok


def test_c03_safety_and_validity(sweep):
    bad, examples = _violations(sweep, ["safety", "validity"])
    ok = len(sweep) >= 200 and bad == 0
    report(3, "safety and validity", ok, f"{len(sweep)} scenarios, {bad} violations {examples}")
    assert ok


# -- 4 ----------------------------------------------------------------------


def test_c04_split_vote_study():
    calm = split_vote_study(4, 50.0, 1000, seed=1, jobs=WORKERS)
    tight = split_vote_study(4, 0.0, 1000, seed=1, jobs=WORKERS)
    attacked = split_vote_study(4, 150.0, 1000, seed=1, attack=True, jobs=WORKERS)
    ok = calm["split_votes"] == 0 and tight["split_votes"] > 0 and attacked["split_votes"] == 0
    report(4, "split-vote study", ok,
           f"eps=50: {calm['split_votes']}, eps=0: {tight['split_votes']}, F1 eps=150: {attacked['split_votes']} "
           f"(1000 view changes each)")
    assert ok


# -- 5 ----------------------------------------------------------------------


def test_c05_attack_suppression():
    cfg = ScenarioConfig(n=16, f_actual=3, fault_strategy="F4+F2", attack_policy="S1", rotation_s=10.0,
                         duration_s=300, seed=1)
    r = run_scenario(cfg)
    chain = r.final_chain()
    faulty = r.faulty_ids
    monotone, strict = True, True
    for sid in faulty:
        stored = [b.rp_map[sid] for b in chain]
        monotone &= stored == sorted(stored)
        wins = [b.rp_map[sid] for b in chain if b.leader_id == sid]
        strict &= all(b > a for a, b in zip(wins, wins[1:]))
    exhausted_at = {}
    for ev in r.trace:
        if ev["kind"] == "exhausted" and ev["server"] in faulty:
            exhausted_at.setdefault(ev["server"], ev["t"])
    late_wins = [v for v in r.timeline if v["leader"] in exhausted_at and v["start"] > exhausted_at[v["leader"]]]
    cutoff = cfg.duration_s * 1000 * 2 / 3
    final = [v for v in r.timeline if v["start"] >= cutoff]
    correct_share = sum(v["leader"] not in faulty for v in final) / len(final) if final else 0.0
    ok = monotone and strict and not late_wins and correct_share >= 0.9 and r.audit.ok
    report(5, "attack suppression", ok,
           f"rp non-decreasing={monotone}, strictly rising per win={strict}, wins after exhaustion={len(late_wins)}, "
           f"correct-leader share in final third={correct_share:.2f}")
    assert ok


# -- 6 ----------------------------------------------------------------------


def test_c06_pow_statistics():
    puzzle = HashPuzzle(bits_per_rp=4, mode="real")
    rng = random.Random(6)
    details, ok = [], True
    for rp in (1, 2, 3):
        iters = [puzzle.solve(digest("pow", rp, i), rp, rng).iterations for i in range(1000)]
        ratio = fmean(iters) / 2 ** (4 * rp)
        ok &= abs(ratio - 1) <= 0.15
        details.append(f"rp{rp} mean/expected={ratio:.3f}")
    sol = puzzle.solve(digest("verify"), 2, rng)
    calls = []
    for _ in range(50):
        before = puzzle.hash_calls
        assert puzzle.verify(sol.payload_digest, sol.nonce, 2, sol.hash_result)
        calls.append(puzzle.hash_calls - before)
    ok &= set(calls) == {1}
    report(6, "PoW statistics", ok, ", ".join(details) + f", hashes per verify={sorted(set(calls))}")
    assert ok


# -- 7 ----------------------------------------------------------------------

ROBUST_BASE = dict(n=4, clients=128, batch_size=128, proc_ms_per_tx=0.5, proc_ms_per_msg=0.05,
                   passive_rotation_s=0.5, duration_s=30)
ROBUST_SEEDS = (1, 2, 3)


def _throughput(args) -> float:
    kw, seed = args
    return run_scenario(ScenarioConfig(**{**ROBUST_BASE, **kw}, seed=seed)).metrics["throughput_mean"]


def _recovery(args) -> tuple[float, list]:
    kw, seed = args
    r = run_scenario(ScenarioConfig(**{**ROBUST_BASE, **kw}, seed=seed))
    return r.metrics["throughput_mean"], r.throughput


def test_c07_comparative_robustness():
    quiet = dict(f_actual=1, fault_strategy="F2")
    jobs = [(kw, s) for kw in ({"protocol": "passive"}, {"protocol": "passive", **quiet}, {}, quiet)
            for s in ROBUST_SEEDS]
    tput = _map(_throughput, jobs)
    k = len(ROBUST_SEEDS)
    p_ff, p_q, a_ff, a_q = (fmean(tput[i * k:(i + 1) * k]) for i in range(4))
    passive_drop = 1 - p_q / p_ff
    active_drop = 1 - a_q / a_ff
    long = dict(rotation_s=10.0, duration_s=180, refresh_threshold=5)
    (ff_mean, _), (_, attacked) = _map(_recovery, [(long, 1), ({**long, "f_actual": 1, "fault_strategy": "F4+F2"}, 1)])
    tail = fmean(attacked[-30:])
    recovered = tail / ff_mean
    ok = passive_drop >= 0.40 and active_drop <= 0.05 and recovered >= 0.80
    report(7, "comparative robustness", ok,
           f"passive drop={passive_drop:.1%}, active drop={active_drop:.1%}, "
           f"F4+F2 trailing 30 s at {recovered:.1%} of failure-free")
    assert ok


# -- 8 ----------------------------------------------------------------------


def _availability_run(kw) -> tuple[float, list, bool]:
    r = run_scenario(ScenarioConfig(**kw))
    starts = [v["start"] for v in mx.faulty_led_views(r.timeline, r.faulty_ids)]
    return r.metrics["availability"], starts, r.audit.ok


def test_c08_s2_availability_trend():
    base = dict(n=4, f_actual=1, fault_strategy="F4+F2", attack_policy="S2", rotation_s=10.0,
                passive_rotation_s=10.0, duration_s=900, seed=1, refresh_threshold=5)
    (active, starts, audit_ok), (passive, _, _) = _map(_availability_run, [base, {**base, "protocol": "passive"}])
    gaps = [b - a for a, b in zip(starts, starts[1:])]
    trend = all(b >= a for a, b in zip(gaps, gaps[1:]))
    ok = len(gaps) >= 2 and trend and active > passive and audit_ok
    report(8, "S2 availability trend", ok,
           f"faulty-led gaps (s)={[round(g / 1000, 1) for g in gaps]}, availability active={active:.3f} "
           f"passive={passive:.3f}")
    assert ok


# -- 9 ----------------------------------------------------------------------


def test_c09_refresh_protocol():
    cfg = ScenarioConfig(n=4, gst=60_000, surge_prob=0.3, surge_factor=100, client_timeout=1000.0,
                         refresh_threshold=3, duration_s=120, seed=1)
    r = run_scenario(cfg)
    verifier = QCVerifier(r.keyring)
    correct = set(range(cfg.n)) - set(r.faulty_ids)
    refreshed_ok, refreshed_bad = set(), []
    chain = r.final_chain()
    for prev, block in zip(chain, chain[1:]):
        for rec in block.refreshes:
            good = (rec.rp, rec.ci) == (1, 1) and verifier.verify(rec.rs_qc, ref_digest(rec.view), 2 * r.config.f + 1)
            if rec.server_id != block.leader_id:
                good &= (block.rp_map[rec.server_id], block.ci_map[rec.server_id]) == (1, 1)
            (refreshed_ok.add(rec.server_id) if good else refreshed_bad.append((block.v, rec.server_id)))
    untouched = audit_rp_conservation(r.trace, r.registry)
    senders_by_view: dict[int, set] = {}
    for ev in r.trace:
        if ev["kind"] == "ref" and ev["server"] in correct and ev["rp"] > cfg.refresh_threshold:
            senders_by_view.setdefault(ev["view"], set()).add(ev["server"])
    driven = max((len(s) for s in senders_by_view.values()), default=0)
    ok = (len(refreshed_ok & correct) >= cfg.f + 1 and not refreshed_bad and not untouched
          and driven >= cfg.f + 1 and r.audit.ok)
    report(9, "refresh protocol", ok,
           f"servers refreshed to (1,1): {sorted(refreshed_ok)}, bad records={refreshed_bad[:3]}, "
           f"untouched-entry violations={len(untouched)}, max correct Ref senders in one view={driven}")
    assert ok


# -- 10 ---------------------------------------------------------------------


def _instances(n: int) -> list[dict]:
    r = run_scenario(ScenarioConfig(n=n, clients=1, batch_size=1, duration_s=3, seed=10))
    return instance_stats(r.network.instance_log, r.registry, n)


def test_c10_round_and_message_audit():
    small, large = _instances(4), _instances(16)
    rounds = {s["rounds"] for s in small + large}
    ratio = median(s["messages"] for s in large) / median(s["messages"] for s in small)
    ok = rounds == {7} and 3.0 <= ratio <= 5.0 and small and large
    report(10, "round/message audit", ok,
           f"rounds={sorted(rounds)}, messages n=4: {median(s['messages'] for s in small)}, "
           f"n=16: {median(s['messages'] for s in large)}, ratio={ratio:.2f}")
    assert ok
