"""Offline checks over a finished run.

Each ``audit_*`` function returns a list of human-readable violations; an
empty list means the property held over the whole trace. The audits read
only the trace and the block registry, never server internals.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from ..crypto import HashPuzzle, Keyring, QCVerifier
from ..ledger import cmt_digest, ord_digest, quorum, ref_digest, revc_digest, segment_after_refreshes, vote_digest
from ..reputation import INITIAL_CI, INITIAL_RP, ReputationError, calc_rp


@dataclass
class AuditReport:
    violations: dict[str, list[str]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())

    def to_dict(self) -> dict:
        return {name: {"violations": len(v), "examples": v[:5]} for name, v in self.violations.items()}


def _chain(registry, head_digest: bytes) -> list:
    out = []
    block = registry.vc_blocks.get(head_digest)
    while block is not None:
        out.append(block)
        block = registry.vc_blocks.get(block.prev_vc_ref) if block.prev_vc_ref else None
    return out


def audit_unique_leader(trace: list[dict], registry) -> list[str]:
    by_view = defaultdict(set)
    for ev in trace:
        if ev["kind"] == "elected":
            by_view[ev["view"]].add(ev["leader"])
    for b in registry.vc_blocks.values():
        by_view[b.v].add(b.leader_id)
    return [f"view {v}: leaders {sorted(ls)}" for v, ls in sorted(by_view.items()) if len(ls) > 1]


def durable_heights(registry, f: int) -> list[tuple[float, int]]:
    """(time, n) at which n had been appended by f+1 correct servers."""
    times = defaultdict(list)
    for t, _, n, _ in registry.commits:
        times[n].append(t)
    out = []
    for n, ts in times.items():
        if len(ts) >= f + 1:
            out.append((sorted(ts)[f], n))
    return sorted(out)


def audit_leader_height(trace: list[dict], registry, n: int) -> list[str]:
    """An elected leader holds every block durable before its first vote."""
    f, _ = quorum(n)
    durable = durable_heights(registry, f)
    vote_time: dict[tuple, float] = {}
    for ev in trace:
        if ev["kind"] == "vote":
            vote_time.setdefault((ev["server"], ev["v_new"], ev["candidate"]), ev["t"])
        elif ev["kind"] == "campaign":
            vote_time.setdefault((ev["server"], ev["v_new"], ev["server"]), ev["t"])
    out = []
    for ev in trace:
        if ev["kind"] != "elected":
            continue
        times = [vote_time[k] for k in ((s, ev["view"], ev["leader"]) for s in ev["signers"]) if k in vote_time]
        t0 = min(times) if times else ev["t"]
        needed = max((nn for t, nn in durable if t <= t0), default=1)
        if ev["height"] < needed:
            out.append(f"view {ev['view']}: leader {ev['leader']} height {ev['height']} < durable {needed}")
    return out


def audit_votes(trace: list[dict], registry, puzzle: HashPuzzle, c_delta: float) -> list[str]:
    """Recompute C4 and C5 for every vote a correct server cast."""
    refreshed = {(ev["server"], ev["view"]) for ev in trace if ev["kind"] == "refresh"}
    out = []
    for ev in trace:
        if ev["kind"] != "vote":
            continue
        tag = f"vote by {ev['server']} for {ev['candidate']} in {ev['v_new']}"
        chain = _chain(registry, bytes.fromhex(ev["head"]))
        txb = registry.tx_blocks.get(bytes.fromhex(ev["tx"]))
        if not chain or txb is None:
            out.append(f"{tag}: referenced blocks unknown")
            continue
        head, cand = chain[0], ev["candidate"]
        seg = tuple(ev["seg"])
        if seg != (head.rp_map[cand], head.ci_map[cand]):
            if seg != (INITIAL_RP, INITIAL_CI) or (cand, head.v) not in refreshed:
                out.append(f"{tag}: candidate segment {seg} not justified")
                continue
        try:
            rp, ci = calc_rp(ev["v_new"], chain, txb, cand, c_delta, seg)
        except ReputationError as exc:
            out.append(f"{tag}: {exc}")
            continue
        if (rp, ci) != (ev["rp"], ev["ci"]):
            out.append(f"{tag}: C4 recomputed {(rp, ci)} != accepted {(ev['rp'], ev['ci'])}")
        if not puzzle.verify(txb.block_digest, bytes.fromhex(ev["nc"]), rp, bytes.fromhex(ev["hr"])):
            out.append(f"{tag}: C5 puzzle does not verify")
    return out


def audit_safety(registry) -> list[str]:
    by_n = defaultdict(set)
    for _, _, n, d in registry.commits:
        by_n[n].add(d)
    return [f"n={n}: {len(ds)} distinct blocks committed" for n, ds in sorted(by_n.items()) if len(ds) > 1]


def audit_validity(trace: list[dict], registry, keyring: Keyring, n: int) -> list[str]:
    proposed = {tuple(ev["key"]) for ev in trace if ev["kind"] == "propose"}
    _, q = quorum(n)
    out = []
    for d in registry.first_commit:
        block = registry.tx_blocks[d]
        if block.commit_qc is not None and len(block.ordering_qc.signer_set) < q:
            out.append(f"n={block.n}: batch seen by fewer than {q} servers")
        for tx in block.txs:
            if tx.key not in proposed:
                out.append(f"n={block.n}: tx {tx.key} never proposed")
            elif not keyring.verify(tx.client, tx.signed_digest, tx.signature):
                out.append(f"n={block.n}: tx {tx.key} client signature invalid")
    return out


def audit_qcs(registry, keyring: Keyring, n: int) -> list[str]:
    f, q = quorum(n)
    v = QCVerifier(keyring)
    out = []
    for b in registry.tx_blocks.values():
        if b.commit_qc is None:
            continue
        if not v.verify(b.ordering_qc, ord_digest(b.n, b.v, b.batch), q):
            out.append(f"txBlock n={b.n}: ordering_QC")
        if not v.verify(b.commit_qc, cmt_digest(b.n, b.v, b.batch), q):
            out.append(f"txBlock n={b.n}: commit_QC")
        if b.ordering_qc.view != b.v or b.commit_qc.view != b.v:
            out.append(f"txBlock n={b.n}: certificates from different views")
    for b in registry.vc_blocks.values():
        if b.prev_vc_ref is None:
            continue
        prev = registry.vc_blocks.get(b.prev_vc_ref)
        if prev is None:
            out.append(f"vcBlock v={b.v}: unknown predecessor")
            continue
        if not v.verify(b.conf_qc, revc_digest(prev.v), f + 1):
            out.append(f"vcBlock v={b.v}: conf_QC")
        if not v.verify(b.vc_qc, vote_digest(b.v, b.leader_id, b.rp_map[b.leader_id], b.ci_map[b.leader_id]), q):
            out.append(f"vcBlock v={b.v}: vc_QC")
        for r in b.refreshes:
            if not v.verify(r.rs_qc, ref_digest(r.view), q):
                out.append(f"vcBlock v={b.v}: rs_QC of server {r.server_id}")
    return out


def audit_rp_conservation(trace: list[dict], registry) -> list[str]:
    """Stored (rp, ci) changes only for the block's leader or via a recorded refresh."""
    refreshed = {(ev["server"], ev["view"]) for ev in trace if ev["kind"] == "refresh"}
    out = []
    for b in registry.vc_blocks.values():
        prev = registry.vc_blocks.get(b.prev_vc_ref) if b.prev_vc_ref else None
        if prev is None:
            continue
        for r in b.refreshes:
            if (r.server_id, r.view) not in refreshed or (r.rp, r.ci) != (INITIAL_RP, INITIAL_CI):
                out.append(f"vcBlock v={b.v}: unexplained refresh of {r.server_id}")
        rp_exp, ci_exp = segment_after_refreshes(prev, b.refreshes)
        for sid in b.rp_map:
            if sid != b.leader_id and (b.rp_map[sid], b.ci_map[sid]) != (rp_exp[sid], ci_exp[sid]):
                out.append(f"vcBlock v={b.v}: entry of non-leader {sid} changed")
    return out


def instance_stats(instance_log: dict, registry, n: int) -> list[dict]:
    """Rounds and messages for each instance whose block was committed.

    Round 1 is the client broadcast of the proposals in the batch; those
    ``n * batch`` messages are added to the tagged protocol messages.
    """
    committed = {(b.v, b.n): b for d, b in registry.tx_blocks.items() if d in registry.first_commit}
    out = []
    for iid, log in instance_log.items():
        leader, view, seq_n, _ = iid
        block = committed.get((view, seq_n))
        if block is None or not any(kind == "TxBlockMsg" for _, kind, _, _ in log):
            continue
        out.append({
            "instance": list(iid),
            "rounds": max(h for h, _, _, _ in log),
            "messages": len(log) + n * len(block.txs),
            "batch": len(block.txs),
        })
    return out


def audit_run(result) -> AuditReport:
    cfg = result.config
    puzzle = HashPuzzle(cfg.puzzle_bits, cfg.puzzle_mode, cfg.hash_rate)
    rep = AuditReport()
    rep.violations["unique_leader"] = audit_unique_leader(result.trace, result.registry)
    rep.violations["safety"] = audit_safety(result.registry)
    rep.violations["validity"] = audit_validity(result.trace, result.registry, result.keyring, cfg.n)
    rep.violations["qc_thresholds"] = audit_qcs(result.registry, result.keyring, cfg.n)
    if cfg.protocol == "active":
        rep.violations["leader_height"] = audit_leader_height(result.trace, result.registry, cfg.n)
        rep.violations["vote_reverification"] = audit_votes(result.trace, result.registry, puzzle, cfg.c_delta)
        rep.violations["rp_conservation"] = audit_rp_conservation(result.trace, result.registry)
    return rep
