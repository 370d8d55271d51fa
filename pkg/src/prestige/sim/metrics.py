"""Reduce a finished run to the reported quantities."""

from __future__ import annotations

import math
from collections import defaultdict
from statistics import fmean, median


def view_timeline(trace: list[dict], correct_ids, duration_ms: float, genesis_leader: int) -> list[dict]:
    """Views in adoption order: start = first correct server to adopt it.

    A view counts only if some correct server adopted it; its end is the
    start of the next such view (or the end of the run).
    """
    starts = {1: (0.0, genesis_leader)}
    for ev in trace:
        if ev["kind"] == "adopt" and ev["server"] in correct_ids and ev["view"] not in starts:
            starts[ev["view"]] = (ev["t"], ev["leader"])
    views = sorted(starts.items(), key=lambda kv: (kv[1][0], kv[0]))
    out = []
    for i, (v, (t, leader)) in enumerate(views):
        end = views[i + 1][1][0] if i + 1 < len(views) else duration_ms
        out.append({"view": v, "leader": leader, "start": t, "end": max(t, end)})
    return out


def productive_views(registry) -> set[int]:
    return {b.v for d, b in registry.tx_blocks.items() if d in registry.first_commit}


def availability(timeline: list[dict], productive: set[int], duration_ms: float) -> float:
    up = sum(v["end"] - v["start"] for v in timeline if v["view"] in productive)
    return up / duration_ms if duration_ms > 0 else 0.0


def throughput_series(registry, duration_ms: float, bin_ms: float = 1000.0) -> list[int]:
    bins = [0] * max(1, math.ceil(duration_ms / bin_ms))
    for d, t in registry.first_commit.items():
        idx = min(int(t // bin_ms), len(bins) - 1)
        bins[idx] += len(registry.tx_blocks[d].txs)
    return bins


def split_votes(trace: list[dict], correct_ids) -> int:
    elected = {ev["view"] for ev in trace if ev["kind"] == "elected"}
    failed = {ev["v_new"] for ev in trace if ev["kind"] == "split_vote" and ev["server"] in correct_ids}
    return len(failed - elected)


def rp_trace(chain) -> list[dict]:
    """Stored penalties per view along a chain (oldest first)."""
    return [{"view": b.v, "leader": b.leader_id, "rp": dict(sorted(b.rp_map.items())),
             "ci": dict(sorted(b.ci_map.items()))} for b in chain]


def latency_summary(latencies: list[float]) -> dict:
    if not latencies:
        return {"count": 0, "mean_ms": None, "p50_ms": None, "p99_ms": None}
    xs = sorted(latencies)
    return {"count": len(xs), "mean_ms": fmean(xs), "p50_ms": median(xs),
            "p99_ms": xs[min(len(xs) - 1, math.ceil(0.99 * len(xs)) - 1)]}


def faulty_led_views(timeline: list[dict], faulty_ids) -> list[dict]:
    return [v for v in timeline if v["leader"] in set(faulty_ids)]


def leaders_by_view(timeline: list[dict]) -> dict[int, int]:
    return {v["view"]: v["leader"] for v in timeline}


def window_throughput(series: list[int], start_frac: float, end_frac: float = 1.0) -> float:
    n = len(series)
    lo, hi = int(n * start_frac), max(int(n * start_frac) + 1, int(n * end_frac))
    window = series[lo:hi]
    return fmean(window) if window else 0.0


def message_counts(net) -> dict:
    return dict(sorted(net.counts.items()))


def per_server_commits(registry) -> dict[int, int]:
    out = defaultdict(int)
    for _, sid, _, _ in registry.commits:
        out[sid] += 1
    return dict(out)
