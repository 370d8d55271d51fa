"""Discrete-event loop and the partially synchronous network model."""

from __future__ import annotations

import heapq
import random
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Any, Callable


class Timer:
    __slots__ = ("time", "seq", "fn", "args", "cancelled")

    def __init__(self, time: float, seq: int, fn: Callable, args: tuple):
        self.time, self.seq, self.fn, self.args = time, seq, fn, args
        self.cancelled = False

    def __lt__(self, other: "Timer") -> bool:
        return (self.time, self.seq) < (other.time, other.seq)

    def cancel(self) -> None:
        self.cancelled = True


class Simulator:
    """Virtual clock in milliseconds plus an append-only event trace.

    All randomness is derived from ``seed``: ``rng`` is the root generator
    and ``derived_rng`` hands out independent streams keyed by a label, so
    adding a consumer never perturbs another consumer's draws.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self.rng = random.Random(seed)
        self._base = self.rng.getrandbits(64)
        self.now = 0.0
        self._queue: list[Timer] = []
        self._seq = 0
        self.trace: list[dict] = []
        self.events_processed = 0
        self.registry = None  # optional global observer of commits and vcBlocks

    def derived_rng(self, *labels: Any) -> random.Random:
        return random.Random(f"{self._base}:" + ":".join(map(str, labels)))

    def schedule(self, delay: float, fn: Callable, *args) -> Timer:
        if delay < 0:
            raise ValueError("cannot schedule in the past")
        self._seq += 1
        timer = Timer(self.now + delay, self._seq, fn, args)
        heapq.heappush(self._queue, timer)
        return timer

    def run(self, until: float) -> None:
        q = self._queue
        while q and q[0].time <= until:
            timer = heapq.heappop(q)
            if timer.cancelled:
                continue
            self.now = timer.time
            self.events_processed += 1
            timer.fn(*timer.args)
        self.now = max(self.now, until)

    def emit(self, kind: str, **fields) -> None:
        self.trace.append({"t": round(self.now, 6), "kind": kind, **fields})


@dataclass
class NetworkModel:
    """Delay distribution for one message, in milliseconds.

    After ``gst`` a delay is normal(``mean``, ``jitter``) clipped to
    ``[min_delay, delta]``. Before ``gst`` the same draw is multiplied by
    ``surge_factor`` with probability ``surge_prob`` and may exceed ``delta``.
    """

    mean: float = 10.0
    jitter: float = 5.0
    delta: float = 30.0
    min_delay: float = 1.0
    gst: float = 0.0
    surge_prob: float = 0.0
    surge_factor: float = 20.0

    def __post_init__(self) -> None:
        if not 0 < self.min_delay <= self.mean <= self.delta:
            raise ValueError("need 0 < min_delay <= mean <= delta")
        if not 0.0 <= self.surge_prob <= 1.0:
            raise ValueError("surge_prob must be a probability")

    def draw(self, now: float, rng: random.Random) -> float:
        d = min(self.delta, max(self.min_delay, rng.gauss(self.mean, self.jitter)))
        if now < self.gst and self.surge_prob and rng.random() < self.surge_prob:
            d *= self.surge_factor
        return d


class Network:
    """Delivers messages between registered nodes; never drops.

    Messages carrying an ``instance`` tag are also logged per instance so the
    round/message audit can count them.
    """

    def __init__(self, sim: Simulator, model: NetworkModel):
        self.sim = sim
        self.model = model
        self.rng = sim.derived_rng("network")
        self.nodes: dict[int, Any] = {}
        self.counts: Counter = Counter()
        self.instance_log: dict[tuple, list] = defaultdict(list)
        self.max_delay_after_gst = 0.0

    def register(self, node_id: int, node: Any) -> None:
        self.nodes[node_id] = node

    def send(self, src: int, dst: int, msg) -> None:
        if dst == src:
            raise ValueError("local delivery must not go through the network")
        now = self.sim.now
        d = self.model.draw(now, self.rng)
        if now >= self.model.gst:
            self.max_delay_after_gst = max(self.max_delay_after_gst, d)
        self.counts[type(msg).__name__] += 1
        inst = getattr(msg, "instance", None)
        if inst is not None:
            self.instance_log[inst].append((getattr(msg, "hop", 0), type(msg).__name__, src, dst))
        self.sim.schedule(d, self._deliver, dst, msg)

    def _deliver(self, dst: int, msg) -> None:
        self.nodes[dst].receive(msg)
