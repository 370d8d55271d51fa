"""Plumbing shared by every server flavour: identity, signing, timers, catch-up."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

from . import messages as m
from .crypto import HashPuzzle, Keyring, QCVerifier
from .ledger import Ledger, LedgerError, TxBlock, quorum
from .sim.engine import Network, Simulator, Timer
from .sim.faults import CORRECT, FaultProfile


class Role(str, Enum):
    FOLLOWER = "follower"
    REDEEMER = "redeemer"
    CANDIDATE = "candidate"
    LEADER = "leader"


@dataclass
class ProtocolParams:
    """Timing and protocol knobs; times are simulated milliseconds."""

    timeout_lo: float = 800.0
    epsilon: float = 400.0
    batch_size: int = 8
    batch_wait: float = 10.0
    c_delta: float = 1.0
    refresh_threshold: int = 8
    rotation_ms: float | None = None
    policy_slack: float = 60.0
    max_campaign_retries: int = 3
    crash_leaders: bool = False
    proc_ms_per_msg: float = 0.0
    proc_ms_per_tx: float = 0.0

    def __post_init__(self) -> None:
        if self.epsilon < 0 or self.timeout_lo <= 0:
            raise ValueError("timeout range must be [lo, lo+eps] with lo > 0, eps >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @property
    def timeout_hi(self) -> float:
        return self.timeout_lo + self.epsilon


def _tx_count(msg) -> int:
    if isinstance(msg, (m.Prop, m.Compt, m.ComptRelay)):
        return 1
    txs = getattr(msg, "txs", None)
    if txs is None and isinstance(msg, m.TxBlockMsg):
        txs = msg.block.txs
    return len(txs) if txs else 0


class ServerBase:
    """Identity, transport and catch-up for one server.

    Subclasses provide ``view``, ``leader_id``, ``leads()`` and ``follows()``
    plus the ``on_<Message>`` handlers; ``receive`` dispatches by type name.
    """

    def __init__(self, sid: int, n: int, sim: Simulator, net: Network, keyring: Keyring,
                 puzzle: HashPuzzle, params: ProtocolParams, fault: FaultProfile = CORRECT,
                 genesis_leader: int = 0):
        self.id = sid
        self.n = n
        self.f, self.q = quorum(n)
        self.sim = sim
        self.net = net
        self.keyring = keyring
        self.key = keyring.key(sid)
        self.verifier = QCVerifier(keyring)
        self.puzzle = puzzle
        self.params = params
        self.fault = fault
        self.ledger = Ledger(n, self.verifier, genesis_leader)
        self.rng = sim.derived_rng("server", sid)
        self.timers: dict[str, Timer] = {}
        self._sync_seq = 0
        self._sync_waiters: dict[int, Callable[[], None]] = {}
        self.crashed = False
        self.busy_until = 0.0
        net.register(sid, self)

    # -- identity & transport ----------------------------------------------

    @property
    def correct(self) -> bool:
        return not self.fault.faulty

    def sign(self, msg_digest: bytes) -> bytes:
        return self.key.sign(msg_digest)

    def signed(self, msg):
        msg.sig = self.sign(msg.signed_digest)
        return msg

    def verify_sig(self, msg) -> bool:
        return self.keyring.verify(msg.sender, msg.signed_digest, msg.sig)

    def send(self, dst: int, msg) -> None:
        if self.crashed:
            return
        out = self.fault.outbound(dst, msg, self.sign)
        if out is not None:
            self.net.send(self.id, dst, out)

    def broadcast(self, msg) -> None:
        for dst in range(self.n):
            if dst != self.id:
                self.send(dst, msg)

    def receive(self, msg) -> None:
        p = self.params
        if p.proc_ms_per_msg or p.proc_ms_per_tx:
            # single-threaded server: messages queue for the CPU in arrival order
            cost = p.proc_ms_per_msg + p.proc_ms_per_tx * _tx_count(msg)
            start = max(self.sim.now, self.busy_until)
            self.busy_until = start + cost
            self.sim.schedule(self.busy_until - self.sim.now, self.process, msg)
        else:
            self.process(msg)

    def process(self, msg) -> None:
        if self.crashed:
            return
        handler = getattr(self, "on_" + type(msg).__name__, None)
        if handler is not None:
            handler(msg)

    def emit(self, kind: str, **fields) -> None:
        self.sim.emit(kind, server=self.id, **fields)

    # -- timers -------------------------------------------------------------

    def draw_timeout(self, *label) -> float:
        """Uniform draw from ``[lo, lo+eps]``, a pure function of (owner, label).

        A server mimicking a victim (F1) uses the victim's id as owner and so
        reproduces the victim's draw for the same event.
        """
        owner = self.fault.mimic_victim if self.fault.mimic_victim is not None else self.id
        p = self.params
        return self.sim.derived_rng("timer", owner, *label).uniform(p.timeout_lo, p.timeout_hi)

    def set_timer(self, name: str, delay: float, fn: Callable, *args) -> None:
        self.cancel_timer(name)
        self.timers[name] = self.sim.schedule(delay, self._fire, name, fn, args)

    def _fire(self, name: str, fn: Callable, args: tuple) -> None:
        self.timers.pop(name, None)
        if not self.crashed:
            fn(*args)

    def cancel_timer(self, name: str) -> None:
        t = self.timers.pop(name, None)
        if t is not None:
            t.cancel()

    def cancel_timers(self, prefix: str) -> None:
        for name in [k for k in self.timers if k.startswith(prefix)]:
            self.cancel_timer(name)

    def has_timer(self, name: str) -> bool:
        return name in self.timers

    # -- catch-up -----------------------------------------------------------

    def request_sync(self, peer: int, kind: str, start: int, end: int,
                     then: Callable[[], None] | None = None) -> None:
        self._sync_seq += 1
        if then is not None:
            self._sync_waiters[self._sync_seq] = then
        self.send(peer, m.SyncReq(self.id, kind, start, end, self._sync_seq))

    def on_SyncReq(self, msg: m.SyncReq) -> None:
        if msg.kind == "tx":
            blocks = tuple(self.ledger.tx_blocks(msg.start + 1, msg.end))
        else:
            blocks = tuple(reversed(self.ledger.vc_chain()))
        self.send(msg.sender, m.SyncResp(self.id, msg.kind, blocks, msg.req_id))

    def on_SyncResp(self, msg: m.SyncResp) -> None:
        if msg.kind == "tx":
            for block in sorted(msg.blocks, key=lambda b: b.n):
                if block.n == self.ledger.height + 1 and not self.apply_tx_block(block):
                    break
            self.drain_tx_buffer()
        else:
            self.adopt_vc_blocks(msg.blocks)
        then = self._sync_waiters.pop(msg.req_id, None)
        if then is not None:
            then()

    def adopt_vc_blocks(self, blocks) -> None:
        """Hook for the view-change layer; the base server has no vc chain logic."""

    def drain_tx_buffer(self) -> None:
        """Hook for the replication layer."""

    def apply_tx_block(self, block: TxBlock, notify: bool = True) -> bool:
        try:
            self.ledger.append_tx_block(block)
        except LedgerError as exc:
            self.emit("reject_txblock", n=block.n, reason=str(exc))
            return False
        self.on_tx_committed(block, notify)
        return True

    def on_tx_committed(self, block: TxBlock, notify: bool) -> None:
        raise NotImplementedError
