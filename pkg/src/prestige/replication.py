"""Two-phase replication (ordering, then commit) and the closed-loop client.

One instance runs at a time per leader. A follower that signs a Cmt records
a lock on ``(n, batch)``; it refuses any other batch for that ``n`` unless a
later view's ordering certificate justifies the switch. A leader told about
a lock re-proposes the highest-view locked batch, so a batch that reached a
commit certificate can never be replaced.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from . import messages as m
from .crypto import CryptoError, Keyring, QuorumCert, aggregate_qc
from .ledger import Transaction, TxBlock, batch_digest, cmt_digest, ord_digest
from .sim.engine import Network, Simulator

CLIENT_ID_BASE = 1000


@dataclass(frozen=True)
class Lock:
    view: int
    batch: bytes
    ordering_qc: QuorumCert
    txs: tuple


@dataclass
class Instance:
    iid: tuple
    n: int
    view: int
    txs: tuple
    batch: bytes
    justify: QuorumCert | None = None
    phase: str = "ordering"
    ord_sigs: dict = field(default_factory=dict)
    cmt_sigs: dict = field(default_factory=dict)
    ordering_qc: QuorumCert | None = None


class ReplicationMixin:
    """Leader and follower sides of replication; mixed into a server class."""

    def _init_replication(self) -> None:
        self.pending: dict[tuple, Transaction] = {}
        self.relays: dict[tuple, set] = defaultdict(set)
        self.committed_at: dict[tuple, int] = {}
        self.instance: Instance | None = None
        self.locks: dict[int, Lock] = {}
        self.lock_evidence: dict[int, Lock] = {}
        self.ord_replied: dict[tuple, tuple] = {}
        self.tx_buffer: dict[int, TxBlock] = {}
        self._instance_seq = 0
        self._batch_ready = False

    # -- helpers ------------------------------------------------------------

    def _client_sig_ok(self, tx: Transaction) -> bool:
        return self.keyring.verify(tx.client, tx.signed_digest, tx.signature)

    def _notify(self, client: int, key: tuple, n: int, instance=None, hop: int = 0) -> None:
        self.send(client, self.signed(m.Notif(self.id, key=key, n=n, instance=instance, hop=hop)))

    def _enqueue(self, tx: Transaction) -> None:
        if tx.key in self.committed_at or tx.key in self.pending:
            return
        self.pending[tx.key] = tx
        self.maybe_start_instance()

    # -- client traffic -----------------------------------------------------

    def on_Prop(self, msg: m.Prop) -> None:
        tx = msg.tx
        if not self._client_sig_ok(tx):
            return
        if tx.key in self.committed_at:
            self._notify(tx.client, tx.key, self.committed_at[tx.key])
            return
        # every server keeps uncommitted proposals so a future leader can order them
        self._enqueue(tx)

    def on_ComptRelay(self, msg: m.ComptRelay) -> None:
        tx = msg.tx
        if not self.leads() or not self._client_sig_ok(tx):
            return
        self.relays[tx.key].add(msg.sender)
        if len(self.relays[tx.key]) >= self.f + 1:
            self._enqueue(tx)

    # -- leader side --------------------------------------------------------

    def maybe_start_instance(self) -> None:
        if self.instance is not None or not self.leads() or not self.replication_enabled():
            return
        n = self.ledger.height + 1
        lock = self._best_lock(n)
        if lock is None and not self.pending:
            return
        if lock is None and len(self.pending) < self.params.batch_size and not self._batch_ready:
            if not self.has_timer("batch"):
                self.set_timer("batch", self.params.batch_wait, self._batch_fire)
            return
        self.cancel_timer("batch")
        self._batch_ready = False
        if lock is not None:
            self._start_instance(n, lock.txs, justify=lock.ordering_qc)
        else:
            txs = tuple(list(self.pending.values())[: self.params.batch_size])
            self._start_instance(n, txs)

    def _batch_fire(self) -> None:
        self._batch_ready = True
        self.maybe_start_instance()

    def _best_lock(self, n: int) -> Lock | None:
        found = [lk for lk in (self.locks.get(n), self.lock_evidence.get(n)) if lk is not None]
        return max(found, key=lambda lk: lk.view) if found else None

    def _start_instance(self, n: int, txs: tuple, justify: QuorumCert | None = None) -> None:
        self._instance_seq += 1
        bd = batch_digest(txs)
        inst = Instance((self.id, self.view, n, self._instance_seq), n, self.view, txs, bd, justify)
        inst.ord_sigs[self.id] = self.sign(ord_digest(n, self.view, bd))
        self.instance = inst
        self.ord_replied[(n, self.view)] = (bd, justify.view if justify else -1)
        self.emit("instance", n=n, view=self.view, iid=list(inst.iid), size=len(txs))
        self.broadcast(self.signed(m.Ord(self.id, n=n, view=self.view, txs=txs, batch=bd,
                                         instance=inst.iid, hop=2, justify=justify)))
        self._check_ordering_quorum()

    def on_OrdReply(self, msg: m.OrdReply) -> None:
        inst = self.instance
        if inst is None or inst.phase != "ordering" or (msg.n, msg.view, msg.batch) != (inst.n, inst.view, inst.batch):
            return
        if msg.sender in inst.ord_sigs or not self.verify_sig(msg):
            return
        inst.ord_sigs[msg.sender] = msg.sig
        self._check_ordering_quorum()

    def _check_ordering_quorum(self) -> None:
        inst = self.instance
        if inst is None or inst.phase != "ordering" or len(inst.ord_sigs) < self.q:
            return
        d = ord_digest(inst.n, inst.view, inst.batch)
        try:
            inst.ordering_qc = aggregate_qc(inst.ord_sigs, d, inst.view, self.q, self.keyring)
        except CryptoError:
            return
        inst.phase = "commit"
        self.locks[inst.n] = Lock(inst.view, inst.batch, inst.ordering_qc, inst.txs)
        inst.cmt_sigs[self.id] = self.sign(cmt_digest(inst.n, inst.view, inst.batch))
        self.broadcast(self.signed(m.Cmt(self.id, n=inst.n, view=inst.view, txs=inst.txs, batch=inst.batch,
                                         ordering_qc=inst.ordering_qc, instance=inst.iid, hop=4)))
        self._check_commit_quorum()

    def on_CmtReply(self, msg: m.CmtReply) -> None:
        inst = self.instance
        if inst is None or inst.phase != "commit" or (msg.n, msg.view, msg.batch) != (inst.n, inst.view, inst.batch):
            return
        if msg.sender in inst.cmt_sigs or not self.verify_sig(msg):
            return
        inst.cmt_sigs[msg.sender] = msg.sig
        self._check_commit_quorum()

    def _check_commit_quorum(self) -> None:
        inst = self.instance
        if inst is None or inst.phase != "commit" or len(inst.cmt_sigs) < self.q:
            return
        d = cmt_digest(inst.n, inst.view, inst.batch)
        try:
            commit_qc = aggregate_qc(inst.cmt_sigs, d, inst.view, self.q, self.keyring)
        except CryptoError:
            return
        block = TxBlock(inst.n, inst.view, inst.ordering_qc, commit_qc, inst.txs,
                        self.ledger.latest_tx_block().block_digest)
        self.instance = None
        if self.apply_tx_block(block, notify=False):
            for tx in block.txs:
                self._notify(tx.client, tx.key, block.n, inst.iid, hop=6)
            self.broadcast(m.TxBlockMsg(self.id, block=block, instance=inst.iid, hop=6))
        self.maybe_start_instance()

    def on_Stale(self, msg: m.Stale) -> None:
        for block in sorted(msg.blocks, key=lambda b: b.n):
            if block.n == self.ledger.height + 1 and not self.apply_tx_block(block):
                break
        self.drain_tx_buffer()
        if self.instance is not None and self.instance.n <= self.ledger.height:
            self.instance = None
        self.maybe_start_instance()

    def on_Locked(self, msg: m.Locked) -> None:
        if msg.n <= self.ledger.height or batch_digest(msg.txs) != msg.batch:
            return
        if not self.verifier.verify(msg.ordering_qc, ord_digest(msg.n, msg.lock_view, msg.batch), self.q):
            return
        lock = Lock(msg.lock_view, msg.batch, msg.ordering_qc, tuple(msg.txs))
        best = self._best_lock(msg.n)
        if best is not None and best.view >= lock.view:
            return
        self.lock_evidence[msg.n] = lock
        inst = self.instance
        if inst is not None and inst.n == msg.n and inst.batch != lock.batch and inst.phase == "ordering":
            self.instance = None
            self.maybe_start_instance()

    def abandon_instance(self) -> None:
        self.instance = None
        self._batch_ready = False
        self.cancel_timer("batch")

    # -- follower side ------------------------------------------------------

    def withholding_votes(self) -> bool:
        """True while this follower backs a pending view change; Ord and Cmt go unanswered."""
        return False

    def _from_current_leader(self, msg) -> bool:
        return (self.follows() and msg.view == self.view and msg.sender == self.leader_id
                and not self.withholding_votes())

    def _stale_reply(self, n: int) -> None:
        self.send(self.leader_id, m.Stale(self.id, blocks=tuple(self.ledger.tx_blocks(n, self.ledger.height))))

    def on_Ord(self, msg: m.Ord) -> None:
        if not self._from_current_leader(msg) or not self.verify_sig(msg):
            return
        if batch_digest(msg.txs) != msg.batch or not all(self._client_sig_ok(tx) for tx in msg.txs):
            self.emit("reject_ord", n=msg.n, reason="bad batch")
            return
        if msg.n <= self.ledger.height:
            self._stale_reply(msg.n)
            return
        lock = self.locks.get(msg.n)
        if lock is not None and lock.batch != msg.batch:
            self.send(msg.sender, m.Locked(self.id, n=msg.n, lock_view=lock.view, txs=lock.txs,
                                           batch=lock.batch, ordering_qc=lock.ordering_qc))
            return
        just_view = -1
        if msg.justify is not None:
            if not self.verifier.verify(msg.justify, ord_digest(msg.n, msg.justify.view, msg.batch), self.q):
                return
            just_view = msg.justify.view
        prior = self.ord_replied.get((msg.n, msg.view))
        if prior is not None and prior[0] != msg.batch and just_view <= prior[1]:
            self.emit("reject_ord", n=msg.n, reason="n already used in this view")
            return
        self.ord_replied[(msg.n, msg.view)] = (msg.batch, just_view)
        if msg.n > self.ledger.height + 1:
            self.request_sync(msg.sender, "tx", self.ledger.height, msg.n - 1)
        self.send(msg.sender, self.signed(m.OrdReply(self.id, n=msg.n, view=msg.view, batch=msg.batch,
                                                     instance=msg.instance, hop=3)))

    def on_Cmt(self, msg: m.Cmt) -> None:
        if not self._from_current_leader(msg) or not self.verify_sig(msg):
            return
        if batch_digest(msg.txs) != msg.batch:
            return
        if not self.verifier.verify(msg.ordering_qc, ord_digest(msg.n, msg.view, msg.batch), self.q):
            self.emit("reject_cmt", n=msg.n, reason="bad ordering_QC")
            return
        if msg.n <= self.ledger.height:
            self._stale_reply(msg.n)
            return
        lock = self.locks.get(msg.n)
        if lock is not None and lock.batch != msg.batch and lock.view >= msg.view:
            return
        self.locks[msg.n] = Lock(msg.view, msg.batch, msg.ordering_qc, tuple(msg.txs))
        self.send(msg.sender, self.signed(m.CmtReply(self.id, n=msg.n, view=msg.view, batch=msg.batch,
                                                     instance=msg.instance, hop=5)))

    def on_TxBlockMsg(self, msg: m.TxBlockMsg) -> None:
        block = msg.block
        h = self.ledger.height
        if block.n <= h:
            return
        if block.n == h + 1:
            if self.apply_tx_block(block, notify=False):
                self._follower_notify(block, msg)
                self.drain_tx_buffer()
            return
        self.tx_buffer[block.n] = (block, msg)
        self.request_sync(msg.sender, "tx", h, block.n - 1)

    def _follower_notify(self, block: TxBlock, msg=None) -> None:
        inst = msg.instance if msg is not None else None
        for tx in block.txs:
            self._notify(tx.client, tx.key, block.n, inst, hop=7)

    def drain_tx_buffer(self) -> None:
        while True:
            nxt = self.tx_buffer.pop(self.ledger.height + 1, None)
            if nxt is None:
                break
            block, msg = nxt
            if not self.apply_tx_block(block, notify=False):
                break
            self._follower_notify(block, msg)
        for n in [k for k in self.tx_buffer if k <= self.ledger.height]:
            del self.tx_buffer[n]

    def on_tx_committed(self, block: TxBlock, notify: bool) -> None:
        for tx in block.txs:
            self.committed_at[tx.key] = block.n
            self.pending.pop(tx.key, None)
            self.relays.pop(tx.key, None)
        self.locks.pop(block.n, None)
        self.lock_evidence.pop(block.n, None)
        if self.sim.registry is not None:
            self.sim.registry.record_commit(self, block)
        if notify:
            self._follower_notify(block)
        inst = self.instance
        if inst is not None and inst.n <= block.n:
            self.instance = None
        self.after_tx_committed(block)

    def after_tx_committed(self, block: TxBlock) -> None:
        """Hook for the view-change layer (complaint bookkeeping)."""


class Client:
    """Closed-loop client: one outstanding proposal, committed on f+1 Notifs."""

    def __init__(self, cid: int, n: int, sim: Simulator, net: Network, keyring: Keyring,
                 timeout_ms: float, think_ms: float = 0.0, payload_size: int = 16,
                 complain_to: tuple | None = None):
        self.id = cid
        self.n = n
        self.f = (n - 1) // 3
        self.sim = sim
        self.net = net
        self.keyring = keyring
        self.key = keyring.key(cid)
        self.timeout_ms = timeout_ms
        self.think_ms = think_ms
        self.payload_size = payload_size
        self.complain_to = complain_to
        self.rng = sim.derived_rng("client", cid)
        self.timestamp = 0
        self.current: Transaction | None = None
        self.sent_at = 0.0
        self.notifs: set[int] = set()
        self.timer = None
        self.latencies: list[float] = []
        self.complaints = 0
        net.register(cid, self)

    def start(self) -> None:
        self.sim.schedule(self.rng.uniform(0, 5.0), self.propose)

    def propose(self) -> None:
        self.timestamp += 1
        payload = self.rng.randbytes(self.payload_size)
        tx = Transaction(self.id, self.timestamp, payload)
        tx = Transaction(self.id, self.timestamp, payload, self.key.sign(tx.signed_digest))
        self.current, self.sent_at, self.notifs = tx, self.sim.now, set()
        self.sim.emit("propose", client=self.id, key=list(tx.key))
        for s in range(self.n):
            self.net.send(self.id, s, m.Prop(self.id, tx))
        self.timer = self.sim.schedule(self.timeout_ms, self.on_timeout, tx.key)

    def on_timeout(self, key: tuple) -> None:
        if self.current is None or self.current.key != key:
            return
        self.complaints += 1
        targets = self.complain_to if self.complain_to is not None else range(self.n)
        for s in targets:
            self.net.send(self.id, s, m.Compt(self.id, self.current))
        self.timer = self.sim.schedule(self.timeout_ms, self.on_timeout, key)

    def receive(self, msg) -> None:
        if not isinstance(msg, m.Notif) or self.current is None or tuple(msg.key) != self.current.key:
            return
        if msg.sender in self.notifs or not self.keyring.verify(msg.sender, msg.signed_digest, msg.sig):
            return
        self.notifs.add(msg.sender)
        if len(self.notifs) >= self.f + 1:
            latency = self.sim.now - self.sent_at
            self.latencies.append(latency)
            self.sim.emit("client_commit", client=self.id, key=list(self.current.key), latency=round(latency, 6))
            self.current = None
            if self.timer is not None:
                self.timer.cancel()
            self.sim.schedule(self.think_ms, self.propose)
