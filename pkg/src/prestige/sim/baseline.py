"""Passive view change baseline: scheduled leaders, timeout quorums, sync before progress."""

from __future__ import annotations

from collections import defaultdict

from .. import messages as m
from ..node import ServerBase
from ..replication import ReplicationMixin


class PassiveServer(ReplicationMixin, ServerBase):
    """Leader of view ``v`` is ``v mod n``.

    A server that sees no commit for ``passive_timeout`` (or whose rotation
    interval elapses) broadcasts Timeout for the next view; f+1 Timeouts
    move a server forward. The scheduled leader waits for 2f+1 NewView
    reports and syncs to the highest reported log before proposing.
    """

    def __init__(self, *args, passive_timeout: float = 1000.0, rotation_ms: float | None = None, **kwargs):
        super().__init__(*args, **kwargs)
        self._init_replication()
        self._view = 1
        self.passive_timeout = passive_timeout
        self.rotation_ms = rotation_ms
        self.timeouts: dict[int, dict] = defaultdict(dict)
        self.timeout_sent: set[int] = set()
        self.newviews: dict[int, dict] = defaultdict(dict)
        self.ready = self.leader_id == self.id
        self.view_commits = 0

    @property
    def view(self) -> int:
        return self._view

    @property
    def leader_id(self) -> int:
        return self._view % self.n

    def leads(self) -> bool:
        return self.leader_id == self.id and self.ready

    def follows(self) -> bool:
        return self.leader_id != self.id

    def replication_enabled(self) -> bool:
        return True

    def start(self) -> None:
        self._arm_view_timers()
        self.maybe_start_instance()

    def _arm_view_timers(self) -> None:
        self.set_timer("progress", self.passive_timeout, self._expired, self._view)
        self.view_commits = 0
        if self.rotation_ms is not None:
            self.set_timer("rotate", self.rotation_ms, self._rotate, self._view)
        if self.fault.attacker:
            # repeated view-change requests; harmless without f+1 senders
            self._send_timeout(self._view + 1)

    def _expired(self, view: int) -> None:
        if view == self._view:
            self._send_timeout(view + 1)

    def _rotate(self, view: int) -> None:
        # a term ends on schedule only if it was productive; a silent leader waits out the progress timer
        if view == self._view and self.view_commits:
            self._send_timeout(view + 1)

    def _send_timeout(self, target: int) -> None:
        if target in self.timeout_sent:
            return
        if self.fault.quiet and not self.fault.attacker:
            return
        self.timeout_sent.add(target)
        self.timeouts[target][self.id] = self.sign(m.Timeout(self.id, view=target).signed_digest)
        self.broadcast(self.signed(m.Timeout(self.id, view=target)))
        self._check_timeouts(target)

    def on_Timeout(self, msg: m.Timeout) -> None:
        if msg.view <= self._view or not self.verify_sig(msg):
            return
        self.timeouts[msg.view][msg.sender] = msg.sig
        self._check_timeouts(msg.view)

    def _check_timeouts(self, target: int) -> None:
        if target <= self._view or len(self.timeouts[target]) < self.f + 1:
            return
        self._send_timeout(target)
        if target > self._view:
            self._advance(target)

    def _advance(self, view: int) -> None:
        self._view = view
        self.abandon_instance()
        self.ready = False
        self.emit("adopt", view=view, leader=self.leader_id)
        self._arm_view_timers()
        nv = self.signed(m.NewView(self.id, view=view, height=self.ledger.height))
        if self.leader_id == self.id:
            self.newviews[view][self.id] = self.ledger.height
            self._check_newviews()
        else:
            self.send(self.leader_id, nv)

    def on_NewView(self, msg: m.NewView) -> None:
        if msg.view != self._view or self.leader_id != self.id or not self.verify_sig(msg):
            return
        self.newviews[msg.view][msg.sender] = msg.height
        self._check_newviews()

    def _check_newviews(self) -> None:
        reports = self.newviews[self._view]
        if self.ready or len(reports) < self.q:
            return
        who, top = max(reports.items(), key=lambda kv: (kv[1], -kv[0]))
        view = self._view
        if top > self.ledger.height:
            self.request_sync(who, "tx", self.ledger.height, top, then=lambda: self._become_ready(view, top))
        else:
            self._become_ready(view, top)

    def _become_ready(self, view: int, needed: int) -> None:
        if view != self._view or self.ready or self.ledger.height < needed:
            return
        self.ready = True
        self.emit("leader_ready", view=view)
        self.maybe_start_instance()

    def on_Compt(self, msg: m.Compt) -> None:
        tx = msg.tx
        if not self._client_sig_ok(tx):
            return
        if tx.key in self.committed_at:
            self._notify(tx.client, tx.key, self.committed_at[tx.key])
            return
        self._enqueue(tx)
        if self.leader_id != self.id:
            self.send(self.leader_id, self.signed(m.ComptRelay(self.id, tx=tx)))

    def after_tx_committed(self, block) -> None:
        self.view_commits += 1
        self.set_timer("progress", self.passive_timeout, self._expired, self._view)
