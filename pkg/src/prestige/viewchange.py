"""Active view change: failure detection, campaigning, voting, declaration, refresh.

Rejection reasons for campaign packets are emitted as trace events
(``reject_camp``) so each voting criterion is observable on its own.
"""

from __future__ import annotations

import math
from collections import defaultdict

from . import messages as m
from .crypto import CryptoError, aggregate_qc
from .ledger import LedgerError, RefreshRecord, VcBlock, ref_digest, revc_digest, vote_digest
from .node import Role
from .reputation import INITIAL_RP, calc_rp, calc_rp_breakdown, refresh_values


class ViewChangeMixin:

    def _init_view_change(self) -> None:
        head = self.ledger.head_vc_block()
        self.role = Role.LEADER if head.leader_id == self.id else Role.FOLLOWER
        self.votes: dict[int, int] = {}
        self.complaints: dict[tuple, object] = {}
        self.tagged_clients: set[int] = set()
        self.inspection: dict | None = None
        self.redeem: dict | None = None
        self.campaign: dict | None = None
        self.declaring: dict | None = None
        self.view_started_at = 0.0
        self.refs: dict[int, dict] = defaultdict(dict)
        self.ref_sent: set[int] = set()
        self.refreshed_views: set[int] = set()
        self.early_rdone: dict[int, list] = defaultdict(list)
        self.campaign_failures = 0
        self.suspended = False
        self._token = 0
        self._vcwait_count = 0

    # -- role queries used by replication ----------------------------------

    @property
    def view(self) -> int:
        return self.ledger.head_vc_block().v

    @property
    def leader_id(self) -> int:
        return self.ledger.head_vc_block().leader_id

    def leads(self) -> bool:
        return self.role is Role.LEADER and self.declaring is None and self.leader_id == self.id

    def follows(self) -> bool:
        return self.role is Role.FOLLOWER

    def replication_enabled(self) -> bool:
        return not self.suspended

    def withholding_votes(self) -> bool:
        # heights must settle or every candidate trails its voters and fails C3
        return self.has_timer("vcwait")

    def process(self, msg) -> None:
        # a crashed leader wakes up only when a later view reaches it
        if self.suspended and not isinstance(msg, (m.NewVcBlock, m.SyncResp)):
            return
        super().process(msg)

    def send(self, dst: int, msg) -> None:
        if self.suspended:
            return
        super().send(dst, msg)

    def start(self) -> None:
        self._enter_view(self.ledger.head_vc_block(), initial=True)

    # -- failure detection --------------------------------------------------

    def _outstanding(self, key) -> bool:
        tx = self.complaints.get(key)
        return tx is not None and key not in self.committed_at and tx.client not in self.tagged_clients

    def on_Compt(self, msg: m.Compt) -> None:
        tx = msg.tx
        if tx.client in self.tagged_clients or not self._client_sig_ok(tx):
            return
        if tx.key in self.committed_at:
            self._notify(tx.client, tx.key, self.committed_at[tx.key])
            return
        if self.leads():
            self._enqueue(tx)
            return
        first = tx.key not in self.complaints
        self.complaints[tx.key] = tx
        if first and self.role is Role.FOLLOWER:
            self.send(self.leader_id, self.signed(m.ComptRelay(self.id, tx=tx)))
        if self.role is not Role.FOLLOWER:
            return
        if self.fault.attacker:
            self._attack_opportunity()
        elif not self.has_timer("vcwait"):
            self._arm_complaint_timer()

    def _arm_complaint_timer(self) -> None:
        # one randomized timer per view no matter how many complaints arrive;
        # a minimum over many draws would bunch servers near timeout_lo
        if not self.has_timer("compt"):
            view = self.view
            self.set_timer("compt", self.draw_timeout("compt", view), self._complaint_expired, view)

    def _first_outstanding(self):
        return next((k for k in self.complaints if self._outstanding(k)), None)

    def _complaint_expired(self, view: int) -> None:
        if view != self.view or self.role is not Role.FOLLOWER:
            return
        key = self._first_outstanding()
        if key is not None:
            self._start_inspection(key)

    def _policy_due(self) -> bool:
        x = self.params.rotation_ms
        return x is not None and self.sim.now - self.view_started_at >= x - self.params.policy_slack

    def _policy_fire(self, view: int) -> None:
        if view == self.view and self.role is Role.FOLLOWER:
            self._start_inspection("policy")

    def _start_inspection(self, reason) -> None:
        if self.inspection is not None:
            return
        if self.fault.quiet and not self.fault.attacker:
            return
        view = self.view
        tx = None if reason == "policy" else self.complaints[reason]
        self.inspection = {"view": view, "reason": reason, "revcs": {self.id: self.sign(revc_digest(view))}}
        self.set_timer("inspect", self.draw_timeout("inspect", view, reason), self._inspection_expired, view)
        self.emit("confvc", view=view, reason="policy" if tx is None else list(reason))
        self.broadcast(self.signed(m.ConfVC(self.id, view=view, tx=tx)))
        self._check_conf_quorum()

    def _inspection_expired(self, view: int) -> None:
        insp = self.inspection
        if insp is None or insp["view"] != view:
            return
        self.inspection = None
        if insp["reason"] != "policy" and self.view == view:
            tx = self.complaints.get(insp["reason"])
            if tx is not None:
                self.tagged_clients.add(tx.client)
                self.emit("tag_client", client=tx.client, view=view)

    def on_ConfVC(self, msg: m.ConfVC) -> None:
        if msg.view != self.view or not self.verify_sig(msg):
            return
        colluder = self.fault.is_colluder(msg.sender)
        if self.fault.attacker and colluder:
            endorse = True
        elif msg.tx is None:
            endorse = self._policy_due()
        else:
            endorse = self._outstanding(msg.tx.key) and self.complaints[msg.tx.key] == msg.tx
        if not endorse:
            return
        if self.role in (Role.FOLLOWER, Role.LEADER):
            self.send(msg.sender, self.signed(m.ReVC(self.id, view=msg.view)))
        if self.role is not Role.FOLLOWER:
            return
        if self.fault.attacker:
            if not colluder:
                self._attack_opportunity()
        elif self.fault.mimic_victim is None:
            self._join_view_change()

    def _join_view_change(self) -> None:
        """Defer to a peer's view change instead of racing it with our own timers."""
        self.cancel_timer("compt")
        self.cancel_timer("policy")
        self._vcwait_count += 1
        self.set_timer("vcwait", self.draw_timeout("vcwait", self.view, self._vcwait_count),
                       self._vcwait_expired, self.view)

    def _vcwait_expired(self, view: int) -> None:
        if view != self.view or self.role is not Role.FOLLOWER or self.inspection is not None:
            return
        for key in self.complaints:
            if self._outstanding(key):
                self._start_inspection(key)
                return
        if self._policy_due():
            self._start_inspection("policy")

    def on_ReVC(self, msg: m.ReVC) -> None:
        insp = self.inspection
        if insp is None or msg.view != insp["view"] or msg.sender in insp["revcs"]:
            return
        if not self.verify_sig(msg):
            return
        insp["revcs"][msg.sender] = msg.sig
        self._check_conf_quorum()

    def _check_conf_quorum(self) -> None:
        insp = self.inspection
        if insp is None or len(insp["revcs"]) < self.f + 1 or self.role is not Role.FOLLOWER:
            return
        view = insp["view"]
        try:
            conf_qc = aggregate_qc(insp["revcs"], revc_digest(view), view, self.f + 1, self.keyring)
        except CryptoError:
            return
        self.inspection = None
        self.cancel_timer("inspect")
        self._enter_redeemer(conf_qc, self._next_view())

    # -- F4 ------------------------------------------------------------------

    def _attack_opportunity(self) -> None:
        if not self.fault.attacker or self.role is not Role.FOLLOWER or self.inspection is not None:
            return
        reason = self._first_outstanding()
        if reason is None and self._policy_due():
            reason = "policy"
        if reason is None:
            return
        if self.fault.policy.value == "S2" and not self._would_be_compensated():
            return
        if self.fault.collusion is not None and not self.fault.collusion.claim(self.view, self.id):
            return
        self._start_inspection(reason)

    def _would_be_compensated(self) -> bool:
        if self.ledger.reputation_of(self.id)[0] == INITIAL_RP:
            # nothing accrued yet, so the first attack costs nothing to protect
            return True
        return self._compensation_due()

    def _compensation_due(self) -> bool:
        *_, br = calc_rp_breakdown(self.view + 1, self.ledger.vc_chain(), self.ledger.latest_tx_block(), self.id,
                                   self.params.c_delta, self.ledger.reputation_of(self.id))
        return math.floor(br.delta) >= 1

    # -- redeemer / candidate ----------------------------------------------

    def _next_view(self) -> int:
        """One past every view this server has already voted or campaigned in.

        Votes are final per view, so reusing a view number after a failed
        election would be rejected by every peer that voted in it.
        """
        return max([self.view, *self.votes]) + 1

    def _enter_redeemer(self, conf_qc, v_new: int) -> None:
        self.cancel_timer("compt")
        self.cancel_timer("vcwait")
        self.cancel_timer("policy")
        self.abandon_instance()
        self.role = Role.REDEEMER
        ledger = self.ledger
        head, latest = ledger.head_vc_block(), ledger.latest_tx_block()
        rp, ci, br = calc_rp_breakdown(v_new, ledger.vc_chain(), latest, self.id, self.params.c_delta,
                                       ledger.reputation_of(self.id))
        col = self.fault.collusion if self.fault.faulty else None
        sol = self.puzzle.solve(latest.block_digest, rp, self.rng, budget=col.budget if col else None,
                                workers=col.workers if col else 1)
        self._token += 1
        self.redeem = {"token": self._token, "v": head.v, "v_new": v_new, "rp": rp, "ci": ci,
                       "conf_qc": conf_qc, "sol": sol, "head": head.block_digest, "txb": latest}
        self.emit("redeemer", v_new=v_new, rp=rp, ci=ci, delta=round(br.delta, 6),
                  iterations=sol.iterations, cost_ms=None if sol.exhausted else round(sol.cost_ms, 6))
        self._maybe_send_ref(rp)
        if sol.exhausted:
            self.emit("exhausted", v_new=v_new, rp=rp)
            self.redeem = None
            self.role = Role.FOLLOWER
            return
        self.set_timer("puzzle", sol.cost_ms, self._puzzle_done, self._token)

    def _puzzle_done(self, token: int) -> None:
        r = self.redeem
        if r is None or r["token"] != token or self.role is not Role.REDEEMER:
            return
        if self.ledger.height > r["txb"].n:
            # a block committed while we were solving; the puzzle must cover the latest one
            self._enter_redeemer(r["conf_qc"], r["v_new"])
            return
        self.redeem = None
        v_new = r["v_new"]
        if self.votes.get(v_new, self.id) != self.id:
            # already voted for a peer in this view; our own campaign cannot win
            self.role = Role.FOLLOWER
            self._join_view_change()
            return
        self.votes[v_new] = self.id
        sol, txb = r["sol"], r["txb"]
        camp = self.signed(m.Camp(self.id, conf_qc=r["conf_qc"], v=r["v"], v_new=v_new, rp=r["rp"],
                                  nc=sol.nonce, hr=sol.hash_result, ci=r["ci"], tx_block=txb,
                                  head_digest=r["head"]))
        self.campaign = {"token": token, "v_new": v_new, "rp": r["rp"], "ci": r["ci"], "conf_qc": r["conf_qc"],
                         "votes": {self.id: self.sign(vote_digest(v_new, self.id, r["rp"], r["ci"]))}}
        self.role = Role.CANDIDATE
        self.set_timer("elect", self.draw_timeout("elect", v_new), self._election_expired, token)
        self.emit("campaign", v_new=v_new, rp=r["rp"], ci=r["ci"], height=txb.n)
        self.broadcast(camp)
        self._check_vote_quorum()

    def on_VoteCP(self, msg: m.VoteCP) -> None:
        c = self.campaign
        if c is None or msg.v_new != c["v_new"] or msg.candidate != self.id or msg.sender in c["votes"]:
            return
        if (msg.rp, msg.ci) != (c["rp"], c["ci"]) or not self.verify_sig(msg):
            return
        c["votes"][msg.sender] = msg.sig
        self._check_vote_quorum()

    def _check_vote_quorum(self) -> None:
        c = self.campaign
        if c is None or len(c["votes"]) < self.q:
            return
        d = vote_digest(c["v_new"], self.id, c["rp"], c["ci"])
        try:
            vc_qc = aggregate_qc(c["votes"], d, c["v_new"], self.q, self.keyring)
        except CryptoError:
            return
        self.cancel_timer("elect")
        self.campaign = None
        self._declare(c, vc_qc)

    def _election_expired(self, token: int) -> None:
        c = self.campaign
        if c is None or c["token"] != token:
            return
        self.campaign = None
        self.emit("split_vote", v_new=c["v_new"], votes=len(c["votes"]))
        self.campaign_failures += 1
        if self.campaign_failures > self.params.max_campaign_retries:
            self.role = Role.FOLLOWER
            self._join_view_change()
            return
        self._enter_redeemer(c["conf_qc"], self._next_view())

    # -- leader declaration -------------------------------------------------

    def _declare(self, c: dict, vc_qc) -> None:
        ledger = self.ledger
        prev = ledger.head_vc_block()
        rp_map, ci_map = ledger.effective_segment()
        rp_map[self.id], ci_map[self.id] = c["rp"], c["ci"]
        refreshes = tuple(sorted(ledger.amendments.values(), key=lambda r: r.server_id))
        block = VcBlock(c["v_new"], self.id, c["conf_qc"], vc_qc, rp_map, ci_map, prev.block_digest, refreshes)
        self.role = Role.LEADER
        self.declaring = {"block": block, "yes": {self.id}}
        self.emit("elected", view=block.v, leader=self.id, rp=c["rp"], ci=c["ci"], height=ledger.height,
                  signers=sorted(vc_qc.signer_set), digest=block.block_digest.hex())
        if self.sim.registry is not None:
            self.sim.registry.record_vc_block(block)
        self.set_timer("declare", self.draw_timeout("declare", block.v), self._declare_expired, block.v)
        self.broadcast(m.NewVcBlock(self.id, block=block))
        self._check_vcyes()

    def on_VcYes(self, msg: m.VcYes) -> None:
        d = self.declaring
        if d is None or msg.view != d["block"].v or msg.sender in d["yes"] or not self.verify_sig(msg):
            return
        d["yes"].add(msg.sender)
        self._check_vcyes()

    def _check_vcyes(self) -> None:
        d = self.declaring
        if d is None or len(d["yes"]) < self.q:
            return
        block = d["block"]
        try:
            self.ledger.append_vc_block(block)
        except LedgerError as exc:
            self.emit("declare_failed", view=block.v, reason=str(exc))
            self.declaring = None
            self.role = Role.FOLLOWER
            return
        self._enter_view(block)

    def _declare_expired(self, view: int) -> None:
        d = self.declaring
        if d is None or d["block"].v != view:
            return
        self.emit("declare_failed", view=view, reason="vcYes timeout")
        self.declaring = None
        self.role = Role.FOLLOWER
        self._join_view_change()

    # -- followers: new blocks and votes -----------------------------------

    def on_NewVcBlock(self, msg: m.NewVcBlock, synced: bool = False) -> None:
        block = msg.block
        if block.v <= self.view:
            return
        if self.ledger.vc_block(block.prev_vc_ref) is None:
            if not synced:
                self.request_sync(msg.sender, "vc", self.view, block.v,
                                  then=lambda: self.on_NewVcBlock(msg, synced=True))
            return
        was_suspended = self.suspended
        try:
            self.ledger.append_vc_block(block)
        except LedgerError as exc:
            self.emit("reject_vcblock", view=block.v, reason=str(exc))
            return
        self.suspended = False
        self.send(msg.sender, self.signed(m.VcYes(self.id, view=block.v)))
        self._enter_view(block, resumed=was_suspended)

    def adopt_vc_blocks(self, blocks) -> None:
        old = self.ledger.head_vc_block()
        try:
            self.ledger.adopt_vc_chain(blocks)
        except LedgerError as exc:
            self.emit("reject_vcblock", reason=str(exc))
        head = self.ledger.head_vc_block()
        if head is not old:
            self.suspended = False
            self._enter_view(head)

    def on_Camp(self, msg: m.Camp, attempts: int = 0) -> None:
        reason = self._vote_on(msg, attempts)
        if reason is not None:
            self.emit("reject_camp", candidate=msg.sender, v_new=msg.v_new, reason=reason)

    def _own_v_new(self) -> int | None:
        state = self.redeem or self.campaign
        return None if state is None else state["v_new"]

    def _outranked_by(self, msg: m.Camp) -> bool:
        """A confirmed campaign that makes our own attempt moot.

        A candidate has voted for itself in its view, so only a later view
        outranks it. A redeemer has not voted yet and also yields to a peer
        that reached the same view first.
        """
        own = self._own_v_new()
        if own is None:
            return False
        later = msg.v_new > own or (msg.v_new == own and self.role is Role.REDEEMER)
        return later and self.verifier.verify(msg.conf_qc, revc_digest(msg.v), self.f + 1)

    def _step_down(self, v_new: int) -> None:
        self.emit("step_down", v_new=self._own_v_new(), outranked_by=v_new)
        self.redeem = self.campaign = None
        self.cancel_timer("puzzle")
        self.cancel_timer("elect")
        self.role = Role.FOLLOWER

    def _vote_on(self, msg: m.Camp, attempts: int):
        cand, v_new = msg.sender, msg.v_new
        if not self.verify_sig(msg):
            return "signature"
        if self.fault.attacker:
            # colluders back each other unconditionally and never back anyone else
            if self.fault.is_colluder(cand) and v_new not in self.votes:
                self._cast_vote(msg, msg.rp, msg.ci, audited=False)
            return None
        if self._outranked_by(msg):
            self._step_down(v_new)
        if self.role not in (Role.FOLLOWER, Role.LEADER) or self.declaring is not None:
            return "busy"
        ledger = self.ledger
        head = ledger.head_vc_block()
        if v_new <= head.v:
            return "stale_view"
        if v_new in self.votes:
            return "C1"
        if not self.verifier.verify(msg.conf_qc, revc_digest(msg.v), self.f + 1):
            return "C2"
        if msg.v > head.v:
            if attempts >= 2:
                return "vc_sync_failed"
            self.request_sync(cand, "vc", head.v, msg.v, then=lambda: self.on_Camp(msg, attempts + 1))
            return None
        if msg.v < head.v or msg.head_digest != head.block_digest:
            return "stale_chain"
        txb = msg.tx_block
        if txb is None:
            return "C3"
        h = ledger.height
        if txb.n < h:
            return "C3"
        if txb.n > h:
            if attempts >= 2:
                return "tx_sync_failed"
            self.request_sync(cand, "tx", h, txb.n, then=lambda: self.on_Camp(msg, attempts + 1))
            return None
        if txb.block_digest != ledger.latest_tx_block().block_digest:
            return "C3_fork"
        rp, ci = calc_rp(v_new, ledger.vc_chain(), txb, cand, self.params.c_delta, ledger.reputation_of(cand))
        if (rp, ci) != (msg.rp, msg.ci):
            return "C4"
        if not self.puzzle.verify(txb.block_digest, msg.nc, rp, msg.hr):
            return "C5"
        self._cast_vote(msg, rp, ci, audited=True)
        return None

    def _cast_vote(self, msg: m.Camp, rp: int, ci: int, audited: bool) -> None:
        v_new, cand = msg.v_new, msg.sender
        self.votes[v_new] = cand
        self.send(cand, self.signed(m.VoteCP(self.id, v_new=v_new, candidate=cand, rp=rp, ci=ci)))
        if audited:
            seg = self.ledger.reputation_of(cand)
            self.emit("vote", candidate=cand, v_new=v_new, rp=rp, ci=ci, seg=list(seg),
                      head=self.ledger.head_vc_block().block_digest.hex(), tx=msg.tx_block.block_digest.hex(),
                      tx_n=msg.tx_block.n, nc=msg.nc.hex(), hr=msg.hr.hex())
        if self.role is Role.FOLLOWER and not self.fault.attacker:
            self.inspection = None
            self.cancel_timer("inspect")
            self._join_view_change()

    # -- view entry ----------------------------------------------------------

    def _enter_view(self, block: VcBlock, initial: bool = False, resumed: bool = False) -> None:
        self.abandon_instance()
        for name in ("puzzle", "elect", "declare", "inspect", "vcwait", "policy", "attack"):
            self.cancel_timer(name)
        self.cancel_timer("compt")
        self.redeem = self.campaign = self.declaring = self.inspection = None
        self.campaign_failures = 0
        self._vcwait_count = 0
        self.view_started_at = self.sim.now
        self.role = Role.LEADER if block.leader_id == self.id else Role.FOLLOWER
        if not initial:
            self.emit("adopt", view=block.v, leader=block.leader_id)
        if self.role is Role.LEADER:
            if self.params.crash_leaders and not initial:
                self.suspended = True
                self.emit("leader_crash", view=block.v)
                return
            for key, tx in list(self.complaints.items()):
                if self._outstanding(key):
                    self._enqueue(tx)
            self.maybe_start_instance()
        else:
            for key, tx in list(self.complaints.items()):
                if self._outstanding(key):
                    self.send(self.leader_id, self.signed(m.ComptRelay(self.id, tx=tx)))
                    if not self.fault.attacker:
                        self._arm_complaint_timer()
            x = self.params.rotation_ms
            if self.fault.attacker:
                # earliest moment correct servers will endorse a policy rotation
                delay = 0.0 if x is None else max(0.0, x - self.params.policy_slack)
                self.set_timer("attack", delay, self._attack_opportunity)
            elif x is not None and not self.fault.quiet:
                jitter = self.draw_timeout("policy", block.v) - self.params.timeout_lo
                self.set_timer("policy", x + jitter, self._policy_fire, block.v)
        self._maybe_send_ref()
        for msg in self.early_rdone.pop(block.v, []):
            self.on_Rdone(msg)

    def after_tx_committed(self, block) -> None:
        for tx in block.txs:
            self.complaints.pop(tx.key, None)
        if self._first_outstanding() is None:
            self.cancel_timer("compt")

    # -- refresh -------------------------------------------------------------

    def _maybe_send_ref(self, imposed: int | None = None) -> None:
        """Ask for a refresh while the penalty we would carry next exceeds the threshold.

        ``imposed`` is an rp just computed at redeemer entry; otherwise the
        prospective rp for the next view is used, since the stored value
        only rises by winning, and winning above the threshold may already
        be computationally out of reach.
        """
        view = self.view
        if view in self.ref_sent or self.fault.quiet:
            return
        rp = imposed if imposed is not None else self._prospective_rp()
        if rp <= self.params.refresh_threshold:
            return
        self.ref_sent.add(view)
        self.refs[view][self.id] = self.sign(ref_digest(view))
        self.emit("ref", view=view, rp=rp)
        self.broadcast(self.signed(m.Ref(self.id, view=view)))
        self._check_refresh(view)

    def _prospective_rp(self) -> int:
        ledger = self.ledger
        rp, _ = calc_rp(self.view + 1, ledger.vc_chain(), ledger.latest_tx_block(), self.id, self.params.c_delta,
                        ledger.reputation_of(self.id))
        return max(rp, ledger.reputation_of(self.id)[0])

    def on_Ref(self, msg: m.Ref) -> None:
        if msg.view < self.view or not self.verify_sig(msg):
            return
        self.refs[msg.view][msg.sender] = msg.sig
        if msg.view == self.view:
            self._check_refresh(msg.view)

    def _check_refresh(self, view: int) -> None:
        if view not in self.ref_sent or view in self.refreshed_views or len(self.refs[view]) < self.q:
            return
        try:
            rs_qc = aggregate_qc(self.refs[view], ref_digest(view), view, self.q, self.keyring)
        except CryptoError:
            return
        self.refreshed_views.add(view)
        rp, ci = refresh_values()
        record = RefreshRecord(self.id, view, rs_qc, rp, ci)
        old = self.ledger.reputation_of(self.id)
        self.ledger.amend(record)
        self.emit("refresh", view=view, old=list(old), signers=sorted(rs_qc.signer_set))
        self.broadcast(self.signed(m.Rdone(self.id, record=record)))
        r = self.redeem
        if self.role is Role.REDEEMER and r is not None:
            # the puzzle in progress was sized for the old penalty
            self.cancel_timer("puzzle")
            self._enter_redeemer(r["conf_qc"], r["v_new"])

    def on_Rdone(self, msg: m.Rdone) -> None:
        r = msg.record
        if r is None or r.server_id != msg.sender or (r.rp, r.ci) != refresh_values() or not self.verify_sig(msg):
            return
        if r.view > self.view:
            self.early_rdone[r.view].append(msg)
            return
        if r.view < self.view:
            return
        try:
            self.ledger.amend(r)
        except LedgerError as exc:
            self.emit("reject_rdone", subject=r.server_id, reason=str(exc))
            return
        self.emit("rdone_applied", subject=r.server_id, view=r.view)
