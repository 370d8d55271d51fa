"""vcBlock / txBlock types and the per-server append-only store."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterator, Sequence

from .crypto import QCVerifier, QuorumCert, digest
from .reputation import INITIAL_CI, INITIAL_RP


class LedgerError(ValueError):
    pass


def quorum(n: int) -> tuple[int, int]:
    """Return ``(f, 2f+1)`` for a cluster of ``n`` servers."""
    f = (n - 1) // 3
    return f, 2 * f + 1


# message digests that quorum certificates sign over


def revc_digest(view: int) -> bytes:
    return digest("REVC", view)


def vote_digest(v_new: int, candidate: int, rp: int, ci: int) -> bytes:
    return digest("VOTE", v_new, candidate, rp, ci)


def ref_digest(view: int) -> bytes:
    return digest("REF", view)


def ord_digest(n: int, view: int, batch_digest: bytes) -> bytes:
    return digest("ORD", n, view, batch_digest)


def cmt_digest(n: int, view: int, batch_digest: bytes) -> bytes:
    return digest("CMT", n, view, batch_digest)


@dataclass(frozen=True)
class Transaction:
    client: int
    timestamp: int
    payload: bytes
    signature: bytes = b""

    @property
    def key(self) -> tuple[int, int]:
        return (self.client, self.timestamp)

    @property
    def tx_digest(self) -> bytes:
        return digest("TX", self.payload)

    @property
    def signed_digest(self) -> bytes:
        return digest("PROP", self.timestamp, self.tx_digest, self.client)


def batch_digest(txs: Sequence[Transaction]) -> bytes:
    return digest("BATCH", [[t.client, t.timestamp, t.payload] for t in txs])


@dataclass(frozen=True)
class RefreshRecord:
    """A verified refresh applied to the predecessor's reputation segment."""

    server_id: int
    view: int
    rs_qc: QuorumCert
    rp: int = INITIAL_RP
    ci: int = INITIAL_CI


@dataclass(frozen=True)
class VcBlock:
    v: int
    leader_id: int
    conf_qc: QuorumCert | None
    vc_qc: QuorumCert | None
    rp_map: dict = field(hash=False)
    ci_map: dict = field(hash=False)
    prev_vc_ref: bytes | None
    refreshes: tuple[RefreshRecord, ...] = ()

    @cached_property
    def block_digest(self) -> bytes:
        ids = sorted(self.rp_map)
        return digest(
            "VCBLOCK", self.v, self.leader_id,
            self.conf_qc.aggregate_proof if self.conf_qc else None,
            self.vc_qc.aggregate_proof if self.vc_qc else None,
            [[i, self.rp_map[i], self.ci_map[i]] for i in ids],
            self.prev_vc_ref,
            [[r.server_id, r.view, r.rs_qc.aggregate_proof] for r in self.refreshes],
        )

    def to_json(self) -> dict:
        return {
            "kind": "vcBlock",
            "v": self.v,
            "leader": self.leader_id,
            "conf_QC": self.conf_qc.to_json() if self.conf_qc else None,
            "vc_QC": self.vc_qc.to_json() if self.vc_qc else None,
            "rp": {str(k): v for k, v in sorted(self.rp_map.items())},
            "ci": {str(k): v for k, v in sorted(self.ci_map.items())},
            "preVcBlock": self.prev_vc_ref.hex() if self.prev_vc_ref else None,
            "refreshes": [r.server_id for r in self.refreshes],
            "digest": self.block_digest.hex(),
        }


@dataclass(frozen=True)
class TxBlock:
    n: int
    v: int
    ordering_qc: QuorumCert | None
    commit_qc: QuorumCert | None
    txs: tuple[Transaction, ...]
    prev_tx_ref: bytes | None

    @cached_property
    def batch(self) -> bytes:
        return batch_digest(self.txs)

    @cached_property
    def block_digest(self) -> bytes:
        return digest(
            "TXBLOCK", self.n, self.v,
            self.ordering_qc.aggregate_proof if self.ordering_qc else None,
            self.commit_qc.aggregate_proof if self.commit_qc else None,
            self.batch, self.prev_tx_ref,
        )

    def to_json(self) -> dict:
        return {
            "kind": "txBlock",
            "n": self.n,
            "v": self.v,
            "ordering_QC": self.ordering_qc.to_json() if self.ordering_qc else None,
            "commit_QC": self.commit_qc.to_json() if self.commit_qc else None,
            "txs": [[t.client, t.timestamp] for t in self.txs],
            "preTxBlock": self.prev_tx_ref.hex() if self.prev_tx_ref else None,
            "digest": self.block_digest.hex(),
        }


def genesis_vc_block(server_ids: Sequence[int], leader_id: int = 0) -> VcBlock:
    return VcBlock(
        v=1, leader_id=leader_id, conf_qc=None, vc_qc=None,
        rp_map={i: INITIAL_RP for i in server_ids},
        ci_map={i: INITIAL_CI for i in server_ids},
        prev_vc_ref=None,
    )


def genesis_tx_block() -> TxBlock:
    return TxBlock(n=1, v=1, ordering_qc=None, commit_qc=None, txs=(), prev_tx_ref=None)


def segment_after_refreshes(prev: VcBlock, refreshes: Sequence[RefreshRecord]) -> tuple[dict, dict]:
    rp, ci = dict(prev.rp_map), dict(prev.ci_map)
    for r in refreshes:
        rp[r.server_id], ci[r.server_id] = r.rp, r.ci
    return rp, ci


class Ledger:
    """One server's copy of both chains.

    vcBlocks are kept by digest so a server can move onto a branch whose
    parent is an ancestor of its current head (a view that won an election
    but never reached everyone is then orphaned). txBlocks form a single
    chain indexed by sequence number.
    """

    def __init__(self, n: int, verifier: QCVerifier, genesis_leader: int = 0):
        self.n = n
        self.f, self.q = quorum(n)
        self.verifier = verifier
        g = genesis_vc_block(range(n), genesis_leader)
        self._vc: dict[bytes, VcBlock] = {g.block_digest: g}
        self._head_vc = g
        self._tx: list[TxBlock] = [genesis_tx_block()]
        self.amendments: dict[int, RefreshRecord] = {}

    # -- reads ------------------------------------------------------------

    def head_vc_block(self) -> VcBlock:
        return self._head_vc

    def latest_tx_block(self) -> TxBlock:
        return self._tx[-1]

    @property
    def height(self) -> int:
        return self._tx[-1].n

    def tx_block(self, n: int) -> TxBlock | None:
        if 1 <= n <= len(self._tx):
            return self._tx[n - 1]
        return None

    def tx_blocks(self, start: int, end: int) -> list[TxBlock]:
        return self._tx[max(start, 1) - 1:end]

    def vc_block(self, block_digest: bytes | None) -> VcBlock | None:
        return self._vc.get(block_digest) if block_digest else None

    def vc_chain(self, head: VcBlock | None = None) -> list[VcBlock]:
        """Blocks from ``head`` (default: current head) back to genesis."""
        out = []
        block = head or self._head_vc
        while block is not None:
            out.append(block)
            block = self._vc.get(block.prev_vc_ref) if block.prev_vc_ref else None
        return out

    def vc_chain_between(self, after_view: int, head: VcBlock | None = None) -> list[VcBlock]:
        """Chain blocks with ``v > after_view``, oldest first."""
        return [b for b in reversed(self.vc_chain(head)) if b.v > after_view]

    def effective_segment(self) -> tuple[dict, dict]:
        """Head reputation segment with refresh amendments applied."""
        return segment_after_refreshes(self._head_vc, list(self.amendments.values()))

    def reputation_of(self, server_id: int) -> tuple[int, int]:
        if server_id in self.amendments:
            r = self.amendments[server_id]
            return r.rp, r.ci
        return self._head_vc.rp_map[server_id], self._head_vc.ci_map[server_id]

    def penalty_history(self, server_id: int) -> list[int]:
        """Stored penalties for ``server_id`` along the chain, oldest first."""
        return [b.rp_map[server_id] for b in reversed(self.vc_chain())]

    # -- tx chain ----------------------------------------------------------

    def check_tx_block(self, block: TxBlock) -> None:
        if block.n != self.height + 1:
            kind = "gap" if block.n > self.height + 1 else "duplicate"
            raise LedgerError(f"{kind}: block n={block.n} at height {self.height}")
        if block.prev_tx_ref != self.latest_tx_block().block_digest:
            raise LedgerError(f"block n={block.n} does not link to local head")
        bd = block.batch
        if not self.verifier.verify(block.ordering_qc, ord_digest(block.n, block.v, bd), self.q):
            raise LedgerError(f"invalid ordering_QC on block n={block.n}")
        if not self.verifier.verify(block.commit_qc, cmt_digest(block.n, block.v, bd), self.q):
            raise LedgerError(f"invalid commit_QC threshold/signatures on block n={block.n}")

    def append_tx_block(self, block: TxBlock) -> None:
        self.check_tx_block(block)
        self._tx.append(block)

    # -- vc chain ----------------------------------------------------------

    def check_vc_block(self, block: VcBlock, above_head: bool = True) -> None:
        """Validate ``block`` against its parent; raises ``LedgerError``."""
        head = self._head_vc
        if above_head and block.v <= head.v:
            raise LedgerError(f"stale view {block.v} (current {head.v})")
        prev = self._vc.get(block.prev_vc_ref)
        if prev is None:
            raise LedgerError("unknown predecessor")
        if prev.v >= block.v:
            raise LedgerError("predecessor view not below block view")
        if set(block.rp_map) != set(range(self.n)) or set(block.ci_map) != set(range(self.n)):
            raise LedgerError("reputation segment must cover every server")
        for r in block.refreshes:
            if r.view != prev.v or not self.verifier.verify(r.rs_qc, ref_digest(r.view), self.q):
                raise LedgerError(f"invalid refresh proof for server {r.server_id}")
        rp_exp, ci_exp = segment_after_refreshes(prev, block.refreshes)
        for sid in range(self.n):
            if sid == block.leader_id:
                continue
            if block.rp_map[sid] != rp_exp[sid] or block.ci_map[sid] != ci_exp[sid]:
                raise LedgerError(f"reputation segment tampered for server {sid}")
        lrp, lci = block.rp_map[block.leader_id], block.ci_map[block.leader_id]
        if not self.verifier.verify(block.vc_qc, vote_digest(block.v, block.leader_id, lrp, lci), self.q):
            raise LedgerError("invalid vc_QC")
        if not self.verifier.verify(block.conf_qc, revc_digest(prev.v), self.f + 1):
            raise LedgerError("invalid conf_QC")

    def append_vc_block(self, block: VcBlock) -> None:
        self.check_vc_block(block)
        self._adopt_vc(block)

    def _adopt_vc(self, block: VcBlock) -> None:
        self._vc[block.block_digest] = block
        self._head_vc = block
        self.amendments = {}

    def amend(self, record: RefreshRecord) -> None:
        """Apply a verified refresh to the current head's reputation segment."""
        if record.view != self._head_vc.v:
            raise LedgerError(f"refresh for view {record.view} but head is {self._head_vc.v}")
        if not self.verifier.verify(record.rs_qc, ref_digest(record.view), self.q):
            raise LedgerError("invalid rs_QC")
        self.amendments[record.server_id] = record

    # -- catch-up ----------------------------------------------------------

    def sync_up(self, kind: str, start: int, end: int, fetch: Callable[[int, int], Sequence]) -> list:
        """Fetch blocks ``start+1 .. end`` from a peer and adopt them in order.

        ``start`` is the local id (view or sequence number) to sync from.
        Blocks are validated one by one; on the first invalid block the valid
        prefix is kept and ``LedgerError`` is raised.
        """
        if end <= start:
            return []
        blocks = list(fetch(start, end))
        adopted = []
        for block in blocks:
            try:
                if kind == "tx":
                    self.append_tx_block(block)
                elif kind == "vc":
                    if block.block_digest in self._vc:
                        continue
                    self.check_vc_block(block)
                    self._adopt_vc(block)
                else:
                    raise ValueError(f"unknown block kind {kind!r}")
            except LedgerError as exc:
                raise LedgerError(f"sync stopped after {len(adopted)} blocks: {exc}") from exc
            adopted.append(block)
        last = self.height if kind == "tx" else self._head_vc.v
        if last < end:
            raise LedgerError(f"source missing blocks: reached {last}, wanted {end}")
        return adopted

    def adopt_vc_chain(self, blocks: Sequence[VcBlock]) -> list[VcBlock]:
        """Adopt a contiguous branch (oldest first) whose root parent is known."""
        adopted = []
        for block in blocks:
            if block.block_digest in self._vc:
                continue
            if block.v <= self._head_vc.v:
                # ancestor of a branch we are switching to; keep, do not move head
                self.check_vc_block(block, above_head=False)
                self._vc[block.block_digest] = block
                continue
            self.check_vc_block(block)
            self._adopt_vc(block)
            adopted.append(block)
        return adopted

    # -- dumps -------------------------------------------------------------

    def iter_json(self) -> Iterator[dict]:
        for b in reversed(self.vc_chain()):
            yield b.to_json()
        for t in self._tx:
            yield t.to_json()

    def dump_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for row in self.iter_json():
                fh.write(json.dumps(row, sort_keys=True) + "\n")
