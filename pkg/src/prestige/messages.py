"""Protocol messages exchanged inside the simulator.

Every message knows the digest its sender signs (``signed_digest``); quorum
messages sign exactly the digest their certificate is formed over, so a
receiver can both authenticate the sender and aggregate the signature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .crypto import QuorumCert, digest
from .ledger import (
    RefreshRecord, Transaction, TxBlock, VcBlock, cmt_digest, ord_digest, ref_digest, revc_digest,
    vote_digest,
)


@dataclass
class Message:
    sender: int

    @property
    def signed_digest(self) -> bytes:
        return digest(type(self).__name__, self.sender)


@dataclass
class Signed(Message):
    sig: bytes = field(default=b"", repr=False)


# -- client <-> server ---------------------------------------------------------


@dataclass
class Prop(Message):
    tx: Transaction


@dataclass
class Compt(Message):
    tx: Transaction


@dataclass
class ComptRelay(Signed):
    tx: Transaction = None


@dataclass
class Notif(Signed):
    key: tuple = ()
    n: int = 0
    instance: tuple | None = None
    hop: int = 0

    @property
    def signed_digest(self) -> bytes:
        return digest("NOTIF", list(self.key), self.n)


# -- view change ---------------------------------------------------------------


@dataclass
class ConfVC(Signed):
    view: int = 0
    tx: Transaction | None = None  # None for a policy-triggered rotation

    @property
    def signed_digest(self) -> bytes:
        return digest("CONFVC", self.view, list(self.tx.key) if self.tx else None)


@dataclass
class ReVC(Signed):
    view: int = 0

    @property
    def signed_digest(self) -> bytes:
        return revc_digest(self.view)


@dataclass
class Camp(Signed):
    conf_qc: QuorumCert | None = None
    v: int = 0
    v_new: int = 0
    rp: int = 0
    nc: bytes = b""
    hr: bytes = b""
    ci: int = 0
    tx_block: TxBlock | None = None
    head_digest: bytes = b""

    @property
    def signed_digest(self) -> bytes:
        return digest(
            "CAMP", self.v, self.v_new, self.rp, self.nc, self.hr, self.ci,
            self.tx_block.block_digest if self.tx_block else None, self.head_digest,
        )


@dataclass
class VoteCP(Signed):
    v_new: int = 0
    candidate: int = 0
    rp: int = 0
    ci: int = 0

    @property
    def signed_digest(self) -> bytes:
        return vote_digest(self.v_new, self.candidate, self.rp, self.ci)


@dataclass
class NewVcBlock(Message):
    block: VcBlock = None


@dataclass
class VcYes(Signed):
    view: int = 0

    @property
    def signed_digest(self) -> bytes:
        return digest("VCYES", self.view)


@dataclass
class Ref(Signed):
    view: int = 0

    @property
    def signed_digest(self) -> bytes:
        return ref_digest(self.view)


@dataclass
class Rdone(Signed):
    record: RefreshRecord = None

    @property
    def signed_digest(self) -> bytes:
        r = self.record
        return digest("RDONE", r.view, r.rp, r.ci, r.rs_qc.aggregate_proof)


@dataclass
class SyncReq(Message):
    kind: str = "tx"
    start: int = 0
    end: int = 0
    req_id: int = 0


@dataclass
class SyncResp(Message):
    kind: str = "tx"
    blocks: tuple = ()
    req_id: int = 0


# -- replication ---------------------------------------------------------------


@dataclass
class Ord(Signed):
    n: int = 0
    view: int = 0
    txs: tuple[Transaction, ...] = ()
    batch: bytes = b""
    instance: tuple | None = None
    hop: int = 0
    justify: QuorumCert | None = None  # earlier view's ordering_QC when re-proposing a locked batch

    @property
    def signed_digest(self) -> bytes:
        return ord_digest(self.n, self.view, self.batch)


@dataclass
class OrdReply(Signed):
    n: int = 0
    view: int = 0
    batch: bytes = b""
    instance: tuple | None = None
    hop: int = 0

    @property
    def signed_digest(self) -> bytes:
        return ord_digest(self.n, self.view, self.batch)


@dataclass
class Cmt(Signed):
    n: int = 0
    view: int = 0
    txs: tuple[Transaction, ...] = ()
    batch: bytes = b""
    ordering_qc: QuorumCert | None = None
    instance: tuple | None = None
    hop: int = 0

    @property
    def signed_digest(self) -> bytes:
        return digest("CMTMSG", self.n, self.view, self.batch)


@dataclass
class CmtReply(Signed):
    n: int = 0
    view: int = 0
    batch: bytes = b""
    instance: tuple | None = None
    hop: int = 0

    @property
    def signed_digest(self) -> bytes:
        return cmt_digest(self.n, self.view, self.batch)


@dataclass
class TxBlockMsg(Message):
    block: TxBlock = None
    instance: tuple | None = None
    hop: int = 0


@dataclass
class Stale(Message):
    """Reply to an Ord/Cmt whose sequence number the follower already committed."""

    blocks: tuple[TxBlock, ...] = ()


@dataclass
class Locked(Message):
    """Reply carrying the follower's lock on a different batch for the same n."""

    n: int = 0
    lock_view: int = 0
    txs: tuple[Transaction, ...] = ()
    batch: bytes = b""
    ordering_qc: QuorumCert | None = None


# -- passive baseline ----------------------------------------------------------


@dataclass
class Timeout(Signed):
    view: int = 0

    @property
    def signed_digest(self) -> bytes:
        return digest("TIMEOUT", self.view)


@dataclass
class NewView(Signed):
    view: int = 0
    height: int = 0

    @property
    def signed_digest(self) -> bytes:
        return digest("NEWVIEW", self.view, self.height)
