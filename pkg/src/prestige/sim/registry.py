"""Global observer of what correct servers commit and which vcBlocks exist.

Servers report into the registry; audits and metrics read from it. It never
influences protocol decisions.
"""

from __future__ import annotations

from ..ledger import TxBlock, VcBlock, genesis_tx_block, genesis_vc_block


class Registry:
    def __init__(self, sim, n: int, correct_ids, genesis_leader: int = 0):
        self.sim = sim
        self.correct_ids = frozenset(correct_ids)
        g_vc = genesis_vc_block(range(n), genesis_leader)
        g_tx = genesis_tx_block()
        self.vc_blocks: dict[bytes, VcBlock] = {g_vc.block_digest: g_vc}
        self.tx_blocks: dict[bytes, TxBlock] = {g_tx.block_digest: g_tx}
        self.commits: list[tuple[float, int, int, bytes]] = []
        self.first_commit: dict[bytes, float] = {}

    def record_commit(self, server, block: TxBlock) -> None:
        if server.id not in self.correct_ids:
            return
        d = block.block_digest
        now = self.sim.now
        self.commits.append((now, server.id, block.n, d))
        if d not in self.tx_blocks:
            self.tx_blocks[d] = block
            self.sim.emit("txblock", n=block.n, v=block.v, digest=d.hex(), txs=[list(t.key) for t in block.txs])
        self.first_commit.setdefault(d, now)
        self.sim.emit("commit", server=server.id, n=block.n, digest=d.hex())

    def record_vc_block(self, block: VcBlock) -> None:
        self.vc_blocks.setdefault(block.block_digest, block)
