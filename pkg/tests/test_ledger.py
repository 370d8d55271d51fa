import pytest

from prestige.crypto import Keyring, QCVerifier, aggregate_qc
from prestige.ledger import (
    Ledger, LedgerError, TxBlock, VcBlock, batch_digest, cmt_digest, ord_digest, quorum, revc_digest, vote_digest,
)

N = 4


@pytest.fixture
def keyring():
    return Keyring.generate(range(N), seed=5)


def _qc(keyring, msg, view, threshold, signers):
    return aggregate_qc({i: keyring.key(i).sign(msg) for i in signers}, msg, view, threshold, keyring)


def _tx_block(ledger, keyring, signers=(0, 1, 2), view=1):
    n = ledger.height + 1
    bd = batch_digest(())
    return TxBlock(n, view, _qc(keyring, ord_digest(n, view, bd), view, 3, signers),
                   _qc(keyring, cmt_digest(n, view, bd), view, 3, signers), (), ledger.latest_tx_block().block_digest)


def _vc_block(ledger, keyring, v, leader, rp, ci, rp_map=None):
    prev = ledger.head_vc_block()
    rps = dict(rp_map or prev.rp_map)
    cis = dict(prev.ci_map)
    rps[leader], cis[leader] = rp, ci
    return VcBlock(v, leader, _qc(keyring, revc_digest(prev.v), prev.v, 2, (1, 2)),
                   _qc(keyring, vote_digest(v, leader, rp, ci), v, 3, (0, 1, 2)), rps, cis, prev.block_digest)


def test_quorum_sizes():
    assert quorum(4) == (1, 3)
    assert quorum(16) == (5, 11)


def test_tx_chain_appends_in_order(keyring):
    ledger = Ledger(N, QCVerifier(keyring))
    b2 = _tx_block(ledger, keyring)
    ledger.append_tx_block(b2)
    assert ledger.height == 2
    with pytest.raises(LedgerError, match="duplicate"):
        ledger.append_tx_block(b2)


def test_tx_block_below_quorum_rejected(keyring):
    ledger = Ledger(N, QCVerifier(keyring))
    bd = batch_digest(())
    weak = _qc(keyring, cmt_digest(2, 1, bd), 1, 2, (0, 1))
    block = TxBlock(2, 1, _qc(keyring, ord_digest(2, 1, bd), 1, 3, (0, 1, 2)), weak, (),
                    ledger.latest_tx_block().block_digest)
    with pytest.raises(LedgerError, match="commit_QC"):
        ledger.append_tx_block(block)


def test_vc_block_updates_only_leader_entry(keyring):
    ledger = Ledger(N, QCVerifier(keyring))
    ledger.append_vc_block(_vc_block(ledger, keyring, 2, 1, 2, 1))
    assert ledger.reputation_of(1) == (2, 1)
    assert ledger.penalty_history(1) == [1, 2]
    tampered = _vc_block(ledger, keyring, 3, 2, 2, 1, rp_map={0: 1, 1: 1, 2: 1, 3: 1})
    with pytest.raises(LedgerError, match="tampered"):
        ledger.append_vc_block(tampered)


def test_vc_block_with_forged_vote_rejected(keyring):
    ledger = Ledger(N, QCVerifier(keyring))
    good = _vc_block(ledger, keyring, 2, 1, 2, 1)
    # the certificate signs rp=2; the block claims rp=1
    forged = VcBlock(2, 1, good.conf_qc, good.vc_qc, {**good.rp_map, 1: 1}, good.ci_map, good.prev_vc_ref)
    with pytest.raises(LedgerError, match="vc_QC"):
        ledger.append_vc_block(forged)


def test_stale_view_rejected(keyring):
    ledger = Ledger(N, QCVerifier(keyring))
    ledger.append_vc_block(_vc_block(ledger, keyring, 3, 1, 3, 1))
    with pytest.raises(LedgerError, match="stale"):
        ledger.append_vc_block(_vc_block(ledger, keyring, 3, 2, 2, 1))
