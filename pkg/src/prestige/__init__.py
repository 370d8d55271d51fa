"""Reputation-priced active view change for BFT state machine replication.

The package is a deterministic simulator: reputation arithmetic, block
ledgers, signatures and quorum certificates, the server state machines and
a discrete-event harness that runs them under fault injection.
"""

from .reputation import calc_rp, calc_rp_breakdown, compensate, delta_tx, delta_vc, penalize

__all__ = ["calc_rp", "calc_rp_breakdown", "compensate", "delta_tx", "delta_vc", "penalize"]
__version__ = "0.1.0"
