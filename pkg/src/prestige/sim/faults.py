"""Byzantine behaviours attached to faulty servers.

A behaviour is a ``FaultProfile``: flags the server state machine consults
at decision points plus an outbound filter applied to every message the
server sends. Keeping the filter outside the state machine means correct
and faulty servers run the same protocol code.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .. import messages as m


class FaultStrategy(str, Enum):
    NONE = "none"
    F1 = "F1"          # copy a correct server's timeout draws
    F2 = "F2"          # quiet
    F3 = "F3"          # equivocate: sign corrupted digests
    F4_F2 = "F4+F2"    # repeated view-change attack, quiet otherwise
    F4_F3 = "F4+F3"    # repeated view-change attack, equivocating otherwise


class AttackPolicy(str, Enum):
    S1 = "S1"  # campaign at every opportunity
    S2 = "S2"  # campaign only when the win would be compensated


# responses whose signatures an equivocating server corrupts
EQUIVOCATED = (m.OrdReply, m.CmtReply, m.Notif, m.ReVC, m.VoteCP, m.VcYes, m.Ord, m.Cmt,
               m.Timeout, m.NewView)
# messages a quiet attacker still sends to correct servers: the attack itself
ATTACK_TRAFFIC = (m.ConfVC, m.Camp, m.NewVcBlock, m.SyncResp)


def flip_byte(data: bytes, index: int = 0) -> bytes:
    b = bytearray(data)
    b[index % len(b)] ^= 0xFF
    return bytes(b)


@dataclass
class Collusion:
    """Shared state of colluding faulty servers.

    One member per view is designated attacker (first claim wins); the
    others endorse and vote for it and contribute their hash power.
    """

    members: frozenset
    gamma: float
    policy: AttackPolicy = AttackPolicy.S1
    claims: dict = field(default_factory=dict)

    @property
    def budget(self) -> float:
        return self.gamma * len(self.members)

    @property
    def workers(self) -> int:
        return len(self.members)

    def claim(self, view: int, server_id: int) -> bool:
        return self.claims.setdefault(view, server_id) == server_id

    def attacker_for(self, view: int) -> int | None:
        return self.claims.get(view)


@dataclass
class FaultProfile:
    strategy: FaultStrategy = FaultStrategy.NONE
    mimic_victim: int | None = None
    collusion: Collusion | None = None

    @property
    def faulty(self) -> bool:
        return self.strategy is not FaultStrategy.NONE

    @property
    def quiet(self) -> bool:
        return self.strategy in (FaultStrategy.F2, FaultStrategy.F4_F2)

    @property
    def equivocates(self) -> bool:
        return self.strategy in (FaultStrategy.F3, FaultStrategy.F4_F3)

    @property
    def attacker(self) -> bool:
        return self.strategy in (FaultStrategy.F4_F2, FaultStrategy.F4_F3)

    @property
    def policy(self) -> AttackPolicy:
        return self.collusion.policy if self.collusion else AttackPolicy.S1

    def is_colluder(self, server_id: int) -> bool:
        return self.collusion is not None and server_id in self.collusion.members

    def outbound(self, dst: int, msg, sign: Callable[[bytes], bytes]):
        """Return the message actually put on the wire, or ``None`` to drop it."""
        if not self.faulty or self.is_colluder(dst):
            return msg
        if self.quiet:
            if self.attacker and isinstance(msg, ATTACK_TRAFFIC):
                return msg
            return None
        if self.equivocates and isinstance(msg, EQUIVOCATED):
            return dataclasses.replace(msg, sig=sign(flip_byte(msg.signed_digest)))
        return msg


CORRECT = FaultProfile()
