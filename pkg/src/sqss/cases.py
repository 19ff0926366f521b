"""Classical party actions and the four round cases they induce."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional


class ActionKind(str, enum.Enum):
    MEAS_RESEND = "MEAS-RESEND"
    REFLECT = "REFLECT"


class CaseClass(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"


@dataclass(frozen=True)
class PartyAction:
    kind: ActionKind
    bit: Optional[int] = None

    def __post_init__(self):
        if self.kind is ActionKind.REFLECT and self.bit is not None:
            raise ValueError("a reflected particle carries no bit")
        if self.kind is ActionKind.MEAS_RESEND and self.bit not in (0, 1):
            raise ValueError(f"MEAS-RESEND needs an observed bit, got {self.bit!r}")


_CASES = {
    (ActionKind.MEAS_RESEND, ActionKind.MEAS_RESEND): CaseClass.I,
    (ActionKind.MEAS_RESEND, ActionKind.REFLECT): CaseClass.II,
    (ActionKind.REFLECT, ActionKind.MEAS_RESEND): CaseClass.III,
    (ActionKind.REFLECT, ActionKind.REFLECT): CaseClass.IV,
}


def classify_case(bob, charlie) -> CaseClass:
    """Map (Bob, Charlie) actions or action kinds to the round case."""
    bob = bob.kind if isinstance(bob, PartyAction) else ActionKind(bob)
    charlie = charlie.kind if isinstance(charlie, PartyAction) else ActionKind(charlie)
    return _CASES[bob, charlie]
