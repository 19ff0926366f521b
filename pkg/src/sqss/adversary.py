"""Dishonest-receiver (Bob*) attack strategies.

Bob* legitimately holds particle B and intercepts particle C after Alice sends
it and before Charlie receives it. Every strategy acts once per round on the
fresh (B, C) pair.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .cases import CaseClass
from .qstate import (
    Basis,
    Qubit,
    StateVector,
    append_qubit,
    apply_cnot,
    measure,
)


class AttackKind(str, enum.Enum):
    NO_ATTACK = "none"
    MEASURE_BOTH = "measure"
    BELL_MEASURE = "bell"
    CNOT_ENTANGLE = "cnot"


class AttackError(ValueError):
    pass


@dataclass(frozen=True)
class AttackStrategy:
    kind: AttackKind = AttackKind.NO_ATTACK
    basis_b: Optional[Basis] = None
    basis_c: Optional[Basis] = None

    def __post_init__(self):
        if self.kind is AttackKind.MEASURE_BOTH:
            for b in (self.basis_b, self.basis_c):
                if b not in (Basis.Z, Basis.X):
                    raise AttackError(f"MeasureBoth takes Z or X bases, got {b!r}")
        elif self.basis_b is not None or self.basis_c is not None:
            raise AttackError(f"{self.kind.value} attack takes no bases")

    @classmethod
    def none(cls) -> "AttackStrategy":
        return cls(AttackKind.NO_ATTACK)

    @classmethod
    def measure_both(cls, basis_b: Basis, basis_c: Basis) -> "AttackStrategy":
        return cls(AttackKind.MEASURE_BOTH, Basis(basis_b), Basis(basis_c))

    @classmethod
    def bell(cls) -> "AttackStrategy":
        return cls(AttackKind.BELL_MEASURE)

    @classmethod
    def cnot(cls) -> "AttackStrategy":
        return cls(AttackKind.CNOT_ENTANGLE)

    @property
    def name(self) -> str:
        if self.kind is AttackKind.MEASURE_BOTH:
            return (self.basis_b.value + self.basis_c.value).lower()
        return self.kind.value

    @classmethod
    def from_name(cls, name: str) -> "AttackStrategy":
        try:
            return STRATEGIES[name.lower()]
        except KeyError:
            raise AttackError(f"unknown attack {name!r}; choose from {sorted(STRATEGIES)}") from None

    @property
    def measures_c_in_x(self) -> bool:
        return self.kind is AttackKind.MEASURE_BOTH and self.basis_c is Basis.X

    def __str__(self):
        return self.name


STRATEGIES: dict[str, AttackStrategy] = {
    "none": AttackStrategy.none(),
    "zz": AttackStrategy.measure_both(Basis.Z, Basis.Z),
    "xz": AttackStrategy.measure_both(Basis.X, Basis.Z),
    "zx": AttackStrategy.measure_both(Basis.Z, Basis.X),
    "xx": AttackStrategy.measure_both(Basis.X, Basis.X),
    "bell": AttackStrategy.bell(),
    "cnot": AttackStrategy.cnot(),
}


@dataclass(frozen=True)
class AttackerKnowledge:
    """What Bob* saw. ``measured`` maps a target tag ("B", "C", "BC", "B'") to a result label."""

    measured: dict[str, str] = field(default_factory=dict)
    inferred_charlie_bit: Optional[int] = None
    confidence: Optional[float] = None

    def with_result(self, tag: str, result: str) -> "AttackerKnowledge":
        return replace(self, measured={**self.measured, tag: result})

    def with_inference(self, bit: Optional[int], confidence: Optional[float]) -> "AttackerKnowledge":
        return replace(self, inferred_charlie_bit=bit, confidence=confidence)


def apply_attack(
    strategy: AttackStrategy, joint_state: StateVector, rand: np.random.Generator
) -> tuple[StateVector, AttackerKnowledge]:
    if joint_state.labels != (Qubit.B, Qubit.C):
        raise AttackError(f"attacks act on a fresh (B, C) pair, got labels {joint_state.labels}")
    knowledge = AttackerKnowledge()
    s = joint_state
    if strategy.kind is AttackKind.MEASURE_BOTH:
        out_b, s = measure(s, strategy.basis_b, Qubit.B, rand)
        out_c, s = measure(s, strategy.basis_c, Qubit.C, rand)
        knowledge = knowledge.with_result("B", out_b.result).with_result("C", out_c.result)
    elif strategy.kind is AttackKind.BELL_MEASURE:
        out, s = measure(s, Basis.BELL, (Qubit.B, Qubit.C), rand)
        knowledge = knowledge.with_result("BC", out.result)
    elif strategy.kind is AttackKind.CNOT_ENTANGLE:
        s = apply_cnot(append_qubit(s, Qubit.BPRIME, 0), Qubit.C, Qubit.BPRIME)
    return s, knowledge


def measure_ancilla(
    knowledge: AttackerKnowledge, state: StateVector, rand: np.random.Generator
) -> tuple[AttackerKnowledge, StateVector]:
    """Bob* reads his ancilla in Z once both receivers have published their actions."""
    out, state = measure(state, Basis.Z, Qubit.BPRIME, rand)
    return knowledge.with_result("B'", out.result), state


def infer_charlie_bit(
    strategy: AttackStrategy,
    knowledge: AttackerKnowledge,
    bob_case_I_bit: int,
    case: CaseClass = CaseClass.I,
) -> Optional[tuple[int, float]]:
    """Bob*'s best guess of Charlie's case-I bit, with its confidence.

    Returns None when the attack yields nothing to guess from.
    """
    if CaseClass(case) is not CaseClass.I:
        raise AttackError(f"Charlie's bit is only inferred in case I, not case {CaseClass(case).value}")
    kind = strategy.kind
    if kind is AttackKind.NO_ATTACK:
        return None
    if kind is AttackKind.MEASURE_BOTH:
        c = knowledge.measured["C"]
        if strategy.basis_c is Basis.Z:
            return int(c), 1.0
        # an X result carries no information about Charlie's Z outcome
        return (0 if c == "+" else 1), 0.5
    if kind is AttackKind.BELL_MEASURE:
        # phi states correlate the Z values of B and C, psi states anti-correlate them
        same = knowledge.measured["BC"].startswith("phi")
        return (bob_case_I_bit if same else 1 - bob_case_I_bit), 1.0
    if "B'" not in knowledge.measured:
        raise AttackError("CNOT inference needs the ancilla measured first")
    return int(knowledge.measured["B'"]), 1.0
