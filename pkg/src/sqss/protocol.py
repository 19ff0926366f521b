"""Round engine for two-particle semiquantum secret sharing.

Alice sends particle B of each source pair to Bob and particle C to Charlie.
Each receiver either measures in Z and resends (MEAS-RESEND) or reflects the
particle. After both publish their choices Alice runs the case-dependent
check of that round, and case-I rounds carry the key: Alice's bit is the XOR
of the two receivers' bits.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .adversary import (
    AttackerKnowledge,
    AttackKind,
    AttackStrategy,
    apply_attack,
    infer_charlie_bit,
    measure_ancilla,
)
from .cases import ActionKind, CaseClass, PartyAction, classify_case
from .qstate import (
    Basis,
    Outcome,
    Qubit,
    StateVector,
    apply_hadamard,
    apply_x,
    make_source_state,
    measure,
)

__all__ = [
    "ActionKind",
    "CaseClass",
    "PartyAction",
    "classify_case",
    "Source",
    "Variant",
    "Verdict",
    "ProtocolConfig",
    "RoundRecord",
    "ProtocolResult",
    "Permutation",
    "ClassicalParty",
    "ProtocolAbort",
    "CONSISTENT_RESULTS",
    "ALICE_OPERATIONS",
    "choose_action",
    "sift_key_bit",
    "run_round",
    "run_protocol",
    "apply_reorder_variant",
    "round_stream",
]


class Source(str, enum.Enum):
    PSI = "Psi"
    PHI = "Phi"


class Variant(str, enum.Enum):
    BASIC = "Basic"
    REORDER = "Reorder"


class Verdict(str, enum.Enum):
    CONSISTENT = "Consistent"
    INCONSISTENT = "Inconsistent"
    KEY_CANDIDATE = "KeyCandidate"


class ProtocolAbort(RuntimeError):
    pass


# Alice's measurement per case: (basis, targets) pairs, run in order. Case IV
# is preceded by a Hadamard on B.
ALICE_OPERATIONS: dict[CaseClass, tuple[tuple[Basis, tuple[Qubit, ...]], ...]] = {
    CaseClass.I: ((Basis.Z, (Qubit.B,)), (Basis.Z, (Qubit.C,))),
    CaseClass.II: ((Basis.Z, (Qubit.B,)), (Basis.X, (Qubit.C,))),
    CaseClass.III: ((Basis.X, (Qubit.B,)), (Basis.Z, (Qubit.C,))),
    CaseClass.IV: ((Basis.BELL, (Qubit.B, Qubit.C)),),
}

# Results an undisturbed source can produce under Alice's case II-IV checks.
# The Phi rows follow from Phi = (|0-> - |1+>)/sqrt2 = -(|+1> - |-0>)/sqrt2,
# which H on B maps to -psi-. tests/test_protocol.py rederives both tables.
CONSISTENT_RESULTS: dict[Source, dict[CaseClass, frozenset[tuple[str, ...]]]] = {
    Source.PSI: {
        CaseClass.II: frozenset({("0", "+"), ("1", "-")}),
        CaseClass.III: frozenset({("+", "0"), ("-", "1")}),
        CaseClass.IV: frozenset({("phi+",)}),
    },
    Source.PHI: {
        CaseClass.II: frozenset({("0", "-"), ("1", "+")}),
        CaseClass.III: frozenset({("+", "1"), ("-", "0")}),
        CaseClass.IV: frozenset({("psi-",)}),
    },
}

# Substream tags: per-round randomness vs. each party's private stream.
_ROUND, _ALICE, _BOB, _CHARLIE = 0, 1, 2, 3


def round_stream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, _ROUND, index])


def _party_stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([seed, tag])


@dataclass(frozen=True)
class ProtocolConfig:
    n_rounds: int
    seed: int
    source: Source = Source.PSI
    variant: Variant = Variant.BASIC
    check_fraction: float = 0.5
    error_threshold: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "source", Source(self.source))
        object.__setattr__(self, "variant", Variant(self.variant))
        if not isinstance(self.n_rounds, (int, np.integer)) or self.n_rounds < 1:
            raise ValueError(f"n_rounds must be a positive integer, got {self.n_rounds!r}")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not 0 < self.check_fraction < 1:
            raise ValueError(f"check_fraction must lie in (0, 1), got {self.check_fraction!r}")
        if not 0 <= self.error_threshold <= 1:
            raise ValueError(f"error_threshold must lie in [0, 1], got {self.error_threshold!r}")


@dataclass
class RoundRecord:
    index: int
    bob: PartyAction
    charlie: PartyAction
    case: CaseClass
    alice_outcomes: list[Outcome]
    verdict: Verdict
    key_bit_alice: Optional[int] = None
    attack_transcript: Optional[AttackerKnowledge] = None

    @property
    def alice_results(self) -> tuple[str, ...]:
        return tuple(o.result for o in self.alice_outcomes)

    @property
    def case_one_disagrees(self) -> bool:
        """Alice's two Z readings differ from the published bits in either coordinate."""
        b, c = (int(r) for r in self.alice_results)
        return (b, c) != (self.bob.bit, self.charlie.bit)

    def to_dict(self) -> dict:
        t = self.attack_transcript
        return {
            "index": self.index,
            "bob": self.bob.kind.value,
            "bob_bit": self.bob.bit,
            "charlie": self.charlie.kind.value,
            "charlie_bit": self.charlie.bit,
            "case": self.case.value,
            "alice_results": list(self.alice_results),
            "verdict": self.verdict.value,
            "key_bit_alice": self.key_bit_alice,
            "attack": None if t is None else {
                "measured": dict(sorted(t.measured.items())),
                "inferred_charlie_bit": t.inferred_charlie_bit,
                "confidence": t.confidence,
            },
        }


@dataclass(frozen=True)
class PartyView:
    """The part of a run one party may hold: their own bit string and nothing else."""

    party: str
    bits: str


@dataclass
class ProtocolResult:
    config: ProtocolConfig
    attack: AttackStrategy
    rounds: list[RoundRecord]
    case_trials: dict[CaseClass, int]
    rate_trials: dict[CaseClass, int]
    case_errors: dict[CaseClass, int]
    case_error_rates: dict[CaseClass, Optional[float]]
    aborted: bool
    abort_reason: Optional[str]
    abort_cases: list[CaseClass] = field(default_factory=list)
    check_indices: list[int] = field(default_factory=list)
    key_indices: list[int] = field(default_factory=list)
    final_key_alice: str = ""
    share_bob: str = ""
    share_charlie: str = ""

    @property
    def key_length(self) -> int:
        return len(self.final_key_alice)

    @property
    def key_xor_consistent(self) -> bool:
        return all(
            int(a) == int(b) ^ int(c)
            for a, b, c in zip(self.final_key_alice, self.share_bob, self.share_charlie)
        )

    def alice_view(self) -> PartyView:
        return PartyView("Alice", self.final_key_alice)

    def bob_view(self) -> PartyView:
        return PartyView("Bob", self.share_bob)

    def charlie_view(self) -> PartyView:
        return PartyView("Charlie", self.share_charlie)

    def to_dict(self, include_rounds: bool = False) -> dict:
        out = {
            "n_rounds": self.config.n_rounds,
            "seed": self.config.seed,
            "source": self.config.source.value,
            "variant": self.config.variant.value,
            "attack": self.attack.name,
            "case_trials": {c.value: self.case_trials[c] for c in CaseClass},
            "rate_trials": {c.value: self.rate_trials[c] for c in CaseClass},
            "case_errors": {c.value: self.case_errors[c] for c in CaseClass},
            "case_error_rates": {c.value: self.case_error_rates[c] for c in CaseClass},
            "aborted": self.aborted,
            "abort_reason": self.abort_reason,
            "check_indices": self.check_indices,
            "key_indices": self.key_indices,
            "final_key_alice": self.final_key_alice,
            "share_bob": self.share_bob,
            "share_charlie": self.share_charlie,
        }
        if include_rounds:
            out["rounds"] = [r.to_dict() for r in self.rounds]
        return out


@dataclass(frozen=True)
class Permutation:
    """Send order of one receiver's return sequence: slot ``j`` carries round ``mapping[j]``."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        mapping = tuple(int(i) for i in self.mapping)
        if not self.is_bijection(mapping):
            raise ValueError("permutation must be a bijection on 0..n-1")
        object.__setattr__(self, "mapping", mapping)

    @staticmethod
    def is_bijection(mapping: Sequence[int]) -> bool:
        try:
            return sorted(int(i) for i in mapping) == list(range(len(mapping)))
        except (TypeError, ValueError):
            return False

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def random(cls, n: int, rand: np.random.Generator) -> "Permutation":
        return cls(tuple(rand.permutation(n).tolist()))

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.mapping)
        for slot, i in enumerate(self.mapping):
            inv[i] = slot
        return Permutation(tuple(inv))

    def compose(self, other: "Permutation") -> "Permutation":
        """``(self o other)[j] = self[other[j]]``."""
        return Permutation(tuple(self.mapping[j] for j in other.mapping))

    def __len__(self):
        return len(self.mapping)


class ClassicalParty:
    """A receiver limited to Z measurement, Z preparation and reflection of its own particle."""

    def __init__(self, name: str, particle: Qubit):
        self.name = name
        self.particle = Qubit(particle)

    def meas_resend(self, state: StateVector, rand: np.random.Generator) -> tuple[PartyAction, StateVector]:
        out, state = measure(state, Basis.Z, self.particle, rand)
        return PartyAction(ActionKind.MEAS_RESEND, int(out.result)), state

    def reflect(self, state: StateVector) -> tuple[PartyAction, StateVector]:
        return PartyAction(ActionKind.REFLECT), state

    def prepare_resend(self, state: StateVector, bit: int, rand: np.random.Generator) -> StateVector:
        # Discarding the arrival is a Z measurement with the result thrown away.
        out, state = measure(state, Basis.Z, self.particle, rand)
        if int(out.result) != bit:
            state = apply_x(state, self.particle)
        return state

    def act(self, kind: ActionKind, state: StateVector, rand: np.random.Generator):
        if kind is ActionKind.MEAS_RESEND:
            return self.meas_resend(state, rand)
        return self.reflect(state)


BOB = ClassicalParty("Bob", Qubit.B)
CHARLIE = ClassicalParty("Charlie", Qubit.C)


def choose_action(rand: np.random.Generator) -> ActionKind:
    return ActionKind.MEAS_RESEND if rand.random() < 0.5 else ActionKind.REFLECT


def sift_key_bit(bob_bit: int, charlie_bit: int) -> int:
    return int(bob_bit) ^ int(charlie_bit)


@dataclass
class _InFlight:
    """A round after the quantum transmission, held by Alice until publication."""

    index: int
    state: StateVector
    bob: PartyAction
    charlie: PartyAction
    knowledge: Optional[AttackerKnowledge]
    rand: np.random.Generator


def _transmit(
    cfg: ProtocolConfig, attack: AttackStrategy, rand: np.random.Generator, index: int
) -> _InFlight:
    bob_kind = choose_action(rand)
    charlie_kind = choose_action(rand)
    state = make_source_state(cfg.source.value)
    knowledge = None
    if attack.kind is not AttackKind.NO_ATTACK:
        state, knowledge = apply_attack(attack, state, rand)
    bob, state = BOB.act(bob_kind, state, rand)
    charlie, state = CHARLIE.act(charlie_kind, state, rand)
    return _InFlight(index, state, bob, charlie, knowledge, rand)


def _alice_verify(cfg: ProtocolConfig, attack: AttackStrategy, flight: _InFlight) -> RoundRecord:
    case = classify_case(flight.bob, flight.charlie)
    rand = flight.rand
    state = flight.state
    knowledge = flight.knowledge

    if knowledge is not None and case is CaseClass.I:
        if attack.kind is AttackKind.CNOT_ENTANGLE:
            knowledge, state = measure_ancilla(knowledge, state, rand)
        guess = infer_charlie_bit(attack, knowledge, flight.bob.bit, case)
        knowledge = knowledge.with_inference(*(guess or (None, None)))

    if case is CaseClass.IV:
        state = apply_hadamard(state, Qubit.B)
    outcomes = []
    for basis, targets in ALICE_OPERATIONS[case]:
        out, state = measure(state, basis, targets, rand)
        outcomes.append(out)
    results = tuple(o.result for o in outcomes)

    key_bit = None
    if case is CaseClass.I:
        verdict = Verdict.KEY_CANDIDATE
        key_bit = sift_key_bit(int(results[0]), int(results[1]))
    elif results in CONSISTENT_RESULTS[cfg.source][case]:
        verdict = Verdict.CONSISTENT
    else:
        verdict = Verdict.INCONSISTENT
    return RoundRecord(
        flight.index, flight.bob, flight.charlie, case, outcomes, verdict, key_bit, knowledge
    )


def run_round(
    cfg: ProtocolConfig,
    attack: AttackStrategy,
    rand: np.random.Generator,
    index: int = 0,
) -> RoundRecord:
    """One full round: source, interception, receiver actions, Alice's case check."""
    return _alice_verify(cfg, attack, _transmit(cfg, attack, rand, index))


@dataclass
class ReorderedTransmission:
    """Return sequences as they reach Alice: each slot holds a (round, particle) handle."""

    b_sequence: list[tuple[int, Qubit]]
    c_sequence: list[tuple[int, Qubit]]

    def reassemble(self, published_bob: Sequence[int], published_charlie: Sequence[int]) -> list[int]:
        """Undo both published orders and return, per round, the re-paired round index."""
        n = len(self.b_sequence)
        for who, perm in (("Bob", published_bob), ("Charlie", published_charlie)):
            if len(perm) != n or not Permutation.is_bijection(perm):
                raise ProtocolAbort(f"{who} published an order that is not a bijection")
        b_slot = Permutation(tuple(published_bob)).inverse().mapping
        c_slot = Permutation(tuple(published_charlie)).inverse().mapping
        pairs = []
        for i in range(n):
            rb, _ = self.b_sequence[b_slot[i]]
            rc, _ = self.c_sequence[c_slot[i]]
            if rb != i or rc != i:
                raise ProtocolAbort(f"published orders do not re-pair round {i}")
            pairs.append(i)
        return pairs


def apply_reorder_variant(
    in_flight: Sequence, bob_perm: Permutation, charlie_perm: Permutation
) -> ReorderedTransmission:
    n = len(in_flight)
    if len(bob_perm) != n or len(charlie_perm) != n:
        raise ValueError("permutation length must match the number of rounds")
    return ReorderedTransmission(
        b_sequence=[(in_flight[i].index, Qubit.B) for i in bob_perm.mapping],
        c_sequence=[(in_flight[i].index, Qubit.C) for i in charlie_perm.mapping],
    )


def _check_size(fraction: float, n: int) -> int:
    return math.ceil(round(fraction * n, 9))


def run_protocol(
    cfg: ProtocolConfig,
    attack: Optional[AttackStrategy] = None,
    *,
    permutations: Optional[tuple[Permutation, Permutation]] = None,
) -> ProtocolResult:
    attack = attack or AttackStrategy.none()
    flights = [_transmit(cfg, attack, round_stream(cfg.seed, i), i) for i in range(cfg.n_rounds)]

    if cfg.variant is Variant.REORDER:
        if permutations is None:
            permutations = (
                Permutation.random(cfg.n_rounds, _party_stream(cfg.seed, _BOB)),
                Permutation.random(cfg.n_rounds, _party_stream(cfg.seed, _CHARLIE)),
            )
        bob_perm, charlie_perm = permutations
        transmission = apply_reorder_variant(flights, bob_perm, charlie_perm)
        try:
            order = transmission.reassemble(bob_perm.mapping, charlie_perm.mapping)
        except ProtocolAbort as exc:
            return _aborted_empty(cfg, attack, str(exc))
        flights = [flights[i] for i in order]
    elif permutations is not None:
        raise ValueError("permutations only apply to the Reorder variant")

    records = [_alice_verify(cfg, attack, f) for f in flights]
    return _evaluate(cfg, attack, records)


def _aborted_empty(cfg, attack, reason) -> ProtocolResult:
    zeros = {c: 0 for c in CaseClass}
    return ProtocolResult(
        cfg, attack, [], dict(zeros), dict(zeros), dict(zeros), {c: None for c in CaseClass},
        True, reason,
    )


def _evaluate(cfg: ProtocolConfig, attack: AttackStrategy, records: list[RoundRecord]) -> ProtocolResult:
    trials = {c: 0 for c in CaseClass}
    errors = {c: 0 for c in CaseClass}
    case_one = []
    for r in records:
        trials[r.case] += 1
        if r.case is CaseClass.I:
            case_one.append(r)
        elif r.verdict is Verdict.INCONSISTENT:
            errors[r.case] += 1

    # Step 6 sample: Alice picks the check subset from her own stream.
    n_check = _check_size(cfg.check_fraction, len(case_one))
    picks = _party_stream(cfg.seed, _ALICE).choice(len(case_one), size=n_check, replace=False)
    check = sorted(int(case_one[k].index) for k in picks)
    checked = set(check)
    errors[CaseClass.I] = sum(1 for r in case_one if r.index in checked and r.case_one_disagrees)
    trials_for_rate = dict(trials)
    trials_for_rate[CaseClass.I] = n_check

    rates = {
        c: (errors[c] / trials_for_rate[c] if trials_for_rate[c] else None) for c in CaseClass
    }
    offending = [
        c for c in (CaseClass.II, CaseClass.III, CaseClass.IV, CaseClass.I)
        if rates[c] is not None and rates[c] > cfg.error_threshold
    ]
    key_rounds = [r for r in case_one if r.index not in checked]

    result = ProtocolResult(
        cfg, attack, records, trials, trials_for_rate, errors, rates,
        aborted=False, abort_reason=None, check_indices=check,
    )
    if offending:
        result.aborted = True
        result.abort_cases = offending
        result.abort_reason = "; ".join(
            f"case {c.value} error rate {rates[c]:.6f} exceeds threshold {cfg.error_threshold}"
            for c in offending
        )
    elif not key_rounds:
        result.aborted = True
        result.abort_reason = "degenerate run: no case-I rounds remain after the check subset"
    else:
        result.key_indices = [r.index for r in key_rounds]
        result.final_key_alice = "".join(str(r.key_bit_alice) for r in key_rounds)
        result.share_bob = "".join(str(r.bob.bit) for r in key_rounds)
        result.share_charlie = "".join(str(r.charlie.bit) for r in key_rounds)
    return result
