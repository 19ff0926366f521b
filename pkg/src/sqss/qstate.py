"""Exact state-vector engine for up to three labeled qubits.

Amplitudes are indexed with the first label as the most significant bit, so a
state on ``(B, C, B')`` stores ``|bcb'>`` at index ``4*b + 2*c + b'``.
States are immutable: every operation returns a new :class:`StateVector`.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

NORM_TOL = 1e-12
_ZERO_PROB = 1e-14
_SQ = 1 / np.sqrt(2)


class Qubit(str, enum.Enum):
    B = "B"
    C = "C"
    BPRIME = "B'"


class Basis(str, enum.Enum):
    Z = "Z"
    X = "X"
    BELL = "Bell"

    @property
    def arity(self) -> int:
        return 2 if self is Basis.BELL else 1


# Measurement result label -> eigenvector over the target qubits (first target MSB).
BASIS_VECTORS: dict[Basis, dict[str, np.ndarray]] = {
    Basis.Z: {
        "0": np.array([1, 0], dtype=complex),
        "1": np.array([0, 1], dtype=complex),
    },
    Basis.X: {
        "+": np.array([_SQ, _SQ], dtype=complex),
        "-": np.array([_SQ, -_SQ], dtype=complex),
    },
    Basis.BELL: {
        "phi+": np.array([_SQ, 0, 0, _SQ], dtype=complex),
        "phi-": np.array([_SQ, 0, 0, -_SQ], dtype=complex),
        "psi+": np.array([0, _SQ, _SQ, 0], dtype=complex),
        "psi-": np.array([0, _SQ, -_SQ, 0], dtype=complex),
    },
}

_SINGLE = {
    "0": BASIS_VECTORS[Basis.Z]["0"],
    "1": BASIS_VECTORS[Basis.Z]["1"],
    "+": BASIS_VECTORS[Basis.X]["+"],
    "-": BASIS_VECTORS[Basis.X]["-"],
}

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * _SQ
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


class QStateError(ValueError):
    """Raised for invalid labels, arities or malformed amplitude vectors."""


@dataclass(frozen=True, eq=False)
class StateVector:
    labels: tuple[Qubit, ...]
    amps: np.ndarray

    def __post_init__(self):
        labels = tuple(Qubit(q) for q in self.labels)
        if not 1 <= len(labels) <= 3:
            raise QStateError(f"expected 1 to 3 qubits, got {len(labels)}")
        if len(set(labels)) != len(labels):
            raise QStateError(f"duplicate qubit labels {labels}")
        amps = np.array(self.amps, dtype=complex).reshape(-1)
        if amps.shape[0] != 2 ** len(labels):
            raise QStateError(
                f"{len(labels)} qubits need {2 ** len(labels)} amplitudes, got {amps.shape[0]}"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1) > NORM_TOL:
            raise QStateError(f"state is not normalized (norm^2 = {norm!r})")
        amps.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def _trusted(cls, labels: tuple[Qubit, ...], amps: np.ndarray) -> "StateVector":
        # internal results of unitary or renormalized ops; skips validation
        amps.flags.writeable = False
        obj = object.__new__(cls)
        object.__setattr__(obj, "labels", labels)
        object.__setattr__(obj, "amps", amps)
        return obj

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    def index(self, q: Qubit) -> int:
        try:
            return self.labels.index(_as_qubit(q))
        except ValueError:
            raise QStateError(f"qubit {q!r} not in state {self.labels}") from None

    def norm_squared(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def tensor(self) -> np.ndarray:
        return self.amps.reshape((2,) * self.n_qubits)

    def __repr__(self):
        names = ",".join(q.value for q in self.labels)
        return f"StateVector(({names}), {np.round(self.amps, 6).tolist()})"


@dataclass(frozen=True)
class Outcome:
    basis: Basis
    targets: tuple[Qubit, ...]
    result: str
    probability: float


def _from_tensor(labels, t: np.ndarray) -> StateVector:
    return StateVector._trusted(tuple(labels), np.ascontiguousarray(t).reshape(-1))


def ket(spec: str, labels: Sequence[Qubit] = (Qubit.B, Qubit.C)) -> StateVector:
    """Product state from characters in ``01+-``, one per label, e.g. ``ket("+0")``."""
    if len(spec) != len(labels):
        raise QStateError(f"ket {spec!r} does not match labels {tuple(labels)}")
    amps = np.array([1], dtype=complex)
    for ch in spec:
        try:
            amps = np.kron(amps, _SINGLE[ch])
        except KeyError:
            raise QStateError(f"unknown single-qubit state {ch!r}") from None
    return StateVector(tuple(labels), amps)


def bell(name: str, labels: Sequence[Qubit] = (Qubit.B, Qubit.C)) -> StateVector:
    return StateVector(tuple(labels), BASIS_VECTORS[Basis.BELL][name])


def superpose(terms: Sequence[tuple[complex, StateVector]]) -> StateVector:
    """Normalized linear combination of states sharing one label order."""
    labels = terms[0][1].labels
    amps = np.zeros(2 ** len(labels), dtype=complex)
    for coeff, s in terms:
        if s.labels != labels:
            raise QStateError("superposed states must share the same label order")
        amps = amps + coeff * s.amps
    return StateVector(labels, amps / np.linalg.norm(amps))


def make_source_state(which: str = "Psi") -> StateVector:
    """Two-particle source state on (B, C).

    ``Psi = (|+0> + |-1>)/sqrt2`` and ``Phi = -(|+1> - |-0>)/sqrt2``.
    """
    try:
        amps = _SOURCE_AMPS[which]
    except KeyError:
        raise QStateError(f"unknown source state {which!r}") from None
    return StateVector._trusted((Qubit.B, Qubit.C), amps.copy())


_SOURCE_AMPS = {
    "Psi": np.array([0.5, 0.5, 0.5, -0.5], dtype=complex),
    "Phi": -(_SQ * (ket("+1").amps - ket("-0").amps)),
}


def append_qubit(s: StateVector, q: Qubit, bit: int = 0) -> StateVector:
    """Attach a fresh qubit in ``|bit>`` as the new least significant label."""
    if Qubit(q) in s.labels:
        raise QStateError(f"qubit {q!r} already present")
    return StateVector(s.labels + (Qubit(q),), np.kron(s.amps, _SINGLE[str(bit)]))


def reorder(s: StateVector, labels: Sequence[Qubit]) -> StateVector:
    labels = tuple(Qubit(q) for q in labels)
    if sorted(labels) != sorted(s.labels):
        raise QStateError(f"label mismatch: {labels} vs {s.labels}")
    axes = [s.index(q) for q in labels]
    return _from_tensor(labels, np.transpose(s.tensor(), axes))


def apply_gate(s: StateVector, gate: np.ndarray, q: Qubit) -> StateVector:
    layout = _target_layout(s.n_qubits, (s.index(q),))
    amps = np.empty_like(s.amps)
    amps[layout] = gate @ s.amps[layout]
    return StateVector._trusted(s.labels, amps)


def apply_hadamard(s: StateVector, q: Qubit) -> StateVector:
    return apply_gate(s, HADAMARD, q)


def apply_x(s: StateVector, q: Qubit) -> StateVector:
    return apply_gate(s, PAULI_X, q)


@functools.lru_cache(maxsize=None)
def _cnot_permutation(n: int, kc: int, kt: int) -> np.ndarray:
    cbit, tbit = 1 << (n - 1 - kc), 1 << (n - 1 - kt)
    return np.array([i ^ tbit if i & cbit else i for i in range(2 ** n)])


def apply_cnot(s: StateVector, control: Qubit, target: Qubit) -> StateVector:
    kc, kt = s.index(control), s.index(target)
    if kc == kt:
        raise QStateError("CNOT control and target must differ")
    return StateVector._trusted(s.labels, s.amps[_cnot_permutation(s.n_qubits, kc, kt)])


def _as_qubit(q) -> Qubit:
    return q if isinstance(q, Qubit) else Qubit(q)


def _check_targets(s: StateVector, basis: Basis, targets) -> tuple[Qubit, ...]:
    if isinstance(targets, (Qubit, str)):
        targets = (targets,)
    targets = tuple(_as_qubit(q) for q in targets)
    if len(targets) != basis.arity:
        raise QStateError(f"{basis.value} measurement addresses {basis.arity} qubit(s), got {len(targets)}")
    if len(set(targets)) != len(targets):
        raise QStateError("measurement targets must be distinct")
    for q in targets:
        s.index(q)
    return targets


@functools.lru_cache(maxsize=None)
def _target_layout(n: int, axes: tuple[int, ...]) -> np.ndarray:
    """Flat indices arranged as (target bits, remaining bits), targets in the given order."""
    idx = np.arange(2 ** n).reshape((2,) * n)
    rest = [a for a in range(n) if a not in axes]
    return np.transpose(idx, list(axes) + rest).reshape(2 ** len(axes), -1)


# Per basis: result labels and the conjugated eigenvectors stacked as rows.
_PROJECTORS = {
    basis: (tuple(vecs), np.array([v.conj() for v in vecs.values()]))
    for basis, vecs in BASIS_VECTORS.items()
}


def _branches(s: StateVector, basis: Basis, targets):
    """Nonzero branches as (result, eigenvector, unnormalized remainder, probability)."""
    axes = tuple(s.labels.index(q) for q in targets)
    layout = _target_layout(len(s.labels), axes)
    names, rows = _PROJECTORS[basis]
    rests = rows @ s.amps[layout]
    probs = np.einsum("ij,ij->i", rests.conj(), rests).real
    vecs = BASIS_VECTORS[basis]
    out = [
        (names[i], vecs[names[i]], rests[i], float(probs[i]))
        for i in range(len(names)) if probs[i] >= _ZERO_PROB
    ]
    return out, layout


def _collapse(s: StateVector, layout: np.ndarray, vec: np.ndarray, rest: np.ndarray, prob: float) -> StateVector:
    amps = np.empty(len(s.amps), dtype=complex)
    amps[layout] = vec[:, None] * (rest / np.sqrt(prob))
    return StateVector._trusted(s.labels, amps)


def outcome_distribution(s: StateVector, basis: Basis, targets) -> list[tuple[str, float, StateVector]]:
    """Every nonzero-probability result with its Born probability and collapsed state.

    Only the targets collapse; the other qubits keep their conditional state.
    """
    basis = Basis(basis)
    targets = _check_targets(s, basis, targets)
    branches, layout = _branches(s, basis, targets)
    return [(r, p, _collapse(s, layout, v, rest, p)) for r, v, rest, p in branches]


def measure(s: StateVector, basis: Basis, targets, rand: np.random.Generator) -> tuple[Outcome, StateVector]:
    """Sample one result of ``outcome_distribution`` and return it with the collapsed state."""
    basis = Basis(basis)
    targets = _check_targets(s, basis, targets)
    branches, layout = _branches(s, basis, targets)
    u = rand.random() * sum(b[3] for b in branches)
    acc = 0.0
    for result, vec, rest, prob in branches:
        acc += prob
        if u < acc:
            break
    return Outcome(basis, targets, result, prob), _collapse(s, layout, vec, rest, prob)


def fidelity(a: StateVector, b: StateVector) -> float:
    """``|<a|b>|^2``; label order may differ but the label sets must match."""
    if set(a.labels) != set(b.labels):
        raise QStateError(f"label mismatch: {a.labels} vs {b.labels}")
    if a.labels != b.labels:
        b = reorder(b, a.labels)
    return float(min(1.0, abs(np.vdot(a.amps, b.amps)) ** 2))
