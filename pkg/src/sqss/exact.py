"""Exact real amplitudes in Q(sqrt 2) for branch enumeration.

Every state reachable from the source pairs with Hadamard, CNOT and Z/X/Bell
projections has real amplitudes of the form ``a + b*sqrt2`` with rational
``a, b``. Branches are kept unnormalized, so a branch's squared norm is its
joint probability and no square roots of probabilities are ever taken.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .qstate import Basis, Qubit


@dataclass(frozen=True)
class Surd:
    """``rational + irrational * sqrt2``."""

    rational: Fraction = Fraction(0)
    irrational: Fraction = Fraction(0)

    def __add__(self, other: "Surd") -> "Surd":
        return Surd(self.rational + other.rational, self.irrational + other.irrational)

    def __sub__(self, other: "Surd") -> "Surd":
        return Surd(self.rational - other.rational, self.irrational - other.irrational)

    def __neg__(self) -> "Surd":
        return Surd(-self.rational, -self.irrational)

    def __mul__(self, other: "Surd") -> "Surd":
        a, b, c, d = self.rational, self.irrational, other.rational, other.irrational
        return Surd(a * c + 2 * b * d, a * d + b * c)

    def __bool__(self):
        return bool(self.rational) or bool(self.irrational)

    def to_fraction(self) -> Fraction:
        if self.irrational:
            raise ArithmeticError(f"{self} is irrational")
        return self.rational

    def __float__(self):
        return float(self.rational) + float(self.irrational) * 2 ** 0.5


ZERO = Surd()
ONE = Surd(Fraction(1))
HALF = Surd(Fraction(1, 2))
INV_SQRT2 = Surd(Fraction(0), Fraction(1, 2))


def surd(value) -> Surd:
    return value if isinstance(value, Surd) else Surd(Fraction(value))


_H = INV_SQRT2
EXACT_BASIS: dict[Basis, dict[str, tuple[Surd, ...]]] = {
    Basis.Z: {"0": (ONE, ZERO), "1": (ZERO, ONE)},
    Basis.X: {"+": (_H, _H), "-": (_H, -_H)},
    Basis.BELL: {
        "phi+": (_H, ZERO, ZERO, _H),
        "phi-": (_H, ZERO, ZERO, -_H),
        "psi+": (ZERO, _H, _H, ZERO),
        "psi-": (ZERO, _H, -_H, ZERO),
    },
}


def _bit(i: int, k: int, n: int) -> int:
    return (i >> (n - 1 - k)) & 1


@dataclass(frozen=True)
class ExactState:
    """Unnormalized real state; ``amps[i]`` is the amplitude of basis index ``i`` (first label MSB)."""

    labels: tuple[Qubit, ...]
    amps: tuple[Surd, ...]

    @classmethod
    def from_amplitudes(cls, labels: Iterable[Qubit], amps: Iterable) -> "ExactState":
        return cls(tuple(labels), tuple(surd(a) for a in amps))

    @property
    def n(self) -> int:
        return len(self.labels)

    def weight(self) -> Fraction:
        total = ZERO
        for a in self.amps:
            total = total + a * a
        return total.to_fraction()

    def append(self, q: Qubit) -> "ExactState":
        """Attach ``q`` in ``|0>`` as the least significant label."""
        amps = []
        for a in self.amps:
            amps += [a, ZERO]
        return ExactState(self.labels + (q,), tuple(amps))

    def hadamard(self, q: Qubit) -> "ExactState":
        k, n = self.labels.index(q), self.n
        mask = 1 << (n - 1 - k)
        amps = list(self.amps)
        for i in range(2 ** n):
            if not i & mask:
                a0, a1 = self.amps[i], self.amps[i | mask]
                amps[i], amps[i | mask] = _H * (a0 + a1), _H * (a0 - a1)
        return ExactState(self.labels, tuple(amps))

    def cnot(self, control: Qubit, target: Qubit) -> "ExactState":
        n = self.n
        cmask = 1 << (n - 1 - self.labels.index(control))
        tmask = 1 << (n - 1 - self.labels.index(target))
        return ExactState(
            self.labels, tuple(self.amps[i ^ tmask if i & cmask else i] for i in range(2 ** n))
        )

    def branches(self, basis: Basis, targets: tuple[Qubit, ...]) -> list[tuple[str, "ExactState"]]:
        """Unnormalized projections onto each basis vector; zero branches dropped."""
        n = self.n
        ks = [self.labels.index(q) for q in targets]

        def sub_index(i):
            j = 0
            for k in ks:
                j = (j << 1) | _bit(i, k, n)
            return j

        def with_sub(i, j):
            for pos, k in enumerate(ks):
                mask = 1 << (n - 1 - k)
                bit = (j >> (len(ks) - 1 - pos)) & 1
                i = (i | mask) if bit else (i & ~mask)
            return i

        out = []
        for result, vec in EXACT_BASIS[Basis(basis)].items():
            amps = []
            for i in range(2 ** n):
                overlap = ZERO
                for j in range(2 ** len(ks)):
                    if vec[j]:
                        overlap = overlap + vec[j] * self.amps[with_sub(i, j)]
                amps.append(vec[sub_index(i)] * overlap)
            if any(amps):
                out.append((result, ExactState(self.labels, tuple(amps))))
        return out


_HALF = Fraction(1, 2)
EXACT_SOURCES = {
    # (|+0> + |-1>)/sqrt2 and -(|+1> - |-0>)/sqrt2 expanded over |00>,|01>,|10>,|11>
    "Psi": (_HALF, _HALF, _HALF, -_HALF),
    "Phi": (_HALF, -_HALF, -_HALF, -_HALF),
}


def exact_source(which: str) -> ExactState:
    return ExactState.from_amplitudes((Qubit.B, Qubit.C), EXACT_SOURCES[which])
