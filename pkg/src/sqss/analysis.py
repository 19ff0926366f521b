"""Per-case detection rates: exact branch enumeration and Monte-Carlo estimates.

The exact path walks every branch of attack collapse, receiver measurement and
Alice's case operation with rational arithmetic (see :mod:`sqss.exact`); it
shares no state-vector code with the sampling path in :mod:`sqss.protocol`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .adversary import (
    STRATEGIES,
    AttackerKnowledge,
    AttackKind,
    AttackStrategy,
    infer_charlie_bit,
)
from .cases import ActionKind, CaseClass, PartyAction
from .exact import ExactState, exact_source
from .protocol import (
    ALICE_OPERATIONS,
    CONSISTENT_RESULTS,
    ProtocolConfig,
    ProtocolResult,
    Source,
    run_protocol,
)
from .qstate import Basis, Qubit

CASE_ACTIONS = {
    CaseClass.I: (ActionKind.MEAS_RESEND, ActionKind.MEAS_RESEND),
    CaseClass.II: (ActionKind.MEAS_RESEND, ActionKind.REFLECT),
    CaseClass.III: (ActionKind.REFLECT, ActionKind.MEAS_RESEND),
    CaseClass.IV: (ActionKind.REFLECT, ActionKind.REFLECT),
}

EXACT_NOTES = (
    "case I rate is the check-subset disagreement probability; attacks resend "
    "the collapsed state faithfully, so it is 0 for every built-in strategy",
    "leakage_case_I counts a round without any inference as a blind guess (1/2)",
)


@dataclass(frozen=True)
class CaseReport:
    strategy: AttackStrategy
    source: Source
    per_case: dict[CaseClass, Fraction]
    average: Fraction
    leakage_case_I: Fraction
    notes: tuple[str, ...] = EXACT_NOTES

    def __post_init__(self):
        if self.average != sum(self.per_case.values(), Fraction(0)) / 4:
            raise ValueError("average must be the uniform mean of the four case rates")

    def vector(self) -> tuple[Fraction, ...]:
        return tuple(self.per_case[c] for c in CaseClass)


@dataclass
class EmpiricalCaseReport:
    strategy: AttackStrategy
    config: ProtocolConfig
    per_case: dict[CaseClass, Optional[float]]
    trials: dict[CaseClass, int]
    errors: dict[CaseClass, int]
    standard_errors: dict[CaseClass, Optional[float]]
    average: Optional[float]
    leakage_case_I: Optional[float]
    leakage_trials: int
    result: Optional[ProtocolResult] = field(default=None, repr=False)


def _party_branches(state: ExactState, kind: ActionKind, qubit: Qubit):
    if kind is ActionKind.REFLECT:
        return [(PartyAction(kind), state)]
    return [(PartyAction(kind, int(r)), s) for r, s in state.branches(Basis.Z, (qubit,))]


def _attack_branches(strategy: AttackStrategy, state: ExactState):
    kind = strategy.kind
    if kind is AttackKind.NO_ATTACK:
        return [(state, None)]
    if kind is AttackKind.MEASURE_BOTH:
        out = []
        for rb, s1 in state.branches(strategy.basis_b, (Qubit.B,)):
            for rc, s2 in s1.branches(strategy.basis_c, (Qubit.C,)):
                out.append((s2, AttackerKnowledge({"B": rb, "C": rc})))
        return out
    if kind is AttackKind.BELL_MEASURE:
        return [
            (s, AttackerKnowledge({"BC": r}))
            for r, s in state.branches(Basis.BELL, (Qubit.B, Qubit.C))
        ]
    return [(state.append(Qubit.BPRIME).cnot(Qubit.C, Qubit.BPRIME), AttackerKnowledge())]


def _alice_branches(state: ExactState, case: CaseClass):
    if case is CaseClass.IV:
        state = state.hadamard(Qubit.B)
    paths = [((), state)]
    for basis, targets in ALICE_OPERATIONS[case]:
        paths = [
            (results + (r,), s2)
            for results, s in paths
            for r, s2 in s.branches(basis, targets)
        ]
    return paths


def _inference_branches(strategy, knowledge, state):
    if strategy.kind is AttackKind.CNOT_ENTANGLE:
        return [
            (knowledge.with_result("B'", r), s)
            for r, s in state.branches(Basis.Z, (Qubit.BPRIME,))
        ]
    return [(knowledge, state)]


def exact_case_rates(strategy: AttackStrategy, source: Source | str = Source.PSI) -> CaseReport:
    """Exact per-case detection probabilities, their uniform average and case-I leakage."""
    source = Source(source)
    rules = CONSISTENT_RESULTS[source]
    per_case: dict[CaseClass, Fraction] = {}
    leakage = Fraction(0)
    start = exact_source(source.value)

    for case in CaseClass:
        bob_kind, charlie_kind = CASE_ACTIONS[case]
        total = detected = Fraction(0)
        for s1, knowledge in _attack_branches(strategy, start):
            for bob, s2 in _party_branches(s1, bob_kind, Qubit.B):
                for charlie, s3 in _party_branches(s2, charlie_kind, Qubit.C):
                    tails = [(knowledge, s3)]
                    if case is CaseClass.I and knowledge is not None:
                        tails = _inference_branches(strategy, knowledge, s3)
                    for know, s4 in tails:
                        for results, final in _alice_branches(s4, case):
                            w = final.weight()
                            total += w
                            if case is CaseClass.I:
                                b, c = (int(r) for r in results)
                                if (b, c) != (bob.bit, charlie.bit):
                                    detected += w
                                guess = None
                                if know is not None:
                                    guess = infer_charlie_bit(strategy, know, bob.bit, case)
                                if guess is None:
                                    leakage += w / 2
                                elif guess[0] == charlie.bit:
                                    leakage += w
                            elif results not in rules[case]:
                                detected += w
        if total != 1:
            raise ArithmeticError(f"case {case.value} branch weights sum to {total}, not 1")
        per_case[case] = detected

    average = sum(per_case.values(), Fraction(0)) / 4
    return CaseReport(strategy, source, per_case, average, leakage)


def attack_table(source: Source | str = Source.PSI) -> list[CaseReport]:
    """Exact reports for every built-in strategy, in a fixed order."""
    return [exact_case_rates(s, source) for s in STRATEGIES.values()]


def binomial_se(p: float, n: int) -> Optional[float]:
    if n == 0:
        return None
    return math.sqrt(max(p * (1 - p), 0.0) / n)


def montecarlo_case_rates(strategy: AttackStrategy, cfg: ProtocolConfig) -> EmpiricalCaseReport:
    """Empirical per-case rates from a full simulated run, with binomial standard errors."""
    return empirical_from_result(run_protocol(cfg, strategy))


def empirical_from_result(result: ProtocolResult) -> EmpiricalCaseReport:
    trials = dict(result.rate_trials)
    errors = dict(result.case_errors)
    rates = dict(result.case_error_rates)
    ses = {c: (binomial_se(rates[c], trials[c]) if rates[c] is not None else None) for c in CaseClass}
    average = None
    if all(r is not None for r in rates.values()):
        average = sum(rates.values()) / 4

    correct = 0.0
    n_leak = 0
    for r in result.rounds:
        if r.case is not CaseClass.I:
            continue
        n_leak += 1
        t = r.attack_transcript
        if t is None or t.inferred_charlie_bit is None:
            correct += 0.5
        elif t.inferred_charlie_bit == r.charlie.bit:
            correct += 1
    leakage = correct / n_leak if n_leak else None
    return EmpiricalCaseReport(
        result.attack, result.config, rates, trials, errors, ses, average, leakage, n_leak, result
    )


def within_sigma(empirical: Optional[float], exact: Fraction, n: int, n_sigma: float = 4.0) -> bool:
    """Is the estimate within ``n_sigma`` binomial standard errors of the exact rate?

    The standard error uses the exact rate, so a deterministic (0 or 1) rate
    demands exact agreement.
    """
    if empirical is None or n == 0:
        return False
    p = float(exact)
    se = math.sqrt(p * (1 - p) / n)
    return abs(empirical - p) <= n_sigma * se + 1e-15
