import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqss.adversary import STRATEGIES
from sqss.protocol import (
    ALICE_OPERATIONS,
    BOB,
    CHARLIE,
    CONSISTENT_RESULTS,
    ActionKind,
    CaseClass,
    ClassicalParty,
    PartyAction,
    Permutation,
    ProtocolAbort,
    ProtocolConfig,
    Source,
    Variant,
    Verdict,
    apply_reorder_variant,
    choose_action,
    classify_case,
    round_stream,
    run_protocol,
    run_round,
    sift_key_bit,
)
from sqss.qstate import Basis, Qubit, apply_hadamard, ket, make_source_state, outcome_distribution

MR, R = ActionKind.MEAS_RESEND, ActionKind.REFLECT


def within(freq, p, n, k=4):
    return abs(freq - p) <= k * math.sqrt(p * (1 - p) / n)


# -- tables ----------------------------------------------------------------

@pytest.mark.parametrize(
    "bob, charlie, case",
    [(MR, MR, CaseClass.I), (MR, R, CaseClass.II), (R, MR, CaseClass.III), (R, R, CaseClass.IV)],
)
def test_classify_case(bob, charlie, case):
    assert classify_case(bob, charlie) is case
    b = PartyAction(bob, 0 if bob is MR else None)
    c = PartyAction(charlie, 1 if charlie is MR else None)
    assert classify_case(b, c) is case


@pytest.mark.parametrize("b, c, key", [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)])
def test_sift_key_bit(b, c, key):
    assert sift_key_bit(b, c) == key


def test_party_action_invariants():
    with pytest.raises(ValueError):
        PartyAction(R, 1)
    with pytest.raises(ValueError):
        PartyAction(MR)


@pytest.mark.parametrize("source", list(Source))
def test_consistency_tables_match_honest_outcomes(source):
    """Derive each case's allowed results from the undisturbed source and compare."""
    psi = make_source_state(source.value)
    for case in (CaseClass.II, CaseClass.III, CaseClass.IV):
        state = apply_hadamard(psi, Qubit.B) if case is CaseClass.IV else psi
        paths = [((), state, 1.0)]
        for basis, targets in ALICE_OPERATIONS[case]:
            paths = [
                (res + (r,), s2, p * q)
                for res, s, p in paths
                for r, q, s2 in outcome_distribution(s, basis, targets)
            ]
        derived = frozenset(res for res, _, p in paths if p > 1e-12)
        assert derived == CONSISTENT_RESULTS[source][case]


def test_alice_operations_follow_table():
    assert ALICE_OPERATIONS[CaseClass.I] == ((Basis.Z, (Qubit.B,)), (Basis.Z, (Qubit.C,)))
    assert ALICE_OPERATIONS[CaseClass.II] == ((Basis.Z, (Qubit.B,)), (Basis.X, (Qubit.C,)))
    assert ALICE_OPERATIONS[CaseClass.III] == ((Basis.X, (Qubit.B,)), (Basis.Z, (Qubit.C,)))
    assert ALICE_OPERATIONS[CaseClass.IV] == ((Basis.BELL, (Qubit.B, Qubit.C)),)


# -- randomness ------------------------------------------------------------

def test_choose_action_is_fair_and_seeded():
    n = 100_000
    rng = np.random.default_rng(11)
    draws = [choose_action(rng) for _ in range(n)]
    assert within(draws.count(MR) / n, 0.5, n)
    rng2 = np.random.default_rng(11)
    assert [choose_action(rng2) for _ in range(50)] == draws[:50]


# -- parties ---------------------------------------------------------------

def test_classical_party_surface():
    public = {m for m in dir(ClassicalParty) if not m.startswith("_")}
    assert public == {"act", "meas_resend", "reflect", "prepare_resend"}


def test_meas_resend_leaves_eigenstate():
    rng = np.random.default_rng(2)
    for _ in range(50):
        action, state = BOB.meas_resend(make_source_state("Psi"), rng)
        assert action.kind is MR
        (r, p, _), = outcome_distribution(state, Basis.Z, Qubit.B)
        assert int(r) == action.bit and p == pytest.approx(1)


@pytest.mark.parametrize("bit", [0, 1])
def test_prepare_resend(bit):
    rng = np.random.default_rng(bit)
    for _ in range(100):
        state = CHARLIE.prepare_resend(make_source_state("Psi"), bit, rng)
        (r, p, _), = outcome_distribution(state, Basis.Z, Qubit.C)
        assert r == str(bit) and p == pytest.approx(1)
        # discarding C leaves B in an X eigenstate, no longer entangled
        assert len(outcome_distribution(state, Basis.X, Qubit.B)) == 1


def test_reflect_is_untouched():
    psi = make_source_state("Psi")
    action, state = CHARLIE.reflect(psi)
    assert action == PartyAction(R) and state is psi


# -- single rounds ---------------------------------------------------------

def rounds_of_case(case, n, source="Psi", attack=None, seed=0):
    cfg = ProtocolConfig(1, seed=seed, source=source)
    attack = attack or STRATEGIES["none"]
    out = []
    i = 0
    while len(out) < n:
        rec = run_round(cfg, attack, round_stream(seed, i), i)
        i += 1
        if rec.case is case:
            out.append(rec)
    return out


def test_honest_case_two_is_always_consistent():
    recs = rounds_of_case(CaseClass.II, 300)
    assert all(r.verdict is Verdict.CONSISTENT for r in recs)
    assert {r.alice_results for r in recs} == {("0", "+"), ("1", "-")}


def test_honest_case_four_reads_phi_plus():
    recs = rounds_of_case(CaseClass.IV, 300)
    for r in recs:
        (out,) = r.alice_outcomes
        assert out.result == "phi+" and out.probability == pytest.approx(1, abs=1e-12)


def test_case_one_table_two_row():
    recs = [r for r in rounds_of_case(CaseClass.I, 200) if (r.bob.bit, r.charlie.bit) == (0, 1)]
    assert recs
    for r in recs:
        assert r.alice_results == ("0", "1")
        assert r.key_bit_alice == 1
        assert r.verdict is Verdict.KEY_CANDIDATE


def test_round_record_invariants():
    cfg = ProtocolConfig(1, seed=4)
    for i in range(400):
        for attack in (STRATEGIES["none"], STRATEGIES["bell"]):
            r = run_round(cfg, attack, round_stream(4, i), i)
            assert (r.verdict is Verdict.KEY_CANDIDATE) == (r.case is CaseClass.I)
            if r.case is CaseClass.I:
                b, c = (int(x) for x in r.alice_results)
                assert r.key_bit_alice == b ^ c
            else:
                assert r.key_bit_alice is None


# -- full runs -------------------------------------------------------------

@pytest.fixture(scope="module")
def honest_run():
    return run_protocol(ProtocolConfig(10_000, seed=2024))


def test_honest_run(honest_run):
    res = honest_run
    assert not res.aborted and res.abort_reason is None
    assert all(rate == 0 for rate in res.case_error_rates.values())
    n = res.config.n_rounds
    expected = n / 4 * (1 - res.config.check_fraction)
    assert abs(res.key_length - expected) <= 4 * math.sqrt(n * (1 / 8) * (7 / 8)) + 1
    assert res.key_xor_consistent


def test_honest_run_case_frequencies(honest_run):
    n = honest_run.config.n_rounds
    for case in CaseClass:
        assert within(honest_run.case_trials[case] / n, 0.25, n)


def test_honest_key_matches_published_bits(honest_run):
    for r in honest_run.rounds:
        if r.case is CaseClass.I:
            b, c = (int(x) for x in r.alice_results)
            assert (b, c) == (r.bob.bit, r.charlie.bit)
            assert r.key_bit_alice == b ^ c
        else:
            assert r.verdict is Verdict.CONSISTENT


def test_check_subset_bookkeeping(honest_run):
    res = honest_run
    case_one = [r.index for r in res.rounds if r.case is CaseClass.I]
    assert len(res.check_indices) == math.ceil(0.5 * len(case_one))
    assert res.rate_trials[CaseClass.I] == len(res.check_indices)
    assert set(res.check_indices).isdisjoint(res.key_indices)
    assert sorted(res.check_indices + res.key_indices) == case_one


def test_party_views_hold_one_string_each(honest_run):
    res = honest_run
    views = [res.alice_view(), res.bob_view(), res.charlie_view()]
    assert [v.bits for v in views] == [res.final_key_alice, res.share_bob, res.share_charlie]
    for v in views:
        assert set(vars(v)) == {"party", "bits"}


def mutual_information(xs: str, ys: str) -> float:
    n = len(xs)
    joint = {}
    for x, y in zip(xs, ys):
        joint[x, y] = joint.get((x, y), 0) + 1
    px = {k: xs.count(k) / n for k in "01"}
    py = {k: ys.count(k) / n for k in "01"}
    return sum(
        c / n * math.log2((c / n) / (px[x] * py[y])) for (x, y), c in joint.items()
    )


def test_single_share_is_independent_of_key():
    res = run_protocol(ProtocolConfig(100_000, seed=77))
    assert res.key_length > 10_000
    assert mutual_information(res.share_bob, res.final_key_alice) < 0.01
    assert mutual_information(res.share_charlie, res.final_key_alice) < 0.01


@pytest.mark.parametrize("source", ["Psi", "Phi"])
def test_run_is_deterministic(source):
    cfg = ProtocolConfig(500, seed=99, source=source)
    a = json.dumps(run_protocol(cfg, STRATEGIES["cnot"]).to_dict(include_rounds=True))
    b = json.dumps(run_protocol(cfg, STRATEGIES["cnot"]).to_dict(include_rounds=True))
    assert a == b


def test_bell_attack_aborts():
    res = run_protocol(ProtocolConfig(10_000, seed=1), STRATEGIES["bell"])
    assert res.aborted
    assert res.abort_cases == [CaseClass.II, CaseClass.III, CaseClass.IV]
    assert "case II" in res.abort_reason
    assert res.key_length == 0


@pytest.mark.parametrize("threshold", [0.0, 0.3, 0.49, 0.5, 0.74, 0.76, 1.0])
def test_abort_soundness(threshold):
    res = run_protocol(ProtocolConfig(2_000, seed=8, error_threshold=threshold), STRATEGIES["zz"])
    top = max(r for r in res.case_error_rates.values() if r is not None)
    assert res.aborted == (top > threshold)
    assert res.abort_cases == [
        c for c in (CaseClass.II, CaseClass.III, CaseClass.IV, CaseClass.I)
        if res.case_error_rates[c] > threshold
    ]


def test_degenerate_run_aborts_distinctly():
    # no seed below yields a surviving case-I round when N = 1
    for seed in range(20):
        res = run_protocol(ProtocolConfig(1, seed=seed))
        assert res.aborted
        assert res.abort_reason.startswith("degenerate")
        assert res.case_error_rates[CaseClass.I] in (0.0, None)


def test_undefined_rate_is_not_zero():
    res = run_protocol(ProtocolConfig(1, seed=0))
    missing = [c for c in CaseClass if res.case_trials[c] == 0]
    assert len(missing) >= 3
    assert all(res.case_error_rates[c] is None for c in missing if c is not CaseClass.I)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_rounds=0, seed=1),
        dict(n_rounds=10, seed=-1),
        dict(n_rounds=10, seed=2**64),
        dict(n_rounds=10, seed=1, check_fraction=0),
        dict(n_rounds=10, seed=1, check_fraction=1),
        dict(n_rounds=10, seed=1, error_threshold=1.5),
        dict(n_rounds=10, seed=1, source="GHZ"),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ProtocolConfig(**kwargs)


@pytest.mark.parametrize("source", ["Psi", "Phi"])
def test_attack_detected_for_both_sources(source):
    res = run_protocol(ProtocolConfig(4_000, seed=6, source=source), STRATEGIES["zz"])
    assert res.aborted
    assert res.case_error_rates[CaseClass.IV] > 0.6


# -- order rearrangement ---------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.permutations(list(range(12))))
def test_permutation_inverse(mapping):
    p = Permutation(tuple(mapping))
    assert p.inverse().compose(p) == Permutation.identity(12)
    assert p.compose(p.inverse()) == Permutation.identity(12)


def test_permutation_rejects_non_bijection():
    with pytest.raises(ValueError):
        Permutation((0, 0, 1))
    assert not Permutation.is_bijection([0, 2])
    assert not Permutation.is_bijection(["a"])


def test_identity_reorder_is_byte_identical_to_basic():
    basic = ProtocolConfig(3_000, seed=31)
    reorder = ProtocolConfig(3_000, seed=31, variant=Variant.REORDER)
    ident = (Permutation.identity(3_000), Permutation.identity(3_000))
    for attack in ("none", "cnot"):
        a = run_protocol(basic, STRATEGIES[attack]).to_dict(include_rounds=True)
        b = run_protocol(reorder, STRATEGIES[attack], permutations=ident).to_dict(include_rounds=True)
        a.pop("variant"), b.pop("variant")
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_random_reorder_honest_run():
    res = run_protocol(ProtocolConfig(10_000, seed=12, variant=Variant.REORDER))
    assert not res.aborted
    assert all(rate == 0 for rate in res.case_error_rates.values())
    assert res.key_length > 0 and res.key_xor_consistent


def test_reorder_cnot_rates():
    n = 20_000
    res = run_protocol(ProtocolConfig(n, seed=13, variant=Variant.REORDER), STRATEGIES["cnot"])
    expected = {CaseClass.I: 0, CaseClass.II: 0.5, CaseClass.III: 0, CaseClass.IV: 0.5}
    for case, p in expected.items():
        assert within(res.case_error_rates[case], p, res.rate_trials[case])


def test_reorder_actually_permutes():
    flights = list(range(6))

    class F:
        def __init__(self, i):
            self.index = i

    flights = [F(i) for i in flights]
    bob = Permutation((5, 4, 3, 2, 1, 0))
    charlie = Permutation((1, 0, 3, 2, 5, 4))
    tx = apply_reorder_variant(flights, bob, charlie)
    assert [i for i, _ in tx.b_sequence] == [5, 4, 3, 2, 1, 0]
    assert [i for i, _ in tx.c_sequence] == [1, 0, 3, 2, 5, 4]
    assert tx.reassemble(bob.mapping, charlie.mapping) == list(range(6))
    with pytest.raises(ProtocolAbort, match="bijection"):
        tx.reassemble((0, 0, 1, 2, 3, 4), charlie.mapping)
    with pytest.raises(ProtocolAbort, match="re-pair"):
        tx.reassemble(bob.mapping, bob.mapping)


def test_permutations_need_reorder_variant():
    with pytest.raises(ValueError):
        run_protocol(ProtocolConfig(4, seed=1), permutations=(Permutation.identity(4),) * 2)
