"""Command-line front end.

    sqss simulate --rounds 100000 --attack bell --seed 42
    sqss analyze  --rounds 100000 --attack zx --seed 7 --format csv
    sqss verify   [--attack cnot] [--source phi]

``simulate`` runs the full protocol (checks, abort decision, key);
``analyze`` adds the exact rates next to the empirical ones; ``verify`` is
exact only and covers every built-in attack when ``--attack`` is omitted.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .adversary import STRATEGIES, AttackStrategy
from .analysis import (
    CaseReport,
    EmpiricalCaseReport,
    empirical_from_result,
    exact_case_rates,
    montecarlo_case_rates,
    attack_table,
    within_sigma,
)
from .cases import CaseClass
from .protocol import ProtocolConfig, ProtocolResult, Source, Variant

FORMATS = ("json", "csv")
CSV_FIELDS = (
    "mode", "attack", "source", "variant", "seed", "n_rounds", "case",
    "rate", "numerator", "denominator", "trials", "errors", "aborted",
)


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunSpec:
    mode: str
    strategy: Optional[AttackStrategy]
    seed: Optional[int]
    n_rounds: Optional[int] = None
    source: Source = Source.PSI
    variant: Variant = Variant.BASIC
    check_fraction: float = 0.5
    threshold: float = 0.05
    output_path: str = "-"
    format: str = "json"
    quiet: bool = False

    @property
    def config(self) -> ProtocolConfig:
        return ProtocolConfig(
            n_rounds=self.n_rounds,
            seed=self.seed,
            source=self.source,
            variant=self.variant,
            check_fraction=self.check_fraction,
            error_threshold=self.threshold,
        )


def _fraction_arg(lo, hi, lo_open, hi_open):
    def parse(text):
        try:
            x = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if (x < lo or x > hi) or (lo_open and x == lo) or (hi_open and x == hi):
            raise argparse.ArgumentTypeError(f"{x} outside {'(' if lo_open else '['}{lo}, {hi}{')' if hi_open else ']'}")
        return x
    return parse


def _seed_arg(text):
    try:
        x = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= x < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return x


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--attack", choices=sorted(STRATEGIES), help="Bob* strategy (default: none; verify: all)")
    common.add_argument("--source", choices=("psi", "phi"), default="psi")
    common.add_argument("--variant", choices=("basic", "reorder"), default="basic")
    common.add_argument("--check-fraction", type=_fraction_arg(0, 1, True, True), default=0.5)
    common.add_argument("--threshold", type=_fraction_arg(0, 1, False, False), default=0.05)
    common.add_argument("--seed", type=_seed_arg)
    common.add_argument("--rounds", type=int)
    common.add_argument("--format", choices=FORMATS, default="json")
    common.add_argument("--output", "-o", default="-", help="output file (default: stdout)")
    common.add_argument("--quiet", "-q", action="store_true", help="no summary on stderr")

    parser = argparse.ArgumentParser(prog="sqss", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="mode", required=True)
    sub.add_parser("simulate", parents=[common], help="run the protocol and report checks and key")
    sub.add_parser("analyze", parents=[common], help="Monte-Carlo case rates against the exact ones")
    sub.add_parser("verify", parents=[common], help="exact case rates by branch enumeration")
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> RunSpec:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.mode == "verify":
        if ns.rounds is not None:
            parser.error("verify is exact; --rounds does not apply")
    else:
        if ns.seed is None:
            parser.error(f"{ns.mode} requires an explicit --seed")
        if ns.rounds is None or ns.rounds < 1:
            parser.error(f"{ns.mode} requires --rounds >= 1")
    strategy = None
    if ns.attack is not None:
        strategy = STRATEGIES[ns.attack]
    elif ns.mode != "verify":
        strategy = STRATEGIES["none"]
    return RunSpec(
        mode=ns.mode,
        strategy=strategy,
        seed=ns.seed,
        n_rounds=ns.rounds,
        source=Source.PSI if ns.source == "psi" else Source.PHI,
        variant=Variant.BASIC if ns.variant == "basic" else Variant.REORDER,
        check_fraction=ns.check_fraction,
        threshold=ns.threshold,
        output_path=ns.output,
        format=ns.format,
        quiet=ns.quiet,
    )


def _rational(x: Fraction) -> dict:
    return {"numerator": x.numerator, "denominator": x.denominator}


def _header(spec: RunSpec, strategy: AttackStrategy) -> dict:
    return {
        "mode": spec.mode,
        "seed": spec.seed,
        "source": spec.source.value,
        "variant": spec.variant.value,
        "attack": strategy.name,
        "n_rounds": spec.n_rounds,
        "check_fraction": spec.check_fraction,
        "threshold": spec.threshold,
    }


def exact_report(spec: RunSpec, report: CaseReport) -> dict:
    out = _header(spec, report.strategy)
    out.update({
        "per_case_rates": {c.value: float(report.per_case[c]) for c in CaseClass},
        "average_rate": float(report.average),
        "aborted": None,
        "abort_reason": None,
        "key_length": None,
        "key_xor_consistent": None,
        "leakage_case_I": float(report.leakage_case_I),
        "exact": {
            "per_case_rates": {c.value: _rational(report.per_case[c]) for c in CaseClass},
            "average_rate": _rational(report.average),
            "leakage_case_I": _rational(report.leakage_case_I),
        },
        "notes": list(report.notes),
    })
    return out


def simulation_report(spec: RunSpec, emp: EmpiricalCaseReport) -> dict:
    result: ProtocolResult = emp.result
    out = _header(spec, emp.strategy)
    out.update({
        "per_case_rates": {c.value: emp.per_case[c] for c in CaseClass},
        "average_rate": emp.average,
        "aborted": result.aborted,
        "abort_reason": result.abort_reason,
        "key_length": result.key_length,
        "key_xor_consistent": result.key_xor_consistent,
        "leakage_case_I": emp.leakage_case_I,
        "exact": None,
        "case_trials": {c.value: result.case_trials[c] for c in CaseClass},
        "rate_trials": {c.value: emp.trials[c] for c in CaseClass},
        "case_errors": {c.value: emp.errors[c] for c in CaseClass},
        "standard_errors": {c.value: emp.standard_errors[c] for c in CaseClass},
    })
    return out


def build_report(spec: RunSpec) -> dict:
    if spec.mode == "verify":
        if spec.strategy is None:
            head = {k: v for k, v in _header(spec, STRATEGIES["none"]).items() if k != "attack"}
            head["reports"] = [exact_report(spec, r) for r in attack_table(spec.source)]
            return head
        return exact_report(spec, exact_case_rates(spec.strategy, spec.source))

    emp = montecarlo_case_rates(spec.strategy, spec.config)
    out = simulation_report(spec, emp)
    if spec.mode == "analyze":
        exact = exact_case_rates(spec.strategy, spec.source)
        out["exact"] = exact_report(spec, exact)["exact"]
        out["concordant"] = {
            c.value: within_sigma(emp.per_case[c], exact.per_case[c], emp.trials[c])
            for c in CaseClass
        }
    return out


def _csv_rows(report: dict):
    if "reports" in report:
        for r in report["reports"]:
            yield from _csv_rows(r)
        return
    exact = report.get("exact") or {}
    trials = report.get("rate_trials") or {}
    errors = report.get("case_errors") or {}
    for key in [c.value for c in CaseClass] + ["average"]:
        if key == "average":
            rate, frac = report["average_rate"], exact.get("average_rate")
        else:
            rate, frac = report["per_case_rates"][key], exact.get("per_case_rates", {}).get(key)
        yield {
            "mode": report["mode"],
            "attack": report["attack"],
            "source": report["source"],
            "variant": report["variant"],
            "seed": report["seed"],
            "n_rounds": report["n_rounds"],
            "case": key,
            "rate": rate,
            "numerator": frac["numerator"] if frac else None,
            "denominator": frac["denominator"] if frac else None,
            "trials": trials.get(key),
            "errors": errors.get(key),
            "aborted": report["aborted"],
        }


def emit_report(report, fmt: str = "json") -> bytes:
    """Serialize a report dict, a ProtocolResult or a CaseReport to bytes."""
    if isinstance(report, CaseReport):
        report = exact_report(RunSpec("verify", report.strategy, None, source=report.source), report)
    elif isinstance(report, ProtocolResult):
        cfg = report.config
        spec = RunSpec("simulate", report.attack, cfg.seed, cfg.n_rounds, cfg.source, cfg.variant,
                       cfg.check_fraction, cfg.error_threshold)
        report = simulation_report(spec, empirical_from_result(report))
    if fmt == "json":
        return (json.dumps(report, indent=2, sort_keys=True) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in _csv_rows(report):
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
        return buf.getvalue().encode()
    raise UsageError(f"unknown format {fmt!r}")


def summarize(report: dict) -> str:
    if "reports" in report:
        return "\n".join(summarize(r) for r in report["reports"])
    rates = report["per_case_rates"]
    cells = " ".join(
        f"{c}={'n/a' if rates[c] is None else format(rates[c], '.4f')}" for c in rates
    )
    avg = report["average_rate"]
    line = f"[{report['mode']}] attack={report['attack']:<5} {cells} avg={'n/a' if avg is None else format(avg, '.4f')}"
    if report.get("exact"):
        a = report["exact"]["average_rate"]
        line += f" exact_avg={a['numerator']}/{a['denominator']}"
    if report["aborted"] is not None:
        line += f" aborted={report['aborted']} key_length={report['key_length']}"
    return line


def main(argv: Optional[Sequence[str]] = None) -> int:
    spec = parse_args(argv)
    report = build_report(spec)
    payload = emit_report(report, spec.format)
    try:
        if spec.output_path == "-":
            sys.stdout.buffer.write(payload)
            sys.stdout.flush()
        else:
            with open(spec.output_path, "wb") as fh:
                fh.write(payload)
    except OSError as exc:
        print(f"sqss: cannot write report: {exc}", file=sys.stderr)
        return 1
    if not spec.quiet:
        print(summarize(report), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
