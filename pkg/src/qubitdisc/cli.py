"""Command-line front end: ``solve``, ``sweep``, ``verify`` and ``simulate``.

Ensemble files are JSON::

    {"states": [{"prior": 0.5, "bloch": [0, 0, 1], "label": "zero"}, ...]}

POVM files for ``verify``::

    {"elements": [{"weight": 1.0, "direction": [0, 0, 1], "identifies": 0}, ...]}

``solve --format machine`` writes the input document plus a ``result``
object whose ``elements`` list is itself a valid POVM file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import families
from .bloch import Ensemble, SignalState
from .oracle import minimize_dual, monte_carlo_simulate
from .solver import (
    DEFAULT_TOL,
    NoSolutionFound,
    NotAPovm,
    PovmElement,
    SolveReport,
    Tolerances,
    solve,
    verify_external,
)

log = logging.getLogger("qubitdisc")

EXIT_OK, EXIT_SUBOPTIMAL, EXIT_FAIL, EXIT_INPUT = 0, 1, 2, 3

SWEEP_COLUMNS = ["p", "theta", "k_opt", "p_corr", "p_corr_two_element",
                 "p_corr_three_element", "p_corr_oracle"]


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


class InvalidSpec(ValueError):
    pass


# ---------------------------------------------------------------- ingestion

def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc


def _vector(value, where):
    if not isinstance(value, list) or len(value) != 3:
        raise ValidationError(f"{where}: expected a list of 3 numbers, got {value!r}")
    try:
        return np.array([float(x) for x in value])
    except (TypeError, ValueError):
        raise ValidationError(f"{where}: non-numeric entry in {value!r}") from None


def parse_ensemble(doc) -> tuple[Ensemble, list[str | None]]:
    if not isinstance(doc, dict) or not isinstance(doc.get("states"), list):
        raise ValidationError("states: missing or not a list")
    if not doc["states"]:
        raise ValidationError("states: at least one state is required")
    priors, blochs, labels = [], [], []
    for i, rec in enumerate(doc["states"]):
        where = f"states[{i}]"
        if not isinstance(rec, dict):
            raise ValidationError(f"{where}: expected an object")
        try:
            prior = float(rec["prior"])
        except KeyError:
            raise ValidationError(f"{where}.prior: missing") from None
        except (TypeError, ValueError):
            raise ValidationError(f"{where}.prior: not a number: {rec['prior']!r}") from None
        if not 0.0 <= prior <= 1.0:
            raise ValidationError(f"{where}.prior: {prior} outside [0, 1]")
        if "bloch" not in rec:
            raise ValidationError(f"{where}.bloch: missing")
        v = _vector(rec["bloch"], f"{where}.bloch")
        n = float(np.linalg.norm(v))
        if n > 1.0 + 1e-12:
            raise ValidationError(f"{where}.bloch: length {n!r} exceeds 1 (state {i})")
        priors.append(prior)
        blochs.append(v)
        labels.append(rec.get("label"))
    total = sum(priors)
    if abs(total - 1.0) > Ensemble.PRIOR_SUM_TOL:
        raise ValidationError(f"states[*].prior: priors sum to {total!r}, expected 1")
    ens = Ensemble([SignalState.from_bloch(p, v) for p, v in zip(priors, blochs)])
    for j, i in sorted(ens.duplicates.items()):
        log.warning("state %d duplicates state %d; it is never identified separately", j, i)
    return ens, labels


def ingest(path) -> Ensemble:
    return parse_ensemble(_load_json(path))[0]


def parse_povm(doc) -> list[PovmElement]:
    if isinstance(doc, dict) and "elements" not in doc and isinstance(doc.get("result"), dict):
        doc = doc["result"]
    if not isinstance(doc, dict) or not isinstance(doc.get("elements"), list):
        raise ValidationError("elements: missing or not a list")
    out = []
    for i, rec in enumerate(doc["elements"]):
        where = f"elements[{i}]"
        try:
            weight = float(rec["weight"])
            ident = rec["identifies"]
        except (KeyError, TypeError, ValueError):
            raise ValidationError(f"{where}: needs numeric weight and integer identifies") from None
        if not isinstance(ident, int):
            raise ValidationError(f"{where}.identifies: not an integer: {ident!r}")
        out.append(PovmElement(weight, _vector(rec.get("direction"), f"{where}.direction"), ident))
    return out


# ------------------------------------------------------------------ output

def report_document(doc: dict, report: SolveReport) -> dict:
    g = report.gamma
    result = {
        "p_corr": report.p_corr,
        "a": g.a,
        "b": [float(x) for x in g.b],
        "k": report.k,
        "subset": list(g.subset),
        "slacks": [float(x) for x in g.slacks],
        "candidates_examined": report.candidates_examined,
        "elements": [
            {"weight": e.weight, "direction": [float(x) for x in e.direction],
             "identifies": e.identifies}
            for e in report.povm
        ],
        "notes": report.notes,
    }
    return {"states": doc["states"], "result": result}


def format_report(report: SolveReport, labels=None) -> str:
    def name(j):
        return f"{j} ({labels[j]})" if labels and labels[j] else str(j)

    g = report.gamma
    lines = [
        f"P_corr              {report.p_corr:.15g}",
        f"outcomes (k)        {report.k}",
        f"identified subset   {', '.join(name(j) for j in g.subset)}",
        f"Gamma a             {g.a:.15g}",
        f"Gamma b             [{', '.join(f'{x:.15g}' for x in g.b)}]",
        f"candidates examined {report.candidates_examined}",
        "",
        "POVM elements (weight, direction, identifies):",
    ]
    for e in report.povm:
        d = ", ".join(f"{x: .12f}" for x in e.direction)
        lines.append(f"  {e.weight:.12f}  [{d}]  {name(e.identifies)}")
    lines.append("")
    lines.append("slacks (a - p_j) - |b - w_j|:")
    for j, s in enumerate(g.slacks):
        lines.append(f"  {name(j):>6}  {s: .3e}")
    for n in report.notes:
        lines.append(f"note: {n}")
    return "\n".join(lines) + "\n"


def _emit(text: str, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def parse_tol(items) -> Tolerances:
    tol = DEFAULT_TOL
    for item in items or []:
        key, _, value = item.partition("=")
        if key not in ("psd", "povm", "geom") or not value:
            raise ValidationError(f"--tol expects psd=, povm= or geom=, got {item!r}")
        tol = replace(tol, **{key: float(value)})
    return tol


# ---------------------------------------------------------------- commands

def cmd_solve(args) -> int:
    doc = _load_json(args.input)
    ens, labels = parse_ensemble(doc)
    try:
        report = solve(ens, parse_tol(args.tol))
    except NoSolutionFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.format == "machine":
        _emit(json.dumps(report_document(doc, report), indent=2) + "\n", args.out)
    else:
        _emit(format_report(report, labels), args.out)
    return EXIT_OK


@dataclass
class SweepSpec:
    family: str
    theta: float
    p_start: float
    p_stop: float
    p_step: float
    with_oracle: bool = False
    base: Ensemble | None = None

    def __post_init__(self):
        if self.family not in ("mirror-symmetric", "custom-grid"):
            raise InvalidSpec(f"unknown family {self.family!r}")
        if not self.p_step > 0:
            raise InvalidSpec("p step must be positive")
        if self.p_stop < self.p_start:
            raise InvalidSpec("p stop is below p start")
        if not math.isfinite(self.theta) or abs(self.theta) > 2 * math.pi:
            raise InvalidSpec(f"theta={self.theta} is not an angle in radians")
        hi = 0.5
        if self.family == "custom-grid":
            if self.base is None or len(self.base) < 2:
                raise InvalidSpec("custom-grid needs an input ensemble with at least two states")
            hi = 1.0 / (len(self.base) - 1)
        if self.p_start < 0 or self.p_stop > hi + 1e-12:
            raise InvalidSpec(f"p grid must lie in [0, {hi:g}]")

    def grid(self) -> np.ndarray:
        n = int(math.floor((self.p_stop - self.p_start) / self.p_step + 1e-9)) + 1
        return np.round(self.p_start + self.p_step * np.arange(n), 12)

    def ensemble(self, p: float) -> Ensemble:
        if self.family == "mirror-symmetric":
            return families.mirror_symmetric(self.theta, p)
        n = len(self.base)
        priors = [1.0 - (n - 1) * p] + [p] * (n - 1)
        return Ensemble(SignalState(q, s.purity, s.direction)
                        for q, s in zip(priors, self.base.states))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.12g}"


def sweep_rows(spec: SweepSpec, tol: Tolerances = DEFAULT_TOL):
    for p in spec.grid():
        p = float(p)
        rep = solve(spec.ensemble(p), tol)
        two = three = oracle = None
        if spec.family == "mirror-symmetric":
            two = families.two_element_value(spec.theta, p)
            try:
                three = families.three_element_value(spec.theta, p)
            except ZeroDivisionError:
                three = math.nan
        if spec.with_oracle:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                oracle = minimize_dual(spec.ensemble(p)).value
        yield {"p": p, "theta": spec.theta, "k_opt": rep.k, "p_corr": rep.p_corr,
               "p_corr_two_element": two, "p_corr_three_element": three,
               "p_corr_oracle": oracle}


def sweep_csv(spec: SweepSpec, tol: Tolerances = DEFAULT_TOL) -> str:
    cols = SWEEP_COLUMNS if spec.with_oracle else SWEEP_COLUMNS[:-1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in sweep_rows(spec, tol):
        w.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    base = ingest(args.input) if args.family == "custom-grid" and args.input else None
    try:
        spec = SweepSpec(args.family, args.theta, args.p_start, args.p_stop, args.p_step,
                         args.with_oracle, base)
    except InvalidSpec as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        text = sweep_csv(spec, parse_tol(args.tol))
    except NoSolutionFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit(text, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    ens = ingest(args.input)
    povm = parse_povm(_load_json(args.povm))
    try:
        rep = verify_external(ens, povm, parse_tol(args.tol))
    except NotAPovm as exc:
        print(f"not a POVM: {exc}")
        return EXIT_FAIL
    print(f"P_corr achieved     {rep.p_corr:.15g}")
    print(f"hermiticity resid   {rep.residual:.3e}")
    for j, s in enumerate(rep.slacks):
        print(f"  slack[{j}]  {s: .3e}")
    if rep.optimal:
        print("verdict: optimal")
        return EXIT_OK
    print(f"verdict: suboptimal (most violated slack {rep.slacks[rep.worst]:.3e} "
          f"on state {rep.worst})")
    return EXIT_SUBOPTIMAL


def cmd_simulate(args) -> int:
    ens = ingest(args.input)
    try:
        rep = solve(ens, parse_tol(args.tol))
    except NoSolutionFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    rate, se = monte_carlo_simulate(ens, rep.povm, args.samples, args.seed)
    sigma = math.sqrt(max(rep.p_corr * (1 - rep.p_corr), 0.0) / args.samples)
    diff = rate - rep.p_corr
    if sigma > 0:
        z = diff / sigma
    else:
        z = 0.0 if abs(diff) <= 1e-12 else math.inf
    print(f"theoretical P_corr  {rep.p_corr:.12f}")
    print(f"empirical rate      {rate:.12f}")
    print(f"standard error      {se:.3e}")
    print(f"z-score             {z:.3f}")
    return EXIT_OK if abs(z) <= 4 else EXIT_SUBOPTIMAL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qubitdisc",
                                 description="Minimum-error discrimination of qubit states.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, need_input=True):
        p.add_argument("--input", required=need_input, help="ensemble JSON file")
        p.add_argument("--tol", action="append", metavar="KEY=VALUE",
                       help="override a tolerance (psd, povm, geom); repeatable")

    p = sub.add_parser("solve", help="optimal measurement for an ensemble")
    common(p)
    p.add_argument("--format", choices=["report", "machine"], default="report")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="P_corr over a grid of priors")
    common(p, need_input=False)
    p.add_argument("--family", choices=["mirror-symmetric", "custom-grid"],
                   default="mirror-symmetric")
    p.add_argument("--theta", type=float, default=2 * math.pi / 3, help="radians")
    p.add_argument("--p-start", type=float, default=0.0)
    p.add_argument("--p-stop", type=float, default=0.5)
    p.add_argument("--p-step", type=float, default=1e-3)
    p.add_argument("--with-oracle", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="check a POVM for optimality")
    common(p)
    p.add_argument("--povm", required=True, help="POVM JSON file")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="Monte Carlo run of the optimal measurement")
    common(p)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
