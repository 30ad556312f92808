"""``monoplan`` command-line front end.

JSON results go to stdout, diagnostics to stderr.  Exit codes: 0 success,
1 invalid input, 2 numerical failure, 3 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cone, instances, oracle, plans, tangent
from .errors import DomainError, MonoplanError, NumericError
from .measures import ScalarMeasure, wasserstein2
from .plans import FiberPlan

EXIT_OK, EXIT_DOMAIN, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2, 3
LEMMAS = ("trunc-supp", "trunc-atoms", "fn-witness", "atom-witness", "convexity")
CSV_HEADER = ("n", "tau_n", "wrho_to_target", "monotone_ok")
DEFAULT_SEED = 0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with usage problems raised instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# -- I/O helpers ---------------------------------------------------------------


def _read_json(path: str):
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path}: invalid JSON ({exc})") from exc


def _load_measure(path: str) -> ScalarMeasure:
    return ScalarMeasure.from_dict(_read_json(path))


def _load_plan(path: str) -> FiberPlan:
    return FiberPlan.from_dict(_read_json(path))


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")


def format_csv(steps) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for s in steps:
        n, tau, wr, ok = s
        w.writerow((int(n), repr(float(tau)), repr(float(wr)), "true" if ok else "false"))
    return buf.getvalue()


def _write_csv(rows, out: str | None) -> None:
    text = format_csv(rows)
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def parse_n_range(text: str) -> list[int]:
    """``"8"`` -> [8]; ``"1:16"`` -> 1..16; ``"1,2,4,8"`` -> that list."""
    try:
        if ":" in text:
            lo, hi = (int(t) for t in text.split(":"))
            ns = list(range(lo, hi + 1))
        else:
            ns = [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad n-range {text!r}") from None
    if not ns or ns[0] < 1 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise argparse.ArgumentTypeError(f"n-range {text!r} must be nonempty, positive, increasing")
    return ns


# -- validation of CLI outputs -------------------------------------------------


def _validate_doc(doc) -> str:
    """Classify and check a JSON document; returns its kind."""
    if not isinstance(doc, dict):
        raise DomainError("top-level JSON value must be an object")
    keys = set(doc)
    if "base" in keys:
        FiberPlan.from_dict(doc)
        return "plan"
    if keys <= {"atoms", "pieces"}:
        ScalarMeasure.from_dict(doc)
        return "measure"
    if keys == {"plan", "distance"}:
        FiberPlan.from_dict(doc["plan"])
        return "projection"
    if keys == {"monotone", "witness"}:
        return "monotonicity"
    if keys == {"sup_tau", "finite", "attained"}:
        return "lambda"
    if keys == {"tangent", "decomposition"}:
        return "tangent"
    if keys == {"valid", "kind"}:
        return "validation"
    if len(keys) == 1 and keys <= {"w2", "w_rho"}:
        return "distance"
    raise DomainError(f"unrecognised document with keys {sorted(keys)}")


# -- commands ------------------------------------------------------------------


def cmd_validate(args) -> int:
    _emit({"valid": True, "kind": _validate_doc(_read_json(args.file))})
    return EXIT_OK


def cmd_w2(args) -> int:
    m1, m2 = _load_measure(args.a), _load_measure(args.b)
    value = oracle.oracle_w2(m1, m2) if args.oracle else wasserstein2(m1, m2)
    _emit({"w2": value})
    return EXIT_OK


def cmd_dist(args) -> int:
    p1, p2 = _load_plan(args.a), _load_plan(args.b)
    value = plans.w_rho_via_adm(p1, p2) if args.oracle else plans.w_rho(p1, p2)
    _emit({"w_rho": value})
    return EXIT_OK


def cmd_monotone(args) -> int:
    _emit(cone.is_monotone(_load_plan(args.plan)).to_dict())
    return EXIT_OK


def cmd_lambda(args) -> int:
    p = _load_plan(args.plan)
    if args.bisect:
        sup = cone.lambda_max_bisection(p)
        out = cone.LambdaInterval(sup, cone.is_monotone(plans.fiber_affine_push(p, 0.0, 1.0, sup)).monotone)
    else:
        out = cone.lambda_max(p)
    _emit(out.to_dict())
    return EXIT_OK


def cmd_project(args) -> int:
    p = _load_plan(args.plan)
    if p.base.pieces:
        print(f"diffuse base binned into {args.bins} atoms", file=sys.stderr)
        p = cone.atomize(p, args.bins)
    if args.oracle:
        proj, dist = oracle.oracle_project(p, min(args.grid_cells, oracle.MAX_PROJECT_CELLS))
    else:
        proj, dist = cone.project_cone(p, args.grid_cells, args.sweep)
    _emit({"plan": proj.to_dict(), "distance": dist})
    return EXIT_OK


def cmd_tangent(args) -> int:
    ok, dec = tangent.tangent_membership(_load_plan(args.plan))
    _emit({"tangent": ok, "decomposition": dec.to_dict() if dec is not None else None})
    return EXIT_OK


def cmd_witness(args) -> int:
    p = _load_plan(args.plan)
    ok, _ = tangent.tangent_membership(p)
    if not ok:
        raise DomainError("plan is not in the tangent cone; no witness sequence exists")
    rows = [s.csv_row() for s in tangent.witness_sequence(p, args.n, args.strategy)]
    _write_csv(rows, args.out)
    return EXIT_OK


def cmd_algebra(args) -> int:
    p = _load_plan(args.plan)
    if args.op == "scale":
        out = plans.scale(p, args.factor)
    elif args.op == "push":
        out = plans.fiber_affine_push(p, args.c0, args.c1, args.c2, args.cells)
    else:
        if args.other is None:
            raise UsageError("algebra add needs a second plan (--other)")
        out = plans.add(p, _load_plan(args.other), strategy=args.strategy)
    _emit(out.to_dict())
    return EXIT_OK


# -- experiments ---------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """One lemma-replication run: a seeded instance evaluated along ns."""

    lemma: str
    ns: tuple[int, ...]
    seed: int
    out: str | None = None
    grid_cells: int = cone.DEFAULT_GRID_CELLS
    bins: int = cone.DEFAULT_BINS

    def __post_init__(self):
        if self.lemma not in LEMMAS:
            raise DomainError(f"unknown lemma {self.lemma!r}")
        if not self.ns or any(b <= a for a, b in zip(self.ns, self.ns[1:])):
            raise DomainError("n-range must be nonempty and increasing")


def _truncation_row(n: int, q: FiberPlan, p: FiberPlan):
    """Row for a truncated plan: half its sup tau (capped at 1) and the check."""
    q_atomic = cone.atomize(q) if q.base.pieces else q
    sup = cone.lambda_max(q_atomic).sup_tau
    tau = min(1.0, 0.5 * sup) if sup > 0 else 0.0
    ok = tau > 0 and cone.is_monotone(plans.fiber_affine_push(q_atomic, 0.0, 1.0, tau)).monotone
    return (n, tau, tangent.refined_w_rho(q, p), ok)


def run_experiment(cfg: ExperimentConfig) -> list[tuple]:
    """Rows (n, tau_n, wrho_to_target, monotone_ok) for the configured lemma."""
    rng = np.random.default_rng(cfg.seed)
    if cfg.lemma == "trunc-supp":
        p = instances.random_atomic_plan(rng)
        p = plans.scale(p, 3.0)
        return [_truncation_row(n, tangent.truncate_support(p, float(n)), p) for n in cfg.ns]
    if cfg.lemma == "trunc-atoms":
        p = instances.random_atomic_plan(rng, max_atoms=8)
        return [_truncation_row(n, tangent.truncate_atoms(p, n), p) for n in cfg.ns]
    if cfg.lemma == "fn-witness":
        base = ScalarMeasure((), ((0.0, 1.0, 1.0),))
        g = instances.random_jump_map(rng)
        return [tangent.witness_function(g, base, n).csv_row() for n in cfg.ns]
    if cfg.lemma == "atom-witness":
        nu, x0, base = instances.random_atom_witness_instance(rng)
        return [tangent.witness_atom(nu, x0, base, n).csv_row() for n in cfg.ns]
    p = instances.random_bounded_tangent_plan(rng)
    while not p.base.atoms:
        p = instances.random_bounded_tangent_plan(rng)
    x0 = p.base.atoms[int(rng.integers(0, len(p.base.atoms)))][0]
    nu = instances.random_atomic_measure(rng, 4, 1.0)
    rows = []
    for n in cfg.ns:
        w1 = tangent.assemble_witness(p, n)
        w2 = tangent.witness_atom(nu, x0, p.base, n)
        rows.append(tangent.convexity_witness(*tangent.align_witnesses(w1, w2)).csv_row())
    return rows


def _seed_from_env() -> int:
    raw = os.environ.get("MONOPLAN_SEED")
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"MONOPLAN_SEED must be an integer, got {raw!r}") from None


def cmd_experiment(args) -> int:
    seed = args.seed if args.seed is not None else _seed_from_env()
    cfg = ExperimentConfig(args.lemma, tuple(args.n), seed, args.out, args.grid_cells, args.bins)
    _write_csv(run_experiment(cfg), cfg.out)
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="monoplan", description="Monotone transport plan geometry toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check a JSON file against the known document formats")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("w2", help="quadratic Wasserstein distance of two measures")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--oracle", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_w2)

    p = sub.add_parser("dist", help="fibered distance w_rho of two plans over the same base")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--oracle", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("monotone", help="monotonicity certificate or violating pair")
    p.add_argument("plan")
    p.set_defaults(func=cmd_monotone)

    p = sub.add_parser("lambda-max", help="supremum of admissible tangent push sizes")
    p.add_argument("plan")
    p.add_argument("--bisect", action="store_true", help="estimate by bisection instead")
    p.set_defaults(func=cmd_lambda)

    p = sub.add_parser("project", help="metric projection onto the monotone cone")
    p.add_argument("plan")
    p.add_argument("--grid-cells", type=int, default=cone.DEFAULT_GRID_CELLS)
    p.add_argument("--bins", type=int, default=cone.DEFAULT_BINS)
    p.add_argument("--sweep", choices=("left", "right"), default="left")
    p.add_argument("--oracle", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("tangent", help="tangent-cone membership and decomposition")
    p.add_argument("plan")
    p.set_defaults(func=cmd_tangent)

    p = sub.add_parser("witness", help="CSV witness sequence for a tangent plan")
    p.add_argument("plan")
    p.add_argument("--n", type=parse_n_range, default=parse_n_range("1:16"))
    p.add_argument("--strategy", choices=("comonotone", "product"), default="comonotone")
    p.add_argument("--out")
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("algebra", help="linear operations on plans")
    p.add_argument("op", choices=("scale", "push", "add"))
    p.add_argument("plan")
    p.add_argument("--other", help="second plan for add")
    p.add_argument("--factor", type=float, default=1.0)
    p.add_argument("--c0", type=float, default=0.0)
    p.add_argument("--c1", type=float, default=0.0)
    p.add_argument("--c2", type=float, default=1.0)
    p.add_argument("--cells", type=int, default=plans.DEFAULT_PUSH_CELLS)
    p.add_argument("--strategy", choices=("comonotone", "product"), default="comonotone")
    p.set_defaults(func=cmd_algebra)

    p = sub.add_parser("experiment", help="lemma-replication experiment emitting CSV")
    p.add_argument("--lemma", choices=LEMMAS, required=True)
    p.add_argument("--n", type=parse_n_range, default=parse_n_range("1:16"))
    p.add_argument("--seed", type=int, default=None, help="overrides MONOPLAN_SEED")
    p.add_argument("--out")
    p.add_argument("--grid-cells", type=int, default=cone.DEFAULT_GRID_CELLS)
    p.add_argument("--bins", type=int, default=cone.DEFAULT_BINS)
    p.set_defaults(func=cmd_experiment)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"monoplan: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, MonoplanError) as exc:
        print(f"monoplan: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
