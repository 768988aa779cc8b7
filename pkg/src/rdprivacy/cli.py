"""Command-line front end.

Exit codes: 0 success, 2 infeasible distortion or equivocation target,
3 invalid input (model, database, flags).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import (InfeasibleError, InputError, PlanStateError, RDPrivacyError, SizeError,
                     UnsupportedModelError)
from .oracle import brute_force_rde
from .prob import Alphabet, JointPmf, conditional_entropy, entropy, marginalize
from .rd import distortion_bounds, rate_distortion
from .rde import METHODS, dispatch_special_case, gamma_of_d, tradeoff_region
from .sanitize import SanitizationPlan, audit, sanitize, synthesize_channel
from .source import ingest_csv, load_spec_file, spec_schema
from .successive import check_successive

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 2, 3
COMMANDS = ("validate", "rd", "gamma", "tradeoff", "sanitize", "successive", "audit")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags, which would read as "infeasible"
    def error(self, message):
        raise InputError(message)


def _floats(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise InputError(f"values must be finite, got {text!r}")
    return vals


def _grid(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"grid must be a:b:n, got {text!r}")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InputError(f"grid must be a:b:n, got {text!r}") from None
    if n < 1 or not (math.isfinite(a) and math.isfinite(b)):
        raise InputError(f"grid needs finite ends and n >= 1, got {text!r}")
    return [float(v) for v in np.linspace(a, b, n)]


def _pair(text: str) -> tuple[float, float]:
    vals = _floats(text)
    if len(vals) != 2:
        raise InputError(f"expected D,E, got {text!r}")
    return vals[0], vals[1]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rdprivacy", description="Utility-privacy tradeoffs for databases.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("--model", required=True, help="model file (JSON or YAML)")
        c.add_argument("--output", help="write the result here instead of stdout")
        c.add_argument("--format", choices=("json", "csv"), default="json")
        c.add_argument("--seed", type=int, default=0)
        c.add_argument("--restarts", type=int, default=16)
        c.add_argument("--method", choices=METHODS, default="auto")
        if name in ("rd", "gamma", "tradeoff", "sanitize"):
            c.add_argument("--distortion", type=_floats, help="D or D_1,...,D_L")
            c.add_argument("--d-grid", type=_grid, help="a:b:n")
        if name in ("tradeoff", "sanitize"):
            c.add_argument("--equivocation", type=float)
            c.add_argument("--e-grid", type=_grid, help="a:b:n")
        if name in ("gamma", "tradeoff"):
            c.add_argument("--oracle", action="store_true",
                           help="compare against the brute-force oracle where alphabets allow")
        if name in ("sanitize", "audit"):
            c.add_argument("--database", required=True, help="CSV database")
            c.add_argument("--plan", help="plan file to write (sanitize) or read (audit)")
        if name == "audit":
            c.add_argument("--sanitized", required=True, help="sanitized CSV database")
        if name == "successive":
            c.add_argument("--coarse", type=_pair, required=True, help="D,E")
            c.add_argument("--fine", type=_pair, required=True, help="D,E")
    return p


# ---------------------------------------------------------------------------
# helpers

def _config(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items())}
    cfg["backend"] = _kernels.BACKEND
    return cfg


def _d_values(args, spec) -> list:
    if getattr(args, "distortion", None) is not None and getattr(args, "d_grid", None) is not None:
        raise InputError("give either --distortion or --d-grid, not both")
    if getattr(args, "d_grid", None) is not None:
        return [[v] * spec.utility.L for v in args.d_grid]
    if getattr(args, "distortion", None) is not None:
        return [args.distortion]
    return [list(spec.utility.bounds)]


def _e_values(args, spec) -> list[float]:
    if args.equivocation is not None and args.e_grid is not None:
        raise InputError("give either --equivocation or --e-grid, not both")
    if args.e_grid is not None:
        return args.e_grid
    return [args.equivocation if args.equivocation is not None else spec.privacy.E]


def _num(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _solution_meta(sol, D, E=None) -> dict:
    meta = dict(sol.meta)
    meta["distortion_slack"] = [d_l - x for d_l, x in zip(D, sol.distortion)]
    if E is not None:
        meta["equivocation_slack"] = sol.equivocation - E
    return meta


def _oracle(spec, D, E, R) -> dict:
    try:
        bf = brute_force_rde(spec, D, E, q=32)
    except (SizeError, InputError) as exc:
        return {"skipped": str(exc)}
    return {"brute_force": _num(bf), "gap": _num(bf - R) if math.isfinite(bf) else None, "q": 32}


def _csv(rows: list[dict], L: int) -> str:
    cols = [f"D_{l + 1}" for l in range(L)] + ["E", "R", "feasible"] + \
        [f"distortion_{l + 1}" for l in range(L)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    fmt = lambda v: "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(v) \
        if isinstance(v, float) else str(v)
    for r in rows:
        dist = r.get("distortion") or [None] * L
        w.writerow([fmt(float(d)) for d in r["D"]] + [fmt(r.get("E")), fmt(r.get("R")),
                                                      str(r["feasible"]).lower()]
                   + [fmt(None if d is None else float(d)) for d in dist])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands

def _cmd_validate(args, spec):
    joint = spec.joint
    pub, priv, z = spec.roles.public, spec.roles.private, spec.side_axis.name
    return {
        "attributes": list(spec.roles.all),
        "public": list(pub), "private": list(priv), "encoded": list(spec.roles.encoded),
        "side_info": z if spec.has_side_info else None,
        "constraints": spec.utility.L,
        "D": list(spec.utility.bounds), "E": spec.privacy.E,
        "case": dispatch_special_case(spec),
        "H_private_given_z": conditional_entropy(joint, priv, z),
        "H_private_given_public_z": _h_given_public(spec),
        "H_joint": entropy(joint),
    }, None


def _h_given_public(spec) -> float:
    priv_only = tuple(a for a in spec.roles.private if a not in spec.roles.public)
    if not priv_only:
        return 0.0
    return conditional_entropy(spec.joint, priv_only, spec.roles.public + (spec.side_axis.name,))


def _public_prior(spec) -> JointPmf:
    return marginalize(spec.joint, spec.roles.public)


def _cmd_rd(args, spec):
    if spec.utility.L != 1:
        raise InputError("rd uses a single distortion constraint; the model has several")
    prior = _public_prior(spec)
    flat = JointPmf.from_weights(
        [Alphabet("public", [",".join(t) for t in spec.public_tuples()])],
        prior.mass.ravel())
    d = spec.distortion_matrices()[0]
    rows, pts = [], []
    for D in _d_values(args, spec):
        pt = rate_distortion(flat, d, D[0])
        pts.append(pt)
        rows.append({"D": [D[0]], "R": pt.R, "feasible": True, "distortion": [pt.distortion],
                     "slope": pt.slope, "iterations": pt.iterations,
                     "E": entropy(prior) - pt.R})
    dmin, dmax = distortion_bounds(flat, d)
    return rows, {"D_min": dmin, "D_max": dmax}


def _cmd_gamma(args, spec):
    rows = []
    kw = dict(method=args.method, restarts=args.restarts, seed=args.seed)
    for D in _d_values(args, spec):
        g, sol = gamma_of_d(spec, D, **kw)
        row = {"D": list(D), "E": g, "R": sol.rate, "feasible": True,
               "distortion": list(sol.distortion), "solver": _solution_meta(sol, D)}
        if args.oracle:
            row["oracle"] = _oracle(spec, D, g, sol.rate)
        rows.append(row)
    return rows, None


def _cmd_tradeoff(args, spec):
    Ds, Es = _d_values(args, spec), _e_values(args, spec)
    kw = dict(method=args.method, restarts=args.restarts, seed=args.seed)
    points = tradeoff_region(spec, Ds, Es, **kw)
    if len(points) == 1 and not points[0].feasible:
        raise InfeasibleError(points[0].reason)
    rows = []
    for pt in points:
        row = {"D": list(pt.D), "E": pt.E, "R": _num(pt.R), "feasible": pt.feasible}
        if pt.feasible:
            row["distortion"] = list(pt.solution.distortion)
            row["equivocation"] = pt.solution.equivocation
            row["solver"] = _solution_meta(pt.solution, pt.D, pt.E)
            if args.oracle:
                row["oracle"] = _oracle(spec, pt.D, pt.E, pt.R)
        else:
            row["reason"] = pt.reason
        rows.append(row)
    return rows, None


def _read_db(path, spec):
    text = Path(path).read_text(encoding="utf-8")
    return ingest_csv(text, spec_schema(spec))


def _cmd_sanitize(args, spec):
    Ds, Es = _d_values(args, spec), _e_values(args, spec)
    if len(Ds) != 1 or len(Es) != 1:
        raise InputError("sanitize takes a single operating point")
    db = _read_db(args.database, spec)
    plan = synthesize_channel(spec, Ds[0], Es[0], seed=args.seed, method=args.method,
                              restarts=args.restarts)
    sdb = sanitize(db, plan)
    if args.plan:
        Path(args.plan).write_text(plan.dumps() + "\n", encoding="utf-8")
    return {"rows": sdb.n, "columns": list(sdb.names), "plan": plan.to_dict(),
            "sanitized_csv": sdb.to_csv()}, None


def _cmd_audit(args, spec):
    db = _read_db(args.database, spec)
    plan = SanitizationPlan.loads(Path(args.plan).read_text(encoding="utf-8")) if args.plan else None
    outputs = {a.name: a for a in (plan.channel.output_axes if plan else spec.reconstruction)}
    sdb = ingest_csv(Path(args.sanitized).read_text(encoding="utf-8"), outputs)
    return audit(db, sdb, spec, plan).to_dict(), None


def _cmd_successive(args, spec):
    if spec.K != 1 or spec.utility.L != 1:
        raise UnsupportedModelError("successive disclosure needs one attribute and one constraint")
    prior = JointPmf(spec.attribute_alphabets, spec.joint.mass.sum(axis=-1), tol=1e-9)
    plan = check_successive(prior, spec.distortion_matrices()[0], args.coarse, args.fine)
    return plan.to_dict(), None


HANDLERS = {"validate": _cmd_validate, "rd": _cmd_rd, "gamma": _cmd_gamma,
            "tradeoff": _cmd_tradeoff, "sanitize": _cmd_sanitize,
            "successive": _cmd_successive, "audit": _cmd_audit}


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def dispatch(args) -> tuple[int, str]:
    """Run one command; returns (exit status, document text).

    For ``sanitize`` the sanitized CSV goes to ``--output`` (or into the
    document when no path is given); every other command writes its
    document to ``--output`` when set.
    """
    spec = load_spec_file(args.model)
    result, extra = HANDLERS[args.command](args, spec)
    if args.format == "csv" and args.command in ("rd", "gamma", "tradeoff"):
        return EXIT_OK, _csv(result, spec.utility.L)
    if args.command == "sanitize" and args.output:
        Path(args.output).write_text(result.pop("sanitized_csv"), encoding="utf-8")
    doc = {"command": args.command, "config": _config(args), "result": result}
    if extra:
        doc["bounds"] = extra
    return EXIT_OK, json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def main(argv=None) -> int:
    args = None
    try:
        args = build_parser().parse_args(argv)
        status, text = dispatch(args)
    except (InfeasibleError, PlanStateError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InputError, OSError, UnicodeDecodeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RDPrivacyError as exc:  # pragma: no cover - every error has a class above
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.output and args.command != "sanitize":
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
