"""Command-line driver.

Exit codes: 0 converged (or oracle/check finished), 2 diverged, max time
or suspected cycle, 3 failed, 4 bad input.  ``compare`` exits 0 when
every solver equilibrium matches an oracle point and 1 otherwise.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (
    IntegratorConfig,
    Status,
    grid_starts,
    integrate,
    multistart,
    random_starts,
    trajectory_csv,
    trajectory_dict,
)
from .expr import ExprError
from .kkt import is_local_min, oracle_enumerate
from .lp import LinearProgram, LpError, check_corollary_hypotheses, lp_text, parse_lp, vertex_oracle
from .model import ProblemError, check_qualifications, parse_problem

EXIT_OK, EXIT_MISMATCH, EXIT_STOPPED, EXIT_FAILED, EXIT_INPUT = 0, 1, 2, 3, 4
log = logging.getLogger("kktflow")


class InputError(Exception):
    pass


# --- JSON with 17 significant digits -------------------------------------------


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return "null"
        text = format(v + 0.0, ".17g")
        return text if any(ch in text for ch in ".en") else text + ".0"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) or v is None for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def write_atomic(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- input helpers ----------------------------------------------------------------


def _vector(text: str, n: int | None = None) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise InputError(f"bad vector {text!r}; expected comma-separated numbers") from None
    if not np.all(np.isfinite(v)):
        raise InputError(f"vector {text!r} has non-finite entries")
    if n is not None and len(v) != n:
        raise InputError(f"vector {text!r} has {len(v)} entries; the problem has {n} variables")
    return v


def _range(text: str) -> tuple[float, float]:
    lo, sep, hi = text.partition(":")
    try:
        lo_f, hi_f = float(lo), float(hi)
    except ValueError:
        raise InputError(f"bad range {text!r}; expected lo:hi") from None
    if not sep or not lo_f < hi_f:
        raise InputError(f"bad range {text!r}; expected lo:hi with lo < hi")
    return lo_f, hi_f


def load_problem(path: str, allow_nonsmooth: bool = False):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise InputError(f"cannot read {path}: {err.strerror}") from None
    first = next((ln.split("#", 1)[0].strip() for ln in text.splitlines() if ln.split("#", 1)[0].strip()), "")
    try:
        if first == "lp":
            return parse_lp(text)
        return parse_problem(text, allow_nonsmooth=allow_nonsmooth)
    except (ProblemError, LpError, ExprError) as err:
        raise InputError(f"{path}: {err}") from None


def _problem_text(p) -> str:
    return lp_text(p) if isinstance(p, LinearProgram) else p.to_text()


def _config(args) -> IntegratorConfig:
    kw = {}
    for flag, name in (("band", "band"), ("tol_eq", "tol_eq"), ("t_max", "t_max"), ("escape", "escape_radius")):
        v = getattr(args, flag, None)
        if v is not None:
            kw[name] = v
    try:
        return IntegratorConfig(**kw)
    except ValueError as err:
        raise InputError(str(err)) from None


def _config_dict(cfg: IntegratorConfig) -> dict:
    return {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}


def _starts(args, n_vars: int):
    starts = [_vector(s, n_vars) for s in args.start or []]
    lo, hi = _range(args.box) if getattr(args, "box", None) else (-3.0, 3.0)
    if args.starts_grid is not None:
        if args.starts_grid < 1:
            raise InputError("--starts-grid needs a positive count")
        starts += grid_starts(lo, hi, args.starts_grid, n_vars)
    if args.starts_random:
        seed, sep, count = args.starts_random.partition(":")
        try:
            seed_i, count_i = int(seed), int(count)
        except ValueError:
            raise InputError("--starts-random expects seed:count") from None
        if not sep or count_i < 1:
            raise InputError("--starts-random expects seed:count with count >= 1")
        starts += random_starts(seed_i, count_i, n_vars, lo, hi)
    if not starts:
        raise InputError("no start points given (use --start, --starts-grid or --starts-random)")
    return starts


def _report_header(command, args, p) -> dict:
    return {
        "kktflow_version": __version__,
        "command": command,
        "problem_file": os.path.basename(args.problem),
        "problem": _problem_text(p),
    }


def _finish_report(report: dict, args) -> None:
    report["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    text = dumps(report)
    if args.out_report:
        write_atomic(args.out_report, text)
    else:
        sys.stdout.write(text)


def _status_code(statuses) -> int:
    statuses = list(statuses)
    if any(s is Status.FAILED for s in statuses):
        return EXIT_FAILED
    if all(s is Status.CONVERGED for s in statuses):
        return EXIT_OK
    return EXIT_STOPPED


# --- subcommands ----------------------------------------------------------------


def cmd_solve(args) -> int:
    p = load_problem(args.problem, args.allow_nonsmooth)
    if args.print_problem:
        sys.stderr.write(_problem_text(p))
    x0 = _vector(args.start[0], p.n_vars) if args.start else None
    if x0 is None or len(args.start) > 1:
        raise InputError("solve needs exactly one --start")
    cfg = _config(args)
    tr = integrate(p, x0, cfg)
    if args.out_traj:
        write_atomic(args.out_traj, trajectory_csv(tr))
    report = _report_header("solve", args, p)
    report["config"] = _config_dict(cfg)
    report["trajectory"] = trajectory_dict(tr)
    _finish_report(report, args)
    log.info("status %s: %s", tr.status.value, tr.reason)
    return _status_code([tr.status])


def _run_multistart(args, p, command):
    cfg = _config(args)
    starts = _starts(args, p.n_vars)
    res = multistart(p, starts, cfg, workers=args.workers)
    report = _report_header(command, args, p)
    report["config"] = _config_dict(cfg)
    report["trajectories"] = [trajectory_dict(t) for t in res.trajectories]
    report["equilibria"] = [
        {"x": e.x, "starts": e.starts, "certificate": e.certificate.to_dict()} for e in res.equilibria
    ]
    if args.out_traj:
        base = Path(args.out_traj)
        for k, t in enumerate(res.trajectories):
            write_atomic(base.with_name(f"{base.stem}_{k:03d}{base.suffix or '.csv'}"), trajectory_csv(t))
    return res, report


def cmd_multistart(args) -> int:
    p = load_problem(args.problem, args.allow_nonsmooth)
    if args.print_problem:
        sys.stderr.write(_problem_text(p))
    res, report = _run_multistart(args, p, "multistart")
    _finish_report(report, args)
    return _status_code(t.status for t in res.trajectories)


def cmd_lp_solve(args) -> int:
    p = load_problem(args.problem)
    if not isinstance(p, LinearProgram):
        raise InputError(f"{args.problem} is not in the LP format (first line must be 'lp')")
    if args.print_problem:
        sys.stderr.write(lp_text(p))
    res, report = _run_multistart(args, p, "lp-solve")
    try:
        report["vertex_oracle"] = vertex_oracle(p).to_dict()
    except LpError as err:
        report["vertex_oracle"] = {"status": "error", "message": str(err)}
    _finish_report(report, args)
    return _status_code(t.status for t in res.trajectories)


def cmd_oracle(args) -> int:
    p = load_problem(args.problem, args.allow_nonsmooth)
    if isinstance(p, LinearProgram):
        from .lp import lp_to_problem

        p = lp_to_problem(p)
    lo, hi = _range(args.box)
    if args.grid < 1:
        raise InputError("--grid must be positive")
    certs = oracle_enumerate(p, (lo, hi), args.grid, args.newton_iters)
    points = []
    for c in certs:
        d = c.to_dict()
        d["local_min_sampled"] = bool(is_local_min(p, c.x)[0])
        points.append(d)
    report = _report_header("oracle", args, p)
    report["box"] = [lo, hi]
    report["grid"] = args.grid
    report["points"] = points
    _finish_report(report, args)
    return EXIT_OK


def cmd_check(args) -> int:
    p = load_problem(args.problem, args.allow_nonsmooth)
    x = _vector(args.at, p.n_vars)
    rep = check_corollary_hypotheses(p, x) if isinstance(p, LinearProgram) else check_qualifications(p, x)
    report = _report_header("check", args, p)
    report["qualification"] = rep.to_dict()
    _finish_report(report, args)
    return EXIT_OK


def _points(report: dict, key: str) -> list[np.ndarray]:
    """Points of a solver report (equilibria or one trajectory) or an oracle report."""
    if "equilibria" in report:
        return [np.asarray(e["x"], dtype=float) for e in report["equilibria"]]
    if "points" in report:
        return [np.asarray(e["x"], dtype=float) for e in report["points"]]
    tr = report.get("trajectory")
    if isinstance(tr, dict) and "status" in tr:
        return [np.asarray(tr["x"], dtype=float)] if tr["status"] == "converged" else []
    raise InputError(f"{key} report has no recognisable point list")


def cmd_compare(args) -> int:
    reports = []
    for path in (args.solver_report, args.oracle_report):
        try:
            reports.append(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as err:
            raise InputError(f"cannot read report {path}: {err}") from None
    try:
        solver, oracle = _points(reports[0], "solver"), _points(reports[1], "oracle")
    except (KeyError, TypeError, ValueError) as err:
        raise InputError(f"malformed report: {err}") from None
    unmatched_solver = [x for x in solver if not any(np.linalg.norm(x - y) <= args.dist for y in oracle)]
    unmatched_oracle = [y for y in oracle if not any(np.linalg.norm(x - y) <= args.dist for x in solver)]
    print(f"solver points: {len(solver)}, oracle points: {len(oracle)}")
    for x in unmatched_solver:
        print("solver only: " + ", ".join(format(v, ".17g") for v in x))
    for y in unmatched_oracle:
        print("oracle only: " + ", ".join(format(v, ".17g") for v in y))
    return EXIT_OK if not unmatched_solver else EXIT_MISMATCH


# --- argument parsing ----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="kktflow", description="Constrained optimisation by following a discontinuous flow.")
    ap.add_argument("--version", action="version", version=f"kktflow {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, starts=True):
        sp.add_argument("problem")
        sp.add_argument("--out-report")
        sp.add_argument("--print-problem", action="store_true")
        sp.add_argument("--allow-nonsmooth", action="store_true")
        if starts:
            sp.add_argument("--start", action="append", help="start point x1,x2,...")
            sp.add_argument("--band", type=float)
            sp.add_argument("--tol-eq", type=float)
            sp.add_argument("--t-max", type=float)
            sp.add_argument("--escape", type=float)
            sp.add_argument("--out-traj")

    sp = sub.add_parser("solve", help="integrate from one start")
    common(sp)
    sp.set_defaults(func=cmd_solve)
    for name, func in (("multistart", cmd_multistart), ("lp-solve", cmd_lp_solve)):
        sp = sub.add_parser(name, help="integrate from many starts")
        common(sp)
        sp.add_argument("--starts-grid", type=int)
        sp.add_argument("--starts-random")
        sp.add_argument("--box", help="lo:hi range for generated starts (default -3:3)")
        sp.add_argument("--workers", type=int)
        sp.set_defaults(func=func)
    sp = sub.add_parser("oracle", help="enumerate KKT points by Newton from a lattice")
    common(sp, starts=False)
    sp.add_argument("--box", default="-2:2")
    sp.add_argument("--grid", type=int, default=5)
    sp.add_argument("--newton-iters", type=int, default=50)
    sp.set_defaults(func=cmd_oracle)
    sp = sub.add_parser("check", help="report constraint qualifications at a point")
    common(sp, starts=False)
    sp.add_argument("--at", required=True)
    sp.set_defaults(func=cmd_check)
    sp = sub.add_parser("compare", help="match solver equilibria against oracle points")
    sp.add_argument("solver_report")
    sp.add_argument("oracle_report")
    sp.add_argument("--dist", type=float, default=1e-4)
    sp.set_defaults(func=cmd_compare)
    return ap


def _setup_logging():
    level = os.environ.get("KKTFLOW_LOG", "off").lower()
    levels = {"off": logging.CRITICAL + 1, "info": logging.INFO, "debug": logging.DEBUG}
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("kktflow %(levelname)s: %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(levels.get(level, levels["off"]))
    log.propagate = False


_VALUE_FLAGS = {"--start", "--box", "--at", "--band", "--tol-eq", "--t-max", "--escape", "--dist"}


def _glue_negative_values(argv):
    """Let ``--box -2:2`` and ``--start -1,0`` through argparse by rewriting them as ``--flag=value``."""
    out, k = [], 0
    while k < len(argv):
        tok = argv[k]
        if tok in _VALUE_FLAGS and k + 1 < len(argv) and argv[k + 1].startswith("-"):
            out.append(f"{tok}={argv[k + 1]}")
            k += 2
        else:
            out.append(tok)
            k += 1
    return out


def main(argv=None) -> int:
    _setup_logging()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(_glue_negative_values(argv))
        return args.func(args)
    except InputError as err:
        sys.stderr.write(f"kktflow: error: {err}\n")
        return EXIT_INPUT
    except ValueError as err:
        sys.stderr.write(f"kktflow: error: {err}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
