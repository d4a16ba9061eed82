"""Command-line front end: one subcommand per construction.

Exit status is 0 when every check passes, 1 when a check fails and 2 when
the requested parameters are out of reach (the diagnostic goes to stdout as
JSON).  A JSON config file may supply any flag by its long name; flags
given on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
import time
from collections.abc import Sequence
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, condseed, frames, posbasis_l2, posseq_lp
from .parallel import set_threads
from .report import CertReport, Check, flag

FEASIBILITY_ERRORS = (condseed.Infeasible, posbasis_l2.SeedInfeasible, frames.OracleFailure, frames.RedundancyOverflow)
PLOT_POINTS = 2000
ERROR_FLOOR = 1e-17


# ---------------------------------------------------------------------------
# traces and plots


def write_trace(path: str | Path, trace: Sequence[float]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["prefix_index", "error"])
    for k, e in enumerate(trace, start=1):
        w.writerow([k, repr(float(e))])
    Path(path).write_text(buf.getvalue())


def read_trace(path: str | Path) -> list[tuple[int, float]]:
    with open(path, newline="") as fh:
        return [(int(r["prefix_index"]), float(r["error"])) for r in csv.DictReader(fh)]


def _downsample(points: list[tuple[int, float]], limit: int) -> list[tuple[int, float]]:
    """At most `limit` points: the largest error in each run of consecutive prefixes."""
    if len(points) <= limit:
        return points
    out = []
    edges = np.linspace(0, len(points), limit + 1).astype(int)
    for a, b in itertools.pairwise(edges):
        if b > a:
            chunk = points[a:b]
            out.append((chunk[-1][0], max(e for _, e in chunk)))
    return out


def plot_error_decay(trace: Sequence[tuple[int, float]], title: str = "reconstruction error") -> str:
    """SVG of log10(error) against prefix index; same input gives the same bytes."""
    W, H, L, R, T, B = 640, 400, 70, 20, 30, 50
    pw, ph = W - L - R, H - T - B
    pts = _downsample([(int(k), max(float(e), ERROR_FLOOR)) for k, e in trace], PLOT_POINTS)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W // 2}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{_escape(title)}</text>',
        f'<line x1="{L}" y1="{T + ph}" x2="{L + pw}" y2="{T + ph}" stroke="black"/>',
        f'<line x1="{L}" y1="{T}" x2="{L}" y2="{T + ph}" stroke="black"/>',
        f'<text x="{L + pw // 2}" y="{H - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">prefix index</text>',
        (f'<text x="16" y="{T + ph // 2}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {T + ph // 2})">log10 error</text>'),
    ]
    if pts:
        xs = [k for k, _ in pts]
        ys = [math.log10(e) for _, e in pts]
        x0, x1 = min(xs), max(xs)
        y0, y1 = math.floor(min(ys)), math.ceil(max(ys))
        if y1 == y0:
            y1 = y0 + 1
        sx = (lambda k: L + pw * (k - x0) / (x1 - x0)) if x1 > x0 else (lambda k: L + pw / 2)
        sy = lambda y: T + ph * (y1 - y) / (y1 - y0)
        step = max(1, math.ceil((y1 - y0) / 8))
        for t in range(y0, y1 + 1, step):
            out.append(f'<line x1="{L - 4}" y1="{sy(t):.2f}" x2="{L}" y2="{sy(t):.2f}" stroke="black"/>')
            out.append(f'<text x="{L - 8}" y="{sy(t) + 4:.2f}" text-anchor="end" font-family="sans-serif" font-size="11">{t}</text>')
        for k in (x0, x1):
            out.append(f'<text x="{sx(k):.2f}" y="{T + ph + 16}" text-anchor="middle" font-family="sans-serif" font-size="11">{k}</text>')
        path = " ".join(f"{'M' if i == 0 else 'L'}{sx(k):.2f},{sy(y):.2f}" for i, (k, y) in enumerate(zip(xs, ys)))
        out.append(f'<path d="{path}" fill="none" stroke="steelblue" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# ---------------------------------------------------------------------------
# argument handling


def _schedule(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad schedule {text!r}") from None
    if not vals or any(not 0 < v <= 1 for v in vals):
        raise argparse.ArgumentTypeError("schedule entries must lie in (0, 1]")
    return vals


def _unit_interval(text: str) -> float:
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError("value must lie in (0, 1]")
    return v


def _exponent(text: str) -> float:
    v = float(text)
    if not 1 < v < math.inf:
        raise argparse.ArgumentTypeError("p must satisfy 1 < p < inf")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("value must be a positive integer")
    return v


def _fraction(text: str) -> Fraction:
    v = Fraction(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("value must be positive")
    return v


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of flag values; explicit flags win")
    p.add_argument("--threads", type=_positive_int, help="worker threads (default: POSBASIS_THREADS or all cores)")
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--report", help="write the certification report (JSON) here")
    p.add_argument("--timings", action="store_true", help="include wall-clock timings in the report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="posbasis", description="Non-negative bases, basic sequences and frames, with certificates.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("seed", help="conditional seed system and its certificate")
    _common(s)
    s.add_argument("--p", type=_exponent, default=2.0)
    s.add_argument("--epsilon", type=_unit_interval, default=0.8)
    s.add_argument("--c", type=_unit_interval, default=1.0)
    s.add_argument("--theta", type=float, default=0.9)
    s.add_argument("--restarts", type=_positive_int, default=16)
    s.add_argument("--relaxed-threshold", action="store_true", help="sum condition without the c^-2 factor")
    s.add_argument("--allow-infeasible-report", action="store_true", help="also write the infeasibility diagnostic to --report")

    b = sub.add_parser("basis-l2", help="non-negative basic sequence in L2 spanning the Haar system")
    _common(b)
    b.add_argument("--epsilon-schedule", type=_schedule, default=[0.9, 0.85, 0.8, 0.8])
    b.add_argument("--steps", type=_positive_int)
    b.add_argument("--eps-total", type=float)
    b.add_argument("--theta", type=float, default=0.9)
    b.add_argument("--relaxed-threshold", action="store_true")
    b.add_argument("--samples", type=_positive_int, default=20)
    b.add_argument("--out", help="write the construction state (JSON) here")
    b.add_argument("--allow-infeasible-report", action="store_true")

    q = sub.add_parser("seq-lp", help="non-negative basic sequence in Lp")
    _common(q)
    q.add_argument("--p", type=_exponent, default=3.0)
    q.add_argument("--epsilon-schedule", type=_schedule, default=[0.9, 0.85, 0.8])
    q.add_argument("--steps", type=_positive_int)
    q.add_argument("--eps-total", type=float)
    q.add_argument("--theta", type=float, default=0.9)
    q.add_argument("--tolerance", choices=["exact", "strengthened"], default="exact")
    q.add_argument("--restarts", type=_positive_int, default=8)
    q.add_argument("--samples", type=_positive_int, default=20)
    q.add_argument("--out")
    q.add_argument("--allow-infeasible-report", action="store_true")

    for name, blocks, vectors, span in (("frame", 8, 20, 8), ("uframe", 6, 10, 4)):
        f = sub.add_parser(name, help="Schauder frame from a dictionary" if name == "frame" else "u-frame with regulator")
        _common(f)
        f.add_argument("--space", choices=["haar-l2"], default="haar-l2")
        f.add_argument("--levels", type=int, default=6)
        f.add_argument("--dict", choices=sorted(frames.DICTIONARIES), default="dyadic-indicators")
        f.add_argument("--blocks", type=_positive_int, default=blocks)
        f.add_argument("--theta", type=float, default=0.5)
        f.add_argument("--vectors", type=int, default=vectors, help="number of random test vectors")
        f.add_argument("--span", type=_positive_int, default=span, help="test vectors lie in the span of the first SPAN u's")
        f.add_argument("--tol", type=float, default=1e-8)
        f.add_argument("--out", help="write the frame (JSON) here")
        f.add_argument("--trace", help="write the error trace (CSV) here")
        f.add_argument("--svg", help="write the error decay plot here")
        f.add_argument("--allow-infeasible-report", action="store_true")
        if name == "uframe":
            f.add_argument("--subsets", type=_positive_int, default=50)

    t = sub.add_parser("translates", help="Cesaro expansion of an indicator in translates of 1_(0,1]")
    _common(t)
    t.add_argument("--p", type=_exponent, default=2.0)
    t.add_argument("--left", type=Fraction, default=Fraction(0))
    t.add_argument("--length", type=_fraction, default=Fraction(1, 2))
    g = t.add_mutually_exclusive_group()
    g.add_argument("--M", type=_positive_int)
    g.add_argument("--tol", type=float)
    t.add_argument("--telescope", type=_positive_int, default=20, help="check the telescoping identity up to this n")

    pl = sub.add_parser("plot", help="SVG decay plot from a trace CSV")
    pl.add_argument("trace")
    pl.add_argument("--out", required=True)
    pl.add_argument("--title", default="reconstruction error")
    return parser


def parse(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        cfg = json.loads(Path(args.config).read_text())
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(k.replace("-", "_") for k in cfg if k.replace("-", "_") not in known)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        defaults = {}
        for k, v in cfg.items():
            dest = k.replace("-", "_")
            if dest == "epsilon_schedule" and not isinstance(v, str):
                v = ",".join(str(x) for x in v)
            action = next(a for a in sub._actions if a.dest == dest)
            defaults[dest] = action.type(v) if action.type is not None and isinstance(v, str) else v
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


# ---------------------------------------------------------------------------
# commands


def _emit(report: CertReport, args, t0: float) -> int:
    if args.timings:
        report.timings = {"total": time.perf_counter() - t0}
    if args.report:
        Path(args.report).write_text(report.to_json())
    print(report.summary())
    return 0 if report.passed else 1


def _infeasible(exc: Exception, args) -> int:
    if hasattr(exc, "to_dict"):
        payload = exc.to_dict()
    else:
        payload = {"infeasible": True, "reason": str(exc)}
        payload.update({k: v for k, v in vars(exc).items() if isinstance(v, (int, float, str))})
    payload = {"command": args.command, "error": type(exc).__name__, **payload}
    text = json.dumps(_jsonable(payload), indent=2, allow_nan=False) + "\n"
    if args.report and getattr(args, "allow_infeasible_report", False):
        Path(args.report).write_text(text)
    sys.stdout.write(text)
    return 2


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return str(obj)


def cmd_seed(args) -> CertReport:
    threshold = "relaxed" if args.relaxed_threshold else "strict"
    params = condseed.coeffs_optimized(args.epsilon, args.c, args.p, args.theta, threshold)
    seed = condseed.build_seed(params, "l2" if args.p == 2 else "lp")
    return condseed.certify_seed(seed, restarts=args.restarts, rng_seed=args.rng_seed)


def cmd_basis_l2(args) -> CertReport:
    state = posbasis_l2.build(
        args.epsilon_schedule, args.steps, rng_seed=args.rng_seed, eps_total=args.eps_total,
        theta=args.theta, threshold="relaxed" if args.relaxed_threshold else "strict",
    )
    report = posbasis_l2.verify(state, rng_seed=args.rng_seed, samples=args.samples)
    if args.out:
        posbasis_l2.export(state, args.out, report)
    return report


def cmd_seq_lp(args) -> CertReport:
    state = posseq_lp.build(args.p, args.epsilon_schedule, args.steps, eps_total=args.eps_total,
                            theta=args.theta, tolerance=args.tolerance)
    report = posseq_lp.verify_lp(state, restarts=args.restarts, rng_seed=args.rng_seed, samples=args.samples)
    if args.out:
        posseq_lp.export(state, args.out, report)
    return report


def _frame_outputs(args, frame: frames.Frame, traces: list[np.ndarray], extra: dict | None = None) -> None:
    worst = np.max(np.vstack(traces), axis=0) if traces else np.zeros(0)
    if args.out:
        data = {"frame": frame.to_json(), **(extra or {})}
        Path(args.out).write_text(json.dumps(data, separators=(",", ":"), allow_nan=False) + "\n")
    if args.trace:
        write_trace(args.trace, worst)
    if args.svg:
        title = "worst error over test vectors"
        Path(args.svg).write_text(plot_error_decay(list(enumerate(worst.tolist(), start=1)), title))


def _frame_params(args) -> dict:
    return {"space": args.space, "levels": args.levels, "dict": args.dict, "theta": args.theta, "span": args.span}


def cmd_frame(args) -> CertReport:
    frame, pert = frames.haar_frame(args.levels, args.blocks, args.dict, args.theta)
    span = min(args.span, len(pert.u))
    xs = frames.random_span_vectors(pert.u, span, args.vectors, args.rng_seed)
    report = frames.verify_frame(frame, xs, args.tol)
    report.params.update(_frame_params(args))
    report.rng_seed = args.rng_seed
    _perturbation_checks(report, pert)
    _frame_outputs(args, frame, report.artifacts["traces"])
    return report


def cmd_uframe(args) -> CertReport:
    frame, reg, pert = frames.haar_uframe(args.levels, args.blocks, args.dict, args.theta)
    span = min(args.span, len(pert.u))
    xs = frames.random_span_vectors(pert.u, span, args.vectors, args.rng_seed)
    report = frames.verify_uframe(frame, reg, xs, subsets=args.subsets, rng_seed=args.rng_seed)
    report.params.update(_frame_params(args))
    _perturbation_checks(report, pert)
    traces = frames.error_traces(frame, xs) if (args.trace or args.svg) else []
    _frame_outputs(args, frame, traces, {"regulator": reg.to_json()})
    return report


def _perturbation_checks(report: CertReport, pert: frames.Perturbation) -> None:
    report.add(Check("perturbation", "sum_j ||e_j - u_j|| ||e*_j|| <= theta < 1", pert.criterion, pert.theta, "le", 0.0))
    margin = min((t - e for e, t in zip(pert.errors, pert.eps)), default=1.0)
    report.add(Check("perturbation_eps", "||e_j - u_j|| < eps_j for every j (smallest margin)", margin, 0.0, "ge", 0.0))
    report.observations["perturbation_errors"] = pert.errors


def cmd_translates(args) -> CertReport:
    M = args.M
    if M is None and args.tol is None:
        M = 200
    te = frames.translate_dictionary_expansion(args.left, args.length, args.p, tol=args.tol, M=M)
    rep = CertReport(
        "translates",
        {"p": args.p, "left": str(args.left), "length": str(args.length), "M": te.M, "tol": args.tol, "telescope": args.telescope},
        rng_seed=args.rng_seed,
    )
    r = te.remainder
    rep.add(Check("residual_norm", "||A_M - 1_(a,a+l]||_p equals M^((1-p)/p) r^(1/p)", te.residual_norm(), te.error, "eq", 1e-12))
    if args.tol is not None:
        rep.add(Check("tolerance", "residual at most the requested tolerance", te.residual_norm(), args.tol, "le", 1e-15))
    if r:
        rep.add(flag("cesaro_identity", "A_M = 1_(0,r] - (1/M) sum 1_(n+1,n+1+r] (rational arithmetic)",
                     frames.cesaro_identity_exact(te.M, r)))
        rep.add(flag("telescoping", "sum_{j<=n} T_j(1 - T_r 1) = 1_(0,r] - 1_(n+1,n+1+r] for n <= telescope",
                     all(frames.telescoping_holds(n, r) for n in range(args.telescope + 1))))
    rep.add(flag("positivity", "every translate T_l 1_(0,1] is non-negative", all(x.is_nonnegative() for x in te.items())))
    rep.observations["terms"] = len(te.shifts)
    return rep


COMMANDS = {
    "seed": cmd_seed,
    "basis-l2": cmd_basis_l2,
    "seq-lp": cmd_seq_lp,
    "frame": cmd_frame,
    "uframe": cmd_uframe,
    "translates": cmd_translates,
}


def cmd_plot(args) -> int:
    Path(args.out).write_text(plot_error_decay(read_trace(args.trace), args.title))
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = parse(argv)
    if args.command == "plot":
        return cmd_plot(args)
    set_threads(args.threads)
    t0 = time.perf_counter()
    try:
        report = COMMANDS[args.command](args)
    except FEASIBILITY_ERRORS as exc:
        return _infeasible(exc, args)
    finally:
        set_threads(None)
    return _emit(report, args, t0)


run = main


if __name__ == "__main__":
    sys.exit(main())
