"""Command-line front end.

Subcommands::

    simulate   run a scenario and write the trajectory as CSV
    figure     write the data behind fig1 / fig2 / fig3
    analyze    tv | oscillation | residual | bound diagnostics
    verify     run the acceptance criteria

Exit codes: 0 success, 1 failure or solver error, 2 the solution cannot be
continued past a singular instant, 64 usage or parse error, 65 invalid
scenario.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys as _sys
from dataclasses import fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analysis
from .core_types import ScenarioConfig, Trajectory, TrajectorySegment
from .errors import FilippovError, InvalidConfig
from .integrator import solve
from .systems import SYSTEM_IDS, adaptive_grid, build_system

EXIT_OK, EXIT_FAIL, EXIT_NO_LIMIT, EXIT_USAGE, EXIT_INVALID = 0, 1, 2, 64, 65

SCENARIO_KEYS = ("system", "t0", "x0", "T", "t_end", "k1", "k2", "rtol", "atol",
                 "min_step_fraction", "event_tol", "conv_radius", "output")
DEFAULTS = dict(system="example1", x0="1,0")


class ParseError(Exception):
    pass


# ---------------------------------------------------------------------------
# scenario files


def parse_scenario_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; unknown keys are rejected."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCENARIO_KEYS:
            raise ParseError(f"line {n}: unknown key {key!r}")
        if key in out:
            raise ParseError(f"line {n}: duplicate key {key!r}")
        out[key] = value
    return out


def _floats(text: str, what: str) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip() != "")
    except ValueError:
        raise ParseError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise ParseError(f"{what}: empty list")
    return vals


def _float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{what}: expected a number, got {text!r}") from None


def scenario_from_mapping(values: dict) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from string values (file keys)."""
    merged = dict(DEFAULTS)
    merged.update({k: v for k, v in values.items() if v is not None})
    kwargs = {"system_id": merged.pop("system"), "x0": _floats(str(merged.pop("x0")), "x0")}
    if "output" in merged:
        kwargs["output"] = merged.pop("output")
    for key, v in merged.items():
        kwargs[key] = _float(str(v), key)
    if kwargs["system_id"] not in SYSTEM_IDS:
        raise InvalidConfig(f"unknown system {kwargs['system_id']!r}; choose from {', '.join(SYSTEM_IDS)}")
    return ScenarioConfig(**kwargs)


def scenario_to_text(sc: ScenarioConfig) -> str:
    lines = [f"system = {sc.system_id}", "x0 = " + ",".join(repr(v) for v in sc.x0)]
    for f in fields(sc):
        if f.name in ("system_id", "x0", "continuity_tol"):
            continue
        v = getattr(sc, f.name)
        if v is not None:
            lines.append(f"{f.name} = {v!r}" if not isinstance(v, str) else f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CSV


def _fmt(v: float) -> str:
    return repr(float(v))


def trajectory_rows(traj: Trajectory, stride: int = 1):
    """``(t, x, mode, segment)`` rows; ``stride`` thins samples but keeps segment ends."""
    for i, seg in enumerate(traj.segments):
        idx = np.arange(0, seg.t.size, max(1, stride))
        if idx[-1] != seg.t.size - 1:
            idx = np.append(idx, seg.t.size - 1)
        tl = seg.t[idx].tolist()
        xl = seg.x[idx].tolist()
        for t, x in zip(tl, xl):
            yield t, x, seg.mode, i


def write_trajectory_csv(traj: Trajectory, stream, stride: int = 1):
    n = traj.dimension
    stream.write("t," + ",".join(f"x{i + 1}" for i in range(n)) + ",mode,segment\n")
    buf = []
    for t, x, mode, seg in trajectory_rows(traj, stride):
        buf.append(f"{t!r}," + ",".join(repr(v) for v in x) + f",{mode},{seg}\n")
        if len(buf) >= 100_000:
            stream.write("".join(buf))
            buf.clear()
    stream.write("".join(buf))


def read_trajectory_csv(path) -> Trajectory:
    """Inverse of :func:`write_trajectory_csv` (segments end at their last sample)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        n = len(header) - 3
        if n < 1 or header[0] != "t" or header[-2:] != ["mode", "segment"] or \
                header[1:-2] != [f"x{i + 1}" for i in range(n)]:
            raise ParseError(f"{path}: bad header {header!r}")
        groups: dict = {}
        order = []
        for k, row in enumerate(reader, 2):
            if len(row) != n + 3:
                raise ParseError(f"{path}:{k}: expected {n + 3} fields")
            try:
                seg = int(row[-1])
                vals = [float(v) for v in row[:n + 1]]
            except ValueError:
                raise ParseError(f"{path}:{k}: malformed number") from None
            if seg not in groups:
                groups[seg] = (row[-2], [])
                order.append(seg)
            groups[seg][1].append(vals)
    if not order:
        raise ParseError(f"{path}: no samples")
    segs = []
    for s in order:
        mode, vals = groups[s]
        a = np.array(vals)
        segs.append(TrajectorySegment(a[:, 0], a[:, 1:], mode))
    return Trajectory(tuple(segs))


def write_table(header: Sequence[str], rows, stream):
    stream.write(",".join(header) + "\n")
    for r in rows:
        stream.write(",".join(_fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in r) + "\n")


def _open_out(path: Optional[str]):
    if path is None or path == "-":
        return _sys.stdout, False
    return open(path, "w", encoding="utf-8", newline="\n"), True


# ---------------------------------------------------------------------------
# figures


def figure_fig1(T: float = 1.0, k1: float = 1.5, k2: float = 1.1):
    """Example 1 oracle from x0 = (1, 0), t0 = 0 on [0, T], limit 0 appended at T."""
    _, oracle = build_system("example1", T, k1, k2)
    t = np.concatenate([np.linspace(0.0, 0.99 * T, 2000, endpoint=False),
                        adaptive_grid(0.99 * T, T * (1 - 1e-4), lambda s: 0.1 * (T - s) ** 2)])
    x = oracle.solution(0.0, [1.0, 0.0], t)
    return ["t", "x1", "x2"], np.column_stack([np.append(t, T), np.vstack([x, [0.0, 0.0]])])


def figure_fig2(T: float = 1.0):
    """Example 2 oracle from x0 = (1, 0), t0 = 0 on [0, T) (no value at T)."""
    _, oracle = build_system("example2", T)
    tau = np.geomspace(1e-6 * T, T, 4000)[::-1]
    t = T - tau
    t[0] = 0.0
    x = oracle.solution(0.0, [1.0, 0.0], t)
    return ["t", "x1", "x2"], np.column_stack([t, x])


def figure_fig3(t_end: float = 6.0):
    """Zero classical solution and the periodic generalized x2 of Example 3."""
    _, oracle = build_system("example3")
    parts = []
    for k in range(int(math.ceil(t_end / 2))):
        a, b = 2.0 * k, min(2.0 * k + 2.0, t_end)
        g = adaptive_grid(a, b, lambda s: min(2e-3, 0.25 * max(abs(s - 2 * round(s / 2)), 1e-2) ** 2))
        parts.append(g if k == 0 else g[1:])
    t = np.concatenate(parts)
    return ["t", "classical_x2", "generalized_x2"], np.column_stack([t, np.zeros_like(t), oracle(t)[:, 1]])


FIGURES = {"fig1": figure_fig1, "fig2": figure_fig2, "fig3": figure_fig3}


# ---------------------------------------------------------------------------
# commands


def _scenario_from_args(args) -> ScenarioConfig:
    values = {}
    if getattr(args, "scenario", None):
        try:
            values = parse_scenario_text(Path(args.scenario).read_text(encoding="utf-8"))
        except OSError as e:
            raise ParseError(f"cannot read scenario: {e}") from None
    for key in SCENARIO_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return scenario_from_mapping(values)


def _system_for(sc: ScenarioConfig):
    sys_, oracle = build_system(sc.system_id, sc.T, sc.k1, sc.k2)
    if len(sc.x0) != sys_.dimension:
        raise InvalidConfig(f"x0 has {len(sc.x0)} components, {sc.system_id} has dimension {sys_.dimension}")
    return sys_, oracle


def cmd_simulate(args) -> int:
    sc = _scenario_from_args(args)
    sys_, _ = _system_for(sc)
    traj, report = solve(sys_, sc)
    out, close = _open_out(sc.output)
    try:
        write_trajectory_csv(traj, out, args.stride)
    finally:
        if close:
            out.close()
    lo, hi, closed = traj.domain
    msg = f"domain: [{lo!r}, {hi!r}{']' if closed else ')'}\n{report.summary()}"
    print(msg, file=_sys.stderr if not close else _sys.stdout)
    return EXIT_NO_LIMIT if report.outcome == "no-limit-exists" else EXIT_OK


def cmd_figure(args) -> int:
    if args.name not in FIGURES:
        raise ParseError(f"unknown figure {args.name!r}; choose from {', '.join(FIGURES)}")
    header, data = FIGURES[args.name]()
    out, close = _open_out(args.output)
    try:
        write_table(header, data.tolist(), out)
    finally:
        if close:
            out.close()
    return EXIT_OK


def oracle_trajectory(system_id: str, sc: ScenarioConfig):
    """Dense oracle samples used by ``analyze --use-oracle``; returns ``(traj, exclude)``."""
    _, oracle = build_system(system_id, sc.T, sc.k1, sc.k2)
    if system_id == "example3":
        return oracle.trajectory(1e-3, 2.0 - 1e-3), [(1.0 - 1e-3, 1.0 + 1e-3)]
    if system_id in ("example1", "example2"):
        t = np.arange(sc.t0, sc.t0 + 0.9 * (sc.T - sc.t0), 1e-4)
        return oracle.trajectory(sc.t0, sc.x0, t), []
    raise InvalidConfig(f"system {system_id!r} has no oracle")


def cmd_analyze(args) -> int:
    sc = _scenario_from_args(args)
    sys_, _ = _system_for(sc)
    exclude = []
    if args.input:
        traj = read_trajectory_csv(args.input)
    elif args.use_oracle:
        traj, exclude = oracle_trajectory(sc.system_id, sc)
    else:
        settings = sc.settings(max_step=args.max_step) if args.max_step else None
        traj, _ = solve(sys_, sc, settings)
    out, close = _open_out(args.report)
    ok = True
    try:
        if args.kind == "tv":
            curve = analysis.variation_growth(traj, args.component, sc.T, _floats(args.deltas, "deltas"))
            write_table(["delta", "variation"], curve.rows(), out)
            print(f"slope = {curve.slope!r}, intercept = {curve.intercept!r}, R^2 = {curve.r_squared!r}",
                  file=_sys.stderr if not close else _sys.stdout)
        elif args.kind == "oscillation":
            prof = analysis.oscillation_profile(traj, args.component, sc.T, _floats(args.deltas, "windows"))
            write_table(["delta", "range"], prof, out)
        elif args.kind == "residual":
            rep = analysis.residual_check(traj, sys_, tol=args.tol, exclude=exclude)
            ok = rep.passed
            write_table(["max_distance", "mean_distance", "n_points", "worst_time", "tol", "passed"],
                        [(rep.max_distance, rep.mean_distance, rep.n_points, rep.worst_time, rep.tol,
                          "pass" if ok else "fail")], out)
        elif args.kind == "bound":
            iv = _floats(args.interval, "interval")
            if len(iv) != 2:
                raise ParseError("interval: expected a,b")
            if sc.system_id == "example3" and not args.input:
                traj = build_system("example3")[1].trajectory(iv[0], iv[1])
            rep = analysis.variation_bound_check(traj, sys_, iv)
            ok = rep.passed
            write_table(["a", "b", "variation", "radius", "Q", "bound", "passed"],
                        [(iv[0], iv[1], rep.variation, rep.radius, rep.Q, rep.bound, "pass" if ok else "fail")], out)
    finally:
        if close:
            out.close()
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(args) -> int:
    from . import acceptance

    if args.list:
        for c in acceptance.CRITERIA:
            print(f"{c.number:2d}  {c.title}")
        return EXIT_OK
    results = acceptance.run_all(only=args.only)
    for r in results:
        print(r.line())
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(_sys.stderr)
        print(f"{self.prog}: error: {message}", file=_sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _scenario_flags(p):
    p.add_argument("--scenario", help="scenario file with 'key = value' lines")
    p.add_argument("--system", choices=SYSTEM_IDS)
    p.add_argument("--x0", help="initial state, e.g. 1,0 (use --x0=-1,0 for negative entries)")
    p.add_argument("--t0")
    p.add_argument("--T", dest="T", help="prescribed time (example1, example2)")
    p.add_argument("--t-end", dest="t_end")
    p.add_argument("--k1")
    p.add_argument("--k2")
    p.add_argument("--rtol")
    p.add_argument("--atol")
    p.add_argument("--min-step-fraction", dest="min_step_fraction")
    p.add_argument("--event-tol", dest="event_tol")
    p.add_argument("--conv-radius", dest="conv_radius")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="genfilippov", description="Filippov inclusions with singular instants.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="integrate a scenario and write CSV")
    _scenario_flags(p)
    p.add_argument("--output", "-o", help="CSV path (default: stdout)")
    p.add_argument("--stride", type=int, default=1, help="write every k-th sample (segment ends kept)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("figure", help="write figure data as CSV")
    p.add_argument("name", help="fig1, fig2 or fig3")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("analyze", help="diagnostics on a solve, an oracle or a CSV trajectory")
    p.add_argument("kind", choices=("tv", "oscillation", "residual", "bound"))
    _scenario_flags(p)
    p.add_argument("--input", help="trajectory CSV written by simulate")
    p.add_argument("--use-oracle", action="store_true", help="analyze the closed-form solution instead")
    p.add_argument("--component", type=int, default=2, help="state component, 1-based (default 2)")
    p.add_argument("--deltas", default="1e-2,1e-3,1e-4,1e-5", help="cutoffs / window widths")
    p.add_argument("--interval", default="0,0.5", help="compact interval a,b for 'bound'")
    p.add_argument("--tol", type=float, default=1e-2, help="residual tolerance")
    p.add_argument("--max-step", dest="max_step", type=float, help="step cap for the solve")
    p.add_argument("--report", "-o", help="report CSV path (default: stdout)")
    p.set_defaults(func=cmd_analyze, output=None)

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.add_argument("--list", action="store_true", help="list criteria without running them")
    p.add_argument("--only", type=int, nargs="*", help="run only these criterion numbers")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        return args.func(args)
    except ParseError as e:
        print(f"error: {e}", file=_sys.stderr)
        return EXIT_USAGE
    except InvalidConfig as e:
        print(f"invalid scenario: {e}", file=_sys.stderr)
        return EXIT_INVALID
    except (FilippovError, ArithmeticError, ValueError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=_sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())
