"""Command-line front end.

    mountpass run [--config FILE] [key=value ...]
    mountpass figure RUN_DIR [--iters N]
    mountpass bench-list
    mountpass audit BENCHMARK [--points N] [--h H] [--seed S]

Run configuration is a flat key=value file; positional key=value arguments
override it. The output directory may also come from MOUNTPASS_OUTPUT_DIR,
which takes precedence over the config.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bench
from .basin import ComponentAtlas
from .core import PathCurve, StepControl, Tolerances, as_vector, audit_gradient, polyline
from .errors import ConfigError, MissingRun, MountPassError
from .flow import FlowTrajectory, StopCondition, integrate_flow
from .loopmp import StrictMinContext, run_alg2, run_thm_mp2, winding_oracle
from .mpbisect import RunReport, run_alg1b, run_alg1c

ALGORITHMS = ("alg1b", "alg1c", "alg2", "thm_mp2", "flowline")
TRACE_STEPS = 1000

CONFIG_KEYS = {
    "benchmark": "benchmark name: double_well, tilted_hat:<eps>, bvp:<n> (default double_well)",
    "algorithm": "one of " + ", ".join(ALGORITHMS) + " (default alg1b)",
    "level_c": "sublevel c (default: the benchmark's recommendation)",
    "path": "inline polyline nodes 'x,y;x,y;...' (default: benchmark path or loop)",
    "path_file": "file of polyline nodes, one point per row (comma or space separated)",
    "x0": "flowline start point 'x,y,...'",
    "grad_tol": "gradient target (default 1e-6)",
    "settle_tol": "settling threshold (default 1e-8)",
    "sep_eps": "separation distance for restarts (default 1e-4)",
    "t_budget": "flow time budget per line (default 200)",
    "n_max": "bisection budget (default 30)",
    "rtol": "integrator relative tolerance (default 1e-8)",
    "atol": "integrator absolute tolerance (default 1e-10)",
    "h_init": "initial step (default 1e-3)",
    "h_max": "largest step (default 0.25)",
    "fixed_step": "true for the fixed-step integrator (default false)",
    "h_fixed": "fixed step size (default 0.01)",
    "radius": "anchor proximity radius (default: derived from the level set)",
    "x_bar": "strict minimizer for loop algorithms (default: first minimizer)",
    "eps_nbhd": "entry neighbourhood depth above f(x_bar) (default 0.01)",
    "ball_r": "entry neighbourhood radius (default 0.4)",
    "seed": "seed for random directions (default 0)",
    "output_dir": "where artifacts go (default ./mountpass_out)",
}

_TOL_FLOATS = ("grad_tol", "settle_tol", "sep_eps", "t_budget")
_STEP_FLOATS = ("rtol", "atol", "h_init", "h_max", "h_fixed")


@dataclass
class RunConfig:
    benchmark: str = "double_well"
    algorithm: str = "alg1b"
    level_c: float | None = None
    path: PathCurve | None = None
    x0: np.ndarray | None = None
    tolerances: Tolerances = Tolerances()
    radius: float | None = None
    x_bar: np.ndarray | None = None
    eps_nbhd: float = 0.01
    ball_r: float = 0.4
    seed: int = 0
    output_dir: str = "mountpass_out"


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def parse_points(text: str) -> np.ndarray:
    rows = [r for r in text.split(";") if r.strip()]
    return np.array([_floats(r) for r in rows], dtype=np.float64)


def read_path_file(name: str) -> PathCurve:
    p = Path(name)
    if not p.is_file():
        raise ConfigError(f"path file not found: {name}")
    rows = []
    for line in p.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append(_floats(line))
    return polyline(np.array(rows, dtype=np.float64))


def read_config_file(name: str) -> dict[str, str]:
    p = Path(name)
    if not p.is_file():
        raise ConfigError(f"config file not found: {name}")
    out = {}
    for n, line in enumerate(p.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{name}:{n}: expected key=value, got {line!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def build_config(raw: dict[str, str]) -> RunConfig:
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    try:
        tol_kw = {k: float(raw[k]) for k in _TOL_FLOATS if k in raw}
        if "n_max" in raw:
            tol_kw["n_max"] = int(raw["n_max"])
        step_kw = {k: float(raw[k]) for k in _STEP_FLOATS if k in raw}
        if "fixed_step" in raw:
            step_kw["fixed_step"] = _bool(raw["fixed_step"])
        tol = Tolerances(step_ctrl=StepControl(**step_kw), **tol_kw)
        cfg = RunConfig(
            benchmark=raw.get("benchmark", "double_well"),
            algorithm=raw.get("algorithm", "alg1b"),
            level_c=float(raw["level_c"]) if "level_c" in raw else None,
            tolerances=tol,
            radius=float(raw["radius"]) if "radius" in raw else None,
            eps_nbhd=float(raw.get("eps_nbhd", 0.01)),
            ball_r=float(raw.get("ball_r", 0.4)),
            seed=int(raw.get("seed", 0)),
            output_dir=raw.get("output_dir", "mountpass_out"),
        )
        if "path" in raw and "path_file" in raw:
            raise ConfigError("give either path or path_file, not both")
        if "path" in raw:
            cfg.path = polyline(parse_points(raw["path"]))
        if "path_file" in raw:
            cfg.path = read_path_file(raw["path_file"])
        if "x0" in raw:
            cfg.x0 = as_vector(_floats(raw["x0"]))
        if "x_bar" in raw:
            cfg.x_bar = as_vector(_floats(raw["x_bar"]))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    if cfg.algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {cfg.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
    env = os.environ.get("MOUNTPASS_OUTPUT_DIR")
    if env:
        cfg.output_dir = env
    return cfg


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_trace(path: Path, traj: FlowTrajectory) -> None:
    n = min(len(traj), TRACE_STEPS)
    header = ["step", "t", "f", "gradnorm"] + [f"x_{j}" for j in range(traj.x.shape[1])]
    write_csv(
        path,
        header,
        ([i, traj.t[i], traj.f[i], traj.g[i], *traj.x[i]] for i in range(n)),
    )


def _atlas(spec, f, c, cfg: RunConfig) -> ComponentAtlas:
    anchors = {i + 1: p for i, (p, v) in enumerate(spec.minimizers) if v < c}
    if not anchors:
        raise ConfigError(f"no benchmark minimizer lies below c = {c}")
    return ComponentAtlas.build(f, c, anchors, cfg.radius, spec.escape_level, cfg.seed)


def _write_report(out: Path, lines: list[str]) -> None:
    (out / "report.txt").write_text("\n".join(lines) + "\n")


def _write_bisection(out: Path, rep: RunReport, report: list[str]) -> None:
    rows = []
    for i, c in enumerate(rep.candidates, 1):
        rows.append([i, c.s1, c.s2, c.f_x1, c.T_i, c.T_tilde_i, c.f_val, c.grad_norm, c.flow_lines_used])
        if c.trace is not None:
            write_trace(out / f"flowtrace_{i}.csv", c.trace)
    write_csv(
        out / "summary.csv",
        ["iter", "s1", "s2", "f_x1", "T_i", "T_tilde_i", "f_ytilde", "gradnorm_ytilde", "flow_lines_cum"],
        rows,
    )
    report += [
        f"termination: {rep.termination.value}",
        f"rounds: {rep.rounds}",
        f"iterations: {len(rep.candidates)}",
        f"total_flow_lines: {rep.total_flow_lines}",
    ]
    if rep.best is not None:
        b = rep.best
        report += [
            f"best_iter: {next((i for i, c in enumerate(rep.candidates, 1) if c is b), 0)}",
            "best_point: " + " ".join(repr(float(v)) for v in b.y_tilde),
            f"best_f: {b.f_val!r}",
            f"best_gradnorm: {b.grad_norm!r}",
        ]
    if rep.note:
        report.append(f"note: {rep.note}")


def _write_loop(out: Path, rep2, report: list[str]) -> None:
    rows = []
    for s in rep2.steps:
        kept = s.invariant_first if s.invariant_first not in (None, 0) else s.invariant_second
        rows.append([s.iter, s.a, s.b, s.m, s.verdict, 0 if kept is None else kept])
    with open(out / "loop_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "a", "b", "m", "verdict", "invariant"])
        for it, a, b, m, verdict, inv in rows:
            w.writerow([it, repr(float(a)), repr(float(b)), repr(float(m)), verdict, inv])
    report += [
        f"loop_invariant: {rep2.invariant}",
        f"loop_stopped: {rep2.stopped}",
        f"loop_bracket: {rep2.a!r} {rep2.b!r}",
        f"loop_flow_lines: {rep2.flow_lines}",
    ]
    if rep2.stopped:
        report.append("loop_found_point: " + " ".join(repr(float(v)) for v in rep2.found_point))
        report.append(f"loop_verdict: {rep2.verdict.tag}" + (" (flagged)" if rep2.flagged else ""))


def cmd_run(cfg: RunConfig) -> int:
    spec = bench.by_name(cfg.benchmark)
    f = spec.functional
    tol = cfg.tolerances
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = [f"benchmark: {spec.name}", f"algorithm: {cfg.algorithm}"]

    if cfg.algorithm == "flowline":
        x0 = cfg.x0 if cfg.x0 is not None else spec.default_path(0.5)
        traj = integrate_flow(f, x0, tol, StopCondition.settled())
        write_trace(out / "flowtrace_0.csv", traj)
        report += [
            f"stop_reason: {traj.stop_reason.name}",
            f"samples: {len(traj)}",
            "final_point: " + " ".join(repr(float(v)) for v in traj.x[-1]),
            f"final_f: {float(traj.f[-1])!r}",
            f"final_gradnorm: {float(traj.g[-1])!r}",
        ]
        _write_report(out, report)
        return 0

    if cfg.algorithm in ("alg2", "thm_mp2"):
        if spec.obstacle is None:
            raise ConfigError(f"{spec.name} declares no obstacle for the winding oracle")
        c = cfg.level_c if cfg.level_c is not None else spec.notes.get("loop_c", spec.recommended_c)
        x_bar = cfg.x_bar if cfg.x_bar is not None else spec.minimizers[0][0]
        ctx = StrictMinContext.at(f, x_bar, cfg.eps_nbhd, cfg.ball_r).validate(f, tol, c)
        gamma = cfg.path if cfg.path is not None else spec.notes["loop"]
        oracle = winding_oracle(spec.obstacle)
        report.append(f"level_c: {c!r}")
        if cfg.algorithm == "alg2":
            rep2 = run_alg2(f, gamma, ctx, oracle, None, tol)
            _write_loop(out, rep2, report)
        else:
            rep = run_thm_mp2(f, gamma, ctx, oracle, None, tol, seed=cfg.seed)
            _write_loop(out, rep.loop, report)
            _write_bisection(out, rep, report)
        _write_report(out, report)
        return 0

    c = cfg.level_c if cfg.level_c is not None else spec.recommended_c
    lo, hi = min(v for _, v in spec.minimizers), min((v for _, v in spec.saddles), default=math.inf)
    if not lo < c < hi:
        print(f"warning: c = {c} is outside the recommended range ({lo}, {hi})", file=sys.stderr)
    atlas = _atlas(spec, f, c, cfg)
    gamma = cfg.path if cfg.path is not None else spec.default_path
    report.append(f"level_c: {c!r}")
    if cfg.algorithm == "alg1b":
        rep = run_alg1b(f, gamma, atlas, tol)
    else:
        rep = run_alg1c(f, gamma.start, gamma.end, gamma, atlas, tol)
    _write_bisection(out, rep, report)
    _write_report(out, report)
    return 0


def _read_trace(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1], data[:, 2], data[:, 3]


def cmd_figure(run_dir: str, iters: int | None = None) -> int:
    """Long-format f and |grad f| along the flow lines of a bisection run."""
    d = Path(run_dir)
    traces = sorted(d.glob("flowtrace_*.csv"), key=lambda p: int(p.stem.split("_")[1])) if d.is_dir() else []
    traces = [p for p in traces if int(p.stem.split("_")[1]) > 0]
    if not traces:
        raise MissingRun(f"no bisection flow traces in {run_dir}")
    if iters is not None:
        traces = traces[:iters]
    rows_f, rows_g = [], []
    for p in traces:
        i = int(p.stem.split("_")[1])
        t, fv, gv = _read_trace(p)
        rows_f += [[i, a, b] for a, b in zip(t, fv)]
        rows_g += [[i, a, b] for a, b in zip(t, gv)]
    write_csv(d / "fig_f.csv", ["iter", "t", "value"], rows_f)
    write_csv(d / "fig_grad.csv", ["iter", "t", "value"], rows_g)
    return 0


def cmd_bench_list() -> int:
    for name, fn in (("double_well", bench.double_well), ("tilted_hat:<eps>", bench.tilted_hat),
                     ("bvp:<n>", bench.bvp_action)):
        print(f"{name:18s} {fn.__doc__.strip().splitlines()[0]}")
    return 0


def cmd_audit(name: str, points: int, h: float, seed: int) -> int:
    spec = bench.by_name(name)
    f = spec.functional
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        worst = max(worst, audit_gradient(f, rng.uniform(-1.5, 1.5, f.dim), h))
    print(f"{spec.name}: max gradient gap {worst!r} over {points} points (h = {h!r})")
    return 0


def _parser() -> argparse.ArgumentParser:
    keys = "\n".join(f"  {k:11s} {v}" for k, v in CONFIG_KEYS.items())
    p = argparse.ArgumentParser(prog="mountpass", description="Mountain-pass search by bisection on basins.")
    sub = p.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser(
        "run",
        help="execute an algorithm and write CSV artifacts",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="config keys:\n" + keys + "\n\nexit codes: 0 ok, 2 config error, 3 algorithm error, 4 numeric error",
    )
    run.add_argument("--config", help="key=value config file")
    run.add_argument("overrides", nargs="*", metavar="key=value")
    fig = sub.add_parser("figure", help="f and |grad f| along the flow lines of a finished run")
    fig.add_argument("run_dir")
    fig.add_argument("--iters", type=int, default=None, help="only the first N iterations")
    sub.add_parser("bench-list", help="list benchmark functionals")
    aud = sub.add_parser("audit", help="compare analytic and finite-difference gradients")
    aud.add_argument("benchmark")
    aud.add_argument("--points", type=int, default=100)
    aud.add_argument("--h", type=float, default=1e-5)
    aud.add_argument("--seed", type=int, default=0)
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.cmd == "run":
            raw = read_config_file(args.config) if args.config else {}
            for item in args.overrides:
                if "=" not in item:
                    raise ConfigError(f"override must be key=value, got {item!r}")
                k, v = item.split("=", 1)
                raw[k.strip()] = v.strip()
            return cmd_run(build_config(raw))
        if args.cmd == "figure":
            return cmd_figure(args.run_dir, args.iters)
        if args.cmd == "bench-list":
            return cmd_bench_list()
        return cmd_audit(args.benchmark, args.points, args.h, args.seed)
    except MountPassError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
