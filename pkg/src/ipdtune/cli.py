"""Command-line front-end.

One subcommand per analysis: ``tune``, ``sweep``, ``grid``, ``simulate``,
``margins``, ``margin-grid``, ``baselines``, ``perf-opt``, ``model-error``,
``pade-compare``.  Array-valued commands write CSV by default (``--format
json`` switches to a JSON envelope with identical numbers); single-result
commands write JSON.  ``--plot`` renders a matplotlib figure next to the data
file.

Exit codes: 0 success, 1 flag/validation error, 2 infeasible or empty result,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import baselines as bl
from . import frequency as fq
from . import pade as pd
from . import tuner as tn
from .model import PiGains, PlantParams
from .semidiscrete import (
    DISTURBANCE,
    TRACKING,
    EigensolverError,
    build_model,
    oscillation_count,
    simulate,
    trace_to_csv,
)
from .serialize import write_csv, write_json
from .spectral import NewtonConvergenceError, dominant_poles
from .tuner import DeConfig, InfeasibleError

__all__ = ["main", "entry"]


class CliError(Exception):
    """Flag/validation failure; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); route to exit code 1
        raise CliError(message)


@dataclass(frozen=True)
class RunConfig:
    plant: PlantParams
    segments: int
    out: Path
    fmt: str
    seed: int
    plot: bool


def _parse_range(text: str) -> tuple[float, float]:
    try:
        lo_s, hi_s = text.split(":")
        lo, hi = float(lo_s), float(hi_s)
    except ValueError:
        raise CliError(f"expected a range like 'low:high', got {text!r}") from None
    if not lo < hi:
        raise CliError(f"range must satisfy low < high, got {text!r}")
    return lo, hi


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise CliError(f"expected a comma-separated float list, got {text!r}") from None


def _run_config(args, default_name: str, ext: str, default_segments: int = 20) -> RunConfig:
    if args.gain <= 0 or args.delay <= 0:
        raise CliError("--gain and --delay must be positive")
    segments = default_segments if args.segments is None else args.segments
    if segments < 2:
        raise CliError(f"--segments must be at least 2 (the delay stencil needs two samples), got {segments}")
    args.segments = segments
    plant = PlantParams(gain=args.gain, delay=args.delay)
    fmt = getattr(args, "format", "json" if ext == "json" else "csv")
    out = Path(args.out) if args.out else Path(f"{default_name}.{fmt}")
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out.parent}: {exc}") from None
    return RunConfig(plant=plant, segments=args.segments, out=out, fmt=fmt, seed=args.seed,
                     plot=getattr(args, "plot", False))


def _config_dict(cfg: RunConfig, command: str, **extra) -> dict:
    d = {
        "command": command,
        "gain": cfg.plant.gain,
        "delay": cfg.plant.delay,
        "segments": cfg.segments,
        "seed": cfg.seed,
    }
    d.update(extra)
    return d


def _de_config(args, cfg: RunConfig) -> DeConfig:
    return DeConfig(population=args.population, max_generations=args.generations, seed=cfg.seed)


def _gains_from_args(args) -> PiGains:
    try:
        return PiGains(args.kp, args.ki)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _plot_path(out: Path) -> Path:
    return out.with_suffix(".png")


# ---------------------------------------------------------------- commands


def _cmd_tune(args) -> int:
    cfg = _run_config(args, "tune", "json")
    gains, poles = tn.tune(cfg.plant, _de_config(args, cfg), segments=cfg.segments, workers=args.workers)
    report = fq.margins(cfg.plant, gains)
    result = {
        "gains": {"kp": gains.kp, "ki": gains.ki},
        "poles": [{"re": p.re, "im": p.im} for p in poles.poles],
        "abscissa": poles.abscissa,
        "dominant_is_real": poles.dominant_is_real,
        "margins": fq.margins_to_dict(report),
    }
    write_json(cfg.out, _config_dict(cfg, "tune", population=args.population, generations=args.generations), result)
    pole_text = ", ".join(f"{p.re:.6g}{p.im:+.6g}j" for p in poles.poles)
    print(
        f"optimum: Kp = {gains.kp:.6g}, Ki = {gains.ki:.6g}; abscissa = {poles.abscissa:.6g} "
        f"({'real' if poles.dominant_is_real else 'complex'} dominant root)\n"
        f"poles: {pole_text}\n"
        f"margins: PM = {report.phase_margin_deg:.6g} deg at {report.gain_crossover:.6g} rad/s, "
        f"GM = {report.gain_margin:.6g} ({report.gain_margin_db:.6g} dB) at {report.phase_crossover:.6g} rad/s\n"
        f"wrote {cfg.out}"
    )
    if cfg.plot:
        from . import plots

        plots.plot_margins(report, cfg.plant, gains, _plot_path(cfg.out))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _run_config(args, "sweep", "csv")
    lo, hi = _parse_range(args.kp_range)
    if args.points < 2:
        raise CliError("--points must be at least 2")
    kp_values = np.linspace(lo, hi, args.points)
    points = tn.optimal_ki_sweep(cfg.plant, kp_values, segments=cfg.segments, workers=args.workers)
    finite = [p for p in points if math.isfinite(p[2])]
    if not finite:
        print("no stabilizing integral gain anywhere in the sweep", file=sys.stderr)
        return 2
    if cfg.fmt == "csv":
        write_csv(cfg.out, ["kp", "ki_star", "j_star"], points)
    else:
        write_json(cfg.out, _config_dict(cfg, "sweep", kp_range=[lo, hi], points=args.points),
                   {"points": [{"kp": p[0], "ki_star": p[1], "j_star": p[2]} for p in points]})
    best = min(finite, key=lambda p: p[2])
    print(
        f"swept {len(points)} proportional gains ({len(points) - len(finite)} with no stabilizing Ki); "
        f"valley bottom at Kp = {best[0]:.6g}, Ki = {best[1]:.6g}, abscissa = {best[2]:.6g}\n"
        f"wrote {cfg.out}"
    )
    if cfg.plot:
        from . import plots

        plots.plot_sweep(points, _plot_path(cfg.out))
    return 0


def _cmd_grid(args) -> int:
    cfg = _run_config(args, "grid", "csv")
    kp_lo, kp_hi = _parse_range(args.kp_range)
    ki_lo, ki_hi = _parse_range(args.ki_range)
    if args.resolution < 2:
        raise CliError("--resolution must be at least 2")
    grid = tn.stability_grid(
        cfg.plant,
        np.linspace(kp_lo, kp_hi, args.resolution),
        np.linspace(ki_lo, ki_hi, args.resolution),
        segments=cfg.segments,
        workers=args.workers,
    )
    if cfg.fmt == "csv":
        tn.grid_to_csv(grid, cfg.out)
    else:
        write_json(cfg.out, _config_dict(cfg, "grid", resolution=args.resolution), tn.grid_to_json_dict(grid))
    i, j = np.unravel_index(np.nanargmin(grid.abscissa), grid.abscissa.shape)
    stable_cells = int(np.sum(grid.abscissa < 0))
    print(
        f"{grid.abscissa.size} cells, {stable_cells} stable, {int(np.isnan(grid.abscissa).sum())} failed; "
        f"minimum abscissa {grid.abscissa[i, j]:.6g} at Kp = {grid.kp_axis[j]:.6g}, Ki = {grid.ki_axis[i]:.6g}\n"
        f"wrote {cfg.out}"
    )
    if cfg.plot:
        from . import plots

        plots.plot_grid(grid, _plot_path(cfg.out), star=(grid.kp_axis[j], grid.ki_axis[i]))
    return 0


def _cmd_simulate(args) -> int:
    cfg = _run_config(args, "simulate", "csv")
    gains = _gains_from_args(args)
    scenario = TRACKING if args.scenario == "tracking" else DISTURBANCE
    horizon = args.horizon if args.horizon is not None else 40.0 * cfg.plant.delay
    model = build_model(cfg.plant, gains, cfg.segments, order=args.order)
    trace = simulate(model, cfg.plant, gains, scenario, horizon, disturbance=args.disturbance)
    if cfg.fmt == "csv":
        trace_to_csv(trace, cfg.out)
    else:
        write_json(cfg.out, _config_dict(cfg, "simulate", kp=gains.kp, ki=gains.ki, scenario=scenario,
                                         horizon=horizon, disturbance=args.disturbance, order=args.order),
                   {"t": trace.times, "e": trace.error, "u": trace.control})
    crossings = oscillation_count(trace)
    print(
        f"{scenario} response over {horizon:.6g} s ({len(trace.times)} samples): "
        f"final error {trace.error[-1]:.6g}, peak |error| {np.max(np.abs(trace.error)):.6g}, "
        f"{crossings} zero crossings after the first peak\n"
        f"wrote {cfg.out}"
    )
    if cfg.plot:
        from . import plots

        plots.plot_trace(trace, _plot_path(cfg.out))
    return 0


def _cmd_margins(args) -> int:
    cfg = _run_config(args, "margins", "json")
    gains = _gains_from_args(args)
    report = fq.margins(cfg.plant, gains)
    write_json(cfg.out, _config_dict(cfg, "margins", kp=gains.kp, ki=gains.ki), fq.margins_to_dict(report))
    print(
        f"PM = {report.phase_margin_deg:.6g} deg at {report.gain_crossover:.6g} rad/s; "
        f"GM = {report.gain_margin:.6g} ({report.gain_margin_db:.6g} dB) at {report.phase_crossover:.6g} rad/s\n"
        f"wrote {cfg.out}"
    )
    if cfg.plot:
        from . import plots

        plots.plot_margins(report, cfg.plant, gains, _plot_path(cfg.out))
    return 0


def _cmd_margin_grid(args) -> int:
    cfg = _run_config(args, "margin_grid", "csv")
    kp_lo, kp_hi = _parse_range(args.kp_range)
    ki_lo, ki_hi = _parse_range(args.ki_range)
    if args.resolution < 2:
        raise CliError("--resolution must be at least 2")
    grid = fq.margin_grid(
        cfg.plant,
        np.linspace(kp_lo, kp_hi, args.resolution),
        np.linspace(ki_lo, ki_hi, args.resolution),
        segments=cfg.segments,
        workers=args.workers,
    )
    w_end = math.pi / (2.0 * cfg.plant.delay)
    omegas = np.linspace(w_end * 1e-4, w_end * (1.0 - 1e-9), args.boundary_points)
    boundary = fq.stability_boundary(cfg.plant, omegas)
    if cfg.fmt == "csv":
        fq.margin_grid_to_csv(grid, cfg.out)
        boundary_path = cfg.out.with_name(cfg.out.stem + "_boundary.csv")
        fq.boundary_to_csv(omegas, boundary, boundary_path)
        extra_note = f" and {boundary_path}"
    else:
        write_json(cfg.out, _config_dict(cfg, "margin-grid", resolution=args.resolution),
                   {"kp_axis": grid.kp_axis, "ki_axis": grid.ki_axis, "pm_deg": grid.pm_deg,
                    "gm": grid.gm, "stable": grid.stable,
                    "boundary": {"omega": omegas, "kp": boundary[:, 0], "ki": boundary[:, 1]}})
        extra_note = ""
    n_stable = int(grid.stable.sum())
    print(
        f"{grid.pm_deg.size} cells, {n_stable} stable; "
        f"PM range [{np.nanmin(grid.pm_deg):.6g}, {np.nanmax(grid.pm_deg):.6g}] deg, "
        f"GM range [{np.nanmin(grid.gm):.6g}, {np.nanmax(grid.gm):.6g}]\n"
        f"wrote {cfg.out}{extra_note}"
    )
    if cfg.plot:
        from . import plots

        marks = [(r.method, r.gains.kp, r.gains.ki) for r in bl.classical_rules(cfg.plant)]
        plots.plot_margin_grid(grid, boundary, _plot_path(cfg.out), points=marks)
    return 0


def _cmd_baselines(args) -> int:
    cfg = _run_config(args, "baselines", "csv")
    gains, _poles = tn.tune(cfg.plant, _de_config(args, cfg), segments=cfg.segments, workers=args.workers)
    results = [bl.TuningResult("proposed", gains)] + bl.classical_rules(cfg.plant)
    if cfg.fmt == "csv":
        write_csv(cfg.out, ["method", "kp", "ki"], [(r.method, r.gains.kp, r.gains.ki) for r in results])
    else:
        write_json(cfg.out, _config_dict(cfg, "baselines"),
                   {"methods": [{"method": r.method, "kp": r.gains.kp, "ki": r.gains.ki} for r in results]})
    width = max(len(r.method) for r in results)
    lines = [f"{r.method:<{width}}  {r.gains.kp:8.4f}  {r.gains.ki:8.4f}" for r in results]
    print(f"{'method':<{width}}  {'Kp':>8}  {'Ki':>8}\n" + "\n".join(lines) + f"\nwrote {cfg.out}")
    if cfg.plot:
        from . import plots

        traces = {
            r.method: (
                bl.performance_trace(cfg.plant, r.gains, TRACKING),
                bl.performance_trace(cfg.plant, r.gains, DISTURBANCE),
            )
            for r in results
        }
        plots.plot_baseline_traces(traces, _plot_path(cfg.out))
    return 0


def _cmd_perf_opt(args) -> int:
    cfg = _run_config(args, "perf_opt", "csv", default_segments=50)
    indices = ["iae", "itae"] if args.index == "both" else [args.index]
    alphas = _parse_floats(args.alphas)
    if not alphas:
        raise CliError("--alphas must contain at least one value")
    if any(not 0.0 <= a <= 1.0 for a in alphas):
        raise CliError("--alphas values must lie in [0, 1]")
    de_cfg = _de_config(args, cfg)
    curves: dict[str, list] = {}
    written = []
    for index in indices:
        points = bl.gain_trajectory(cfg.plant, index, sorted(alphas), segments=cfg.segments,
                                    horizon=args.horizon, config=de_cfg)
        curves[index] = points
        if len(indices) == 1:
            path = cfg.out
        else:
            path = cfg.out.with_name(f"{cfg.out.stem}_{index}{cfg.out.suffix}")
        if cfg.fmt == "csv":
            bl.trajectory_to_csv(points, path)
        else:
            write_json(path, _config_dict(cfg, "perf-opt", index=index, alphas=sorted(alphas)),
                       {"points": [
                           {"alpha": a, "kp": g.kp if g else math.nan, "ki": g.ki if g else math.nan}
                           for a, g in points]})
        written.append(str(path))
        solved = [(a, g) for a, g in points if g is not None]
        for a, g in solved:
            print(f"{index}(alpha={a:.6g}): Kp = {g.kp:.6g}, Ki = {g.ki:.6g}")
        if len(solved) < len(points):
            print(f"{len(points) - len(solved)} alpha value(s) had no feasible optimum", file=sys.stderr)
    print("wrote " + ", ".join(written))
    if not any(g is not None for pts in curves.values() for _, g in pts):
        return 2
    if cfg.plot:
        from . import plots

        plots.plot_trajectory(curves, _plot_path(cfg.out))
    return 0


def _cmd_model_error(args) -> int:
    cfg = _run_config(args, "model_error", "csv")
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    for m in methods:
        if m not in pd.ALL_METHODS:
            raise CliError(f"unknown method {m!r}; choose from {', '.join(pd.ALL_METHODS)}")
    kp_lo, kp_hi = _parse_range(args.kp_range)
    ki_lo, ki_hi = _parse_range(args.ki_range)
    if args.resolution < 2:
        raise CliError("--resolution must be at least 2")
    emap = pd.model_error_map(
        cfg.plant,
        np.linspace(kp_lo, kp_hi, args.resolution),
        np.linspace(ki_lo, ki_hi, args.resolution),
        methods=methods,
        segments=cfg.segments,
        workers=args.workers,
    )
    if cfg.fmt == "csv":
        pd.error_map_to_csv(emap, cfg.out)
    else:
        write_json(cfg.out, _config_dict(cfg, "model-error", methods=list(methods), resolution=args.resolution),
                   {"kp_axis": emap.kp_axis, "ki_axis": emap.ki_axis, "unstable": emap.unstable,
                    "errors": {m: emap.errors[m] for m in methods}})
    stable = ~emap.unstable
    if not np.any(stable):
        print("no stable cells in the requested gain window", file=sys.stderr)
        return 2
    lines = []
    for m in methods:
        vals = emap.errors[m][stable]
        vals = vals[np.isfinite(vals)]
        lines.append(f"{m}: max {np.max(vals):.6g}, 95th pct {np.percentile(vals, 95):.6g}, median {np.median(vals):.6g}")
    print(f"{int(stable.sum())} stable cells of {emap.unstable.size}\n" + "\n".join(lines) + f"\nwrote {cfg.out}")
    if cfg.plot:
        from . import plots

        plots.plot_error_map(emap, _plot_path(cfg.out))
    return 0


def _cmd_pade_compare(args) -> int:
    cfg = _run_config(args, "pade_compare", "csv")
    gains = _gains_from_args(args)
    poles = dominant_poles(cfg.plant, gains, cfg.segments)
    model = build_model(cfg.plant, gains, cfg.segments, order=2)
    from .semidiscrete import eigenvalues
    from .spectral import map_to_continuous

    mapped = [map_to_continuous(lam, model.step) for lam in eigenvalues(model) if lam != 0]
    pade_roots = pd.pade_closed_loop_poles(cfg.plant, gains, args.order)
    pade_label = f"pade-{args.order}"
    rows = (
        [(p.re, p.im, "refined") for p in poles.poles]
        + [(p.re, p.im, "semi-discrete") for p in mapped]
        + [(float(r.real), float(r.imag), pade_label) for r in pade_roots]
    )
    if cfg.fmt == "csv":
        write_csv(cfg.out, ["re", "im", "source"], rows)
    else:
        write_json(cfg.out, _config_dict(cfg, "pade-compare", kp=gains.kp, ki=gains.ki, order=args.order),
                   {"poles": [{"re": r, "im": i, "source": s} for r, i, s in rows]})
    print(
        f"refined abscissa {poles.abscissa:.6g}; {pade_label} dominant root {pade_roots[0].real:.6g}; "
        f"|difference| = {abs(poles.abscissa - pade_roots[0].real):.6g}\n"
        f"wrote {cfg.out}"
    )
    if cfg.plot:
        from . import plots

        plots.plot_pole_comparison(
            {
                "refined": [p.value for p in poles.poles],
                "semi-discrete": [p.value for p in mapped],
                pade_label: list(pade_roots),
            },
            _plot_path(cfg.out),
        )
    return 0


# ---------------------------------------------------------------- parser


def _build_parser() -> _Parser:
    parser = _Parser(prog="ipdtune", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    common = _Parser(add_help=False)
    common.add_argument("--gain", type=float, default=1.0, help="process gain K (default 1)")
    common.add_argument("--delay", type=float, default=1.0, help="dead time L in seconds (default 1)")
    common.add_argument("--segments", type=int, default=None,
                        help="delay segments M (default 20; 50 for perf-opt)")
    common.add_argument("--seed", type=int, default=42, help="optimizer seed (default 42)")
    common.add_argument("--out", type=str, default=None, help="output file path")
    common.add_argument("--plot", action="store_true", help="render a PNG figure next to the output")

    fmt = _Parser(add_help=False)
    fmt.add_argument("--format", choices=("csv", "json"), default="csv", help="output format (default csv)")

    de = _Parser(add_help=False)
    de.add_argument("--population", type=int, default=30, help="DE population size (default 30)")
    de.add_argument("--generations", type=int, default=200, help="DE generations (default 200)")

    par = _Parser(add_help=False)
    par.add_argument("--workers", type=int, default=1, help="parallel evaluation threads (default 1)")

    p = sub.add_parser("tune", parents=[common, de, par], help="minimize the spectral abscissa over (Kp, Ki)")
    p.set_defaults(fn=_cmd_tune)

    p = sub.add_parser("sweep", parents=[common, fmt, par], help="optimal Ki and cost for each Kp")
    p.add_argument("--kp-range", type=str, default="0.05:1.45")
    p.add_argument("--points", type=int, default=36)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("grid", parents=[common, fmt, par], help="spectral abscissa over a gain lattice")
    p.add_argument("--kp-range", type=str, default="0.01:1.5")
    p.add_argument("--ki-range", type=str, default="0.005:0.4")
    p.add_argument("--resolution", type=int, default=100)
    p.set_defaults(fn=_cmd_grid)

    p = sub.add_parser("simulate", parents=[common, fmt], help="step-response simulation")
    p.add_argument("--kp", type=float, required=True)
    p.add_argument("--ki", type=float, required=True)
    p.add_argument("--scenario", choices=("tracking", "disturbance"), default="tracking")
    p.add_argument("--disturbance", type=float, default=1.0, help="load magnitude for the disturbance scenario")
    p.add_argument("--horizon", type=float, default=None, help="simulation length in seconds (default 40*L)")
    p.add_argument("--order", type=int, choices=(1, 2), default=2, help="model accuracy order (default 2)")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("margins", parents=[common], help="phase/gain margins of the open loop")
    p.add_argument("--kp", type=float, required=True)
    p.add_argument("--ki", type=float, required=True)
    p.set_defaults(fn=_cmd_margins)

    p = sub.add_parser("margin-grid", parents=[common, fmt, par], help="PM/GM contours plus stability boundary")
    p.add_argument("--kp-range", type=str, default="0.02:1.6")
    p.add_argument("--ki-range", type=str, default="0.005:0.5")
    p.add_argument("--resolution", type=int, default=60)
    p.add_argument("--boundary-points", type=int, default=400)
    p.set_defaults(fn=_cmd_margin_grid)

    p = sub.add_parser("baselines", parents=[common, fmt, de, par], help="proposed vs classical tuning rules")
    p.set_defaults(fn=_cmd_baselines)

    p = sub.add_parser("perf-opt", parents=[common, fmt, de], help="IAE/ITAE weighted optimization over alpha")
    p.add_argument("--index", choices=("iae", "itae", "both"), default="both")
    p.add_argument("--alphas", type=str, default="0.5", help="comma-separated weights in [0, 1]")
    p.add_argument("--horizon", type=float, default=None, help="integral horizon in seconds (default 50*L)")
    p.set_defaults(fn=_cmd_perf_opt)

    p = sub.add_parser("model-error", parents=[common, fmt, par], help="dominant-pole error maps per model")
    p.add_argument("--methods", type=str, default=",".join(pd.ALL_METHODS))
    p.add_argument("--kp-range", type=str, default="0.02:1.5")
    p.add_argument("--ki-range", type=str, default="0.005:0.4")
    p.add_argument("--resolution", type=int, default=60)
    p.set_defaults(fn=_cmd_model_error)

    p = sub.add_parser("pade-compare", parents=[common, fmt], help="pole estimates: refined vs discrete vs Pade")
    p.add_argument("--kp", type=float, required=True)
    p.add_argument("--ki", type=float, required=True)
    p.add_argument("--order", type=int, choices=(2, 3), default=3)
    p.set_defaults(fn=_cmd_pade_compare)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InfeasibleError, fq.CrossoverError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except (NewtonConvergenceError, EigensolverError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except RuntimeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
