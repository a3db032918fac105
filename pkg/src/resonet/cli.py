"""Command-line front end: sweeps, trajectories, decay rates, line fits.

Subcommands: sweep, trajectory, fermi, fit, validate.  Every output set is
written next to a manifest file; the CSVs carry the same manifest string as
a header comment (minus the timestamp) so that re-running a manifest
reproduces the outputs byte for byte.  Exit codes: 0 success, 2 input
error, 3 numerical failure; failures print one machine-parsable line to
stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .fermi import FermiError, fermi_rate, fermi_report_text, embedded_eigenpair
from .graph import GraphSpecError, cutoff_frequency, load_graph_spec
from .lineshape import LineshapeError, fit_lineshape, fit_report_csv
from .solver import SolverError, trace_detS, trace_from_csv, trace_to_csv
from .tracker import (
    TrackerError,
    fit_quadratic,
    fit_report_text,
    refine_zero,
    trace_trajectory,
    trajectory_to_csv,
)

#: default coax profile used for the cutoff guard (radii in m, dielectric)
DEFAULT_CABLE = (0.0005, 0.0015, 2.06)


class InputError(Exception):
    pass


def _fail(kind: str, message: str, code: int) -> int:
    print(f"resonet: {kind}-error: {message}", file=sys.stderr)
    return code


def _parse_range(text: str, what: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"{what} must be min:max:steps, got {text!r}")
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InputError(f"non-numeric {what} component in {text!r}") from None
    if steps < 2:
        raise InputError(f"{what} needs at least 2 steps")
    return lo, hi, steps


def _workers() -> int:
    raw = os.environ.get("RESONET_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _load(path: str):
    try:
        return load_graph_spec(path)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None


def _manifest(command: str, params: dict) -> tuple[str, dict]:
    body = {
        "tool": "resonet",
        "version": __version__,
        "command": command,
        "params": params,
    }
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return canonical, body


def _write_outputs(out_dir: str, command: str, body: dict, files: dict[str, str]):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, content in files.items():
        (out / name).write_text(content, encoding="utf-8")
    record = dict(body)
    record["outputs"] = sorted(files)
    record["timestamp"] = datetime.now(timezone.utc).isoformat()
    (out / f"{command}_manifest.json").write_text(
        json.dumps(record, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _default_k_hint(graph) -> float:
    mean_len = float(np.mean([e.base_length for e in graph.edges]))
    return 2.0 * np.pi / mean_len


def cmd_sweep(args) -> int:
    spec = _load(args.graph)
    nu_min, nu_max, steps = _parse_range(args.nu, "--nu")
    beta = spec.beta if args.beta is None else args.beta
    cutoff = cutoff_frequency(*DEFAULT_CABLE)
    if nu_max > cutoff:
        raise InputError(
            f"sweep extends to {nu_max:g} Hz, above the single-mode cutoff "
            f"{cutoff:.3g} Hz"
        )
    trace = trace_detS(
        spec.graph, args.t, nu_min, nu_max, steps, beta=beta, workers=_workers()
    )
    canonical, body = _manifest(
        "sweep",
        {
            "graph": args.graph,
            "t": args.t,
            "nu": [nu_min, nu_max, steps],
            "beta": beta,
        },
    )
    _write_outputs(args.out, "sweep", body, {"sweep.csv": trace_to_csv(trace, canonical)})
    flagged = int(trace.flagged.sum())
    print(f"sweep: {steps} points, beta={beta:g}, {flagged} flagged rows -> sweep.csv")
    return 0


def cmd_trajectory(args) -> int:
    spec = _load(args.graph)
    if args.t_grid is not None:
        t_min, t_max, steps = _parse_range(args.t_grid, "--t-grid")
    elif spec.sweep is not None:
        t_min, t_max, steps = spec.sweep.t_min, spec.sweep.t_max, spec.sweep.steps
    else:
        raise InputError("graph declares no sweep; pass --t-grid min:max:steps")
    beta = spec.beta if args.beta is None else args.beta
    k_hint = args.k if args.k is not None else _default_k_hint(spec.graph)

    pair = embedded_eigenpair(spec.graph, k_hint)
    seed = refine_zero(spec.graph, 0.0, complex(pair.k), beta=beta)
    grid = np.linspace(t_min, t_max, steps)
    traj = trace_trajectory(spec.graph, grid, seed, beta=beta)
    fit = fit_quadratic(traj, args.window)
    rate = fermi_rate(spec.graph, pair.k)

    canonical, body = _manifest(
        "trajectory",
        {
            "graph": args.graph,
            "t_grid": [t_min, t_max, steps],
            "beta": beta,
            "window": args.window,
            "k_seed": pair.k,
        },
    )
    report = fit_report_text(fit, a_theory=rate.a_quadratic)
    _write_outputs(
        args.out,
        "trajectory",
        body,
        {
            "trajectory.csv": trajectory_to_csv(traj, canonical),
            "trajectory_fit.txt": report,
        },
    )
    print(report, end="")
    return 0


def cmd_fermi(args) -> int:
    spec = _load(args.graph)
    k_hint = args.k if args.k is not None else _default_k_hint(spec.graph)
    result = fermi_rate(spec.graph, k_hint)
    report = fermi_report_text(result)
    canonical, body = _manifest("fermi", {"graph": args.graph, "k": k_hint})
    _write_outputs(args.out, "fermi", body, {"fermi_report.txt": report})
    print(report, end="")
    return 0


def cmd_fit(args) -> int:
    try:
        text = Path(args.trace).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"no such file: {args.trace}") from None
    try:
        nu, mag = trace_from_csv(text)
    except ValueError as exc:
        raise InputError(f"{args.trace}: {exc}") from None
    window = None
    if args.window is not None:
        parts = args.window.split(":")
        if len(parts) != 2:
            raise InputError("--window must be min:max (Hz)")
        try:
            window = (float(parts[0]), float(parts[1]))
        except ValueError:
            raise InputError("non-numeric --window bound") from None
    outcome = fit_lineshape(nu, mag, args.order, window=window)
    canonical, body = _manifest(
        "fit",
        {"trace": args.trace, "order": args.order, "window": list(window) if window else None},
    )
    _write_outputs(
        args.out, "fit", body, {"fit_report.csv": fit_report_csv(outcome, canonical)}
    )
    model = outcome.model
    narrowest = int(np.argmin(np.abs(model.g)))
    for m in range(model.order):
        tag = "  <- smallest |g| (topological candidate)" if m == narrowest else ""
        print(
            f"resonance {m + 1}: nu = {model.nu[m]:.6g} Hz, g = {model.g[m]:.6g} Hz{tag}"
        )
    if not outcome.converged:
        print("warning: fit did not converge; best iterate reported", file=sys.stderr)
        return 3
    return 0


def cmd_validate(args) -> int:
    spec = _load(args.graph)
    g = spec.graph
    print(
        f"{args.graph}: {len(g.vertices)} vertices, {g.n_edges} edges, "
        f"{g.n_leads} leads; connected; invariants hold"
    )
    if args.k is not None:
        pair = embedded_eigenpair(g, args.k)
        print(
            f"embedded eigenvalue at k = {pair.k:.9g} m^-1 "
            f"(norm {pair.norm_check:.9g}, lead-vanishing null vector, "
            f"simplicity margin {pair.sigma_second:.3g})"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resonet",
        description="Metric-graph wave networks: sweeps, resonances, decay rates, line fits.",
    )
    parser.add_argument("--version", action="version", version=f"resonet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="|det S| over a frequency range at fixed t")
    p.add_argument("graph")
    p.add_argument("--t", type=float, default=0.0, help="sweep parameter (default 0)")
    p.add_argument("--nu", required=True, help="frequency grid min:max:steps in Hz")
    p.add_argument(
        "--beta",
        type=float,
        default=None,
        help="absorption coefficient m^-1/2 (default: graph file value, else 0)",
    )
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trajectory", help="continue the topological resonance over t")
    p.add_argument("graph")
    p.add_argument("--t-grid", default=None, help="t grid min:max:steps (default: graph sweep)")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--window", type=int, default=9, help="central points for the quadratic fit")
    p.add_argument("--k", type=float, default=None, help="embedded-eigenvalue hint, m^-1")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("fermi", help="decay-rate curvature at an embedded eigenvalue")
    p.add_argument("graph")
    p.add_argument("--k", type=float, default=None, help="embedded-eigenvalue hint, m^-1")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_fermi)

    p = sub.add_parser("fit", help="multi-Lorentzian fit of a sweep CSV")
    p.add_argument("trace")
    p.add_argument("--order", type=int, choices=(2, 3), required=True)
    p.add_argument("--window", default=None, help="fit window min:max in Hz")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("validate", help="lint a graph file; optional eigenvalue check")
    p.add_argument("graph")
    p.add_argument("--k", type=float, default=None, help="embedded-eigenvalue hint, m^-1")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, GraphSpecError) as exc:
        return _fail("input", str(exc), 2)
    except (FermiError, TrackerError, SolverError, LineshapeError) as exc:
        return _fail("numeric", str(exc), 3)
    except np.linalg.LinAlgError as exc:
        return _fail("numeric", f"linear algebra failure: {exc}", 3)


if __name__ == "__main__":
    sys.exit(main())
