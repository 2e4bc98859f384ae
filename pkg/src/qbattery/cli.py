"""Command-line front end: ``qbattery solve|sweep|verify|figure``.

Exit codes: 0 success, 2 configuration error, 3 solver error,
4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .closed_form import amplitudes
from .core import (
    PARAM_KEYS,
    AmplitudeTrajectory,
    InitialState,
    KernelMode,
    ParameterError,
    SolutionMode,
    SolverError,
    SystemParams,
    TimeGrid,
    config_from_dict,
    config_to_dict,
)
from .observables import ObservableTrajectory, late_time_mean, observables_from_trajectory
from .oracle import bath_for_horizon, exponential_kernel_amplitude, solve_discrete_modes, solve_volterra
from .svgplot import Series, line_plot

log = logging.getLogger("qbattery")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4

CSV_HEADER = ("t_lambda", "re_c1", "im_c1", "re_c2", "im_c2", "p_charger", "p_battery", "dE_A", "dE_B", "W", "eta")
VERIFY_TOL = 1e-3
VOLTERRA_MAX_STEP = 0.005
DISCRETE_MAX_OMEGA0 = 100.0
LATE_FRACTION = 2.0 / 3.0


def fmt(x: float) -> str:
    """Locale-independent round-trip formatting; NaN becomes an empty field."""
    x = float(x)
    if math.isnan(x):
        return ""
    return format(x + 0.0, ".17g")  # + 0.0 folds -0.0 into 0.0


# -- configuration -----------------------------------------------------------


def read_json(path: str | Path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParameterError(f"cannot read {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: malformed JSON: {exc}") from None


def config_digest(cfg: Mapping[str, Any]) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def apply_overrides(cfg: Mapping[str, Any], mode: str | None = None, kernel: str | None = None) -> dict[str, Any]:
    out = dict(cfg)
    if mode is not None:
        out["solution_mode"] = mode
    if kernel is not None:
        out["kernel_mode"] = kernel
    return out


@dataclass(frozen=True)
class RunManifest:
    params: SystemParams
    init: InitialState
    grid: TimeGrid
    config_digest: str
    version: str = __version__

    def to_dict(self) -> dict[str, Any]:
        return {
            "tool": "qbattery",
            "version": self.version,
            "config_digest": self.config_digest,
            "resolved": config_to_dict(self.params, self.init, self.grid),
            "kernel_mode": self.params.kernel_mode.value,
            "solution_mode": self.params.solution_mode.value,
        }


# -- single runs -------------------------------------------------------------


def simulate(params: SystemParams, init: InitialState, grid: TimeGrid) -> tuple[AmplitudeTrajectory, ObservableTrajectory]:
    traj = amplitudes(params, init, grid)
    for w in traj.warnings:
        log.warning(w)
    return traj, observables_from_trajectory(traj, init)


def write_csv(path: str | Path, traj: AmplitudeTrajectory, obs: ObservableTrajectory) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        cols = (
            traj.t,
            traj.c1.real,
            traj.c1.imag,
            traj.c2.real,
            traj.c2.imag,
            obs.p_charger,
            obs.p_battery,
            obs.dE_A,
            obs.dE_B,
            obs.W,
            obs.eta,
        )
        for row in zip(*cols):
            writer.writerow([fmt(v) for v in row])


def write_json(path: str | Path, data: Any) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_single(config_path, out_path, mode: str | None = None, kernel: str | None = None) -> Path:
    """Solve one configuration and write the trajectory CSV plus a manifest."""
    raw = read_json(config_path)
    cfg = apply_overrides(raw, mode, kernel)
    params, init, grid = config_from_dict(cfg)
    traj, obs = simulate(params, init, grid)
    out = Path(out_path)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, traj, obs)
    manifest = RunManifest(params, init, grid, config_digest(raw))
    write_json(out.with_name(out.name + ".manifest.json"), manifest.to_dict())
    return out


# -- sweeps ------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    base: dict[str, Any]
    names: tuple[str, ...]
    values: tuple[tuple[float, ...], ...]

    def points(self) -> list[dict[str, float]]:
        return [dict(zip(self.names, combo)) for combo in itertools.product(*self.values)]


def parse_sweep(doc: Any, base_dir: Path) -> SweepSpec:
    if not isinstance(doc, Mapping) or set(doc) != {"base", "sweep"}:
        raise ParameterError("sweep file must be an object with keys 'base' and 'sweep'")
    base = doc["base"]
    if isinstance(base, str):
        base = read_json(base_dir / base)
    if not isinstance(base, Mapping):
        raise ParameterError("sweep 'base' must be a configuration object or a path to one")
    sweep = doc["sweep"]
    if not isinstance(sweep, Mapping) or not 1 <= len(sweep) <= 2:
        raise ParameterError("'sweep' must map one or two parameter names to value lists")
    names, values = [], []
    for name, vals in sweep.items():
        if name not in PARAM_KEYS:
            raise ParameterError(f"cannot sweep {name!r}; choose from {', '.join(PARAM_KEYS)}")
        if not isinstance(vals, list) or not vals:
            raise ParameterError(f"sweep values for {name!r} must be a non-empty list")
        for v in vals:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParameterError(f"sweep value {v!r} for {name!r} is not a number")
        names.append(name)
        values.append(tuple(float(v) for v in vals))
    return SweepSpec(base=dict(base), names=tuple(names), values=tuple(values))


def point_filename(point: Mapping[str, float]) -> str:
    return "__".join(f"{k}={v!r}" for k, v in point.items()) + ".csv"


def worker_count() -> int:
    raw = os.environ.get("QBATTERY_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ParameterError(f"QBATTERY_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ParameterError(f"QBATTERY_THREADS must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def run_sweep(sweep_path, out_dir, mode: str | None = None, kernel: str | None = None) -> Path:
    """Solve every sweep point; write one CSV per point and ``index.csv``."""
    sweep_path = Path(sweep_path)
    spec = parse_sweep(read_json(sweep_path), sweep_path.parent)
    points = spec.points()
    jobs = []
    for point in points:
        cfg = apply_overrides({**spec.base, **point}, mode, kernel)
        jobs.append(config_from_dict(cfg))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=min(worker_count(), len(jobs))) as pool:
        results = list(pool.map(lambda job: simulate(*job), jobs))

    index_rows = []
    for point, (params, init, grid), (traj, obs) in zip(points, jobs, results):
        name = point_filename(point)
        write_csv(out / name, traj, obs)
        start = LATE_FRACTION * grid.t_max
        index_rows.append(
            [name]
            + [fmt(point[n]) for n in spec.names]
            + [
                fmt(late_time_mean(obs.t, obs.dE_B, start)),
                fmt(late_time_mean(obs.t, obs.W, start)),
                fmt(late_time_mean(obs.t, obs.eta, start)),
            ]
        )
    index = out / "index.csv"
    with open(index, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["file", *spec.names, "late_mean_dE_B", "late_mean_W", "late_mean_eta"])
        writer.writerows(index_rows)
    return index


# -- verification ------------------------------------------------------------


def discrepancy(a: AmplitudeTrajectory, b: AmplitudeTrajectory) -> dict[str, float]:
    out = {}
    for name in ("c1", "c2"):
        diff = np.abs(np.abs(getattr(a, name)) - np.abs(getattr(b, name)))
        out[f"linf_{name}"] = float(diff.max())
        out[f"l2_{name}"] = float(np.sqrt(np.mean(diff**2)))
    out["linf"] = max(out["linf_c1"], out["linf_c2"])
    return out


def _worst_points(a: AmplitudeTrajectory, b: AmplitudeTrajectory, count: int = 10) -> list[dict[str, float]]:
    diff = np.maximum(np.abs(np.abs(a.c1) - np.abs(b.c1)), np.abs(np.abs(a.c2) - np.abs(b.c2)))
    order = np.argsort(-diff, kind="stable")[:count]
    return [
        {
            "t_lambda": float(a.t[i]),
            "abs_c1_closed_form": float(abs(a.c1[i])),
            "abs_c1_volterra": float(abs(b.c1[i])),
            "abs_c2_closed_form": float(abs(a.c2[i])),
            "abs_c2_volterra": float(abs(b.c2[i])),
            "discrepancy": float(diff[i]),
        }
        for i in sorted(order)
    ]


def _subsample(traj: AmplitudeTrajectory, factor: int) -> AmplitudeTrajectory:
    return AmplitudeTrajectory(t=traj.t[::factor], c1=traj.c1[::factor], c2=traj.c2[::factor])


def verify(params: SystemParams, init: InitialState, grid: TimeGrid) -> dict[str, Any]:
    """Compare the closed form with the independent solvers on ``grid``."""
    exact_params = params.replace(solution_mode=SolutionMode.TWO_BRANCH)
    closed = amplitudes(exact_params, init, grid)
    factor = max(1, math.ceil(grid.step / VOLTERRA_MAX_STEP - 1e-9))
    fine = TimeGrid(grid.t_max, grid.n_steps * factor)
    volterra = _subsample(solve_volterra(params, init, fine), factor)

    report: dict[str, Any] = {
        "tolerance": VERIFY_TOL,
        "volterra_step": fine.step,
        "closed_form_vs_volterra": discrepancy(closed, volterra),
    }
    solvers = {"closed_form": closed, "volterra": volterra}
    if params.omega0 <= DISCRETE_MAX_OMEGA0:
        bath = bath_for_horizon(params, grid.t_max)
        discrete = solve_discrete_modes(params, bath, init, grid)
        solvers["discrete_modes"] = discrete
        report["discrete_bath"] = {
            "n_modes": bath.n_modes,
            "gamma_cavity": bath.gamma_cavity,
            "coverage": bath.coverage,
        }
        report["closed_form_vs_discrete_modes"] = discrepancy(closed, discrete)
        report["volterra_vs_discrete_modes"] = discrepancy(volterra, discrete)
    if params.d_coupling == 0 and params.beta == 0 and params.delta == 0:
        m = exponential_kernel_amplitude(params.gamma, grid.times)
        analytic = AmplitudeTrajectory(t=grid.times, c1=init.c1_0 * m, c2=init.c2_0 * m)
        report["analytic"] = {name: discrepancy(traj, analytic) for name, traj in solvers.items()}
    if params.solution_mode is SolutionMode.PAPER_LITERAL:
        literal = amplitudes(params, init, grid)
        report["paper_literal_vs_two_branch"] = discrepancy(literal, closed)
    passed = report["closed_form_vs_volterra"]["linf"] <= VERIFY_TOL
    report["passed"] = passed
    if not passed:
        report["worst_points"] = _worst_points(closed, volterra)
    return report


def run_verify(config_path, mode: str | None = None, kernel: str | None = None) -> dict[str, Any]:
    cfg = apply_overrides(read_json(config_path), mode, kernel)
    return verify(*config_from_dict(cfg))


def format_report(report: Mapping[str, Any]) -> str:
    lines = []
    for key, value in report.items():
        if isinstance(value, Mapping) and all(isinstance(v, float) for v in value.values()):
            body = " ".join(f"{k}={v:.3e}" for k, v in value.items())
            lines.append(f"{key}: {body}")
        elif key == "analytic":
            for name, d in value.items():
                lines.append(f"analytic_vs_{name}: linf={d['linf']:.3e}")
        elif key == "worst_points":
            lines.append("worst time points (closed form vs volterra):")
            for row in value:
                lines.append(
                    "  t={t_lambda:.6g} |c1| {abs_c1_closed_form:.9f} vs {abs_c1_volterra:.9f}  "
                    "|c2| {abs_c2_closed_form:.9f} vs {abs_c2_volterra:.9f}  diff={discrepancy:.3e}".format(**row)
                )
        else:
            lines.append(f"{key}: {value}")
    lines.append("PASS" if report.get("passed") else "FAIL")
    return "\n".join(lines)


# -- figures -----------------------------------------------------------------


@dataclass(frozen=True)
class FigureSpec:
    quantity: str
    y_label: str
    betas: tuple[float, ...]
    y_range: tuple[float, float] = (0.0, 1.0)


FIGURES = {
    "fig2": FigureSpec("dE_B", "ΔE_B / ω₀", (0.0, 3e-10, 5e-10, 8e-10)),
    "fig3": FigureSpec("dE_B,abs_dE_A", "ΔE_B, |ΔE_A| / ω₀", (0.0, 7e-10)),
    "fig4": FigureSpec("W", "W / W_max (W_max = ω₀)", (0.0, 3e-10, 5e-10, 8e-10)),
    "fig5": FigureSpec("eta", "efficiency η", (0.0, 3e-10, 5e-10, 8e-10)),
}
PANELS = {
    "a": {"gamma": 0.1, "t_max": 30.0, "label": "Markovian, γ = 0.1λ"},
    "b": {"gamma": 20.0, "t_max": 10.0, "label": "non-Markovian, γ = 20λ"},
}
FIGURE_IDS = tuple(f"{fig}{panel}" for fig in FIGURES for panel in PANELS)
FIGURE_OMEGA0 = 1.5e9
FIGURE_D = 0.3
FIGURE_STEP = 0.01


def figure_setup(
    figure_id: str,
    delta_fig2_caption: bool = False,
    mode: str | None = None,
    kernel: str | None = None,
    t_max: float | None = None,
    n_steps: int | None = None,
) -> tuple[FigureSpec, list[tuple[SystemParams, InitialState, TimeGrid]]]:
    if figure_id not in FIGURE_IDS:
        raise ParameterError(f"unknown figure id {figure_id!r}; choose from {', '.join(FIGURE_IDS)}")
    spec = FIGURES[figure_id[:-1]]
    panel = PANELS[figure_id[-1]]
    horizon = panel["t_max"] if t_max is None else t_max
    steps = n_steps if n_steps is not None else int(round(horizon / FIGURE_STEP))
    grid = TimeGrid(horizon, steps)
    delta = 0.3 if (delta_fig2_caption and figure_id.startswith("fig2")) else 0.0
    base = SystemParams(
        omega0=FIGURE_OMEGA0,
        gamma=panel["gamma"],
        d_coupling=FIGURE_D,
        delta=delta,
        kernel_mode=KernelMode(kernel or "consistent"),
        solution_mode=SolutionMode(mode or "two_branch"),
    )
    # charger carries the excitation, battery starts empty
    init = InitialState(1.0, 0.0)
    return spec, [(base.replace(beta=beta), init, grid) for beta in spec.betas]


def figure_columns(spec: FigureSpec, beta: float, obs: ObservableTrajectory) -> list[tuple[str, np.ndarray]]:
    cols = []
    for q in spec.quantity.split(","):
        values = np.abs(obs.dE_A) if q == "abs_dE_A" else getattr(obs, q)
        cols.append((f"{q}[beta={beta!r}]", values))
    return cols


def run_figure(
    figure_id: str,
    out_dir,
    delta_fig2_caption: bool = False,
    mode: str | None = None,
    kernel: str | None = None,
    t_max: float | None = None,
    n_steps: int | None = None,
) -> tuple[Path, Path]:
    """Write ``<figure_id>.csv`` and ``<figure_id>.svg`` into ``out_dir``."""
    spec, jobs = figure_setup(figure_id, delta_fig2_caption, mode, kernel, t_max, n_steps)
    with ThreadPoolExecutor(max_workers=min(worker_count(), len(jobs))) as pool:
        results = list(pool.map(lambda job: simulate(*job), jobs))
    t = results[0][1].t
    columns: list[tuple[str, np.ndarray]] = []
    series = []
    for (params, _, _), (_, obs) in zip(jobs, results):
        for j, (name, values) in enumerate(figure_columns(spec, params.beta, obs)):
            columns.append((name, values))
            series.append(Series(label=name, x=t, y=values, dashed=j > 0))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{figure_id}.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t_lambda", *(name for name, _ in columns)])
        for i in range(len(t)):
            writer.writerow([fmt(t[i]), *(fmt(values[i]) for _, values in columns)])
    panel = PANELS[figure_id[-1]]
    svg = line_plot(
        series,
        x_label="λt",
        y_label=spec.y_label,
        x_range=(0.0, float(t[-1])),
        y_range=spec.y_range,
        title=f"{figure_id}: {panel['label']}, D = 0.3λ",
    )
    svg_path = out / f"{figure_id}.svg"
    with open(svg_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    return csv_path, svg_path


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbattery", description="Open moving-qubit quantum battery simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--mode", choices=[m.value for m in SolutionMode], help="override the config's solution_mode")
        p.add_argument("--kernel", choices=[m.value for m in KernelMode], help="override the config's kernel_mode")

    p = sub.add_parser("solve", help="solve one configuration and write a CSV trajectory")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    common(p)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument("--config", required=True, help="sweep JSON: {'base': config, 'sweep': {name: [values]}}")
    p.add_argument("--out", required=True, help="output directory")
    common(p)

    p = sub.add_parser("verify", help="compare the closed form with the brute-force solvers")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="optional JSON report path")
    common(p)

    p = sub.add_parser("figure", help="regenerate a figure dataset and SVG plot")
    p.add_argument("figure_id", choices=FIGURE_IDS)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--delta-fig2-caption", action="store_true", help="use Delta = 0.3 lambda for fig2")
    p.add_argument("--t-max", type=float)
    p.add_argument("--n-steps", type=int)
    common(p)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            path = run_single(args.config, args.out, args.mode, args.kernel)
            print(path)
        elif args.command == "sweep":
            print(run_sweep(args.config, args.out, args.mode, args.kernel))
        elif args.command == "verify":
            report = run_verify(args.config, args.mode, args.kernel)
            if args.out:
                write_json(args.out, report)
            print(format_report(report))
            if not report["passed"]:
                return EXIT_VERIFY
        elif args.command == "figure":
            for path in run_figure(
                args.figure_id, args.out, args.delta_fig2_caption, args.mode, args.kernel, args.t_max, args.n_steps
            ):
                print(path)
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
