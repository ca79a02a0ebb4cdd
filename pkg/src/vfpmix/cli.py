"""Command-line driver: ``vfpmix {dispersion,instability,stationary,lyapunov-audit,plot}``.

Every experiment reads an optional JSON config (strict schema, defaults
filled in), writes its CSV/JSON products into ``--out`` and records a
``manifest.json`` next to them. Exit codes: 0 ok, 2 config error, 3 solver
error, 4 every run of an ensemble failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from importlib import metadata
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, model_validator

from . import dispersion, simulator, stationary
from .errors import BlowUpError, ConvergenceError, FitError, NumericalError, PositivityError
from .simulator import PotentialSpec, SimConfig

log = logging.getLogger("vfpmix")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ALL_FAILED = 0, 2, 3, 4


class ConfigError(Exception):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class KGrid(_Strict):
    min: PositiveFloat = 0.01
    max: PositiveFloat = 0.2
    points: int = Field(default=20, ge=1)

    @model_validator(mode="after")
    def _order(self):
        if self.points > 1 and not self.max > self.min:
            raise ValueError("k_grid.max must exceed k_grid.min")
        return self

    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.points)


class DispersionConfig(_Strict):
    beta: PositiveFloat = 2.0
    potential: PotentialSpec = Field(default_factory=PotentialSpec)
    k_grid: KGrid = Field(default_factory=KGrid)
    # velocity modes e_0 .. e_{n_modes - 1}
    n_modes: int = Field(default=61, ge=5)
    fit_window: tuple[PositiveFloat, PositiveFloat] = dispersion.FIT_WINDOW
    fit_max_power: int = Field(default=dispersion.FIT_MAX_POWER, ge=4)
    remainder_k: list[PositiveFloat] = Field(default_factory=lambda: [0.02, 0.05, 0.1])


class InstabilityConfig(_Strict):
    simulation: SimConfig = Field(default_factory=SimConfig)
    epsilons: list[PositiveFloat] = Field(default_factory=lambda: [1e-3, 1e-4, 1e-5], min_length=1)

    @model_validator(mode="after")
    def _eps(self):
        if max(self.epsilons) >= self.simulation.delta0:
            raise ValueError("every epsilon must be below delta0")
        return self


class StationaryConfig(_Strict):
    beta: PositiveFloat = 2.0
    L: PositiveFloat = 5.0
    masses: tuple[PositiveFloat, PositiveFloat] = (1.0, 1.0)
    grid_points: int = Field(default=512, ge=8)
    relax: float = Field(default=0.5, gt=0, le=1)
    tol: PositiveFloat = 1e-10
    max_iter: PositiveInt = 200_000
    init: Literal["broken", "constant"] = "broken"
    amplitude: float = Field(default=0.5, ge=0, lt=1)
    potential: PotentialSpec = Field(default_factory=PotentialSpec)

    @model_validator(mode="after")
    def _support(self):
        if 2 * self.L < stationary.MIN_PERIOD:
            raise ValueError(f"2L = {2 * self.L} must be >= {stationary.MIN_PERIOD}")
        return self


class AuditConfig(_Strict):
    simulation: SimConfig = Field(default_factory=lambda: SimConfig(t_end=20.0, sample_every=1))
    h_tol: PositiveFloat = 1e-8
    mass_tol: PositiveFloat = 1e-10
    symmetry_tol: PositiveFloat = 1e-9


class RunManifest(_Strict):
    command: str
    config: dict
    outputs: list[str]
    version: str
    wall_clock_seconds: float


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def load_config(model: type[BaseModel], path: str | None) -> BaseModel:
    if path is None:
        return model()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return model.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}:\n{exc}") from exc


def _with_seed(cfg, seed):
    if seed is None:
        return cfg
    sim = cfg.simulation.model_copy(update={"seed": seed})
    return cfg.model_copy(update={"simulation": SimConfig.model_validate(sim.model_dump())})


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _finite_or_none(x):
    return None if x is None or not np.isfinite(x) else float(x)


# --- commands ---------------------------------------------------------------

def cmd_dispersion(cfg: DispersionConfig, out: Path, threads: int = 1) -> list[Path]:
    p = cfg.potential.build()
    N = cfg.n_modes - 1
    curve = dispersion.dispersion_scan(cfg.beta, p, cfg.k_grid.values(), N, threads=threads)
    report = {"beta": cfg.beta, "N": N, "lambda2_expected": (cfg.beta - 1) / cfg.beta,
              "unstable_k": curve.unstable_band.tolist(), "max_re_lambda": float(curve.lam.real.max())}
    try:
        report["fit"] = dispersion.verify_asymptotics(curve, tuple(cfg.fit_window), cfg.fit_max_power).as_dict()
    except FitError as exc:
        report["fit"] = None
        report["fit_error"] = str(exc)
    checks = []
    for k in cfg.remainder_k:
        if k > dispersion.K_MAX:
            continue
        direct = dispersion.solve_mode(k, cfg.beta, p, N).lam
        try:
            rem = dispersion.remainder_iteration(cfg.beta, k, p, N)
            checks.append({"k": k, "direct": [direct.real, direct.imag], "iterated": [rem.lam.real, rem.lam.imag],
                           "difference": abs(rem.lam - direct), "iterations": rem.iterations,
                           "max_contraction": float(np.max(rem.contraction_factors, initial=0.0))})
        except ConvergenceError as exc:
            checks.append({"k": k, "direct": [direct.real, direct.imag], "error": str(exc)})
    report["remainder_check"] = checks
    csv_path, json_path = out / "dispersion.csv", out / "fit_report.json"
    curve.to_csv(csv_path)
    write_json(json_path, report)
    return [csv_path, json_path]


def cmd_instability(cfg: InstabilityConfig, out: Path, threads: int = 1) -> tuple[list[Path], bool]:
    sim = cfg.simulation
    outcomes = simulator.run_ensemble(sim, cfg.epsilons, threads=threads)
    paths = []
    runs = []
    for i, o in enumerate(outcomes):
        entry = {"epsilon": o.epsilon, "escape_time": o.escape, "measured_rate": o.rate, "error": o.error}
        if o.series is not None:
            path = out / f"series_{i:02d}.csv"
            o.series.to_csv(path)
            paths.append(path)
            entry["series"] = path.name
            entry.update({k: v for k, v in o.series.info.items() if k != "lambda1"})
        runs.append(entry)
    ok = [o for o in outcomes if o.series is not None]
    lam1 = next((o.series.info["lambda1"] for o in ok), None)
    if lam1 is None:
        lam1 = simulator.select_mode(sim).lam.real
    reached = [o for o in ok if o.escape is not None]
    slope = intercept = None
    if len(reached) >= 2:
        slope, intercept = simulator.fit_escape_times([o.epsilon for o in reached], [o.escape for o in reached])
    payload = {"epsilons": list(cfg.epsilons), "escape_times": [o.escape for o in outcomes],
               "fitted_slope": slope, "fitted_intercept": intercept, "lambda1_reference": lam1,
               "slope_times_lambda1": None if slope is None else slope * lam1,
               "delta0": sim.delta0, "runs": runs}
    path = out / "ensemble.json"
    write_json(path, payload)
    return paths + [path], bool(ok)


def cmd_stationary(cfg: StationaryConfig, out: Path) -> list[Path]:
    p = cfg.potential.build()
    make = stationary.broken_profile if cfg.init == "broken" else stationary.constant_profile
    kwargs = {"amplitude": cfg.amplitude} if cfg.init == "broken" else {}
    init = make(cfg.L, cfg.grid_points, cfg.masses, **kwargs)
    res = stationary.stationary_fixed_point(cfg.beta, p, cfg.L, cfg.masses, init, cfg.relax, cfg.tol, cfg.max_iter)
    prof = res.profile
    const = stationary.constant_profile(cfg.L, cfg.grid_points, cfg.masses)
    F, F_const = stationary.free_energy(prof, cfg.beta, p), stationary.free_energy(const, cfg.beta, p)
    deviation = float(max(np.abs(prof.rho1 - cfg.masses[0]).max(), np.abs(prof.rho2 - cfg.masses[1]).max()))
    summary = {"beta": cfg.beta, "L": cfg.L, "F": F, "F_constant": F_const, "F_difference": F - F_const,
               "residual": res.residual, "iterations": res.iterations, "max_deviation_from_constant": deviation,
               "masses": list(prof.masses())}
    csv_path, json_path = out / "profile.csv", out / "stationary.json"
    prof.to_csv(csv_path)
    write_json(json_path, summary)
    return [csv_path, json_path]


def cmd_lyapunov_audit(cfg: AuditConfig, out: Path) -> list[Path]:
    sim = cfg.simulation
    series = simulator.run(sim)
    H = series.H
    rel = np.diff(H) / np.abs(H[:-1])
    mass = np.stack([series.column("mass1"), series.column("mass2")])
    span = max(series.t[-1] - series.t[0], sim.dt)
    drift = float(np.abs(mass - mass[:, :1]).max() / span)
    result = {
        "samples": int(series.t.size),
        "steps_per_sample": sim.sample_every,
        "max_relative_H_increase": _finite_or_none(np.nanmax(rel)) if rel.size else None,
        "H_undefined_samples": int(np.isnan(H).sum()),
        "mass_drift_per_time": drift,
        "max_symmetry_defect": float(series.column("symmetry_defect").max()),
        "initial_min_f": float(series.column("positivity_min")[0]),
    }
    result["checks"] = {
        "H_nonincreasing": bool(rel.size and np.all(rel[np.isfinite(rel)] <= cfg.h_tol) and not np.isnan(H).any()),
        "mass": drift <= cfg.mass_tol,
        "symmetry": result["max_symmetry_defect"] <= cfg.symmetry_tol,
        "initial_positivity": result["initial_min_f"] >= 0,
    }
    result.update(series.info)
    csv_path, json_path = out / "audit_series.csv", out / "lyapunov_audit.json"
    series.to_csv(csv_path)
    write_json(json_path, result)
    return [csv_path, json_path]


def read_columns(path: Path) -> dict[str, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise ConfigError(f"{path} has no data rows")
    header = rows[0]
    try:
        data = np.array(rows[1:], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path} has non-numeric data: {exc}") from exc
    return {name: data[:, i] for i, name in enumerate(header)}


def cmd_plot(csv_path: Path, x: str, ys: list[str], svg: Path, logy: bool = False) -> list[Path]:
    cols = read_columns(csv_path)
    missing = [c for c in [x, *ys] if c not in cols]
    if missing:
        raise ConfigError(f"columns {missing} not in {csv_path} (have {list(cols)})")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "vfpmix", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for y in ys:
            vals = cols[y]
            ax.plot(cols[x], np.abs(vals) if logy else vals, label=y)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(x)
        ax.legend()
        fig.tight_layout()
        fig.savefig(svg, format="svg", metadata={"Date": None})
        plt.close(fig)
    return [svg]


# --- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (defaults used when omitted)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed recorded in the manifest")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="vfpmix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("dispersion", "instability", "stationary", "lyapunov-audit"):
        sub.add_parser(name, parents=[common])
    plot = sub.add_parser("plot", parents=[common])
    plot.add_argument("csv", help="input CSV")
    plot.add_argument("--x", default=None, help="x column (default: first column)")
    plot.add_argument("--y", action="append", help="y column; repeat for several (default: second column)")
    plot.add_argument("--log", action="store_true", help="log-scale y axis of |y|")
    plot.add_argument("--svg", default=None, help="output SVG path (default: <out>/<csv stem>.svg)")
    return parser


def _dispatch(args, out: Path):
    if args.command == "dispersion":
        cfg = load_config(DispersionConfig, args.config)
        return cfg, cmd_dispersion(cfg, out, args.threads), True
    if args.command == "instability":
        cfg = _with_seed(load_config(InstabilityConfig, args.config), args.seed)
        paths, ok = cmd_instability(cfg, out, args.threads)
        return cfg, paths, ok
    if args.command == "stationary":
        cfg = load_config(StationaryConfig, args.config)
        return cfg, cmd_stationary(cfg, out), True
    if args.command == "lyapunov-audit":
        cfg = _with_seed(load_config(AuditConfig, args.config), args.seed)
        return cfg, cmd_lyapunov_audit(cfg, out), True
    csv_path = Path(args.csv)
    if not csv_path.is_file():
        raise ConfigError(f"no such CSV: {csv_path}")
    with open(csv_path, newline="") as fh:
        header = next(csv.reader(fh), [])
    if len(header) < 2:
        raise ConfigError(f"{csv_path} needs at least two columns")
    x = args.x or header[0]
    ys = args.y or [header[1]]
    svg = Path(args.svg) if args.svg else out / f"{csv_path.stem}.svg"
    cfg = {"csv": str(csv_path), "x": x, "y": ys, "log": args.log}
    return cfg, cmd_plot(csv_path, x, ys, svg, args.log), True


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        cfg, paths, ok = _dispatch(args, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, NumericalError, BlowUpError, PositivityError, FitError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        # parameter combinations rejected below the schema layer
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    snapshot = cfg.model_dump(mode="json") if isinstance(cfg, BaseModel) else cfg
    manifest = RunManifest(command=args.command, config=snapshot, outputs=[p.name for p in paths],
                           version=tool_version(), wall_clock_seconds=time.perf_counter() - start)
    write_json(out / "manifest.json", manifest.model_dump(mode="json"))
    if not ok:
        print("error: every run failed", file=sys.stderr)
        return EXIT_ALL_FAILED
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
