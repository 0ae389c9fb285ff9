"""Command-line driver: ``collbreak {run,eoc,grid,validate-kernel}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import analysis
from .grid import GridError, KINDS
from .integrator import IntegrationError, IntegratorConfig, integrate
from .kernels import KernelError, KernelSpec2D, QuadratureError, builtin, default_sample_points, validate
from .reference import ReferenceError
from .scheme1d import BOUNDARY_POLICIES, METHODS, Scheme1D
from .scheme2d import Grid2D, Scheme2D, State2D

log = logging.getLogger("collbreak")

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
INITIAL_CONDITIONS = ("monodisperse_top_cell",)


class ConfigError(ValueError):
    pass


def _strict(cls, d: dict, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object")
    names = {f.name for f in fields(cls)}
    extra = sorted(set(d) - names)
    if extra:
        raise ConfigError(f"unknown keys in {where}: {extra}")
    return cls(**d)


@dataclass
class GridConfig:
    family: str = "geometric"
    cells: int = 30
    x_min: float = 1e-9
    x_max: float = 1.0
    seed: int | None = None
    max_ratio: float = 4.0
    anchor: bool = True
    segments: list | None = None

    def check(self) -> None:
        if self.family not in KINDS:
            raise ConfigError(f"grid.family must be one of {KINDS}, got {self.family!r}")
        if (self.family == "random") != (self.seed is not None):
            raise ConfigError("grid.seed is required for the random family and only there")
        if not isinstance(self.cells, int) or self.cells < 1:
            raise ConfigError("grid.cells must be a positive integer")

    def build(self):
        segs = [tuple(s) for s in self.segments] if self.segments else None
        return analysis.family_grid(self.family, self.cells, x_min=self.x_min, x_max=self.x_max,
                                    seed=self.seed, max_ratio=self.max_ratio, anchor=self.anchor,
                                    segments=segs)


@dataclass
class EOCConfig:
    base_cells: int = 30
    doublings: int = 4
    families: list = field(default_factory=lambda: ["geometric", "uniform", "locally_uniform", "random"])
    refinement: str = "rebuild"
    reference: str = "auto"
    seed: int = 42


@dataclass
class RunConfig:
    dimension: int = 1
    scheme: str = "vam"
    kernel: str = "example_5_1"
    grid: GridConfig = field(default_factory=GridConfig)
    boundary: str = "origin"
    t_end: float = 1.0
    integrator: dict = field(default_factory=lambda: {"method": "rk45_adaptive"})
    initial_condition: str = "monodisperse_top_cell"
    eoc: EOCConfig = field(default_factory=EOCConfig)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        grid = _strict(GridConfig, d.pop("grid", {}), "grid")
        eoc = _strict(EOCConfig, d.pop("eoc", {}), "eoc")
        cfg = _strict(cls, d, "config")
        cfg.grid, cfg.eoc = grid, eoc
        cfg.check()
        return cfg

    def check(self) -> None:
        if self.dimension not in (1, 2):
            raise ConfigError("dimension must be 1 or 2")
        allowed = METHODS if self.dimension == 1 else ("vam2d",)
        if self.scheme not in allowed:
            raise ConfigError(f"scheme must be one of {allowed} in {self.dimension}D, got {self.scheme!r}")
        if self.boundary not in BOUNDARY_POLICIES:
            raise ConfigError(f"boundary must be one of {BOUNDARY_POLICIES}")
        if self.initial_condition not in INITIAL_CONDITIONS:
            raise ConfigError(f"initial_condition must be one of {INITIAL_CONDITIONS}")
        if "t_end" in self.integrator:
            raise ConfigError("set t_end at the top level, not inside integrator")
        self.grid.check()
        try:
            kern = builtin(self.kernel)
        except KernelError as exc:
            raise ConfigError(str(exc)) from None
        if isinstance(kern, KernelSpec2D) != (self.dimension == 2):
            raise ConfigError(f"kernel {self.kernel!r} does not match dimension {self.dimension}")
        self.integrator_config()

    def integrator_config(self) -> IntegratorConfig:
        try:
            return IntegratorConfig.from_dict({**self.integrator, "t_end": self.t_end})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"integrator: {exc}") from None

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path: str | None, seed: int | None = None) -> RunConfig:
    raw = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    if seed is not None:
        grid = dict(raw.get("grid", {}))
        if grid.get("family") == "random":
            grid["seed"] = seed
        raw = {**raw, "grid": grid, "eoc": {**raw.get("eoc", {}), "seed": seed}}
    try:
        return RunConfig.from_dict(raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def cmd_run(cfg: RunConfig, out: Path) -> dict:
    kernel = builtin(cfg.kernel)
    icfg = cfg.integrator_config()
    if cfg.dimension == 1:
        grid = cfg.grid.build()
        scheme = Scheme1D(grid, kernel, cfg.scheme, cfg.boundary)
        n0 = analysis.monodisperse(grid)
    else:
        axis = cfg.grid.build()
        grid = Grid2D(axis, axis)
        scheme = Scheme2D(grid, kernel, cfg.boundary)
        n0 = np.zeros(grid.shape)
        n0[-1, -1] = 1.0
    series = integrate(scheme, n0, icfg, scheme.max_death_rate)
    out.mkdir(parents=True, exist_ok=True)
    series.write_csv(out / "moments.csv", lambda s: analysis.moments(grid, s))

    final = series.final
    if cfg.dimension == 1:
        with open(out / "density.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "x", "width", "N", "density"])
            dens = analysis.number_density(grid, final)
            for i, (x, dx, n, d) in enumerate(zip(grid.pivots, grid.widths, final, dens)):
                w.writerow([i, _fmt(x), _fmt(dx), _fmt(n), _fmt(d)])
        m_key = "M1"
    else:
        State2D(grid, final).write_csv(out / "density.csv")
        m_key = "M11"

    m0 = analysis.moments(grid, series.states[0])
    m1 = analysis.moments(grid, final)
    diag = {
        "kernel": kernel.name, "scheme": cfg.scheme, "dimension": cfg.dimension,
        "boundary": cfg.boundary, "integrator": icfg.method, "steps": series.steps,
        "dt": series.dt_used, "negativity_clips": len(series.clips),
        "clipped_total": series.clipped_total(),
        "drift_moment": m_key,
        "mass_drift": abs(m1[m_key] - m0[m_key]) / m0[m_key] if m0[m_key] else None,
        "final": scheme.diagnostics(final.ravel()),
        "grid": {"cells": list(grid.shape) if cfg.dimension == 2 else grid.cells,
                 "x_max": (grid.axis1 if cfg.dimension == 2 else grid).x_max,
                 "ratio": (grid.axis1 if cfg.dimension == 2 else grid).ratio},
        "config": cfg.to_dict(),
    }
    _dump_json(out / "diagnostics.json", diag)
    log.info("run finished: %d steps, mass drift %.3e", series.steps, diag["mass_drift"])
    return diag


def cmd_eoc(cfg: RunConfig, out: Path, doublings: int | None = None) -> list:
    if cfg.dimension != 1:
        raise ConfigError("EOC studies are 1D only")
    e = cfg.eoc
    reports = []
    for fam in e.families:
        if fam not in KINDS:
            raise ConfigError(f"unknown family {fam!r} in eoc.families")
        r = analysis.eoc_study(
            cfg.kernel, fam, base_cells=e.base_cells, doublings=doublings or e.doublings,
            t_end=cfg.t_end, method=cfg.scheme, seed=e.seed if fam == "random" else None,
            x_min=cfg.grid.x_min, anchor=cfg.grid.anchor, boundary=cfg.boundary,
            max_ratio=cfg.grid.max_ratio, refinement=e.refinement, reference_mode=e.reference,
            config=cfg.integrator_config())
        log.info("%s: final EOC %.3f", fam, r.eoc[-1])
        reports.append(r)
    out.mkdir(parents=True, exist_ok=True)
    analysis.write_eoc_csv(out / "eoc.csv", reports)
    (out / "eoc.md").write_text(analysis.eoc_markdown(reports))
    return reports


def cmd_grid(cfg: RunConfig, out: Path):
    g = cfg.grid.build()
    out.mkdir(parents=True, exist_ok=True)
    (out / "grid.json").write_text(g.to_json() + "\n")
    g.write_csv(out / "grid.csv")
    return g


def cmd_validate_kernel(name: str, out: Path | None):
    try:
        spec = builtin(name)
    except KernelError as exc:
        raise ConfigError(str(exc)) from None
    if isinstance(spec, KernelSpec2D):
        raise ConfigError("validate-kernel checks 1D kernels")
    report = validate(spec, default_sample_points())
    print(report)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _dump_json(out / "validation.json", report.to_dict())
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="collbreak", description="Sectional solver for collisional breakage.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="random-grid seed, overrides the config")
    common.add_argument("--quiet", action="store_true", help="only print errors")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="integrate one configuration")
    e = sub.add_parser("eoc", parents=[common], help="convergence-order study")
    e.add_argument("--doublings", type=int, help="override eoc.doublings")
    sub.add_parser("grid", parents=[common], help="write the configured grid")
    v = sub.add_parser("validate-kernel", parents=[common], help="check kernel properties")
    v.add_argument("name", help="builtin kernel, e.g. example_5_1 or product_xy:parabolic_12x")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out or "out")
    try:
        if args.command == "validate-kernel":
            report = cmd_validate_kernel(args.name, Path(args.out) if args.out else None)
            return 0 if report.ok else 1
        cfg = load_config(args.config, args.seed)
        if args.command == "run":
            cmd_run(cfg, out)
        elif args.command == "eoc":
            if args.doublings is not None and args.doublings < 1:
                raise ConfigError("--doublings must be at least 1")
            reports = cmd_eoc(cfg, out, args.doublings)
            if not args.quiet:
                print(analysis.eoc_markdown(reports))
        elif args.command == "grid":
            cmd_grid(cfg, out)
    except (ConfigError, KernelError, GridError, ReferenceError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, QuadratureError, FloatingPointError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        detail = getattr(exc, "diagnostics", None)
        if detail:
            print(json.dumps(detail, sort_keys=True), file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
