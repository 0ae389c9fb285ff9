"""Moments, error norms and convergence-order studies."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from . import reference as ref
from .grid import Grid, GridError, _affine, anchor_top_pivot, bisect, build_family
from .integrator import IntegratorConfig, integrate
from .kernels import ALIASES, KernelSpec, builtin
from .reference import ReferenceError, project_reference, reference, reference_density
from .scheme1d import Scheme1D
from .scheme2d import Grid2D

log = logging.getLogger(__name__)

MOMENT_ORDERS_2D = ((0, 0), (1, 0), (0, 1), (1, 1))


# -- moments -----------------------------------------------------------------

def moments(grid, state, orders=None) -> dict[str, float]:
    """Discrete moments ``sum x^r N``; 2D grids give ``M{r1}{r2}``."""
    n = np.asarray(state, dtype=float)
    if isinstance(grid, Grid2D):
        n = n.reshape(grid.shape)
        x1, x2 = grid.mesh()
        return {f"M{a}{b}": float(np.sum(x1**a * x2**b * n)) for a, b in (orders or MOMENT_ORDERS_2D)}
    if n.shape != (grid.cells,):
        raise ValueError(f"state of length {n.size} on a {grid.cells}-cell grid")
    x = grid.pivots
    return {f"M{r}": float(np.dot(x**r, n)) for r in (orders or (0, 1, 2, 3))}


@dataclass
class MomentSeries:
    times: list[float]
    rows: list[dict[str, float]]

    @classmethod
    def from_states(cls, grid, times, states) -> "MomentSeries":
        return cls(list(times), [moments(grid, s) for s in states])

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def write_csv(self, path: str | Path) -> None:
        cols = list(self.rows[0])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + cols)
            for t, r in zip(self.times, self.rows):
                w.writerow([f"{t:.17g}"] + [f"{r[c]:.17g}" for c in cols])


class MomentError(NamedTuple):
    value: float
    relative: bool


def relative_moment_error(exact: float, numeric: float) -> MomentError:
    """``|exact - numeric| / |exact|``; falls back to the absolute error when ``exact == 0``."""
    diff = abs(exact - numeric)
    if exact == 0:
        return MomentError(diff, False)
    return MomentError(diff / abs(exact), True)


def l1_error(numeric, projected) -> float:
    a, b = np.asarray(numeric, dtype=float), np.asarray(projected, dtype=float)
    if a.shape != b.shape:
        raise ValueError("numeric and projected states differ in shape")
    return float(np.abs(a - b).sum())


def eoc(e_coarse: float, e_fine: float) -> float:
    return math.log(e_coarse / e_fine) / math.log(2.0)


def number_density(grid: Grid, state) -> np.ndarray:
    """Density at the pivots, ``N_i / dx_i``."""
    return np.asarray(state, dtype=float) / grid.widths


# -- grids for monodisperse runs ---------------------------------------------

def family_grid(kind: str, cells: int, *, x_min: float = 1e-9, x_max: float = 1.0,
                seed: int | None = None, max_ratio: float = 4.0, anchor: bool = True,
                segments=None) -> Grid:
    """A grid of the given family, with the top pivot moved onto ``x_max`` when ``anchor``.

    Anchoring stretches the domain slightly past ``x_max`` so that a
    monodisperse start of size ``x_max`` sits exactly on the top pivot.
    """
    build = lambda xm: build_family(kind, x_min, xm, cells, seed=seed, max_ratio=max_ratio,
                                    segments=segments)
    if not anchor:
        return build(x_max)
    return anchor_top_pivot(build, x_max, bracket=(x_max, 3.0 * x_max))


def grid_sequence(kind: str, base_cells: int, doublings: int, *, x_min: float = 1e-9,
                  x_max: float = 1.0, seed: int | None = None, max_ratio: float = 4.0,
                  anchor: bool = True, refinement: str = "rebuild") -> list[Grid]:
    """Grids with ``base_cells * 2**k`` cells, ``k = 0..doublings``.

    ``refinement="rebuild"`` builds every level afresh from the family rule
    (random levels reuse the seed).  ``"bisect"`` splits the base grid's
    cells in half repeatedly, so every level is nested in the previous one.
    """
    if doublings < 1:
        raise ValueError("need at least one doubling")
    counts = [base_cells * 2**k for k in range(doublings + 1)]
    if refinement == "rebuild":
        return [family_grid(kind, c, x_min=x_min, x_max=x_max, seed=seed, max_ratio=max_ratio,
                            anchor=anchor) for c in counts]
    if refinement != "bisect":
        raise ValueError(f"refinement must be 'rebuild' or 'bisect', got {refinement!r}")
    base = family_grid(kind, base_cells, x_min=x_min, x_max=1.0, seed=seed,
                       max_ratio=max_ratio, anchor=False)
    unit = (base.boundaries - x_min) / (base.x_max - x_min)
    out = []
    g = Grid(unit, kind=kind, seed=seed)
    for _ in counts:
        make = (lambda u: lambda xm: Grid(_affine(x_min, xm, u.boundaries.copy()), kind=kind, seed=seed))(g)
        out.append(anchor_top_pivot(make, x_max, (x_max, 3.0 * x_max)) if anchor else make(x_max))
        g = bisect(g)
    return out


def monodisperse(grid: Grid) -> np.ndarray:
    """Unit count in the top cell."""
    n = np.zeros(grid.cells)
    n[-1] = 1.0
    return n


def transfer(fine: Grid, counts, coarse: Grid) -> np.ndarray:
    """Cell counts on ``coarse`` of the piecewise-constant density defined by ``counts`` on ``fine``."""
    cum = np.concatenate([[0.0], np.cumsum(counts)])
    return np.diff(np.interp(coarse.boundaries, fine.boundaries, cum))


# -- EOC study ---------------------------------------------------------------

@dataclass
class EOCReport:
    family: str
    scheme: str
    kernel: str
    t_end: float
    cells: list[int] = field(default_factory=list)
    l1: list[float] = field(default_factory=list)
    eoc: list[float] = field(default_factory=list)
    reference: str = ""
    surrogate: bool = False
    seed: int | None = None
    seconds: float = 0.0

    @property
    def rows(self) -> list[tuple[int, float, float]]:
        return list(zip(self.cells, self.l1, self.eoc))

    def add(self, cells: int, err: float) -> None:
        if self.cells and cells != 2 * self.cells[-1]:
            raise ValueError("cell counts must double row to row")
        self.eoc.append(eoc(self.l1[-1], err) if self.l1 else 0.0)
        self.cells.append(cells)
        self.l1.append(err)

    def to_dict(self) -> dict:
        return {"family": self.family, "scheme": self.scheme, "kernel": self.kernel,
                "t_end": self.t_end, "reference": self.reference, "surrogate": self.surrogate,
                "seed": self.seed,
                "rows": [{"cells": c, "l1": e, "eoc": o} for c, e, o in self.rows]}


def write_eoc_csv(path: str | Path, reports: Sequence[EOCReport]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["family", "scheme", "kernel", "reference", "surrogate", "seed", "cells", "l1_error", "eoc"])
        for r in reports:
            for c, e, o in r.rows:
                w.writerow([r.family, r.scheme, r.kernel, r.reference, int(r.surrogate),
                            "" if r.seed is None else r.seed, c, f"{e:.17g}", f"{o:.17g}"])


def _sci(v: float) -> str:
    return f"{v:.2e}"


def eoc_markdown(reports: Sequence[EOCReport]) -> str:
    """Side-by-side table: Grids, then L1 error and EOC for each family."""
    if not reports:
        return ""
    head = "| Grids | " + " | ".join(f"{r.family} L1 error | {r.family} EOC" for r in reports) + " |"
    sep = "|---|" + "---|---|" * len(reports)
    lines = [head, sep]
    for k, c in enumerate(reports[0].cells):
        cells = []
        for r in reports:
            cells += [_sci(r.l1[k]), f"{r.eoc[k]:.2f}"] if k < len(r.cells) else ["", ""]
        lines.append(f"| {c} | " + " | ".join(cells) + " |")
    notes = [f"kernel `{reports[0].kernel}`, scheme `{reports[0].scheme}`, t = {reports[0].t_end:g}"]
    flagged = [r.family for r in reports if r.surrogate]
    if flagged:
        notes.append("fine-grid surrogate reference (4x final resolution) for: " + ", ".join(flagged))
    return "\n".join(lines) + "\n\n" + "; ".join(notes) + "\n"


def reference_kind(kernel: KernelSpec) -> str:
    """``closed_form``, ``spectral`` or ``surrogate`` for a monodisperse start at 1."""
    if kernel.name == ALIASES["example_5_1"]:
        return "closed_form"
    try:
        builtin(kernel.name)
    except Exception:
        return "surrogate"
    return "spectral" if kernel.z_independent else "surrogate"


def solve_final(grid: Grid, kernel: KernelSpec, t_end: float, method: str = "vam",
                boundary: str = "origin", config: IntegratorConfig | None = None) -> np.ndarray:
    scheme = Scheme1D(grid, kernel, method, boundary)
    cfg = config or IntegratorConfig(t_end=t_end)
    if cfg.t_end != t_end:
        cfg = IntegratorConfig(**{**cfg.__dict__, "t_end": t_end, "observe_every": None})
    return integrate(scheme, monodisperse(grid), cfg, scheme.max_death_rate).final


def eoc_study(kernel: KernelSpec | str, family: str, *, base_cells: int = 30, doublings: int = 4,
              t_end: float = 1.0, method: str = "vam", seed: int | None = None,
              x_min: float = 1e-9, anchor: bool = True, boundary: str = "origin",
              max_ratio: float = 4.0, refinement: str = "rebuild", reference_mode: str = "auto",
              config: IntegratorConfig | None = None) -> EOCReport:
    """L1 errors against a reference on a doubling grid sequence, monodisperse start at 1."""
    if isinstance(kernel, str):
        kernel = builtin(kernel)
    if family == "random" and seed is None:
        raise GridError("random family needs a seed")
    t0 = time.perf_counter()
    grids = grid_sequence(family, base_cells, doublings, x_min=x_min, seed=seed,
                          max_ratio=max_ratio, anchor=anchor, refinement=refinement)
    kind = reference_kind(kernel) if reference_mode == "auto" else reference_mode
    report = EOCReport(family=family, scheme=method, kernel=kernel.name, t_end=t_end,
                       reference=kind, surrogate=(kind == "surrogate"), seed=seed)
    fine = fine_counts = None
    if kind == "surrogate":
        last = grids[-1]
        fine = family_grid(family, 4 * last.cells, x_min=x_min, seed=seed, max_ratio=max_ratio,
                           anchor=anchor)
        fine_counts = solve_final(fine, kernel, t_end, method, boundary, config)
        log.warning("no exact reference for %s; using a %d-cell surrogate", kernel.name, fine.cells)
    for g in grids:
        numeric = solve_final(g, kernel, t_end, method, boundary, config)
        if kind == "surrogate":
            target = transfer(fine, fine_counts, g)
        else:
            target = project_reference(g, kernel.name, t_end,
                                       method="quadrature" if kind == "closed_form" else "series")
        report.add(g.cells, l1_error(numeric, target))
    report.seconds = time.perf_counter() - t0
    return report


__all__ = [
    "moments", "MomentSeries", "MomentError", "relative_moment_error", "l1_error", "eoc",
    "number_density", "family_grid", "grid_sequence", "monodisperse", "transfer", "EOCReport",
    "write_eoc_csv", "eoc_markdown", "reference_kind", "solve_final", "eoc_study",
    "reference", "reference_density", "project_reference", "ReferenceError", "ref",
]
