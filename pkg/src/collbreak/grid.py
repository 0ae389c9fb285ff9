"""Sectional grids over a truncated size domain.

All builders return an immutable :class:`Grid`; pivots are cell midpoints.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

KINDS = ("uniform", "geometric", "locally_uniform", "random", "oscillatory")


class GridError(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    boundaries: np.ndarray
    kind: str = "custom"
    seed: int | None = None
    pivots: np.ndarray = field(init=False, repr=False)
    widths: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        b = _frozen(self.boundaries)
        if b.ndim != 1 or b.size < 2:
            raise GridError("a grid needs at least two boundaries")
        if not np.all(np.diff(b) > 0):
            raise GridError("boundaries must be strictly increasing")
        if b[0] < 0:
            raise GridError("negative sizes are not supported")
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "pivots", _frozen(0.5 * (b[:-1] + b[1:])))
        object.__setattr__(self, "widths", _frozen(b[1:] - b[:-1]))

    @property
    def cells(self) -> int:
        return self.widths.size

    @property
    def x_min(self) -> float:
        return float(self.boundaries[0])

    @property
    def x_max(self) -> float:
        return float(self.boundaries[-1])

    @property
    def ratio(self) -> float:
        """max(width)/min(width), the alpha bound of the consistency analysis."""
        return float(self.widths.max() / self.widths.min())

    def __len__(self) -> int:
        return self.cells

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.kind == other.kind and self.seed == other.seed
                and np.array_equal(self.boundaries, other.boundaries))

    def __hash__(self):
        return hash((self.kind, self.seed, self.boundaries.tobytes()))

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "x_min": self.x_min, "x_max": self.x_max,
             "boundaries": [float(v) for v in self.boundaries]}
        if self.seed is not None:
            d["seed"] = self.seed
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(np.asarray(d["boundaries"], dtype=float),
                   kind=d.get("kind", "custom"), seed=d.get("seed"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "boundary"])
            for i, v in enumerate(self.boundaries):
                w.writerow([i, f"{v:.17g}"])


def _check_domain(x_min: float, x_max: float, cells: int) -> None:
    if int(cells) != cells or cells < 1:
        raise GridError(f"cell count must be a positive integer, got {cells!r}")
    if x_min < 0:
        raise GridError("x_min must be nonnegative")
    if not x_max > x_min:
        raise GridError(f"inverted domain [{x_min}, {x_max}]")


def _affine(x_min: float, x_max: float, unit: np.ndarray) -> np.ndarray:
    # unit runs from 0 to 1; pin the end points so rounding never moves them
    b = x_min + (x_max - x_min) * unit
    b[0], b[-1] = x_min, x_max
    return b


def build_uniform(x_min: float, x_max: float, cells: int) -> Grid:
    _check_domain(x_min, x_max, cells)
    return Grid(_affine(x_min, x_max, np.arange(cells + 1) / cells), kind="uniform")


def build_geometric(x_min: float, x_max: float, cells: int) -> Grid:
    """Boundaries ``x_min * r**i`` with ``r = (x_max/x_min)**(1/cells)``."""
    _check_domain(x_min, x_max, cells)
    if x_min <= 0:
        raise GridError("geometric grids need x_min > 0")
    r = (x_max / x_min) ** (1.0 / cells)
    b = x_min * r ** np.arange(cells + 1, dtype=float)
    b[-1] = x_max
    return Grid(b, kind="geometric")


def build_geometric_ratio(x_min: float, x_max: float, ratio: float) -> Grid:
    """Geometric grid with a fixed ratio; the cell count is derived.

    The last boundary is ``x_min * ratio**cells`` and may overshoot ``x_max``.
    """
    if ratio <= 1:
        raise GridError("ratio must exceed 1")
    if x_min <= 0 or x_max <= x_min:
        raise GridError("geometric grids need 0 < x_min < x_max")
    cells = max(1, math.ceil(math.log(x_max / x_min) / math.log(ratio) - 1e-12))
    b = x_min * ratio ** np.arange(cells + 1, dtype=float)
    return Grid(b, kind="geometric")


def build_locally_uniform(x_min: float, x_max: float,
                          segments: Sequence[tuple[float, int]]) -> Grid:
    """Piecewise-uniform grid; ``segments`` is a list of (domain_fraction, cells)."""
    if not segments:
        raise GridError("need at least one segment")
    fracs = np.array([float(f) for f, _ in segments])
    counts = [int(c) for _, c in segments]
    if np.any(fracs <= 0) or any(c < 1 for c in counts):
        raise GridError("segment fractions must be positive and hold at least one cell")
    if abs(fracs.sum() - 1.0) > 1e-12:
        raise GridError(f"segment fractions sum to {fracs.sum()!r}, not 1")
    _check_domain(x_min, x_max, sum(counts))
    edges = np.concatenate([[0.0], np.cumsum(fracs)])
    edges[-1] = 1.0
    unit = [np.array([0.0])]
    for (lo, hi), c in zip(zip(edges[:-1], edges[1:]), counts):
        unit.append(lo + (hi - lo) * np.arange(1, c + 1) / c)
    return Grid(_affine(x_min, x_max, np.concatenate(unit)), kind="locally_uniform")


def random_unit_partition(cells: int, seed: int, max_ratio: float,
                          pin_top: bool = True) -> np.ndarray:
    """Seeded jitter of the uniform partition of [0, 1].

    Interior boundaries move by at most ``a/cells`` with
    ``a = (r - 1) / (2 (r + 1))``, so widths lie in ``[(1-2a), (1+2a)]/cells``
    and the width ratio never exceeds ``r = max_ratio``.  With ``pin_top`` the
    last interior boundary stays put, so the top cell has the nominal width
    and a monodisperse start sits at a reproducible place on every level.
    """
    if max_ratio < 1:
        raise GridError("max_ratio must be >= 1")
    if cells == 1:
        return np.array([0.0, 1.0])
    amp = 0.5 * (max_ratio - 1.0) / (max_ratio + 1.0)
    rng = np.random.default_rng(seed)
    unit = np.arange(cells + 1) / cells
    unit[1:-1] += rng.uniform(-amp, amp, cells - 1) / cells
    if pin_top:
        unit[-2] = (cells - 1) / cells
    return unit


def build_random(x_min: float, x_max: float, cells: int, seed: int,
                 max_ratio: float = 4.0, pin_top: bool = True) -> Grid:
    _check_domain(x_min, x_max, cells)
    unit = random_unit_partition(cells, seed, max_ratio, pin_top)
    return Grid(_affine(x_min, x_max, unit), kind="random", seed=seed)


def oscillatory_unit_partition(cells: int) -> np.ndarray:
    # widths follow dx_{i+1} = dx_i/2 (i even), 2 dx_i (i odd), 1-based i
    w = np.ones(cells)
    for i in range(1, cells):
        w[i] = w[i - 1] / 2 if i % 2 == 0 else 2 * w[i - 1]
    unit = np.concatenate([[0.0], np.cumsum(w)])
    return unit / unit[-1]


def build_oscillatory(x_min: float, x_max: float, cells: int) -> Grid:
    _check_domain(x_min, x_max, cells)
    return Grid(_affine(x_min, x_max, oscillatory_unit_partition(cells)), kind="oscillatory")


def bisect(grid: Grid) -> Grid:
    """Split every cell at its pivot."""
    b = grid.boundaries
    out = np.empty(2 * b.size - 1)
    out[0::2] = b
    out[1::2] = grid.pivots
    return Grid(out, kind=grid.kind, seed=grid.seed)


def default_segments(cells: int) -> list[tuple[float, int]]:
    """Three uniform blocks over 10%, 30% and 60% of the domain, a third of the cells each."""
    if cells < 3:
        raise GridError("locally uniform family needs at least 3 cells")
    third = cells // 3
    return [(0.1, third), (0.3, third), (0.6, cells - 2 * third)]


def build_family(kind: str, x_min: float, x_max: float, cells: int, *,
                 seed: int | None = None, max_ratio: float = 4.0,
                 segments: Sequence[tuple[float, int]] | None = None) -> Grid:
    """Dispatch on the family tag.  Locally uniform grids default to :func:`default_segments`."""
    if kind == "uniform":
        return build_uniform(x_min, x_max, cells)
    if kind == "geometric":
        return build_geometric(x_min, x_max, cells)
    if kind == "locally_uniform":
        if segments is None:
            segments = default_segments(cells)
        elif sum(c for _, c in segments) != cells:
            raise GridError("segment cell counts do not add up to the requested cells")
        return build_locally_uniform(x_min, x_max, segments)
    if kind == "random":
        if seed is None:
            raise GridError("random grids need a seed")
        return build_random(x_min, x_max, cells, seed, max_ratio)
    if kind == "oscillatory":
        return build_oscillatory(x_min, x_max, cells)
    raise GridError(f"unknown grid kind {kind!r}; expected one of {KINDS}")


def anchor_top_pivot(build: Callable[[float], Grid], target: float = 1.0,
                     bracket: tuple[float, float] | None = None) -> Grid:
    """Grid ``build(x_max)`` whose top pivot sits exactly at ``target``.

    Puts a monodisperse population of size ``target`` on a pivot, which is
    what measuring sizes in units of the initial particle does.
    """
    lo, hi = bracket or (target, 3.0 * target)
    f = lambda xm: build(xm).pivots[-1] - target
    if f(lo) > 0 or f(hi) < 0:
        raise GridError(f"cannot place the top pivot at {target} within x_max in [{lo}, {hi}]")
    xm = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return build(xm)
