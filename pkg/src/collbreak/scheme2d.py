"""Volume-average scheme on tensor-product grids in two property coordinates.

Each cell's births are spread over the 2x2 block of pivots selected by the
per-axis volume averages; the weights are products of the 1D lambda shares.
This keeps the count and both coordinate fluxes of every cell's births.  The
cross moment ``M11`` is only approximately conserved, since the product
allocation reproduces ``vbar1 * vbar2`` rather than the true cross flux.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Grid
from .kernels import KernelSpec2D
from .scheme1d import BOUNDARY_POLICIES, _limits, allocation_fractions


@dataclass(frozen=True)
class Grid2D:
    axis1: Grid
    axis2: Grid

    @property
    def shape(self) -> tuple[int, int]:
        return self.axis1.cells, self.axis2.cells

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis1.pivots, self.axis2.pivots, indexing="ij")

    def to_dict(self) -> dict:
        return {"axis1": self.axis1.to_dict(), "axis2": self.axis2.to_dict()}


@dataclass
class State2D:
    grid: Grid2D
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.shape != self.grid.shape:
            raise ValueError(f"state shape {self.counts.shape} does not match grid {self.grid.shape}")

    def write_csv(self, path: str | Path) -> None:
        x1, x2 = self.grid.mesh()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "x1", "x2", "N"])
            for (i, j), v in np.ndenumerate(self.counts):
                w.writerow([i, j, f"{x1[i, j]:.17g}", f"{x2[i, j]:.17g}", f"{v:.17g}"])

    def to_json(self) -> str:
        return json.dumps({"grid": self.grid.to_dict(),
                           "counts": [[float(v) for v in row] for row in self.counts]})


@dataclass(frozen=True)
class RateTerms2D:
    birth: np.ndarray
    death: np.ndarray
    flux1: np.ndarray
    flux2: np.ndarray
    vbar1: np.ndarray
    vbar2: np.ndarray


@dataclass(frozen=True)
class BetaTable2D:
    """Rectangle integrals of the breakage function.

    Separable kernels keep per-axis tables ``a0``/``a1`` (index ``[i, k]``: parent
    pivot ``k`` on that axis, fragments into cell ``i``); the 4D table is their
    outer product.  Otherwise ``full`` maps weight -> array ``[i, j, k, l]``.
    """

    axis_tables: tuple | None
    full: dict | None

    @property
    def separable(self) -> bool:
        return self.axis_tables is not None


def _axis_table(grid: Grid, partial) -> np.ndarray:
    n = grid.cells
    lower, upper = _limits(grid)
    a = np.broadcast_to(lower[:, None], (n, n))
    y = np.broadcast_to(grid.pivots[None, :], (n, n))
    return np.where(np.triu(np.ones((n, n), dtype=bool)), partial(a, upper, y), 0.0)


def precompute_tables2d(grid2: Grid2D, kernel: KernelSpec2D) -> BetaTable2D:
    if not kernel.z_independent:
        raise NotImplementedError("2D tables support catalyst-independent breakage only")
    g1, g2 = grid2.axis1, grid2.axis2
    if kernel.separable_breakage:
        f1, f2 = kernel.axes
        tabs = tuple((_axis_table(g, f.partial0), _axis_table(g, f.partial1))
                     for g, f in ((g1, f1), (g2, f2)))
        return BetaTable2D(axis_tables=tabs, full=None)
    n1, n2 = grid2.shape
    lo1, up1 = _limits(g1)
    lo2, up2 = _limits(g2)
    A1 = lo1[:, None, None, None]
    B1 = up1[:, None, :, None]
    A2 = lo2[None, :, None, None]
    B2 = up2[None, :, None, :]
    Y1 = g1.pivots[None, None, :, None]
    Y2 = g2.pivots[None, None, None, :]
    mask = (np.triu(np.ones((n1, n1), bool))[:, None, :, None]
            & np.triu(np.ones((n2, n2), bool))[None, :, None, :])
    full = {}
    for w in ("1", "x1", "x2"):
        full[w] = np.where(mask, kernel.partial(A1, B1, A2, B2, Y1, Y2, w), 0.0)
    return BetaTable2D(axis_tables=None, full=full)


def _apply(table: BetaTable2D, s: np.ndarray, weight: str) -> np.ndarray:
    if table.separable:
        (a0, a1), (b0, b1) = table.axis_tables
        left = a1 if weight in ("x1", "x1x2") else a0
        right = b1 if weight in ("x2", "x1x2") else b0
        return left @ s @ right.T
    return np.einsum("ijkl,kl->ij", table.full[weight], s)


def collision_weights2d(grid2: Grid2D, kernel: KernelSpec2D, counts: np.ndarray) -> np.ndarray:
    x1, x2 = grid2.mesh()
    if kernel.collision_factor is not None:
        k = kernel.collision_factor(x1, x2) * np.ones_like(x1)
        return k * np.sum(k * counts)
    K = kernel.collision(x1[:, :, None, None], x2[:, :, None, None], x1[None, None], x2[None, None])
    return np.einsum("ijkl,kl->ij", K, counts)


def birth_death_flux2d(grid2: Grid2D, kernel: KernelSpec2D, table: BetaTable2D,
                       counts: np.ndarray) -> RateTerms2D:
    n = np.asarray(counts, dtype=float)
    w = collision_weights2d(grid2, kernel, n)
    s = w * n
    birth = _apply(table, s, "1")
    f1 = _apply(table, s, "x1")
    f2 = _apply(table, s, "x2")
    x1, x2 = grid2.mesh()
    pos = birth > 0
    safe = np.where(pos, birth, 1.0)
    return RateTerms2D(birth=birth, death=s, flux1=f1, flux2=f2,
                       vbar1=np.where(pos, f1 / safe, x1), vbar2=np.where(pos, f2 / safe, x2))


def _shift_add(out: np.ndarray, c: np.ndarray, a: int, b: int) -> None:
    n1, n2 = out.shape
    src = (slice(max(-a, 0), n1 - max(a, 0)), slice(max(-b, 0), n2 - max(b, 0)))
    dst = (slice(max(a, 0), n1 - max(-a, 0)), slice(max(b, 0), n2 - max(-b, 0)))
    out[dst] += c[src]


def allocate2d(grid2: Grid2D, rates: RateTerms2D, boundary: str = "origin") -> np.ndarray:
    """Four-corner product allocation of each cell's births."""
    f1 = allocation_fractions(grid2.axis1.pivots, rates.vbar1, boundary)
    f2 = [f.T for f in allocation_fractions(grid2.axis2.pivots, rates.vbar2.T, boundary)]
    out = np.zeros_like(rates.birth)
    for a, s1 in zip((-1, 0, 1), f1):
        for b, s2 in zip((-1, 0, 1), f2):
            _shift_add(out, s1 * s2 * rates.birth, a, b)
    return out


def _expected_position(x: np.ndarray, fracs) -> np.ndarray:
    # mean target pivot per cell along axis 0, ghost pivot at 0 below the first
    lo, me, up = fracs
    xs = x.reshape((-1,) + (1,) * (me.ndim - 1))
    below = np.concatenate([np.zeros_like(xs[:1]), xs[:-1]])
    above = np.concatenate([xs[1:], np.zeros_like(xs[:1])])
    return lo * below + me * xs + up * above


def origin_losses2d(grid2: Grid2D, rates: RateTerms2D, boundary: str = "origin") -> dict:
    """Number and axis-mass rates carried off by births sent to a ghost pivot at 0.

    A fragment placed on the axis-1 ghost has zero first coordinate but still
    carries its second; this is where the second axis mass leaks, and vice versa.
    """
    if boundary != "origin":
        return {"origin_number_rate": 0.0, "origin_mass1_rate": 0.0, "origin_mass2_rate": 0.0}
    x1, x2 = grid2.axis1.pivots, grid2.axis2.pivots
    f1 = allocation_fractions(x1, rates.vbar1, boundary)
    f2 = allocation_fractions(x2, rates.vbar2.T, boundary)
    b = rates.birth
    ghost1 = f1[0][0] * b[0]          # per column j, leaving through x1 = 0
    ghost2 = f2[0][0] * b[:, 0]       # per row i, leaving through x2 = 0
    e1 = _expected_position(x1, f1)
    e2 = _expected_position(x2, f2).T
    corner = f1[0][0, 0] * f2[0][0, 0] * b[0, 0]
    return {"origin_number_rate": float(ghost1.sum() + ghost2.sum() - corner),
            "origin_mass1_rate": float(np.dot(ghost2, e1[:, 0])),
            "origin_mass2_rate": float(np.dot(ghost1, e2[0]))}


def rhs_vam2d(grid2: Grid2D, kernel: KernelSpec2D, table: BetaTable2D, state,
              boundary: str = "origin") -> np.ndarray:
    counts = state.counts if isinstance(state, State2D) else np.asarray(state, dtype=float)
    r = birth_death_flux2d(grid2, kernel, table, counts)
    return allocate2d(grid2, r, boundary) - r.death


class Scheme2D:
    """Callable right-hand side on flattened 2D states (row-major ``[i, j]``)."""

    def __init__(self, grid2: Grid2D, kernel: KernelSpec2D, boundary: str = "origin"):
        if boundary not in BOUNDARY_POLICIES:
            raise ValueError(f"boundary policy must be one of {BOUNDARY_POLICIES}, got {boundary!r}")
        self.grid, self.kernel, self.boundary = grid2, kernel, boundary
        self.method = "vam2d"
        self.table = precompute_tables2d(grid2, kernel)

    @property
    def dimension(self) -> int:
        return 2

    def _shape(self, n) -> np.ndarray:
        return np.asarray(n, dtype=float).reshape(self.grid.shape)

    def rates(self, n) -> RateTerms2D:
        return birth_death_flux2d(self.grid, self.kernel, self.table, self._shape(n))

    def rhs(self, n) -> np.ndarray:
        r = self.rates(n)
        return (allocate2d(self.grid, r, self.boundary) - r.death).ravel()

    def __call__(self, t, n):
        return self.rhs(n)

    def production(self, n) -> float:
        c = self._shape(n)
        w = collision_weights2d(self.grid, self.kernel, c)
        x1, x2 = self.grid.mesh()
        zeta = self.kernel.fragment_count(x1, x2)
        return float(np.sum((zeta - 1.0) * w * c))

    def max_death_rate(self, n) -> float:
        return float(np.max(collision_weights2d(self.grid, self.kernel, self._shape(n)), initial=0.0))

    def diagnostics(self, n) -> dict:
        f = self._shape(self.rhs(n))
        x1, x2 = self.grid.mesh()
        out = {"number_defect": float(f.sum() - self.production(n)),
               "mass1_defect": float(np.sum(x1 * f)),
               "mass2_defect": float(np.sum(x2 * f))}
        out.update(origin_losses2d(self.grid, self.rates(n), self.boundary))
        return out
