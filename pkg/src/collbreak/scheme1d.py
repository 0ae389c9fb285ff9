"""Semi-discrete right-hand sides for the 1D collisional breakage equation.

Three schemes share one set of precomputed sub-cell integrals:

* ``midpoint``: births stay at the pivot of the cell they land in (no
  reallocation); conserves number production but not volume.
* ``vam``: the volume-average method; each cell's births are shared between
  its pivot and one neighbour so that both the count and the cell's birth
  volume flux are kept.
* ``fpt``: the classical two-pivot fixed-pivot baseline.

The fragment integrals of the lowest cell always start at 0, so fragments
below ``x_min`` are folded into cell 1 rather than dropped.  What happens to a
volume average that falls below the first pivot (or above the last) is set by
the ``boundary`` policy:

``"origin"``
    the missing lower neighbour is a zero-size pivot at the origin.  The share
    sent there carries no volume, so volume is conserved exactly and a small
    number of particles leaves the system.
``"clamp"``
    the whole birth stays on the boundary pivot; number is kept and volume
    picks up a local O(dx) error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .kernels import KernelSpec

METHODS = ("vam", "midpoint", "fpt")
BOUNDARY_POLICIES = ("origin", "clamp")


@dataclass(frozen=True)
class BetaTable:
    """Sub-cell integrals of the breakage function.

    ``p0[i, j]`` is the number of fragments of a parent at pivot ``j`` landing in
    cell ``i`` (integrated up to the pivot when ``i == j``); ``p1`` is the same
    with weight ``x``.  Tables gain a trailing catalyst index ``k`` when the
    breakage function depends on the collision partner.
    """

    p0: np.ndarray
    p1: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    z_independent: bool


@dataclass(frozen=True)
class RateTerms:
    birth: np.ndarray
    death: np.ndarray
    flux: np.ndarray
    vbar: np.ndarray


def _limits(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    b, x = grid.boundaries, grid.pivots
    n = grid.cells
    lower = b[:-1].copy()
    lower[0] = 0.0
    upper = np.broadcast_to(b[1:, None], (n, n)).copy()
    upper[np.diag_indices(n)] = x
    return lower, upper


def precompute_tables(grid: Grid, kernel: KernelSpec) -> BetaTable:
    x = grid.pivots
    n = grid.cells
    lower, upper = _limits(grid)
    mask = np.triu(np.ones((n, n), dtype=bool))
    a = np.broadcast_to(lower[:, None], (n, n))
    if kernel.z_independent:
        y = np.broadcast_to(x[None, :], (n, n))
        z = np.full((n, n), x[0])
        p0 = np.where(mask, kernel.partial0(a, upper, y, z), 0.0)
        p1 = np.where(mask, kernel.partial1(a, upper, y, z), 0.0)
    else:
        if n > 200:
            import warnings
            warnings.warn(f"catalyst-dependent tables need {n**3} entries per weight", stacklevel=2)
        a3 = np.broadcast_to(a[:, :, None], (n, n, n))
        u3 = np.broadcast_to(upper[:, :, None], (n, n, n))
        y3 = np.broadcast_to(x[None, :, None], (n, n, n))
        z3 = np.broadcast_to(x[None, None, :], (n, n, n))
        m3 = mask[:, :, None]
        p0 = np.where(m3, kernel.partial0(a3, u3, y3, z3), 0.0)
        p1 = np.where(m3, kernel.partial1(a3, u3, y3, z3), 0.0)
    for t in (p0, p1):
        t.flags.writeable = False
    return BetaTable(p0=p0, p1=p1, lower=lower, upper=upper, z_independent=kernel.z_independent)


def precompute_fpt(grid: Grid, kernel: KernelSpec, boundary: str = "origin") -> np.ndarray:
    """Two-pivot weights ``eta[i, j]`` (parent pivot ``j``), catalyst-independent kernels only.

    A fragment at ``x`` between pivots ``x_{i-1}`` and ``x_i`` goes to ``i`` with
    weight ``(x - x_{i-1}) / (x_i - x_{i-1})``; the lower neighbour of the first
    pivot is the origin.
    """
    if not kernel.z_independent:
        raise NotImplementedError("the fixed-pivot baseline supports catalyst-independent kernels only")
    _check_boundary(boundary)
    x = grid.pivots
    n = grid.cells
    xl = np.concatenate([[0.0], x[:-1]])
    y = np.broadcast_to(x[None, :], (n, n))
    lo = np.broadcast_to(xl[:, None], (n, n))
    hi = np.broadcast_to(x[:, None], (n, n))
    z = np.full((n, n), x[0])
    left = (kernel.partial1(lo, hi, y, z) - lo * kernel.partial0(lo, hi, y, z)) / (hi - lo)
    if boundary == "clamp":
        left[0] = kernel.partial0(np.zeros(n), np.full(n, x[0]), x, z[0])
    eta = np.where(np.triu(np.ones((n, n), dtype=bool)), left, 0.0)
    if n > 1:
        xr = x[1:]
        lo, hi = np.broadcast_to(x[:-1, None], (n - 1, n)), np.broadcast_to(xr[:, None], (n - 1, n))
        yy = y[:-1]
        right = (hi * kernel.partial0(lo, hi, yy, z[:-1]) - kernel.partial1(lo, hi, yy, z[:-1])) / (hi - lo)
        strict = np.triu(np.ones((n - 1, n), dtype=bool), k=1)
        eta[:-1] += np.where(strict, right, 0.0)
    return eta


def collision_weights(grid: Grid, kernel: KernelSpec, state) -> np.ndarray:
    """``w_j = sum_k K(x_j, x_k) N_k``."""
    n = np.asarray(state, dtype=float)
    x = grid.pivots
    if kernel.collision_factor is not None:
        k = np.asarray(kernel.collision_factor(x), dtype=float)
        return k * np.dot(k, n)
    return kernel.collision_matrix(x) @ n


def _rates(table: BetaTable, kmat: np.ndarray | None, w: np.ndarray, n: np.ndarray,
           x: np.ndarray) -> RateTerms:
    if table.z_independent:
        s = w * n
        birth = table.p0 @ s
        flux = table.p1 @ s
    else:
        pair = kmat * np.outer(n, n)
        birth = np.einsum("ijk,jk->i", table.p0, pair)
        flux = np.einsum("ijk,jk->i", table.p1, pair)
    death = w * n
    pos = birth > 0
    vbar = np.where(pos, flux / np.where(pos, birth, 1.0), x)
    return RateTerms(birth=birth, death=death, flux=flux, vbar=vbar)


def birth_death_flux(grid: Grid, kernel: KernelSpec, table: BetaTable, state) -> RateTerms:
    n = np.asarray(state, dtype=float)
    kmat = None if kernel.z_independent else kernel.collision_matrix(grid.pivots)
    return _rates(table, kmat, collision_weights(grid, kernel, n), n, grid.pivots)


def _check_boundary(boundary: str) -> None:
    if boundary not in BOUNDARY_POLICIES:
        raise ValueError(f"boundary policy must be one of {BOUNDARY_POLICIES}, got {boundary!r}")


def heaviside(v):
    return np.heaviside(v, 0.5)


def allocation_fractions(x: np.ndarray, vbar: np.ndarray, boundary: str = "origin"):
    """Shares of each cell's birth sent to (lower neighbour, itself, upper neighbour).

    Follows the Heaviside-gated lambda weights literally, including ``H(0) = 1/2``.
    ``vbar`` may carry trailing axes; ``x`` runs along its first axis.
    Returns ``(lower, self, upper)``; ``lower[0]`` is the share sent to the
    origin under the ``"origin"`` policy.
    """
    _check_boundary(boundary)
    x = np.asarray(x, dtype=float)
    vbar = np.asarray(vbar, dtype=float)
    shape = (-1,) + (1,) * (vbar.ndim - 1)
    xc = x.reshape(shape)
    xl = np.concatenate([[0.0], x[:-1]]).reshape(shape)
    xu = np.concatenate([x[1:], [np.inf]]).reshape(shape)
    d = vbar - xc
    h_up, h_down = heaviside(d), heaviside(-d)
    lam_minus = (vbar - xl) / (xc - xl)
    with np.errstate(invalid="ignore", divide="ignore"):
        finite = np.isfinite(xu)
        lam_plus = np.where(finite, (vbar - xu) / (xc - xu), 1.0)
        to_upper = np.where(finite, d / (xu - xc), 0.0) * h_up
    to_lower = d / (xl - xc) * h_down
    to_self = lam_minus * h_down + lam_plus * h_up
    # top cell: nowhere to go above, keep the birth on the pivot
    to_self[-1] = np.where(d[-1] > 0, 1.0, to_self[-1])
    to_upper[-1] = 0.0
    if boundary == "clamp":
        low = d[0] < 0
        to_self[0] = np.where(low, 1.0, to_self[0])
        to_lower[0] = np.where(low, 0.0, to_lower[0])
    return to_lower, to_self, to_upper


def boundary_effects(x: np.ndarray, rates: RateTerms, boundary: str = "origin") -> dict:
    """Rates at which the boundary treatment departs from exact conservation.

    ``origin_number_rate`` counts births handed to the ghost pivot at 0;
    ``clamped_mass_rate`` is the volume error of births kept on a boundary pivot.
    """
    lo, _, _ = allocation_fractions(x, rates.vbar, boundary)
    b, d = rates.birth, rates.vbar - x
    clamped = max(d[-1], 0.0) * b[-1]
    if boundary == "clamp":
        clamped += max(-d[0], 0.0) * b[0]
    return {"origin_number_rate": float(lo[0] * b[0]) if boundary == "origin" else 0.0,
            "clamped_mass_rate": float(clamped)}


def _spread(lower, self_, upper, birth):
    out = self_ * birth
    out[1:] += (upper * birth)[:-1]
    out[:-1] += (lower * birth)[1:]
    return out


def allocate(grid: Grid, rates: RateTerms, boundary: str = "origin") -> np.ndarray:
    """Reallocated births ``b1_{i-1} + b2_i + b3_{i+1}``."""
    lo, me, up = allocation_fractions(grid.pivots, rates.vbar, boundary)
    return _spread(lo, me, up, rates.birth)


def rhs_vam(grid: Grid, kernel: KernelSpec, table: BetaTable, state,
            boundary: str = "origin") -> np.ndarray:
    r = birth_death_flux(grid, kernel, table, state)
    return allocate(grid, r, boundary) - r.death


def rhs_midpoint(grid: Grid, kernel: KernelSpec, table: BetaTable, state) -> np.ndarray:
    r = birth_death_flux(grid, kernel, table, state)
    return r.birth - r.death


def rhs_fpt(grid: Grid, kernel: KernelSpec, table: np.ndarray, state) -> np.ndarray:
    """``table`` comes from :func:`precompute_fpt`."""
    n = np.asarray(state, dtype=float)
    w = collision_weights(grid, kernel, n)
    return table @ (w * n) - w * n


def number_production(grid: Grid, kernel: KernelSpec, state) -> float:
    """``sum_{j,k} K(x_j, x_k) N_j N_k (zeta(x_j, x_k) - 1)``."""
    n = np.asarray(state, dtype=float)
    x = grid.pivots
    if kernel.z_independent:
        zeta = np.asarray(kernel.fragment_count(x, x[0]), dtype=float) * np.ones_like(x)
        return float(np.dot((zeta - 1.0) * collision_weights(grid, kernel, n), n))
    kmat = kernel.collision_matrix(x)
    zeta = np.asarray(kernel.fragment_count(x[:, None], x[None, :]), dtype=float)
    return float(n @ (kmat * (zeta - 1.0)) @ n)


class Scheme1D:
    """Callable right-hand side ``f(t, N)`` with tables and kernel matrices cached."""

    def __init__(self, grid: Grid, kernel: KernelSpec, method: str = "vam",
                 boundary: str = "origin"):
        if method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {method!r}")
        _check_boundary(boundary)
        self.grid, self.kernel, self.method, self.boundary = grid, kernel, method, boundary
        x = grid.pivots
        self.table = precompute_tables(grid, kernel)
        self.fpt = precompute_fpt(grid, kernel, boundary) if method == "fpt" else None
        if kernel.collision_factor is not None:
            self._k = np.asarray(kernel.collision_factor(x), dtype=float) * np.ones_like(x)
            self._kmat = None
        else:
            self._k = None
            self._kmat = kernel.collision_matrix(x)
        zeta = kernel.fragment_count(x, x[0]) if kernel.z_independent else \
            kernel.fragment_count(x[:, None], x[None, :])
        self._zeta = np.asarray(zeta, dtype=float) * (np.ones_like(x) if kernel.z_independent else 1.0)

    @property
    def dimension(self) -> int:
        return 1

    def weights(self, n: np.ndarray) -> np.ndarray:
        if self._k is not None:
            return self._k * np.dot(self._k, n)
        return self._kmat @ n

    def rates(self, n) -> RateTerms:
        n = np.asarray(n, dtype=float)
        kmat = self._kmat if self._kmat is not None else np.outer(self._k, self._k)
        return _rates(self.table, None if self.table.z_independent else kmat,
                      self.weights(n), n, self.grid.pivots)

    def rhs(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        if self.method == "fpt":
            w = self.weights(n)
            return self.fpt @ (w * n) - w * n
        r = self.rates(n)
        if self.method == "midpoint":
            return r.birth - r.death
        return allocate(self.grid, r, self.boundary) - r.death

    def __call__(self, t, n):
        return self.rhs(n)

    def production(self, n) -> float:
        n = np.asarray(n, dtype=float)
        if self.kernel.z_independent:
            return float(np.dot((self._zeta - 1.0) * self.weights(n), n))
        kmat = self._kmat if self._kmat is not None else np.outer(self._k, self._k)
        return float(n @ (kmat * (self._zeta - 1.0)) @ n)

    def max_death_rate(self, n) -> float:
        return float(np.max(self.weights(np.asarray(n, dtype=float)), initial=0.0))

    def diagnostics(self, n) -> dict:
        """Instantaneous departures from the discrete conservation laws.

        ``number_defect`` is ``sum(dN/dt)`` minus the exact number production and
        ``mass_defect`` is ``sum(x dN/dt)``; both vanish for interior births.
        """
        f = self.rhs(n)
        out = {"number_defect": float(f.sum() - self.production(n)),
               "mass_defect": float(np.dot(self.grid.pivots, f))}
        if self.method == "vam":
            out.update(boundary_effects(self.grid.pivots, self.rates(n), self.boundary))
        return out
