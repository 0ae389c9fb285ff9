"""Reference solutions for the monodisperse test problems.

Closed forms where they exist; otherwise a spectral collocation solve of the
continuous 1D equation on ``[0, 1]``.  The monodisperse start is carried as
an explicit point mass at ``x = 1`` with weight ``c(t)``, plus a smooth part
``g(x, t)`` represented by its values at Chebyshev points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.integrate import quad, solve_ivp

from .grid import Grid
from .kernels import ALIASES, KernelError, KernelSpec, builtin

REFERENCE_IDS = ("example_5_1", "example_5_2", "example_2d_i", "example_2d_ii")


class ReferenceError(ValueError):
    pass


# -- closed forms ------------------------------------------------------------

def example_5_1_regular(x, t):
    """Smooth part of the K=yz, beta=2/y solution started from a unit mass at 1."""
    x = np.asarray(x, dtype=float)
    return np.where(x <= 1.0, np.exp(-x * t) * (2.0 * t + t * t * (1.0 - x)), 0.0)


def example_5_1_moment(r: int, t: float) -> float:
    """``int_0^1 x^r n(x, t) dx`` including the point mass ``exp(-t)``."""
    if r == 0:
        return 1.0 + t
    if r == 1:
        return 1.0
    val, _ = quad(lambda x: x**r * float(example_5_1_regular(x, t)), 0.0, 1.0,
                  epsabs=1e-14, epsrel=1e-13)
    return val + math.exp(-t)


def reference(ref_id: str, t: float, orders=(0, 1, 2, 3)) -> dict[str, float]:
    """Exact moments at time ``t`` keyed as ``M0``.. (1D) or ``M00``, ``M10``.. (2D).

    ``orders`` limits the 1D orders returned; for ``example_5_2`` orders above
    one need a spectral solve, so leaving them out is much cheaper.
    """
    if t < 0:
        raise ReferenceError("t must be nonnegative")
    if ref_id == "example_5_1":
        return {f"M{r}": example_5_1_moment(r, t) for r in orders}
    if ref_id == "example_5_2":
        if t >= 3.0:
            raise ReferenceError("example_5_2 blows up at t = 3")
        exact = {0: 3.0 / (3.0 - t), 1: 1.0}
        high = [r for r in orders if r not in exact]
        sol = spectral_reference("constant_one:quartic_4x2_over_y3", t) if high else None
        return {f"M{r}": exact[r] if r in exact else sol.moment(r) for r in orders}
    if ref_id == "example_2d_i":
        return {"M00": 1.0 + 3.0 * t, "M11": 1.0}
    if ref_id == "example_2d_ii":
        return {"M10": 1.0, "M01": 1.0}
    raise ReferenceError(f"unknown reference {ref_id!r}; choose from {REFERENCE_IDS}")


def reference_density(ref_id: str, x, t: float):
    """Returns ``(regular density at x, point-mass weight at x = 1)``."""
    if ref_id != "example_5_1":
        raise ReferenceError("a closed-form density exists for example_5_1 only")
    return example_5_1_regular(x, t), math.exp(-t)


# -- spectral solve ----------------------------------------------------------

@dataclass
class SpectralSolution:
    """Smooth part as a Chebyshev series on [0, 1] plus the point mass at 1."""

    t: float
    series: C.Chebyshev
    point_mass: float

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0) & (x <= 1), self.series(x), 0.0)

    def cell_integrals(self, boundaries: np.ndarray) -> np.ndarray:
        b = np.clip(np.asarray(boundaries, dtype=float), 0.0, 1.0)
        anti = self.series.integ()
        return np.diff(anti(b))

    def moment(self, r: int) -> float:
        s = self.series * C.Chebyshev.identity(domain=[0, 1]) ** r if r else self.series
        anti = s.integ()
        return float(anti(1.0) - anti(0.0)) + self.point_mass


class SpectralReference:
    """Collocation solve of the continuous equation for a unit mass starting at ``x = 1``.

    Works for catalyst-independent breakage with a smooth kernel pair.  The
    integral over parents ``y in [x, 1]`` is done in ``log y`` so that kernels
    like ``4x^2/y^3`` stay well resolved near the origin.
    """

    def __init__(self, kernel: KernelSpec, degree: int = 64, quad_points: int = 80):
        if not kernel.z_independent:
            raise ReferenceError("spectral reference needs a catalyst-independent kernel")
        self.kernel = kernel
        m = degree + 1
        # Chebyshev points of the first kind mapped to [0, 1]; never hit 0 or 1
        k = np.arange(m)
        self.nodes = np.sort(0.5 * (1.0 - np.cos((2 * k + 1) * np.pi / (2 * m))))
        self.degree = degree
        gl_u, gl_w = np.polynomial.legendre.leggauss(quad_points)

        x = self.nodes
        # parents y in [x_m, 1], integrated over u = log y
        lo = np.log(x)[:, None]
        u = lo + (0.0 - lo) * (gl_u[None, :] + 1.0) / 2.0
        y = np.exp(u)
        wts = (0.0 - lo) / 2.0 * gl_w[None, :] * y
        self._parent_w = wts * kernel.breakage(x[:, None], y, 1.0)
        self._parent_interp = self._interp_matrix(y.ravel()).reshape(m, quad_points, m)
        self._parent_y = y
        # catalysts over [0, 1] with plain Gauss-Legendre
        z = (gl_u + 1.0) / 2.0
        self._cat_z, self._cat_w = z, gl_w / 2.0
        self._cat_interp = self._interp_matrix(z)
        self._beta_top = kernel.breakage(x, 1.0, 1.0)

    def _interp_matrix(self, pts: np.ndarray) -> np.ndarray:
        """Values at ``pts`` of the degree-``m-1`` interpolant through the nodes."""
        v = C.chebvander(2.0 * self.nodes - 1.0, self.degree)
        vp = C.chebvander(2.0 * np.asarray(pts) - 1.0, self.degree)
        return vp @ np.linalg.inv(v)

    def _catalyst_rate(self, y: np.ndarray, g: np.ndarray, c: float) -> np.ndarray:
        """``int K(y, z) n(z) dz`` including the point mass."""
        K = self.kernel.collision
        gz = self._cat_interp @ g
        smooth = (K(y[..., None], self._cat_z) * (self._cat_w * gz)).sum(-1)
        return smooth + c * K(y, 1.0)

    def rhs(self, t, state):
        g, c = state[:-1], state[-1]
        x = self.nodes
        w_top = float(self._catalyst_rate(np.array(1.0), g, c))
        w_nodes = self._catalyst_rate(x, g, c)
        w_par = self._catalyst_rate(self._parent_y, g, c)
        g_par = np.einsum("mqn,n->mq", self._parent_interp, g)
        birth = (self._parent_w * w_par * g_par).sum(1) + self._beta_top * w_top * c
        dg = birth - w_nodes * g
        dc = -w_top * c
        return np.concatenate([dg, [dc]])

    def solve(self, times, rtol: float = 1e-12, atol: float = 1e-14) -> list[SpectralSolution]:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        y0 = np.zeros(self.nodes.size + 1)
        y0[-1] = 1.0
        t_end = float(times.max())
        if t_end == 0.0:
            ys = np.repeat(y0[:, None], times.size, axis=1)
        else:
            sol = solve_ivp(self.rhs, (0.0, t_end), y0, method="DOP853", rtol=rtol, atol=atol,
                            t_eval=np.sort(times))
            if not sol.success:
                raise ReferenceError(f"spectral reference failed: {sol.message}")
            order = np.argsort(np.argsort(times))
            ys = sol.y[:, order]
        out = []
        for t, col in zip(times, ys.T):
            coef = C.chebfit(2.0 * self.nodes - 1.0, col[:-1], self.degree)
            out.append(SpectralSolution(float(t), C.Chebyshev(coef, domain=[0, 1]), float(col[-1])))
        return out


@lru_cache(maxsize=32)
def spectral_reference(kernel_name: str, t: float, degree: int = 128) -> SpectralSolution:
    return SpectralReference(builtin(kernel_name), degree=degree, quad_points=degree + 40).solve([t])[0]


def closed_form_solution(t: float) -> SpectralSolution:
    """The ``example_5_1`` solution as a :class:`SpectralSolution` built from the exact density."""
    series = C.Chebyshev.interpolate(lambda x: example_5_1_regular(x, t), 64, domain=[0, 1])
    return SpectralSolution(t, series, math.exp(-t))


def project_reference(grid: Grid, ref_id: str, t: float, method: str = "quadrature") -> np.ndarray:
    """Cell counts ``N_j = int_{cell j} n(x, t) dx`` of a reference solution.

    The point mass at ``x = 1`` goes to the cell containing 1 (the top cell if
    1 coincides with the upper boundary).  ``example_5_1`` uses adaptive
    quadrature of the closed form; other ids (aliases or 1D builtin kernel
    names) use the spectral solve.
    """
    # the first cell collects everything down to 0, as in the scheme tables
    b = grid.boundaries.copy()
    b[0] = 0.0
    name = ALIASES.get(ref_id, ref_id)
    if name == ALIASES["example_5_1"]:
        weight = math.exp(-t)
        if method == "quadrature":
            counts = np.zeros(grid.cells)
            for j, (lo, hi) in enumerate(zip(b[:-1], b[1:])):
                hi = min(hi, 1.0)
                if hi > lo and t > 0:
                    counts[j] = quad(lambda x: float(example_5_1_regular(x, t)), lo, hi,
                                     epsabs=1e-14, epsrel=1e-12)[0]
        else:
            counts = closed_form_solution(t).cell_integrals(b)
    else:
        try:
            sol = spectral_reference(name, float(t))
        except KernelError as exc:
            raise ReferenceError(f"no reference for {ref_id!r}: {exc}") from None
        counts = sol.cell_integrals(b)
        weight = sol.point_mass
    top = min(int(np.searchsorted(b, 1.0, side="right")) - 1, grid.cells - 1)
    if b[0] > 1.0:
        raise ReferenceError("grid lies entirely above the point mass at x = 1")
    counts[top] += weight
    return counts
