"""Collision kernels and breakage distributions with sub-cell partial integrals.

The schemes never evaluate the breakage function pointwise; they only ask for
``partial0(a, b, y, z) = int_a^b beta(x|y;z) dx`` and the volume-weighted
``partial1``.  Builtins carry closed forms, user kernels fall back to adaptive
quadrature.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

QUAD_TOL = 1e-12


class KernelError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    """Collision kernel ``K(y, z)`` and breakage function ``beta(x | y; z)``.

    All callables must accept numpy arrays and broadcast.  ``collision_factor``
    is ``k`` when ``K(y, z) = k(y) k(z)``, which lets the rate sums collapse to
    a single inner product.
    """

    name: str
    collision: Callable
    breakage: Callable
    partial0: Callable
    partial1: Callable
    fragment_count: Callable
    z_independent: bool = True
    collision_factor: Callable | None = None
    zeta_lower_bound: float = 2.0

    @property
    def separable_collision(self) -> bool:
        return self.collision_factor is not None

    def collision_matrix(self, sizes: np.ndarray) -> np.ndarray:
        y = np.asarray(sizes, dtype=float)
        return np.asarray(self.collision(y[:, None], y[None, :]), dtype=float) * np.ones((y.size, y.size))


# -- collision kernels -------------------------------------------------------

def _product(y, z):
    return np.multiply(y, z)


def _one(y, z):
    return np.ones(np.broadcast(np.asarray(y), np.asarray(z)).shape)


COLLISIONS = {
    "product_xy": (_product, lambda y: np.asarray(y, dtype=float)),
    "constant_one": (_one, lambda y: np.ones_like(np.asarray(y, dtype=float))),
}


# -- breakage functions ------------------------------------------------------
# each entry: (beta, partial0, partial1, zeta)

def _support(x, y):
    return (np.asarray(x) <= np.asarray(y)).astype(float)


BREAKAGES = {
    "binary_2_over_y": (
        lambda x, y, z=None: 2.0 / y * _support(x, y),
        lambda a, b, y, z=None: 2.0 * (b - a) / y,
        lambda a, b, y, z=None: (b * b - a * a) / y,
        lambda y, z=None: 2.0 * np.ones_like(np.asarray(y, dtype=float)),
    ),
    "quartic_4x2_over_y3": (
        lambda x, y, z=None: 4.0 * x * x / y**3 * _support(x, y),
        lambda a, b, y, z=None: 4.0 / 3.0 * (b**3 - a**3) / y**3,
        lambda a, b, y, z=None: (b**4 - a**4) / y**3,
        lambda y, z=None: 4.0 / 3.0 * np.ones_like(np.asarray(y, dtype=float)),
    ),
    "parabolic_12x": (
        lambda x, y, z=None: 12.0 * x / y**2 * (1.0 - x / y) * _support(x, y),
        lambda a, b, y, z=None: 6.0 / y**2 * (b * b - a * a) - 4.0 / y**3 * (b**3 - a**3),
        lambda a, b, y, z=None: 4.0 / y**2 * (b**3 - a**3) - 3.0 / y**3 * (b**4 - a**4),
        lambda y, z=None: 2.0 * np.ones_like(np.asarray(y, dtype=float)),
    ),
}

# benchmark cases by short names
ALIASES = {
    "example_5_1": "product_xy:binary_2_over_y",
    "example_5_2": "constant_one:quartic_4x2_over_y3",
    "parabolic": "product_xy:parabolic_12x",
    "example_2d_i": "product_4d:uniform_4_over_y1y2",
    "example_2d_ii": "product_4d:uniform_2_over_y1y2",
}


def _make_1d(collision_name: str, breakage_name: str) -> KernelSpec:
    try:
        coll, factor = COLLISIONS[collision_name]
    except KeyError:
        raise KernelError(f"unknown collision kernel {collision_name!r}") from None
    try:
        beta, p0, p1, zeta = BREAKAGES[breakage_name]
    except KeyError:
        raise KernelError(f"unknown breakage function {breakage_name!r}") from None
    return KernelSpec(
        name=f"{collision_name}:{breakage_name}",
        collision=coll,
        breakage=beta,
        partial0=p0,
        partial1=p1,
        fragment_count=zeta,
        z_independent=True,
        collision_factor=factor,
    )


def builtin(name: str, breakage: str | None = None):
    """Look up a builtin kernel pair.

    ``name`` is either ``"collision:breakage"``, an alias such as
    ``"example_5_1"``, or a collision name with ``breakage`` given separately.
    Two-dimensional names return a :class:`KernelSpec2D`.
    """
    if breakage is None:
        name = ALIASES.get(name, name)
        if ":" not in name:
            raise KernelError(f"unknown kernel {name!r}; expected 'collision:breakage'")
        name, breakage = name.split(":", 1)
    if name in COLLISIONS_2D or breakage in BREAKAGES_2D:
        return _make_2d(name, breakage)
    return _make_1d(name, breakage)


def builtin_names() -> list[str]:
    one = [f"{c}:{b}" for c in COLLISIONS for b in BREAKAGES]
    two = [f"{c}:{b}" for c in COLLISIONS_2D for b in BREAKAGES_2D]
    return one + two


# -- quadrature fallback -----------------------------------------------------

def partial_integral_quadrature(spec: KernelSpec, a: float, b: float, y: float, z: float,
                                weight: str = "1", limit: int = 200) -> float:
    """Adaptive quadrature of ``int_a^b w(x) beta(x|y;z) dx`` with ``w`` in {1, x}."""
    if weight not in ("1", "x"):
        raise KernelError(f"weight must be '1' or 'x', got {weight!r}")
    if not 0 <= a <= b:
        raise KernelError(f"need 0 <= a <= b, got a={a}, b={b}")
    if a == b:
        return 0.0
    b = min(b, y)
    if b <= a:
        return 0.0
    if weight == "1":
        f = lambda x: float(spec.breakage(x, y, z))
    else:
        f = lambda x: x * float(spec.breakage(x, y, z))
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=limit)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature failed on [{a}, {b}] for y={y}, z={z}: {exc}") from None
    return val


def custom_kernel(name: str, collision: Callable, breakage: Callable,
                  z_independent: bool = False,
                  collision_factor: Callable | None = None) -> KernelSpec:
    """Wrap user functions; partial integrals come from adaptive quadrature.

    ``breakage`` is called with scalars here, so it need not vectorize.
    """
    holder: dict = {}

    def p(weight):
        def f(a, b, y, z=None):
            spec = holder["spec"]
            a, b, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in
                                               (a, b, y, 0.0 if z is None else z)))
            out = np.empty(a.shape)
            for idx in np.ndindex(a.shape):
                out[idx] = partial_integral_quadrature(spec, a[idx], b[idx], y[idx], z[idx], weight)
            return out if out.ndim else float(out)
        return f

    p0, p1 = p("1"), p("x")
    spec = KernelSpec(name=name, collision=collision, breakage=breakage, partial0=p0,
                      partial1=p1, fragment_count=lambda y, z=None: p0(0.0, y, y, z),
                      z_independent=z_independent, collision_factor=collision_factor)
    holder["spec"] = spec
    return spec


# -- validation --------------------------------------------------------------

@dataclass
class Check:
    prop: str
    status: str  # "pass", "fail" or "warn"
    residual: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != "fail"


@dataclass
class ValidationReport:
    kernel: str
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, prop: str) -> Check:
        for c in self.checks:
            if c.prop == prop:
                return c
        raise KeyError(prop)

    def to_dict(self) -> dict:
        return {"kernel": self.kernel, "ok": self.ok,
                "checks": [vars(c) for c in self.checks]}

    def __str__(self) -> str:
        lines = [f"kernel {self.kernel}: {'OK' if self.ok else 'FAILED'}"]
        for c in self.checks:
            lines.append(f"  [{c.status:4s}] {c.prop:<22s} residual={c.residual:.3e} {c.detail}")
        return "\n".join(lines)


def validate(spec: KernelSpec, sample_points: Sequence[tuple[float, float]],
             rtol: float = 1e-10) -> ValidationReport:
    """Check symmetry, nonnegativity, the volume identity and the fragment count."""
    pts = np.asarray(sample_points, dtype=float).reshape(-1, 2)
    y, z = pts[:, 0], pts[:, 1]
    rep = ValidationReport(spec.name)

    kyz = np.asarray(spec.collision(y, z), dtype=float)
    kzy = np.asarray(spec.collision(z, y), dtype=float)
    sym = float(np.max(np.abs(kyz - kzy) / np.maximum(np.abs(kyz), 1e-300)))
    rep.checks.append(Check("collision_symmetry", "pass" if sym <= rtol else "fail", sym))
    neg = float(max(0.0, -kyz.min()))
    rep.checks.append(Check("collision_nonnegative", "pass" if neg == 0 else "fail", neg))

    mass = np.asarray(spec.partial1(np.zeros_like(y), y, y, z), dtype=float)
    mres = np.abs(mass - y)
    rel = float(np.max(mres / y))
    rep.checks.append(Check("mass_identity", "pass" if rel <= rtol else "fail", float(mres.max()),
                            f"max relative {rel:.3e}"))

    count = np.asarray(spec.partial0(np.zeros_like(y), y, y, z), dtype=float)
    zeta = np.asarray(spec.fragment_count(y, z), dtype=float) * np.ones_like(y)
    cres = float(np.max(np.abs(count - zeta) / np.maximum(zeta, 1e-300)))
    rep.checks.append(Check("fragment_count", "pass" if cres <= rtol else "fail", cres))
    zmin = float(zeta.min())
    status = "pass" if zmin >= spec.zeta_lower_bound - rtol else "warn"
    rep.checks.append(Check("fragment_lower_bound", status, max(0.0, spec.zeta_lower_bound - zmin),
                            f"min zeta {zmin:.6g} (bound {spec.zeta_lower_bound:g})"))

    # additivity over a split at y/3
    a3 = y / 3.0
    add0 = np.abs(spec.partial0(0 * y, a3, y, z) + spec.partial0(a3, y, y, z) - count)
    add1 = np.abs(spec.partial1(0 * y, a3, y, z) + spec.partial1(a3, y, y, z) - mass)
    addr = float(max(np.max(add0 / np.maximum(np.abs(count), 1e-300)),
                     np.max(add1 / np.maximum(np.abs(mass), 1e-300))))
    rep.checks.append(Check("additivity", "pass" if addr <= 1e-12 else "fail", addr))
    return rep


def default_sample_points(x_min: float = 1e-3, x_max: float = 1.0, n: int = 10) -> list[tuple[float, float]]:
    y = np.geomspace(x_min, x_max, n)
    return [(float(a), float(b)) for a, b in zip(y, y[::-1])]


# -- two dimensions ----------------------------------------------------------

@dataclass(frozen=True)
class AxisFactor:
    """One axis of a separable 2D breakage function: ``beta = f1(x1|y1) f2(x2|y2)``."""

    partial0: Callable
    partial1: Callable


@dataclass(frozen=True)
class KernelSpec2D:
    name: str
    collision: Callable  # K(y1, y2, z1, z2)
    breakage: Callable  # beta(x1, x2, y1, y2)
    partial: Callable  # (a1, b1, a2, b2, y1, y2, weight) -> rectangle integral
    fragment_count: Callable
    z_independent: bool = True
    collision_factor: Callable | None = None  # k(y1, y2) with K = k(y) k(z)
    axes: tuple[AxisFactor, AxisFactor] | None = None
    zeta_lower_bound: float = 2.0

    @property
    def separable_breakage(self) -> bool:
        return self.axes is not None

    @property
    def separable_collision(self) -> bool:
        return self.collision_factor is not None


def _uniform_axis(scale: float) -> AxisFactor:
    return AxisFactor(partial0=lambda a, b, y: scale * (b - a) / y,
                      partial1=lambda a, b, y: scale * (b * b - a * a) / (2.0 * y))


COLLISIONS_2D = {
    "product_4d": (lambda y1, y2, z1, z2: y1 * y2 * z1 * z2, lambda y1, y2: y1 * y2),
}

# beta = c / (y1 y2) splits symmetrically as (sqrt(c)/y1) * (sqrt(c)/y2)
BREAKAGES_2D = {
    "uniform_4_over_y1y2": 4.0,
    "uniform_2_over_y1y2": 2.0,
}


def _make_2d(collision_name: str, breakage_name: str) -> KernelSpec2D:
    try:
        coll, factor = COLLISIONS_2D[collision_name]
    except KeyError:
        raise KernelError(f"unknown 2D collision kernel {collision_name!r}") from None
    try:
        c = BREAKAGES_2D[breakage_name]
    except KeyError:
        raise KernelError(f"unknown 2D breakage function {breakage_name!r}") from None
    ax1 = ax2 = _uniform_axis(float(np.sqrt(c)))

    def partial(a1, b1, a2, b2, y1, y2, weight="1"):
        f1 = ax1.partial1 if weight in ("x1", "x1x2") else ax1.partial0
        f2 = ax2.partial1 if weight in ("x2", "x1x2") else ax2.partial0
        return f1(a1, b1, y1) * f2(a2, b2, y2)

    def beta(x1, x2, y1, y2):
        inside = (np.asarray(x1) <= y1) & (np.asarray(x2) <= y2)
        return c / (y1 * y2) * inside

    return KernelSpec2D(
        name=f"{collision_name}:{breakage_name}",
        collision=coll,
        breakage=beta,
        partial=partial,
        fragment_count=lambda y1, y2: c * np.ones_like(np.asarray(y1, dtype=float)),
        collision_factor=factor,
        axes=(ax1, ax2),
    )


def rectangle_quadrature(spec: KernelSpec2D, a1: float, b1: float, a2: float, b2: float,
                         y1: float, y2: float, weight: str = "1") -> float:
    """Adaptive 2D quadrature of a weighted breakage function over a rectangle."""
    w = {"1": lambda u, v: 1.0, "x1": lambda u, v: u, "x2": lambda u, v: v,
         "x1x2": lambda u, v: u * v}[weight]
    b1, b2 = min(b1, y1), min(b2, y2)
    if b1 <= a1 or b2 <= a2:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.dblquad(lambda v, u: w(u, v) * float(spec.breakage(u, v, y1, y2)),
                                       a1, b1, a2, b2, epsabs=QUAD_TOL, epsrel=QUAD_TOL)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(
                f"rectangle quadrature failed on [{a1},{b1}]x[{a2},{b2}] for y=({y1},{y2}): {exc}"
            ) from None
    return val


__all__ = [
    "KernelSpec", "KernelSpec2D", "AxisFactor", "KernelError", "QuadratureError",
    "builtin", "builtin_names", "custom_kernel", "partial_integral_quadrature",
    "rectangle_quadrature", "validate", "ValidationReport", "Check", "default_sample_points",
    "ALIASES",
]
