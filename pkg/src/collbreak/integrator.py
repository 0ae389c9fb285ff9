"""Explicit Runge-Kutta time stepping with observations and a nonnegativity guard."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import RK45

log = logging.getLogger(__name__)

INTEGRATORS = ("rk4_fixed", "rk45_adaptive")


class IntegrationError(RuntimeError):
    """Numerical abort; ``diagnostics`` names the failing step."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk45_adaptive"
    t_end: float = 1.0
    observe_every: float | None = None
    dt: float | None = None
    rtol: float = 1e-8
    atol: float = 1e-12
    nonneg_clip: float = 1e-12

    def __post_init__(self):
        if self.method not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}, got {self.method!r}")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.observe_every is not None and self.observe_every <= 0:
            raise ValueError("observe_every must be positive")
        if self.rtol <= 0 or self.atol <= 0 or self.nonneg_clip < 0:
            raise ValueError("tolerances must be positive")

    def observation_times(self) -> np.ndarray:
        if self.t_end == 0:
            return np.array([0.0])
        if self.observe_every is None:
            return np.array([0.0, self.t_end])
        k = int(math.floor(self.t_end / self.observe_every + 1e-9))
        ts = self.observe_every * np.arange(k + 1)
        if self.t_end - ts[-1] > 1e-9 * self.t_end:
            return np.append(ts, self.t_end)
        ts[-1] = self.t_end
        return ts

    @classmethod
    def from_dict(cls, d: dict) -> "IntegratorConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown integrator settings: {sorted(extra)}")
        return cls(**d)


@dataclass
class ObservationSeries:
    times: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    clips: list[dict] = field(default_factory=list)
    steps: int = 0
    dt_used: float | None = None

    def append(self, t: float, state: np.ndarray) -> None:
        if self.times and t <= self.times[-1]:
            raise ValueError("observation times must increase")
        self.times.append(float(t))
        self.states.append(np.array(state, dtype=float, copy=True))

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def as_array(self) -> np.ndarray:
        return np.stack(self.states)

    def clipped_total(self) -> float:
        return float(sum(c["clipped"] for c in self.clips))

    def write_csv(self, path: str | Path, moments_fn: Callable[[np.ndarray], dict],
                  include_states: bool = False) -> None:
        """One row per observation: ``t``, the moments, optionally the flattened state."""
        rows = [moments_fn(s) for s in self.states]
        cols = list(rows[0])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["t"] + cols
            if include_states:
                head += [f"N{k}" for k in range(self.states[0].size)]
            w.writerow(head)
            for t, r, st in zip(self.times, rows, self.states):
                line = [f"{t:.17g}"] + [f"{r[c]:.17g}" for c in cols]
                if include_states:
                    line += [f"{v:.17g}" for v in st.ravel()]
                w.writerow(line)


def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _guard(y: np.ndarray, t: float, clip: float, series: ObservationSeries) -> np.ndarray:
    neg = y < 0
    if not neg.any():
        return y
    floor = -clip * float(np.abs(y).sum())
    worst = int(np.argmin(y))
    if y[worst] <= floor:
        raise IntegrationError(
            f"negative count {y[worst]:.3e} in entry {worst} at t={t:.6g} "
            f"(threshold {floor:.3e}); reduce the step size or tolerances",
            {"t": t, "index": worst, "value": float(y[worst]), "threshold": floor,
             "step": series.steps})
    amount = float(-y[neg].sum())
    series.clips.append({"t": t, "entries": int(neg.sum()), "clipped": amount})
    log.debug("clipped %d small negative entries (total %.3e) at t=%.6g", neg.sum(), amount, t)
    y = y.copy()
    y[neg] = 0.0
    return y


def default_dt(death_rate: float) -> float:
    return 0.5 / death_rate if death_rate > 0 else math.inf


def integrate(rhs: Callable, state0, config: IntegratorConfig,
              max_death_rate: Callable | None = None) -> ObservationSeries:
    """Advance ``dN/dt = rhs(t, N)`` and record the state at each observation time.

    Observation times are hit exactly.  ``max_death_rate(N)`` (if given) sets
    the default fixed step ``0.5 / max rate`` at the initial state.
    """
    y0 = np.asarray(state0, dtype=float)
    shape = y0.shape
    y = y0.ravel().copy()
    if np.any(y < 0):
        raise ValueError("initial state must be nonnegative")
    f = lambda t, v: np.asarray(rhs(t, v.reshape(shape)), dtype=float).ravel()
    times = config.observation_times()
    series = ObservationSeries()
    series.append(0.0, y.reshape(shape))

    if config.method == "rk4_fixed":
        dt = config.dt
        if dt is None:
            rate = max_death_rate(y.reshape(shape)) if max_death_rate else 0.0
            dt = min(default_dt(rate), config.t_end or 1.0)
            log.info("rk4 step set to %.6g from the initial death rate %.6g", dt, rate)
        series.dt_used = dt
        t = 0.0
        for t_next in times[1:]:
            n_sub = max(1, math.ceil((t_next - t) / dt - 1e-9))
            h = (t_next - t) / n_sub
            for k in range(n_sub):
                y = _rk4_step(f, t + k * h, y, h)
                series.steps += 1
                y = _guard(y, t + (k + 1) * h, config.nonneg_clip, series)
            t = t_next
            series.append(t, y.reshape(shape))
        return series

    t, first_step = 0.0, None
    for t_next in times[1:]:
        solver = RK45(f, t, y, t_next, rtol=config.rtol, atol=config.atol,
                      first_step=first_step)
        while solver.status == "running":
            msg = solver.step()
            if solver.status == "failed":
                raise IntegrationError(f"adaptive step failed near t={solver.t:.6g}: {msg}",
                                       {"t": solver.t, "step": series.steps})
            series.steps += 1
            y = _guard(solver.y, solver.t, config.nonneg_clip, series)
            if y is not solver.y and solver.status == "running":
                # restart from the clipped state so the cached derivative is fresh
                solver = RK45(f, solver.t, y, t_next, rtol=config.rtol, atol=config.atol,
                              first_step=min(solver.step_size, t_next - solver.t))
            first_step = solver.step_size or first_step
            y = np.array(y, copy=True)
        t = t_next
        series.append(t, y.reshape(shape))
    return series
