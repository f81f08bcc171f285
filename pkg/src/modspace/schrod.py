"""Reference solvers for i du/dt = -1/2 Laplacian u + V(t, x) u."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from modspace.errors import ConfigError
from modspace.fields import ComplexField
from modspace.grid import Grid
from modspace.logging import get_logger
from modspace.potentials import PotentialModel
from modspace.settings import get_settings

logger = get_logger(__name__)


def _kinetic_multiplier(grid: Grid, t: float) -> np.ndarray:
    xi = grid.dual_points
    return np.exp(-0.5j * t * (xi * xi).sum(axis=-1)).reshape(grid.shape)


def free_propagate(f: ComplexField, t: float) -> ComplexField:
    """exp(i t Laplacian / 2) f as a Fourier multiplier."""
    if t == 0:
        return f
    grid = f.grid
    spectrum = grid.fourier(f.on_grid) * _kinetic_multiplier(grid, t)
    return f.with_values(grid.inverse_fourier(spectrum))


def _steps(span: float, dt: float) -> int:
    return max(1, math.ceil(abs(span) / dt - 1e-9))


def propagate(
    u0: ComplexField,
    V: PotentialModel,
    t: float,
    steps: int,
    t0: float = 0.0,
) -> ComplexField:
    """Strang split-step from t0 to t0 + t; t may be negative.

    Each step applies exp(-i V dt/2), the free flow over dt, then exp(-i V dt/2),
    with V sampled at the midpoint of the step.
    """
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    if abs(t) > get_settings().t_max:
        raise ConfigError(f"|t| = {abs(t):g} exceeds T_max = {get_settings().t_max:g}")
    if t == 0:
        return u0
    grid = u0.grid
    if V.is_zero:
        return free_propagate(u0, t)

    dt = t / steps
    kinetic = _kinetic_multiplier(grid, dt)
    x = grid.points
    u = u0.on_grid
    for k in range(steps):
        mid = t0 + (k + 0.5) * dt
        kick = np.exp(-0.5j * dt * V.value(mid, x)).reshape(grid.shape)
        u = kick * u
        u = grid.inverse_fourier(grid.fourier(u) * kinetic)
        u = kick * u
    logger.debug("split-step propagation", t=t, steps=steps, potential=V.name)
    return u0.with_values(u)


def propagate_to(
    u0: ComplexField,
    V: PotentialModel,
    times: Sequence[float],
    dt: float = 1e-3,
    t0: float = 0.0,
) -> list[ComplexField]:
    """Solutions at each of ``times`` (visited in order) from u0 at t0."""
    out = []
    u, now = u0, t0
    for target in times:
        span = target - now
        if span != 0:
            u = propagate(u, V, span, _steps(span, dt), t0=now)
        now = target
        out.append(u)
    return out


def propagate_dt(
    u0: ComplexField, V: PotentialModel, t: float, dt: float = 1e-3, t0: float = 0.0
) -> ComplexField:
    """``propagate`` with the step count chosen from a maximal step size."""
    return propagate(u0, V, t, _steps(t, dt), t0=t0)
