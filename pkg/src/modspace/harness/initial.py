"""Initial data and windows: Gaussians, Hermite functions, field files."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import eval_hermite

from modspace.errors import ConfigError
from modspace.fields import ComplexField, read_complex_field
from modspace.grid import Grid
from modspace.harness.config import InitialSection, WindowSection
from modspace.schrod import free_propagate
from modspace.wpt import Window


def _vector(values: Sequence[float], dim: int, name: str) -> np.ndarray:
    values = list(values)
    if len(values) == 1:
        values = values * dim
    if len(values) != dim:
        raise ConfigError(f"{name} needs {dim} components, got {len(values)}")
    return np.asarray(values, dtype=float)


def gaussian(
    grid: Grid,
    center: Sequence[float] = (0.0,),
    momentum: Sequence[float] = (0.0,),
    width: float = 1.0,
) -> ComplexField:
    """exp(-|x - c|^2 / (2 w^2)) exp(i p . x)."""
    c = _vector(center, grid.dim, "center")
    p = _vector(momentum, grid.dim, "momentum")

    def sample(x):
        r2 = ((x - c) ** 2).sum(axis=-1)
        return np.exp(-r2 / (2 * width**2) + 1j * (x @ p))

    return ComplexField.from_function(grid, sample)


def hermite(grid: Grid, k: int, width: float = 1.0) -> ComplexField:
    """L2-normalised Hermite function of order k along the first axis.

    Remaining axes carry the ground state.
    """
    if not 0 <= k <= 4:
        raise ConfigError(f"hermite order must be in 0..4, got {k}")

    def one(s, order):
        norm = 1.0 / math.sqrt(2.0**order * math.factorial(order) * math.sqrt(math.pi) * width)
        return norm * eval_hermite(order, s) * np.exp(-0.5 * s * s)

    def sample(x):
        s = x / width
        out = one(s[:, 0], k)
        for i in range(1, grid.dim):
            out = out * one(s[:, i], 0)
        return out.astype(complex)

    return ComplexField.from_function(grid, sample)


def build_initial(
    section: InitialSection, grid: Grid, base: Optional[Path] = None
) -> ComplexField:
    if section.kind == "file":
        if section.path is None:
            raise ConfigError("initial.path is required for file data")
        path = section.path if base is None or section.path.is_absolute() else base / section.path
        field = read_complex_field(grid, path)
    elif section.kind == "hermite":
        field = hermite(grid, section.k, section.width)
    else:
        field = gaussian(grid, section.center, section.momentum, section.width)
    if section.focus:
        field = free_propagate(field, -section.focus)
    return field


def build_window(section: WindowSection, grid: Grid, width: Optional[float] = None) -> Window:
    width = section.width if width is None else width
    if section.kind == "hermite":
        return Window(hermite(grid, section.k, width))
    return Window(gaussian(grid, width=width))


def signal_set(grid: Grid) -> list[ComplexField]:
    """Ten test signals: plain, shifted and modulated Gaussians, Hermite 1..4."""
    signals = [gaussian(grid, width=w) for w in (0.5, 1.0, 2.0)]
    signals += [
        gaussian(grid, center=(2.0,)),
        gaussian(grid, momentum=(1.5,)),
        gaussian(grid, center=(-1.5,), momentum=(-2.0,), width=0.7),
    ]
    signals += [hermite(grid, k) for k in range(1, 5)]
    return signals
