"""Wave packet (short-time Fourier) transform, its adjoint and inversion.

    W_phi f(x, xi) = int conj(phi(y - x)) f(y) exp(-i y . xi) dy

Window shifts are circular on the periodic grid, which makes every x-slice an
exact lattice Fourier transform and the adjoint an exact adjoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from dataclasses import field as dataclass_field
from typing import Sequence

import numpy as np

from modspace.errors import DegenerateWindowError
from modspace.fields import ComplexField, PhaseSpaceField, inner, require_same_grid
from modspace.grid import Grid


@dataclass(frozen=True, eq=False)
class Window:
    field: ComplexField
    l2_norm_sq: float = dataclass_field(init=False)

    def __post_init__(self):
        norm_sq = float(np.vdot(self.field.values, self.field.values).real)
        norm_sq *= self.field.grid.cell_volume
        if not norm_sq > 0:
            raise DegenerateWindowError("window is the zero function")
        object.__setattr__(self, "l2_norm_sq", norm_sq)

    @property
    def grid(self) -> Grid:
        return self.field.grid


def shift_indices(grid: Grid) -> tuple[np.ndarray, ...]:
    """Index arrays picking phi(y_j - x_a) out of the window samples.

    For axis i the array broadcasts over (a_1..a_n, j_1..j_n) and holds
    (j - a + N/2) mod N, the node whose coordinate is the circular offset.
    """
    n = grid.dim
    out = []
    for i, N in enumerate(grid.counts):
        a_shape = [1] * (2 * n)
        j_shape = [1] * (2 * n)
        a_shape[i] = N
        j_shape[n + i] = N
        a = np.arange(N).reshape(a_shape)
        j = np.arange(N).reshape(j_shape)
        out.append((j - a + N // 2) % N)
    return tuple(out)


def offsets(grid: Grid) -> list[np.ndarray]:
    """Per-axis circular offsets y - x, each broadcastable to shape + shape."""
    return [axis[idx] for axis, idx in zip(grid.axes, shift_indices(grid))]


def shifted_windows(phi: Window) -> np.ndarray:
    """Array of shape (size, *grid.shape) whose a-th slice is y -> phi(y - x_a)."""
    grid = phi.grid
    stacked = phi.field.on_grid[shift_indices(grid)]
    return stacked.reshape((grid.size,) + grid.shape)


def wpt(f: ComplexField, phi: Window) -> PhaseSpaceField:
    require_same_grid(f.grid, phi.grid)
    grid = f.grid
    products = np.conj(shifted_windows(phi)) * f.on_grid[np.newaxis]
    return PhaseSpaceField(grid, grid.fourier(products).reshape(grid.size, grid.size))


def wpt_adjoint(F: PhaseSpaceField, phi: Window) -> ComplexField:
    """W*_phi F(x) = iint F(y, xi) phi(x - y) exp(i x . xi) dy dbar-xi."""
    require_same_grid(F.grid, phi.grid)
    grid = F.grid
    slices = grid.inverse_fourier(F.values.reshape((grid.size,) + grid.shape))
    summed = (shifted_windows(phi) * slices).sum(axis=0) * grid.cell_volume
    return ComplexField(grid, summed)


def inner_product(psi: Window, phi: Window) -> complex:
    """<psi, phi> with the conjugate on phi, the constant of the inversion formula."""
    return inner(psi.field, phi.field)


def invert(
    F: PhaseSpaceField, psi: Window, phi: Window, tolerance: float = 1e-8
) -> ComplexField:
    """(1 / <psi, phi>) W*_psi F, which returns f when F = W_phi f."""
    require_same_grid(psi.grid, phi.grid)
    c = inner_product(psi, phi)
    floor = tolerance * np.sqrt(psi.l2_norm_sq * phi.l2_norm_sq)
    if abs(c) <= floor:
        raise DegenerateWindowError(
            f"degenerate window pair: |<psi, phi>| = {abs(c):.3e} <= {floor:.3e}"
        )
    return wpt_adjoint(F, psi) * (1.0 / c)


def shift(f: ComplexField, nodes: Sequence[int]) -> ComplexField:
    """Circular translation f(. - a) with a = nodes * dx."""
    axes = tuple(range(f.grid.dim))
    return f.with_values(np.roll(f.on_grid, tuple(nodes), axis=axes))
