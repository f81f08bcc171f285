"""Sampled fields on a Grid and their columnar text codecs."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd

from modspace.errors import FieldError, GridMismatchError
from modspace.grid import Grid

COMPLEX_FIELD_COLUMNS = ["x_index", "re", "im"]
PHASE_SPACE_COLUMNS = ["x_index", "xi_index", "re", "im"]


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex samples on the spatial nodes, flattened in C order."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex).reshape(-1)
        if values.shape != (self.grid.size,):
            raise FieldError(
                f"field has {values.size} samples, grid has {self.grid.size} nodes"
            )
        if not np.isfinite(values).all():
            raise FieldError("field contains non-finite samples")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(
        cls, grid: Grid, func: Callable[[np.ndarray], np.ndarray]
    ) -> "ComplexField":
        """Sample ``func`` on the nodes; it receives an array of shape (size, dim)."""
        return cls(grid, func(grid.points))

    @classmethod
    def zeros(cls, grid: Grid) -> "ComplexField":
        return cls(grid, np.zeros(grid.size, dtype=complex))

    @property
    def on_grid(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def with_values(self, values: np.ndarray) -> "ComplexField":
        return ComplexField(self.grid, values)

    def __mul__(self, scalar: complex) -> "ComplexField":
        return ComplexField(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __add__(self, other: "ComplexField") -> "ComplexField":
        require_same_grid(self.grid, other.grid)
        return ComplexField(self.grid, self.values + other.values)

    def __sub__(self, other: "ComplexField") -> "ComplexField":
        require_same_grid(self.grid, other.grid)
        return ComplexField(self.grid, self.values - other.values)


@dataclass(frozen=True, eq=False)
class PhaseSpaceField:
    """Values on (x-node, xi-node) pairs, shape (size, size)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        n = self.grid.size
        values = np.asarray(self.values, dtype=complex).reshape(n, n)
        if not np.isfinite(values).all():
            raise FieldError("phase-space field contains non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid) -> "PhaseSpaceField":
        return cls(grid, np.zeros((grid.size, grid.size), dtype=complex))

    @property
    def cube(self) -> np.ndarray:
        """Values reshaped to grid.shape + grid.shape (x axes, then xi axes)."""
        return self.values.reshape(self.grid.shape + self.grid.shape)

    def with_values(self, values: np.ndarray) -> "PhaseSpaceField":
        return PhaseSpaceField(self.grid, values)

    def __mul__(self, scalar: complex) -> "PhaseSpaceField":
        return PhaseSpaceField(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __add__(self, other: "PhaseSpaceField") -> "PhaseSpaceField":
        require_same_grid(self.grid, other.grid)
        return PhaseSpaceField(self.grid, self.values + other.values)

    def __sub__(self, other: "PhaseSpaceField") -> "PhaseSpaceField":
        require_same_grid(self.grid, other.grid)
        return PhaseSpaceField(self.grid, self.values - other.values)


def require_same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


def inner(a: ComplexField, b: ComplexField) -> complex:
    """<a, b> = sum a * conj(b) dx."""
    require_same_grid(a.grid, b.grid)
    return complex(np.vdot(b.values, a.values) * a.grid.cell_volume)


def l2_norm(f: ComplexField) -> float:
    return float(np.sqrt(np.vdot(f.values, f.values).real * f.grid.cell_volume))


def write_complex_field(field: ComplexField, path: Path) -> Path:
    df = pd.DataFrame(
        {
            "x_index": np.arange(field.grid.size),
            "re": field.values.real,
            "im": field.values.imag,
        }
    )
    df.to_csv(path, index=False, float_format="%.17g")
    return Path(path)


def read_complex_field(grid: Grid, path: Path) -> ComplexField:
    df = _read_columns(path, COMPLEX_FIELD_COLUMNS)
    if len(df) != grid.size:
        raise FieldError(f"{path}: {len(df)} rows for a grid of {grid.size} nodes")
    df = df.sort_values("x_index")
    return ComplexField(grid, df["re"].to_numpy() + 1j * df["im"].to_numpy())


def write_phase_space_field(field: PhaseSpaceField, path: Path) -> Path:
    n = field.grid.size
    x_index, xi_index = np.divmod(np.arange(n * n), n)
    df = pd.DataFrame(
        {
            "x_index": x_index,
            "xi_index": xi_index,
            "re": field.values.real.ravel(),
            "im": field.values.imag.ravel(),
        }
    )
    df.to_csv(path, index=False, float_format="%.17g")
    return Path(path)


def read_phase_space_field(grid: Grid, path: Path) -> PhaseSpaceField:
    df = _read_columns(path, PHASE_SPACE_COLUMNS)
    n = grid.size
    if len(df) != n * n:
        raise FieldError(f"{path}: {len(df)} rows, expected {n * n}")
    df = df.sort_values(["x_index", "xi_index"])
    values = (df["re"].to_numpy() + 1j * df["im"].to_numpy()).reshape(n, n)
    return PhaseSpaceField(grid, values)


def _read_columns(path: Path, columns: list[str]) -> pd.DataFrame:
    try:
        df = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise FieldError(f"cannot read {path}: {e}") from e
    if list(df.columns) != columns:
        raise FieldError(f"{path}: header {list(df.columns)} != {columns}")
    return df
