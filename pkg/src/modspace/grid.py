"""Periodic spatial lattices, their dual frequency lattices and mixed norms.

Conventions follow the Fourier pair

    F f(xi)   = sum_j f(x_j) exp(-i x_j . xi) dx
    F^-1 F(x) = sum_k F(xi_k) exp(+i x . xi_k) dxi / (2 pi)^n

so the forward transform carries the plain spatial weight and the inverse
carries the normalised measure.  Both are exact inverses on the lattice.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING, Sequence

import numpy as np
import scipy.fft
from pydantic import (
    BaseModel,
    ConfigDict,
    ValidationError,
    field_validator,
    model_validator,
)

from modspace.errors import FieldError, GridError
from modspace.settings import get_settings

if TYPE_CHECKING:
    from modspace.fields import PhaseSpaceField


class Grid(BaseModel):
    """Uniform periodic lattice on [-L_i, L_i) per axis, n in {1, 2}."""

    model_config = ConfigDict(frozen=True)

    counts: tuple[int, ...]
    half_widths: tuple[float, ...]

    @field_validator("counts")
    @classmethod
    def _powers_of_two(cls, counts: tuple[int, ...]) -> tuple[int, ...]:
        if len(counts) not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {len(counts)}")
        for n in counts:
            if n < 8 or n & (n - 1):
                raise ValueError(f"count {n} is not a power of two >= 8")
        return counts

    @field_validator("half_widths")
    @classmethod
    def _positive(cls, half_widths: tuple[float, ...]) -> tuple[float, ...]:
        for L in half_widths:
            if not (L > 0 and math.isfinite(L)):
                raise ValueError(f"half width {L} must be positive and finite")
        return half_widths

    @model_validator(mode="after")
    def _same_rank(self) -> "Grid":
        if len(self.counts) != len(self.half_widths):
            raise ValueError("counts and half_widths differ in length")
        return self

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def spacing(self) -> np.ndarray:
        return np.array([2.0 * L / N for N, L in zip(self.counts, self.half_widths)])

    @property
    def dual_spacing(self) -> np.ndarray:
        return np.array([math.pi / L for L in self.half_widths])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def dual_cell_volume(self) -> float:
        return float(np.prod(self.dual_spacing))

    @property
    def axes(self) -> list[np.ndarray]:
        return [
            -L + np.arange(N) * (2.0 * L / N)
            for N, L in zip(self.counts, self.half_widths)
        ]

    @property
    def dual_axes(self) -> list[np.ndarray]:
        return [
            np.arange(-N // 2, N // 2) * (math.pi / L)
            for N, L in zip(self.counts, self.half_widths)
        ]

    @property
    def points(self) -> np.ndarray:
        """Spatial nodes flattened in C order, shape (size, dim)."""
        return _product(self.axes)

    @property
    def dual_points(self) -> np.ndarray:
        """Frequency nodes flattened in C order, shape (size, dim)."""
        return _product(self.dual_axes)

    @property
    def is_square_phase_space(self) -> bool:
        """True when every axis has dx == dxi, so (x, xi) nodes coincide."""
        return bool(np.allclose(self.spacing, self.dual_spacing, rtol=1e-12, atol=0))

    def _sign(self) -> np.ndarray:
        # exp(i L xi_k) = (-1)^k on the dual lattice
        factors = [
            np.where(np.arange(-N // 2, N // 2) % 2 == 0, 1.0, -1.0) for N in self.counts
        ]
        return _outer(factors)

    def fourier(self, values: np.ndarray) -> np.ndarray:
        """Forward transform over the trailing ``dim`` axes (grid-shaped)."""
        axes = tuple(range(-self.dim, 0))
        spectrum = scipy.fft.fftn(values, axes=axes, workers=get_settings().threads)
        return self.cell_volume * self._sign() * scipy.fft.fftshift(spectrum, axes=axes)

    def inverse_fourier(self, values: np.ndarray) -> np.ndarray:
        """Inverse transform with the d-bar measure over the trailing axes."""
        axes = tuple(range(-self.dim, 0))
        shifted = scipy.fft.ifftshift(self._sign() * values, axes=axes)
        scale = self.dual_cell_volume * self.size / (2.0 * math.pi) ** self.dim
        return scale * scipy.fft.ifftn(shifted, axes=axes, workers=get_settings().threads)


def _outer(factors: Sequence[np.ndarray]) -> np.ndarray:
    out = factors[0]
    for f in factors[1:]:
        out = np.multiply.outer(out, f)
    return out


def _product(axes: Sequence[np.ndarray]) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def make_grid(
    dim: int, counts: Sequence[int], half_widths: Sequence[float]
) -> Grid:
    if len(counts) != dim or len(half_widths) != dim:
        raise GridError(f"expected {dim} counts and half widths")
    try:
        return Grid(
            counts=tuple(int(n) for n in counts),
            half_widths=tuple(float(L) for L in half_widths),
        )
    except ValidationError as e:
        raise GridError(str(e)) from e


def _parse_exponent(value):
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "∞"):
        return math.inf
    return value


class MixedNormSpec(BaseModel):
    """Exponents (p, q) of the L^p_x L^q_xi norm; math.inf is allowed."""

    model_config = ConfigDict(frozen=True)

    p: float
    q: float

    @field_validator("p", "q", mode="before")
    @classmethod
    def _accept_inf(cls, value):
        return _parse_exponent(value)

    @field_validator("p", "q")
    @classmethod
    def _at_least_one(cls, value: float) -> float:
        if not value >= 1:
            raise ValueError(f"exponent {value} must be >= 1")
        return value

    @property
    def label(self) -> str:
        def fmt(e: float) -> str:
            return "inf" if math.isinf(e) else f"{e:g}"

        return f"M^{{{fmt(self.p)},{fmt(self.q)}}}"

    @classmethod
    def parse(cls, text: str) -> "MixedNormSpec":
        p, q = (s.strip() for s in text.split(","))
        return cls(p=p, q=q)


def _lp(values: np.ndarray, p: float, weight: float, axis: int) -> np.ndarray:
    if math.isinf(p):
        return values.max(axis=axis)
    if p == 1:
        return values.sum(axis=axis) * weight
    if p == 2:
        return np.sqrt((values * values).sum(axis=axis) * weight)
    return ((values**p).sum(axis=axis) * weight) ** (1.0 / p)


def mixed_norm(F: "PhaseSpaceField", spec: MixedNormSpec) -> float:
    """|| || F(x, xi) ||_{L^p_x} ||_{L^q_xi} by Riemann sums.

    Infinite exponents take the grid maximum without quadrature weight.
    """
    magnitude = np.abs(F.values)
    if np.isnan(magnitude).any():
        raise FieldError("phase-space field contains NaN")
    inner = _lp(magnitude, spec.p, F.grid.cell_volume, axis=0)
    return float(_lp(inner, spec.q, F.grid.dual_cell_volume, axis=0))
