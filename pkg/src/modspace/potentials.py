"""Potential models V(t, x) with gradient, Hessian and smoothness class.

Evaluators are vectorised: ``x`` has shape (..., n); values come back with
shape (...), gradients (..., n) and Hessians (..., n, n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from modspace.errors import ConfigError

Evaluator = Callable[[float, np.ndarray], np.ndarray]


class PotentialClass(str, Enum):
    FREE = "free"
    QUADRATIC = "quadratic"
    # |d^a V| <= C_a for |a| >= 2
    SUBQUAD2 = "subquad2"
    # |d^a V| <= C_a for |a| >= 1
    SUBQUAD1 = "subquad1"


@dataclass(frozen=True, eq=False)
class PotentialModel:
    name: str
    dim: int
    value: Evaluator
    grad: Evaluator
    hess: Evaluator
    potential_class: PotentialClass
    # sup_j sup_x |d_j V|; finite only for subquad1 and free
    c1_bound: float
    # sup of Hessian entries
    c2_bound: float
    time_dependent: bool = False
    # constant Hessian of quadratic potentials (enables the remainder fast path)
    constant_hessian: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.potential_class is PotentialClass.SUBQUAD1 and not math.isfinite(
            self.c1_bound
        ):
            raise ConfigError(f"{self.name}: subquad1 potential needs a finite C1 bound")
        if self.potential_class is PotentialClass.FREE and self.c1_bound != 0:
            raise ConfigError(f"{self.name}: free potential must have C1 bound 0")

    @property
    def is_zero(self) -> bool:
        return self.potential_class is PotentialClass.FREE

    @property
    def is_quadratic(self) -> bool:
        return self.constant_hessian is not None


def free(dim: int = 1) -> PotentialModel:
    def value(t, x):
        return np.zeros(np.shape(x)[:-1])

    def grad(t, x):
        return np.zeros(np.shape(x))

    def hess(t, x):
        return np.zeros(np.shape(x) + (dim,))

    return PotentialModel(
        name="free",
        dim=dim,
        value=value,
        grad=grad,
        hess=hess,
        potential_class=PotentialClass.FREE,
        c1_bound=0.0,
        c2_bound=0.0,
        constant_hessian=np.zeros((dim, dim)),
    )


def quadratic(
    hessian: Sequence[Sequence[float]], linear: Optional[Sequence[float]] = None
) -> PotentialModel:
    """V(x) = 1/2 x^T H x + b . x."""
    H = np.atleast_2d(np.asarray(hessian, dtype=float))
    dim = H.shape[0]
    if H.shape != (dim, dim) or not np.allclose(H, H.T, atol=1e-12):
        raise ConfigError("quadratic potential needs a symmetric square Hessian")
    b = np.zeros(dim) if linear is None else np.asarray(linear, dtype=float)

    def value(t, x):
        return 0.5 * np.einsum("...i,ij,...j->...", x, H, x) + x @ b

    def grad(t, x):
        return x @ H + b

    def hess(t, x):
        return np.broadcast_to(H, np.shape(x)[:-1] + (dim, dim))

    c1 = 0.0 if not H.any() and not b.any() else math.inf
    return PotentialModel(
        name="quadratic",
        dim=dim,
        value=value,
        grad=grad,
        hess=hess,
        potential_class=PotentialClass.QUADRATIC,
        c1_bound=c1,
        c2_bound=float(np.abs(H).max()),
        constant_hessian=H,
    )


def harmonic(dim: int = 1, sign: float = 1.0) -> PotentialModel:
    """V(x) = +-1/2 |x|^2."""
    if sign not in (1.0, -1.0):
        raise ConfigError(f"harmonic sign must be +1 or -1, got {sign}")
    model = quadratic(sign * np.eye(dim))
    name = "harmonic" if sign > 0 else "inverted_harmonic"
    return _renamed(model, name)


def cosine(
    dim: int = 1, amplitude: float = 1.0, wave: Optional[Sequence[float]] = None
) -> PotentialModel:
    """V(x) = A cos(x . v); every derivative of order >= 1 is bounded."""
    v = np.ones(dim) if wave is None else np.asarray(wave, dtype=float)
    A = float(amplitude)

    def value(t, x):
        return A * np.cos(x @ v)

    def grad(t, x):
        return -A * np.sin(x @ v)[..., None] * v

    def hess(t, x):
        return -A * np.cos(x @ v)[..., None, None] * np.multiply.outer(v, v)

    return PotentialModel(
        name="cosine",
        dim=dim,
        value=value,
        grad=grad,
        hess=hess,
        potential_class=PotentialClass.SUBQUAD1,
        c1_bound=abs(A) * float(np.abs(v).max()),
        c2_bound=abs(A) * float(np.abs(np.multiply.outer(v, v)).max()),
    )


def harmonic_cosine(dim: int = 1) -> PotentialModel:
    """V(x) = 1/2 |x|^2 + sum_i cos x_i; bounded derivatives from order 2."""

    def value(t, x):
        return 0.5 * (x * x).sum(axis=-1) + np.cos(x).sum(axis=-1)

    def grad(t, x):
        return x - np.sin(x)

    def hess(t, x):
        diag = 1.0 - np.cos(x)
        return diag[..., None] * np.eye(dim)

    return PotentialModel(
        name="harmonic_cosine",
        dim=dim,
        value=value,
        grad=grad,
        hess=hess,
        potential_class=PotentialClass.SUBQUAD2,
        c1_bound=math.inf,
        c2_bound=2.0,
    )


def time_cosine(
    dim: int = 1, amplitude: float = 1.0, wave: Optional[Sequence[float]] = None
) -> PotentialModel:
    """V(t, x) = A cos(t) cos(x . v)."""
    static = cosine(dim, amplitude, wave)

    def value(t, x):
        return math.cos(t) * static.value(t, x)

    def grad(t, x):
        return math.cos(t) * static.grad(t, x)

    def hess(t, x):
        return math.cos(t) * static.hess(t, x)

    return PotentialModel(
        name="time_cosine",
        dim=dim,
        value=value,
        grad=grad,
        hess=hess,
        potential_class=PotentialClass.SUBQUAD1,
        c1_bound=static.c1_bound,
        c2_bound=static.c2_bound,
        time_dependent=True,
    )


def _renamed(model: PotentialModel, name: str) -> PotentialModel:
    return PotentialModel(
        name=name,
        dim=model.dim,
        value=model.value,
        grad=model.grad,
        hess=model.hess,
        potential_class=model.potential_class,
        c1_bound=model.c1_bound,
        c2_bound=model.c2_bound,
        time_dependent=model.time_dependent,
        constant_hessian=model.constant_hessian,
    )


POTENTIALS = {
    "free": free,
    "harmonic": harmonic,
    "quadratic": quadratic,
    "cosine": cosine,
    "harmonic_cosine": harmonic_cosine,
    "time_cosine": time_cosine,
}


def build_potential(kind: str, dim: int, **params) -> PotentialModel:
    if kind == "quadratic":
        return quadratic(**params)
    try:
        factory = POTENTIALS[kind]
    except KeyError:
        raise ConfigError(
            f"unknown potential '{kind}', expected one of {sorted(POTENTIALS)}"
        )
    try:
        return factory(dim, **params)
    except TypeError as e:
        raise ConfigError(f"bad parameters for potential '{kind}': {e}") from e


def consistency_errors(
    V: PotentialModel, rng: np.random.Generator, samples: int = 32, h: float = 1e-5
) -> tuple[float, float]:
    """(max Hessian asymmetry, max gradient error vs central differences)."""
    x = rng.uniform(-4.0, 4.0, size=(samples, V.dim))
    t = float(rng.uniform(0.0, 2.0))
    H = V.hess(t, x)
    asymmetry = float(np.abs(H - np.swapaxes(H, -1, -2)).max())
    grad = V.grad(t, x)
    worst = 0.0
    for k in range(V.dim):
        e = np.zeros(V.dim)
        e[k] = h
        fd = (V.value(t, x + e) - V.value(t, x - e)) / (2 * h)
        worst = max(worst, float(np.abs(fd - grad[..., k]).max()))
    return asymmetry, worst
