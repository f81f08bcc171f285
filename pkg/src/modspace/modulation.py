"""Modulation-space norms with static or time-evolved windows."""

from __future__ import annotations

from enum import Enum
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel

from modspace.errors import ConfigError
from modspace.fields import ComplexField
from modspace.grid import MixedNormSpec, mixed_norm
from modspace.potentials import PotentialModel
from modspace.schrod import free_propagate, propagate_dt, propagate_to
from modspace.wpt import Window, wpt


class WindowEvolution(str, Enum):
    STATIC = "static"
    # exp(i t Laplacian / 2) phi_0
    FREE = "free"
    # the full equation with the experiment's potential
    SAME_EQUATION = "same_equation"


def mod_norm(f: ComplexField, phi: Window, spec: MixedNormSpec) -> float:
    return mixed_norm(wpt(f, phi), spec)


def evolved_window(
    phi0: Window,
    t: float,
    mode: WindowEvolution,
    V: Optional[PotentialModel] = None,
    dt: float = 1e-3,
) -> Window:
    mode = WindowEvolution(mode)
    if mode is WindowEvolution.SAME_EQUATION and V is None:
        raise ConfigError("same_equation window evolution needs a potential")
    if t == 0 or mode is WindowEvolution.STATIC:
        return phi0
    if mode is WindowEvolution.FREE:
        return Window(free_propagate(phi0.field, t))
    return Window(propagate_dt(phi0.field, V, t, dt))


def evolved_windows(
    phi0: Window,
    times: Sequence[float],
    mode: WindowEvolution,
    V: Optional[PotentialModel] = None,
    dt: float = 1e-3,
) -> list[Window]:
    """Windows at each of ``times``, reusing the previous solve for same_equation."""
    mode = WindowEvolution(mode)
    if mode is not WindowEvolution.SAME_EQUATION:
        return [evolved_window(phi0, t, mode, V, dt) for t in times]
    if V is None:
        raise ConfigError("same_equation window evolution needs a potential")
    return [Window(field) for field in propagate_to(phi0.field, V, times, dt)]


class RatioReport(BaseModel):
    """Spread of norm ratios over a signal set; ``constant`` >= 1."""

    low: float
    high: float
    ratios: list[float]

    @property
    def constant(self) -> float:
        return max(self.high, 1.0 / self.low)


def window_equivalence(
    signals: Sequence[ComplexField], phi: Window, psi: Window, spec: MixedNormSpec
) -> RatioReport:
    """mod_norm(f, phi) / mod_norm(f, psi) over the signals."""
    ratios = np.array([mod_norm(f, phi, spec) / mod_norm(f, psi, spec) for f in signals])
    return RatioReport(low=ratios.min(), high=ratios.max(), ratios=ratios.tolist())


def embedding_ratios(
    signals: Sequence[ComplexField],
    phi: Window,
    smaller: MixedNormSpec,
    larger: MixedNormSpec,
) -> RatioReport:
    """||f||_{M^larger} / ||f||_{M^smaller} for exponents larger >= smaller."""
    if larger.p < smaller.p or larger.q < smaller.q:
        raise ConfigError(f"{larger.label} does not embed {smaller.label}")
    ratios = np.array(
        [mod_norm(f, phi, larger) / mod_norm(f, phi, smaller) for f in signals]
    )
    return RatioReport(low=ratios.min(), high=ratios.max(), ratios=ratios.tolist())
