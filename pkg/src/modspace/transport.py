"""Characteristic transport of wave packet transforms.

With a freely evolving window, W(t) = W_{phi(t)} u(t) satisfies

    dW/dt + xi . grad_x W - grad V(x) . grad_xi W = -i h W - i Ru

so along the backward characteristics (f(s), g(s)) ending at (x, xi) at time t

    W(t, x, xi) = exp(-i int_0^t h) [ W_{phi_0} u_0(f(0), g(0))
                  - i int_0^t exp(i int_0^tau h) Ru(tau, f(tau), g(tau)) dtau ]

with h = |g|^2/2 + V(s, f) - grad V(s, f) . f. Ru is the second-order Taylor
remainder of V acting as a windowed transform. ``picard_propagate`` solves the
identity as a fixed point, rebuilding u(tau) from W(tau) by inversion.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy import ndimage
from scipy.special import roots_legendre

from modspace.classical import FlowBundle, FlowOptions, flow_bundle, phase_space_points
from modspace.errors import ConvergenceError
from modspace.fields import ComplexField, PhaseSpaceField, require_same_grid
from modspace.grid import Grid, MixedNormSpec, mixed_norm
from modspace.logging import get_logger
from modspace.modulation import WindowEvolution, evolved_window
from modspace.potentials import PotentialModel
from modspace.settings import get_settings
from modspace.wpt import Window, invert, offsets, shifted_windows, wpt

logger = get_logger(__name__)

L2 = MixedNormSpec(p=2, q=2)
ITERATION_REPORT_COLUMNS = ["k", "increment_l2", "wall_seconds"]


class PhaseIntegralSpec(BaseModel):
    """Trapezoid nodes for int_0^t h ds; None uses the flow's own steps."""

    model_config = ConfigDict(frozen=True)

    nodes: Optional[int] = Field(default=None, ge=2)

    def flow_options(self, t: float, base: FlowOptions) -> FlowOptions:
        if self.nodes is None or t == 0:
            return base
        return base.model_copy(update={"step": abs(t) / (self.nodes - 1), "steps": None})


class RemainderSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    theta_nodes: int = Field(default=8, ge=1)
    tau_step: float = Field(default=0.05, gt=0)
    max_iterations: int = Field(default=8, ge=1)
    tolerance: float = Field(default=1e-6, gt=0)

    def tau_nodes(self, t: float) -> np.ndarray:
        count = max(1, math.ceil(abs(t) / self.tau_step - 1e-9)) if t != 0 else 0
        return np.linspace(0.0, t, count + 1)


def phase_h(V: PotentialModel, s: float, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """h = |g|^2 / 2 + V(s, f) - grad V(s, f) . f."""
    return (
        0.5 * (g * g).sum(axis=-1)
        + V.value(s, f)
        - (V.grad(s, f) * f).sum(axis=-1)
    )


def _executor() -> ThreadPoolExecutor:
    return ThreadPoolExecutor(max_workers=get_settings().threads)


class PhaseSpaceInterpolator:
    """Cubic spline of a phase-space field at off-grid points.

    The carrier exp(-i x . xi / 2) is removed before the spline is built and
    restored at the target, so the spline only sees the slowly varying part.
    The field is zero-extended by ``pad`` nodes on every side; targets inside
    the pad are interpolated against that extension, targets beyond it
    evaluate to 0 and are counted.
    """

    def __init__(self, F: PhaseSpaceField, pad: int = 2):
        grid = F.grid
        self.grid = grid
        self.pad = pad
        carrier = np.exp(0.5j * (grid.points @ grid.dual_points.T))
        smooth = np.pad((carrier * F.values).reshape(grid.shape + grid.shape), pad)
        self._real = ndimage.spline_filter(smooth.real, order=3, mode="constant")
        self._imag = ndimage.spline_filter(smooth.imag, order=3, mode="constant")
        self._origin = np.array(
            [axis[0] for axis in grid.axes] + [axis[0] for axis in grid.dual_axes]
        )
        self._step = np.concatenate([grid.spacing, grid.dual_spacing])
        self._last = np.array(grid.shape + grid.shape, dtype=float) - 1

    def __call__(self, X: np.ndarray, Xi: np.ndarray) -> tuple[np.ndarray, int]:
        target = np.concatenate([X, Xi], axis=-1)
        index = (target - self._origin) / self._step
        coords = np.moveaxis(index + self.pad, -1, 0).reshape(index.shape[-1], -1)
        real = ndimage.map_coordinates(
            self._real, coords, order=3, mode="constant", prefilter=False
        )
        imag = ndimage.map_coordinates(
            self._imag, coords, order=3, mode="constant", prefilter=False
        )
        values = (real + 1j * imag).reshape(index.shape[:-1])
        padded = ((index >= -self.pad) & (index <= self._last + self.pad)).all(axis=-1)
        values = np.where(padded, values, 0.0)
        values = values * np.exp(-0.5j * (X * Xi).sum(axis=-1))
        return values, int((~padded).sum())


def _backward_bundle(
    V: PotentialModel,
    grid: Grid,
    t: float,
    s_nodes: Sequence[float],
    opts: FlowOptions,
    tangent: bool = False,
) -> FlowBundle:
    x, xi = phase_space_points(grid)

    def integrand(s, f, g):
        return phase_h(V, s, f, g)

    return flow_bundle(V, t, x, xi, s_nodes, opts, tangent=tangent, integrand=integrand)


def leading_transport(
    u0: ComplexField,
    phi0: Window,
    V: PotentialModel,
    t: float,
    opts: Optional[FlowOptions] = None,
    phase: Optional[PhaseIntegralSpec] = None,
) -> PhaseSpaceField:
    """exp(-i int_0^t h) W_{phi_0} u_0(f(0), g(0)) on every phase-space node."""
    require_same_grid(u0.grid, phi0.grid)
    W0 = wpt(u0, phi0)
    if t == 0:
        return W0
    opts = (phase or PhaseIntegralSpec()).flow_options(t, opts or FlowOptions())
    bundle = _backward_bundle(V, u0.grid, t, [0.0], opts)
    values, outside = PhaseSpaceInterpolator(W0)(bundle.f[0], bundle.g[0])
    if outside:
        logger.warning("interpolation targets outside the grid", count=outside, t=t)
    # action holds int_t^0 h = -int_0^t h
    return PhaseSpaceField(u0.grid, np.exp(1j * bundle.action[0]) * values)


def remainder_apply(
    u: ComplexField,
    phi: Window,
    V: PotentialModel,
    tau: float,
    theta_nodes: int = 8,
) -> PhaseSpaceField:
    """Ru(x, xi) = sum_jk int conj(phi(y - x)) V_jk(x, y) d_j d_k u(y) e^{-i y.xi} dy.

    d = y - x is the circular offset and V_jk = int_0^1 d_jk V(x + theta d)
    (1 - theta) dtheta.
    """
    require_same_grid(u.grid, phi.grid)
    grid = u.grid
    if V.is_quadratic:
        return _quadratic_remainder(u, phi, V.constant_hessian)

    size = grid.size
    d = np.stack(
        [np.broadcast_to(o, grid.shape + grid.shape).reshape(size, size) for o in offsets(grid)],
        axis=-1,
    )
    x = grid.points[:, None, :]
    roots, weights = roots_legendre(theta_nodes)
    theta = 0.5 * (roots + 1.0)
    weights = 0.5 * weights * (1.0 - theta)

    kernel = np.zeros((size, size))
    for th, w in zip(theta, weights):
        H = V.hess(tau, x + th * d)
        kernel += w * np.einsum("...jk,...j,...k->...", H, d, d)

    windows = np.conj(shifted_windows(phi)).reshape(size, size)
    products = (windows * kernel * u.values[None, :]).reshape((size,) + grid.shape)
    return PhaseSpaceField(grid, grid.fourier(products).reshape(size, size))


def _quadratic_remainder(
    u: ComplexField, phi: Window, hessian: np.ndarray
) -> PhaseSpaceField:
    # V_jk = H_jk / 2; the weights d_j d_k fold into windows y_j y_k phi(y)
    grid = u.grid
    out = PhaseSpaceField.zeros(grid)
    points = grid.points
    for j in range(grid.dim):
        for k in range(grid.dim):
            if hessian[j, k] == 0:
                continue
            window = Window(phi.field.with_values(points[:, j] * points[:, k] * phi.field.values))
            out = out + wpt(u, window) * (0.5 * hessian[j, k])
    return out


class CharacteristicTransport:
    """Backward characteristics from every tau node, shared by all iterates.

    ``paths[i]`` holds the flow from tau_i recorded at tau_{i-1}, ..., tau_0
    together with int_{tau_i}^{tau_j} h.
    """

    def __init__(
        self,
        u0: ComplexField,
        phi0: Window,
        V: PotentialModel,
        t: float,
        spec: Optional[RemainderSpec] = None,
        phase: Optional[PhaseIntegralSpec] = None,
        opts: Optional[FlowOptions] = None,
    ):
        require_same_grid(u0.grid, phi0.grid)
        self.grid = u0.grid
        self.V = V
        self.t = t
        self.spec = spec or RemainderSpec()
        self.opts = (phase or PhaseIntegralSpec()).flow_options(t, opts or FlowOptions())
        self.taus = self.spec.tau_nodes(t)
        self.windows = [evolved_window(phi0, tau, WindowEvolution.FREE) for tau in self.taus]

        W0 = wpt(u0, phi0)
        initial = PhaseSpaceInterpolator(W0)
        with _executor() as pool:
            self.paths: list[Optional[FlowBundle]] = [None] + list(
                pool.map(self._path, range(1, len(self.taus)))
            )

        self.leading = [W0]
        outside = 0
        for path in self.paths[1:]:
            values, out = initial(path.f[-1], path.g[-1])
            outside += out
            self.leading.append(PhaseSpaceField(self.grid, np.exp(1j * path.action[-1]) * values))
        if outside:
            logger.warning("interpolation targets outside the grid", count=outside, t=t)

    def _path(self, i: int) -> FlowBundle:
        nodes = self.taus[i - 1 :: -1]
        return _backward_bundle(self.V, self.grid, self.taus[i], nodes, self.opts)

    def _weights(self, i: int) -> np.ndarray:
        dtau = self.taus[1] - self.taus[0]
        w = np.full(i + 1, dtau)
        w[0] = w[-1] = 0.5 * dtau
        return w

    def remainders(self, slices: Sequence[PhaseSpaceField]) -> list[PhaseSpaceField]:
        def one(j: int) -> PhaseSpaceField:
            window = self.windows[j]
            u = invert(slices[j], window, window)
            return remainder_apply(u, window, self.V, self.taus[j], self.spec.theta_nodes)

        with _executor() as pool:
            return list(pool.map(one, range(len(self.taus))))

    def apply(self, slices: Sequence[PhaseSpaceField]) -> list[PhaseSpaceField]:
        """Right-hand side of the transport identity at every tau node."""
        remainders = self.remainders(slices)
        interpolators = [PhaseSpaceInterpolator(R) for R in remainders]

        def one(i: int) -> tuple[PhaseSpaceField, int]:
            if i == 0:
                return self.leading[0], 0
            path = self.paths[i]
            w = self._weights(i)
            # tau_i itself sits on the grid nodes with zero action
            integral = w[i] * remainders[i].values
            outside = 0
            for j in range(i):
                q = i - 1 - j
                values, out = interpolators[j](path.f[q], path.g[q])
                outside += out
                integral = integral + w[j] * np.exp(1j * path.action[q]) * values
            return self.leading[i] - 1j * PhaseSpaceField(self.grid, integral), outside

        with _executor() as pool:
            results = list(pool.map(one, range(len(self.taus))))
        outside = sum(out for _, out in results)
        if outside:
            logger.warning("remainder targets outside the grid", count=outside)
        return [field for field, _ in results]


def relative_l2(new: PhaseSpaceField, old: PhaseSpaceField) -> float:
    scale = mixed_norm(new, L2)
    diff = mixed_norm(new - old, L2)
    return diff / scale if scale > 0 else diff


def increment_ratios(increments: Sequence[float]) -> list[float]:
    """||dW^(k+1)|| / ||dW^(k)|| for consecutive iterations."""
    return [b / a if a > 0 else 0.0 for a, b in zip(increments, increments[1:])]


def contraction_constant(increments: Sequence[float], t: float) -> float:
    """Smallest c with every increment ratio <= c |t|; 0 when nothing contracts yet."""
    ratios = increment_ratios(increments)
    if not ratios or t == 0:
        return 0.0
    return max(ratios) / abs(t)


@dataclass(frozen=True, eq=False)
class PicardResult:
    field: PhaseSpaceField
    slices: list[PhaseSpaceField]
    report: pd.DataFrame
    transport: CharacteristicTransport

    @property
    def increments(self) -> list[float]:
        return self.report["increment_l2"].tolist()

    @property
    def monotone(self) -> bool:
        """Every increment after the first is strictly smaller than the one before."""
        increments = self.increments
        return all(b < a for a, b in zip(increments, increments[1:]))

    @property
    def contraction(self) -> float:
        return contraction_constant(self.increments, self.transport.t)


def picard_propagate(
    u0: ComplexField,
    phi0: Window,
    V: PotentialModel,
    t: float,
    spec: Optional[RemainderSpec] = None,
    phase: Optional[PhaseIntegralSpec] = None,
    opts: Optional[FlowOptions] = None,
) -> PicardResult:
    """Fixed point of the transport identity, starting from the leading term."""
    spec = spec or RemainderSpec()
    started = time.perf_counter()
    transport = CharacteristicTransport(u0, phi0, V, t, spec, phase, opts)
    slices = transport.leading
    rows = []
    for k in range(1, spec.max_iterations + 1):
        updated = transport.apply(slices)
        increment = relative_l2(updated[-1], slices[-1])
        slices = updated
        rows.append(
            {
                "k": k,
                "increment_l2": increment,
                "wall_seconds": time.perf_counter() - started,
            }
        )
        logger.debug("picard transport iteration", k=k, increment=increment)
        if k > 1 and increment >= rows[-2]["increment_l2"]:
            logger.warning("picard increments not decreasing", k=k, increment=increment)
        if increment < spec.tolerance:
            logger.info("picard converged", iterations=k, increment=increment, t=t)
            report = pd.DataFrame(rows, columns=ITERATION_REPORT_COLUMNS)
            return PicardResult(slices[-1], slices, report, transport)

    increments = [row["increment_l2"] for row in rows]
    raise ConvergenceError(
        f"picard transport did not converge in {spec.max_iterations} iterations",
        increments,
    )


def fixed_point_residual(result: PicardResult) -> float:
    """Relative L2 change of the final slice after one more application."""
    updated = result.transport.apply(result.slices)
    return relative_l2(updated[-1], result.slices[-1])


def write_iteration_report(report: pd.DataFrame, path: Path) -> Path:
    report.to_csv(path, index=False, float_format="%.17g")
    return Path(path)


class CoordinateChangeReport(BaseModel):
    p: float
    transported_sum: float
    original_sum: float
    relative_difference: float
    max_det_deviation: float
    outside: int


def change_of_variables_check(
    V: PotentialModel,
    t: float,
    u0: ComplexField,
    phi0: Window,
    p: float = 2.0,
    opts: Optional[FlowOptions] = None,
) -> CoordinateChangeReport:
    """Compare sum |W_0(f(0), g(0))|^p with sum |W_0|^p over the grid."""
    W0 = wpt(u0, phi0)
    original = float((np.abs(W0.values) ** p).sum())
    if t == 0:
        return CoordinateChangeReport(
            p=p,
            transported_sum=original,
            original_sum=original,
            relative_difference=0.0,
            max_det_deviation=0.0,
            outside=0,
        )
    bundle = _backward_bundle(V, u0.grid, t, [0.0], opts or FlowOptions(), tangent=True)
    values, outside = PhaseSpaceInterpolator(W0)(bundle.f[0], bundle.g[0])
    transported = float((np.abs(values) ** p).sum())
    return CoordinateChangeReport(
        p=p,
        transported_sum=transported,
        original_sum=original,
        relative_difference=abs(transported - original) / original if original else 0.0,
        max_det_deviation=float(np.abs(np.linalg.det(bundle.M[0]) - 1.0).max()),
        outside=outside,
    )
