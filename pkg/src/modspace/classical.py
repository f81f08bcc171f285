"""Classical characteristics of the Schrödinger symbol and their Jacobians.

    df/ds = g,   dg/ds = -grad V(s, f),   f(t) = x,  g(t) = xi

Every routine is vectorised over leading axes of ``x`` and ``xi`` (shape
(..., n)), so a whole phase-space grid flows in one call. Steps are signed;
s < t integrates backwards through the same code path.

The variational matrix M stacks the derivatives of (f, g) by rows,

    M = [[df/dx, df/dxi],
         [dg/dx, dg/dxi]],

so column k holds the Jacobi field started from the k-th basis vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Literal, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import cumulative_trapezoid, trapezoid

from modspace.errors import ConfigError, FlowDivergenceError, NonContractionError
from modspace.grid import Grid
from modspace.logging import get_logger
from modspace.potentials import PotentialClass, PotentialModel
from modspace.settings import get_settings

logger = get_logger(__name__)

# integrand(s, f, g) -> array over the leading axes
Integrand = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


class FlowOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    integrator: Literal["verlet", "rk4"] = "verlet"
    step: float = Field(default=1e-3, gt=0)
    # fixed step count per segment; overrides ``step`` when set
    steps: Optional[int] = Field(default=None, ge=1)

    def steps_for(self, span: float) -> int:
        if span == 0:
            return 0
        if self.steps is not None:
            return self.steps
        return max(1, math.ceil(abs(span) / self.step - 1e-9))


@dataclass(frozen=True, eq=False)
class FlowState:
    f: np.ndarray
    g: np.ndarray


@dataclass(frozen=True, eq=False)
class VariationalState:
    M: np.ndarray

    @property
    def det(self) -> np.ndarray:
        return np.linalg.det(self.M)


@dataclass(frozen=True, eq=False)
class FlowBundle:
    """Flow states recorded at ``s_nodes``; axis 0 runs over the nodes."""

    t: float
    s_nodes: np.ndarray
    f: np.ndarray
    g: np.ndarray
    M: Optional[np.ndarray] = None
    # int_t^s of the integrand along each trajectory
    action: Optional[np.ndarray] = None

    def state(self, i: int) -> FlowState:
        return FlowState(self.f[i], self.g[i])


def bracket(x: np.ndarray) -> np.ndarray:
    """<x> = (1 + |x|^2)^(1/2) over the last axis."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + (x * x).sum(axis=-1))


def matrix_sup_norm(A: np.ndarray) -> float:
    return float(np.abs(A).max())


def energy(V: PotentialModel, s: float, state: FlowState) -> np.ndarray:
    return 0.5 * (state.g * state.g).sum(axis=-1) + V.value(s, state.f)


def _initial(V: PotentialModel, x, xi) -> tuple[np.ndarray, np.ndarray]:
    f, g = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
    if f.shape[-1] != V.dim:
        raise ConfigError(f"points have dimension {f.shape[-1]}, potential has {V.dim}")
    return f.copy(), g.copy()


def _check_horizon(t: float, s_nodes: Sequence[float]) -> None:
    t_max = get_settings().t_max
    for s in s_nodes:
        if abs(s - t) > t_max:
            raise ConfigError(f"|s - t| = {abs(s - t):g} exceeds T_max = {t_max:g}")


def _verlet(V, tau, h, f, g, M, grad0):
    n = V.dim
    g = g - 0.5 * h * grad0
    if M is not None:
        top, bottom = M[..., :n, :], M[..., n:, :]
        bottom = bottom - 0.5 * h * (V.hess(tau, f) @ top)
    f = f + h * g
    grad1 = V.grad(tau + h, f)
    g = g - 0.5 * h * grad1
    if M is not None:
        top = top + h * bottom
        bottom = bottom - 0.5 * h * (V.hess(tau + h, f) @ top)
        M = np.concatenate([top, bottom], axis=-2)
    return f, g, M, grad1


def _rhs(V, tau, f, g, M):
    n = V.dim
    dM = None
    if M is not None:
        dM = np.concatenate([M[..., n:, :], -(V.hess(tau, f) @ M[..., :n, :])], axis=-2)
    return g, -V.grad(tau, f), dM


def _rk4(V, tau, h, f, g, M):
    def add(a, b, c):
        return None if a is None else a + c * b

    k1 = _rhs(V, tau, f, g, M)
    k2 = _rhs(V, tau + h / 2, *(add(a, k, h / 2) for a, k in zip((f, g, M), k1)))
    k3 = _rhs(V, tau + h / 2, *(add(a, k, h / 2) for a, k in zip((f, g, M), k2)))
    k4 = _rhs(V, tau + h, *(add(a, k, h) for a, k in zip((f, g, M), k3)))
    out = []
    for a, d1, d2, d3, d4 in zip((f, g, M), k1, k2, k3, k4):
        out.append(None if a is None else a + (h / 6) * (d1 + 2 * d2 + 2 * d3 + d4))
    return tuple(out)


def flow_bundle(
    V: PotentialModel,
    t: float,
    x: np.ndarray,
    xi: np.ndarray,
    s_nodes: Sequence[float],
    opts: Optional[FlowOptions] = None,
    tangent: bool = False,
    integrand: Optional[Integrand] = None,
) -> FlowBundle:
    """Integrate from t through ``s_nodes`` in order, recording each node.

    Consecutive nodes may move in either direction; each segment is split into
    equal signed steps of at most ``opts.step``.
    """
    opts = opts or FlowOptions()
    s_nodes = [float(s) for s in s_nodes]
    _check_horizon(t, s_nodes)
    f, g = _initial(V, x, xi)
    n = V.dim
    M = None
    if tangent:
        M = np.broadcast_to(np.eye(2 * n), f.shape[:-1] + (2 * n, 2 * n)).copy()
    action = np.zeros(f.shape[:-1]) if integrand is not None else None

    record_f, record_g, record_M, record_action = [], [], [], []
    tau = float(t)
    last = integrand(tau, f, g) if integrand is not None else None
    grad = V.grad(tau, f) if opts.integrator == "verlet" else None
    for target in s_nodes:
        steps = opts.steps_for(target - tau)
        start = tau
        for k in range(steps):
            h = (target - start) / steps
            tau = start + k * h
            nxt = target if k == steps - 1 else start + (k + 1) * h
            h = nxt - tau
            if opts.integrator == "verlet":
                f, g, M, grad = _verlet(V, tau, h, f, g, M, grad)
            else:
                f, g, M = _rk4(V, tau, h, f, g, M)
            if not (np.isfinite(f).all() and np.isfinite(g).all()):
                raise FlowDivergenceError("classical flow diverged", time=nxt)
            if integrand is not None:
                current = integrand(nxt, f, g)
                action = action + 0.5 * h * (last + current)
                last = current
        tau = target
        record_f.append(f)
        record_g.append(g)
        if M is not None:
            record_M.append(M)
        if action is not None:
            record_action.append(action)

    logger.debug(
        "flow bundle",
        t=t,
        nodes=len(s_nodes),
        points=int(np.prod(f.shape[:-1])),
        integrator=opts.integrator,
    )
    return FlowBundle(
        t=float(t),
        s_nodes=np.asarray(s_nodes),
        f=np.stack(record_f),
        g=np.stack(record_g),
        M=np.stack(record_M) if tangent else None,
        action=np.stack(record_action) if integrand is not None else None,
    )


def phase_space_points(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """(x, xi) for every phase-space node, each of shape (size, size, n)."""
    x = np.broadcast_to(grid.points[:, None, :], (grid.size, grid.size, grid.dim))
    xi = np.broadcast_to(grid.dual_points[None, :, :], (grid.size, grid.size, grid.dim))
    return x, xi


def flow(
    V: PotentialModel,
    t: float,
    x: np.ndarray,
    xi: np.ndarray,
    s: float,
    opts: Optional[FlowOptions] = None,
) -> FlowState:
    return flow_bundle(V, t, x, xi, [s], opts).state(0)


def variational_flow(
    V: PotentialModel,
    t: float,
    x: np.ndarray,
    xi: np.ndarray,
    s: float,
    opts: Optional[FlowOptions] = None,
) -> tuple[FlowState, VariationalState]:
    bundle = flow_bundle(V, t, x, xi, [s], opts, tangent=True)
    return bundle.state(0), VariationalState(bundle.M[0])


def trajectory(
    V: PotentialModel,
    t: float,
    x: Sequence[float],
    xi: Sequence[float],
    s: float,
    opts: Optional[FlowOptions] = None,
) -> pd.DataFrame:
    """Every step of a single trajectory as ``s,f_1..f_n,g_1..g_n,detM``."""
    opts = opts or FlowOptions()
    steps = opts.steps_for(s - t)
    nodes = np.linspace(t, s, steps + 1)[1:]
    one_step = opts.model_copy(update={"steps": 1})
    bundle = flow_bundle(V, t, x, xi, nodes, one_step, tangent=True)

    n = V.dim
    f = np.vstack([np.asarray(x, dtype=float), bundle.f])
    g = np.vstack([np.asarray(xi, dtype=float), bundle.g])
    det = np.concatenate([[1.0], np.linalg.det(bundle.M)])
    columns = {"s": np.concatenate([[t], nodes])}
    columns.update({f"f_{i + 1}": f[:, i] for i in range(n)})
    columns.update({f"g_{i + 1}": g[:, i] for i in range(n)})
    columns["detM"] = det
    return pd.DataFrame(columns)


def write_trajectory(df: pd.DataFrame, path: Path) -> Path:
    df.to_csv(path, index=False, float_format="%.17g")
    return Path(path)


def jacobian_fd_check(
    V: PotentialModel,
    t: float,
    x: Sequence[float],
    xi: Sequence[float],
    s: float,
    h: float,
    opts: Optional[FlowOptions] = None,
) -> float:
    """max |FD Jacobian - M| / max |M| with central differences of step h."""
    if not h > 0:
        raise ConfigError(f"finite-difference step must be positive, got {h}")
    n = V.dim
    z = np.concatenate([np.asarray(x, dtype=float), np.asarray(xi, dtype=float)])
    shifts = np.vstack([h * np.eye(2 * n), -h * np.eye(2 * n)])
    points = z + shifts
    state = flow(V, t, points[:, :n], points[:, n:], s, opts)
    out = np.concatenate([state.f, state.g], axis=-1)
    fd = ((out[: 2 * n] - out[2 * n :]) / (2 * h)).T

    _, var = variational_flow(V, t, z[:n], z[n:], s, opts)
    return matrix_sup_norm(fd - var.M) / matrix_sup_norm(var.M)


@dataclass(frozen=True, eq=False)
class PicardFlowResult:
    state: FlowState
    increments: list[float]


def picard_flow(
    V: PotentialModel,
    t: float,
    x: Sequence[float],
    xi: Sequence[float],
    s: float,
    iterations: int = 20,
    step: float = 1e-3,
    horizon: float = 1.0,
    tolerance: float = 0.0,
) -> PicardFlowResult:
    """Successive approximation of the characteristic ODEs on a trapezoid grid."""
    if abs(s - t) > horizon:
        raise ConfigError(
            f"|s - t| = {abs(s - t):g} beyond the contraction horizon {horizon:g}"
        )
    f0, g0 = _initial(V, x, xi)
    count = max(2, math.ceil(abs(s - t) / step - 1e-9) + 1)
    taus = np.linspace(t, s, count)
    f = np.broadcast_to(f0, (count,) + f0.shape).copy()
    g = np.broadcast_to(g0, (count,) + g0.shape).copy()

    increments: list[float] = []
    growth = 0
    for k in range(iterations):
        forces = np.stack([V.grad(tau, f[i]) for i, tau in enumerate(taus)])
        f_new = f0 + cumulative_trapezoid(g, taus, axis=0, initial=0)
        g_new = g0 - cumulative_trapezoid(forces, taus, axis=0, initial=0)
        increment = float(max(np.abs(f_new - f).max(), np.abs(g_new - g).max()))
        f, g = f_new, g_new
        if increments and increment > increments[-1]:
            growth += 1
        else:
            growth = 0
        increments.append(increment)
        logger.debug("picard flow iteration", k=k + 1, increment=increment)
        if growth >= 3:
            raise NonContractionError(
                "picard iteration for the flow is not contracting", increments
            )
        if increment <= tolerance:
            break
    return PicardFlowResult(FlowState(f[-1], g[-1]), increments)


def momentum_identity_residual(
    V: PotentialModel,
    t: float,
    x: Sequence[float],
    xi: Sequence[float],
    s: float,
    opts: Optional[FlowOptions] = None,
) -> float:
    """max |g(s) - xi - int_s^t grad V(sigma, f(sigma)) dsigma| along the path."""
    df = trajectory(V, t, x, xi, s, opts)
    n = V.dim
    sigma = df["s"].to_numpy()
    f = df[[f"f_{i + 1}" for i in range(n)]].to_numpy()
    g = df[[f"g_{i + 1}" for i in range(n)]].to_numpy()
    forces = np.stack([V.grad(sig, f[i]) for i, sig in enumerate(sigma)])
    # int_t^s, so xi + int_s^t = xi - int_t^s
    integral = trapezoid(forces, sigma, axis=0)
    return float(np.abs(g[-1] - (np.asarray(xi, dtype=float) - integral)).max())


class BoundReport(BaseModel):
    constant: float
    c1: float
    c2: float
    samples: int
    worst_position_ratio: float
    worst_momentum_ratio: float
    violations: int
    offending: list[dict[str, float]] = []

    @property
    def passed(self) -> bool:
        return self.violations == 0


@dataclass(frozen=True, eq=False)
class BoundSamples:
    x: np.ndarray
    xi: np.ndarray
    y: np.ndarray
    eta: np.ndarray


def random_bound_samples(
    rng: np.random.Generator, count: int, dim: int, spread: float = 8.0
) -> BoundSamples:
    draw = lambda: rng.uniform(-spread, spread, size=(count, dim))  # noqa: E731
    return BoundSamples(draw(), draw(), draw(), draw())


def trajectory_bound_constants(V: PotentialModel) -> tuple[float, float, float]:
    """(C, C1, C2) with C = sup_j sup |d_j V|."""
    if V.potential_class not in (PotentialClass.SUBQUAD1, PotentialClass.FREE):
        raise ConfigError(
            f"trajectory bounds need a bounded gradient, {V.name} is "
            f"{V.potential_class.value}"
        )
    C = V.c1_bound
    root_n = math.sqrt(V.dim)
    return C, math.sqrt(2) * max(1.0, root_n * C), math.sqrt(2) * max(1.0, 2 * root_n * C)


def trajectory_bound_check(
    V: PotentialModel,
    t: float,
    s: float,
    samples: BoundSamples,
    opts: Optional[FlowOptions] = None,
) -> BoundReport:
    """Slack ratios of the weighted trajectory bounds; every ratio must be <= 1.

        <y - x + (t - s) xi> / (<y - f(s)> C1 (1 + |t - s|^2))
        <eta - xi> / (<eta - g(s)> C2 (1 + |t - s|))
    """
    C, c1, c2 = trajectory_bound_constants(V)
    state = flow(V, t, samples.x, samples.xi, s, opts)
    dt = abs(t - s)
    position = bracket(samples.y - samples.x + (t - s) * samples.xi) / (
        bracket(samples.y - state.f) * c1 * (1 + dt**2)
    )
    momentum = bracket(samples.eta - samples.xi) / (
        bracket(samples.eta - state.g) * c2 * (1 + dt)
    )
    bad = np.flatnonzero((position > 1) | (momentum > 1))
    offending = [
        {
            "x": float(samples.x[i, 0]),
            "xi": float(samples.xi[i, 0]),
            "y": float(samples.y[i, 0]),
            "eta": float(samples.eta[i, 0]),
            "position_ratio": float(position[i]),
            "momentum_ratio": float(momentum[i]),
        }
        for i in bad[:5]
    ]
    if len(bad):
        logger.warning("trajectory bound violated", violations=len(bad), t=t, s=s)
    return BoundReport(
        constant=C,
        c1=c1,
        c2=c2,
        samples=len(position),
        worst_position_ratio=float(position.max()),
        worst_momentum_ratio=float(momentum.max()),
        violations=len(bad),
        offending=offending,
    )
