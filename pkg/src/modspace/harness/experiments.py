"""Named experiments. Each runner takes a config and returns an Outcome."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, model_validator

from modspace.classical import (
    FlowOptions,
    FlowState,
    energy,
    flow,
    jacobian_fd_check,
    momentum_identity_residual,
    picard_flow,
    random_bound_samples,
    trajectory_bound_check,
    variational_flow,
)
from modspace.errors import ConfigError, FieldError
from modspace.fields import ComplexField, PhaseSpaceField, l2_norm
from modspace.grid import Grid, MixedNormSpec, mixed_norm
from modspace.harness.config import ExperimentConfig
from modspace.harness.initial import build_initial, build_window, signal_set
from modspace.logging import get_logger
from modspace.modulation import (
    WindowEvolution,
    embedding_ratios,
    evolved_window,
    evolved_windows,
    mod_norm,
    window_equivalence,
)
from modspace.potentials import PotentialModel
from modspace.schrod import propagate, propagate_dt, propagate_to
from modspace.transport import (
    change_of_variables_check,
    leading_transport,
    picard_propagate,
    relative_l2,
    write_iteration_report,
)
from modspace.wpt import Window, invert, wpt

logger = get_logger(__name__)

NORM_SERIES_COLUMNS = ["t", "norm", "reference", "ratio"]


class Outcome(BaseModel):
    passed: bool
    detail: str
    metrics: dict[str, float] = {}


class NormSeries(BaseModel):
    spec: MixedNormSpec
    times: list[float]
    norms: list[float]
    reference: float

    @model_validator(mode="after")
    def _consistent(self) -> "NormSeries":
        if len(self.times) != len(self.norms):
            raise ValueError("times and norms differ in length")
        if not self.reference > 0:
            raise ValueError("reference norm must be positive")
        return self

    @property
    def ratios(self) -> list[float]:
        return [n / self.reference for n in self.norms]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": self.times,
                "norm": self.norms,
                "reference": self.reference,
                "ratio": self.ratios,
            },
            columns=NORM_SERIES_COLUMNS,
        )


def _slug(spec: MixedNormSpec) -> str:
    def fmt(e: float) -> str:
        return "inf" if math.isinf(e) else f"{e:g}"

    return f"p{fmt(spec.p)}_q{fmt(spec.q)}"


def write_norm_series(series: NormSeries, path: Path) -> Path:
    series.to_frame().to_csv(path, index=False, float_format="%.17g")
    return Path(path)


def _setup(config: ExperimentConfig) -> tuple[Grid, PotentialModel, ComplexField, Window]:
    grid = config.grid.build()
    V = config.potential.build(grid.dim)
    base = config.source.parent if config.source else None
    u0 = build_initial(config.initial, grid, base)
    phi0 = build_window(config.window, grid)
    return grid, V, u0, phi0


def _output_dir(config: ExperimentConfig, out_dir: Optional[Path]) -> Optional[Path]:
    target = config.resolve(config.output.dir) or out_dir
    if target is None:
        return None
    target = Path(target) / config.name
    target.mkdir(parents=True, exist_ok=True)
    return target


def run_norm_series(
    config: ExperimentConfig, out_dir: Optional[Path] = None
) -> list[NormSeries]:
    """||u(t)||_{M^{p,q}_{phi(t)}} at every configured time, one series per (p, q)."""
    _, V, u0, phi0 = _setup(config)
    times = config.time.times()
    specs = config.norm.specs()
    reference_spec = config.norm.reference_spec()

    W0 = wpt(u0, phi0)
    references = [mixed_norm(W0, reference_spec or spec) for spec in specs]
    states = propagate_to(u0, V, times, config.solver.dt)
    windows = evolved_windows(phi0, times, config.window.mode, V, config.solver.dt)
    norms: list[list[float]] = [[] for _ in specs]
    for t, u, phi in zip(times, states, windows):
        W = wpt(u, phi)
        for i, spec in enumerate(specs):
            norms[i].append(mixed_norm(W, spec))
        logger.debug("norm series step", experiment=config.name, t=t)

    series = [
        NormSeries(spec=spec, times=times, norms=n, reference=ref)
        for spec, n, ref in zip(specs, norms, references)
    ]
    target = _output_dir(config, out_dir)
    if target is not None:
        for s in series:
            write_norm_series(s, target / f"{config.name}_{_slug(s.spec)}.csv")
    return series


def growth_exponent(series: NormSeries) -> float:
    """Least-squares slope of log(ratio) against log(1 + |t|)."""
    if len(series.times) < 5:
        raise ConfigError(f"growth exponent needs >= 5 times, got {len(series.times)}")
    if max(abs(t) for t in series.times) < 4:
        raise ConfigError("growth exponent needs times reaching |t| >= 4")
    x = np.log1p(np.abs(series.times))
    y = np.log(series.ratios)
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


class RotationRow(BaseModel):
    label: str
    transported: float
    swapped: float
    unswapped: float
    relative_difference: float
    swap_factor: float


class RotationReport(BaseModel):
    t: float
    rows: list[RotationRow]

    def row(self, label: str) -> RotationRow:
        return next(r for r in self.rows if r.label == label)


ROTATION_PAIRS = [
    MixedNormSpec(p=1, q=math.inf),
    MixedNormSpec(p=math.inf, q=1),
    MixedNormSpec(p=2, q=2),
]


def rotation_check(config: ExperimentConfig) -> RotationReport:
    """Quarter-period harmonic evolution against the argument-swapped transform."""
    grid, V, u0, phi0 = _setup(config)
    if grid.dim != 1:
        raise ConfigError("rotation check runs in one dimension")
    if not grid.is_square_phase_space:
        raise ConfigError("rotation check needs dx == dxi (set grid.square = true)")
    t = math.pi / 2
    u = propagate_dt(u0, V, t, config.solver.dt)
    phi = evolved_window(phi0, t, WindowEvolution.SAME_EQUATION, V, config.solver.dt)
    transported = wpt(u, phi)
    W0 = wpt(u0, phi0)
    swapped = PhaseSpaceField(grid, W0.values.T)

    specs = config.norm.specs() if config.norm.pairs else ROTATION_PAIRS
    rows = []
    for spec in specs:
        lhs = mixed_norm(transported, spec)
        rhs = mixed_norm(swapped, spec)
        plain = mixed_norm(W0, spec)
        rows.append(
            RotationRow(
                label=spec.label,
                transported=lhs,
                swapped=rhs,
                unswapped=plain,
                relative_difference=abs(lhs - rhs) / rhs,
                swap_factor=rhs / plain,
            )
        )
    return RotationReport(t=t, rows=rows)


Runner = Callable[[ExperimentConfig, Optional[Path]], Outcome]
RUNNERS: dict[str, Runner] = {}


def runner(kind: str) -> Callable[[Runner], Runner]:
    def register(fn: Runner) -> Runner:
        RUNNERS[kind] = fn
        return fn

    return register


def run_experiment(config: ExperimentConfig, out_dir: Optional[Path] = None) -> Outcome:
    try:
        fn = RUNNERS[config.experiment.kind]
    except KeyError:
        raise ConfigError(
            f"unknown experiment kind '{config.experiment.kind}', "
            f"expected one of {sorted(RUNNERS)}"
        )
    logger.info("experiment started", experiment=config.name, kind=config.experiment.kind)
    outcome = fn(config, out_dir)
    logger.info("experiment finished", experiment=config.name, passed=outcome.passed)
    return outcome


def _worst(values) -> float:
    values = list(values)
    return max(values) if values else 0.0


@runner("norm_conservation")
def _norm_conservation(config, out_dir):
    series = run_norm_series(config, out_dir)
    deviations = {
        s.spec.label: _worst(abs(r - 1.0) for r in s.ratios) for s in series
    }
    worst = _worst(deviations.values())
    return Outcome(
        passed=worst <= config.check.tolerance,
        detail=f"max |ratio - 1| = {worst:.3e} over {len(series)} exponent pairs",
        metrics={"max_deviation": worst, **deviations},
    )


@runner("boundedness")
def _boundedness(config, out_dir):
    series = run_norm_series(config, out_dir)
    metrics = {}
    passed = True
    for s in series:
        t = np.asarray(s.times)
        y = np.log(s.ratios)
        slope, intercept = np.polyfit(t, y, 1)
        envelope = float((y - slope * t).max())
        residual = float(np.sqrt(np.mean((y - (slope * t + intercept)) ** 2)))
        c_t = float(max(s.ratios))
        metrics[f"{s.spec.label} C_T"] = c_t
        metrics[f"{s.spec.label} slope"] = float(slope)
        metrics[f"{s.spec.label} envelope"] = envelope
        metrics[f"{s.spec.label} residual"] = residual
        if not math.isfinite(c_t) or (config.check.upper and c_t > config.check.upper):
            passed = False
    worst = _worst(v for k, v in metrics.items() if k.endswith("C_T"))
    return Outcome(passed=passed, detail=f"max ratio C_T = {worst:.4g}", metrics=metrics)


@runner("growth_exponent")
def _growth_exponent(config, out_dir):
    series = run_norm_series(config, out_dir)
    exponents = {s.spec.label: growth_exponent(s) for s in series}
    lower = config.check.lower if config.check.lower is not None else -math.inf
    upper = config.check.upper if config.check.upper is not None else math.inf
    passed = all(lower <= e <= upper for e in exponents.values())
    text = ", ".join(f"{k}: {v:.3f}" for k, v in exponents.items())
    return Outcome(
        passed=passed,
        detail=f"fitted exponents {text} (bounds [{lower:g}, {upper:g}])",
        metrics=exponents,
    )


@runner("rotation")
def _rotation(config, out_dir):
    report = rotation_check(config)
    worst = _worst(r.relative_difference for r in report.rows)
    control = report.rows[0].swap_factor
    lower = config.check.lower or 1.5
    target = _output_dir(config, out_dir)
    if target is not None:
        pd.DataFrame([r.model_dump() for r in report.rows]).to_csv(
            target / f"{config.name}.csv", index=False, float_format="%.17g"
        )
    return Outcome(
        passed=worst <= config.check.tolerance and control >= lower,
        detail=(
            f"max relative difference {worst:.3e}; "
            f"{report.rows[0].label} swap factor {control:.3f}"
        ),
        metrics={"max_relative_difference": worst, "swap_factor": control},
    )


def _potentials(config: ExperimentConfig, dim: int) -> list[PotentialModel]:
    kinds = config.check.potentials or [config.potential.kind]
    return [config.potential.build(dim, kind) for kind in kinds]


@runner("liouville")
def _liouville(config, out_dir):
    dim = config.grid.n
    rng = np.random.default_rng(config.check.seed)
    x = rng.uniform(-3, 3, size=(config.check.samples, dim))
    xi = rng.uniform(-3, 3, size=(config.check.samples, dim))
    s_values = config.check.s or [-4.0, -1.0, 1.0, 4.0]
    rk4_tolerance = config.check.tolerance
    verlet_tolerance = config.check.secondary_tolerance or 1e-9

    metrics = {}
    passed = True
    for V in _potentials(config, dim):
        for integrator, tolerance in (("rk4", rk4_tolerance), ("verlet", verlet_tolerance)):
            opts = FlowOptions(integrator=integrator, step=config.solver.step)
            worst = 0.0
            for s in s_values:
                _, var = variational_flow(V, 0.0, x, xi, s, opts)
                worst = max(worst, float(np.abs(var.det - 1.0).max()))
            metrics[f"{V.name} {integrator}"] = worst
            passed &= worst <= tolerance
    return Outcome(
        passed=passed,
        detail=f"max |det M - 1| = {_worst(metrics.values()):.3e}",
        metrics=metrics,
    )


@runner("flow_jacobian")
def _flow_jacobian(config, out_dir):
    V = config.potential.build(config.grid.n)
    x, xi = config.initial.center, config.initial.momentum
    s = config.time.times()[-1]
    opts = config.solver.flow_options()
    h_bound = config.check.h[0]
    h_ratio = config.check.h[1] if len(config.check.h) > 1 else 2e-3
    bound = jacobian_fd_check(V, 0.0, x, xi, s, h_bound, opts)
    coarse = jacobian_fd_check(V, 0.0, x, xi, s, h_ratio, opts)
    fine = jacobian_fd_check(V, 0.0, x, xi, s, h_ratio / 2, opts)
    ratio = coarse / fine
    lower = config.check.lower or 3.5
    upper = config.check.upper or 4.5
    return Outcome(
        passed=bound <= config.check.tolerance and lower <= ratio <= upper,
        detail=f"error {bound:.3e} at h={h_bound:g}; halving ratio {ratio:.3f}",
        metrics={"error": bound, "ratio": ratio},
    )


@runner("trajectory_bounds")
def _trajectory_bounds(config, out_dir):
    V = config.potential.build(config.grid.n)
    rng = np.random.default_rng(config.check.seed)
    opts = config.solver.flow_options()
    violations = 0
    worst_position = worst_momentum = 0.0
    for s in config.check.s or [-4.0, -2.0, -1.0, 1.0, 2.0, 4.0]:
        samples = random_bound_samples(rng, config.check.samples, V.dim)
        report = trajectory_bound_check(V, 0.0, s, samples, opts)
        violations += report.violations
        worst_position = max(worst_position, report.worst_position_ratio)
        worst_momentum = max(worst_momentum, report.worst_momentum_ratio)
    return Outcome(
        passed=violations == 0,
        detail=(
            f"{violations} violations; worst ratios {worst_position:.3f} (position), "
            f"{worst_momentum:.3f} (momentum)"
        ),
        metrics={
            "violations": violations,
            "worst_position_ratio": worst_position,
            "worst_momentum_ratio": worst_momentum,
        },
    )


@runner("leading_transport")
def _leading_transport(config, out_dir):
    _, V, u0, phi0 = _setup(config)
    opts = config.solver.flow_options()
    errors = {}
    for t in config.time.times():
        leading = leading_transport(u0, phi0, V, t, opts)
        phi = evolved_window(phi0, t, WindowEvolution.FREE)
        reference = wpt(propagate_dt(u0, V, t, config.solver.dt), phi)
        errors[f"t={t:g}"] = relative_l2(reference, leading)
    worst = _worst(errors.values())
    return Outcome(
        passed=worst <= config.check.tolerance,
        detail=f"max relative L2 error {worst:.3e}",
        metrics=errors,
    )


@runner("picard")
def _picard(config, out_dir):
    grid, _, u0, phi0 = _setup(config)
    spec = config.picard.remainder_spec()
    opts = config.solver.flow_options()
    target = _output_dir(config, out_dir)
    metrics = {}
    passed = True
    contraction = 0.0
    for t in config.time.times():
        phi = evolved_window(phi0, t, WindowEvolution.FREE)
        for V in _potentials(config, grid.dim):
            result = picard_propagate(u0, phi0, V, t, spec, opts=opts)
            reference = wpt(propagate_dt(u0, V, t, config.solver.dt), phi)
            error = relative_l2(reference, result.field)
            metrics[f"{V.name} t={t:g} error"] = error
            metrics[f"{V.name} t={t:g} iterations"] = len(result.increments)
            metrics[f"{V.name} t={t:g} c"] = result.contraction
            contraction = max(contraction, result.contraction)
            passed &= error <= config.check.tolerance and result.monotone
            if target is not None:
                write_iteration_report(
                    result.report, target / f"{config.name}_{V.name}_t{t:g}.csv"
                )
    # one constant has to bound ratio / t at every time
    metrics["c"] = contraction
    if config.check.upper is not None:
        passed &= contraction <= config.check.upper
    worst = _worst(v for k, v in metrics.items() if k.endswith("error"))
    return Outcome(
        passed=passed,
        detail=f"max relative L2 error {worst:.3e}, contraction c = {contraction:.3f}",
        metrics=metrics,
    )


@runner("identities")
def _identities(config, out_dir):
    grid, V, u0, phi0 = _setup(config)
    F = wpt(u0, phi0)
    roundtrip = float(np.abs(invert(F, phi0, phi0).values - u0.values).max())
    expected = (2 * math.pi) ** grid.dim * l2_norm(u0) ** 2 * phi0.l2_norm_sq
    plancherel = abs(mixed_norm(F, MixedNormSpec(p=2, q=2)) ** 2 - expected) / expected

    t = 1.0
    evolved = propagate(u0, V, t, 100)
    drift = abs(l2_norm(evolved) - l2_norm(u0)) / l2_norm(u0) / t

    reference = propagate(u0, V, t, 1600)
    coarse = l2_norm(propagate(u0, V, t, 50) - reference)
    fine = l2_norm(propagate(u0, V, t, 100) - reference)
    ratio = coarse / fine

    tolerance = config.check.tolerance
    drift_tolerance = config.check.secondary_tolerance or 1e-12
    lower = config.check.lower or 3.5
    upper = config.check.upper or 4.5
    return Outcome(
        passed=(
            roundtrip <= tolerance
            and plancherel <= tolerance
            and drift <= drift_tolerance
            and lower <= ratio <= upper
        ),
        detail=(
            f"roundtrip {roundtrip:.2e}, plancherel {plancherel:.2e}, "
            f"L2 drift {drift:.2e}/unit time, Strang ratio {ratio:.3f}"
        ),
        metrics={
            "roundtrip": roundtrip,
            "plancherel": plancherel,
            "l2_drift": drift,
            "strang_ratio": ratio,
        },
    )


@runner("window_equivalence")
def _window_equivalence(config, out_dir):
    grid = config.grid.build()
    phi = build_window(config.window, grid)
    psi = build_window(config.window, grid, width=config.window.other_width)
    signals = signal_set(grid)
    metrics = {}
    for spec in config.norm.specs():
        report = window_equivalence(signals, phi, psi, spec)
        metrics[spec.label] = report.constant
    worst = _worst(metrics.values())
    bound = config.check.upper or 8.0
    return Outcome(
        passed=worst <= bound,
        detail=f"largest equivalence constant {worst:.3f} (frozen bound {bound:g})",
        metrics=metrics,
    )


@runner("embedding")
def _embedding(config, out_dir):
    grid = config.grid.build()
    phi = build_window(config.window, grid)
    specs = config.norm.specs()
    if len(specs) < 2:
        raise ConfigError("embedding needs norm.pairs with a base pair and larger pairs")
    signals = signal_set(grid)
    metrics = {}
    for larger in specs[1:]:
        report = embedding_ratios(signals, phi, specs[0], larger)
        metrics[f"{larger.label}/{specs[0].label}"] = report.high
    worst = _worst(metrics.values())
    bound = config.check.upper if config.check.upper is not None else math.inf
    return Outcome(
        passed=math.isfinite(worst) and worst <= bound,
        detail=f"largest embedding ratio {worst:.3f}",
        metrics=metrics,
    )


def read_golden(path: Path, key: str) -> float:
    try:
        df = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise FieldError(f"cannot read golden file {path}: {e}") from e
    if list(df.columns) != ["quantity", "value"]:
        raise FieldError(f"{path}: header {list(df.columns)} != ['quantity', 'value']")
    match = df.loc[df["quantity"] == key, "value"]
    if len(match) != 1:
        raise FieldError(f"{path}: no unique golden value for '{key}'")
    value = pd.to_numeric(match, errors="coerce").iloc[0]
    if not np.isfinite(value):
        raise FieldError(f"{path}: golden value for '{key}' is not a number")
    return float(value)


@runner("golden")
def _golden(config, out_dir):
    _, _, u0, phi0 = _setup(config)
    path = config.resolve(config.golden.path)
    if path is None:
        raise ConfigError("golden.path is required")
    expected = read_golden(path, config.golden.key or config.name)
    spec = config.norm.specs()[0]
    value = mod_norm(u0, phi0, spec)
    error = abs(value - expected) / abs(expected)
    return Outcome(
        passed=error <= config.check.tolerance,
        detail=f"{spec.label} = {value:.15g}, golden {expected:.15g}, rel. error {error:.2e}",
        metrics={"value": value, "golden": expected, "relative_error": error},
    )


@runner("change_of_variables")
def _change_of_variables(config, out_dir):
    _, V, u0, phi0 = _setup(config)
    opts = config.solver.flow_options()
    metrics = {}
    for t in config.time.times():
        for spec in config.norm.specs():
            report = change_of_variables_check(V, t, u0, phi0, spec.p, opts)
            metrics[f"t={t:g} p={spec.p:g}"] = report.relative_difference
            metrics[f"t={t:g} det"] = report.max_det_deviation
    worst = _worst(v for k, v in metrics.items() if not k.endswith("det"))
    return Outcome(
        passed=worst <= config.check.tolerance,
        detail=f"max relative difference of transported sums {worst:.3e}",
        metrics=metrics,
    )


@runner("flow_identities")
def _flow_identities(config, out_dir):
    V = config.potential.build(config.grid.n)
    x = np.asarray(config.initial.center, dtype=float)
    xi = np.asarray(config.initial.momentum, dtype=float)
    opts = config.solver.flow_options()
    metrics = {}
    for s in config.check.s or [-2.0, 2.0]:
        forward = flow(V, 0.0, x, xi, s, opts)
        back = flow(V, s, forward.f, forward.g, 0.0, opts)
        metrics[f"reversal s={s:g}"] = float(
            max(np.abs(back.f - x).max(), np.abs(back.g - xi).max())
        )
        metrics[f"momentum s={s:g}"] = momentum_identity_residual(V, 0.0, x, xi, s, opts)
        if not V.time_dependent:
            start = energy(V, 0.0, FlowState(x, xi))
            metrics[f"energy drift s={s:g}"] = float(abs(energy(V, s, forward) - start))

    picard = picard_flow(V, 0.0, x, xi, 0.5, iterations=20, tolerance=1e-12)
    exact = flow(V, 0.0, x, xi, 0.5, FlowOptions(integrator="rk4"))
    metrics["picard vs flow"] = float(
        max(np.abs(picard.state.f - exact.f).max(), np.abs(picard.state.g - exact.g).max())
    )
    checked = {k: v for k, v in metrics.items() if not k.startswith("energy")}
    worst = _worst(checked.values())
    return Outcome(
        passed=worst <= config.check.tolerance,
        detail=f"worst identity residual {worst:.3e}",
        metrics=metrics,
    )
