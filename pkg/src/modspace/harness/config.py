"""Flat ``namespace.key = value`` experiment configs.

One file describes one experiment. Lines starting with ``#`` are comments.
Lists are comma separated; numbers accept ``inf`` and multiples of ``pi``
(``pi/4``, ``2pi``, ``-pi/2``). Unknown namespaces or keys are errors.
"""

from __future__ import annotations

import itertools
import math
import re
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from modspace.classical import FlowOptions
from modspace.errors import ConfigError
from modspace.grid import Grid, MixedNormSpec, make_grid
from modspace.modulation import WindowEvolution
from modspace.potentials import PotentialModel, build_potential
from modspace.transport import RemainderSpec

_PI = re.compile(r"^([+-]?\d*\.?\d*)\s*\*?\s*pi(?:\s*/\s*(\d+\.?\d*))?$")


def parse_number(token) -> float:
    if not isinstance(token, str):
        return float(token)
    text = token.strip().lower()
    if text in ("inf", "+inf", "infinity", "∞"):
        return math.inf
    match = _PI.match(text)
    if match:
        coefficient, divisor = match.groups()
        if coefficient in ("", "+"):
            scale = 1.0
        elif coefficient == "-":
            scale = -1.0
        else:
            scale = float(coefficient)
        return scale * math.pi / (float(divisor) if divisor else 1.0)
    return float(text)


def _split(value) -> list:
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def _numbers(value) -> list[float]:
    return [parse_number(v) for v in _split(value)]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class ExperimentSection(_Section):
    name: str
    kind: str
    reference: str = ""


class GridSection(_Section):
    n: int = 1
    N: list[int] = [256]
    L: Optional[list[float]] = None
    # choose L so that dx == dxi on every axis
    square: bool = False

    @field_validator("N", mode="before")
    @classmethod
    def _counts(cls, value):
        return [int(parse_number(v)) for v in _split(value)]

    @field_validator("L", mode="before")
    @classmethod
    def _half_widths(cls, value):
        return None if value is None else _numbers(value)

    def build(self) -> Grid:
        counts = self.N * self.n if len(self.N) == 1 else self.N
        if self.square:
            half_widths = [math.sqrt(N * math.pi / 2) for N in counts]
        elif self.L is None:
            half_widths = [32.0] * self.n
        else:
            half_widths = self.L * self.n if len(self.L) == 1 else self.L
        return make_grid(self.n, counts, half_widths)


class PotentialSection(_Section):
    kind: str = "free"
    A: float = 1.0
    v: Optional[list[float]] = None
    sign: float = 1.0
    H: Optional[list[float]] = None
    b: Optional[list[float]] = None

    @field_validator("v", "H", "b", mode="before")
    @classmethod
    def _vectors(cls, value):
        return None if value is None else _numbers(value)

    @field_validator("A", "sign", mode="before")
    @classmethod
    def _scalar(cls, value):
        return parse_number(value)

    def build(self, dim: int, kind: Optional[str] = None) -> PotentialModel:
        kind = kind or self.kind
        if kind in ("cosine", "time_cosine"):
            return build_potential(kind, dim, amplitude=self.A, wave=self.v)
        if kind == "harmonic":
            return build_potential(kind, dim, sign=self.sign)
        if kind == "quadratic":
            if self.H is None or len(self.H) != dim * dim:
                raise ConfigError(f"potential.H needs {dim * dim} entries")
            H = [self.H[i * dim : (i + 1) * dim] for i in range(dim)]
            return build_potential(kind, dim, hessian=H, linear=self.b)
        return build_potential(kind, dim)


class InitialSection(_Section):
    kind: Literal["gaussian", "hermite", "file"] = "gaussian"
    center: list[float] = [0.0]
    momentum: list[float] = [0.0]
    width: float = 1.0
    k: int = 0
    path: Optional[Path] = None
    # start from the free evolution at -focus, so the data refocuses at t = focus
    focus: float = 0.0

    @field_validator("center", "momentum", mode="before")
    @classmethod
    def _vectors(cls, value):
        return _numbers(value)

    @field_validator("width", "focus", mode="before")
    @classmethod
    def _scalar(cls, value):
        return parse_number(value)


class WindowSection(_Section):
    kind: Literal["gaussian", "hermite"] = "gaussian"
    width: float = 1.0
    k: int = 0
    mode: WindowEvolution = WindowEvolution.STATIC
    # second window for equivalence checks
    other_width: float = 2.0


def _pair(text: str) -> MixedNormSpec:
    try:
        return MixedNormSpec.parse(text)
    except (ValueError, ValidationError) as e:
        raise ConfigError(f"bad exponent pair '{text}': {e}") from e


class NormSection(_Section):
    p: list[float] = [2.0]
    q: list[float] = [2.0]
    # explicit "p,q; p,q" list, overrides p and q
    pairs: Optional[str] = None
    # only p == q combinations of p
    diagonal: bool = False
    # exponent pair of the reference norm ||u_0||; defaults to each pair itself
    reference: Optional[str] = None

    @field_validator("p", "q", mode="before")
    @classmethod
    def _exponents(cls, value):
        return _numbers(value)

    def specs(self) -> list[MixedNormSpec]:
        if self.pairs:
            return [_pair(item) for item in self.pairs.split(";") if item.strip()]
        if self.diagonal:
            return [MixedNormSpec(p=p, q=p) for p in self.p]
        return [MixedNormSpec(p=p, q=q) for p, q in itertools.product(self.p, self.q)]

    def reference_spec(self) -> Optional[MixedNormSpec]:
        return _pair(self.reference) if self.reference else None


class TimeSection(_Section):
    values: list[float] = Field(default=[0.0], alias="list")
    # "start, stop, count" evenly spaced; overrides list
    range: Optional[list[float]] = None

    @field_validator("values", "range", mode="before")
    @classmethod
    def _times(cls, value):
        return None if value is None else _numbers(value)

    def times(self) -> list[float]:
        if self.range is not None:
            if len(self.range) != 3:
                raise ConfigError("time.range needs start, stop, count")
            start, stop, count = self.range
            return [start + (stop - start) * i / (int(count) - 1) for i in range(int(count))]
        return list(self.values)


class SolverSection(_Section):
    dt: float = Field(default=1e-3, gt=0)
    integrator: Literal["verlet", "rk4"] = "verlet"
    step: float = Field(default=1e-3, gt=0)

    def flow_options(self) -> FlowOptions:
        return FlowOptions(integrator=self.integrator, step=self.step)


class PicardSection(_Section):
    K: int = Field(default=8, ge=1)
    tol: float = Field(default=1e-6, gt=0)
    dtau: float = Field(default=0.05, gt=0)
    theta: int = Field(default=8, ge=1)

    def remainder_spec(self) -> RemainderSpec:
        return RemainderSpec(
            theta_nodes=self.theta,
            tau_step=self.dtau,
            max_iterations=self.K,
            tolerance=self.tol,
        )


class CheckSection(_Section):
    tolerance: float = 1e-6
    secondary_tolerance: Optional[float] = None
    lower: Optional[float] = None
    upper: Optional[float] = None
    samples: int = 100
    seed: int = 0
    h: list[float] = [1e-4]
    s: list[float] = []
    potentials: list[str] = []

    @field_validator("h", "s", mode="before")
    @classmethod
    def _number_lists(cls, value):
        return _numbers(value)

    @field_validator("potentials", mode="before")
    @classmethod
    def _names(cls, value):
        return _split(value)

    @field_validator("tolerance", "secondary_tolerance", "lower", "upper", mode="before")
    @classmethod
    def _scalar(cls, value):
        return None if value is None else parse_number(value)


class OutputSection(_Section):
    dir: Optional[Path] = None


class GoldenSection(_Section):
    path: Optional[Path] = None
    key: str = ""


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    source: Optional[Path] = None
    experiment: ExperimentSection
    grid: GridSection = GridSection()
    potential: PotentialSection = PotentialSection()
    initial: InitialSection = InitialSection()
    window: WindowSection = WindowSection()
    norm: NormSection = NormSection()
    time: TimeSection = TimeSection()
    solver: SolverSection = SolverSection()
    picard: PicardSection = PicardSection()
    check: CheckSection = CheckSection()
    output: OutputSection = OutputSection()
    golden: GoldenSection = GoldenSection()

    @property
    def name(self) -> str:
        return self.experiment.name

    def resolve(self, path: Optional[Path]) -> Optional[Path]:
        """Paths in a config are relative to the config file."""
        if path is None or path.is_absolute() or self.source is None:
            return path
        return self.source.parent / path


NAMESPACES = frozenset(
    name for name in ExperimentConfig.model_fields if name != "source"
)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, dict[str, str]]:
    sections: dict[str, dict[str, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        namespace, dot, field = key.partition(".")
        if not dot or not field:
            raise ConfigError(f"{source}:{lineno}: key '{key}' is not namespaced")
        if namespace not in NAMESPACES:
            raise ConfigError(f"{source}:{lineno}: unknown namespace '{namespace}'")
        section = sections.setdefault(namespace, {})
        if field in section:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        section[field] = value
    return sections


def build_config(sections: dict, source: Optional[Path] = None) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate({**sections, "source": source})
    except ValidationError as e:
        raise ConfigError(f"{source or '<config>'}: {e}") from e


def load_config(path: Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    return build_config(parse_config_text(text, str(path)), path)
