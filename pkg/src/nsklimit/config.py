"""
Configuration models for nsklimit
"""
import configparser
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ConfigError


class Formulation(str, Enum):
    """Which variables a State carries in its momentum slot"""
    EFFECTIVE_V = "effective"
    ORIGINAL_U = "original"
    EULER = "euler"


class FluxKind(str, Enum):
    """Numerical flux for the hyperbolic part"""
    RUSANOV = "rusanov"
    LAX_FRIEDRICHS = "lax_friedrichs"
    CENTRAL = "central"


class Integrator(str, Enum):
    """Explicit two-stage time integrators"""
    SSP2 = "ssp2"
    MIDPOINT = "midpoint"


def kinetic_pressure_coefficient(gamma: float) -> float:
    """Pressure coefficient a = (γ-1)²/(4γ) that makes the invariants v ± ρ^θ"""
    return (gamma - 1.0) ** 2 / (4.0 * gamma)


class FluidParams(BaseModel):
    """γ-law closure P = aρ^γ and the viscosity-capillarity scale ε"""
    model_config = ConfigDict(frozen=True)

    a: float = Field(gt=0.0, description="Pressure coefficient")
    gamma: float = Field(gt=1.0, description="Adiabatic exponent")
    epsilon: float = Field(default=0.0, ge=0.0, description="Viscosity-capillarity scale")

    @classmethod
    def kinetic(cls, gamma: float, epsilon: float = 0.0) -> "FluidParams":
        """Parameters under the kinetic normalization of a"""
        return cls(a=kinetic_pressure_coefficient(gamma), gamma=gamma, epsilon=epsilon)

    @property
    def theta(self) -> float:
        return 0.5 * (self.gamma - 1.0)

    @property
    def lam(self) -> float:
        """Kernel exponent λ = (3-γ)/(2(γ-1))"""
        return (3.0 - self.gamma) / (2.0 * (self.gamma - 1.0))

    @property
    def sound_coefficient(self) -> float:
        """√(aγ), so that c(ρ) = √(aγ)·ρ^θ"""
        return math.sqrt(self.a * self.gamma)

    @property
    def b_inv(self) -> float:
        """Riemann invariant coefficient 2√(aγ)/(γ-1)"""
        return 2.0 * self.sound_coefficient / (self.gamma - 1.0)

    def with_epsilon(self, epsilon: float) -> "FluidParams":
        return self.model_copy(update={"epsilon": epsilon})


class FarField(BaseModel):
    """End states (ρ±, u±) and the half-width of the reference profile"""
    model_config = ConfigDict(frozen=True)

    rho_minus: float = Field(gt=0.0, description="Density for x -> -inf")
    u_minus: float = Field(default=0.0, description="Velocity for x -> -inf")
    rho_plus: float = Field(gt=0.0, description="Density for x -> +inf")
    u_plus: float = Field(default=0.0, description="Velocity for x -> +inf")
    L0: float = Field(default=1.0, gt=0.0, description="Transition half-width of the reference profile")

    @property
    def left(self) -> Tuple[float, float]:
        return (self.rho_minus, self.u_minus)

    @property
    def right(self) -> Tuple[float, float]:
        return (self.rho_plus, self.u_plus)

    @property
    def is_uniform(self) -> bool:
        return self.rho_minus == self.rho_plus and self.u_minus == self.u_plus


class SchemeConfig(BaseModel):
    """Time integration and discretization choices for an NSK run"""
    cfl_hyp: float = Field(default=0.4, gt=0.0, le=1.0, description="Hyperbolic CFL factor")
    cfl_par: float = Field(default=0.4, gt=0.0, le=1.0, description="Parabolic CFL factor")
    flux: FluxKind = Field(default=FluxKind.RUSANOV, description="Numerical flux")
    integrator: Integrator = Field(default=Integrator.SSP2, description="Two-stage integrator")
    t_end: float = Field(gt=0.0, description="Final time")
    snapshot_times: List[float] = Field(default_factory=list)
    original_viscosity_factor: float = Field(
        default=2.0,
        ge=0.0,
        description="Multiplier of ε(ρu_x)_x in the original form; 2 matches the effective form",
    )
    contamination_cells: int = Field(default=10, ge=1)
    contamination_rtol: float = Field(default=1e-6, gt=0.0)
    max_steps: int = Field(default=5_000_000, gt=0)

    @model_validator(mode="after")
    def _check_snapshots(self) -> "SchemeConfig":
        times = self.snapshot_times
        if any(t < 0.0 for t in times):
            raise ValueError("snapshot_times must be nonnegative")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot_times must be strictly increasing")
        if times and times[-1] > self.t_end:
            raise ValueError(f"snapshot time {times[-1]} exceeds t_end={self.t_end}")
        return self


class RunConfig(BaseModel):
    """Everything a simulate or converge invocation needs"""
    fluid: FluidParams
    far: FarField
    scheme: SchemeConfig
    x_min: float = -3.0
    x_max: float = 3.0
    n: int = Field(default=400, ge=4)
    formulation: str = Field(default="effective", description="effective or original")
    mollify_width: Optional[float] = Field(default=None, gt=0.0)
    window: Optional[Tuple[float, float]] = None
    epsilons: List[float] = Field(default_factory=list)
    cells_per_epsilon: float = Field(default=4.0, gt=0.0)

    @model_validator(mode="after")
    def _check_domain(self) -> "RunConfig":
        if self.x_max <= self.x_min:
            raise ValueError("x_max must exceed x_min")
        if self.formulation not in ("effective", "original"):
            raise ValueError(f"Unknown formulation: {self.formulation}")
        if self.window is not None and not (self.x_min <= self.window[0] < self.window[1] <= self.x_max):
            raise ValueError("window must be an interval inside the domain")
        if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        if any(e <= 0.0 for e in self.epsilons):
            raise ValueError("epsilons must be positive")
        return self


class Settings(BaseSettings):
    """Process-wide settings read from the environment"""
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="NSKLIMIT_",
        extra="ignore",
    )

    app_name: str = "nsklimit"
    app_version: str = "0.1.0"

    # Output
    output_dir: Path = Path("runs")

    # Sweeps
    max_workers: int = 1

    # HTTP service
    host: str = "0.0.0.0"
    port: int = 8000
    max_service_cells: int = 2000
    cors_origins: List[str] = Field(default=["*"])
    slow_request_seconds: float = Field(
        default=5.0, ge=0.0, description="Requests taking at least this long are logged as warnings"
    )

    # Logging
    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


_FLUID_KEYS = {"gamma", "a", "epsilon"}
_FAR_KEYS = {"rho_minus", "u_minus", "rho_plus", "u_plus", "l0"}
_SCHEME_KEYS = {
    "cfl_hyp", "cfl_par", "flux", "integrator", "t_end", "snapshot_times",
    "original_viscosity_factor", "contamination_cells", "contamination_rtol",
}
_RUN_KEYS = {
    "x_min", "x_max", "n", "formulation", "mollify_width", "window",
    "epsilons", "cells_per_epsilon",
}
_LIST_KEYS = {"snapshot_times", "window", "epsilons"}
_TEXT_KEYS = {"flux", "integrator", "formulation", "a"}


def _parse_value(key: str, raw: str) -> Any:
    raw = raw.strip()
    try:
        if key in _LIST_KEYS:
            return [float(item) for item in raw.replace(";", ",").split(",") if item.strip()]
        if key in _TEXT_KEYS:
            return raw.lower()
        if key in ("n", "contamination_cells"):
            return int(raw)
        return float(raw)
    except ValueError as e:
        raise ConfigError(f"Cannot parse value for '{key}': {raw!r}") from e


def parse_run_config(text: str) -> RunConfig:
    """Parse a flat key = value run description"""
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#",), interpolation=None, strict=True
    )
    parser.optionxform = str.lower
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as e:
        raise ConfigError(f"Malformed configuration: {e}") from e

    values: Dict[str, Any] = {}
    for key, raw in parser.items("run"):
        if key not in _FLUID_KEYS | _FAR_KEYS | _SCHEME_KEYS | _RUN_KEYS:
            raise ConfigError(f"Unknown configuration key: {key}")
        values[key] = _parse_value(key, raw)

    for required in ("gamma", "rho_minus", "rho_plus", "t_end"):
        if required not in values:
            raise ConfigError(f"Missing required key: {required}")

    gamma = values["gamma"]
    a_value: Union[str, float] = values.get("a", "kinetic")
    if a_value == "kinetic":
        if gamma <= 1.0:
            raise ConfigError("gamma must exceed 1")
        a_value = kinetic_pressure_coefficient(gamma)
    else:
        try:
            a_value = float(a_value)
        except ValueError as e:
            raise ConfigError(f"a must be a number or 'kinetic', got {a_value!r}") from e

    fluid = {"a": a_value, "gamma": gamma, "epsilon": values.get("epsilon", 0.0)}
    far = {("L0" if k == "l0" else k): values[k] for k in _FAR_KEYS if k in values}
    scheme = {k: values[k] for k in _SCHEME_KEYS if k in values}
    run = {k: values[k] for k in _RUN_KEYS if k in values}
    if "window" in run:
        if len(run["window"]) != 2:
            raise ConfigError("window needs exactly two numbers")
        run["window"] = tuple(run["window"])

    return RunConfig(fluid=fluid, far=far, scheme=scheme, **run)


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Read a run configuration file"""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"Configuration file not found: {p}")
    return parse_run_config(p.read_text(encoding="utf-8"))


def dump_run_config(cfg: RunConfig) -> str:
    """Render a configuration back into key = value text"""
    lines = [
        f"gamma = {cfg.fluid.gamma!r}",
        f"a = {cfg.fluid.a!r}",
        f"epsilon = {cfg.fluid.epsilon!r}",
        f"x_min = {cfg.x_min!r}",
        f"x_max = {cfg.x_max!r}",
        f"n = {cfg.n}",
        f"rho_minus = {cfg.far.rho_minus!r}",
        f"u_minus = {cfg.far.u_minus!r}",
        f"rho_plus = {cfg.far.rho_plus!r}",
        f"u_plus = {cfg.far.u_plus!r}",
        f"L0 = {cfg.far.L0!r}",
        f"t_end = {cfg.scheme.t_end!r}",
        f"flux = {cfg.scheme.flux.value}",
        f"integrator = {cfg.scheme.integrator.value}",
        f"cfl_hyp = {cfg.scheme.cfl_hyp!r}",
        f"cfl_par = {cfg.scheme.cfl_par!r}",
        f"formulation = {cfg.formulation}",
        f"original_viscosity_factor = {cfg.scheme.original_viscosity_factor!r}",
        f"contamination_cells = {cfg.scheme.contamination_cells}",
        f"contamination_rtol = {cfg.scheme.contamination_rtol!r}",
        f"cells_per_epsilon = {cfg.cells_per_epsilon!r}",
    ]
    if cfg.scheme.snapshot_times:
        lines.append("snapshot_times = " + ", ".join(repr(t) for t in cfg.scheme.snapshot_times))
    if cfg.mollify_width is not None:
        lines.append(f"mollify_width = {cfg.mollify_width!r}")
    if cfg.window is not None:
        lines.append(f"window = {cfg.window[0]!r}, {cfg.window[1]!r}")
    if cfg.epsilons:
        lines.append("epsilons = " + ", ".join(repr(e) for e in cfg.epsilons))
    return "\n".join(lines) + "\n"
