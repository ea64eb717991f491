"""
Thermodynamic closure, grid and state containers, and shared stencils for nsklimit
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .config import FarField, FluidParams, Formulation
from .errors import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centered mesh on [x_min, x_max]"""
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.n < 4:
            raise DomainError(f"Grid needs at least 4 cells, got {self.n}")
        if not self.x_max > self.x_min:
            raise DomainError(f"Empty domain [{self.x_min}, {self.x_max}]")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @property
    def x(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n) + 0.5) * self.h

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    def ghost_x(self, layers: int = 1) -> Tuple[np.ndarray, np.ndarray]:
        """Ghost-cell centers, ordered outward-in on the left and inward-out on the right"""
        k = np.arange(layers, 0, -1)
        left = self.x_min - (k - 0.5) * self.h
        right = self.x_max + (np.arange(1, layers + 1) - 0.5) * self.h
        return left, right

    def window_weights(self, a: Optional[float] = None, b: Optional[float] = None) -> np.ndarray:
        """Length of each cell inside [a, b] (midpoint quadrature weights)"""
        a = self.x_min if a is None else a
        b = self.x_max if b is None else b
        lo = self.x - 0.5 * self.h
        hi = self.x + 0.5 * self.h
        return np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)


@dataclass(frozen=True, eq=False)
class State:
    """Density and momentum per cell, tagged with the meaning of the momentum"""
    rho: np.ndarray
    mom: np.ndarray
    formulation: Formulation = Formulation.EFFECTIVE_V
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "formulation", Formulation(self.formulation))
        rho = np.array(self.rho, dtype=float)
        mom = np.array(self.mom, dtype=float)
        if rho.ndim != 1 or rho.shape != mom.shape:
            raise DomainError(f"rho and mom must be 1D arrays of equal length, got {rho.shape} and {mom.shape}")
        if self.formulation is Formulation.EULER:
            bad = np.flatnonzero(~(rho >= 0.0))
        else:
            bad = np.flatnonzero(~(rho > 0.0))
        if bad.size:
            i = int(bad[0])
            raise DomainError(f"Invalid density {rho[i]!r} in cell {i} for {self.formulation.value} state")
        rho.setflags(write=False)
        mom.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "mom", mom)

    @property
    def n(self) -> int:
        return self.rho.size

    def velocity(self) -> np.ndarray:
        """mom/ρ, with zero velocity in vacuum cells"""
        with np.errstate(divide="ignore", invalid="ignore"):
            vel = np.where(self.rho > 0.0, self.mom / np.where(self.rho > 0.0, self.rho, 1.0), 0.0)
        return vel

    def check_grid(self, grid: Grid1D) -> None:
        if self.n != grid.n:
            raise DomainError(f"State has {self.n} cells but grid has {grid.n}")

    def at_time(self, time: float) -> "State":
        return State(self.rho, self.mom, self.formulation, time)


def _nonnegative(rho: ArrayLike, what: str) -> np.ndarray:
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0.0) or np.any(np.isnan(r)):
        raise DomainError(f"{what} requires nonnegative density")
    return r


def _positive(rho: ArrayLike, what: str) -> np.ndarray:
    r = np.asarray(rho, dtype=float)
    if not np.all(r > 0.0):
        raise DomainError(f"{what} requires positive density")
    return r


def _scalar_or_array(value: np.ndarray, like: ArrayLike):
    return float(value) if np.ndim(like) == 0 else value


def pressure(rho: ArrayLike, p: FluidParams):
    """P(ρ) = aρ^γ"""
    r = _nonnegative(rho, "pressure")
    return _scalar_or_array(p.a * r ** p.gamma, rho)


def pressure_derivative(rho: ArrayLike, p: FluidParams):
    r = _nonnegative(rho, "pressure_derivative")
    return _scalar_or_array(p.a * p.gamma * r ** (p.gamma - 1.0), rho)


def sound_speed(rho: ArrayLike, p: FluidParams):
    """c(ρ) = √(aγ)·ρ^θ"""
    r = _nonnegative(rho, "sound_speed")
    return _scalar_or_array(p.sound_coefficient * r ** p.theta, rho)


def internal_energy(rho: ArrayLike, p: FluidParams):
    """e(ρ) = a/(γ-1)·ρ^γ"""
    r = _nonnegative(rho, "internal_energy")
    return _scalar_or_array(p.a / (p.gamma - 1.0) * r ** p.gamma, rho)


def internal_energy_derivative(rho: ArrayLike, p: FluidParams):
    """e'(ρ) = aγ/(γ-1)·ρ^(γ-1)"""
    r = _nonnegative(rho, "internal_energy_derivative")
    return _scalar_or_array(p.a * p.gamma / (p.gamma - 1.0) * r ** (p.gamma - 1.0), rho)


def internal_energy_second_derivative(rho: ArrayLike, p: FluidParams):
    """e''(ρ) = aγ·ρ^(γ-2); equals P'(ρ)/ρ"""
    r = _positive(rho, "internal_energy_second_derivative")
    return _scalar_or_array(p.a * p.gamma * r ** (p.gamma - 2.0), rho)


def relative_energy(rho: ArrayLike, rho_bar: ArrayLike, p: FluidParams):
    """Bregman divergence e(ρ) - e(ρ̄) - e'(ρ̄)(ρ - ρ̄) of the internal energy"""
    r = _nonnegative(rho, "relative_energy")
    rb = _positive(rho_bar, "relative_energy reference")
    value = internal_energy(r, p) - internal_energy(rb, p) - internal_energy_derivative(rb, p) * (r - rb)
    value = np.maximum(value, 0.0)
    return float(value) if np.ndim(rho) == 0 and np.ndim(rho_bar) == 0 else value


def riemann_invariants(rho: ArrayLike, w: ArrayLike, p: FluidParams) -> Tuple[np.ndarray, np.ndarray]:
    """(w - b_inv ρ^θ, w + b_inv ρ^θ)"""
    r = _nonnegative(rho, "riemann_invariants")
    spread = p.b_inv * r ** p.theta
    w = np.asarray(w, dtype=float)
    return w - spread, w + spread


def _pad(f: np.ndarray, left, right) -> np.ndarray:
    return np.concatenate([np.atleast_1d(left), f, np.atleast_1d(right)])


def linear_ghosts(f: np.ndarray) -> Tuple[float, float]:
    return 2.0 * f[0] - f[1], 2.0 * f[-1] - f[-2]


def derivative_stencils(
    f: np.ndarray, grid: Grid1D, ghosts: Optional[Tuple[float, float]] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Second-order centered first and second differences.

    Boundary cells use the ghost values (left, right); without them the
    field is extrapolated linearly.
    """
    f = np.asarray(f, dtype=float)
    if f.size != grid.n:
        raise DomainError(f"Field has {f.size} values but grid has {grid.n} cells")
    gl, gr = linear_ghosts(f) if ghosts is None else ghosts
    padded = _pad(f, gl, gr)
    h = grid.h
    d1 = (padded[2:] - padded[:-2]) / (2.0 * h)
    d2 = (padded[2:] - 2.0 * padded[1:-1] + padded[:-2]) / (h * h)
    return d1, d2


def log_density(rho: ArrayLike) -> np.ndarray:
    """ln ρ with a positivity guard"""
    r = np.asarray(rho, dtype=float)
    bad = np.flatnonzero(~(r > 0.0))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"ln(rho) undefined: rho[{i}] = {r.flat[i]!r}")
    return np.log(r)


def _log_gradient(rho: np.ndarray, grid: Grid1D, rho_ghosts: Optional[Tuple[float, float]]) -> np.ndarray:
    ln_rho = log_density(rho)
    ghosts = None
    if rho_ghosts is not None:
        gl, gr = log_density(np.asarray(rho_ghosts, dtype=float))
        ghosts = (gl, gr)
    d1, _ = derivative_stencils(ln_rho, grid, ghosts)
    return d1


def effective_velocity(
    rho: np.ndarray,
    u: np.ndarray,
    epsilon: float,
    grid: Grid1D,
    rho_ghosts: Optional[Tuple[float, float]] = None,
) -> np.ndarray:
    """v = u + ε·D(ln ρ)"""
    u = np.asarray(u, dtype=float)
    if epsilon == 0.0:
        _positive(rho, "effective_velocity")
        return u.copy()
    return u + epsilon * _log_gradient(np.asarray(rho, dtype=float), grid, rho_ghosts)


def original_velocity(
    rho: np.ndarray,
    v: np.ndarray,
    epsilon: float,
    grid: Grid1D,
    rho_ghosts: Optional[Tuple[float, float]] = None,
) -> np.ndarray:
    """u = v - ε·D(ln ρ), the inverse of effective_velocity on the same stencil"""
    v = np.asarray(v, dtype=float)
    if epsilon == 0.0:
        _positive(rho, "original_velocity")
        return v.copy()
    return v - epsilon * _log_gradient(np.asarray(rho, dtype=float), grid, rho_ghosts)


def smooth_step(sigma: ArrayLike) -> np.ndarray:
    """C-infinity step: 0 for σ <= -1, 1 for σ >= 1, ½(1 + tanh(2σ/(1-σ²))) between"""
    s = np.asarray(sigma, dtype=float)
    out = np.where(s >= 1.0, 1.0, 0.0)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = 0.5 * (1.0 + np.tanh(2.0 * si / (1.0 - si * si)))
    return out


def step_between(left: float, right: float, x: ArrayLike, half_width: float) -> np.ndarray:
    return left + (right - left) * smooth_step(np.asarray(x, dtype=float) / half_width)


def reference_profile(far: FarField, x: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Reference pair (ρ̄, v̄): monotone smooth steps over |x| < L0"""
    rho_bar = step_between(far.rho_minus, far.rho_plus, x, far.L0)
    v_bar = step_between(far.u_minus, far.u_plus, x, far.L0)
    return rho_bar, v_bar


def reference_ghosts(far: FarField, grid: Grid1D, layers: int = 1) -> Tuple[Tuple[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]:
    """Reference profile at ghost cells: ((ρ_left, ρ_right), (v_left, v_right))"""
    xl, xr = grid.ghost_x(layers)
    rl, vl = reference_profile(far, xl)
    rr, vr = reference_profile(far, xr)
    return (rl, rr), (vl, vr)


def reference_gradients(far: FarField, grid: Grid1D) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(ρ̄, v̄, ∂xρ̄, ∂xv̄) at cell centers, gradients by the shared stencil"""
    rho_bar, v_bar = reference_profile(far, grid.x)
    (rl, rr), (vl, vr) = reference_ghosts(far, grid)
    drho, _ = derivative_stencils(rho_bar, grid, (rl[0], rr[0]))
    dv, _ = derivative_stencils(v_bar, grid, (vl[0], vr[0]))
    return rho_bar, v_bar, drho, dv


def reference_state(far: FarField, grid: Grid1D, p: FluidParams, formulation: Formulation = Formulation.EFFECTIVE_V) -> State:
    """State equal to the reference profile"""
    rho_bar, v_bar = reference_profile(far, grid.x)
    return _state_from_primitives(rho_bar, v_bar, far, grid, p, formulation)


def _state_from_primitives(
    rho: np.ndarray, v: np.ndarray, far: FarField, grid: Grid1D, p: FluidParams, formulation: Formulation
) -> State:
    if formulation is Formulation.ORIGINAL_U:
        (rl, rr), _ = reference_ghosts(far, grid)
        u = original_velocity(rho, v, p.epsilon, grid, (rl[0], rr[0]))
        return State(rho, rho * u, formulation)
    return State(rho, rho * v, formulation)


def mollified_riemann_data(
    far: FarField,
    grid: Grid1D,
    p: FluidParams,
    formulation: Formulation = Formulation.EFFECTIVE_V,
    width: Optional[float] = None,
    x0: float = 0.0,
) -> State:
    """
    Riemann data jumping at x0 from (ρ-, u-) to (ρ+, u+), smoothed by the
    compact step over half-width ``width`` (default 2h).

    The velocity profile is the effective velocity; original-form states
    get u0 = v0 - ε D(ln ρ0).
    """
    half = 2.0 * grid.h if width is None else width
    x = grid.x - x0
    if formulation is Formulation.EULER:
        return sharp_riemann_data(far, grid, x0)
    rho = step_between(far.rho_minus, far.rho_plus, x, half)
    v = step_between(far.u_minus, far.u_plus, x, half)
    return _state_from_primitives(rho, v, far, grid, p, formulation)


def sharp_riemann_data(far: FarField, grid: Grid1D, x0: float = 0.0) -> State:
    """Piecewise-constant Euler data with the jump at x0"""
    rho = np.where(grid.x < x0, far.rho_minus, far.rho_plus)
    vel = np.where(grid.x < x0, far.u_minus, far.u_plus)
    return State(rho, rho * vel, Formulation.EULER)


def korteweg_capillary_general(
    rho: ArrayLike, rho_x: ArrayLike, rho_xx: ArrayLike, epsilon: float, alpha: float = -1.0
) -> np.ndarray:
    """Capillary flux ρκρ_xx + ½(κ + ρκ')ρ_x² - κρ_x² for κ(ρ) = ε²ρ^α"""
    r = _positive(rho, "korteweg_capillary_general")
    rx = np.asarray(rho_x, dtype=float)
    rxx = np.asarray(rho_xx, dtype=float)
    kappa = epsilon ** 2 * r ** alpha
    rho_kappa_prime = alpha * kappa
    return r * kappa * rxx + 0.5 * (kappa + rho_kappa_prime) * rx * rx - kappa * rx * rx


def korteweg_capillary_reduced(rho: ArrayLike, rho_x: ArrayLike, rho_xx: ArrayLike, epsilon: float) -> np.ndarray:
    """ε²(ρ_xx - ρ_x²/ρ), the capillary flux once κ = ε²/ρ"""
    r = _positive(rho, "korteweg_capillary_reduced")
    rx = np.asarray(rho_x, dtype=float)
    return epsilon ** 2 * (np.asarray(rho_xx, dtype=float) - rx * rx / r)


def boundary_contaminated(
    state: State,
    far: FarField,
    grid: Grid1D,
    p: FluidParams,
    cells: int = 10,
    rtol: float = 1e-6,
) -> bool:
    """True when the outer ``cells`` cells on either side left the far-field states"""
    state.check_grid(grid)
    k = min(cells, grid.n // 2)
    rho_scale = max(far.rho_minus, far.rho_plus)
    c_far = p.sound_coefficient * max(far.rho_minus, far.rho_plus) ** p.theta
    vel_scale = max(abs(far.u_minus), abs(far.u_plus), c_far)
    vel = state.velocity()
    left_bad = (
        np.max(np.abs(state.rho[:k] - far.rho_minus)) > rtol * rho_scale
        or np.max(np.abs(vel[:k] - far.u_minus)) > rtol * vel_scale
    )
    right_bad = (
        np.max(np.abs(state.rho[-k:] - far.rho_plus)) > rtol * rho_scale
        or np.max(np.abs(vel[-k:] - far.u_plus)) > rtol * vel_scale
    )
    if left_bad or right_bad:
        logger.debug(f"Boundary contamination at t={state.time:.4g} (left={left_bad}, right={right_bad})")
    return bool(left_bad or right_bad)


def l1_distance(f: np.ndarray, g: np.ndarray, grid: Grid1D, window: Optional[Tuple[float, float]] = None) -> float:
    """Midpoint-rule ∫|f - g| over the window (whole domain by default)"""
    a, b = (None, None) if window is None else window
    weights = grid.window_weights(a, b)
    return float(np.sum(weights * np.abs(np.asarray(f) - np.asarray(g))))
