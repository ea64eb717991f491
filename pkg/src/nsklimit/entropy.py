"""
Weak entropy pairs, energy functionals and entropy-dissipation residuals for nsklimit
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import TYPE_CHECKING, Any, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import beta as beta_function
from scipy.special import roots_jacobi, roots_legendre

from .config import FarField, FluidParams, Formulation
from .core import (
    ArrayLike,
    Grid1D,
    State,
    derivative_stencils,
    internal_energy,
    internal_energy_derivative,
    internal_energy_second_derivative,
    pressure,
    reference_ghosts,
    reference_gradients,
    reference_profile,
    relative_energy,
)
from .errors import DomainError, QuadratureError

if TYPE_CHECKING:
    from .solver import Trajectory

logger = logging.getLogger(__name__)

DEFAULT_NODES = 64
DOUBLING_RTOL = 1e-6
_CHUNK = 2048


class TestKind(str, Enum):
    CONSTANT = "constant"
    IDENTITY = "identity"
    HALF_SQUARE = "half_square"
    SIGNED_HALF_SQUARE = "signed_half_square"
    COMPACT_BUMP = "compact_bump"
    COMBINATION = "combination"


@dataclass(frozen=True)
class TestFunction:
    """A generator ψ(s) of weak entropy pairs"""
    __test__ = False

    kind: TestKind
    a: float = 0.0
    b: float = 0.0
    terms: Tuple[Tuple[float, "TestFunction"], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", TestKind(self.kind))
        if self.kind is TestKind.COMPACT_BUMP and not self.a < self.b:
            raise DomainError(f"Compact bump needs a < b, got [{self.a}, {self.b}]")

    @classmethod
    def constant(cls) -> "TestFunction":
        return cls(TestKind.CONSTANT)

    @classmethod
    def identity(cls) -> "TestFunction":
        return cls(TestKind.IDENTITY)

    @classmethod
    def half_square(cls) -> "TestFunction":
        return cls(TestKind.HALF_SQUARE)

    @classmethod
    def signed_half_square(cls) -> "TestFunction":
        return cls(TestKind.SIGNED_HALF_SQUARE)

    @classmethod
    def compact_bump(cls, a: float, b: float) -> "TestFunction":
        """(4(s-a)(b-s)/(b-a)²)³ on [a, b], zero outside; C² with peak 1"""
        return cls(TestKind.COMPACT_BUMP, a=float(a), b=float(b))

    @classmethod
    def from_name(cls, name: str, a: float = -1.0, b: float = 1.0) -> "TestFunction":
        try:
            kind = TestKind(name)
        except ValueError:
            raise DomainError(f"Unknown test function: {name!r}") from None
        if kind is TestKind.COMPACT_BUMP:
            return cls.compact_bump(a, b)
        if kind is TestKind.COMBINATION:
            raise DomainError("Combinations are built with + and *")
        return cls(kind)

    def __call__(self, s: ArrayLike) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        kind = self.kind
        if kind is TestKind.CONSTANT:
            return np.ones_like(s)
        if kind is TestKind.IDENTITY:
            return s.copy()
        if kind is TestKind.HALF_SQUARE:
            return 0.5 * s * s
        if kind is TestKind.SIGNED_HALF_SQUARE:
            return 0.5 * s * np.abs(s)
        if kind is TestKind.COMPACT_BUMP:
            t = 4.0 * (s - self.a) * (self.b - s) / (self.b - self.a) ** 2
            return np.where((s > self.a) & (s < self.b), t ** 3, 0.0)
        out = np.zeros_like(s)
        for coeff, term in self.terms:
            out = out + coeff * term(s)
        return out

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        """Points where ψ loses smoothness"""
        if self.kind is TestKind.SIGNED_HALF_SQUARE:
            return (0.0,)
        if self.kind is TestKind.COMPACT_BUMP:
            return (self.a, self.b)
        if self.kind is TestKind.COMBINATION:
            return tuple(sorted({bp for _, term in self.terms for bp in term.breakpoints}))
        return ()

    @property
    def has_second_derivative(self) -> bool:
        if self.kind is TestKind.SIGNED_HALF_SQUARE:
            return False
        if self.kind is TestKind.COMBINATION:
            return all(term.has_second_derivative for _, term in self.terms)
        return True

    @property
    def support(self) -> Optional[Tuple[float, float]]:
        if self.kind is TestKind.COMPACT_BUMP:
            return (self.a, self.b)
        return None

    @property
    def label(self) -> str:
        if self.kind is TestKind.COMPACT_BUMP:
            return f"compact_bump[{self.a:g},{self.b:g}]"
        if self.kind is TestKind.COMBINATION:
            return " + ".join(f"{c:g}*{t.label}" for c, t in self.terms)
        return self.kind.value

    def _as_terms(self) -> Tuple[Tuple[float, "TestFunction"], ...]:
        return self.terms if self.kind is TestKind.COMBINATION else ((1.0, self),)

    def __add__(self, other: "TestFunction") -> "TestFunction":
        if not isinstance(other, TestFunction):
            return NotImplemented
        return TestFunction(TestKind.COMBINATION, terms=self._as_terms() + other._as_terms())

    def __mul__(self, coeff: float) -> "TestFunction":
        if not isinstance(coeff, (int, float)):
            return NotImplemented
        return TestFunction(
            TestKind.COMBINATION, terms=tuple((coeff * c, t) for c, t in self._as_terms())
        )

    __rmul__ = __mul__


@dataclass
class EntropyPairValue:
    """η and its flux at (ρ, u)"""
    eta: Union[float, np.ndarray]
    flux: Union[float, np.ndarray]
    rho: Union[float, np.ndarray]
    u: Union[float, np.ndarray]


def chi(rho: ArrayLike, omega: ArrayLike, p: FluidParams):
    """Kernel (ρ^{2θ} - ω²)₊^λ; the indicator of |ω| < ρ^θ when λ = 0"""
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0.0):
        raise DomainError("chi requires rho >= 0")
    w = np.asarray(omega, dtype=float)
    gap = r ** (2.0 * p.theta) - w * w
    inside = gap > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.where(inside, np.where(inside, gap, 1.0) ** p.lam, 0.0)
    if np.ndim(rho) == 0 and np.ndim(omega) == 0:
        return float(value)
    return value


def kernel_moment(k: int, p: FluidParams) -> float:
    """∫₋₁¹ σ^k (1-σ²)^λ dσ"""
    if k < 0:
        raise DomainError("moment order must be nonnegative")
    if k % 2:
        return 0.0
    return float(beta_function(0.5 * (k + 1), p.lam + 1.0))


def absolute_kernel_moment(k: float, p: FluidParams) -> float:
    """∫₋₁¹ |σ|^k (1-σ²)^λ dσ"""
    return float(beta_function(0.5 * (k + 1.0), p.lam + 1.0))


def c_lambda(p: FluidParams) -> float:
    """∫₋₁¹ (1-σ²)^λ dσ = B(½, λ+1)"""
    return kernel_moment(0, p)


@lru_cache(maxsize=16)
def _legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return roots_legendre(n)


@lru_cache(maxsize=64)
def _jacobi(n: int, alpha: float, beta: float) -> Tuple[np.ndarray, np.ndarray]:
    return roots_jacobi(n, alpha, beta)


def _jacobi_panels(lo: np.ndarray, hi: np.ndarray, lam: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    # panels touching σ = -1 or σ = +1 carry the endpoint weight in the Jacobi rule
    t_l, w_l = _jacobi(n, 0.0, lam)
    t_r, w_r = _jacobi(n, lam, 0.0)
    t_i, w_i = _legendre(n)
    lo = lo[..., None]
    hi = hi[..., None]
    half = 0.5 * (hi - lo)
    left = lo == -1.0
    right = (hi == 1.0) & ~left
    with np.errstate(all="ignore"):
        sig_l = -1.0 + half * (1.0 + t_l)
        wt_l = half ** (lam + 1.0) * w_l * (1.0 - sig_l) ** lam
        sig_r = 1.0 - half * (1.0 - t_r)
        wt_r = half ** (lam + 1.0) * w_r * (1.0 + sig_r) ** lam
        sig_i = lo + half * (1.0 + t_i)
        wt_i = half * w_i * np.clip(1.0 - sig_i * sig_i, 0.0, None) ** lam
    sigma = np.where(left, sig_l, np.where(right, sig_r, sig_i))
    weight = np.where(left, wt_l, np.where(right, wt_r, wt_i))
    return sigma, weight


def _sine_panels(lo: np.ndarray, hi: np.ndarray, lam: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    # σ = sin φ turns the weight into cos^{2λ+1} φ
    t, w = _legendre(n)
    phi_lo = np.arcsin(lo)[..., None]
    phi_hi = np.arcsin(hi)[..., None]
    half = 0.5 * (phi_hi - phi_lo)
    phi = phi_lo + half * (1.0 + t)
    weight = half * w * np.clip(np.cos(phi), 0.0, None) ** (2.0 * lam + 1.0)
    return np.sin(phi), weight


_PANEL_RULES = {"jacobi": _jacobi_panels, "sine": _sine_panels}


def _kernel_sums(
    psi: TestFunction, rho: np.ndarray, u: np.ndarray, p: FluidParams, n: int, quadrature: str
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """σ-integrals of ψ and (u + θρ^θσ)ψ against (1-σ²)^λ, plus the same of their moduli"""
    try:
        rule = _PANEL_RULES[quadrature]
    except KeyError:
        raise DomainError(f"Unknown quadrature rule: {quadrature}") from None
    spread = np.where(rho > 0.0, rho ** p.theta, 1.0)
    size = rho.size
    bps = np.asarray(psi.breakpoints, dtype=float)
    cuts = np.clip((bps[None, :] - u[:, None]) / spread[:, None], -1.0, 1.0)
    edges = np.sort(
        np.concatenate([-np.ones((size, 1)), np.zeros((size, 1)), cuts, np.ones((size, 1))], axis=1),
        axis=1,
    )
    sigma, weight = rule(edges[:, :-1], edges[:, 1:], p.lam, n)
    spread3 = spread[:, None, None]
    u3 = u[:, None, None]
    values = psi(u3 + spread3 * sigma)
    carrier = u3 + p.theta * spread3 * sigma
    eta = np.sum(weight * values, axis=(1, 2))
    flux = np.sum(weight * carrier * values, axis=(1, 2))
    eta_abs = np.sum(weight * np.abs(values), axis=(1, 2))
    flux_abs = np.sum(weight * np.abs(carrier * values), axis=(1, 2))
    return eta, flux, eta_abs, flux_abs


def weak_entropy_pair(
    psi: TestFunction,
    rho: ArrayLike,
    u: ArrayLike,
    p: FluidParams,
    nodes: int = DEFAULT_NODES,
    quadrature: str = "jacobi",
    check: bool = True,
) -> EntropyPairValue:
    """
    Weak entropy η^ψ = ∫χ(ρ, s-u)ψ(s)ds and flux ∫(θs + (1-θ)u)χ(ρ, s-u)ψ(s)ds.

    With s = u + ρ^θσ both become ρ times a σ-integral over [-1, 1] against
    (1-σ²)^λ. Panels are split at the breakpoints of ψ and at σ = 0. The
    result is compared against twice the node count unless ``check`` is off.
    """
    r = np.asarray(rho, dtype=float)
    v = np.asarray(u, dtype=float)
    r_flat, v_flat = (a.ravel() for a in np.broadcast_arrays(r, v))
    if np.any(r_flat < 0.0):
        raise DomainError("weak_entropy_pair requires rho >= 0")
    if not (np.all(np.isfinite(r_flat)) and np.all(np.isfinite(v_flat))):
        raise DomainError("weak_entropy_pair requires finite arguments")

    eta = np.empty(r_flat.size)
    flux = np.empty(r_flat.size)
    for start in range(0, r_flat.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        e_n, f_n, _, _ = _kernel_sums(psi, r_flat[sl], v_flat[sl], p, nodes, quadrature)
        if check:
            e_2n, f_2n, e_abs, f_abs = _kernel_sums(psi, r_flat[sl], v_flat[sl], p, 2 * nodes, quadrature)
            bad = (np.abs(e_2n - e_n) > DOUBLING_RTOL * e_abs) | (np.abs(f_2n - f_n) > DOUBLING_RTOL * f_abs)
            if np.any(bad):
                i = start + int(np.flatnonzero(bad)[0])
                raise QuadratureError(
                    f"Kernel quadrature for {psi.label} not converged at rho={r_flat[i]:.6g}, "
                    f"u={v_flat[i]:.6g} with {nodes}/{2 * nodes} nodes"
                )
            e_n, f_n = e_2n, f_2n
        eta[sl] = r_flat[sl] * e_n
        flux[sl] = r_flat[sl] * f_n

    shape = np.broadcast(r, v).shape
    if shape == ():
        return EntropyPairValue(float(eta[0]), float(flux[0]), float(r), float(v))
    return EntropyPairValue(eta.reshape(shape), flux.reshape(shape), r, v)


def polynomial_entropy_pair(
    psi: TestFunction, rho: ArrayLike, u: ArrayLike, p: FluidParams, nodes: int = DEFAULT_NODES
) -> EntropyPairValue:
    """Single-panel Gauss-Jacobi rule with weight (1-σ²)^λ; exact for polynomial ψ of degree < 2·nodes - 1"""
    r = np.asarray(rho, dtype=float)
    v = np.asarray(u, dtype=float)
    if np.any(r < 0.0):
        raise DomainError("polynomial_entropy_pair requires rho >= 0")
    sigma, weight = _jacobi(nodes, p.lam, p.lam)
    spread = r[..., None] ** p.theta
    values = psi(v[..., None] + spread * sigma)
    eta = r * np.sum(weight * values, axis=-1)
    flux = r * np.sum(weight * (v[..., None] + p.theta * spread * sigma) * values, axis=-1)
    if eta.ndim == 0:
        return EntropyPairValue(float(eta), float(flux), float(r), float(v))
    return EntropyPairValue(eta, flux, r, v)


def mechanical_energy_pair(rho: ArrayLike, m: ArrayLike, p: FluidParams) -> EntropyPairValue:
    """η* = m²/(2ρ) + e(ρ), q* = m³/(2ρ²) + m·e'(ρ); (0, 0) at vacuum"""
    r = np.asarray(rho, dtype=float)
    mom = np.asarray(m, dtype=float)
    if np.any(r < 0.0):
        raise DomainError("mechanical_energy_pair requires rho >= 0")
    vacuum = r == 0.0
    if np.any(vacuum & (mom != 0.0)):
        raise DomainError("Nonzero momentum at vacuum")
    safe = np.where(vacuum, 1.0, r)
    u = np.where(vacuum, 0.0, mom / safe)
    eta = 0.5 * mom * u + internal_energy(r, p)
    flux = 0.5 * mom * u * u + mom * internal_energy_derivative(r, p)
    if eta.ndim == 0:
        return EntropyPairValue(float(eta), float(flux), float(r), float(u))
    return EntropyPairValue(eta, flux, r, u)


def entropy_derivatives(
    psi: TestFunction, rho: ArrayLike, u: ArrayLike, p: FluidParams, nodes: int = DEFAULT_NODES
) -> Tuple[np.ndarray, np.ndarray]:
    """(∂η/∂m, ∂²η/∂m²) at fixed ρ by centered differences with step 1e-4(1 + |m|)"""
    r = np.asarray(rho, dtype=float)
    if np.any(r <= 0.0):
        raise DomainError("entropy_derivatives requires rho > 0")
    m = r * np.asarray(u, dtype=float)
    delta = 1e-4 * (1.0 + np.abs(m))
    up = weak_entropy_pair(psi, r, (m + delta) / r, p, nodes).eta
    mid = weak_entropy_pair(psi, r, m / r, p, nodes).eta
    down = weak_entropy_pair(psi, r, (m - delta) / r, p, nodes).eta
    eta_m = (up - down) / (2.0 * delta)
    eta_mm = (up - 2.0 * mid + down) / (delta * delta)
    return eta_m, eta_mm


def _relative_energy_sum(
    rho: np.ndarray, w: np.ndarray, rho_bar: np.ndarray, p: FluidParams, grid: Grid1D
) -> float:
    return float(grid.h * np.sum(0.5 * rho * w * w + relative_energy(rho, rho_bar, p)))


def capillary_energy_density(rho: ArrayLike, rho_x: ArrayLike, epsilon: float) -> np.ndarray:
    """ε²(∂x√ρ)² written as ε²ρ_x²/(4ρ)"""
    r = np.asarray(rho, dtype=float)
    rx = np.asarray(rho_x, dtype=float)
    return epsilon ** 2 * rx * rx / (4.0 * r)


def capillary_integral(
    rho: np.ndarray, grid: Grid1D, epsilon: float, rho_ghosts: Optional[Tuple[float, float]] = None
) -> float:
    """Σ h ε²(D√ρ)² with the centered stencil on √ρ"""
    root = np.sqrt(np.asarray(rho, dtype=float))
    ghosts = None if rho_ghosts is None else (np.sqrt(rho_ghosts[0]), np.sqrt(rho_ghosts[1]))
    d1, _ = derivative_stencils(root, grid, ghosts)
    return float(epsilon ** 2 * grid.h * np.sum(d1 * d1))


def total_energy_E2(state: State, far: FarField, p: FluidParams, grid: Grid1D) -> float:
    """∫ ½ρ(v - v̄)² + e*(ρ, ρ̄) for an effective-velocity (or Euler) state"""
    if state.formulation is Formulation.ORIGINAL_U:
        raise DomainError("total_energy_E2 takes an effective-velocity state")
    state.check_grid(grid)
    rho_bar, v_bar = reference_profile(far, grid.x)
    return _relative_energy_sum(state.rho, state.velocity() - v_bar, rho_bar, p, grid)


def total_energy_E1(state: State, far: FarField, p: FluidParams, grid: Grid1D) -> float:
    """∫ ½ρ(u - ū)² + e*(ρ, ρ̄) + ε²(∂x√ρ)² for an original-form state"""
    if state.formulation is not Formulation.ORIGINAL_U:
        raise DomainError("total_energy_E1 takes an original-form state")
    state.check_grid(grid)
    rho_bar, u_bar = reference_profile(far, grid.x)
    (rl, rr), _ = reference_ghosts(far, grid)
    kinetic = _relative_energy_sum(state.rho, state.velocity() - u_bar, rho_bar, p, grid)
    return kinetic + capillary_integral(state.rho, grid, p.epsilon, (rl[0], rr[0]))


def energy_balance_terms(
    rho: np.ndarray, v: np.ndarray, far: FarField, p: FluidParams, grid: Grid1D
) -> Tuple[float, float, float]:
    """
    (E2, D, R) for the effective-velocity system.

    dE2/dt = -D + R where D = ε∫ρv_x² + ε∫e''(ρ)ρ_x² and R collects the
    work done by the gradients of the reference profile (zero when it is
    uniform, up to boundary terms).
    """
    h = grid.h
    rho_bar, v_bar, drho_bar, dv_bar = reference_gradients(far, grid)
    (rgl, rgr), (vgl, vgr) = reference_ghosts(far, grid)
    w = v - v_bar
    energy = _relative_energy_sum(rho, w, rho_bar, p, grid)

    rho_x, _ = derivative_stencils(rho, grid, (rgl[0], rgr[0]))
    v_x, _ = derivative_stencils(v, grid, (vgl[0], vgr[0]))
    p_x, _ = derivative_stencils(pressure(rho, p), grid, (pressure(rgl[0], p), pressure(rgr[0], p)))
    e2 = internal_energy_second_derivative(rho, p)
    e2_bar = internal_energy_second_derivative(rho_bar, p)
    eps = p.epsilon

    dissipation = eps * h * float(np.sum(rho * v_x * v_x + e2 * rho_x * rho_x))
    work = h * float(
        np.sum(
            -rho * v * w * dv_bar
            + eps * rho * v_x * dv_bar
            + eps * rho_x * w * dv_bar
            + eps * e2_bar * drho_bar * rho_x
            - e2_bar * drho_bar * rho * v
            + v_bar * p_x
        )
    )
    return energy, dissipation, work


@dataclass
class GrowthBoundReport:
    """Fitted constants of entropy growth bounds over a sample"""
    psi: str
    constants: Dict[str, float] = field(default_factory=dict)
    lower_bound: Optional[float] = None
    support_violations: int = 0
    samples: int = 0

    @property
    def passed(self) -> bool:
        finite = all(np.isfinite(c) for c in self.constants.values())
        lower_ok = self.lower_bound is None or (np.isfinite(self.lower_bound) and self.lower_bound > 0.0)
        return bool(finite and lower_ok and self.support_violations == 0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "psi": self.psi,
            "constants": dict(self.constants),
            "lower_bound": self.lower_bound,
            "support_violations": self.support_violations,
            "samples": self.samples,
            "passed": self.passed,
        }


def _sample_arrays(samples: Union[Sequence[Tuple[float, float]], np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(samples, dtype=float).reshape(-1, 2)
    if arr.shape[0] == 0:
        raise DomainError("Empty sample")
    if np.any(arr[:, 0] <= 0.0):
        raise DomainError("Growth bounds are sampled at positive densities")
    return arr[:, 0], arr[:, 1]


def signed_square_growth_check(
    samples: Union[Sequence[Tuple[float, float]], np.ndarray],
    p: FluidParams,
    psi: Optional[TestFunction] = None,
    nodes: int = DEFAULT_NODES,
) -> GrowthBoundReport:
    """
    Ratios behind the growth bounds of the ½s|s| entropy:
    |η| ≤ C(ρu² + ρ^γ), H ≥ C⁻¹(ρ|u|³ + ρ^{γ+θ}), |η_m| ≤ C(ρ|u| + ρ^θ), |η_mm| ≤ C/ρ.
    """
    psi = psi or TestFunction.signed_half_square()
    rho, u = _sample_arrays(samples)
    pair = weak_entropy_pair(psi, rho, u, p, nodes)
    eta_m, eta_mm = entropy_derivatives(psi, rho, u, p, nodes)
    au = np.abs(u)
    ratios = {
        "eta": np.abs(pair.eta) / (rho * u * u + rho ** p.gamma),
        "eta_m": np.abs(eta_m) / (rho * au + rho ** p.theta),
        "eta_mm": rho * np.abs(eta_mm),
    }
    flux_ratio = np.asarray(pair.flux) / (rho * au ** 3 + rho ** (p.gamma + p.theta))
    report = GrowthBoundReport(
        psi=psi.label,
        constants={k: float(np.max(v)) for k, v in ratios.items()},
        lower_bound=float(np.min(flux_ratio)),
        samples=rho.size,
    )
    logger.debug(f"Growth bounds for {psi.label}: {report.constants}, lower={report.lower_bound:.4g}")
    return report


def compact_growth_check(
    psi: TestFunction,
    samples: Union[Sequence[Tuple[float, float]], np.ndarray],
    p: FluidParams,
    nodes: int = DEFAULT_NODES,
) -> GrowthBoundReport:
    """Growth of entropies generated by a compactly supported ψ, plus their support"""
    support = psi.support
    if support is None:
        raise DomainError(f"{psi.label} is not compactly supported")
    a, b = support
    rho, u = _sample_arrays(samples)
    pair = weak_entropy_pair(psi, rho, u, p, nodes)
    eta_m, eta_mm = entropy_derivatives(psi, rho, u, p, nodes)
    eta = np.asarray(pair.eta)
    flux = np.asarray(pair.flux)
    constants: Dict[str, float] = {}
    if p.gamma <= 3.0:
        constants["eta"] = float(np.max(np.abs(eta) / rho))
    else:
        constants["flux"] = float(np.max(np.abs(flux) / (rho + rho ** (p.theta + 1.0))))
    constants["derivatives"] = float(np.max(np.abs(eta_m) + rho * np.abs(eta_mm)))
    spread = rho ** p.theta
    outside = (u + spread < a) | (u - spread > b)
    violations = int(np.count_nonzero(outside & ((eta != 0.0) | (flux != 0.0))))
    if violations:
        logger.warning(f"{violations} samples of {psi.label} are nonzero outside the kernel support")
    return GrowthBoundReport(psi=psi.label, constants=constants, support_violations=violations, samples=rho.size)


def _time_hats(times: np.ndarray, halfwidth: int) -> np.ndarray:
    k = len(times)
    centers = range(halfwidth, k - halfwidth)
    hats = np.zeros((len(centers), k))
    for row, j in enumerate(centers):
        lo, hi = j - halfwidth, j + halfwidth
        hats[row, lo:j + 1] = (times[lo:j + 1] - times[lo]) / (times[j] - times[lo])
        hats[row, j:hi + 1] = (times[hi] - times[j:hi + 1]) / (times[hi] - times[j])
    return hats


def _space_hats(n: int, halfwidth: int, stride: int) -> np.ndarray:
    idx = np.arange(n)
    centers = np.arange(halfwidth, n - halfwidth, stride)
    return np.clip(1.0 - np.abs(idx[None, :] - centers[:, None]) / halfwidth, 0.0, None)


def weak_entropy_form(
    traj: "Trajectory",
    psi: Optional[TestFunction] = None,
    time_halfwidth: int = 1,
    space_halfwidth: Optional[int] = None,
    space_stride: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    ∫∫(η φ_t + q φ_x) and ∫∫φ over tensor-product hat functions φ.

    Temporal hats have nodes at snapshots, spatial hats at cell centers;
    ``psi=None`` uses the mechanical energy pair.
    """
    grid = traj.grid
    p = traj.params
    times = traj.times
    if len(times) < 2 * time_halfwidth + 1 or time_halfwidth < 1:
        raise DomainError(
            f"Entropy residual needs at least {2 * max(time_halfwidth, 1) + 1} snapshots, got {len(times)}"
        )
    sh = space_halfwidth or max(2, grid.n // 32)
    stride = space_stride or sh
    if grid.n < 2 * sh + 1:
        raise DomainError("Grid too coarse for the spatial test functions")

    eta_rows = []
    flux_rows = []
    for snap in traj.snapshots:
        rho, v = traj.effective_fields(snap)
        if psi is None:
            pair = mechanical_energy_pair(rho, rho * v, p)
        else:
            pair = weak_entropy_pair(psi, rho, v, p)
        eta_rows.append(pair.eta)
        flux_rows.append(pair.flux)
    eta = np.vstack(eta_rows)
    flux = np.vstack(flux_rows)

    h = grid.h
    phi_x = _space_hats(grid.n, sh, stride)
    padded = np.pad(phi_x, ((0, 0), (1, 1)))
    dphi_x = (padded[:, 2:] - padded[:, :-2]) / (2.0 * h)
    phi_t = _time_hats(times, time_halfwidth)

    eta_x = h * eta @ phi_x.T
    flux_x = h * flux @ dphi_x.T
    time_weights = np.zeros(len(times))
    dt = np.diff(times)
    time_weights[:-1] += 0.5 * dt
    time_weights[1:] += 0.5 * dt

    time_part = np.diff(phi_t, axis=1) @ (0.5 * (eta_x[1:] + eta_x[:-1]))
    flux_part = (phi_t * time_weights) @ flux_x
    norm = np.outer(phi_t @ time_weights, h * phi_x.sum(axis=1))
    return time_part + flux_part, norm


def entropy_residual(
    traj: "Trajectory",
    psi: Optional[TestFunction] = None,
    time_halfwidth: int = 1,
    space_halfwidth: Optional[int] = None,
    space_stride: Optional[int] = None,
) -> float:
    """Largest normalized positive part of η_t + q_x tested against nonnegative hats"""
    weak, norm = weak_entropy_form(traj, psi, time_halfwidth, space_halfwidth, space_stride)
    violation = float(max(0.0, np.max(-weak / norm)))
    logger.debug(f"Entropy residual ({psi.label if psi else 'mechanical'}): {violation:.3e}")
    return violation


def default_test_functions(far: FarField) -> Iterable[TestFunction]:
    """Entropy generators checked by default on a run"""
    lo = min(far.u_minus, far.u_plus) - 1.0
    hi = max(far.u_minus, far.u_plus) + 1.0
    return (TestFunction.half_square(), TestFunction.compact_bump(lo, hi))
