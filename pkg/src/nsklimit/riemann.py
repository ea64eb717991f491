"""
Exact Riemann solver and first-order Godunov reference scheme for isentropic γ-law Euler
"""
import logging
import time as _time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .config import FarField, FluidParams, Formulation
from .core import (
    Grid1D,
    State,
    boundary_contaminated,
    pressure,
    pressure_derivative,
    riemann_invariants,
    sharp_riemann_data,
    sound_speed,
)
from .errors import ContaminationError, DomainError, NumericalError, RootFindError, TimeStepUnderflow
from .solver import Trajectory, snapshot_schedule

logger = logging.getLogger(__name__)

DT_FLOOR = 1e-14
ROOT_RTOL = 1e-12
BOUNDARY_CELLS = 10

PrimitiveState = Tuple[float, float]


class WaveType(str, Enum):
    SHOCK = "shock"
    RAREFACTION = "rarefaction"
    VACUUM = "vacuum"


@dataclass(frozen=True)
class RiemannSolution:
    """Two-wave self-similar solution of an isentropic Riemann problem"""
    left: PrimitiveState
    right: PrimitiveState
    middle: Optional[PrimitiveState]
    wave1: WaveType
    wave2: WaveType
    wave1_speeds: Tuple[float, float]
    wave2_speeds: Tuple[float, float]
    params: FluidParams
    residual: float = 0.0

    @property
    def is_vacuum(self) -> bool:
        return self.middle is None

    @property
    def max_speed(self) -> float:
        return max(abs(self.wave1_speeds[0]), abs(self.wave2_speeds[1]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "left": {"rho": self.left[0], "u": self.left[1]},
            "right": {"rho": self.right[0], "u": self.right[1]},
            "middle": None if self.middle is None else {"rho": self.middle[0], "u": self.middle[1]},
            "wave1": self.wave1.value,
            "wave2": self.wave2.value,
            "wave1_speeds": list(self.wave1_speeds),
            "wave2_speeds": list(self.wave2_speeds),
            "residual": self.residual,
            "gamma": self.params.gamma,
            "a": self.params.a,
        }


def _sound(rho: np.ndarray, p: FluidParams) -> np.ndarray:
    return p.sound_coefficient * rho ** p.theta


def _density_from_sound(c: np.ndarray, p: FluidParams) -> np.ndarray:
    return (np.maximum(c, 0.0) / p.sound_coefficient) ** (1.0 / p.theta)


def _pressure_secant(r: np.ndarray, rk: np.ndarray, p: FluidParams) -> np.ndarray:
    """(P(r) - P(rk))/(r - rk), falling back to P' at the midpoint for r ≈ rk"""
    d = r - rk
    close = np.abs(d) <= 1e-8 * rk
    safe_d = np.where(close, 1.0, d)
    secant = (p.a * r ** p.gamma - p.a * rk ** p.gamma) / safe_d
    mid = 0.5 * (r + rk)
    return np.where(close, pressure_derivative(mid, p), secant)


def _wave_curve(rho: np.ndarray, rho_k: np.ndarray, p: FluidParams) -> Tuple[np.ndarray, np.ndarray]:
    """f_K(ρ) and f_K'(ρ): rarefaction branch for ρ <= ρ_K, shock branch above"""
    c = _sound(rho, p)
    c_k = _sound(rho_k, p)
    rare = rho <= rho_k
    f_rare = 2.0 / (p.gamma - 1.0) * (c - c_k)
    df_rare = c / rho

    d = rho - rho_k
    dp = p.a * rho ** p.gamma - p.a * rho_k ** p.gamma
    g = np.maximum(dp * d / (rho * rho_k), 0.0)
    f_shock = np.sqrt(g)
    dg = (pressure_derivative(rho, p) * d + dp) / (rho * rho_k) - dp * d / (rho * rho * rho_k)
    thin = d <= 1e-12 * rho_k
    df_shock = np.where(thin, c_k / rho_k, dg / (2.0 * np.where(thin, 1.0, f_shock)))
    return np.where(rare, f_rare, f_shock), np.where(rare, df_rare, df_shock)


def _star_density(
    rho_l: np.ndarray, u_l: np.ndarray, rho_r: np.ndarray, u_r: np.ndarray, p: FluidParams
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Middle density from f_L(ρ) + f_R(ρ) + u_R - u_L = 0.

    Bracket on [1e-8 min ρ, 10 max ρ] with geometric expansion, bisect in
    log space, then Newton with the bracket as safeguard. Returns the
    density, the vacuum mask and the residual.
    """
    du = u_r - u_l
    c_l = _sound(rho_l, p)
    c_r = _sound(rho_r, p)
    vacuum = du >= 2.0 / (p.gamma - 1.0) * (c_l + c_r)
    tol = ROOT_RTOL * (1.0 + np.abs(u_l) + np.abs(u_r))

    def F(rho):
        fl, dfl = _wave_curve(rho, rho_l, p)
        fr, dfr = _wave_curve(rho, rho_r, p)
        return fl + fr + du, dfl + dfr, np.abs(fl) + np.abs(fr) + np.abs(du)

    lo = 1e-8 * np.minimum(rho_l, rho_r)
    hi = 10.0 * np.maximum(rho_l, rho_r)
    for _ in range(200):
        f_hi, _, _ = F(hi)
        grow = (f_hi < 0.0) & ~vacuum
        if not grow.any():
            break
        hi = np.where(grow, hi * 10.0, hi)
    for _ in range(100):
        f_lo, _, _ = F(lo)
        shrink = (f_lo > 0.0) & ~vacuum
        if not shrink.any():
            break
        lo = np.where(shrink, np.maximum(lo * 1e-2, 1e-290), lo)

    for _ in range(400):
        active = (hi > lo * (1.0 + 1e-3)) & ~vacuum
        if not active.any():
            break
        mid = np.sqrt(lo) * np.sqrt(hi)
        f_mid, _, _ = F(mid)
        lo = np.where(active & (f_mid < 0.0), mid, lo)
        hi = np.where(active & (f_mid >= 0.0), mid, hi)

    rho = 0.5 * (lo + hi)
    f, df, scale = F(rho)
    for _ in range(60):
        floor = np.maximum(tol, 64.0 * np.finfo(float).eps * scale)
        done = (np.abs(f) <= floor) | vacuum
        if done.all():
            break
        lo = np.where(~done & (f < 0.0), rho, lo)
        hi = np.where(~done & (f > 0.0), rho, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = rho - f / df
        outside = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
        rho = np.where(done, rho, np.where(outside, 0.5 * (lo + hi), newton))
        f, df, scale = F(rho)

    # exact degenerate roots (equal states, single-wave data)
    for candidate in (rho_l, rho_r):
        f_c, _, _ = F(candidate)
        snap = ~vacuum & (np.abs(f_c) <= np.abs(f))
        rho = np.where(snap, candidate, rho)
        f = np.where(snap, f_c, f)

    rho = np.where(vacuum, 0.0, rho)
    residual = np.where(vacuum, 0.0, np.abs(f))
    floor = np.maximum(tol, 64.0 * np.finfo(float).eps * scale)
    if np.any(residual > floor):
        worst = int(np.argmax(residual - floor))
        raise RootFindError(f"Middle-state residual {residual.flat[worst]:.3e} exceeds {floor.flat[worst]:.3e}")
    return rho, vacuum, residual


def _middle_velocity(rho_s, rho_l, u_l, rho_r, u_r, p: FluidParams) -> np.ndarray:
    fl, _ = _wave_curve(np.maximum(rho_s, 1e-300), rho_l, p)
    fr, _ = _wave_curve(np.maximum(rho_s, 1e-300), rho_r, p)
    return np.where(
        rho_s <= rho_l,
        u_l - fl,
        np.where(rho_s <= rho_r, u_r + fr, 0.5 * (u_l + u_r) + 0.5 * (fr - fl)),
    )


def _shock_speeds(rho_s, u_s, rho_l, u_l, rho_r, u_r, p: FluidParams) -> Tuple[np.ndarray, np.ndarray]:
    rs = np.maximum(rho_s, 1e-300)
    j1 = np.sqrt(np.maximum(rs * rho_l * _pressure_secant(rs, rho_l, p), 0.0))
    j2 = np.sqrt(np.maximum(rs * rho_r * _pressure_secant(rs, rho_r, p), 0.0))
    return u_l - j1 / rho_l, u_r + j2 / rho_r


def _sample_arrays(rho_l, u_l, rho_r, u_r, rho_s, u_s, vacuum, xi, p: FluidParams) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized self-similar sampling of Riemann solutions at ξ"""
    xi = np.asarray(xi, dtype=float)
    c_l = _sound(rho_l, p)
    c_r = _sound(rho_r, p)
    c_s = _sound(rho_s, p)
    k = 2.0 / (p.gamma - 1.0)
    j_left = u_l + k * c_l
    j_right = u_r - k * c_r

    shock1 = ~vacuum & (rho_s > rho_l)
    shock2 = ~vacuum & (rho_s > rho_r)
    s1, s2 = _shock_speeds(rho_s, u_s, rho_l, u_l, rho_r, u_r, p)
    head1 = u_l - c_l
    tail1 = np.where(vacuum, j_left, u_s - c_s)
    tail2 = np.where(vacuum, j_right, u_s + c_s)
    head2 = u_r + c_r

    in_left = np.where(shock1, xi < s1, xi <= head1)
    in_fan1 = ~shock1 & ~in_left & (xi < tail1)
    in_right = np.where(shock2, xi > s2, xi >= head2)
    in_fan2 = ~shock2 & ~in_right & (xi > tail2)

    ratio = (p.gamma - 1.0) / (p.gamma + 1.0)
    c_fan1 = ratio * (j_left - xi)
    c_fan2 = ratio * (xi - j_right)

    mid_rho = np.where(vacuum, 0.0, rho_s)
    mid_u = np.where(vacuum, 0.0, u_s)
    rho = np.select(
        [in_left, in_fan1, in_right, in_fan2],
        [rho_l * np.ones_like(xi), _density_from_sound(c_fan1, p), rho_r * np.ones_like(xi), _density_from_sound(c_fan2, p)],
        default=mid_rho,
    )
    u = np.select(
        [in_left, in_fan1, in_right, in_fan2],
        [u_l * np.ones_like(xi), xi + c_fan1, u_r * np.ones_like(xi), xi - c_fan2],
        default=mid_u,
    )
    return rho, u


def solve_riemann(left: PrimitiveState, right: PrimitiveState, p: FluidParams) -> RiemannSolution:
    """Classify and solve the isentropic Riemann problem with states (ρ, u)"""
    rho_l, u_l = float(left[0]), float(left[1])
    rho_r, u_r = float(right[0]), float(right[1])
    if not (rho_l > 0.0 and rho_r > 0.0):
        raise DomainError(f"Riemann states need positive densities, got {rho_l} and {rho_r}")

    rl, ul, rr, ur = (np.array([v]) for v in (rho_l, u_l, rho_r, u_r))
    rho_s, vacuum, residual = _star_density(rl, ul, rr, ur, p)
    c_l = sound_speed(rho_l, p)
    c_r = sound_speed(rho_r, p)
    k = 2.0 / (p.gamma - 1.0)

    if vacuum[0]:
        logger.debug(f"Vacuum Riemann solution for left={left}, right={right}")
        return RiemannSolution(
            left=(rho_l, u_l),
            right=(rho_r, u_r),
            middle=None,
            wave1=WaveType.VACUUM,
            wave2=WaveType.VACUUM,
            wave1_speeds=(u_l - c_l, u_l + k * c_l),
            wave2_speeds=(u_r - k * c_r, u_r + c_r),
            params=p,
        )

    u_s = _middle_velocity(rho_s, rl, ul, rr, ur, p)
    s1, s2 = _shock_speeds(rho_s, u_s, rl, ul, rr, ur, p)
    rs, us = float(rho_s[0]), float(u_s[0])
    c_s = sound_speed(rs, p)

    if rs > rho_l:
        wave1, speeds1 = WaveType.SHOCK, (float(s1[0]), float(s1[0]))
    else:
        wave1, speeds1 = WaveType.RAREFACTION, (u_l - c_l, us - c_s)
    if rs > rho_r:
        wave2, speeds2 = WaveType.SHOCK, (float(s2[0]), float(s2[0]))
    else:
        wave2, speeds2 = WaveType.RAREFACTION, (us + c_s, u_r + c_r)

    return RiemannSolution(
        left=(rho_l, u_l),
        right=(rho_r, u_r),
        middle=(rs, us),
        wave1=wave1,
        wave2=wave2,
        wave1_speeds=speeds1,
        wave2_speeds=speeds2,
        params=p,
        residual=float(residual[0]),
    )


def middle_state_residual(sol: RiemannSolution) -> float:
    """|f_L(ρ*) + f_R(ρ*) + u_R - u_L| at the returned middle density"""
    if sol.middle is None:
        return 0.0
    p = sol.params
    rho_s = np.array([sol.middle[0]])
    fl, _ = _wave_curve(rho_s, np.array([sol.left[0]]), p)
    fr, _ = _wave_curve(rho_s, np.array([sol.right[0]]), p)
    return float(abs(fl[0] + fr[0] + sol.right[1] - sol.left[1]))


def sample_profile(sol: RiemannSolution, xi: Iterable[float]) -> Tuple[np.ndarray, np.ndarray]:
    """(ρ, u) of the solution at each similarity coordinate ξ = x/t"""
    xi = np.asarray(list(xi) if not isinstance(xi, np.ndarray) else xi, dtype=float)
    rho_s, u_s = sol.middle if sol.middle is not None else (0.0, 0.0)
    return _sample_arrays(
        sol.left[0], sol.left[1], sol.right[0], sol.right[1],
        np.asarray(rho_s), np.asarray(u_s), np.asarray(sol.is_vacuum), xi, sol.params,
    )


def sample(sol: RiemannSolution, xi: float) -> PrimitiveState:
    rho, u = sample_profile(sol, np.array([xi]))
    return float(rho[0]), float(u[0])


def exact_state(far: FarField, grid: Grid1D, p: FluidParams, t: float, x0: float = 0.0) -> State:
    """Exact Riemann solution for the far-field states sampled at cell centers"""
    if t <= 0.0:
        return sharp_riemann_data(far, grid, x0)
    sol = solve_riemann(far.left, far.right, p)
    rho, u = sample_profile(sol, (grid.x - x0) / t)
    return State(rho, rho * u, Formulation.EULER, t)


def genuine_nonlinearity(tau: np.ndarray, p: FluidParams) -> np.ndarray:
    """∇λ·w = P̃''(τ)/(2√(-P̃'(τ))) for P̃(τ) = P(1/τ), in closed form"""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0.0):
        raise DomainError("Specific volume must be positive")
    dp = -p.a * p.gamma * tau ** (-p.gamma - 1.0)
    d2p = p.a * p.gamma * (p.gamma + 1.0) * tau ** (-p.gamma - 2.0)
    return d2p / (2.0 * np.sqrt(-dp))


def genuine_nonlinearity_fd(tau: np.ndarray, p: FluidParams, step: float = 1e-4) -> np.ndarray:
    """Same quantity with P̃' and P̃'' from centered differences"""
    tau = np.asarray(tau, dtype=float)
    h = step * tau

    def pt(t):
        return p.a * t ** (-p.gamma)

    d1 = (pt(tau + h) - pt(tau - h)) / (2.0 * h)
    d2 = (pt(tau + h) - 2.0 * pt(tau) + pt(tau - h)) / (h * h)
    return d2 / (2.0 * np.sqrt(-d1))


def is_genuinely_nonlinear(states: Sequence[PrimitiveState], p: FluidParams, samples: int = 64) -> bool:
    """Constant sign of ∇λ·w over specific volumes spanning the given states"""
    rhos = [s[0] for s in states if s[0] > 0.0]
    tau = np.geomspace(0.5 / max(rhos), 2.0 / min(rhos), samples)
    values = genuine_nonlinearity(tau, p)
    return bool(np.all(values > 0.0) or np.all(values < 0.0))


def stationary_shock_states(rho_ahead: float, rho_behind: float, p: FluidParams) -> Tuple[PrimitiveState, PrimitiveState]:
    """Left/right states of a standing admissible 1-shock (flow from left to right)"""
    if not (0.0 < rho_ahead < rho_behind):
        raise DomainError("A compressive standing shock needs 0 < rho_ahead < rho_behind")
    dp = pressure(rho_behind, p) - pressure(rho_ahead, p)
    j = np.sqrt(rho_ahead * rho_behind * dp / (rho_behind - rho_ahead))
    return (rho_ahead, float(j / rho_ahead)), (rho_behind, float(j / rho_behind))


def _godunov_flux(rho_l, u_l, rho_r, u_r, p: FluidParams) -> Tuple[np.ndarray, np.ndarray]:
    rl = np.maximum(rho_l, 0.0)
    rr = np.maximum(rho_r, 0.0)
    both_empty = (rl <= 0.0) & (rr <= 0.0)
    # vacuum on one side: substitute a tiny density so the star solver stays in range
    tiny = 1e-200
    rl_s = np.where(rl > 0.0, rl, tiny)
    rr_s = np.where(rr > 0.0, rr, tiny)
    rho_s, vacuum, _ = _star_density(rl_s, u_l, rr_s, u_r, p)
    u_s = _middle_velocity(np.where(vacuum, 0.0, rho_s), rl_s, u_l, rr_s, u_r, p)
    rho, u = _sample_arrays(rl_s, u_l, rr_s, u_r, rho_s, u_s, vacuum, np.zeros_like(rl), p)
    rho = np.where(both_empty, 0.0, rho)
    mass = rho * u
    mom = rho * u * u + p.a * rho ** p.gamma
    return mass, mom


def godunov_trajectory(
    initial: State,
    far: FarField,
    p: FluidParams,
    grid: Grid1D,
    t_end: float,
    cfl: float = 0.8,
    snapshot_times: Sequence[float] = (),
    check_boundary: bool = True,
    boundary_rtol: float = 1e-6,
) -> Trajectory:
    """
    First-order Godunov scheme with exact interface Riemann solutions.

    Ghost cells hold the far-field states; ε in ``p`` is ignored.
    """
    if not 0.0 < cfl < 1.0:
        raise DomainError(f"cfl must lie in (0, 1), got {cfl}")
    initial.check_grid(grid)
    start = _time.perf_counter()
    h = grid.h
    rho = np.array(initial.rho, dtype=float)
    mom = np.array(initial.mom, dtype=float)
    rho_m, u_m = far.left
    rho_p, u_p = far.right

    targets = snapshot_schedule(snapshot_times, t_end)
    snapshots = [State(rho, mom, Formulation.EULER, 0.0)]
    series: Dict[str, list] = {k: [] for k in ("time", "dt", "mass", "inflow", "min_rho", "min_w_minus", "max_w_plus")}
    mass0 = float(np.sum(rho) * h)
    inflow = 0.0
    t = 0.0

    def record(dt_value: float) -> None:
        vel = np.where(rho > 0.0, mom / np.where(rho > 0.0, rho, 1.0), 0.0)
        occupied = rho > 0.0
        w_minus, w_plus = riemann_invariants(rho[occupied], vel[occupied], p)
        series["time"].append(t)
        series["dt"].append(dt_value)
        series["mass"].append(float(np.sum(rho) * h))
        series["inflow"].append(inflow)
        series["min_rho"].append(float(np.min(rho)))
        series["min_w_minus"].append(float(np.min(w_minus)))
        series["max_w_plus"].append(float(np.max(w_plus)))

    record(0.0)
    steps = 0
    for target in targets:
        while t < target:
            vel = np.where(rho > 0.0, mom / np.where(rho > 0.0, rho, 1.0), 0.0)
            speed = np.max(np.abs(vel) + p.sound_coefficient * rho ** p.theta)
            speed = max(speed, abs(u_m) + sound_speed(rho_m, p), abs(u_p) + sound_speed(rho_p, p))
            dt = cfl * h / speed
            if dt < DT_FLOOR:
                raise TimeStepUnderflow(dt, t)
            dt = min(dt, target - t)

            rl = np.concatenate(([rho_m], rho))
            ul = np.concatenate(([u_m], vel))
            rr = np.concatenate((rho, [rho_p]))
            ur = np.concatenate((vel, [u_p]))
            f_mass, f_mom = _godunov_flux(rl, ul, rr, ur, p)

            rho = rho - dt / h * (f_mass[1:] - f_mass[:-1])
            mom = mom - dt / h * (f_mom[1:] - f_mom[:-1])
            inflow += dt * (f_mass[0] - f_mass[-1])
            if np.any(rho < 0.0):
                i = int(np.argmin(rho))
                if rho[i] < -1e-12 * max(rho_m, rho_p):
                    raise NumericalError(f"Godunov density {rho[i]:.3e} in cell {i} at t={t:.6g}")
                mom = np.where(rho < 0.0, 0.0, mom)
                rho = np.maximum(rho, 0.0)
            if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(mom))):
                raise NumericalError(f"Non-finite Godunov field at t={t:.6g}")
            t = target if target - t <= dt else t + dt
            steps += 1
            record(dt)
        snapshots.append(State(rho, mom, Formulation.EULER, t))

    mass = float(np.sum(rho) * h)
    balance = abs(mass - mass0 - inflow)
    if balance > 1e-10 * max(mass0, 1e-300):
        raise NumericalError(f"Godunov mass balance off by {balance:.3e}")

    traj = Trajectory(
        grid=grid,
        far=far,
        params=p,
        formulation=Formulation.EULER,
        snapshots=snapshots,
        series={k: np.asarray(v) for k, v in series.items()},
        wall_time=_time.perf_counter() - start,
    )
    traj.contaminated = boundary_contaminated(traj.final, far, grid, p, BOUNDARY_CELLS, boundary_rtol)
    logger.info(f"Godunov run finished: n={grid.n}, steps={steps}, t={t:.6g}, wall={traj.wall_time:.3f}s")
    if check_boundary and traj.contaminated:
        raise ContaminationError(
            f"Waves reached the outer {BOUNDARY_CELLS} cells by t={t:.6g}; enlarge the domain or shorten t_end"
        )
    return traj


def godunov_reference(
    initial: State,
    far: FarField,
    p: FluidParams,
    grid: Grid1D,
    t_end: float,
    cfl: float = 0.8,
) -> State:
    """Final Godunov state at t_end"""
    return godunov_trajectory(initial, far, p, grid, t_end, cfl).final
