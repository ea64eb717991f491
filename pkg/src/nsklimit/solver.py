"""
Time integration of the Korteweg system in effective-velocity and original form
"""
import logging
import time as _time
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .config import FarField, FluidParams, FluxKind, Formulation, Integrator, SchemeConfig
from .core import (
    Grid1D,
    State,
    _pad,
    boundary_contaminated,
    effective_velocity,
    log_density,
    reference_ghosts,
    riemann_invariants,
)
from .entropy import energy_balance_terms
from .errors import DomainError, NonFiniteError, NumericalError, TimeStepUnderflow, VacuumError

logger = logging.getLogger(__name__)

DT_FLOOR = 1e-14
MASS_BALANCE_RTOL = 1e-10

Fields = Tuple[np.ndarray, np.ndarray]


def snapshot_schedule(snapshot_times: Sequence[float], t_end: float) -> List[float]:
    """Positive snapshot targets in increasing order, always ending at t_end"""
    targets = sorted({float(t) for t in snapshot_times if 0.0 < t < t_end})
    return targets + [float(t_end)]


@dataclass
class Trajectory:
    """Snapshots of one run plus per-step scalar series"""
    grid: Grid1D
    far: FarField
    params: FluidParams
    formulation: Formulation
    snapshots: List[State]
    series: Dict[str, np.ndarray] = field(default_factory=dict)
    contaminated: bool = False
    wall_time: float = 0.0

    def __post_init__(self):
        times = [s.time for s in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DomainError("Snapshot times must be strictly increasing")
        for s in self.snapshots:
            s.check_grid(self.grid)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    @property
    def initial(self) -> State:
        return self.snapshots[0]

    @property
    def final(self) -> State:
        return self.snapshots[-1]

    def effective_fields(self, state: State) -> Fields:
        """(ρ, v) of a snapshot whatever its formulation"""
        if state.formulation is Formulation.ORIGINAL_U:
            (rl, rr), _ = reference_ghosts(self.far, self.grid)
            u = state.mom / state.rho
            return state.rho, effective_velocity(state.rho, u, self.params.epsilon, self.grid, (rl[0], rr[0]))
        return state.rho, state.velocity()

    @property
    def mass_balance_error(self) -> float:
        """|Δ∫ρ - boundary inflow| relative to the initial mass"""
        if "mass" not in self.series or "inflow" not in self.series:
            return float("nan")
        mass = self.series["mass"]
        return float(abs(mass[-1] - mass[0] - self.series["inflow"][-1]) / mass[0])

    def time_reversed(self) -> "Trajectory":
        """t -> T - t with momentum negated"""
        end = self.final.time
        reversed_snaps = [
            State(s.rho, -s.mom, s.formulation, end - s.time) for s in reversed(self.snapshots)
        ]
        return Trajectory(
            grid=self.grid,
            far=FarField(
                rho_minus=self.far.rho_minus,
                u_minus=-self.far.u_minus,
                rho_plus=self.far.rho_plus,
                u_plus=-self.far.u_plus,
                L0=self.far.L0,
            ),
            params=self.params,
            formulation=self.formulation,
            snapshots=reversed_snaps,
            contaminated=self.contaminated,
        )


def numerical_flux(
    rho_pad: np.ndarray, mom_pad: np.ndarray, vel_pad: np.ndarray, p: FluidParams, kind: FluxKind
) -> Fields:
    """Interface fluxes of (ρ, m) with flux function (m, m·w + P) between consecutive cells"""
    rl, rr = rho_pad[:-1], rho_pad[1:]
    ml, mr = mom_pad[:-1], mom_pad[1:]
    wl, wr = vel_pad[:-1], vel_pad[1:]
    pl = p.a * rl ** p.gamma
    pr = p.a * rr ** p.gamma
    f_mass = 0.5 * (ml + mr)
    f_mom = 0.5 * (ml * wl + pl + mr * wr + pr)
    if kind is FluxKind.CENTRAL:
        return f_mass, f_mom
    speed_l = np.abs(wl) + p.sound_coefficient * rl ** p.theta
    speed_r = np.abs(wr) + p.sound_coefficient * rr ** p.theta
    if kind is FluxKind.RUSANOV:
        s = np.maximum(speed_l, speed_r)
    else:
        s = max(np.max(speed_l), np.max(speed_r))
    return f_mass - 0.5 * s * (rr - rl), f_mom - 0.5 * s * (mr - ml)


def _require_positive(rho: np.ndarray, grid: Grid1D, time: float) -> None:
    bad = np.flatnonzero(~(rho > 0.0))
    if bad.size:
        i = int(bad[0])
        raise VacuumError(i, float(grid.x[i]), time, float(rho[i]))


def _effective_terms(
    rho: np.ndarray, mom: np.ndarray, far: FarField, p: FluidParams, grid: Grid1D, kind: FluxKind, time: float = 0.0
) -> Tuple[np.ndarray, np.ndarray, float]:
    _require_positive(rho, grid, time)
    h = grid.h
    (rgl, rgr), (vgl, vgr) = reference_ghosts(far, grid)
    rho_pad = _pad(rho, rgl, rgr)
    mom_pad = _pad(mom, rgl * vgl, rgr * vgr)
    vel_pad = mom_pad / rho_pad
    f_mass, f_mom = numerical_flux(rho_pad, mom_pad, vel_pad, p, kind)
    drho = -(f_mass[1:] - f_mass[:-1]) / h
    dmom = -(f_mom[1:] - f_mom[:-1]) / h
    inflow = f_mass[0] - f_mass[-1]
    if p.epsilon > 0.0:
        eps_h2 = p.epsilon / (h * h)
        drho = drho + eps_h2 * (rho_pad[2:] - 2.0 * rho + rho_pad[:-2])
        dmom = dmom + eps_h2 * (mom_pad[2:] - 2.0 * mom + mom_pad[:-2])
        inflow += p.epsilon / h * ((rho_pad[-1] - rho[-1]) - (rho[0] - rho_pad[0]))
    return drho, dmom, float(inflow)


def rhs_euler(state: State, far: FarField, p: FluidParams, grid: Grid1D, flux: FluxKind = FluxKind.RUSANOV) -> Fields:
    """Semi-discrete isentropic Euler operator on (ρ, ρv)"""
    state.check_grid(grid)
    drho, dmom, _ = _effective_terms(state.rho, state.mom, far, p.with_epsilon(0.0), grid, flux, state.time)
    return drho, dmom


def rhs_effective(state: State, far: FarField, p: FluidParams, grid: Grid1D, flux: FluxKind = FluxKind.RUSANOV) -> Fields:
    """
    Time derivative of (ρ, ρv) for ρ_t + (ρv)_x = ερ_xx,
    (ρv)_t + (ρv² + P)_x = ε(ρv)_xx.
    """
    state.check_grid(grid)
    drho, dmom, _ = _effective_terms(state.rho, state.mom, far, p, grid, flux, state.time)
    return drho, dmom


def _original_terms(
    rho: np.ndarray,
    mom: np.ndarray,
    far: FarField,
    p: FluidParams,
    grid: Grid1D,
    kind: FluxKind,
    viscosity_factor: float,
    time: float = 0.0,
) -> Tuple[np.ndarray, np.ndarray, float]:
    _require_positive(rho, grid, time)
    h = grid.h
    (rgl, rgr), (ugl, ugr) = reference_ghosts(far, grid, layers=2)
    u = mom / rho
    rho_pad = _pad(rho, rgl[-1], rgr[0])
    u_pad = _pad(u, ugl[-1], ugr[0])
    mom_pad = rho_pad * u_pad
    f_mass, f_mom = numerical_flux(rho_pad, mom_pad, u_pad, p, kind)
    drho = -(f_mass[1:] - f_mass[:-1]) / h
    dmom = -(f_mom[1:] - f_mom[:-1]) / h
    if p.epsilon > 0.0:
        eps = p.epsilon
        rho_face = 0.5 * (rho_pad[1:] + rho_pad[:-1])
        shear = rho_face * (u_pad[1:] - u_pad[:-1])
        dmom = dmom + viscosity_factor * eps * (shear[1:] - shear[:-1]) / (h * h)
        ln_rho = log_density(_pad(rho, rgl, rgr))
        curvature = (ln_rho[2:] - 2.0 * ln_rho[1:-1] + ln_rho[:-2]) / (h * h)
        stress = _pad(rho, rgl[-1], rgr[0]) * curvature
        dmom = dmom + eps * eps * (stress[2:] - stress[:-2]) / (2.0 * h)
    return drho, dmom, float(f_mass[0] - f_mass[-1])


def rhs_original(
    state: State,
    far: FarField,
    p: FluidParams,
    grid: Grid1D,
    flux: FluxKind = FluxKind.RUSANOV,
    viscosity_factor: float = 2.0,
) -> Fields:
    """
    Time derivative of (ρ, ρu) for the capillary system with κ = ε²/ρ:
    momentum gets viscosity_factor·ε(ρu_x)_x + ε²∂x(ρ ∂xx ln ρ).
    """
    state.check_grid(grid)
    drho, dmom, _ = _original_terms(state.rho, state.mom, far, p, grid, flux, viscosity_factor, state.time)
    return drho, dmom


def stable_dt(state: State, p: FluidParams, grid: Grid1D, cfg: SchemeConfig) -> float:
    """min(cfl_hyp·h/max(|w|+c), cfl_par·h²/(2ν)) with ν the largest diffusion coefficient"""
    vel = state.velocity()
    speed = float(np.max(np.abs(vel) + p.sound_coefficient * state.rho ** p.theta))
    h = grid.h
    dt = cfg.cfl_hyp * h / speed if speed > 0.0 else np.inf
    if p.epsilon > 0.0:
        nu = p.epsilon
        if state.formulation is Formulation.ORIGINAL_U:
            nu *= max(1.0, cfg.original_viscosity_factor)
        dt = min(dt, cfg.cfl_par * h * h / (2.0 * nu))
    if not np.isfinite(dt) or dt < DT_FLOOR:
        raise TimeStepUnderflow(float(dt), state.time)
    return float(dt)


def _check_far_field_consistency(initial: State, far: FarField, grid: Grid1D, p: FluidParams) -> None:
    (rgl, rgr), (vgl, vgr) = reference_ghosts(far, grid)
    tol = 1e-8 * max(far.rho_minus, far.rho_plus)
    if abs(initial.rho[0] - rgl[0]) > tol or abs(initial.rho[-1] - rgr[0]) > tol:
        raise DomainError(
            f"Initial density at the boundaries ({initial.rho[0]:.6g}, {initial.rho[-1]:.6g}) "
            f"does not match the far field ({rgl[0]:.6g}, {rgr[0]:.6g})"
        )
    vel = initial.velocity()
    vtol = 1e-8 * max(1.0, abs(far.u_minus), abs(far.u_plus))
    if abs(vel[0] - vgl[0]) > vtol or abs(vel[-1] - vgr[0]) > vtol:
        raise DomainError("Initial velocity at the boundaries does not match the far field")


class _SeriesRecorder:
    """Accumulates per-step scalars during a run"""

    def __init__(self, far: FarField, p: FluidParams, grid: Grid1D, formulation: Formulation):
        self.far = far
        self.p = p
        self.grid = grid
        self.formulation = formulation
        self.data: Dict[str, List[float]] = {
            k: [] for k in (
                "time", "dt", "mass", "inflow", "energy", "dissipation",
                "reference_work", "min_rho", "min_w_minus", "max_w_plus",
            )
        }
        (rl, rr), _ = reference_ghosts(far, grid)
        self._rho_ghosts = (rl[0], rr[0])

    def record(self, t: float, dt: float, rho: np.ndarray, mom: np.ndarray, inflow: float) -> None:
        if self.formulation is Formulation.ORIGINAL_U:
            v = effective_velocity(rho, mom / rho, self.p.epsilon, self.grid, self._rho_ghosts)
        else:
            v = mom / rho
        energy, dissipation, work = energy_balance_terms(rho, v, self.far, self.p, self.grid)
        w_minus, w_plus = riemann_invariants(rho, v, self.p)
        d = self.data
        d["time"].append(t)
        d["dt"].append(dt)
        d["mass"].append(float(np.sum(rho) * self.grid.h))
        d["inflow"].append(inflow)
        d["energy"].append(energy)
        d["dissipation"].append(dissipation)
        d["reference_work"].append(work)
        d["min_rho"].append(float(np.min(rho)))
        d["min_w_minus"].append(float(np.min(w_minus)))
        d["max_w_plus"].append(float(np.max(w_plus)))

    def arrays(self) -> Dict[str, np.ndarray]:
        return {k: np.asarray(v, dtype=float) for k, v in self.data.items()}


def run(initial: State, far: FarField, p: FluidParams, grid: Grid1D, cfg: SchemeConfig) -> Trajectory:
    """
    Integrate from ``initial`` to cfg.t_end with an explicit two-stage scheme.

    Snapshots are taken at t = 0, at every requested snapshot time and at
    t_end. Raises VacuumError, TimeStepUnderflow or NonFiniteError.
    """
    initial.check_grid(grid)
    formulation = initial.formulation
    if formulation is Formulation.EULER:
        raise DomainError("Euler states are advanced with the Godunov reference scheme")
    _check_far_field_consistency(initial, far, grid, p)

    if formulation is Formulation.EFFECTIVE_V:
        def terms(rho, mom, t):
            return _effective_terms(rho, mom, far, p, grid, cfg.flux, t)
    else:
        def terms(rho, mom, t):
            return _original_terms(rho, mom, far, p, grid, cfg.flux, cfg.original_viscosity_factor, t)

    start = _time.perf_counter()
    logger.info(
        f"Starting {formulation.value} run: n={grid.n}, h={grid.h:.4g}, eps={p.epsilon:.4g}, "
        f"gamma={p.gamma:.4g}, t_end={cfg.t_end:.4g}, flux={cfg.flux.value}"
    )
    rho = np.array(initial.rho, dtype=float)
    mom = np.array(initial.mom, dtype=float)
    t = 0.0
    inflow = 0.0
    steps = 0
    recorder = _SeriesRecorder(far, p, grid, formulation)
    recorder.record(t, 0.0, rho, mom, inflow)
    snapshots = [State(rho, mom, formulation, 0.0)]

    for target in snapshot_schedule(cfg.snapshot_times, cfg.t_end):
        while t < target:
            dt = stable_dt(State(rho, mom, formulation, t), p, grid, cfg)
            dt = min(dt, target - t)
            k1_rho, k1_mom, in1 = terms(rho, mom, t)
            if cfg.integrator is Integrator.SSP2:
                rho1 = rho + dt * k1_rho
                mom1 = mom + dt * k1_mom
                _require_positive(rho1, grid, t + dt)
                k2_rho, k2_mom, in2 = terms(rho1, mom1, t + dt)
                rho = 0.5 * rho + 0.5 * (rho1 + dt * k2_rho)
                mom = 0.5 * mom + 0.5 * (mom1 + dt * k2_mom)
                inflow += 0.5 * dt * (in1 + in2)
            else:
                rho_h = rho + 0.5 * dt * k1_rho
                mom_h = mom + 0.5 * dt * k1_mom
                _require_positive(rho_h, grid, t + 0.5 * dt)
                k2_rho, k2_mom, in2 = terms(rho_h, mom_h, t + 0.5 * dt)
                rho = rho + dt * k2_rho
                mom = mom + dt * k2_mom
                inflow += dt * in2
            t = target if target - t <= dt else t + dt
            if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(mom))):
                raise NonFiniteError(f"Non-finite field after step {steps} at t={t:.6g}")
            _require_positive(rho, grid, t)
            steps += 1
            if steps > cfg.max_steps:
                raise NumericalError(f"Step limit {cfg.max_steps} reached at t={t:.6g}")
            recorder.record(t, dt, rho, mom, inflow)
        snapshots.append(State(rho, mom, formulation, t))
        logger.debug(f"Snapshot at t={t:.6g} after {steps} steps")

    traj = Trajectory(
        grid=grid,
        far=far,
        params=p,
        formulation=formulation,
        snapshots=snapshots,
        series=recorder.arrays(),
        wall_time=_time.perf_counter() - start,
    )
    traj.contaminated = boundary_contaminated(
        traj.final, far, grid, p, cfg.contamination_cells, cfg.contamination_rtol
    )
    if traj.contaminated:
        logger.warning(
            f"Waves reached the outer {cfg.contamination_cells} cells by t={t:.6g}; monitors on this run are unreliable"
        )
    balance = traj.mass_balance_error
    if balance > MASS_BALANCE_RTOL:
        logger.warning(f"Mass balance error {balance:.3e} exceeds {MASS_BALANCE_RTOL:.0e}")
    logger.info(f"Run finished: {steps} steps, wall={traj.wall_time:.3f}s, min rho={np.min(traj.series['min_rho']):.6g}")
    return traj

