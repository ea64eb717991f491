"""
Vanishing-viscosity studies and uniform-bound monitors for nsklimit
"""
import logging
import math
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import FarField, FluidParams, Formulation, RunConfig
from .core import (
    Grid1D,
    State,
    l1_distance,
    mollified_riemann_data,
    original_velocity,
    reference_ghosts,
    reference_profile,
    relative_energy,
    riemann_invariants,
)
from .entropy import (
    capillary_integral,
    default_test_functions,
    energy_balance_terms,
    entropy_residual,
)
from .errors import ContaminationError, DomainError, NskError
from .riemann import exact_state, solve_riemann
from .solver import Trajectory, run

logger = logging.getLogger(__name__)

ENERGY_TOL = 1e-3
WAVE_SPAN_FRACTION = 0.25
GAMMA_THRESHOLD = 5.0 / 3.0


@dataclass
class ConditionHReport:
    """Integrals that must stay finite for admissible initial data"""
    passed: bool
    mass_deviation: float = float("nan")
    energy: float = float("nan")
    capillary: float = float("nan")
    caps: Tuple[float, float, float] = (math.inf, math.inf, math.inf)
    message: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "mass_deviation": self.mass_deviation,
            "energy": self.energy,
            "capillary": self.capillary,
            "caps": list(self.caps),
            "message": self.message,
        }


def _original_form_velocity(state: State, p: FluidParams, grid: Grid1D, rho_ghosts: Tuple[float, float]) -> np.ndarray:
    if state.formulation is Formulation.EFFECTIVE_V:
        return original_velocity(state.rho, state.velocity(), p.epsilon, grid, rho_ghosts)
    return state.velocity()


def initial_data_condition_H(
    state: State,
    far: FarField,
    p: FluidParams,
    grid: Grid1D,
    caps: Tuple[float, float, float] = (1e8, 1e8, 1e8),
) -> ConditionHReport:
    """
    ∫ρ|u - ū|, the relative energy and ε²∫(∂x√ρ)² of the initial data,
    each compared against its cap.
    """
    state.check_grid(grid)
    bad = np.flatnonzero(~(state.rho > 0.0))
    if bad.size:
        i = int(bad[0])
        return ConditionHReport(
            passed=False,
            caps=caps,
            message=f"Density {state.rho[i]!r} at x={grid.x[i]:.6g} is not positive",
        )

    rho_bar, u_bar = reference_profile(far, grid.x)
    (rl, rr), _ = reference_ghosts(far, grid)
    u = _original_form_velocity(state, p, grid, (rl[0], rr[0]))
    h = grid.h
    mass_deviation = float(h * np.sum(state.rho * np.abs(u - u_bar)))
    energy = float(h * np.sum(0.5 * state.rho * (u - u_bar) ** 2 + relative_energy(state.rho, rho_bar, p)))
    capillary = capillary_integral(state.rho, grid, p.epsilon, (rl[0], rr[0]))

    values = (mass_deviation, energy, capillary)
    names = ("mass deviation", "energy", "capillary energy")
    failed = [
        f"{name} {value:.6g} exceeds {cap:.3g}"
        for name, value, cap in zip(names, values, caps)
        if not (np.isfinite(value) and value <= cap)
    ]
    return ConditionHReport(
        passed=not failed,
        mass_deviation=mass_deviation,
        energy=energy,
        capillary=capillary,
        caps=caps,
        message="; ".join(failed),
    )


@dataclass
class BoundsReport:
    """Uniform-in-ε quantities of one run"""
    times: List[float]
    energy: List[float]
    dissipation_integral: float
    reference_work_integral: float
    energy_violation: float
    i_high: float
    i_cube: float
    w_minus_min: float
    w_plus_max: float
    invariant_violation: float
    invariant_spread: float
    entropy_residuals: Dict[str, float] = field(default_factory=dict)
    min_density: float = float("nan")
    mass_balance_error: float = float("nan")
    contaminated: bool = False
    window: Tuple[float, float] = (0.0, 0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "window": list(self.window),
            "times": list(self.times),
            "energy": list(self.energy),
            "dissipation_integral": self.dissipation_integral,
            "reference_work_integral": self.reference_work_integral,
            "energy_violation": self.energy_violation,
            "i_high": self.i_high,
            "i_cube": self.i_cube,
            "w_minus_min": self.w_minus_min,
            "w_plus_max": self.w_plus_max,
            "invariant_violation": self.invariant_violation,
            "invariant_spread": self.invariant_spread,
            "entropy_residuals": dict(self.entropy_residuals),
            "min_density": self.min_density,
            "mass_balance_error": self.mass_balance_error,
            "contaminated": self.contaminated,
        }


def _time_weights(times: np.ndarray) -> np.ndarray:
    weights = np.zeros(len(times))
    if len(times) > 1:
        dt = np.diff(times)
        weights[:-1] += 0.5 * dt
        weights[1:] += 0.5 * dt
    return weights


def _invariants(traj: Trajectory, state: State) -> Tuple[np.ndarray, np.ndarray]:
    rho, v = traj.effective_fields(state)
    return riemann_invariants(rho, v, traj.params)


def invariant_region_monitor(traj: Trajectory) -> float:
    """Largest excursion of v ∓ b_inv ρ^θ outside the range spanned at t = 0"""
    w_minus0, w_plus0 = _invariants(traj, traj.initial)
    lower, upper = float(np.min(w_minus0)), float(np.max(w_plus0))
    lowest, highest = lower, upper
    for snap in traj.snapshots[1:]:
        w_minus, w_plus = _invariants(traj, snap)
        lowest = min(lowest, float(np.min(w_minus)))
        highest = max(highest, float(np.max(w_plus)))
    if "min_w_minus" in traj.series and len(traj.series["min_w_minus"]):
        lowest = min(lowest, float(np.min(traj.series["min_w_minus"])))
        highest = max(highest, float(np.max(traj.series["max_w_plus"])))
    return max(0.0, highest - upper, lower - lowest)


def initial_invariant_spread(traj: Trajectory) -> float:
    w_minus0, w_plus0 = _invariants(traj, traj.initial)
    return float(np.max(w_plus0) - np.min(w_minus0))


def _energy_series(traj: Trajectory) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    s = traj.series
    if all(k in s for k in ("time", "energy", "dissipation", "reference_work")) and len(s["time"]):
        return s["time"], s["energy"], s["dissipation"], s["reference_work"]
    rows = []
    for snap in traj.snapshots:
        rho, v = traj.effective_fields(snap)
        rows.append(energy_balance_terms(rho, v, traj.far, traj.params, traj.grid))
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    return traj.times, arr[:, 0], arr[:, 1], arr[:, 2]


def energy_monitor(traj: Trajectory, tol: float = ENERGY_TOL) -> float:
    """
    Largest increase of B(t) = E2(t) + ∫(D - R) once a slack of
    tol·E2(0) per unit time is allowed. Zero means non-increasing.
    """
    times, energy, dissipation, work = _energy_series(traj)
    if len(times) < 2:
        return 0.0
    rate = dissipation - work
    budget = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(times) * (rate[1:] + rate[:-1]))])
    balance = energy + budget - tol * energy[0] * (times - times[0])
    running_min = np.minimum.accumulate(balance)
    excess = balance[1:] - running_min[:-1]
    return float(max(0.0, np.max(excess)))


def _window(grid: Grid1D, window: Optional[Tuple[float, float]]) -> Tuple[float, float]:
    if window is None:
        quarter = 0.25 * grid.length
        return (grid.x_min + quarter, grid.x_max - quarter)
    a, b = window
    if not grid.x_min <= a < b <= grid.x_max:
        raise DomainError(f"Window [{a}, {b}] is not inside the domain")
    return (float(a), float(b))


def uniform_bounds(
    traj: Trajectory,
    window: Optional[Tuple[float, float]] = None,
    entropy_checks: bool = True,
) -> BoundsReport:
    """Energy, higher integrability and invariant-region quantities of a run"""
    if traj.contaminated:
        raise ContaminationError(
            "Trajectory is contaminated by the domain boundary; enlarge the domain or shorten t_end"
        )
    grid = traj.grid
    p = traj.params
    a, b = _window(grid, window)
    weights = grid.window_weights(a, b)
    times = traj.times
    tw = _time_weights(times)

    high = []
    cube = []
    for snap in traj.snapshots:
        rho, v = traj.effective_fields(snap)
        high.append(np.sum(weights * rho ** (p.gamma + 1.0)))
        cube.append(np.sum(weights * (rho ** (p.gamma + p.theta) + rho * np.abs(v) ** 3)))
    i_high = float(np.dot(tw, high))
    i_cube = float(np.dot(tw, cube))

    t_series, energy, dissipation, work = _energy_series(traj)
    step_w = _time_weights(t_series)
    w_minus0, w_plus0 = _invariants(traj, traj.initial)
    lowest = min(float(np.min(_invariants(traj, s)[0])) for s in traj.snapshots)
    highest = max(float(np.max(_invariants(traj, s)[1])) for s in traj.snapshots)
    if "min_w_minus" in traj.series and len(traj.series["min_w_minus"]):
        lowest = min(lowest, float(np.min(traj.series["min_w_minus"])))
        highest = max(highest, float(np.max(traj.series["max_w_plus"])))

    residuals: Dict[str, float] = {}
    if entropy_checks and len(traj.snapshots) >= 3:
        residuals["mechanical"] = entropy_residual(traj)
        for psi in default_test_functions(traj.far):
            residuals[psi.label] = entropy_residual(traj, psi)

    report = BoundsReport(
        times=[float(t) for t in times],
        energy=[float(e) for e in np.interp(times, t_series, energy)],
        dissipation_integral=float(np.dot(step_w, dissipation)),
        reference_work_integral=float(np.dot(step_w, work)),
        energy_violation=energy_monitor(traj),
        i_high=i_high,
        i_cube=i_cube,
        w_minus_min=lowest,
        w_plus_max=highest,
        invariant_violation=invariant_region_monitor(traj),
        invariant_spread=float(np.max(w_plus0) - np.min(w_minus0)),
        entropy_residuals=residuals,
        min_density=lower_density_bound(traj),
        mass_balance_error=traj.mass_balance_error,
        contaminated=traj.contaminated,
        window=(a, b),
    )
    logger.info(
        f"Bounds on [{a:g}, {b:g}]: I_high={i_high:.6g}, I_cube={i_cube:.6g}, "
        f"invariant violation={report.invariant_violation:.3e}, energy violation={report.energy_violation:.3e}"
    )
    return report


@dataclass
class ConvergenceRow:
    epsilon: float
    n: int
    l1_rho: float = float("nan")
    l1_mom: float = float("nan")
    runtime: float = 0.0
    status: str = "ok"
    error: str = ""
    bounds: Optional[BoundsReport] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "n": self.n,
            "l1_rho": self.l1_rho,
            "l1_mom": self.l1_mom,
            "runtime": self.runtime,
            "status": self.status,
            "error": self.error,
            "bounds": None if self.bounds is None else self.bounds.to_dict(),
        }


@dataclass
class ConvergenceTable:
    """L¹ distance of NSK runs to the Euler reference, one row per ε"""
    rows: List[ConvergenceRow]
    reference: str = "exact Riemann solution"
    window: Tuple[float, float] = (0.0, 0.0)
    t_end: float = 0.0

    def __post_init__(self):
        self.rows.sort(key=lambda r: -r.epsilon)
        eps = [r.epsilon for r in self.rows]
        if len(set(eps)) != len(eps):
            raise DomainError("Convergence rows must have distinct epsilons")

    @property
    def ok_rows(self) -> List[ConvergenceRow]:
        return [r for r in self.rows if r.status == "ok"]

    def is_decreasing(self) -> bool:
        """Strict decrease of the density distance down the successful rows"""
        dist = [r.l1_rho for r in self.ok_rows]
        return len(dist) == len(self.rows) and all(b < a for a, b in zip(dist, dist[1:]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "reference": self.reference,
            "window": list(self.window),
            "t_end": self.t_end,
            "decreasing": self.is_decreasing(),
            "rows": [r.to_dict() for r in self.rows],
        }


def study_grid(cfg: RunConfig, epsilon: float) -> Grid1D:
    """Grid with h ≤ ε/cells_per_epsilon, never coarser than the configured one"""
    n = math.ceil((cfg.x_max - cfg.x_min) * cfg.cells_per_epsilon / epsilon)
    return Grid1D(cfg.x_min, cfg.x_max, max(cfg.n, n))


def check_wave_span(cfg: RunConfig, window: Tuple[float, float]) -> None:
    """Waves of the limit solution must cover a quarter of the comparison window"""
    far = cfg.far
    if far.left == far.right:
        return
    p = cfg.fluid
    sol = solve_riemann(far.left, far.right, p)
    span = (sol.wave2_speeds[1] - sol.wave1_speeds[0]) * cfg.scheme.t_end
    if span < WAVE_SPAN_FRACTION * (window[1] - window[0]):
        raise DomainError(
            f"Waves span {span:.4g} at t_end={cfg.scheme.t_end:g}, less than "
            f"{WAVE_SPAN_FRACTION:.0%} of the window [{window[0]:g}, {window[1]:g}]; increase t_end"
        )


def run_study_row(cfg: RunConfig, epsilon: float, window: Tuple[float, float]) -> ConvergenceRow:
    """One NSK run at ε compared against the exact Riemann solution; failures become the row status"""
    grid = study_grid(cfg, epsilon)
    row = ConvergenceRow(epsilon=epsilon, n=grid.n)
    start = _time.perf_counter()
    try:
        p = cfg.fluid.with_epsilon(epsilon)
        formulation = Formulation(cfg.formulation)
        initial = mollified_riemann_data(cfg.far, grid, p, formulation, width=cfg.mollify_width)
        traj = run(initial, cfg.far, p, grid, cfg.scheme)
        reference = exact_state(cfg.far, grid, p, traj.final.time)
        row.l1_rho = l1_distance(traj.final.rho, reference.rho, grid, window)
        row.l1_mom = l1_distance(traj.final.mom, reference.mom, grid, window)
        row.bounds = uniform_bounds(traj, window)
    except NskError as e:
        row.status = type(e).__name__
        row.error = str(e)
        logger.error(f"Study row eps={epsilon:g} failed: {e}")
    row.runtime = _time.perf_counter() - start
    logger.info(f"eps={epsilon:g}, n={grid.n}: L1(rho)={row.l1_rho:.6g}, L1(mom)={row.l1_mom:.6g} [{row.status}]")
    return row


class SweepRunner:
    """Runs study rows sequentially or in a process pool"""

    def __init__(self, max_workers: int = 1):
        self.max_workers = max(1, int(max_workers))

    def map(self, cfg: RunConfig, epsilons: Sequence[float], window: Tuple[float, float]) -> List[ConvergenceRow]:
        if self.max_workers == 1 or len(epsilons) < 2:
            return [run_study_row(cfg, eps, window) for eps in epsilons]
        logger.info(f"Running {len(epsilons)} study rows on {self.max_workers} workers")
        with ProcessPoolExecutor(max_workers=self.max_workers) as pool:
            futures = [pool.submit(run_study_row, cfg, eps, window) for eps in epsilons]
            return [f.result() for f in futures]


def convergence_study(
    cfg: RunConfig,
    epsilons: Optional[Sequence[float]] = None,
    runner: Optional[SweepRunner] = None,
) -> ConvergenceTable:
    """
    Sweep ε downward on fixed Riemann data and tabulate the L¹ distance
    of the NSK solution at t_end to the exact Euler solution.
    """
    eps = list(epsilons if epsilons is not None else cfg.epsilons)
    if not eps:
        raise DomainError("No epsilons given for the convergence study")
    if any(e <= 0.0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise DomainError("epsilons must be positive and strictly decreasing")
    if cfg.fluid.gamma <= GAMMA_THRESHOLD:
        logger.warning(
            f"gamma={cfg.fluid.gamma:g} <= 5/3: convergence of the vanishing-capillarity limit "
            "is only established for gamma > 5/3; monitors still run"
        )
    grid = Grid1D(cfg.x_min, cfg.x_max, cfg.n)
    window = _window(grid, cfg.window)
    check_wave_span(cfg, window)

    runner = runner or SweepRunner()
    rows = runner.map(cfg, eps, window)
    table = ConvergenceTable(rows=rows, window=window, t_end=cfg.scheme.t_end)
    if not table.is_decreasing():
        logger.warning("L1 distance is not strictly decreasing in epsilon")
    return table


def lower_density_bound(traj: Trajectory) -> float:
    """Smallest density seen during a run"""
    if "min_rho" in traj.series and len(traj.series["min_rho"]):
        return float(np.min(traj.series["min_rho"]))
    return min(float(np.min(s.rho)) for s in traj.snapshots)
