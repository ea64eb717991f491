"""
CSV and JSON artifacts for nsklimit runs
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from .config import FarField, FluidParams, Formulation
from .core import Grid1D, State, original_velocity, reference_ghosts
from .errors import ConfigError
from .harness import ConvergenceTable
from .riemann import RiemannSolution
from .solver import Trajectory

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
RUN_FILE = "run.json"
SERIES_FILE = "series.csv"


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def jsonable(obj: Any) -> Any:
    """Plain JSON types; NaN and infinities become null"""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_json(path: Union[str, Path], payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_frame(frame: pd.DataFrame, path: Path, header_line: Optional[str] = None) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        if header_line is not None:
            handle.write(header_line + "\n")
        frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def snapshot_frame(traj: Trajectory, state: State) -> pd.DataFrame:
    """Columns x, rho, mom, v, u for one snapshot"""
    grid = traj.grid
    rho, v = traj.effective_fields(state)
    if state.formulation is Formulation.ORIGINAL_U:
        u = state.velocity()
    elif state.formulation is Formulation.EFFECTIVE_V:
        (rl, rr), _ = reference_ghosts(traj.far, grid)
        u = original_velocity(rho, v, traj.params.epsilon, grid, (rl[0], rr[0]))
    else:
        u = v
    return pd.DataFrame({"x": grid.x, "rho": state.rho, "mom": state.mom, "v": v, "u": u})


def run_metadata(traj: Trajectory) -> Dict[str, Any]:
    return {
        "params": traj.params.model_dump(),
        "far": traj.far.model_dump(),
        "grid": {"x_min": traj.grid.x_min, "x_max": traj.grid.x_max, "n": traj.grid.n, "h": traj.grid.h},
        "formulation": traj.formulation.value,
        "times": [s.time for s in traj.snapshots],
        "wall_time": traj.wall_time,
        "contaminated": traj.contaminated,
        "mass_balance_error": traj.mass_balance_error,
        "steps": max(0, len(traj.series.get("time", [])) - 1),
    }


def save_trajectory(traj: Trajectory, directory: Union[str, Path], extra: Optional[Dict[str, Any]] = None) -> Path:
    """Write snapshot_XXX.csv files, series.csv and run.json into ``directory``"""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for k, snap in enumerate(traj.snapshots):
        _write_frame(snapshot_frame(traj, snap), out / f"snapshot_{k:03d}.csv")
    if traj.series:
        _write_frame(pd.DataFrame({k: np.asarray(v) for k, v in traj.series.items()}), out / SERIES_FILE)
    meta = run_metadata(traj)
    if extra:
        meta.update(extra)
    write_json(out / RUN_FILE, meta)
    logger.info(f"Saved {len(traj.snapshots)} snapshots to {out}")
    return out


def load_trajectory(directory: Union[str, Path]) -> Trajectory:
    """Rebuild a Trajectory written by save_trajectory"""
    src = Path(directory)
    meta_path = src / RUN_FILE
    if not meta_path.is_file():
        raise ConfigError(f"No {RUN_FILE} in {src}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        grid = Grid1D(meta["grid"]["x_min"], meta["grid"]["x_max"], int(meta["grid"]["n"]))
        params = FluidParams(**meta["params"])
        far = FarField(**meta["far"])
        formulation = Formulation(meta["formulation"])
        times = [float(t) for t in meta["times"]]
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"Malformed {meta_path}: {e}") from e

    snapshots = []
    for k, t in enumerate(times):
        path = src / f"snapshot_{k:03d}.csv"
        if not path.is_file():
            raise ConfigError(f"Missing snapshot file {path}")
        frame = pd.read_csv(path, float_precision="round_trip")
        snapshots.append(State(frame["rho"].to_numpy(), frame["mom"].to_numpy(), formulation, t))

    series: Dict[str, np.ndarray] = {}
    if (src / SERIES_FILE).is_file():
        frame = pd.read_csv(src / SERIES_FILE, float_precision="round_trip")
        series = {c: frame[c].to_numpy(dtype=float) for c in frame.columns}

    traj = Trajectory(
        grid=grid, far=far, params=params, formulation=formulation,
        snapshots=snapshots, series=series, wall_time=float(meta.get("wall_time") or 0.0),
    )
    traj.contaminated = bool(meta.get("contaminated", False))
    return traj


def write_riemann_csv(
    path: Union[str, Path],
    sol: RiemannSolution,
    xi: np.ndarray,
    rho: np.ndarray,
    u: np.ndarray,
    t: Optional[float] = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(riemann_csv_text(sol, xi, rho, u, t), encoding="utf-8")
    return path


def riemann_csv_text(
    sol: RiemannSolution, xi: np.ndarray, rho: np.ndarray, u: np.ndarray, t: Optional[float] = None
) -> str:
    """
    `# {json}` header with the wave structure, then xi,rho,u.

    With a sampling time t the header records it and an x = ξt column follows u.
    """
    meta = sol.to_dict()
    columns = {"xi": xi, "rho": rho, "u": u}
    if t is not None:
        meta["t"] = t
        columns["x"] = np.asarray(xi, dtype=float) * t
    header = "# " + json.dumps(jsonable(meta), sort_keys=True)
    body = pd.DataFrame(columns).to_csv(
        index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )
    return header + "\n" + body


def write_convergence(directory: Union[str, Path], table: ConvergenceTable) -> Path:
    """convergence.csv, convergence.json and one report_eps_<k>.json per row"""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        {
            "epsilon": [r.epsilon for r in table.rows],
            "n": [r.n for r in table.rows],
            "l1_rho": [r.l1_rho for r in table.rows],
            "l1_mom": [r.l1_mom for r in table.rows],
            "status": [r.status for r in table.rows],
        }
    )
    _write_frame(frame, out / "convergence.csv")
    write_json(out / "convergence.json", table.to_dict())
    for k, row in enumerate(table.rows):
        write_json(out / f"report_eps_{k}.json", row.to_dict())
    logger.info(f"Wrote convergence table with {len(table.rows)} rows to {out}")
    return out
