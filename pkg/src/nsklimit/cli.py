"""
Command-line interface for nsklimit
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from .config import (
    FluidParams,
    Formulation,
    RunConfig,
    Settings,
    dump_run_config,
    kinetic_pressure_coefficient,
    load_run_config,
)
from .core import Grid1D, mollified_riemann_data
from .entropy import TestFunction, entropy_residual, mechanical_energy_pair
from .errors import ConfigError, ContaminationError, DomainError, NskError, NumericalError
from .harness import (
    GAMMA_THRESHOLD,
    SweepRunner,
    convergence_study,
    energy_monitor,
    initial_data_condition_H,
    invariant_region_monitor,
    initial_invariant_spread,
    uniform_bounds,
)
from .reports import (
    load_trajectory,
    riemann_csv_text,
    save_trajectory,
    write_convergence,
    write_json,
    write_riemann_csv,
)
from .riemann import sample_profile, solve_riemann
from .solver import run

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

INVARIANT_RTOL = 1e-3
MASS_BALANCE_RTOL = 1e-10
ENTROPY_FACTOR = 10.0


def configure_logging(settings: Settings, level: Optional[str] = None) -> None:
    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper(), logging.INFO),
        format=settings.log_format,
        force=True,
    )


def _output_dir(args: argparse.Namespace, settings: Settings, default_name: str) -> Path:
    out = Path(args.out) if args.out else settings.output_dir / default_name
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args: argparse.Namespace, settings: Settings) -> int:
    """One NSK run from a config file; writes snapshots, run.json and config.cfg"""
    cfg = load_run_config(args.config)
    out = _output_dir(args, settings, "simulate")
    (out / "config.cfg").write_text(dump_run_config(cfg), encoding="utf-8")

    grid = Grid1D(cfg.x_min, cfg.x_max, cfg.n)
    formulation = Formulation(cfg.formulation)
    initial = mollified_riemann_data(cfg.far, grid, cfg.fluid, formulation, width=cfg.mollify_width)
    condition = initial_data_condition_H(initial, cfg.far, cfg.fluid, grid)
    if not condition.passed:
        logger.warning(f"Initial data fails condition H: {condition.message}")

    traj = run(initial, cfg.far, cfg.fluid, grid, cfg.scheme)
    extra: Dict[str, Any] = {
        "scheme": cfg.scheme.model_dump(),
        "condition_h": condition.to_dict(),
    }
    status = EXIT_OK
    try:
        bounds = uniform_bounds(traj, cfg.window)
        extra["bounds"] = bounds.to_dict()
    except ContaminationError as e:
        logger.error(str(e))
        extra["bounds"] = None
        status = EXIT_FAILURE
    save_trajectory(traj, out, extra)
    print(f"Wrote {len(traj.snapshots)} snapshots to {out}")
    return status


def cmd_riemann(args: argparse.Namespace, settings: Settings) -> int:
    """Exact Riemann solution sampled on ξ = x/t"""
    a = kinetic_pressure_coefficient(args.gamma) if args.a == "kinetic" else float(args.a)
    p = FluidParams(a=a, gamma=args.gamma)
    sol = solve_riemann((args.rho_left, args.u_left), (args.rho_right, args.u_right), p)
    xi = np.linspace(args.xi_min, args.xi_max, args.points)
    if args.t is not None and not args.t > 0.0:
        raise DomainError(f"Sampling time must be positive, got {args.t}")
    rho, u = sample_profile(sol, xi)
    if args.out:
        write_riemann_csv(args.out, sol, xi, rho, u, args.t)
        logger.info(f"Wrote {args.points} samples to {args.out}")
    else:
        sys.stdout.write(riemann_csv_text(sol, xi, rho, u, args.t))
    return EXIT_OK


def cmd_converge(args: argparse.Namespace, settings: Settings) -> int:
    """ε-sweep against the exact Euler solution"""
    cfg = load_run_config(args.config)
    if args.epsilons:
        cfg = RunConfig(**{**cfg.model_dump(), "epsilons": args.epsilons})
    if cfg.fluid.gamma <= GAMMA_THRESHOLD:
        print(f"warning: gamma={cfg.fluid.gamma:g} <= 5/3 is outside the proven convergence range", file=sys.stderr)
    out = _output_dir(args, settings, "converge")
    (out / "config.cfg").write_text(dump_run_config(cfg), encoding="utf-8")
    workers = args.workers if args.workers is not None else settings.max_workers
    table = convergence_study(cfg, runner=SweepRunner(workers))
    write_convergence(out, table)
    for row in table.rows:
        print(f"eps={row.epsilon:g} n={row.n} L1(rho)={row.l1_rho:.6g} L1(mom)={row.l1_mom:.6g} {row.status}")
    return EXIT_OK if len(table.ok_rows) == len(table.rows) else EXIT_FAILURE


def cmd_check(args: argparse.Namespace, settings: Settings) -> int:
    """Monitors on a saved trajectory; PASS/FAIL verdict in check.json"""
    directory = Path(args.dir)
    traj = load_trajectory(directory)
    p = traj.params
    spread = initial_invariant_spread(traj)
    invariant = invariant_region_monitor(traj)
    energy = energy_monitor(traj)
    rho0, v0 = traj.effective_fields(traj.initial)
    energy_scale = max(1.0, float(np.max(np.abs(mechanical_energy_pair(rho0, rho0 * v0, p).eta))))
    entropy_tol = ENTROPY_FACTOR * (p.epsilon + traj.grid.h) * energy_scale

    residuals: Dict[str, float] = {}
    if len(traj.snapshots) >= 3:
        residuals["mechanical"] = entropy_residual(traj)
        for name in args.psi or []:
            psi = TestFunction.from_name(name, *args.bump)
            residuals[psi.label] = entropy_residual(traj, psi)
    else:
        logger.warning("Fewer than 3 snapshots: entropy residuals skipped")

    failures: List[str] = []
    if invariant > INVARIANT_RTOL * spread:
        failures.append(f"invariant region violated by {invariant:.3e}")
    if energy > 1e-10 * energy_scale:
        failures.append(f"energy functional increased by {energy:.3e}")
    balance = traj.mass_balance_error
    if np.isfinite(balance) and balance > MASS_BALANCE_RTOL:
        failures.append(f"mass balance error {balance:.3e}")
    if residuals.get("mechanical", 0.0) > entropy_tol:
        failures.append(f"entropy residual {residuals['mechanical']:.3e} exceeds {entropy_tol:.3e}")
    if traj.contaminated:
        failures.append("boundary contamination")

    report = {
        "directory": str(directory),
        "verdict": "FAIL" if failures else "PASS",
        "failures": failures,
        "invariant_violation": invariant,
        "invariant_spread": spread,
        "energy_violation": energy,
        "mass_balance_error": balance,
        "entropy_residuals": residuals,
        "entropy_tolerance": entropy_tol,
        "contaminated": traj.contaminated,
    }
    write_json(directory / "check.json", report)
    print(json.dumps({k: report[k] for k in ("verdict", "failures")}, indent=2))
    return EXIT_FAILURE if failures else EXIT_OK


def cmd_serve(args: argparse.Namespace, settings: Settings) -> int:
    """Run the HTTP service"""
    import uvicorn

    uvicorn.run("nsklimit.main:app", host=args.host or settings.host, port=args.port or settings.port)
    return EXIT_OK


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    """Top-level parser with one subcommand per workflow"""
    p = argparse.ArgumentParser(prog="nsklimit", description="NSK vanishing-viscosity limit simulator")
    p.add_argument("--log-level", default=None, help="Override NSKLIMIT_LOG_LEVEL")
    sub = p.add_subparsers(dest="cmd", required=True)

    ps = sub.add_parser("simulate", help="Run one NSK simulation")
    ps.add_argument("--config", required=True, help="Path to key = value run config")
    ps.add_argument("--out", default=None, help="Output directory")
    ps.set_defaults(func=cmd_simulate)

    pr = sub.add_parser("riemann", help="Sample the exact Euler Riemann solution")
    pr.add_argument("--gamma", type=float, required=True)
    pr.add_argument("--a", default="kinetic", help="Pressure coefficient or 'kinetic'")
    pr.add_argument("--rho-left", type=float, required=True)
    pr.add_argument("--u-left", type=float, default=0.0)
    pr.add_argument("--rho-right", type=float, required=True)
    pr.add_argument("--u-right", type=float, default=0.0)
    pr.add_argument("--xi-min", type=float, default=-2.0)
    pr.add_argument("--xi-max", type=float, default=2.0)
    pr.add_argument("--points", type=int, default=201)
    pr.add_argument("--t", type=float, default=None, help="Sampling time; adds the column x = xi*t")
    pr.add_argument("--out", default=None, help="CSV path (stdout when omitted)")
    pr.set_defaults(func=cmd_riemann)

    pc = sub.add_parser("converge", help="ε-sweep against the Euler limit")
    pc.add_argument("--config", required=True, help="Path to key = value run config")
    pc.add_argument("--out", default=None, help="Output directory")
    pc.add_argument("--epsilons", type=_float_list, default=None, help="Comma-separated, strictly decreasing")
    pc.add_argument("--workers", type=int, default=None, help="Process pool size (NSKLIMIT_MAX_WORKERS)")
    pc.set_defaults(func=cmd_converge)

    pk = sub.add_parser("check", help="Monitors on a saved trajectory directory")
    pk.add_argument("--dir", required=True, help="Directory written by simulate")
    pk.add_argument("--psi", action="append", default=None,
                    help="Extra entropy generator: constant, identity, half_square, signed_half_square, compact_bump")
    pk.add_argument("--bump", type=float, nargs=2, default=(-1.0, 1.0), metavar=("A", "B"),
                    help="Support of compact_bump")
    pk.set_defaults(func=cmd_check)

    pv = sub.add_parser("serve", help="Run the HTTP service")
    pv.add_argument("--host", default=None)
    pv.add_argument("--port", type=int, default=None)
    pv.set_defaults(func=cmd_serve)
    return p


def cli_main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch, and map failures onto exit codes"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    settings = Settings()
    configure_logging(settings, args.log_level)
    try:
        return args.func(args, settings)
    except (ConfigError, ValidationError, DomainError, FileNotFoundError) as e:
        logger.error(f"{args.cmd}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ContaminationError, NskError) as e:
        logger.error(f"{args.cmd} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
