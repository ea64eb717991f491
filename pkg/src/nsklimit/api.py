"""
API routes for nsklimit
"""
from typing import Any, Dict, List, Optional

import numpy as np
from fastapi import APIRouter, Depends, HTTPException, Request
from pydantic import BaseModel, Field

from .config import FarField, FluidParams, Formulation, SchemeConfig, Settings, kinetic_pressure_coefficient
from .core import Grid1D, mollified_riemann_data
from .entropy import TestFunction, weak_entropy_pair
from .harness import uniform_bounds
from .reports import jsonable
from .riemann import sample_profile, solve_riemann
from .solver import run


# Request/Response models
class GasModel(BaseModel):
    gamma: float = Field(gt=1.0)
    a: Optional[float] = Field(default=None, gt=0.0, description="Omitted means the kinetic normalization")

    def params(self, epsilon: float = 0.0) -> FluidParams:
        a = self.a if self.a is not None else kinetic_pressure_coefficient(self.gamma)
        return FluidParams(a=a, gamma=self.gamma, epsilon=epsilon)


class RiemannRequest(GasModel):
    rho_left: float = Field(ge=0.0)
    u_left: float = 0.0
    rho_right: float = Field(ge=0.0)
    u_right: float = 0.0
    xi: List[float] = Field(default_factory=list, description="Similarity coordinates to sample")


class EntropyRequest(GasModel):
    psi: str = "half_square"
    a_bump: float = -1.0
    b_bump: float = 1.0
    rho: List[float]
    u: List[float]


class EntropyResponse(BaseModel):
    psi: str
    eta: List[float]
    flux: List[float]


class SimulateRequest(GasModel):
    epsilon: float = Field(gt=0.0)
    rho_minus: float = Field(gt=0.0)
    u_minus: float = 0.0
    rho_plus: float = Field(gt=0.0)
    u_plus: float = 0.0
    x_min: float = -3.0
    x_max: float = 3.0
    n: int = Field(default=200, ge=4)
    t_end: float = Field(gt=0.0)
    formulation: Formulation = Formulation.EFFECTIVE_V
    window: Optional[List[float]] = None


# Create router
api_router = APIRouter()


def get_settings(request: Request) -> Settings:
    """Dependency to get the settings instance"""
    return request.app.state.settings


@api_router.get("/")
async def api_root():
    """API root endpoint"""
    return {
        "message": "nsklimit API v1",
        "endpoints": {
            "riemann": "/riemann",
            "entropy": "/entropy",
            "simulate": "/simulate",
        },
    }


@api_router.post("/riemann")
async def riemann(request: RiemannRequest) -> Dict[str, Any]:
    """Exact solution of an isentropic Riemann problem"""
    sol = solve_riemann((request.rho_left, request.u_left), (request.rho_right, request.u_right), request.params())
    payload = sol.to_dict()
    payload["vacuum"] = sol.is_vacuum
    if request.xi:
        rho, u = sample_profile(sol, np.asarray(request.xi))
        payload["samples"] = {"xi": request.xi, "rho": rho.tolist(), "u": u.tolist()}
    return jsonable(payload)


@api_router.post("/entropy", response_model=EntropyResponse)
async def entropy(request: EntropyRequest):
    """Weak entropy pair generated by ψ at each (ρ, u)"""
    if len(request.rho) != len(request.u):
        raise HTTPException(status_code=422, detail="rho and u must have equal length")
    psi = TestFunction.from_name(request.psi, request.a_bump, request.b_bump)
    pair = weak_entropy_pair(psi, np.asarray(request.rho), np.asarray(request.u), request.params())
    return EntropyResponse(
        psi=psi.label,
        eta=np.atleast_1d(pair.eta).tolist(),
        flux=np.atleast_1d(pair.flux).tolist(),
    )


@api_router.post("/simulate")
async def simulate(request: SimulateRequest, settings: Settings = Depends(get_settings)) -> Dict[str, Any]:
    """Small NSK run from mollified Riemann data; returns a summary with bounds"""
    if request.n > settings.max_service_cells:
        raise HTTPException(
            status_code=422,
            detail=f"n={request.n} exceeds the service limit of {settings.max_service_cells} cells",
        )
    if request.formulation is Formulation.EULER:
        raise HTTPException(status_code=422, detail="formulation must be effective or original")
    p = request.params(request.epsilon)
    far = FarField(
        rho_minus=request.rho_minus, u_minus=request.u_minus,
        rho_plus=request.rho_plus, u_plus=request.u_plus,
    )
    grid = Grid1D(request.x_min, request.x_max, request.n)
    scheme = SchemeConfig(t_end=request.t_end, snapshot_times=[0.5 * request.t_end])
    initial = mollified_riemann_data(far, grid, p, request.formulation)
    traj = run(initial, far, p, grid, scheme)
    window = tuple(request.window) if request.window else None
    bounds = uniform_bounds(traj, window)

    final = traj.final
    return jsonable({
        "grid": {"x_min": grid.x_min, "x_max": grid.x_max, "n": grid.n},
        "time": final.time,
        "steps": len(traj.series["time"]) - 1,
        "wall_time": traj.wall_time,
        "mass_balance_error": traj.mass_balance_error,
        "min_rho": float(np.min(traj.series["min_rho"])),
        "bounds": bounds.to_dict(),
        "final": {"x": grid.x.tolist(), "rho": final.rho.tolist(), "mom": final.mom.tolist()},
    })
