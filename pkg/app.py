import logging
from contextlib import asynccontextmanager
from typing import Dict, List, Optional

import numpy as np
import uvicorn
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from config import configure_logging, get_settings
from csem import eval_timeset, holds_at
from dsem import eval_all, eval_holds
from errors import MTLError
from formula import AtomMap, parse, temporal_depth, to_text
from harness import EXPERIMENTS, estimate_continuous_pl, estimate_discrete, run_experiment
from stochastic import parse_sampler
from timeset import TimeSet
from traces import GridTrace, PLTrace

logger = logging.getLogger(__name__)

MAX_API_TRIALS = 200_000


# =====================================================
# Lifespan: Controls startup & shutdown events
# =====================================================
@asynccontextmanager
async def lifespan(app: FastAPI):
    configure_logging()
    settings = get_settings()
    print(f"🔄 MTL checker starting (seed {settings.seed}, {settings.workers} workers)...")
    yield
    print("✅ Shutting down cleanly.")


# =====================================================
# Initialize FastAPI app
# =====================================================
app = FastAPI(
    title="MTL Statistical Model Checking API",
    description="Continuous and discretized MTL semantics with Monte Carlo estimation",
    version="1.0.0",
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# =====================================================
# Request/Response Models
# =====================================================
class EvalRequest(BaseModel):
    formula: str
    trace: List[List[float]] = Field(..., description="breakpoints [[t, x], ...] starting at t=0")
    atoms: Dict[str, str] = Field(default_factory=dict, description="atom name -> region notation")
    at: Optional[float] = None
    horizon: Optional[float] = None


class DiscreteEvalRequest(BaseModel):
    formula: str
    n: int = Field(..., ge=1)
    values: List[float]
    atoms: Dict[str, str] = Field(default_factory=dict)
    at: Optional[float] = None


class MonteCarloRequest(BaseModel):
    formula: str
    atoms: Dict[str, str] = Field(default_factory=dict)
    semantics: str = Field("discrete", pattern="^(discrete|continuous-pl)$")
    sampler: str = "bm"
    x0: float = 0.0
    n: int = Field(..., ge=1)
    trials: int = Field(1000, ge=1, le=MAX_API_TRIALS)
    seed: Optional[int] = None
    at: float = Field(0.0, ge=0.0)
    horizon: Optional[float] = None


class ReproRequest(BaseModel):
    trials: Optional[int] = Field(None, ge=1, le=MAX_API_TRIALS)
    seed: Optional[int] = None


class EstimateResponse(BaseModel):
    success: bool
    label: str
    trials: int
    successes: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    confidence: float


def _fail(e):
    if isinstance(e, HTTPException):
        raise e
    raise HTTPException(status_code=500, detail=str(e))


def run_core(fn, *args, **kwargs):
    """Call into the core under the {"success", "data", "count", "error"} result convention"""
    try:
        data = fn(*args, **kwargs)
    except MTLError as e:
        logger.warning("⚠️ %s: %s", type(e).__name__, e)
        return {"success": False, "data": None, "count": 0, "error": f"{type(e).__name__}: {e}"}
    count = len(data) if isinstance(data, (list, tuple, TimeSet)) else 1
    return {"success": True, "data": data, "count": count, "error": None}


def _unwrap(result):
    if not result["success"]:
        raise HTTPException(status_code=400, detail=result["error"])
    return result


def _continuous_inputs(request):
    trace = PLTrace.from_breakpoints((p[0], p[1]) for p in request.trace)
    return parse(request.formula), trace, AtomMap(request.atoms)


def _discrete_inputs(request):
    return parse(request.formula), GridTrace(request.n, request.values), AtomMap(request.atoms)


def _grid_truths(phi, grid, atoms):
    truth = eval_all(phi, grid, atoms)
    return [None if m else bool(v) for v, m in zip(truth.data, np.ma.getmaskarray(truth))]


def _estimate(request):
    phi = parse(request.formula)
    sampler = parse_sampler(request.sampler, request.x0)
    estimate_fn = estimate_discrete if request.semantics == "discrete" else estimate_continuous_pl
    return estimate_fn(
        phi, sampler, AtomMap(request.atoms), request.at, request.n, request.trials, request.seed, horizon=request.horizon
    )


# =====================================================
# ROUTES / ENDPOINTS
# =====================================================

@app.get("/")
def read_root():
    """API Health Check"""
    return {
        "status": "running",
        "message": "MTL Statistical Model Checking API",
        "version": "1.0.0",
        "endpoints": {
            "eval": "/api/eval",
            "eval_discrete": "/api/eval-discrete",
            "monte_carlo": "/api/mc",
            "experiments": "/api/repro/{name}",
        },
    }


@app.post("/api/eval")
def evaluate_continuous(request: EvalRequest):
    """Exact time set (or point truth) of a formula on a piecewise-linear trace."""
    try:
        phi, trace, atoms = _unwrap(run_core(_continuous_inputs, request))["data"]
        if request.at is not None:
            result = _unwrap(run_core(holds_at, phi, trace, atoms, request.at))
            return {"success": True, "formula": to_text(phi), "at": request.at, "holds": result["data"]}
        horizon = request.horizon if request.horizon is not None else trace.horizon - temporal_depth(phi)
        result = _unwrap(run_core(eval_timeset, phi, trace, atoms, horizon))
        return {
            "success": True,
            "formula": to_text(phi),
            "horizon": horizon,
            "timeset": str(result["data"]),
            "count": result["count"],
        }
    except Exception as e:
        _fail(e)


@app.post("/api/eval-discrete")
def evaluate_discrete(request: DiscreteEvalRequest):
    """Discretized truth values on the grid N/n; null marks points whose window runs past the trace."""
    try:
        phi, grid, atoms = _unwrap(run_core(_discrete_inputs, request))["data"]
        if request.at is not None:
            result = _unwrap(run_core(eval_holds, phi, grid, atoms, request.at))
            return {"success": True, "formula": to_text(phi), "at": request.at, "holds": result["data"]}
        result = _unwrap(run_core(_grid_truths, phi, grid, atoms))
        return {"success": True, "formula": to_text(phi), "values": result["data"], "count": result["count"]}
    except Exception as e:
        _fail(e)


@app.post("/api/mc", response_model=EstimateResponse)
def monte_carlo(request: MonteCarloRequest):
    """Monte Carlo estimate of the satisfaction probability at time `at`."""
    try:
        estimate = _unwrap(run_core(_estimate, request))["data"]
        return EstimateResponse(
            success=True,
            label=estimate.label,
            trials=estimate.trials,
            successes=estimate.successes,
            p_hat=estimate.p_hat,
            ci_lo=estimate.ci_lo,
            ci_hi=estimate.ci_hi,
            confidence=estimate.confidence,
        )
    except Exception as e:
        _fail(e)


@app.post("/api/repro/{name}")
def reproduce(name: str, request: ReproRequest):
    """Run a canned experiment and return its report (nothing is written to disk)."""
    if name not in EXPERIMENTS:
        raise HTTPException(status_code=404, detail=f"unknown experiment '{name}'")
    try:
        result = _unwrap(run_core(run_experiment, name, trials=request.trials, seed=request.seed, write=False))
        return result["data"].as_dict()
    except Exception as e:
        _fail(e)


# =====================================================
# Run the server
# =====================================================
if __name__ == "__main__":
    settings = get_settings()
    print("\n" + "=" * 70)
    print("🚀 STARTING MTL MODEL CHECKING API SERVER")
    print("=" * 70)
    print(f"\n📍 API will be available at: http://localhost:{settings.api_port}")
    print(f"📚 API Documentation: http://localhost:{settings.api_port}/docs")
    print("\n" + "=" * 70 + "\n")

    uvicorn.run("app:app", host=settings.api_host, port=settings.api_port, reload=True)
