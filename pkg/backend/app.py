import json
import logging
from typing import Dict, List, Optional, Tuple

from analytics import (
    brute_force_one_step,
    classify_opinions,
    moment_oracles_2choices,
    moment_oracles_3maj,
    transition_law,
)
from cli import evaluate_bound
from distributions import OneStepDistribution
from dynamics import Dynamics, default_max_steps, new_population, run_until_consensus
from errors import LabError
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from majorization import block_structure, f_map, majorizes
from models import (
    BoundKind,
    MomentReport,
    OpinionClass,
    TailBoundSpec,
    TwoChoicesMoments,
)
from pydantic import BaseModel, Field
from random_source import RandomSource

logger = logging.getLogger(__name__)

# Largest max_steps a single /api/simulate request may ask for
SIMULATE_MAX_STEPS = 10_000_000

app = FastAPI(title="Consensus Dynamics Lab", root_path="")

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# Pydantic models for request/response
class OneStepRequest(BaseModel):
    """Counts vector and dynamics for an exact one-step law"""

    counts: List[int]
    dynamics: Dynamics = Dynamics.THREE_MAJORITY
    brute_force: bool = False  # enumerate every draw instead of the closed form


class Outcome(BaseModel):
    config: List[int]
    weight: str | float  # "p/q" for exact rationals


class OneStepResponse(BaseModel):
    dynamics: Dynamics
    outcomes: List[Outcome]


class MomentsRequest(BaseModel):
    counts: List[int]
    pair: Tuple[int, int] = (0, 1)


class MomentsResponse(BaseModel):
    three_majority: MomentReport
    two_choices: List[TwoChoicesMoments]
    classes: OpinionClass


class MajorizesRequest(BaseModel):
    c: List[int]
    c_tilde: List[int]


class MajorizesResponse(BaseModel):
    majorizes: bool
    blocks: Optional[List[Tuple[int, int]]] = None  # minimal blocks when c majorizes c_tilde
    f: List[float]  # f(c), which always majorizes c


class BoundsRequest(BaseModel):
    kind: BoundKind
    parameters: Dict[str, float]


class SimulateRequest(BaseModel):
    counts: List[int]
    dynamics: Dynamics = Dynamics.THREE_MAJORITY
    seed: int = Field(0, ge=0, lt=1 << 64)
    max_steps: Optional[int] = Field(None, ge=1, le=SIMULATE_MAX_STEPS)
    kappa: Optional[int] = Field(None, ge=1)


class SimulateResponse(BaseModel):
    tau_cons: Optional[int]
    timed_out: bool
    steps: int
    steps_to_kappa: Optional[int]
    final_counts: List[int]


def _bad_request(e: Exception) -> HTTPException:
    return HTTPException(status_code=400, detail=str(e))


# API Endpoints


@app.post("/api/one-step", response_model=OneStepResponse)
def one_step(request: OneStepRequest):
    """Exact law of the sorted configuration after one update"""
    try:
        if request.brute_force:
            law = brute_force_one_step(request.counts, request.dynamics)
        else:
            law = transition_law(request.counts, request.dynamics, exact=True)
        distribution = OneStepDistribution(law.sorted_outcomes())
        outcomes = json.loads(distribution.to_json())["support"]
        return OneStepResponse(dynamics=request.dynamics, outcomes=outcomes)
    except (ValueError, LabError) as e:
        raise _bad_request(e)
    except Exception as e:
        logger.exception("one-step failed")
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/api/moments", response_model=MomentsResponse)
async def moments(request: MomentsRequest):
    """One-step moment predictions and the strong/weak classification"""
    try:
        n = sum(request.counts)
        return MomentsResponse(
            three_majority=moment_oracles_3maj(request.counts, n, request.pair),
            two_choices=[
                moment_oracles_2choices(request.counts, n, i) for i in range(len(request.counts))
            ],
            classes=classify_opinions(request.counts, n),
        )
    except (ValueError, LabError) as e:
        raise _bad_request(e)
    except Exception as e:
        logger.exception("moments failed")
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/api/majorizes", response_model=MajorizesResponse)
async def check_majorizes(request: MajorizesRequest):
    try:
        c = sorted(request.c, reverse=True)
        c_tilde = sorted(request.c_tilde, reverse=True)
        ordered = majorizes(c, c_tilde)
        blocks = None
        if ordered and len(c) == len(c_tilde):
            blocks = block_structure(c, c_tilde).blocks()
        return MajorizesResponse(majorizes=ordered, blocks=blocks, f=f_map(c))
    except (ValueError, LabError) as e:
        raise _bad_request(e)
    except Exception as e:
        logger.exception("majorizes failed")
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/api/bounds", response_model=TailBoundSpec)
async def bounds(request: BoundsRequest):
    """Evaluate one tail-bound calculator"""
    try:
        parameters = dict(request.parameters)
        if "T" in parameters:
            parameters["T"] = int(parameters["T"])
        return evaluate_bound(request.kind.value, parameters)
    except (ValueError, LabError) as e:
        raise _bad_request(e)
    except Exception as e:
        logger.exception("bounds failed")
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/api/simulate", response_model=SimulateResponse)
def simulate(request: SimulateRequest):
    """A single seeded run; the step budget is capped per request"""
    try:
        counts = request.counts
        state = new_population(sum(counts), counts)
        max_steps = request.max_steps or min(SIMULATE_MAX_STEPS, default_max_steps(state.n))
        result = run_until_consensus(
            state,
            RandomSource(request.seed),
            request.dynamics,
            max_steps=max_steps,
            kappa=request.kappa,
        )
        return SimulateResponse(
            tau_cons=result.tau_cons,
            timed_out=result.timed_out,
            steps=result.steps,
            steps_to_kappa=result.steps_to_kappa,
            final_counts=list(state.counts),
        )
    except (ValueError, LabError) as e:
        raise _bad_request(e)
    except Exception as e:
        logger.exception("simulate failed")
        raise HTTPException(status_code=500, detail=str(e))
