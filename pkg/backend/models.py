from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator


class BoundRole(str, Enum):
    """How a reported quantity relates to the true conditional moment"""

    EXACT = "exact"
    UPPER = "upper"
    LOWER = "lower"


MOMENT_ROLES: Dict[str, BoundRole] = {
    "mean_next_alpha": BoundRole.EXACT,
    "abs_step_bound": BoundRole.UPPER,
    "second_moment_bound": BoundRole.UPPER,
    "delta_mean_lb": BoundRole.LOWER,
    "delta_abs_bound": BoundRole.UPPER,
    "delta_second_moment_bound": BoundRole.UPPER,
    "delta_variance_lb": BoundRole.LOWER,
    "gamma_mean": BoundRole.EXACT,
    "gamma_second_moment_bound": BoundRole.UPPER,
    "gamma_variance_bound": BoundRole.UPPER,
    "gamma_abs_bound": BoundRole.UPPER,
}


class MomentReport(BaseModel):
    """One-step moment predictions for 3-Majority at a configuration"""

    n: int
    pair: Tuple[int, int]
    mean_next_alpha: List[float]  # E[alpha'(i)] for every opinion
    abs_step_bound: float  # |alpha'(i) - alpha(i)| <= 1/n
    second_moment_bound: List[float]  # 3 alpha(i) / n^2
    delta_mean_lb: float
    delta_abs_bound: float
    delta_second_moment_bound: float
    delta_variance_lb: float  # for the signed bias alpha(i) - alpha(j)
    gamma_mean: float
    gamma_second_moment_bound: float
    gamma_variance_bound: float
    gamma_abs_bound: float
    roles: Dict[str, BoundRole] = Field(default_factory=lambda: dict(MOMENT_ROLES))


class ExactMoments(BaseModel):
    """Enumerated counterparts of the MomentReport fields"""

    n: int
    pair: Tuple[int, int]
    mean_next_alpha: List[float]
    max_abs_step: float
    second_moment: List[float]
    delta_mean: float
    delta_max_abs_step: float
    delta_second_moment: float
    signed_delta_variance: float
    gamma_mean: float
    gamma_second_moment: float
    gamma_variance: float
    gamma_max_abs_step: float


class TwoChoicesMoments(BaseModel):
    mean_increment: float
    second_moment_bound: float


class OpinionLabel(str, Enum):
    STRONG = "strong"
    WEAK = "weak"
    NEITHER = "neither"


class OpinionClass(BaseModel):
    """Strong/weak classification of every opinion at one configuration"""

    labels: List[OpinionLabel]
    gamma: float
    strong_threshold: float  # 7/8 gamma
    weak_threshold: float  # 3/4 gamma
    argmax: int  # largest opinion, ties to the smallest index


class RatioReport(BaseModel):
    """R = alpha(i) / gamma with its one-step bounds"""

    opinion: int
    ratio: float
    step_bound: float  # 14k/n
    drift_bound: Optional[float] = None  # -(1-U)L/(kn), needs a window (L, U)
    second_moment_bound: float  # 24k/n^2


class StoppingTimeReport(BaseModel):
    """First-hit times of the stopping-time predicates, None when not hit"""

    pair: Tuple[int, int]
    delta0: float
    alpha0: float
    linf0: float
    plus_constant: float
    tau_cons: Optional[int] = None
    tau_weak: Optional[int] = None
    tau_delta_up: Optional[int] = None
    tau_i_up: Optional[int] = None
    tau_i_down: Optional[int] = None
    tau_delta_plus: Optional[int] = None
    tau_linf_up: Optional[int] = None
    tau_linf_down: Optional[int] = None
    tau_linf_plus: Optional[int] = None
    tau_linf_minus: Optional[int] = None
    tau_bad: Optional[int] = None


class BoundKind(str, Enum):
    FREEDMAN = "freedman"
    GAMBLER_RUIN = "gambler-ruin"
    MULTIPLICATIVE_DRIFT = "multiplicative-drift"
    VARIANCE_STOP = "variance-stop"
    RATIO_MEAN = "ratio-mean"
    RATIO_SECOND_MOMENT = "ratio-second-moment"


class TailBoundSpec(BaseModel):
    """A tail-bound calculator invocation and its value"""

    kind: BoundKind
    parameters: Dict[str, float]
    value: float
    phi: Optional[float] = None  # exponential rate, gambler's ruin only


class ValidationResult(BaseModel):
    kind: BoundKind
    paths: int
    hits: int
    frequency: float
    bound: float
    tolerance: float
    passed: bool


class InitKind(str, Enum):
    BALANCED = "balanced"
    ALL_DISTINCT = "all-distinct"
    COUNTS = "counts"
    BALANCED_ON_KAPPA = "balanced-on-kappa"


class ExperimentConfig(BaseModel):
    """Validated experiment configuration, from a KEY=VALUE file plus CLI flags"""

    dynamics: str = "3maj"
    n_grid: List[int] = [1024]
    k_grid: List[int] = [2]
    init: InitKind = InitKind.BALANCED
    counts: Optional[List[int]] = None
    kappa: Optional[int] = None
    trials: int = 10
    seed: int = 0
    max_steps: Optional[int] = None
    stride: Optional[int] = None
    threads: int = 1
    out_dir: str = "./results"
    timing: bool = False
    window: int = 100_000  # stride-1 steps for drift validation
    horizon: Optional[int] = None  # steps before comparing Voter and CRW counts
    pair: Tuple[int, int] = (0, 1)
    slope_window: Tuple[float, float] = (0.8, 1.2)
    max_failure_fraction: float = 0.01
    min_ratio: float = 2.0

    @field_validator("dynamics")
    @classmethod
    def known_dynamics(cls, value: str) -> str:
        if value not in ("3maj", "voter", "2choices"):
            raise ValueError(f"unknown dynamics {value!r}")
        return value

    @field_validator("n_grid", "k_grid")
    @classmethod
    def positive_grid(cls, value: List[int]) -> List[int]:
        if not value or any(x <= 0 for x in value):
            raise ValueError("grid entries must be positive")
        return value

    @field_validator("trials", "threads", "window")
    @classmethod
    def at_least_one(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @field_validator("seed")
    @classmethod
    def unsigned_seed(cls, value: int) -> int:
        if not 0 <= value < 1 << 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        return value

    @model_validator(mode="after")
    def consistent_grid(self) -> "ExperimentConfig":
        if self.init == InitKind.COUNTS:
            if not self.counts:
                raise ValueError("INIT=counts needs COUNTS")
            self.n_grid = [sum(self.counts)]
            self.k_grid = [len(self.counts)]
        for n in self.n_grid:
            for k in self.k_grid:
                if self.init != InitKind.ALL_DISTINCT and k > n:
                    raise ValueError(f"grid cell k={k} exceeds n={n}")
        if self.kappa is not None:
            if self.kappa < 1:
                raise ValueError("KAPPA must be at least 1")
            if self.init == InitKind.BALANCED_ON_KAPPA and any(
                self.kappa > k for k in self.k_grid
            ):
                raise ValueError("KAPPA exceeds k in the grid")
        elif self.init == InitKind.BALANCED_ON_KAPPA:
            raise ValueError("INIT=balanced-on-kappa needs KAPPA")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("MAX_STEPS must be positive")
        if self.stride is not None and self.stride < 1:
            raise ValueError("STRIDE must be positive")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("HORIZON must be positive")
        return self


class SweepRecord(BaseModel):
    """One trial of one grid cell"""

    n: int
    k: int
    trial: int
    seed: int
    dynamics: str
    init: str
    tau_cons: Optional[int] = None
    timeout: bool = False
    steps_to_kappa: Optional[int] = None
    wall_ms: Optional[float] = None


class CellAggregate(BaseModel):
    n: int
    k: int
    dynamics: str
    trials: int
    timeouts: int
    median: Optional[float] = None
    mean: Optional[float] = None
    quantiles: Dict[str, float] = {}


class SweepResult(BaseModel):
    records: List[SweepRecord]
    aggregates: List[CellAggregate]
    slopes: Dict[str, float] = {}
    metadata: Dict[str, object] = {}


class LowerBoundCell(BaseModel):
    """Trials finishing faster than the lower-bound threshold in one cell"""

    n: int
    k: int
    dynamics: str
    trials: int
    threshold: float
    below: int
    fraction: float
    ci_low: float
    ci_high: float
    passed: bool
    warning: Optional[str] = None


class GapCell(BaseModel):
    n: int
    k: int
    median_3maj: Optional[float] = None
    median_2choices: Optional[float] = None
    ratio: Optional[float] = None
    timeouts_3maj: int = 0
    timeouts_2choices: int = 0


class HittingTimes(BaseModel):
    """Per-trial first steps with at most kappa remaining opinions"""

    n: int
    kappa: int
    three_maj: List[Optional[int]]
    voter: List[Optional[int]]
    coupled_three_maj: List[Optional[int]] = []
    coupled_voter: List[Optional[int]] = []
    dominance_failures: int = 0
    voter_mean: Optional[float] = None
    voter_expected: float
    coupled_skipped: Optional[str] = None


class DualityReport(BaseModel):
    """Voter remaining-opinion counts against CRW cluster counts at a fixed horizon"""

    n: int
    horizon: int
    trials: int
    ks_statistic: float
    p_value: float
    passed: bool
    expected_times: Dict[int, float]
    mean_times: Dict[int, float]


class DriftItem(BaseModel):
    item: str
    passed: bool
    statistic: float
    detail: str


class DriftReport(BaseModel):
    n: int
    k: int
    steps: int
    pair: Tuple[int, int]
    items: List[DriftItem]
    tail_bounds: List[ValidationResult] = []

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items) and all(
            result.passed for result in self.tail_bounds
        )


class CouplingReport(BaseModel):
    """Pathwise order of coupled 3-Majority and Voter remaining-opinion counts"""

    n: int
    trials: int
    steps: int  # coupled steps over all trials
    order_violations: int  # steps where 3-Majority kept more opinions than Voter
    duality: Optional[DualityReport] = None

    @property
    def passed(self) -> bool:
        return self.order_violations == 0 and (self.duality is None or self.duality.passed)


class SimulationReport(BaseModel):
    """A single seeded run with its snapshots and stopping times"""

    n: int
    dynamics: str
    seed: int
    tau_cons: Optional[int] = None
    timeout: bool = False
    steps: int
    snapshots: List[Tuple[int, List[int], float]]
    stopping_times: Optional[StoppingTimeReport] = None
