"""
Vertex-level simulation of asynchronous consensus dynamics on the complete
graph with self-loops: 3-Majority, Voter (pull voting) and 2-Choices.

Every step activates one uniformly random vertex; all samples are drawn from
the full vertex set, the activated vertex included.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

from config import config
from random_source import RandomSource

logger = logging.getLogger(__name__)


class Dynamics(str, Enum):
    THREE_MAJORITY = "3maj"
    VOTER = "voter"
    TWO_CHOICES = "2choices"


class OpinionChange(NamedTuple):
    """One opinion change; step is the update count after the change"""

    step: int
    vertex: int
    losing: int
    gaining: int


class Snapshot(NamedTuple):
    step: int
    counts: Tuple[int, ...]
    gamma: float


@dataclass
class PopulationState:
    """Opinion assignment with cached counts, square sum and remaining-opinion count"""

    n: int
    opinions: List[int]
    counts: List[int]
    step: int = 0
    square_sum: int = 0  # sum of counts[i]^2, gamma = square_sum / n^2
    remaining: int = 0  # number of opinions with a positive count

    @property
    def k(self) -> int:
        return len(self.counts)

    @property
    def gamma(self) -> float:
        return self.square_sum / (self.n * self.n)

    @property
    def is_consensus(self) -> bool:
        return self.remaining == 1

    def alpha(self, i: int) -> float:
        return self.counts[i] / self.n

    def alphas(self) -> List[float]:
        return [c / self.n for c in self.counts]

    def apply(self, vertex: int, gaining: int) -> Optional[OpinionChange]:
        """Set the opinion of one vertex and advance the step counter"""
        losing = self.opinions[vertex]
        self.step += 1
        if losing == gaining:
            return None

        counts = self.counts
        ci = counts[losing]
        cj = counts[gaining]
        self.square_sum += 2 * (cj - ci + 1)
        counts[losing] = ci - 1
        counts[gaining] = cj + 1
        if ci == 1:
            self.remaining -= 1
        if cj == 0:
            self.remaining += 1
        self.opinions[vertex] = gaining
        return OpinionChange(self.step, vertex, losing, gaining)

    def refresh(self):
        """Recompute cached aggregates from the counts"""
        self.square_sum = sum(c * c for c in self.counts)
        self.remaining = sum(1 for c in self.counts if c > 0)

    def verify(self):
        """Raise ValueError if any cached field disagrees with the opinions"""
        recounted = [0] * self.k
        for opinion in self.opinions:
            recounted[opinion] += 1
        if recounted != self.counts:
            raise ValueError(f"counts {self.counts} != recount {recounted}")
        if sum(self.counts) != self.n:
            raise ValueError("counts do not sum to n")
        fresh = sum(c * c for c in self.counts) / (self.n * self.n)
        if abs(fresh - self.gamma) > 1e-12:
            raise ValueError(f"cached gamma {self.gamma} != recomputed {fresh}")
        if self.remaining != sum(1 for c in self.counts if c > 0):
            raise ValueError("remaining-opinion count is stale")

    def copy(self) -> "PopulationState":
        return PopulationState(
            n=self.n,
            opinions=list(self.opinions),
            counts=list(self.counts),
            step=self.step,
            square_sum=self.square_sum,
            remaining=self.remaining,
        )


def new_population(n: int, counts: Sequence[int]) -> PopulationState:
    """
    Build a population with opinions assigned contiguously.

    Vertices 0..counts[0]-1 hold opinion 0, the next counts[1] vertices hold
    opinion 1, and so on.
    """
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    counts = [int(c) for c in counts]
    if not counts:
        raise ValueError("at least one opinion is required")
    if any(c < 0 for c in counts):
        raise ValueError(f"counts must be non-negative, got {counts}")
    if sum(counts) != n:
        raise ValueError(f"counts sum to {sum(counts)}, expected n={n}")

    opinions: List[int] = []
    for opinion, size in enumerate(counts):
        opinions.extend([opinion] * size)

    state = PopulationState(n=n, opinions=opinions, counts=counts)
    state.refresh()
    return state


def balanced_counts(n: int, k: int) -> List[int]:
    """Counts as equal as possible; the first n mod k opinions get one extra vertex"""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    base, extra = divmod(n, k)
    return [base + 1 if i < extra else base for i in range(k)]


def all_distinct_counts(n: int) -> List[int]:
    return [1] * n


def balanced_on_kappa(n: int, k: int, kappa: int) -> List[int]:
    """kappa balanced opinions padded with k - kappa empty ones"""
    if not 1 <= kappa <= k:
        raise ValueError(f"need 1 <= kappa <= k, got kappa={kappa}, k={k}")
    return balanced_counts(n, kappa) + [0] * (k - kappa)


# Update rules. Each draws a fixed number of vertices so streams stay aligned
# regardless of which branch is taken.

def _rule_3majority(opinions: List[int], rng: RandomSource, n: int) -> Tuple[int, int]:
    v = rng.vertex(n)
    a = opinions[rng.vertex(n)]
    b = opinions[rng.vertex(n)]
    c = opinions[rng.vertex(n)]
    return v, (a if a == b else c)


def _rule_voter(opinions: List[int], rng: RandomSource, n: int) -> Tuple[int, int]:
    v = rng.vertex(n)
    return v, opinions[rng.vertex(n)]


def _rule_2choices(opinions: List[int], rng: RandomSource, n: int) -> Tuple[int, int]:
    v = rng.vertex(n)
    a = opinions[rng.vertex(n)]
    b = opinions[rng.vertex(n)]
    return v, (a if a == b else opinions[v])


RULES: Dict[Dynamics, Callable[[List[int], RandomSource, int], Tuple[int, int]]] = {
    Dynamics.THREE_MAJORITY: _rule_3majority,
    Dynamics.VOTER: _rule_voter,
    Dynamics.TWO_CHOICES: _rule_2choices,
}

DRAWS_PER_STEP = {
    Dynamics.THREE_MAJORITY: 4,
    Dynamics.VOTER: 2,
    Dynamics.TWO_CHOICES: 3,
}


def step(
    state: PopulationState, rng: RandomSource, dynamics: Dynamics
) -> Optional[OpinionChange]:
    v, gaining = RULES[Dynamics(dynamics)](state.opinions, rng, state.n)
    return state.apply(v, gaining)


def step_3majority(state: PopulationState, rng: RandomSource) -> Optional[OpinionChange]:
    """v adopts w1's opinion if w1 and w2 agree, otherwise w3's"""
    return step(state, rng, Dynamics.THREE_MAJORITY)


def step_voter(state: PopulationState, rng: RandomSource) -> Optional[OpinionChange]:
    """v copies one uniformly random vertex, possibly itself"""
    return step(state, rng, Dynamics.VOTER)


def step_2choices(state: PopulationState, rng: RandomSource) -> Optional[OpinionChange]:
    """v adopts the opinion of u1 and u2 if they agree, otherwise keeps its own"""
    return step(state, rng, Dynamics.TWO_CHOICES)


@dataclass
class Trajectory:
    """Snapshots at a fixed stride plus optionally every opinion change"""

    initial_counts: Tuple[int, ...]
    start_step: int
    stride: int = 1
    record_events: bool = False
    snapshots: List[Snapshot] = field(default_factory=list)
    events: List[OpinionChange] = field(default_factory=list)

    @property
    def n(self) -> int:
        return sum(self.initial_counts)

    @property
    def final_step(self) -> int:
        return self.snapshots[-1].step if self.snapshots else self.start_step

    def record(self, state: PopulationState):
        if self.snapshots and self.snapshots[-1].step == state.step:
            return
        self.snapshots.append(Snapshot(state.step, tuple(state.counts), state.gamma))

    def replay(self) -> Iterator[Tuple[int, Tuple[int, ...]]]:
        """Yield (step, counts) at the start and after every recorded event"""
        if not self.record_events:
            raise ValueError("trajectory was recorded without events")
        counts = list(self.initial_counts)
        yield self.start_step, tuple(counts)
        for event in self.events:
            counts[event.losing] -= 1
            counts[event.gaining] += 1
            yield event.step, tuple(counts)

    def verify_replay(self) -> bool:
        """True if replaying the events reproduces every snapshot"""
        changes = list(self.replay())
        position = 0
        current = changes[0][1]
        for snapshot in self.snapshots:
            while position + 1 < len(changes) and changes[position + 1][0] <= snapshot.step:
                position += 1
                current = changes[position][1]
            if current != snapshot.counts:
                return False
        return True

    def count_series(self) -> List[Tuple[int, ...]]:
        """
        Counts at every step from start_step to final_step inclusive.

        Needs stride 1 or recorded events; coarser snapshots could hide a hit.
        """
        if self.record_events:
            series: List[Tuple[int, ...]] = []
            changes = list(self.replay())
            current = changes[0][1]
            position = 0
            for t in range(self.start_step, self.final_step + 1):
                while position + 1 < len(changes) and changes[position + 1][0] <= t:
                    position += 1
                    current = changes[position][1]
                series.append(current)
            return series
        if self.stride != 1:
            raise ValueError(
                f"stride {self.stride} > 1 without recorded events; hits could be missed"
            )
        return [snapshot.counts for snapshot in self.snapshots]


@dataclass
class RunResult:
    """Outcome of a run; a timeout is a result, with the final state attached"""

    tau_cons: Optional[int]
    timed_out: bool
    steps: int
    steps_to_kappa: Optional[int]
    trajectory: Trajectory
    state: PopulationState


def default_max_steps(n: int) -> int:
    """Timeout at TIMEOUT_FACTOR * n^1.5 * ln n steps"""
    if n <= 1:
        return 1
    return max(1, math.ceil(config.TIMEOUT_FACTOR * n**1.5 * math.log(n)))


def default_stride(max_steps: int) -> int:
    return max(1, max_steps // config.SNAPSHOT_TARGET)


def run_until_consensus(
    state: PopulationState,
    rng: RandomSource,
    dynamics: Dynamics = Dynamics.THREE_MAJORITY,
    max_steps: Optional[int] = None,
    stride: Optional[int] = None,
    record_events: bool = False,
    kappa: Optional[int] = None,
) -> RunResult:
    """
    Run the dynamics until consensus or until max_steps updates have been made.

    Args:
        state: population to advance in place
        rng: random stream
        dynamics: which update rule to apply
        max_steps: update budget, defaults to default_max_steps(n)
        stride: snapshot stride, defaults to default_stride(max_steps)
        record_events: keep every opinion change for replay
        kappa: also report the first step with at most kappa remaining opinions

    Returns:
        RunResult with tau_cons (absolute step) or timed_out set
    """
    if max_steps is None:
        max_steps = default_max_steps(state.n)
    if max_steps <= 0:
        raise ValueError(f"max_steps must be positive, got {max_steps}")
    if stride is None:
        stride = default_stride(max_steps)

    rule = RULES[Dynamics(dynamics)]
    opinions = state.opinions
    n = state.n
    refresh_every = config.GAMMA_REFRESH_INTERVAL
    trajectory = Trajectory(
        initial_counts=tuple(state.counts),
        start_step=state.step,
        stride=stride,
        record_events=record_events,
    )
    trajectory.record(state)

    steps_to_kappa = None
    if kappa is not None and state.remaining <= kappa:
        steps_to_kappa = state.step

    if state.is_consensus:
        return RunResult(state.step, False, 0, steps_to_kappa, trajectory, state)

    events = trajectory.events
    for elapsed in range(1, max_steps + 1):
        v, gaining = rule(opinions, rng, n)
        change = state.apply(v, gaining)
        if change is not None:
            if record_events:
                events.append(change)
            if steps_to_kappa is None and kappa is not None and state.remaining <= kappa:
                steps_to_kappa = state.step
            if state.remaining == 1:
                trajectory.record(state)
                return RunResult(state.step, False, elapsed, steps_to_kappa, trajectory, state)
        if elapsed % stride == 0:
            trajectory.record(state)
        if elapsed % refresh_every == 0:
            state.refresh()

    trajectory.record(state)
    logger.debug("run timed out after %d steps (n=%d, %s)", max_steps, n, dynamics)
    return RunResult(None, True, max_steps, steps_to_kappa, trajectory, state)
