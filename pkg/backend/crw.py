"""
Coalescing random walk on the complete graph with self-loops.

The walk is the time-reversed dual of pull voting: the number of clusters
after t steps has the same law as the number of opinions remaining after t
Voter steps started from all-distinct opinions.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

import numpy as np
from random_source import RandomSource

logger = logging.getLogger(__name__)


@dataclass
class CrwState:
    """Clusters of coalesced particles, at most one cluster per vertex"""

    n: int
    cluster_at: Dict[int, int] = field(default_factory=dict)  # location -> cluster id
    members: Dict[int, List[int]] = field(default_factory=dict)  # cluster id -> start vertices
    step: int = 0

    @property
    def cluster_count(self) -> int:
        return len(self.cluster_at)

    def locations(self) -> List[int]:
        return sorted(self.cluster_at)


def new_crw(n: int, occupied: Optional[Iterable[int]] = None) -> CrwState:
    """One particle on each occupied vertex, every vertex when occupied is None"""
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    vertices = range(n) if occupied is None else sorted(set(occupied))
    state = CrwState(n=n)
    for cluster_id, vertex in enumerate(vertices):
        if not 0 <= vertex < n:
            raise ValueError(f"vertex {vertex} outside [0, {n})")
        state.cluster_at[vertex] = cluster_id
        state.members[cluster_id] = [vertex]
    if not state.cluster_at:
        raise ValueError("at least one vertex must be occupied")
    return state


def step_crw(state: CrwState, rng: RandomSource) -> int:
    """
    Draw (v, u) uniformly with replacement; a cluster at v moves to u and
    merges with any cluster already there. Returns the cluster count.
    """
    v = rng.vertex(state.n)
    u = rng.vertex(state.n)
    state.step += 1

    moving = state.cluster_at.get(v)
    if moving is None or u == v:
        return len(state.cluster_at)

    del state.cluster_at[v]
    resident = state.cluster_at.get(u)
    if resident is None:
        state.cluster_at[u] = moving
    else:
        state.members[resident].extend(state.members.pop(moving))
    return len(state.cluster_at)


def run_crw_until(
    state: CrwState, rng: RandomSource, kappa: int, max_steps: Optional[int] = None
) -> Optional[int]:
    """Steps until at most kappa clusters remain, None if max_steps runs out first"""
    if not 1 <= kappa <= state.cluster_count:
        raise ValueError(f"need 1 <= kappa <= {state.cluster_count}, got {kappa}")

    elapsed = 0
    count = state.cluster_count
    while count > kappa:
        if max_steps is not None and elapsed >= max_steps:
            return None
        count = step_crw(state, rng)
        elapsed += 1
    return elapsed


def run_crw_for(state: CrwState, rng: RandomSource, steps: int) -> int:
    """Advance a fixed number of steps and return the cluster count"""
    count = state.cluster_count
    for done in range(steps):
        if count == 1:
            # a single cluster never merges again
            state.step += steps - done
            break
        count = step_crw(state, rng)
    return count


def expected_hitting_time(n: int, kappa: int, initial: Optional[int] = None) -> float:
    """
    Mean steps to go from `initial` clusters (default n) down to kappa.

    Each merge from m clusters is a geometric wait with success probability
    m(m-1)/n^2, so the sum telescopes to n^2 (1/kappa - 1/initial).
    """
    initial = n if initial is None else initial
    if not 1 <= kappa <= initial <= n:
        raise ValueError(f"need 1 <= kappa <= initial <= n, got {kappa}, {initial}, {n}")
    return n * n * (1.0 / kappa - 1.0 / initial)


def crw_hitting_times(
    n: int, initial: int, kappa: int, trials: int, rng: RandomSource
) -> np.ndarray:
    """Vectorised samples of the hitting time through the lumped cluster-count chain"""
    if not 1 <= kappa <= initial <= n:
        raise ValueError(f"need 1 <= kappa <= initial <= n, got {kappa}, {initial}, {n}")
    totals = np.zeros(trials, dtype=np.int64)
    for m in range(initial, kappa, -1):
        totals += rng.geometric(m * (m - 1) / (n * n), trials)
    return totals
