"""
Majorization-preserving couplings of Voter and 3-Majority steps.

A coupling is built exactly as a JointDistribution and then sampled, so both
marginals are exact by construction and the order can be checked on the
whole support.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import accumulate
from typing import Dict, List, Optional, Sequence, Tuple

from config import config
from distributions import JointDistribution, Weight
from errors import BudgetExceeded, MajorizationError
from majorization import (
    block_structure,
    f_map,
    majorizes,
    move,
    require_majorizes,
    size_classes,
)
from random_source import RandomSource

logger = logging.getLogger(__name__)

Config = Tuple[int, ...]

GLUE_TOLERANCE = 1e-9


def _sorted_config(c: Sequence[int]) -> Config:
    c = tuple(int(x) for x in c)
    if any(a < b for a, b in zip(c, c[1:])) or any(x < 0 for x in c):
        raise ValueError(f"{c} is not a descending non-negative configuration")
    if sum(c) <= 0:
        raise ValueError("configuration must contain at least one vertex")
    return c


def _check_budget(k: int):
    if k > config.COUPLING_MAX_K:
        raise BudgetExceeded(f"k={k} exceeds coupling budget {config.COUPLING_MAX_K}")


def _class_intervals(config_sizes: Config, weights: List[Weight]) -> List[Tuple[Weight, Weight, int]]:
    """(start, end, size) of every size class along the cumulative weights"""
    intervals = []
    start = 0
    position = 0
    total = 0
    while position < len(config_sizes):
        size = config_sizes[position]
        end_index = position
        while end_index < len(config_sizes) and config_sizes[end_index] == size:
            total += weights[end_index]
            end_index += 1
        if size > 0:
            intervals.append((start, total, size))
        start = total
        position = end_index
    return intervals


def _class_at(intervals, point) -> int:
    for start, end, size in intervals:
        if start <= point < end:
            return size
    return intervals[-1][2]


@lru_cache(maxsize=4096)
def _voter_3maj_joint(c: Config, exact: bool) -> JointDistribution:
    # cut points are compared exactly; float weights only at the end
    n = sum(c)
    one = Fraction(1)
    voter_weights = [Fraction(x, n) for x in c]
    maj_weights = [x / n for x in f_map(c, exact=True)]

    voter_classes = _class_intervals(c, voter_weights)
    maj_classes = _class_intervals(c, maj_weights)
    cuts = sorted(
        {0 * one, one}
        | {point for start, end, _ in voter_classes + maj_classes for point in (start, end)}
    )
    multiplicity = size_classes(c)

    support: Dict[Tuple[Config, Config], Weight] = {}

    def add(pair, weight):
        if weight:
            support[pair] = support.get(pair, 0) + weight

    def outcome(s_lose, s_gain, same_opinion):
        return c if same_opinion else move(c, s_lose, s_gain)

    for lo, hi in zip(cuts, cuts[1:]):
        length = hi - lo
        if length <= 0:
            continue
        midpoint = (lo + hi) / 2
        s_voter = _class_at(voter_classes, midpoint)
        s_maj = _class_at(maj_classes, midpoint)

        for s_lose, m_lose in multiplicity.items():
            lose = one * m_lose * s_lose / n
            if s_voter == s_maj:
                # shared gaining opinion, uniform over the class
                m = multiplicity[s_voter]
                hit = one / m if s_voter == s_lose else 0 * one
                stay = outcome(s_lose, s_voter, True)
                moved = outcome(s_lose, s_voter, False) if hit != 1 else None
                add((stay, stay), lose * length * hit)
                if moved is not None:
                    add((moved, moved), lose * length * (1 - hit))
                continue

            # independent uniform picks inside two different classes
            hit_voter = one / multiplicity[s_voter] if s_voter == s_lose else 0 * one
            hit_maj = one / multiplicity[s_maj] if s_maj == s_lose else 0 * one
            for voter_same, p_voter in ((True, hit_voter), (False, 1 - hit_voter)):
                if not p_voter:
                    continue
                left = outcome(s_lose, s_voter, voter_same)
                for maj_same, p_maj in ((True, hit_maj), (False, 1 - hit_maj)):
                    if not p_maj:
                        continue
                    right = outcome(s_lose, s_maj, maj_same)
                    add((left, right), lose * length * p_voter * p_maj)

    if not exact:
        support = {pair: float(w) for pair, w in support.items()}
    return JointDistribution(support)


def coupled_voter_3maj(c: Sequence[int], exact: bool = False) -> JointDistribution:
    """
    Joint law of (Voter(c), 3Maj(c)) with the 3-Majority side majorizing.

    Both steps share the losing opinion i ~ c/n and one uniform X in [0, 1].
    Voter gains the opinion whose cumulative c/n interval contains X and
    3-Majority the one whose cumulative f(c)/n interval does. Where X falls
    into the same size class on both sides the two gain the same opinion;
    otherwise each gains a uniform member of its own class.
    """
    c = _sorted_config(c)
    _check_budget(len(c))
    return _voter_3maj_joint(c, exact)


def _block_column(row: Config, start: int, end: int, offset: int) -> int:
    """Column of the offset-th vertex (1-based) inside block [start, end) of a row"""
    cumulative = 0
    for column in range(start, end):
        cumulative += row[column]
        if offset <= cumulative:
            return column
    raise ValueError(f"offset {offset} beyond block [{start}, {end})")


def _locate(c: Config, c_tilde: Config, label: int) -> Tuple[int, int, int, int]:
    """Block bounds and the two columns a 1-based vertex label maps to"""
    blocks = block_structure(c, c_tilde).blocks()
    before = 0
    for start, end in blocks:
        mass = sum(c[start:end])
        if label <= before + mass:
            offset = label - before
            return start, end, _block_column(c, start, end, offset), _block_column(
                c_tilde, start, end, offset
            )
        before += mass
    raise ValueError(f"vertex label {label} outside [1, {sum(c)}]")


def delete_at(c: Config, c_tilde: Config, label: int) -> Tuple[Config, Config]:
    """Remove the vertex with this label from both rows, rightmost equal-size opinion in its block"""
    start, end, column, column_tilde = _locate(c, c_tilde, label)

    def remove(row, col):
        row = list(row)
        value = row[col]
        target = max(x for x in range(start, end) if row[x] == value)
        row[target] -= 1
        return tuple(sorted(row, reverse=True))

    return remove(c, column), remove(c_tilde, column_tilde)


def add_at(c: Config, c_tilde: Config, label: int) -> Tuple[Config, Config]:
    """Copy the opinion of the vertex with this label in both rows, leftmost equal-size opinion in its block"""
    start, end, column, column_tilde = _locate(c, c_tilde, label)

    def insert(row, col):
        row = list(row)
        value = row[col]
        target = min(x for x in range(start, end) if row[x] == value)
        row[target] += 1
        return tuple(sorted(row, reverse=True))

    return insert(c, column), insert(c_tilde, column_tilde)


def coupled_del(
    c: Sequence[int], c_tilde: Sequence[int], rng: RandomSource, label: Optional[int] = None
) -> Tuple[Config, Config]:
    """
    Delete one uniformly random vertex from both configurations.

    Both rows must be sorted descending. label fixes the vertex (1-based,
    block by block); otherwise it is drawn uniformly, which picks a block
    proportionally to its mass.
    """
    c, c_tilde = _sorted_config(c), _sorted_config(c_tilde)
    require_majorizes(c, c_tilde)
    if label is None:
        label = rng.vertex(sum(c)) + 1
    return delete_at(c, c_tilde, label)


def coupled_add(
    c: Sequence[int], c_tilde: Sequence[int], rng: RandomSource, label: Optional[int] = None
) -> Tuple[Config, Config]:
    """Add a copy of a uniformly random vertex to both descending configurations"""
    c, c_tilde = _sorted_config(c), _sorted_config(c_tilde)
    require_majorizes(c, c_tilde)
    if label is None:
        label = rng.vertex(sum(c)) + 1
    return add_at(c, c_tilde, label)


def coupled_voter_voter(
    c: Sequence[int], c_tilde: Sequence[int], rng: RandomSource
) -> Tuple[Config, Config]:
    """
    One Voter step on both configurations, majorization preserved.

    With probability 1/n the copied vertex is the activated one and nothing
    changes; otherwise delete a vertex and add a copy of one of the n - 1
    survivors.
    """
    c, c_tilde = _sorted_config(c), _sorted_config(c_tilde)
    require_majorizes(c, c_tilde)
    n = sum(c)
    if rng.vertex(n) == 0:
        return c, c_tilde
    deleted, deleted_tilde = coupled_del(c, c_tilde, rng)
    return coupled_add(deleted, deleted_tilde, rng)


def label_segments(c: Config, c_tilde: Config) -> List[Tuple[int, int]]:
    """
    Runs of vertex labels that sit in the same column of both rows.

    Returns (first label, run length) pairs covering 1..n. Every label in a
    run gives the same delete_at and add_at result, so at most 2k runs stand
    in for n labels.
    """
    points = sorted({0} | set(accumulate(c)) | set(accumulate(c_tilde)))
    return [(low + 1, high - low) for low, high in zip(points, points[1:])]


def _segment_law(c: Config, c_tilde: Config, step) -> Dict[Tuple[Config, Config], int]:
    # outcome pair -> number of labels producing it
    law: Dict[Tuple[Config, Config], int] = {}
    for label, length in label_segments(c, c_tilde):
        pair = step(c, c_tilde, label)
        law[pair] = law.get(pair, 0) + length
    return law


@lru_cache(maxsize=4096)
def _voter_voter_joint(c: Config, c_tilde: Config, exact: bool) -> JointDistribution:
    n = sum(c)
    one = Fraction(1) if exact else 1.0
    support: Dict[Tuple[Config, Config], Weight] = {(c, c_tilde): one / n}
    if n > 1:
        weight = one / (n * n)  # (1 - 1/n) / (n (n - 1)) per label pair
        for (d, d_tilde), deleted in _segment_law(c, c_tilde, delete_at).items():
            for pair, copied in _segment_law(d, d_tilde, add_at).items():
                support[pair] = support.get(pair, 0) + weight * (deleted * copied)
    return JointDistribution(support, check=exact)


def voter_voter_joint(
    c: Sequence[int], c_tilde: Sequence[int], exact: bool = False
) -> JointDistribution:
    """Exact law of coupled_voter_voter, summing label pairs run by run"""
    c, c_tilde = _sorted_config(c), _sorted_config(c_tilde)
    require_majorizes(c, c_tilde)
    _check_budget(len(c))
    return _voter_voter_joint(c, c_tilde, exact)


def glue(first: JointDistribution, second: JointDistribution) -> JointDistribution:
    """
    Join (M, A) and (M, B) into (A, B), conditionally independent given M.

    The M-marginals must agree within GLUE_TOLERANCE.
    """
    middle_first, middle_second = first.left, second.left
    if not middle_first.is_close(middle_second, GLUE_TOLERANCE):
        raise ValueError("middle marginals of the two joints differ")

    by_middle: Dict[Config, List[Tuple[Config, Weight]]] = {}
    for (m, b), weight in second.support.items():
        by_middle.setdefault(m, []).append((b, weight))

    exact = all(isinstance(w, Fraction) for w in first.support.values()) and all(
        isinstance(w, Fraction) for w in second.support.values()
    )
    support: Dict[Tuple[Config, Config], Weight] = {}
    for (m, a), weight_a in first.support.items():
        mass = middle_second.probability(m)
        if not mass:
            continue
        for b, weight_b in by_middle.get(m, []):
            key = (a, b)
            support[key] = support.get(key, 0) + weight_a * weight_b / mass
    return JointDistribution(support, check=exact)


@lru_cache(maxsize=4096)
def _three_maj_voter_joint(c: Config, c_tilde: Config) -> JointDistribution:
    # (Voter(c), 3Maj(c)) glued with (Voter(c), Voter(c~)) along Voter(c)
    return glue(_voter_3maj_joint(c, False), _voter_voter_joint(c, c_tilde, False))


def coupled_step_3maj_voter(
    c: Sequence[int], c_tilde: Sequence[int], rng: RandomSource
) -> Tuple[Config, Config]:
    """Sample (3Maj(c), Voter(c~)) with the 3-Majority side majorizing"""
    c, c_tilde = _sorted_config(c), _sorted_config(c_tilde)
    require_majorizes(c, c_tilde)
    _check_budget(len(c))
    left, right = _three_maj_voter_joint(c, c_tilde).sample(rng)
    if not majorizes(left, right):
        raise MajorizationError(f"coupled step broke the order: {left} vs {right}")
    return left, right


@dataclass
class CoupledTrajectory:
    """Paired 3-Majority and Voter chains from a common start"""

    start: Config
    three_maj: List[Config] = field(default_factory=list)
    voter: List[Config] = field(default_factory=list)
    remaining_three_maj: List[int] = field(default_factory=list)
    remaining_voter: List[int] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.three_maj) - 1

    def hitting_times(self, kappa: int) -> Tuple[Optional[int], Optional[int]]:
        """First step with at most kappa remaining opinions, 3-Majority then Voter"""

        def first(series):
            return next((t for t, r in enumerate(series) if r <= kappa), None)

        return first(self.remaining_three_maj), first(self.remaining_voter)


def coupled_trajectory(
    start: Sequence[int], max_steps: int, rng: RandomSource, kappa: int = 1
) -> CoupledTrajectory:
    """Iterate the coupled step until both chains have at most kappa opinions or max_steps"""
    start = tuple(sorted((int(x) for x in start), reverse=True))
    trajectory = CoupledTrajectory(start=start)

    def record(a, b):
        trajectory.three_maj.append(a)
        trajectory.voter.append(b)
        trajectory.remaining_three_maj.append(sum(1 for x in a if x))
        trajectory.remaining_voter.append(sum(1 for x in b if x))

    a = b = start
    record(a, b)
    for _ in range(max_steps):
        if trajectory.remaining_voter[-1] <= kappa and trajectory.remaining_three_maj[-1] <= kappa:
            break
        a, b = coupled_step_3maj_voter(a, b, rng)
        record(a, b)
    return trajectory
