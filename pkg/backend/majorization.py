"""
Sorted configurations, the majorization order and exact one-step laws of
Voter and 3-Majority at the configuration level.
"""

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from itertools import accumulate
from typing import Callable, Dict, List, Sequence, Tuple

from distributions import OneStepDistribution, Weight
from errors import MajorizationError

Config = Tuple[int, ...]


@dataclass(frozen=True)
class SortedConfiguration:
    """Descending non-negative counts; zero entries are kept so k stays fixed"""

    counts: Config

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if not counts:
            raise ValueError("empty configuration")
        if any(c < 0 for c in counts):
            raise ValueError(f"negative entry in {counts}")
        if any(a < b for a, b in zip(counts, counts[1:])):
            raise ValueError(f"{counts} is not sorted in descending order")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def of(cls, counts: Sequence[int]) -> "SortedConfiguration":
        return cls(tuple(sorted(counts, reverse=True)))

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def k(self) -> int:
        return len(self.counts)

    def prefix_sums(self) -> List[int]:
        return list(accumulate(self.counts))

    def remaining(self) -> int:
        return sum(1 for c in self.counts if c > 0)


def _padded(c: Sequence, c_tilde: Sequence) -> Tuple[List, List]:
    k = max(len(c), len(c_tilde))
    left = sorted(c, reverse=True) + [0] * (k - len(c))
    right = sorted(c_tilde, reverse=True) + [0] * (k - len(c_tilde))
    return left, right


def majorizes(c: Sequence, c_tilde: Sequence, tol: float = 1e-9) -> bool:
    """
    True if every prefix sum of sorted c is at least that of sorted c_tilde.

    Real-valued entries are allowed (e.g. f(c) against c); tol absorbs
    rounding in the prefix sums.
    """
    left, right = _padded(c, c_tilde)
    if abs(sum(left) - sum(right)) > tol:
        raise ValueError(f"totals differ: {sum(left)} vs {sum(right)}")
    return all(a >= b - tol for a, b in zip(accumulate(left), accumulate(right)))


def require_majorizes(c: Sequence[int], c_tilde: Sequence[int]):
    if len(c) != len(c_tilde):
        raise ValueError(f"lengths differ: {len(c)} vs {len(c_tilde)}")
    if not majorizes(c, c_tilde):
        raise MajorizationError(f"{tuple(c)} does not majorize {tuple(c_tilde)}")


def transfer_preserves(c: Sequence[int], i: int, j: int) -> Config:
    """Sorted c - e_i + e_j for c_i > c_j; the input majorizes the result"""
    c = list(c)
    if c[i] <= c[j]:
        raise ValueError(f"transfer needs c[{i}]={c[i]} > c[{j}]={c[j]}")
    c[i] -= 1
    c[j] += 1
    return tuple(sorted(c, reverse=True))


def concatenate(c1: Sequence[int], c2: Sequence[int]) -> Config:
    """Sorted concatenation; preserves majorization part by part"""
    return tuple(sorted(list(c1) + list(c2), reverse=True))


def f_map(c: Sequence[int], exact: bool = False) -> List[Weight]:
    """f_i = c_i (1 + c_i/n - |c|^2/n^2), the mean gaining weight of 3-Majority times n"""
    c = [int(x) for x in c]
    n = sum(c)
    if n <= 0:
        raise ValueError("configuration must contain at least one vertex")
    square_sum = sum(x * x for x in c)
    if exact:
        return [x * (1 + Fraction(x, n) - Fraction(square_sum, n * n)) for x in c]
    return [x * (1 + x / n - square_sum / (n * n)) for x in c]


@dataclass(frozen=True)
class BlockStructure:
    """Cut points 0 = b_0 < ... < b_l = k of the minimal blocks"""

    boundaries: Tuple[int, ...]

    def blocks(self) -> List[Tuple[int, int]]:
        """Half-open column ranges [start, end) of every block"""
        return list(zip(self.boundaries, self.boundaries[1:]))

    def block_of(self, column: int) -> Tuple[int, int]:
        for start, end in self.blocks():
            if start <= column < end:
                return start, end
        raise ValueError(f"column {column} outside the configuration")


def require_descending(c: Sequence[int]):
    if any(a < b for a, b in zip(c, c[1:])):
        raise ValueError(f"{tuple(c)} is not sorted in descending order")


def block_structure(c: Sequence[int], c_tilde: Sequence[int]) -> BlockStructure:
    """
    Split the stacked pair wherever the two prefix sums meet.

    Both rows must already be sorted descending; the boundaries are column
    indices of those sorted rows.
    """
    require_descending(c)
    require_descending(c_tilde)
    require_majorizes(c, c_tilde)
    boundaries = [0]
    for index, (a, b) in enumerate(zip(accumulate(c), accumulate(c_tilde)), start=1):
        if a == b:
            boundaries.append(index)
    return BlockStructure(tuple(boundaries))


def move(c: Config, size_from: int, size_to: int) -> Config:
    """
    Sorted result of one vertex leaving an opinion of size size_from for a
    different opinion of size size_to.
    """
    c = list(c)
    source = c.index(size_from)
    target = next(
        (index for index, x in enumerate(c) if x == size_to and index != source), None
    )
    if c[source] <= 0 or target is None:
        raise ValueError(f"cannot move {size_from} -> {size_to} in {tuple(c)}")
    c[source] -= 1
    c[target] += 1
    return tuple(sorted(c, reverse=True))


def size_classes(c: Sequence[int]) -> Dict[int, int]:
    """Positive opinion size -> number of opinions of that size"""
    return {s: m for s, m in Counter(c).items() if s > 0}


def _collapsed_law(
    c: Sequence[int], gain: Callable[[int], Weight], exact: bool
) -> OneStepDistribution:
    # opinions of equal size are interchangeable, so the law depends on
    # (losing size, gaining size) only
    config = tuple(sorted((int(x) for x in c), reverse=True))
    n = sum(config)
    if n <= 0:
        raise ValueError("configuration must contain at least one vertex")
    classes = size_classes(config)
    one = Fraction(1) if exact else 1.0

    support: Dict[Config, Weight] = {}
    moved = 0 * one
    for s_lose, m_lose in classes.items():
        lose = one * m_lose * s_lose / n
        for s_gain, m_gain in classes.items():
            others = m_gain - 1 if s_gain == s_lose else m_gain
            if others <= 0:
                continue
            weight = lose * others * gain(s_gain)
            if not weight:
                continue
            outcome = move(config, s_lose, s_gain)
            support[outcome] = support.get(outcome, 0) + weight
            moved += weight
    stay = one - moved
    if stay:
        support[config] = support.get(config, 0) + stay
    return OneStepDistribution(support)


def dist_voter(c: Sequence[int], exact: bool = False) -> OneStepDistribution:
    """Exact next-configuration law of one Voter step"""
    n = sum(c)
    if exact:
        return _collapsed_law(c, lambda s: Fraction(s, n), exact)
    return _collapsed_law(c, lambda s: s / n, exact)


def dist_3maj(c: Sequence[int], exact: bool = False) -> OneStepDistribution:
    """Exact next-configuration law of one 3-Majority step"""
    n = sum(c)
    square_sum = sum(int(x) ** 2 for x in c)
    if exact:
        gamma = Fraction(square_sum, n * n)
        return _collapsed_law(c, lambda s: Fraction(s, n) * (1 + Fraction(s, n) - gamma), exact)
    gamma = square_sum / (n * n)
    return _collapsed_law(c, lambda s: (s / n) * (1 + s / n - gamma), exact)
