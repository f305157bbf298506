"""
One-step moment predictions, exact transition laws and enumeration oracles.

Everything here is a pure function of a counts vector. Opinion indices are
0-based and counts may contain zeros.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from config import config
from dynamics import DRAWS_PER_STEP, Dynamics
from errors import BudgetExceeded
from models import (
    ExactMoments,
    MomentReport,
    OpinionClass,
    OpinionLabel,
    RatioReport,
    TwoChoicesMoments,
)

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


def _checked(counts: Sequence[int], n: Optional[int] = None) -> Tuple[Tuple[int, ...], int]:
    counts = tuple(int(c) for c in counts)
    if not counts or any(c < 0 for c in counts):
        raise ValueError(f"invalid counts {counts}")
    total = sum(counts)
    if total <= 0:
        raise ValueError("configuration must contain at least one vertex")
    if n is not None and n != total:
        raise ValueError(f"counts sum to {total}, expected n={n}")
    return counts, total


def _check_index(i: int, k: int):
    if not 0 <= i < k:
        raise ValueError(f"opinion {i} outside [0, {k})")


def _check_pair(pair: Pair, k: int) -> Pair:
    i, j = pair
    _check_index(i, k)
    _check_index(j, k)
    if i == j:
        raise ValueError("pair must name two distinct opinions")
    return i, j


def expected_alpha_next(counts: Sequence[int], n: int, i: int) -> float:
    """E[alpha'(i)] = alpha(i) (1 + (alpha(i) - gamma) / n) under 3-Majority"""
    counts, n = _checked(counts, n)
    _check_index(i, len(counts))
    alpha = counts[i] / n
    gamma = sum(c * c for c in counts) / (n * n)
    return alpha * (1 + (alpha - gamma) / n)


def moment_oracles_3maj(counts: Sequence[int], n: int, pair: Pair = (0, 1)) -> MomentReport:
    """Evaluate every one-step moment identity and bound of 3-Majority"""
    counts, n = _checked(counts, n)
    i, j = _check_pair(pair, len(counts))

    alphas = [c / n for c in counts]
    gamma = sum(a * a for a in alphas)
    cube = sum(a**3 for a in alphas)
    a_i, a_j = alphas[i], alphas[j]
    delta = abs(a_i - a_j)
    n2 = n * n

    return MomentReport(
        n=n,
        pair=(i, j),
        mean_next_alpha=[a * (1 + (a - gamma) / n) for a in alphas],
        abs_step_bound=1 / n,
        second_moment_bound=[3 * a / n2 for a in alphas],
        delta_mean_lb=delta * (1 + (a_i + a_j - gamma) / n),
        delta_abs_bound=2 / n,
        delta_second_moment_bound=12 * (a_i + a_j) / n2,
        delta_variance_lb=max(0.0, (a_i + a_j - 5 * delta * delta) / n2),
        gamma_mean=gamma
        + (2 / n) * (1 - 1 / n) * (cube - gamma * gamma)
        + (2 / n2) * (1 - gamma),
        gamma_second_moment_bound=24 * cube / n2,
        gamma_variance_bound=24 * gamma**1.5 / n2,
        gamma_abs_bound=6 * max(alphas) / n,
    )


def moment_oracles_2choices(counts: Sequence[int], n: int, i: int) -> TwoChoicesMoments:
    """Mean increment alpha(alpha - gamma)/n and second-moment bound alpha(alpha + gamma)/n^2"""
    counts, n = _checked(counts, n)
    _check_index(i, len(counts))
    alpha = counts[i] / n
    gamma = sum(c * c for c in counts) / (n * n)
    return TwoChoicesMoments(
        mean_increment=alpha * (alpha - gamma) / n,
        second_moment_bound=alpha * (alpha + gamma) / (n * n),
    )


@dataclass
class StepLaw:
    """
    Exact law of one update: probability of every (losing, gaining) opinion
    change plus the probability that nothing changes.
    """

    counts: Tuple[int, ...]
    dynamics: Dynamics
    changes: Dict[Pair, Real] = field(default_factory=dict)
    no_change: Real = 0

    @property
    def n(self) -> int:
        return sum(self.counts)

    def outcomes(self) -> Dict[Tuple[int, ...], Real]:
        """Next counts vector (unsorted) -> probability"""
        result: Dict[Tuple[int, ...], Real] = {}
        if self.no_change:
            result[self.counts] = self.no_change
        for (i, j), p in self.changes.items():
            nxt = list(self.counts)
            nxt[i] -= 1
            nxt[j] += 1
            key = tuple(nxt)
            result[key] = result.get(key, 0) + p
        return result

    def sorted_outcomes(self) -> Dict[Tuple[int, ...], Real]:
        result: Dict[Tuple[int, ...], Real] = {}
        for key, p in self.outcomes().items():
            ordered = tuple(sorted(key, reverse=True))
            result[ordered] = result.get(ordered, 0) + p
        return result


def transition_law(counts: Sequence[int], dynamics: Dynamics, exact: bool = False) -> StepLaw:
    """
    Closed-form one-step law in O(k^2).

    The losing opinion is that of the activated vertex, distributed as alpha.
    The gaining opinion is independent of it for 3-Majority
    (g(j) = alpha(j)(1 + alpha(j) - gamma)) and Voter (alpha); 2-Choices adopts
    j with probability alpha(j)^2 and otherwise keeps the current opinion.
    """
    counts, n = _checked(counts)
    dynamics = Dynamics(dynamics)
    if exact:
        alphas = [Fraction(c, n) for c in counts]
    else:
        alphas = [c / n for c in counts]
    gamma = sum(a * a for a in alphas)

    if dynamics == Dynamics.THREE_MAJORITY:
        gains = [a * (1 + a - gamma) for a in alphas]
    elif dynamics == Dynamics.VOTER:
        gains = list(alphas)
    else:
        gains = [a * a for a in alphas]

    law = StepLaw(counts=counts, dynamics=dynamics)
    moved = 0
    for i, a_i in enumerate(alphas):
        if not a_i:
            continue
        for j, g_j in enumerate(gains):
            if i == j or not g_j:
                continue
            p = a_i * g_j
            law.changes[(i, j)] = p
            moved += p
    law.no_change = 1 - moved
    return law


def brute_force_one_step(
    counts: Sequence[int], dynamics: Dynamics, max_draws: Optional[int] = None
) -> StepLaw:
    """
    Exact one-step law by enumerating every tuple of vertex draws.

    Probabilities are Fractions with denominator n^d, d the number of draws
    per step. Raises BudgetExceeded when n^d exceeds the draw budget.
    """
    counts, n = _checked(counts)
    dynamics = Dynamics(dynamics)
    draws = DRAWS_PER_STEP[dynamics]
    budget = config.BRUTE_FORCE_MAX_DRAWS if max_draws is None else max_draws
    total = n**draws
    if total > budget:
        raise BudgetExceeded(f"{n}^{draws} = {total} draws exceeds budget {budget}")

    k = len(counts)
    opinions = np.repeat(np.arange(k), counts)
    # every tuple of the draws after v, one column per tuple
    grid = np.indices((n,) * (draws - 1)).reshape(draws - 1, -1)
    sampled = opinions[grid]

    tally = np.zeros((k, k), dtype=np.int64)
    for v in range(n):
        own = opinions[v]
        if dynamics == Dynamics.THREE_MAJORITY:
            gaining = np.where(sampled[0] == sampled[1], sampled[0], sampled[2])
        elif dynamics == Dynamics.VOTER:
            gaining = sampled[0]
        else:
            gaining = np.where(sampled[0] == sampled[1], sampled[0], own)
        tally[own] += np.bincount(gaining, minlength=k)

    law = StepLaw(counts=counts, dynamics=dynamics)
    for i in range(k):
        for j in range(k):
            if i != j and tally[i, j]:
                law.changes[(i, j)] = Fraction(int(tally[i, j]), total)
    law.no_change = Fraction(int(np.trace(tally)), total)
    logger.debug("enumerated %d draws for %s at %s", total, dynamics.value, counts)
    return law


def exact_moments(law: StepLaw, pair: Pair = (0, 1)) -> ExactMoments:
    """Exact conditional moments of the statistics the moment report bounds"""
    counts, n = law.counts, law.n
    k = len(counts)
    i, j = _check_pair(pair, k)

    def stats(cs):
        alphas = [Fraction(c, n) for c in cs]
        return alphas, abs(alphas[i] - alphas[j]), alphas[i] - alphas[j], sum(a * a for a in alphas)

    alphas0, delta0, signed0, gamma0 = stats(counts)
    mean_alpha = [Fraction(0)] * k
    second = [Fraction(0)] * k
    max_step = delta_max = gamma_max = Fraction(0)
    delta_mean = delta_sq = gamma_mean = gamma_sq = Fraction(0)
    signed_mean = signed_sq = Fraction(0)

    for outcome, p in law.outcomes().items():
        p = Fraction(p)
        if p <= 0:
            continue
        alphas, delta, signed, gamma = stats(outcome)
        for o in range(k):
            step = alphas[o] - alphas0[o]
            mean_alpha[o] += p * alphas[o]
            second[o] += p * step * step
            max_step = max(max_step, abs(step))
        delta_mean += p * delta
        delta_sq += p * (delta - delta0) ** 2
        delta_max = max(delta_max, abs(delta - delta0))
        signed_mean += p * signed
        signed_sq += p * signed * signed
        gamma_mean += p * gamma
        gamma_sq += p * (gamma - gamma0) ** 2
        gamma_max = max(gamma_max, abs(gamma - gamma0))

    return ExactMoments(
        n=n,
        pair=(i, j),
        mean_next_alpha=[float(x) for x in mean_alpha],
        max_abs_step=float(max_step),
        second_moment=[float(x) for x in second],
        delta_mean=float(delta_mean),
        delta_max_abs_step=float(delta_max),
        delta_second_moment=float(delta_sq),
        signed_delta_variance=float(signed_sq - signed_mean * signed_mean),
        gamma_mean=float(gamma_mean),
        gamma_second_moment=float(gamma_sq),
        gamma_variance=float(gamma_sq - (gamma_mean - gamma0) ** 2),
        gamma_max_abs_step=float(gamma_max),
    )


def argmax_opinion(counts: Sequence[int]) -> int:
    """Index of the largest opinion, ties broken to the smallest index"""
    best = 0
    for index, c in enumerate(counts):
        if c > counts[best]:
            best = index
    return best


def classify_opinions(counts: Sequence[int], n: int) -> OpinionClass:
    """Strong if alpha >= 7/8 gamma, weak if alpha <= 3/4 gamma, neither otherwise"""
    counts, n = _checked(counts, n)
    square_sum = sum(c * c for c in counts)
    labels = []
    for c in counts:
        # integer comparisons: alpha >= r gamma  <=>  c n >= r sum(c^2)
        if 8 * c * n >= 7 * square_sum:
            labels.append(OpinionLabel.STRONG)
        elif 4 * c * n <= 3 * square_sum:
            labels.append(OpinionLabel.WEAK)
        else:
            labels.append(OpinionLabel.NEITHER)
    gamma = square_sum / (n * n)
    return OpinionClass(
        labels=labels,
        gamma=gamma,
        strong_threshold=7 * gamma / 8,
        weak_threshold=3 * gamma / 4,
        argmax=argmax_opinion(counts),
    )


def ratio_statistic(
    counts: Sequence[int],
    n: int,
    i: int,
    window: Optional[Tuple[float, float]] = None,
) -> RatioReport:
    """
    R = alpha(i) / gamma together with its one-step bounds.

    The drift bound -(1-U)L/(kn) only applies while L <= R <= U, so it is
    reported only when such a window is given.
    """
    counts, n = _checked(counts, n)
    k = len(counts)
    _check_index(i, k)
    square_sum = sum(c * c for c in counts)
    drift_bound = None
    if window is not None:
        lower, upper = window
        drift_bound = -((1 - upper) * lower) / (k * n)
    return RatioReport(
        opinion=i,
        ratio=counts[i] * n / square_sum,
        step_bound=14 * k / n,
        drift_bound=drift_bound,
        second_moment_bound=24 * k / (n * n),
    )
