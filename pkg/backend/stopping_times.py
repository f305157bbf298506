"""First-hit detection for the stopping times used in the drift analysis"""

import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from analytics import argmax_opinion
from dynamics import Trajectory
from models import StoppingTimeReport

Counts = Sequence[int]


def _second_largest(counts: Counts) -> int:
    top = argmax_opinion(counts)
    return max((c for index, c in enumerate(counts) if index != top), default=0)


def _predicates(
    n: int,
    pair: Tuple[int, int],
    delta0: float,
    alpha0: float,
    linf0: float,
    plus_constant: float,
) -> Dict[str, Callable[[Counts, int], bool]]:
    i, j = pair

    def delta(c):
        return abs(c[i] - c[j]) / n

    # each predicate receives (counts, sum of squared counts)
    return {
        "tau_cons": lambda c, s: max(c) == n,
        "tau_weak": lambda c, s: 4 * min(c[i], c[j]) * n <= 3 * s,
        "tau_delta_up": lambda c, s: delta(c) >= 1.01 * delta0,
        "tau_i_up": lambda c, s: c[i] / n >= 2 * alpha0,
        "tau_i_down": lambda c, s: c[i] / n <= alpha0 / 2,
        "tau_delta_plus": lambda c, s: delta(c) >= plus_constant / math.sqrt(n),
        "tau_linf_up": lambda c, s: max(c) / n >= 2 * linf0,
        "tau_linf_down": lambda c, s: max(c) / n <= 0.9 * linf0,
        "tau_linf_plus": lambda c, s: 3 * max(c) >= 2 * n,
        "tau_linf_minus": lambda c, s: 5 * max(c) <= 3 * n,
        "tau_bad": lambda c, s: 16 * _second_largest(c) * n >= 15 * s,
    }


def detect_stopping_times(
    path: Union[Trajectory, Sequence[Counts]],
    pair: Tuple[int, int] = (0, 1),
    delta0: Optional[float] = None,
    alpha0: Optional[float] = None,
    plus_constant: float = 1.0,
    start_step: int = 0,
) -> StoppingTimeReport:
    """
    Scan a per-step counts path for the first hit of every stopping time.

    Args:
        path: a Trajectory (stride 1 or with events) or a list of counts, one per step
        pair: opinions (i, j) for the bias and weak-opinion times
        delta0: reference bias, defaults to the bias of the first state
        alpha0: reference population of opinion i, defaults to its first value
        plus_constant: C in the threshold C / sqrt(n)
        start_step: step index of the first entry when path is a plain list

    Returns:
        StoppingTimeReport with absolute step indices, None where never hit
    """
    if isinstance(path, Trajectory):
        series: List[Tuple[int, ...]] = [tuple(c) for c in path.count_series()]
        start_step = path.start_step
    else:
        series = [tuple(c) for c in path]
    if not series:
        raise ValueError("empty path")

    first = series[0]
    n = sum(first)
    i, j = pair
    if i == j or not (0 <= i < len(first) and 0 <= j < len(first)):
        raise ValueError(f"invalid pair {pair}")
    if delta0 is None:
        delta0 = abs(first[i] - first[j]) / n
    if alpha0 is None:
        alpha0 = first[i] / n
    linf0 = max(first) / n

    predicates = _predicates(n, (i, j), delta0, alpha0, linf0, plus_constant)
    hits: Dict[str, Optional[int]] = {name: None for name in predicates}
    pending = dict(predicates)

    for offset, counts in enumerate(series):
        if not pending:
            break
        square_sum = sum(c * c for c in counts)
        for name, predicate in list(pending.items()):
            if predicate(counts, square_sum):
                hits[name] = start_step + offset
                del pending[name]

    return StoppingTimeReport(
        pair=(i, j),
        delta0=delta0,
        alpha0=alpha0,
        linf0=linf0,
        plus_constant=plus_constant,
        **hits,
    )
