"""
Closed-form concentration bounds and their empirical validation on
instrumented trajectories.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from errors import HypothesisViolation
from models import BoundKind, TailBoundSpec, ValidationResult

logger = logging.getLogger(__name__)

HYPOTHESIS_TOLERANCE = 1e-12


def _positive(**values: float):
    for name, value in values.items():
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")


def _non_negative(**values: float):
    for name, value in values.items():
        if value < 0:
            raise ValueError(f"{name} must be non-negative, got {value}")


def freedman_bound(lam: float, W: float, D: float) -> TailBoundSpec:
    """exp(-lam^2 / (2W + 2D lam)) for a supermartingale with increments at most D"""
    _positive(lam=lam, D=D)
    _non_negative(W=W)
    value = math.exp(-(lam * lam) / (2 * W + 2 * D * lam))
    return TailBoundSpec(
        kind=BoundKind.FREEDMAN, parameters={"lam": lam, "W": W, "D": D}, value=value
    )


def gambler_ruin_bound(
    x0: float, L: float, U: float, D: float, S: float, theta: float
) -> TailBoundSpec:
    """
    Probability that a process with drift at most -theta exits (L, U) at the top.

    The ratio (e^{phi X0} - e^{phi(L-D)}) / (e^{phi U} - e^{phi(L-D)}) is
    evaluated after factoring out e^{phi(L-D)} and e^{phi U}, so large
    exponents do not overflow.
    """
    if not L < x0 < U:
        raise ValueError(f"need L < X0 < U, got L={L}, X0={x0}, U={U}")
    _positive(D=D, S=S, theta=theta)
    phi = 6 * theta / (3 * S + 2 * D * theta)
    a = phi * (x0 - L + D)
    b = phi * (U - L + D)
    value = math.exp(a - b) * (-math.expm1(-a)) / (-math.expm1(-b))
    return TailBoundSpec(
        kind=BoundKind.GAMBLER_RUIN,
        parameters={"x0": x0, "L": L, "U": U, "D": D, "S": S, "theta": theta},
        value=min(1.0, value),
        phi=phi,
    )


def multiplicative_drift_bound(
    lam: float, T: int, a: float, D: float, S: float, U: float
) -> TailBoundSpec:
    """
    Bound on X_t <= a^t (X_0 - lam) for some t <= T when E[X_t] >= a X_{t-1}.

    A = sum_{t=1..T} a^{-2t} and B = max(1, a^{-2T}); a = 1 reduces to
    exp(-(lam^2/2) / (2TS + lam D)).
    """
    _positive(lam=lam, T=T, a=a, D=D, S=S, U=U)
    if a == 1:
        A, B = float(T), 1.0
    else:
        log_r = -2 * math.log(a)
        if log_r * T > 700:
            # a^{-2T} overflows; the bound is then vacuous
            return TailBoundSpec(
                kind=BoundKind.MULTIPLICATIVE_DRIFT,
                parameters={"lam": lam, "T": T, "a": a, "D": D, "S": S, "U": U},
                value=1.0,
            )
        r = math.exp(log_r)
        A = r * math.expm1(log_r * T) / math.expm1(log_r)
        B = max(1.0, math.exp(log_r * T))
    denominator = 2 * A * (S + (a - 1) ** 2 * U**2) + lam * B * (D + abs(a - 1) * U)
    value = math.exp(-(lam * lam / 2) / denominator)
    return TailBoundSpec(
        kind=BoundKind.MULTIPLICATIVE_DRIFT,
        parameters={"lam": lam, "T": T, "a": a, "D": D, "S": S, "U": U, "A": A, "B": B},
        value=value,
    )


def variance_stop_bound(S: float, ex0_sq: float, extau_sq: float) -> TailBoundSpec:
    """E[tau] <= (E[X_tau^2] - E[X_0^2]) / S when the conditional variance stays above S"""
    _positive(S=S)
    if extau_sq < ex0_sq:
        raise ValueError("E[X_tau^2] must be at least E[X_0^2]")
    return TailBoundSpec(
        kind=BoundKind.VARIANCE_STOP,
        parameters={"S": S, "EX0sq": ex0_sq, "EXtausq": extau_sq},
        value=(extau_sq - ex0_sq) / S,
    )


def _ratio_inputs(EX: float, EY: float, var_x: float, var_y: float, M: float):
    _positive(M=M)
    _non_negative(var_x=var_x, var_y=var_y)
    if EY < M:
        raise ValueError(f"E[Y]={EY} below the lower bound M={M}")


def ratio_mean_bound(EX: float, EY: float, var_x: float, var_y: float, M: float) -> TailBoundSpec:
    """|E[X/Y] - E[X]/E[Y]| for Y >= M"""
    _ratio_inputs(EX, EY, var_x, var_y, M)
    value = (1 / (M * EY)) * ((EX / EY) * var_y + math.sqrt(var_x * var_y))
    return TailBoundSpec(
        kind=BoundKind.RATIO_MEAN,
        parameters={"EX": EX, "EY": EY, "VarX": var_x, "VarY": var_y, "M": M},
        value=value,
    )


def ratio_second_moment_bound(
    EX: float, EY: float, var_x: float, var_y: float, M: float
) -> TailBoundSpec:
    """E[(X/Y - E[X]/E[Y])^2] for Y >= M"""
    _ratio_inputs(EX, EY, var_x, var_y, M)
    value = (math.sqrt(var_x) + (EX / EY) * math.sqrt(var_y)) ** 2 / (M * M)
    return TailBoundSpec(
        kind=BoundKind.RATIO_SECOND_MOMENT,
        parameters={"EX": EX, "EY": EY, "VarX": var_x, "VarY": var_y, "M": M},
        value=value,
    )


@dataclass
class InstrumentedPath:
    """
    A scalar trajectory with the conditional one-step quantities the bound
    hypotheses refer to.

    values has T + 1 entries; drift[t-1] = E_{t-1}[X_t - X_{t-1}] and
    second_moment[t-1] = E_{t-1}[(X_t - X_{t-1})^2] for t = 1..T.
    """

    values: np.ndarray
    drift: np.ndarray
    second_moment: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.drift = np.asarray(self.drift, dtype=float)
        self.second_moment = np.asarray(self.second_moment, dtype=float)
        steps = len(self.values) - 1
        if steps < 0 or len(self.drift) != steps or len(self.second_moment) != steps:
            raise ValueError("drift and second_moment need one entry per step")

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)


def _first(mask: np.ndarray) -> Optional[int]:
    hits = np.flatnonzero(mask)
    return int(hits[0]) if hits.size else None


def _violation(condition: np.ndarray) -> Optional[int]:
    """1-based step of the first violated condition"""
    bad = _first(condition)
    return None if bad is None else bad + 1


def _active_steps(spec: TailBoundSpec, path: InstrumentedPath) -> int:
    """Number of steps t with tau > t - 1"""
    if spec.kind != BoundKind.GAMBLER_RUIN:
        return len(path.values) - 1
    lower, upper = spec.parameters["L"], spec.parameters["U"]
    exit_index = _first((path.values <= lower) | (path.values >= upper))
    return len(path.values) - 1 if exit_index is None else exit_index


def check_hypotheses(spec: TailBoundSpec, path: InstrumentedPath, path_index: int = 0):
    """Raise HypothesisViolation at the first step that breaks the bound's conditions"""
    p = spec.parameters
    steps = _active_steps(spec, path)
    increments = path.increments[:steps]
    drift = path.drift[:steps]
    second = path.second_moment[:steps]
    previous = path.values[:steps]
    tol = HYPOTHESIS_TOLERANCE

    if spec.kind == BoundKind.FREEDMAN:
        checks = [
            (drift > tol, "drift is positive, not a supermartingale"),
            (increments > p["D"] + tol, f"increment exceeds D={p['D']}"),
        ]
    elif spec.kind == BoundKind.GAMBLER_RUIN:
        checks = [
            (drift + p["theta"] > tol, f"drift above -theta={-p['theta']}"),
            (second > p["S"] + tol, f"second moment exceeds S={p['S']}"),
            (np.abs(increments) > p["D"] + tol, f"|increment| exceeds D={p['D']}"),
        ]
    elif spec.kind == BoundKind.MULTIPLICATIVE_DRIFT:
        a = p["a"]
        checks = [
            (drift + (1 - a) * previous < -tol, f"E[X_t] below {a} X_(t-1)"),
            (np.abs(increments) > p["D"] + tol, f"|increment| exceeds D={p['D']}"),
            (second > p["S"] + tol, f"second moment exceeds S={p['S']}"),
            (np.abs(previous) > p["U"] + tol, f"|X| exceeds U={p['U']}"),
        ]
    else:
        raise ValueError(f"no pathwise hypotheses for {spec.kind.value}")

    for condition, message in checks:
        step = _violation(condition)
        if step is not None:
            raise HypothesisViolation(message, path_index, step)


def default_event(spec: TailBoundSpec) -> Callable[[InstrumentedPath], bool]:
    """The event whose probability the bound controls"""
    p = spec.parameters
    if spec.kind == BoundKind.FREEDMAN:

        def freedman_event(path: InstrumentedPath) -> bool:
            rise = path.values[1:] - path.values[0]
            budget = np.cumsum(path.second_moment) <= p["W"] + HYPOTHESIS_TOLERANCE
            return bool(np.any((rise >= p["lam"]) & budget))

        return freedman_event

    if spec.kind == BoundKind.GAMBLER_RUIN:

        def exits_on_top(path: InstrumentedPath) -> bool:
            exit_index = _first((path.values <= p["L"]) | (path.values >= p["U"]))
            return exit_index is not None and path.values[exit_index] >= p["U"]

        return exits_on_top

    if spec.kind == BoundKind.MULTIPLICATIVE_DRIFT:

        def falls_behind(path: InstrumentedPath) -> bool:
            horizon = min(int(p["T"]), len(path.values) - 1)
            t = np.arange(horizon + 1)
            target = p["a"] ** t * (path.values[0] - p["lam"])
            return bool(np.any(path.values[: horizon + 1] <= target))

        return falls_behind

    raise ValueError(f"{spec.kind.value} is not a tail-probability bound")


def validate_bound_empirically(
    spec: TailBoundSpec,
    paths: Sequence[InstrumentedPath],
    event: Optional[Callable[[InstrumentedPath], bool]] = None,
) -> ValidationResult:
    """
    Compare the empirical frequency of an event with its tail bound.

    Every path is first checked against the bound's hypotheses; a violation
    aborts with HypothesisViolation. The check passes when the frequency is
    at most bound + 3 sqrt(b (1 - b) / N).
    """
    if spec.kind not in (
        BoundKind.FREEDMAN,
        BoundKind.GAMBLER_RUIN,
        BoundKind.MULTIPLICATIVE_DRIFT,
    ):
        raise ValueError(f"{spec.kind.value} is not a tail-probability bound")
    if not paths:
        raise ValueError("no paths to validate against")

    event = event or default_event(spec)
    hits = 0
    for index, path in enumerate(paths):
        check_hypotheses(spec, path, index)
        if event(path):
            hits += 1

    total = len(paths)
    frequency = hits / total
    bound = min(1.0, spec.value)
    tolerance = 3 * math.sqrt(bound * (1 - bound) / total)
    passed = frequency <= bound + tolerance
    logger.info(
        "%s: %d/%d paths hit (%.4g) against bound %.4g", spec.kind.value, hits, total, frequency, bound
    )
    return ValidationResult(
        kind=spec.kind,
        paths=total,
        hits=hits,
        frequency=frequency,
        bound=bound,
        tolerance=tolerance,
        passed=passed,
    )
