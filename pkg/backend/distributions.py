import json
from fractions import Fraction
from numbers import Real
from typing import Dict, Iterator, List, Mapping, Tuple, Union

from random_source import RandomSource

Config = Tuple[int, ...]
Weight = Union[Fraction, float]

NORMALIZATION_TOLERANCE = 1e-12


def _encode_weight(weight: Real) -> Union[str, float]:
    if isinstance(weight, Fraction):
        return f"{weight.numerator}/{weight.denominator}"
    return float(weight)


def _decode_weight(raw: Union[str, int, float]) -> Weight:
    if isinstance(raw, str):
        return Fraction(raw)
    return float(raw)


def _check_normalized(total: Real, what: str):
    if isinstance(total, Fraction):
        if total != 1:
            raise ValueError(f"{what} weights sum to {total}, expected exactly 1")
    elif abs(float(total) - 1.0) > NORMALIZATION_TOLERANCE:
        raise ValueError(f"{what} weights sum to {total!r}")


class OneStepDistribution:
    """Law of the next sorted configuration, one entry per distinct outcome"""

    def __init__(self, support: Mapping[Config, Weight], check: bool = True):
        self.support: Dict[Config, Weight] = {}
        for config, weight in support.items():
            if weight < 0:
                raise ValueError(f"negative weight {weight} for {config}")
            if weight:
                key = tuple(config)
                self.support[key] = self.support.get(key, 0) + weight
        if check:
            _check_normalized(self.total(), "distribution")

    def __repr__(self) -> str:
        return f"OneStepDistribution({len(self.support)} outcomes)"

    def __len__(self) -> int:
        return len(self.support)

    def __iter__(self) -> Iterator[Tuple[Config, Weight]]:
        return iter(sorted(self.support.items(), reverse=True))

    def total(self) -> Weight:
        return sum(self.support.values(), Fraction(0))

    def probability(self, config: Config) -> Weight:
        return self.support.get(tuple(config), 0)

    def is_close(self, other: "OneStepDistribution", tol: float = 1e-12) -> bool:
        keys = set(self.support) | set(other.support)
        return all(
            abs(float(self.probability(key)) - float(other.probability(key))) <= tol
            for key in keys
        )

    def sample(self, rng: RandomSource) -> Config:
        outcomes = sorted(self.support)
        return outcomes[rng.choice_index([float(self.support[o]) for o in outcomes])]

    def to_json(self) -> str:
        return json.dumps(
            {
                "support": [
                    {"config": list(config), "weight": _encode_weight(weight)}
                    for config, weight in self
                ]
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "OneStepDistribution":
        data = json.loads(text)
        return cls(
            {
                tuple(entry["config"]): _decode_weight(entry["weight"])
                for entry in data["support"]
            }
        )


class JointDistribution:
    """Coupling of two sorted-configuration laws with cached marginals"""

    def __init__(self, support: Mapping[Tuple[Config, Config], Weight], check: bool = True):
        self.support: Dict[Tuple[Config, Config], Weight] = {}
        for (left, right), weight in support.items():
            if weight < 0:
                raise ValueError(f"negative weight {weight}")
            if weight:
                key = (tuple(left), tuple(right))
                self.support[key] = self.support.get(key, 0) + weight
        if check:
            _check_normalized(sum(self.support.values(), Fraction(0)), "joint")
        self._left = None
        self._right = None

    def __repr__(self) -> str:
        return f"JointDistribution({len(self.support)} pairs)"

    def __iter__(self) -> Iterator[Tuple[Tuple[Config, Config], Weight]]:
        return iter(sorted(self.support.items(), reverse=True))

    def _marginal(self, side: int) -> OneStepDistribution:
        weights: Dict[Config, Weight] = {}
        for pair, weight in self.support.items():
            weights[pair[side]] = weights.get(pair[side], 0) + weight
        return OneStepDistribution(weights, check=False)

    @property
    def left(self) -> OneStepDistribution:
        if self._left is None:
            self._left = self._marginal(0)
        return self._left

    @property
    def right(self) -> OneStepDistribution:
        if self._right is None:
            self._right = self._marginal(1)
        return self._right

    def swapped(self) -> "JointDistribution":
        return JointDistribution(
            {(right, left): w for (left, right), w in self.support.items()}, check=False
        )

    def conditional_right(self, left: Config) -> OneStepDistribution:
        """Law of the right side given the left side equals `left`"""
        left = tuple(left)
        mass = self.left.probability(left)
        if not mass:
            raise ValueError(f"left outcome {left} has zero probability")
        return OneStepDistribution(
            {r: w / mass for (l, r), w in self.support.items() if l == left}, check=False
        )

    def pairs(self) -> List[Tuple[Config, Config]]:
        return sorted(self.support)

    def sample(self, rng: RandomSource) -> Tuple[Config, Config]:
        pairs = self.pairs()
        return pairs[rng.choice_index([float(self.support[p]) for p in pairs])]

    def to_json(self) -> str:
        return json.dumps(
            {
                "support": [
                    {"left": list(left), "right": list(right), "weight": _encode_weight(w)}
                    for (left, right), w in self
                ]
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "JointDistribution":
        data = json.loads(text)
        return cls(
            {
                (tuple(e["left"]), tuple(e["right"])): _decode_weight(e["weight"])
                for e in data["support"]
            }
        )
