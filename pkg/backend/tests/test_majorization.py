"""
Tests for sorted configurations, the majorization order and the
configuration-level one-step laws
"""

from fractions import Fraction
from itertools import combinations_with_replacement

import numpy as np
import pytest
from analytics import transition_law
from distributions import JointDistribution, OneStepDistribution
from dynamics import Dynamics
from errors import MajorizationError
from majorization import (
    SortedConfiguration,
    block_structure,
    concatenate,
    dist_3maj,
    dist_voter,
    f_map,
    majorizes,
    require_majorizes,
    size_classes,
    transfer_preserves,
)


def _ordered_pair(generator):
    """A random sorted configuration and one reached from it by transfers"""
    k = int(generator.integers(1, 6))
    top = tuple(sorted((int(x) for x in generator.integers(0, 10, size=k)), reverse=True))
    lower = top
    for _ in range(int(generator.integers(0, 6))):
        pairs = [(i, j) for i in range(k) for j in range(k) if lower[i] > lower[j] + 1]
        if not pairs:
            break
        i, j = pairs[int(generator.integers(len(pairs)))]
        lower = transfer_preserves(lower, i, j)
    return top, lower


@pytest.mark.unit
class TestMajorizationOrder:
    """Prefix-sum comparisons"""

    @pytest.mark.parametrize(
        "c,c_tilde,expected",
        [
            ((4, 3, 2, 1), (3, 3, 2, 2), True),
            ((5, 5, 0, 0), (4, 4, 1, 1), True),
            ((4, 3, 2, 1), (5, 3, 2, 0), False),
            ((3, 3, 2, 2), (3, 3, 2, 2), True),
        ],
    )
    def test_fixtures(self, c, c_tilde, expected):
        """Known ordered and unordered pairs"""
        assert majorizes(c, c_tilde) is expected

    def test_unsorted_input_is_sorted_first(self):
        """Entries are compared after a descending sort"""
        assert majorizes((1, 2, 3, 4), (2, 2, 3, 3))

    def test_totals_must_match(self):
        """Different n cannot be compared"""
        with pytest.raises(ValueError):
            majorizes((3, 1), (2, 1))

    def test_require_majorizes(self):
        """The checked form raises MajorizationError"""
        require_majorizes((4, 0), (2, 2))
        with pytest.raises(MajorizationError):
            require_majorizes((2, 2), (4, 0))
        with pytest.raises(ValueError):
            require_majorizes((4, 0), (2, 1, 1))

    def test_transfer_preserves(self):
        """Moving a vertex from a larger to a smaller opinion goes down the order"""
        result = transfer_preserves((4, 3, 2, 1), 0, 3)
        assert result == (3, 3, 2, 2)
        assert majorizes((4, 3, 2, 1), result)
        with pytest.raises(ValueError):
            transfer_preserves((2, 2), 0, 1)

    def test_concatenate(self):
        """Concatenating ordered parts keeps the order"""
        joined = concatenate((4, 1), (3, 0))
        assert joined == (4, 3, 1, 0)
        assert majorizes(joined, concatenate((3, 2), (2, 1)))

    @pytest.mark.parametrize("n,k", [(6, 3), (8, 4)])
    def test_partial_order_exhaustively(self, n, k):
        """Reflexive, antisymmetric and transitive on every sorted (n, k) configuration"""
        configs = [
            tuple(sorted(c, reverse=True))
            for c in combinations_with_replacement(range(n + 1), k)
            if sum(c) == n
        ]
        for a in configs:
            assert majorizes(a, a)
            for b in configs:
                if majorizes(a, b) and majorizes(b, a):
                    assert a == b
                if not majorizes(a, b):
                    continue
                for c in configs:
                    if majorizes(b, c):
                        assert majorizes(a, c)

    def test_concatenation_of_ordered_pairs(self):
        """c1 >= c2 and d1 >= d2 give c1++d1 >= c2++d2 on random ordered pairs"""
        generator = np.random.default_rng(31)
        for _ in range(500):
            c1, c2 = _ordered_pair(generator)
            d1, d2 = _ordered_pair(generator)
            assert majorizes(concatenate(c1, d1), concatenate(c2, d2))


@pytest.mark.unit
class TestSortedConfiguration:
    def test_validation(self):
        """Entries must be non-negative and descending"""
        assert SortedConfiguration.of([1, 3, 2]).counts == (3, 2, 1)
        with pytest.raises(ValueError):
            SortedConfiguration((1, 2))
        with pytest.raises(ValueError):
            SortedConfiguration((2, -1))

    def test_aggregates(self):
        config = SortedConfiguration((4, 2, 0))
        assert config.n == 6
        assert config.k == 3
        assert config.prefix_sums() == [4, 6, 6]
        assert config.remaining() == 2

    def test_size_classes(self):
        """Zero-size opinions are not a class"""
        assert size_classes((4, 4, 2, 0)) == {4: 2, 2: 1}


@pytest.mark.unit
class TestBlockStructure:
    def test_worked_example(self):
        """(4,4,2,2,2) over (3,3,3,3,2) splits after the fourth column"""
        blocks = block_structure((4, 4, 2, 2, 2), (3, 3, 3, 3, 2))
        assert blocks.boundaries == (0, 4, 5)
        assert blocks.blocks() == [(0, 4), (4, 5)]
        assert blocks.block_of(2) == (0, 4)
        assert blocks.block_of(4) == (4, 5)

    def test_equal_rows_split_everywhere(self):
        """Identical rows give single-column blocks"""
        assert block_structure((2, 1, 1), (2, 1, 1)).blocks() == [(0, 1), (1, 2), (2, 3)]

    def test_requires_order(self):
        with pytest.raises(MajorizationError):
            block_structure((3, 3, 2, 2), (4, 3, 2, 1))

    def test_rejects_unsorted_rows(self):
        """Boundaries are sorted-column indices, so unsorted rows are refused"""
        with pytest.raises(ValueError):
            block_structure((2, 4, 2, 2, 4), (3, 3, 3, 3, 2))
        with pytest.raises(ValueError):
            block_structure((4, 4, 2, 2, 2), (2, 3, 3, 3, 3))


@pytest.mark.unit
class TestFMap:
    """f(c) keeps the total and majorizes c"""

    def test_exact_total(self):
        """Rational f sums to exactly n"""
        assert sum(f_map((5, 3, 1, 1), exact=True)) == Fraction(10)

    def test_random_configurations(self):
        """f(c) majorizes c on random configurations"""
        generator = np.random.default_rng(2024)
        for _ in range(2000):
            k = int(generator.integers(2, 65))
            n = int(generator.integers(2, 5000))
            counts = generator.multinomial(n, generator.dirichlet(np.ones(k)))
            c = sorted((int(x) for x in counts), reverse=True)
            f = f_map(c)
            assert sum(f) == pytest.approx(n, abs=1e-9 * n)
            assert majorizes(f, c)


@pytest.mark.unit
class TestConfigurationLaws:
    """dist_voter and dist_3maj"""

    def test_small_example(self):
        """From (2, 1) consensus has probability 2/9 (Voter) and 20/81 (3-Majority)"""
        voter = dist_voter((2, 1), exact=True)
        three = dist_3maj((2, 1), exact=True)
        assert voter.support == {(3, 0): Fraction(2, 9), (2, 1): Fraction(7, 9)}
        assert three.support == {(3, 0): Fraction(20, 81), (2, 1): Fraction(61, 81)}

    def test_matches_transition_law(self, small_partitions):
        """The size-class law equals the opinion-level law after sorting"""
        for counts in small_partitions:
            for dynamics, dist in ((Dynamics.VOTER, dist_voter), (Dynamics.THREE_MAJORITY, dist_3maj)):
                expected = transition_law(counts, dynamics, exact=True).sorted_outcomes()
                assert dist(counts, exact=True).support == expected

    def test_float_law_is_close_to_exact(self):
        exact = dist_3maj((5, 3, 2), exact=True)
        approx = dist_3maj((5, 3, 2))
        assert approx.is_close(exact)


@pytest.mark.unit
class TestDistributions:
    """Distribution containers and their JSON form"""

    def test_normalization_is_checked(self):
        with pytest.raises(ValueError):
            OneStepDistribution({(2, 0): Fraction(1, 2)})
        with pytest.raises(ValueError):
            OneStepDistribution({(2, 0): -0.5, (1, 1): 1.5})

    def test_json_keeps_rationals(self):
        """Rational weights travel as p/q strings"""
        law = dist_3maj((2, 1), exact=True)
        restored = OneStepDistribution.from_json(law.to_json())
        assert restored.support == law.support
        assert '"20/81"' in law.to_json()

    def test_joint_marginals_and_conditionals(self):
        joint = JointDistribution(
            {
                ((2, 0), (2, 0)): Fraction(1, 2),
                ((2, 0), (1, 1)): Fraction(1, 4),
                ((1, 1), (1, 1)): Fraction(1, 4),
            }
        )
        assert joint.left.probability((2, 0)) == Fraction(3, 4)
        assert joint.right.probability((1, 1)) == Fraction(1, 2)
        assert joint.conditional_right((2, 0)).probability((1, 1)) == Fraction(1, 3)
        assert joint.swapped().left.support == joint.right.support
        restored = JointDistribution.from_json(joint.to_json())
        assert restored.support == joint.support


@pytest.mark.slow
class TestFMapAtScale:
    def test_hundred_thousand_configurations(self):
        """f(c) majorizes c and keeps n across n in [2, 10^4] and k in [2, 256]"""
        generator = np.random.default_rng(7)
        for _ in range(100_000):
            k = int(generator.integers(2, 257))
            n = int(generator.integers(2, 10_001))
            counts = generator.multinomial(n, generator.dirichlet(np.ones(k)))
            c = sorted((int(x) for x in counts), reverse=True)
            f = f_map(c)
            assert abs(sum(f) - n) <= 1e-12 * n
            assert majorizes(f, c)
