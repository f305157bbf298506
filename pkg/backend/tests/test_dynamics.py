"""
Tests for the vertex-level simulation of 3-Majority, Voter and 2-Choices
"""

from collections import Counter
from fractions import Fraction

import pytest
from analytics import transition_law
from dynamics import (
    Dynamics,
    OpinionChange,
    all_distinct_counts,
    balanced_counts,
    balanced_on_kappa,
    default_max_steps,
    new_population,
    run_until_consensus,
    step_2choices,
    step_3majority,
    step_voter,
)
from random_source import RandomSource, derive_seed
from scipy import stats


@pytest.mark.unit
class TestPopulation:
    """Test population construction and cached aggregates"""

    def test_contiguous_assignment(self):
        """Opinions are laid out in index order"""
        state = new_population(5, [2, 0, 3])
        assert state.opinions == [0, 0, 2, 2, 2]
        assert state.counts == [2, 0, 3]
        assert state.remaining == 2
        assert state.square_sum == 13
        assert state.gamma == pytest.approx(13 / 25)

    def test_rejects_bad_counts(self):
        """Counts must be non-negative and sum to n"""
        with pytest.raises(ValueError):
            new_population(5, [2, 2])
        with pytest.raises(ValueError):
            new_population(3, [4, -1])
        with pytest.raises(ValueError):
            new_population(0, [])

    def test_initial_conditions(self):
        """Balanced, all-distinct and balanced-on-kappa starts"""
        assert balanced_counts(10, 3) == [4, 3, 3]
        assert all_distinct_counts(4) == [1, 1, 1, 1]
        assert balanced_on_kappa(10, 4, 2) == [5, 5, 0, 0]
        with pytest.raises(ValueError):
            balanced_counts(3, 4)

    def test_apply_updates_caches(self):
        """An opinion change moves one vertex and keeps every cache exact"""
        state = new_population(3, [2, 1])
        change = state.apply(2, 0)

        assert change == OpinionChange(step=1, vertex=2, losing=1, gaining=0)
        assert state.counts == [3, 0]
        assert state.square_sum == 9
        assert state.remaining == 1
        assert state.is_consensus
        state.verify()

    def test_apply_without_change_still_counts_the_step(self):
        """Adopting the current opinion is a step but not an event"""
        state = new_population(3, [2, 1])
        assert state.apply(0, 0) is None
        assert state.step == 1
        assert state.counts == [2, 1]

    def test_copy_is_independent(self):
        """Copies do not share opinion lists"""
        state = new_population(4, [2, 2])
        clone = state.copy()
        clone.apply(0, 1)
        assert state.counts == [2, 2]
        assert clone.counts == [1, 3]


@pytest.mark.unit
class TestStepRules:
    """Test the single-step update rules"""

    @pytest.mark.parametrize("step", [step_3majority, step_voter, step_2choices])
    def test_step_preserves_invariants(self, step, rng):
        """Counts stay consistent with opinions after many steps"""
        state = new_population(20, [7, 7, 6])
        for _ in range(500):
            step(state, rng)
        state.verify()
        assert state.step == 500

    def test_consensus_is_absorbing(self, rng):
        """No rule can leave a consensus configuration"""
        for step in (step_3majority, step_voter, step_2choices):
            state = new_population(6, [0, 6])
            for _ in range(100):
                assert step(state, rng) is None
            assert state.counts == [0, 6]

    @pytest.mark.parametrize(
        "dynamics,step",
        [
            (Dynamics.THREE_MAJORITY, step_3majority),
            (Dynamics.VOTER, step_voter),
            (Dynamics.TWO_CHOICES, step_2choices),
        ],
    )
    def test_one_step_frequencies_match_exact_law(self, dynamics, step):
        """Simulated one-step outcomes from (2, 1) follow the exact law"""
        rng = RandomSource(derive_seed(99, 3, 2))
        start = new_population(3, [2, 1])
        trials = 20_000
        outcomes = Counter()
        for _ in range(trials):
            state = start.copy()
            step(state, rng)
            outcomes[tuple(sorted(state.counts, reverse=True))] += 1

        law = transition_law([2, 1], dynamics, exact=True).sorted_outcomes()
        keys = sorted(law)
        observed = [outcomes[key] for key in keys]
        expected = [float(law[key]) * trials for key in keys]
        assert sum(observed) == trials
        assert stats.chisquare(observed, expected).pvalue > 1e-4

    def test_exact_law_of_small_example(self):
        """From (2, 1): consensus w.p. 20/81 under 3-Majority and 2/9 under Voter"""
        three = transition_law([2, 1], Dynamics.THREE_MAJORITY, exact=True).sorted_outcomes()
        voter = transition_law([2, 1], Dynamics.VOTER, exact=True).sorted_outcomes()
        assert three == {(3, 0): Fraction(20, 81), (2, 1): Fraction(61, 81)}
        assert voter[(3, 0)] * 9 == 2
        assert voter[(2, 1)] * 9 == 7


@pytest.mark.integration
class TestRunUntilConsensus:
    """Test full runs, timeouts and trajectory recording"""

    def test_single_vertex_is_consensus_at_zero(self, rng):
        """n = 1 starts in consensus"""
        result = run_until_consensus(new_population(1, [1]), rng)
        assert result.tau_cons == 0
        assert result.steps == 0
        assert not result.timed_out

    def test_same_seed_same_run(self):
        """A run is a function of its seed"""
        times = [
            run_until_consensus(
                new_population(32, balanced_counts(32, 4)), RandomSource(5)
            ).tau_cons
            for _ in range(2)
        ]
        assert times[0] == times[1]
        assert times[0] is not None

    def test_timeout_is_a_result(self, rng):
        """A run that exhausts max_steps reports the timeout instead of raising"""
        result = run_until_consensus(new_population(100, [50, 50]), rng, max_steps=5)
        assert result.timed_out
        assert result.tau_cons is None
        assert result.steps == 5
        assert result.state.step == 5

    def test_reaches_consensus(self, rng):
        """Small balanced runs end in consensus with consistent caches"""
        for dynamics in Dynamics:
            state = new_population(24, balanced_counts(24, 3))
            result = run_until_consensus(state, rng, dynamics)
            assert result.tau_cons == state.step
            assert max(state.counts) == 24
            state.verify()

    def test_events_replay_to_snapshots(self, rng):
        """Replaying recorded events reproduces every snapshot"""
        state = new_population(30, balanced_counts(30, 3))
        result = run_until_consensus(state, rng, stride=7, record_events=True)
        trajectory = result.trajectory

        assert trajectory.verify_replay()
        series = trajectory.count_series()
        assert len(series) == result.tau_cons + 1
        assert series[0] == (10, 10, 10)
        assert max(series[-1]) == 30

    def test_coarse_stride_without_events_cannot_be_expanded(self, rng):
        """count_series refuses to invent the steps between coarse snapshots"""
        result = run_until_consensus(new_population(30, [15, 15]), rng, stride=10)
        with pytest.raises(ValueError):
            result.trajectory.count_series()

    def test_steps_to_kappa(self, rng):
        """kappa at or above the start hits immediately, kappa = 1 hits at consensus"""
        result = run_until_consensus(new_population(12, [4, 4, 4]), rng, kappa=3)
        assert result.steps_to_kappa == 0

        result = run_until_consensus(new_population(12, [4, 4, 4]), rng, kappa=1)
        assert result.steps_to_kappa == result.tau_cons

    def test_default_max_steps(self):
        """Timeout grows like n^1.5 log n and is at least one step"""
        assert default_max_steps(1) == 1
        assert default_max_steps(100) > default_max_steps(50) > 0


@pytest.mark.slow
class TestOneStepAtScale:
    """A million one-step samples from (2, 1) within 3 sigma of the exact law"""

    @pytest.mark.parametrize(
        "step,p",
        [(step_3majority, Fraction(20, 81)), (step_voter, Fraction(2, 9))],
    )
    def test_consensus_frequency(self, step, p):
        rng = RandomSource(derive_seed(2024, 3, 2))
        start = new_population(3, [2, 1])
        trials = 1_000_000
        hits = 0
        for _ in range(trials):
            state = start.copy()
            step(state, rng)
            hits += state.remaining == 1
        sigma = (float(p) * (1 - float(p)) / trials) ** 0.5
        assert abs(hits / trials - float(p)) <= 3 * sigma
