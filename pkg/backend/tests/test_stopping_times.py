"""
Tests for stopping-time detection on per-step count paths
"""

import pytest
from dynamics import new_population, run_until_consensus
from stopping_times import detect_stopping_times

PATH = [(4, 3, 3), (5, 2, 3), (6, 1, 3), (8, 0, 2), (10, 0, 0)]


@pytest.mark.unit
class TestDetectStoppingTimes:
    """First-hit detection on hand-built paths"""

    def test_first_hits(self):
        """Every predicate reports the first step at which it holds"""
        report = detect_stopping_times(PATH, pair=(0, 1))

        assert report.delta0 == pytest.approx(0.1)
        assert report.alpha0 == pytest.approx(0.4)
        assert report.linf0 == pytest.approx(0.4)
        assert report.tau_linf_minus == 0
        assert report.tau_weak == 1
        assert report.tau_delta_up == 1
        assert report.tau_delta_plus == 2
        assert report.tau_i_up == 3
        assert report.tau_linf_up == 3
        assert report.tau_linf_plus == 3
        assert report.tau_cons == 4

    def test_never_hit_is_none(self):
        """Predicates that never hold stay None"""
        report = detect_stopping_times(PATH, pair=(0, 1))
        assert report.tau_i_down is None
        assert report.tau_linf_down is None
        assert report.tau_bad is None

    def test_absolute_steps(self):
        """start_step shifts every reported time"""
        report = detect_stopping_times(PATH, pair=(0, 1), start_step=100)
        assert report.tau_weak == 101
        assert report.tau_cons == 104

    def test_bad_event_excludes_the_largest_opinion(self):
        """tau_bad looks at the largest opinion other than the argmax"""
        report = detect_stopping_times([(3, 3, 3, 1)], pair=(0, 3))
        assert report.tau_bad == 0

    def test_reference_overrides(self):
        """delta0 and the C / sqrt(n) constant can be given explicitly"""
        report = detect_stopping_times(PATH, pair=(0, 1), delta0=0.5, plus_constant=2.0)
        assert report.tau_delta_up == 3
        assert report.tau_delta_plus == 3

    def test_invalid_input(self):
        """Empty paths and degenerate pairs are rejected"""
        with pytest.raises(ValueError):
            detect_stopping_times([], pair=(0, 1))
        with pytest.raises(ValueError):
            detect_stopping_times(PATH, pair=(1, 1))


@pytest.mark.integration
class TestTrajectoryInput:
    """Detection on recorded trajectories"""

    def test_trajectory_with_events(self, rng):
        """Event-recorded trajectories are expanded to every step"""
        state = new_population(20, [10, 6, 4])
        result = run_until_consensus(state, rng, stride=50, record_events=True)
        report = detect_stopping_times(result.trajectory, pair=(0, 1))
        assert report.tau_cons == result.tau_cons

    def test_coarse_trajectory_is_rejected(self, rng):
        """A coarse trajectory without events could hide a hit"""
        state = new_population(20, [10, 10])
        result = run_until_consensus(state, rng, stride=50)
        with pytest.raises(ValueError):
            detect_stopping_times(result.trajectory, pair=(0, 1))
