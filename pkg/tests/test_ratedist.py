import math

import numpy as np
import pytest

from cheaptalk.errors import InfeasibleDistortionError
from cheaptalk.ratedist import (
    RDTuple,
    achievable_tuple,
    asymptotic_experiment,
    game_rate_bound,
    lloyd_max_quantizer,
    team_rate_distortion,
)

TWO_LEVEL_GAUSSIAN_DISTORTION = 1.0 - 2.0 / math.pi


class TestTeamRateDistortion:
    def test_examples(self):
        assert team_rate_distortion(1.0, 0.25) == 1.0
        assert team_rate_distortion(1.0, 1.0) == 0.0
        assert team_rate_distortion(1.0, 2.0) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            team_rate_distortion(1.0, 0.0)
        with pytest.raises(ValueError):
            team_rate_distortion(-1.0, 0.5)


class TestAchievableTuple:
    def test_examples(self):
        tup = achievable_tuple(1.0, 0.25, 1.0)
        assert (tup.rate, tup.de, tup.dd) == (1.0, 1.25, 0.25)
        zero_rate = achievable_tuple(0.0, 1.0, 0.5)
        assert (zero_rate.de, zero_rate.dd) == (1.25, 1.0)
        team = achievable_tuple(0.7, 0.4, 0.0)
        assert team.de == team.dd == 0.4

    def test_validation(self):
        with pytest.raises(ValueError):
            achievable_tuple(-0.5, 0.25, 1.0)
        with pytest.raises(ValueError):
            achievable_tuple(1.0, 0.0, 1.0)

    def test_rdtuple_invariant(self):
        with pytest.raises(ValueError):
            RDTuple(rate=1.0, de=0.2, dd=0.5)


class TestGameRateBound:
    def test_example(self):
        assert game_rate_bound(1.0, 1.0, 1.25, 0.5) == pytest.approx(1.0)

    def test_zero_beyond_variance(self):
        assert game_rate_bound(1.0, 0.5, 3.0, 2.0) == 0.0

    def test_infeasible(self):
        with pytest.raises(InfeasibleDistortionError):
            game_rate_bound(1.0, 1.0, 0.5, 0.5)

    def test_matches_team_function_on_random_feasible_inputs(self):
        rng = np.random.default_rng(0)
        checked = 0
        for _ in range(1000):
            sigma_sq = rng.uniform(0.1, 4.0)
            b = rng.uniform(-2.0, 2.0)
            dd = rng.uniform(0.01, 3.0)
            de = b * b + rng.uniform(0.01, 3.0)
            bound = game_rate_bound(sigma_sq, b, de, dd)
            assert bound == pytest.approx(
                team_rate_distortion(sigma_sq, min(dd, de - b * b)), abs=1e-12
            )
            checked += 1
        assert checked == 1000


class TestLloydMax:
    def test_two_level_distortion(self):
        _, dq = lloyd_max_quantizer(1.0, 2)
        assert dq == pytest.approx(TWO_LEVEL_GAUSSIAN_DISTORTION, abs=1e-9)

    def test_distortion_decreases_with_levels(self):
        d = [lloyd_max_quantizer(1.0, 2**r)[1] for r in range(0, 4)]
        assert all(d[i] > d[i + 1] for i in range(len(d) - 1))
        assert d[0] == pytest.approx(1.0, abs=1e-9)  # one level: the variance


class TestAsymptoticExperiment:
    def test_matches_exact_formula(self):
        rows = asymptotic_experiment(1.0, 1.0, 1, [2, 4, 8], samples=200_000, seed=5)
        for row in rows:
            exact = ((row.n - 1) * TWO_LEVEL_GAUSSIAN_DISTORTION + 1.0) / row.n
            assert row.jd_exact == pytest.approx(exact, abs=1e-9)
            assert row.jd_emp == pytest.approx(exact, abs=4 * row.jd_stderr)

    def test_encoder_decoder_gap_is_bias_squared(self):
        for b in (0.5, 1.0):
            rows = asymptotic_experiment(1.0, b, 1, [4, 16], samples=200_000, seed=6)
            for row in rows:
                assert row.gap_emp == pytest.approx(b * b, abs=3 * row.gap_stderr)
                assert row.je_emp - row.jd_emp == pytest.approx(row.gap_emp, abs=1e-12)

    def test_per_dimension_distortion_decreases_with_n(self):
        rows = asymptotic_experiment(1.0, 1.0, 1, [2, 4, 16, 64], samples=50_000, seed=7)
        exacts = [row.jd_exact for row in rows]
        assert all(exacts[i] > exacts[i + 1] for i in range(len(exacts) - 1))
        # the tail row sits within its expected distance of the scalar floor
        tail = rows[-1]
        slack = (1.0 - TWO_LEVEL_GAUSSIAN_DISTORTION) / tail.n
        assert tail.jd_emp <= TWO_LEVEL_GAUSSIAN_DISTORTION + slack + 3 * tail.jd_stderr

    def test_deterministic_given_seed(self):
        a = asymptotic_experiment(1.0, 1.0, 1, [4], samples=50_000, seed=8)
        b = asymptotic_experiment(1.0, 1.0, 1, [4], samples=50_000, seed=8)
        assert a[0].jd_emp == b[0].jd_emp and a[0].je_emp == b[0].je_emp

    def test_validation(self):
        with pytest.raises(ValueError):
            asymptotic_experiment(1.0, 1.0, 1, [1], samples=1000, seed=0)
        with pytest.raises(ValueError):
            asymptotic_experiment(1.0, 1.0, -1, [4], samples=1000, seed=0)
        with pytest.raises(ValueError):
            asymptotic_experiment(0.0, 1.0, 1, [4], samples=1000, seed=0)
