from __future__ import annotations

import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import numeric_best_bet
from scelo.betting import BetParams, expected_utility, optimal_bet, optimal_bet_unclamped, utility, worthwhile
from scelo.errors import RatingError


class TestUtility:
    def test_shape(self):
        a = 0.01
        assert utility(0.0, a) == 0.0
        assert utility(1.0, a) == pytest.approx(1.0, rel=0.01)
        assert utility(1e6, a) == pytest.approx(1 / a)

    @given(st.floats(-1.99, 1.99))
    def test_linear_near_zero(self, x):
        a = 0.01
        # second-order Taylor remainder
        assert abs(utility(x, a) - x) <= a * x * x / 2 * math.exp(a * abs(x)) + 1e-15

    def test_losing_d_hurts_twice_as_much(self):
        d = 80.0
        a = BetParams(0.5, 2.0, d_pain=d).curvature
        assert -utility(-d, a) == pytest.approx(2 * utility(d, a))


class TestWorthwhile:
    @pytest.mark.parametrize("p,r,ok", [(0.5, 2, True), (0.4, 2, False), (0.5, 3, True)])
    def test_cases(self, p, r, ok):
        assert worthwhile(p, r) is ok

    @given(st.floats(0.01, 0.99), st.floats(1.01, 20))
    def test_matches_sign_of_unclamped_bet(self, p, r):
        if abs(p * r - 1) < 1e-9:
            return
        assert worthwhile(p, r) == (optimal_bet_unclamped(BetParams(p, r, d_pain=10)) > 0)


class TestOptimalBet:
    def test_example(self):
        assert optimal_bet(BetParams(0.5, 3.0, d_pain=100.0)) == pytest.approx(100 / 3)

    @pytest.mark.parametrize("p,r", [(0.5, 2.0), (0.25, 4.0), (0.2, 5.0), (0.1, 10.0)])
    def test_zero_at_fair_odds(self, p, r):
        assert optimal_bet(BetParams(p, r, d_pain=50.0)) == 0.0

    def test_losing_bet_abstains(self):
        assert optimal_bet(BetParams(0.3, 2.0, d_pain=50.0)) == 0.0

    def test_linear_in_pain_amount(self):
        b1 = optimal_bet(BetParams(0.6, 2.5, d_pain=40.0))
        b2 = optimal_bet(BetParams(0.6, 2.5, d_pain=80.0))
        assert b2 == pytest.approx(2 * b1)

    def test_monotone_in_p(self):
        bets = [optimal_bet(BetParams(p, 2.5, d_pain=40.0)) for p in (0.45, 0.5, 0.6, 0.7, 0.9)]
        assert bets == sorted(bets)

    def test_agrees_with_numeric_maximum(self):
        rng = random.Random(13)
        for _ in range(100):
            p, r, d = rng.uniform(0.05, 0.95), rng.uniform(1.05, 10.0), rng.uniform(1.0, 1000.0)
            params = BetParams(p, r, d_pain=d)
            b = optimal_bet(params)
            ref = numeric_best_bet(p, r, d)
            assert abs(b - ref) <= 0.005 * d
            assert expected_utility(b, params) >= expected_utility(ref, params) - 1e-9 * d

    def test_curvature_given_directly(self):
        a = math.log(2) / 100
        assert optimal_bet(BetParams(0.5, 3.0, a=a)) == pytest.approx(100 / 3)

    @pytest.mark.parametrize(
        "kw", [dict(p=0, r=2, a=1), dict(p=0.5, r=1, a=1), dict(p=0.5, r=2), dict(p=0.5, r=2, a=1, d_pain=1),
               dict(p=0.5, r=2, d_pain=0)]
    )
    def test_validation(self, kw):
        with pytest.raises(RatingError):
            BetParams(**kw)
