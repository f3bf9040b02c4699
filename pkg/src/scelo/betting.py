"""Risk-averse bet sizing with exponential utility."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scelo.errors import RatingError


@dataclass(frozen=True)
class BetParams:
    """A bet paying ``r`` times the stake with probability ``p``.

    Risk aversion is given either as the utility curvature ``a`` or as
    ``d_pain``: the amount whose loss hurts twice as much as winning it
    helps. ``a = ln 2 / d_pain``.
    """

    p: float
    r: float
    a: float | None = None
    d_pain: float | None = None

    def __post_init__(self) -> None:
        if not 0 < self.p < 1:
            raise RatingError(f"p must be in (0, 1), got {self.p}")
        if not self.r > 1:
            raise RatingError(f"payout ratio must be > 1, got {self.r}")
        if (self.a is None) == (self.d_pain is None):
            raise RatingError("give exactly one of a or d_pain")
        if self.d_pain is not None and not self.d_pain > 0:
            raise RatingError("d_pain must be > 0")
        if self.a is not None and not self.a > 0:
            raise RatingError("a must be > 0")

    @property
    def curvature(self) -> float:
        return self.a if self.a is not None else math.log(2.0) / self.d_pain


def utility(x: float, a: float) -> float:
    """``(1 - exp(-a x)) / a``: linear near zero, bounded above by ``1/a``."""
    if not a > 0:
        raise RatingError("a must be > 0")
    return -math.expm1(-a * x) / a


def worthwhile(p: float, r: float) -> bool:
    """Risk-neutral test: the bet has non-negative expected profit."""
    return p * r >= 1.0


def expected_utility(b: float, params: BetParams) -> float:
    a = params.curvature
    return params.p * utility(b * (params.r - 1.0), a) + (1 - params.p) * utility(-b, a)


def optimal_bet_unclamped(params: BetParams) -> float:
    """Stationary point of expected utility; negative for losing bets."""
    p, r = params.p, params.r
    return math.log(p * (r - 1.0) / (1.0 - p)) / (params.curvature * r)


def optimal_bet(params: BetParams) -> float:
    """Stake that maximizes expected utility, or 0 when betting loses."""
    if params.p * params.r == 1.0:
        return 0.0
    return max(0.0, optimal_bet_unclamped(params))
