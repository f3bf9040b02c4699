"""Conversions between win probability and Elo advantage, small-sample
posteriors, averaging of ratings and sample-size planning."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from scelo.core import BETA
from scelo.errors import RangeViolation, RatingError

DEFAULT_PRIOR_WEIGHT = 1.0
DEFAULT_GRID = 100
_GEOMETRIC_EPS = 1e-9


def _finite(*xs: float) -> None:
    for x in xs:
        if not math.isfinite(x):
            raise RatingError(f"expected a finite value, got {x}")


def win_prob(r_a: float, r_b: float) -> float:
    """Probability that a player rated ``r_a`` beats one rated ``r_b``."""
    _finite(r_a, r_b)
    # logistic form avoids overflow of 10**x for large gaps
    x = BETA * (r_a - r_b)
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def win_prob_array(r_a: np.ndarray, r_b: np.ndarray) -> np.ndarray:
    """Vectorized :func:`win_prob` with no finiteness check."""
    return 0.5 * (1.0 + np.tanh(0.5 * BETA * (np.asarray(r_a) - np.asarray(r_b))))


def advantage_from_prob(p: float) -> float:
    """Elo advantage whose win probability is ``p``."""
    if not 0.0 < p < 1.0:
        raise RangeViolation(f"probability must lie strictly in (0, 1), got {p}")
    return math.log(p / (1.0 - p)) / BETA


@dataclass(frozen=True)
class BetaPosterior:
    alpha: float
    beta_param: float
    prior_weight: float = DEFAULT_PRIOR_WEIGHT

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta_param)

    @property
    def variance(self) -> float:
        a, b = self.alpha, self.beta_param
        return a * b / (a + b + 1.0) / (a + b) ** 2

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


def beta_posterior(
    wins: float, losses: float, prior_weight: float = DEFAULT_PRIOR_WEIGHT
) -> BetaPosterior:
    """Beta posterior for a win probability after ``wins`` and ``losses``.

    Counts may be fractional, so draws can enter as half a win plus half
    a loss.
    """
    if prior_weight <= 0:
        raise RatingError(f"prior_weight must be > 0, got {prior_weight}")
    if wins < 0 or losses < 0:
        raise RatingError("win and loss counts must be >= 0")
    return BetaPosterior(wins + prior_weight, losses + prior_weight, prior_weight)


@dataclass(frozen=True)
class WdlPosterior:
    w: float
    d: float
    l: float  # noqa: E741
    alpha_ij: float
    beta_ij: float


def wdl_posterior(n_w: int, n_d: int, n_l: int) -> WdlPosterior:
    """Win/draw/loss probabilities from a flat Dirichlet prior.

    ``alpha_ij`` is the log-odds of a win against a loss and ``beta_ij``
    the log-odds of a draw. Both stay finite for any counts.
    """
    if min(n_w, n_d, n_l) < 0:
        raise RatingError("counts must be >= 0")
    n = n_w + n_d + n_l + 3
    w, d = (n_w + 1) / n, (n_d + 1) / n
    l = 1.0 - (w + d)  # noqa: E741
    return WdlPosterior(
        w, d, l, math.log((n_w + 1) / (n_l + 1)), math.log((n_d + 1) / (n - n_d - 1))
    )


class MomentMethod(str, Enum):
    APPROX = "approx"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class AdvantageMoments:
    mean: float
    stdev: float
    method: MomentMethod


def advantage_moments_approx(
    wins: float, losses: float, prior_weight: float = DEFAULT_PRIOR_WEIGHT
) -> AdvantageMoments:
    """Mean and spread of the Elo advantage by mapping mean +/- one sigma.

    The beta posterior's ``mean - std`` and ``mean + std`` are converted
    to advantages; the midpoint is the mean and the half-range the spread.
    """
    post = beta_posterior(wins, losses, prior_weight)
    x0, x1 = post.mean - post.std, post.mean + post.std
    if x0 <= 0.0 or x1 >= 1.0:
        raise RangeViolation(
            f"mean +/- sigma interval ({x0:.4g}, {x1:.4g}) leaves (0, 1); "
            "use the numeric moments or a larger prior weight"
        )
    a0, a1 = advantage_from_prob(x0), advantage_from_prob(x1)
    return AdvantageMoments((a0 + a1) / 2.0, (a1 - a0) / 2.0, MomentMethod.APPROX)


def advantage_moments_numeric(
    wins: float,
    losses: float,
    grid: int = DEFAULT_GRID,
    prior_weight: float = DEFAULT_PRIOR_WEIGHT,
) -> AdvantageMoments:
    """Mean and spread of the Elo advantage by midpoint integration.

    The beta density is sampled at ``grid`` cell midpoints of (0, 1),
    normalized to unit mass, and used to weight the advantage and its
    square.
    """
    if grid < 100:
        raise RatingError(f"grid must have at least 100 cells, got {grid}")
    post = beta_posterior(wins, losses, prior_weight)
    p = (np.arange(grid) + 0.5) / grid
    logw = (post.alpha - 1.0) * np.log(p) + (post.beta_param - 1.0) * np.log1p(-p)
    w = np.exp(logw - logw.max())
    w /= w.sum()
    adv = np.log(p / (1.0 - p)) / BETA
    mean = float(np.dot(w, adv))
    var = float(np.dot(w, (adv - mean) ** 2))
    return AdvantageMoments(mean, math.sqrt(var), MomentMethod.NUMERIC)


def advantage_moments(
    wins: float,
    losses: float,
    method: MomentMethod | str = MomentMethod.APPROX,
    prior_weight: float = DEFAULT_PRIOR_WEIGHT,
) -> AdvantageMoments:
    """Dispatch to the approximate or numeric moments.

    The approximate method falls back to the numeric one when its
    one-sigma interval leaves (0, 1), which only happens for prior
    weights below 1.
    """
    method = MomentMethod(method)
    if method is MomentMethod.APPROX:
        try:
            return advantage_moments_approx(wins, losses, prior_weight)
        except RangeViolation:
            pass
    return advantage_moments_numeric(wins, losses, prior_weight=prior_weight)


def generalized_average(values: Sequence[float], weights: Sequence[float], d: float) -> float:
    """Weighted power mean ``(sum w x**d / sum w) ** (1/d)``.

    ``d = 1`` is the arithmetic mean, ``d = -1`` the harmonic mean and
    ``d = 2`` the RMS. For ``|d| < 1e-9`` the weighted geometric mean is
    returned.
    """
    x = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if x.shape != w.shape or x.ndim != 1 or x.size == 0:
        raise RatingError("values and weights must be non-empty and of equal length")
    if np.any(w <= 0):
        raise RatingError("weights must be positive")
    if d <= 0 and np.any(x <= 0):
        raise RatingError("values must be positive when d <= 0")
    if np.any(x < 0) and not float(d).is_integer():
        raise RatingError("mixed-sign values need an integer exponent")
    wn = w / w.sum()
    if abs(d) < _GEOMETRIC_EPS:
        return float(np.exp(np.dot(wn, np.log(x))))
    with np.errstate(divide="ignore", over="ignore"):
        m = float(np.dot(wn, x**d))
    if m < 0:
        if not (float(d).is_integer() and int(d) % 2):
            raise RatingError("negative power sum has no real root for this d")
        return -((-m) ** (1.0 / d))
    return m ** (1.0 / d)


def elo_average(opponent: float, component_ratings: Sequence[float]) -> float:
    """Single rating with the same mean win probability as the components
    have against ``opponent``."""
    p = mean_win_prob(opponent, component_ratings)
    return opponent + advantage_from_prob(p)


def mean_win_prob(opponent: float, component_ratings: Sequence[float]) -> float:
    if len(component_ratings) == 0:
        raise RatingError("need at least one component rating")
    return sum(win_prob(r, opponent) for r in component_ratings) / len(component_ratings)


def population_mean_rating(rating: float, p: float) -> float:
    """Average opponent rating implied by a player rated ``rating`` who
    scores ``p`` against the population."""
    return rating - advantage_from_prob(p)


def population_improvement(p1: float, p2: float) -> float:
    """Rating gain of a second population over a first, from the scores
    ``p1`` and ``p2`` one reference player achieves against them."""
    for p in (p1, p2):
        if not 0.0 < p < 1.0:
            raise RangeViolation(f"probability must lie strictly in (0, 1), got {p}")
    return (math.log((1 - p2) / p2) - math.log((1 - p1) / p1)) / BETA


def required_sample_size(advantage: float, k_sigma: float, rounding: str = "ceil") -> int:
    """Games needed to detect ``advantage`` at ``k_sigma`` standard errors.

    The observed score of the stronger side is compared against an even
    coin. The standard error of that difference adds the variances of the
    two, ``1/4 + p(1 - p)`` per game.

    Args:
        advantage: true Elo advantage, > 0.
        k_sigma: required significance in standard errors, > 0.
        rounding: ``"ceil"`` for the smallest sufficient N, ``"nearest"``
            for the rounded real-valued N.
    """
    if not advantage > 0:
        raise RangeViolation(f"advantage must be > 0, got {advantage}")
    if not k_sigma > 0:
        raise RangeViolation(f"k_sigma must be > 0, got {k_sigma}")
    p = win_prob(advantage, 0.0)
    n = k_sigma**2 * (0.25 + p * (1 - p)) / (p - 0.5) ** 2
    if rounding == "ceil":
        return max(1, math.ceil(n - 1e-9))
    if rounding == "nearest":
        return max(1, int(math.floor(n + 0.5)))
    raise RatingError(f"unknown rounding {rounding!r}")
