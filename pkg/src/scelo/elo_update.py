"""Single-player rating updates against opponents with fixed ratings.

The classic update evaluates the expected score at the prior rating and
overshoots badly when many games are played at once. The self-consistent
update solves ``R = mu + K (A - E(R))`` instead, with ``E`` evaluated at
the new rating.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from scelo.core import BETA, RatingEstimate
from scelo.errors import ConvergenceError, RangeViolation, RatingError
from scelo.probability import win_prob_array

DEFAULT_TOL = 0.05
DEFAULT_DAMPING = 0.5
DEFAULT_MAX_ITERS = 10_000
# Largest single Newton step of the flat-prior solver, in Elo points.
_MAX_STEP = 400.0

Opponents = Sequence[tuple[float, float]]


def _opponent_arrays(opponents: Opponents) -> tuple[np.ndarray, np.ndarray]:
    if len(opponents) == 0:
        return np.zeros(0), np.zeros(0)
    arr = np.asarray(opponents, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(arr)):
        raise RatingError("opponent ratings and game counts must be finite")
    if np.any(arr[:, 1] < 0):
        raise RatingError("opponent game counts must be >= 0")
    return arr[:, 0], arr[:, 1]


@dataclass(frozen=True)
class UpdateContext:
    """A player's prior, the opponents faced and the score obtained.

    Attributes:
        prior: rating estimate before the games; ``prior.k`` is K.
        opponents: (opponent rating, games played) pairs.
        actual_score: A, the sum of per-game scores. Fractional values
            from margin scoring are fine.
    """

    prior: RatingEstimate
    opponents: tuple[tuple[float, float], ...]
    actual_score: float

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "opponents", tuple((float(r), float(n)) for r, n in self.opponents)
        )
        _opponent_arrays(self.opponents)
        n = self.games
        if not (-1e-9 <= self.actual_score <= n + 1e-9):
            raise RatingError(f"actual score {self.actual_score} outside [0, {n}]")

    @property
    def games(self) -> float:
        return sum(n for _, n in self.opponents)

    @classmethod
    def from_rate(
        cls, prior: RatingEstimate, opponent: float, games: float, win_rate: float
    ) -> UpdateContext:
        """All games against one opponent at a given scoring rate."""
        return cls(prior, ((opponent, games),), games * win_rate)


@dataclass(frozen=True)
class UpdateResult:
    rating: float
    sigma: float
    iterations: int
    expected_score: float
    slope: float


def expected_score(r: float, opponents: Opponents) -> float:
    """Expected total score E(r) over all games."""
    if not math.isfinite(r):
        raise RatingError(f"rating must be finite, got {r}")
    rs, ns = _opponent_arrays(opponents)
    return float(np.dot(ns, win_prob_array(r, rs)))


def expected_score_slope(r: float, opponents: Opponents) -> float:
    """Derivative of E with respect to r."""
    if not math.isfinite(r):
        raise RatingError(f"rating must be finite, got {r}")
    rs, ns = _opponent_arrays(opponents)
    p = win_prob_array(r, rs)
    return float(BETA * np.dot(ns, p * (1.0 - p)))


def score_stdev(r: float, opponents: Opponents) -> float:
    """Binomial standard deviation of the total score at rating r."""
    rs, ns = _opponent_arrays(opponents)
    p = win_prob_array(r, rs)
    return math.sqrt(float(np.dot(ns, p * (1.0 - p))))


def classic_update(ctx: UpdateContext) -> UpdateResult:
    mu, k = ctx.prior.mu, ctx.prior.k
    e = expected_score(mu, ctx.opponents)
    return UpdateResult(
        mu + k * (ctx.actual_score - e),
        ctx.prior.sigma,
        1,
        e,
        expected_score_slope(mu, ctx.opponents),
    )


def sc_step(ctx: UpdateContext, rating: float | None = None, slope: float | None = None) -> float:
    """One slope-corrected Taylor step from ``rating`` (default: the prior).

    Passing ``slope=0`` turns the step into the classic update.
    """
    mu, k = ctx.prior.mu, ctx.prior.k
    r = mu if rating is None else rating
    e = expected_score(r, ctx.opponents)
    s = expected_score_slope(r, ctx.opponents) if slope is None else slope
    return (mu + k * (ctx.actual_score - e + s * r)) / (1.0 + s * k)


def sc_update(
    ctx: UpdateContext,
    tol: float = DEFAULT_TOL,
    damping: float = DEFAULT_DAMPING,
    max_iters: int = DEFAULT_MAX_ITERS,
    start: float | None = None,
) -> UpdateResult:
    """Self-consistent update: the fixed point of ``R = mu + K (A - E(R))``.

    Each iteration takes a slope-corrected Taylor step and moves a
    fraction ``damping`` of the way to it. Iteration stops once the
    undamped step lands within ``tol`` of the current estimate.

    Far from the opponents the slope vanishes and the raw step can
    overshoot without bound, so the root is also kept bracketed; a step
    that leaves the bracket is replaced by its midpoint.

    Raises:
        ConvergenceError: after ``max_iters`` iterations; ``last`` holds
            the final iterate.
    """
    if not ctx.prior.k > 0:
        raise RatingError("the self-consistent update needs K > 0; use sigma > 0")
    if not tol > 0 or not 0 < damping <= 1:
        raise RatingError("need tol > 0 and 0 < damping <= 1")
    mu, k = ctx.prior.mu, ctx.prior.k
    # E lies in [0, N], which pins the root of R - mu - K (A - E(R))
    lo, hi = mu + k * (ctx.actual_score - ctx.games), mu + k * ctx.actual_score
    r = mu if start is None else float(start)
    for it in range(1, max_iters + 1):
        r_hat = sc_step(ctx, r)
        done = abs(r_hat - r) < tol
        # r - r_hat has the sign of the residual at r
        if r_hat < r:
            hi = min(hi, r)
        elif r_hat > r:
            lo = max(lo, r)
        r = r + damping * (r_hat - r)
        if not done and not lo <= r <= hi:
            r = 0.5 * (lo + hi)
        if done:
            return UpdateResult(
                r,
                variance_binomial(ctx.prior.sigma, r, ctx.opponents)
                if ctx.games > 0
                else ctx.prior.sigma,
                it,
                expected_score(r, ctx.opponents),
                expected_score_slope(r, ctx.opponents),
            )
    raise ConvergenceError(f"no convergence after {max_iters} iterations", r, max_iters)


def sc_update_uninformative(
    ctx: UpdateContext, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS
) -> UpdateResult:
    """Rating that reproduces the observed score exactly, ignoring the prior.

    Newton iteration on ``E(R) = A`` starting from the prior mean, with
    steps capped at 400 Elo so that far starts cannot overshoot wildly.

    Raises:
        RangeViolation: when A is 0 or N, which has no finite solution.
    """
    n, a = ctx.games, ctx.actual_score
    if not 0.0 < a < n:
        raise RangeViolation(
            f"actual score {a} of {n} games is a clean sweep; the flat-prior rating is infinite"
        )
    r = ctx.prior.mu
    for it in range(1, max_iters + 1):
        e = expected_score(r, ctx.opponents)
        s = expected_score_slope(r, ctx.opponents)
        step = min(max((a - e) / s, -_MAX_STEP), _MAX_STEP)
        r += step
        if abs(step) < tol:
            sigma = score_stdev(r, ctx.opponents) / expected_score_slope(r, ctx.opponents)
            return UpdateResult(
                r, sigma, it, expected_score(r, ctx.opponents),
                expected_score_slope(r, ctx.opponents),
            )
    raise ConvergenceError(f"no convergence after {max_iters} iterations", r, max_iters)


def variance_moving_average(sigma_prev: float, m: float, n_t: float, delta_r: float) -> float:
    """Blend the squared rating change into a running variance.

    ``m`` is the effective memory in games; ``n_t`` the games just played.
    """
    if not m > 0 or n_t < 0:
        raise RatingError("need m > 0 and n_t >= 0")
    return math.sqrt((n_t * delta_r**2 + m * sigma_prev**2) / (n_t + m))


def variance_binomial(sigma_prev: float, r_new: float, opponents: Opponents) -> float:
    """Posterior rating uncertainty from binomial score noise.

    The score spread is evaluated at the updated rating ``r_new``.
    """
    rs, ns = _opponent_arrays(opponents)
    if ns.sum() <= 0:
        raise RatingError("need at least one game")
    k = BETA * sigma_prev**2
    return k * score_stdev(r_new, opponents) / (1.0 + k * expected_score_slope(r_new, opponents))


def posterior_grid_moments(
    games: Sequence[tuple[float, float, float]],
    grid_n: int = 100,
    pad: float = 200.0,
) -> tuple[float, float]:
    """Posterior mean and standard deviation of a rating on a grid.

    Uses a flat prior and the product of per-game likelihoods over
    ``grid_n`` evenly spaced ratings spanning the opponents' range widened
    by ``pad`` on each side. Work is done in log space so large game
    counts do not underflow.

    Args:
        games: (opponent rating, games, score) triples, where score is the
            player's total against that opponent.
        grid_n: number of grid points, at least 100.
        pad: Elo points added below the weakest and above the strongest
            opponent.
    """
    if grid_n < 100:
        raise RatingError(f"grid_n must be >= 100, got {grid_n}")
    arr = np.asarray(games, dtype=float).reshape(-1, 3)
    if arr.size == 0 or arr[:, 1].sum() <= 0:
        raise RatingError("need at least one game")
    if np.any(arr[:, 2] < 0) or np.any(arr[:, 2] > arr[:, 1]):
        raise RatingError("scores must lie in [0, games]")
    rs, ns, wins = arr[:, 0], arr[:, 1], arr[:, 2]
    grid = np.linspace(rs.min() - pad, rs.max() + pad, grid_n)
    x = BETA * (grid[:, None] - rs[None, :])
    # log p = -log(1+e^-x), log(1-p) = -log(1+e^x)
    loglik = (-(wins * np.logaddexp(0.0, -x)) - (ns - wins) * np.logaddexp(0.0, x)).sum(axis=1)
    w = np.exp(loglik - loglik.max())
    total = w.sum()
    if not (np.isfinite(total) and total > 0):
        raise RatingError("posterior mass vanished on the grid")
    w /= total
    mean = float(np.dot(w, grid))
    return mean, math.sqrt(float(np.dot(w, (grid - mean) ** 2)))
