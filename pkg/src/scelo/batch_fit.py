"""Simultaneous posterior-maximum-likelihood fit of every rating in a graph.

Every player gets the self-consistent update at once, with expected scores
and slopes taken from the previous iterate of all players (Jacobi sweeps).
Players with ``sigma = 0`` are anchors and never move.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from scelo.core import BETA, TournamentGraph
from scelo.errors import ConvergenceError, RatingError
from scelo.probability import win_prob_array

DEFAULT_BATCH_MAX_ITERS = 100_000


@dataclass(frozen=True)
class BatchConfig:
    tol: float = 0.05
    max_iters: int = DEFAULT_BATCH_MAX_ITERS
    damping: float = 0.5
    target_mean: float | None = None
    rating_floor: float | None = None

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise RatingError(f"tol must be > 0, got {self.tol}")
        if not 0 < self.damping <= 1:
            raise RatingError(f"damping must be in (0, 1], got {self.damping}")
        if self.max_iters < 1:
            raise RatingError("max_iters must be >= 1")


@dataclass(frozen=True)
class BatchResult:
    ratings: Mapping[str, float]
    iterations: int
    converged: bool
    shift_applied: float = 0.0
    max_change: float = 0.0


@dataclass(frozen=True)
class _Arrays:
    ids: tuple[str, ...]
    mu: np.ndarray
    k: np.ndarray
    ei: np.ndarray
    ej: np.ndarray
    games: np.ndarray
    score: np.ndarray  # per-player actual score A


MAX_STEP = 400.0


def _arrays(graph: TournamentGraph) -> _Arrays:
    ids = graph.identities
    pos = {p: n for n, p in enumerate(ids)}
    mu = np.array([graph.players[p].mu for p in ids], dtype=float)
    k = np.array([graph.players[p].k for p in ids], dtype=float)
    ei = np.array([pos[e.i] for e in graph.edges], dtype=np.intp)
    ej = np.array([pos[e.j] for e in graph.edges], dtype=np.intp)
    games = np.array([e.games for e in graph.edges], dtype=float)
    ws = np.array([e.weighted_score_i for e in graph.edges], dtype=float)
    score = np.bincount(ei, ws, len(ids)) + np.bincount(ej, games - ws, len(ids))
    return _Arrays(ids, mu, k, ei, ej, games, score)


def _expected_and_slope(a: _Arrays, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = len(a.ids)
    p = win_prob_array(r[a.ei], r[a.ej])
    e = np.bincount(a.ei, a.games * p, m) + np.bincount(a.ej, a.games * (1.0 - p), m)
    v = a.games * p * (1.0 - p)
    s = BETA * (np.bincount(a.ei, v, m) + np.bincount(a.ej, v, m))
    return e, s


def fit_pml(graph: TournamentGraph, cfg: BatchConfig | None = None) -> BatchResult:
    """Fit all ratings so that ``R_i = mu_i + K_i (A_i - E_i(R))`` holds.

    Args:
        graph: players carry their priors; ``K_i = BETA * sigma_i**2``.
        cfg: tolerance, damping, iteration cap and optional target mean.
            A target mean shifts all ratings uniformly after the fit and is
            refused when anchors fix the scale.

    Raises:
        ConvergenceError: when the cap is hit; ``last`` is a
            :class:`BatchResult` with ``converged=False``.
    """
    cfg = cfg or BatchConfig()
    a = _arrays(graph)
    frozen = a.k == 0
    if cfg.target_mean is not None and frozen.any():
        raise RatingError("target_mean cannot be combined with anchored (sigma=0) players")
    r = a.mu.copy()
    it, change, converged = 0, 0.0, len(graph.edges) == 0
    while not converged and it < cfg.max_iters:
        it += 1
        e, s = _expected_and_slope(a, r)
        r_hat = (a.mu + a.k * (a.score - e + s * r)) / (1.0 + s * a.k)
        # far from all opponents the slope vanishes and the raw step explodes
        r_hat = r + np.clip(r_hat - r, -MAX_STEP, MAX_STEP)
        if cfg.rating_floor is not None:
            np.maximum(r_hat, cfg.rating_floor, out=r_hat)
        r_hat[frozen] = a.mu[frozen]
        change = float(np.max(np.abs(r_hat - r)))
        r = r + cfg.damping * (r_hat - r)
        r[frozen] = a.mu[frozen]
        converged = change < cfg.tol
    shift = 0.0
    if cfg.target_mean is not None and len(r):
        shift = cfg.target_mean - float(r.mean())
        r = r + shift
    result = BatchResult(dict(zip(a.ids, r.tolist())), it, converged, shift, change)
    if not converged:
        raise ConvergenceError(
            f"batch fit did not converge in {cfg.max_iters} sweeps (max change {change:.3g})",
            result,
            it,
        )
    return result


def pml_residuals(graph: TournamentGraph, ratings: Mapping[str, float]) -> dict[str, float]:
    """``R_i - mu_i - K_i (A_i - E_i(R))`` per non-anchor player."""
    a = _arrays(graph)
    r = np.array([ratings[p] for p in a.ids], dtype=float)
    e, _ = _expected_and_slope(a, r)
    res = r - a.mu - a.k * (a.score - e)
    return {p: float(x) for p, x, k in zip(a.ids, res, a.k) if k > 0}


def classic_batch_step(graph: TournamentGraph, k: float | None = None) -> dict[str, float]:
    """One simultaneous classic update ``R_i = mu_i + K_i (A_i - E_i(mu))``.

    Args:
        k: common K for every non-anchor player; by default each player's
            own ``BETA * sigma**2``. Anchors (sigma 0) keep K = 0 either way.
    """
    a = _arrays(graph)
    kk = a.k if k is None else np.where(a.k == 0, 0.0, float(k))
    e, _ = _expected_and_slope(a, a.mu)
    r = a.mu + kk * (a.score - e)
    r[kk == 0] = a.mu[kk == 0]
    return dict(zip(a.ids, r.tolist()))


def rating_sum_delta(before: Mapping[str, float], after: Mapping[str, float]) -> float:
    """Change in the sum of ratings; the player sets must match."""
    if set(before) != set(after):
        raise RatingError("rating maps cover different players")
    return math.fsum(after.values()) - math.fsum(before.values())


def expected_sum_change(k_a: float, k_b: float, q: float, f: float) -> float:
    """Expected change of the rating sum per game between two groups.

    Group A plays with adjustment factor ``k_a``, group B with ``k_b``.
    ``q`` is the win probability the ratings predict for A and ``f`` the
    frequency with which A actually wins. Positive when ``k_b > k_a`` and
    ``q > f``.
    """
    return (k_b - k_a) * ((1.0 - f) * q - f * (1.0 - q))


def kr_correlation(ratings: Mapping[str, float], k_values: Mapping[str, float]) -> float:
    """Pearson correlation between K and rating; negative is the healthy sign."""
    ids = sorted(ratings)
    r = np.array([ratings[p] for p in ids], dtype=float)
    k = np.array([k_values[p] for p in ids], dtype=float)
    if r.std() == 0 or k.std() == 0:
        return 0.0
    return float(np.corrcoef(r, k)[0, 1])
