"""Least-squares ratings from pairwise log-odds advantages.

Each edge's results become a posterior-mean Elo advantage with a
statistical uncertainty. Ratings are then chosen so that rating
differences match those advantages in the least-squares sense. Leftover
mismatch is reported as structural uncertainty.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from scelo.core import RatingEstimate, TournamentGraph
from scelo.errors import ConvergenceError, RatingError
from scelo.probability import MomentMethod, advantage_moments

DEFAULT_FIT_PRIOR_WEIGHT = 0.1
DEFAULT_LLS_MAX_ITERS = 1_000_000


@dataclass(frozen=True)
class AdvantageEdge:
    """Posterior-mean Elo advantage of ``i`` over ``j`` with its spread."""

    i: str
    j: str
    a_ij: float
    sigma_ij: float

    def __post_init__(self) -> None:
        if self.i == self.j:
            raise RatingError("advantage edge endpoints must differ")
        if not (math.isfinite(self.a_ij) and math.isfinite(self.sigma_ij)):
            raise RatingError(f"edge {self.i}-{self.j} has a non-finite value")
        if not self.sigma_ij > 0:
            raise RatingError(f"edge {self.i}-{self.j}: sigma must be > 0")

    def reversed(self) -> AdvantageEdge:
        return AdvantageEdge(self.j, self.i, -self.a_ij, self.sigma_ij)


class DisconnectedGraphWarning(UserWarning):
    """The comparison graph splits into separately fitted components."""


@dataclass(frozen=True)
class LlsResult:
    ratings: Mapping[str, float]
    sigma_total: Mapping[str, float]
    sigma_statistical: Mapping[str, float]
    sigma_structural: Mapping[str, float]
    iterations: int
    components: tuple[tuple[str, ...], ...] = field(default=())
    max_residual: float = 0.0


def build_advantage_graph(
    graph: TournamentGraph,
    prior_weight: float = DEFAULT_FIT_PRIOR_WEIGHT,
    method: MomentMethod | str = MomentMethod.APPROX,
) -> list[AdvantageEdge]:
    """One advantage edge per comparison edge.

    Draws count as half a win for each side. When the approximate moments
    are undefined (only possible below prior weight 1) the numeric ones
    are used for that edge.
    """
    out = []
    for e in graph.edges:
        m = advantage_moments(
            e.wins_i + 0.5 * e.draws, e.wins_j + 0.5 * e.draws, method, prior_weight
        )
        out.append(AdvantageEdge(e.i, e.j, m.mean, m.stdev))
    return out


class _System:
    """Edge arrays for the averaging iterations, both orientations stacked."""

    def __init__(self, ids: Sequence[str], edges: Sequence[AdvantageEdge]) -> None:
        self.ids = tuple(ids)
        pos = {p: n for n, p in enumerate(self.ids)}
        ei = np.array([pos[e.i] for e in edges], dtype=np.intp)
        ej = np.array([pos[e.j] for e in edges], dtype=np.intp)
        a = np.array([e.a_ij for e in edges], dtype=float)
        sg = np.array([e.sigma_ij for e in edges], dtype=float)
        # row k: node src[k] sees neighbor dst[k] with advantage adv[k]
        self.src = np.concatenate([ei, ej])
        self.dst = np.concatenate([ej, ei])
        self.adv = np.concatenate([a, -a])
        self.sig = np.concatenate([sg, sg])
        self.n = len(self.ids)
        self.degree = np.bincount(self.src, minlength=self.n).astype(float)

    def neighbor_mean(self, r: np.ndarray) -> np.ndarray:
        total = np.bincount(self.src, r[self.dst] + self.adv, self.n)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.degree > 0, total / self.degree, r)


def _components(ids: Sequence[str], edges: Sequence[AdvantageEdge]) -> list[tuple[str, ...]]:
    parent = {p: p for p in ids}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in edges:
        ri, rj = find(e.i), find(e.j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[str, list[str]] = {}
    for p in ids:
        groups.setdefault(find(p), []).append(p)
    return sorted(tuple(g) for g in groups.values())


def _ids_of(edges: Sequence[AdvantageEdge]) -> list[str]:
    return sorted({e.i for e in edges} | {e.j for e in edges})


def uncertainty_decomposition(
    ratings: Mapping[str, float], edges: Sequence[AdvantageEdge]
) -> dict[str, tuple[float, float, float]]:
    """Per-player (total, statistical, structural) rating uncertainty.

    Each is an average over the player's incident edges (not games).
    Statistical variance is the mean edge variance. Structural variance is
    the mean squared mismatch ``R_i - R_j - A_ij``. The total variance is
    their sum. Players without edges are left out.
    """
    stat: dict[str, list[float]] = {}
    struct: dict[str, list[float]] = {}
    for e in edges:
        resid = ratings[e.i] - ratings[e.j] - e.a_ij
        for p in (e.i, e.j):
            stat.setdefault(p, []).append(e.sigma_ij**2)
            struct.setdefault(p, []).append(resid**2)
    out = {}
    for p in sorted(stat):
        v_stat = math.fsum(stat[p]) / len(stat[p])
        v_struct = math.fsum(struct[p]) / len(struct[p])
        out[p] = (math.sqrt(v_stat + v_struct), math.sqrt(v_stat), math.sqrt(v_struct))
    return out


def _result(
    ratings: dict[str, float],
    edges: Sequence[AdvantageEdge],
    iterations: int,
    components: Sequence[tuple[str, ...]] = (),
    max_residual: float = 0.0,
) -> LlsResult:
    dec = uncertainty_decomposition(ratings, edges)
    return LlsResult(
        ratings,
        {p: v[0] for p, v in dec.items()},
        {p: v[1] for p, v in dec.items()},
        {p: v[2] for p, v in dec.items()},
        iterations,
        tuple(components),
        max_residual,
    )


def _iterate_average(
    system: _System,
    r: np.ndarray,
    tol: float,
    damping: float,
    max_iters: int,
) -> tuple[np.ndarray, int, float]:
    it = 0
    while it < max_iters:
        it += 1
        target = system.neighbor_mean(r)
        change = float(np.max(np.abs(target - r))) if system.n else 0.0
        r = r + damping * (target - r)
        if change < tol:
            return r, it, change
    raise ConvergenceError(
        f"least-squares iteration did not converge in {max_iters} sweeps",
        dict(zip(system.ids, r.tolist())),
        it,
    )


def _check_iter_args(tol: float, damping: float) -> None:
    if not tol > 0:
        raise RatingError(f"tol must be > 0, got {tol}")
    if not 0 < damping <= 1:
        raise RatingError(f"damping must be in (0, 1], got {damping}")


def fit_lls(
    edges: Sequence[AdvantageEdge],
    target_mean: float = 1000.0,
    tol: float = 0.05,
    damping: float = 0.5,
    per_component: bool = True,
    max_iters: int = DEFAULT_LLS_MAX_ITERS,
) -> LlsResult:
    """Unweighted least-squares ratings.

    Iterates ``R_i <- mean over edges of (R_j + A_ij)``, moving a fraction
    ``damping`` of the way each sweep, until no rating moves by ``tol``.
    Each connected component is then shifted to mean ``target_mean``.

    Raises:
        RatingError: for an empty edge list, or a disconnected graph with
            ``per_component=False``.
        ConvergenceError: when ``max_iters`` sweeps are not enough.
    """
    _check_iter_args(tol, damping)
    if not edges:
        raise RatingError("need at least one advantage edge")
    ids = _ids_of(edges)
    comps = _components(ids, edges)
    if len(comps) > 1:
        names = "; ".join(",".join(c) for c in comps)
        if not per_component:
            raise RatingError(f"graph is disconnected into {len(comps)} components: {names}")
        warnings.warn(
            f"fitting {len(comps)} components separately: {names}",
            DisconnectedGraphWarning,
            stacklevel=2,
        )
    system = _System(ids, edges)
    r, iters, _ = _iterate_average(system, np.zeros(system.n), tol, damping, max_iters)
    pos = {p: n for n, p in enumerate(ids)}
    for comp in comps:
        idx = np.array([pos[p] for p in comp])
        r[idx] += target_mean - r[idx].mean()
    ratings = dict(zip(ids, r.tolist()))
    resid = float(np.max(np.abs(system.neighbor_mean(r) - r)))
    return _result(ratings, edges, iters, comps if len(comps) > 1 else (), resid)


def fit_lls_weighted(
    edges: Sequence[AdvantageEdge],
    priors: Mapping[str, RatingEstimate],
    tol: float = 0.05,
    damping: float = 0.5,
    max_iters: int = DEFAULT_LLS_MAX_ITERS,
) -> LlsResult:
    """Precision-weighted least squares anchored by per-player priors.

    Each sweep sets ``R_i`` to the precision-weighted average of the prior
    mean (precision ``1/sigma_i**2``) and each neighbor's ``R_j + A_ij``
    (precision ``1/(sigma_j**2 + sigma_ij**2)``). Players with
    ``sigma_i = 0`` stay at their prior. An infinite or missing prior
    carries no information: its prior term is dropped and its edges are
    weighted by ``1/sigma_ij**2`` alone. With no priors and equal edge
    sigmas this is the plain fit up to a uniform shift.
    """
    _check_iter_args(tol, damping)
    ids = sorted(set(_ids_of(edges)) | set(priors))
    inf_prior = RatingEstimate(0.0, math.inf)
    pri = [priors.get(p, inf_prior) for p in ids]
    mu = np.array([e.mu for e in pri], dtype=float)
    sig = np.array([e.sigma for e in pri], dtype=float)
    frozen = sig == 0
    with np.errstate(divide="ignore"):
        p_self = np.where(frozen, 0.0, 1.0 / sig**2)
    system = _System(ids, edges)
    known = np.where(np.isfinite(sig), sig, 0.0)
    w_edge = 1.0 / (known[system.dst] ** 2 + system.sig**2)
    w_total = p_self + np.bincount(system.src, w_edge, system.n)
    bad = [p for p, w, f in zip(ids, w_total, frozen) if not f and w == 0]
    if bad:
        raise RatingError(f"no prior precision and no comparisons for: {', '.join(bad)}")
    r = np.where(np.isfinite(sig), mu, 0.0)
    # seed unanchored players at their unweighted neighbor means
    r = np.where(np.isfinite(sig), r, system.neighbor_mean(r))
    it = 0
    while True:
        it += 1
        num = np.where(p_self > 0, p_self * mu, 0.0) + np.bincount(
            system.src, w_edge * (r[system.dst] + system.adv), system.n
        )
        with np.errstate(invalid="ignore", divide="ignore"):
            target = np.where(frozen, mu, num / w_total)
        change = float(np.max(np.abs(target - r)))
        r = r + damping * (target - r)
        r[frozen] = mu[frozen]
        if change < tol:
            break
        if it >= max_iters:
            raise ConvergenceError(
                f"weighted least squares did not converge in {max_iters} sweeps",
                dict(zip(ids, r.tolist())),
                it,
            )
    return _result(dict(zip(ids, r.tolist())), edges, it, (), change)


def whole_history_filter(
    snapshots: Sequence[Sequence[AdvantageEdge]],
    process_sigma: float | Mapping[str, float],
    priors: Mapping[str, RatingEstimate] | None = None,
    tol: float = 0.05,
    damping: float = 0.5,
) -> list[dict[str, float]]:
    """Carry ratings forward through a sequence of tournaments.

    At each step the previous estimate acts as a prior with precision
    ``1/process_sigma**2`` and the step's edges are folded in by
    :func:`fit_lls_weighted`. Only the latest estimates are kept, so no
    history is replayed.

    Args:
        snapshots: advantage edges per time step, oldest first.
        process_sigma: inertia of the previous estimate, globally or per
            identity. Zero freezes a player.
        priors: starting ratings; identities missing here start at the
            mean of their first tournament's fit.

    Returns:
        The ratings after each step.
    """
    current = {p: e.mu for p, e in (priors or {}).items()}

    def proc(p: str) -> float:
        return process_sigma.get(p, 0.0) if isinstance(process_sigma, Mapping) else process_sigma

    history = []
    for edges in snapshots:
        ids = _ids_of(edges)
        step_priors = {p: RatingEstimate(current[p], proc(p)) for p in ids if p in current}
        if any(proc(p) < 0 for p in ids):
            raise RatingError("process_sigma must be >= 0")
        if edges:
            fit = fit_lls_weighted(edges, step_priors, tol, damping)
            current.update(fit.ratings)
        history.append(dict(sorted(current.items())))
    return history


def consistency_measure(
    a_ij: float, a_jk: float, a_ik: float, sigmas: Sequence[float]
) -> float:
    """Squared failure of additivity around a triangle, in units of its
    variance: ``(A_ij + A_jk - A_ik)**2 / (s_ij**2 + s_jk**2 + s_ik**2)``."""
    if len(sigmas) != 3:
        raise RatingError("need the three edge sigmas (ij, jk, ik)")
    var = sum(s * s for s in sigmas)
    if not var > 0:
        raise RatingError("total variance of the triangle is zero")
    return (a_ij + a_jk - a_ik) ** 2 / var


def precision_weighted_average(values: Sequence[float], sigmas: Sequence[float]) -> float:
    if len(values) == 0:
        raise RatingError("need at least one value")
    if len(values) != len(sigmas):
        raise RatingError("values and sigmas differ in length")
    x = np.asarray(values, dtype=float)
    s = np.asarray(sigmas, dtype=float)
    if np.any(s <= 0):
        raise RatingError("sigmas must be > 0")
    w = 1.0 / s**2
    return float(np.dot(w, x) / w.sum())
