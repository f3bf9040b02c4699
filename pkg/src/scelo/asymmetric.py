"""Ratings for games whose two sides play different roles.

Each agent gets one rating per role. Contests only ever pit one role
against the other. The pair of ratings then splits into an overall
strength, a global side advantage and a per-agent residual.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Mapping
from dataclasses import dataclass

from scelo.batch_fit import BatchConfig, fit_pml
from scelo.core import DEFAULT_MEAN, DEFAULT_SIGMA, RatingEstimate, TournamentGraph, split_identity
from scelo.errors import RatingError
from scelo.lls_fit import DEFAULT_FIT_PRIOR_WEIGHT, build_advantage_graph, fit_lls


class UnbalancedDesignWarning(UserWarning):
    """Role cells carry unequal game counts."""


@dataclass(frozen=True)
class RoleRatings:
    """Per-agent ratings in the first (``rp``) and second (``rg``) role."""

    rp: Mapping[str, float]
    rg: Mapping[str, float]
    roles: tuple[str, str] = ("Pink", "Green")

    def centered(self) -> RoleRatings:
        values = list(self.rp.values()) + list(self.rg.values())
        c = math.fsum(values) / len(values)
        return RoleRatings(
            {a: r - c for a, r in self.rp.items()},
            {a: r - c for a, r in self.rg.items()},
            self.roles,
        )

    def swapped(self) -> RoleRatings:
        return RoleRatings(self.rg, self.rp, self.roles[::-1])


@dataclass(frozen=True)
class AnovaResult:
    rho: float
    overall: Mapping[str, float]
    residual: Mapping[str, float]


def _infer_roles(graph: TournamentGraph) -> tuple[str, str]:
    roles = sorted({split_identity(p)[1] for p in graph.players})
    if len(roles) != 2 or "" in roles:
        raise RatingError(f"expected exactly two role tags, found {roles}")
    return roles[0], roles[1]


def role_balance(graph: TournamentGraph) -> dict[str, int]:
    """Games played per identity, used to judge whether the design is balanced."""
    return {p: graph.games(p) for p in graph.identities}


def fit_role_ratings(
    graph: TournamentGraph,
    fitter: str = "lls",
    roles: tuple[str, str] | None = None,
    prior_weight: float = DEFAULT_FIT_PRIOR_WEIGHT,
    cfg: BatchConfig | None = None,
) -> RoleRatings:
    """Fit one rating per (agent, role) and center them on zero.

    Args:
        graph: built with ``role_split`` so identities read ``agent@role``.
        fitter: ``"lls"`` or ``"pml"``. PML uses a flat prior
            (sigma 1000) for every identity.
        roles: the (first, second) role tags; inferred in sorted order
            when omitted.
        prior_weight: beta prior weight for the least-squares fitter.
        cfg: batch settings for the PML fitter.

    Raises:
        RatingError: when an edge joins two identities of the same role.
    """
    roles = roles or _infer_roles(graph)
    first, second = roles
    for p in graph.players:
        if split_identity(p)[1] not in roles:
            raise RatingError(f"identity {p!r} has a role outside {roles}")
    for e in graph.edges:
        ri, rj = split_identity(e.i)[1], split_identity(e.j)[1]
        if ri == rj:
            raise RatingError(
                f"edge {e.i}-{e.j} joins two {ri!r} identities; contests must cross roles"
            )
    counts = set(role_balance(graph).values())
    if len(counts) > 1:
        warnings.warn(
            f"unbalanced design: games per identity range {min(counts)}..{max(counts)}",
            UnbalancedDesignWarning,
            stacklevel=2,
        )
    if fitter == "lls":
        ratings = fit_lls(build_advantage_graph(graph, prior_weight), target_mean=0.0).ratings
    elif fitter == "pml":
        flat = {p: RatingEstimate(DEFAULT_MEAN, DEFAULT_SIGMA) for p in graph.players}
        ratings = fit_pml(graph.with_priors(flat), cfg or BatchConfig()).ratings
    else:
        raise RatingError(f"unknown fitter {fitter!r}")
    rp, rg = {}, {}
    for ident, r in ratings.items():
        agent, role = split_identity(ident)
        (rp if role == first else rg)[agent] = r
    return RoleRatings(rp, rg, roles).centered()


def anova(rr: RoleRatings, weights: Mapping[str, float] | None = None) -> AnovaResult:
    """Split role ratings into side advantage, overall rating and residual.

    ``rho`` is half the gap between the role means. Each agent's overall
    rating is the mean of its two role ratings. The residual ``rho_i`` is
    the part of its own role gap not explained by ``rho``.

    Args:
        rr: role ratings covering the same agents in both roles.
        weights: optional per-agent weights (e.g. games played) for the
            role means; unweighted by default.
    """
    if set(rr.rp) != set(rr.rg):
        raise RatingError("every agent needs a rating in both roles")
    agents = sorted(rr.rp)
    if not agents:
        raise RatingError("no agents to decompose")
    w = {a: 1.0 for a in agents} if weights is None else {a: float(weights[a]) for a in agents}
    total = math.fsum(w.values())
    mean_p = math.fsum(w[a] * rr.rp[a] for a in agents) / total
    mean_g = math.fsum(w[a] * rr.rg[a] for a in agents) / total
    rho = (mean_p - mean_g) / 2.0
    overall = {a: (rr.rp[a] + rr.rg[a]) / 2.0 for a in agents}
    residual = {a: ((rr.rp[a] - rho) - (rr.rg[a] + rho)) / 2.0 for a in agents}
    return AnovaResult(rho, overall, residual)
