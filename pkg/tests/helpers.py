"""Shared analysis used by more than one test module."""

from __future__ import annotations

import numpy as np

from scelo.core import build_graph
from scelo.lls_fit import build_advantage_graph, fit_lls
from scelo.probability import beta_posterior
from scelo.scoring import ecf_fit


def ecf_versus_elo(records, max_advantage=300.0, prior_weight=0.1):
    """Fit Elo (least squares) and ECF ratings on the same close pairings.

    Keeps the edges whose observed Elo advantage is below
    ``max_advantage`` in size, fits both scales on that subgraph and
    returns the fitted rating gaps per kept edge as (elo, ecf) arrays.
    """
    graph = build_graph(records)
    adv = build_advantage_graph(graph, prior_weight)
    keep = [(ce, ae) for ce, ae in zip(graph.edges, adv) if abs(ae.a_ij) < max_advantage]
    elo = fit_lls([ae for _, ae in keep]).ratings
    probs = []
    for ce, _ in keep:
        post = beta_posterior(ce.wins_i + 0.5 * ce.draws, ce.wins_j + 0.5 * ce.draws, prior_weight)
        probs.append((ce.i, ce.j, post.mean))
    ecf = ecf_fit(probs).ratings
    d_elo = np.array([elo[i] - elo[j] for i, j, _ in probs])
    d_ecf = np.array([ecf[i] - ecf[j] for i, j, _ in probs])
    return d_elo, d_ecf


def slope_through_origin(x, y):
    return float(np.dot(x, y) / np.dot(x, x))
