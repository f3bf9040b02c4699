"""Turning raw game scores into fractional results, and the ECF scale.

A win by a narrow margin is treated as little better than a tie. The
share credited to the winner is the estimated probability that they would
also win a rematch.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum

from scelo.core import GameRecord, Outcome
from scelo.errors import RangeViolation, RatingError
from scelo.lls_fit import AdvantageEdge, LlsResult, fit_lls
from scelo.probability import advantage_from_prob, win_prob

ECF_WIN_BONUS = 50.0
ECF_MIN_GAIN = 10.0
ECF_VALID_LIMIT = 40.0


class DeltaMode(str, Enum):
    FIXED = "fixed"
    RMS_FRACTION = "rms"


@dataclass(frozen=True)
class MarginPolicy:
    """How to pick the noise scale delta of a score difference.

    ``FIXED`` uses ``delta_value`` in score units. ``RMS_FRACTION`` uses
    ``delta_value`` times the RMS of the two scores of the game.
    """

    delta_mode: DeltaMode
    delta_value: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "delta_mode", DeltaMode(self.delta_mode))
        if not self.delta_value > 0:
            raise RatingError(f"delta_value must be > 0, got {self.delta_value}")

    @classmethod
    def parse(cls, text: str) -> MarginPolicy | None:
        """Read ``off``, ``rms:FRAC`` or ``fixed:DELTA``."""
        text = text.strip().lower()
        if text == "off":
            return None
        mode, sep, value = text.partition(":")
        if not sep or mode not in {"rms", "fixed"}:
            raise RatingError(f"margin policy must be off, rms:FRAC or fixed:DELTA, got {text!r}")
        try:
            return cls(DeltaMode(mode), float(value))
        except ValueError:
            raise RatingError(f"bad margin value {value!r}") from None

    def delta(self, s_x: float, s_y: float) -> float:
        if self.delta_mode is DeltaMode.FIXED:
            return self.delta_value
        d = self.delta_value * math.sqrt((s_x * s_x + s_y * s_y) / 2.0)
        if d == 0:
            raise RatingError("both scores are zero, so the RMS noise scale is zero")
        return d


def margin_prob(s_x: float, s_y: float, policy: MarginPolicy) -> float:
    """Rematch win probability of the side scoring ``s_x >= s_y``.

    ``(D**2 + d**2) / (D**2 + 2 d**2)`` with ``D = s_x - s_y`` and ``d``
    the policy's noise scale: 0.5 for a tie, approaching 1 as the margin
    dwarfs the noise.
    """
    if s_x < s_y:
        raise RatingError("margin_prob expects the winner's score first")
    d2 = policy.delta(s_x, s_y) ** 2
    gap2 = (s_x - s_y) ** 2
    return (gap2 + d2) / (gap2 + 2.0 * d2)


def margin_share(own: float, opp: float, policy: MarginPolicy) -> float:
    """Fractional result for the side scoring ``own``."""
    if own >= opp:
        return margin_prob(own, opp, policy)
    return 1.0 - margin_prob(opp, own, policy)


def weighted_actual_score(games: Iterable[tuple[float, float]], policy: MarginPolicy) -> float:
    """Sum of margin shares over (own score, opponent score) pairs."""
    return math.fsum(margin_share(own, opp, policy) for own, opp in games)


def record_share(policy: MarginPolicy):
    """Score-share function for :func:`scelo.core.build_graph`.

    Records without scores fall back to 1/0.5/0. Scores of two different
    roles are different metrics and are rejected.
    """

    def share(rec: GameRecord) -> float:
        if rec.score_a is None or rec.score_b is None:
            return rec.resolved_outcome().score_a
        if rec.role_a != rec.role_b:
            raise RatingError(
                f"game {rec.game_id}: cannot compare a {rec.role_a!r} score "
                f"with a {rec.role_b!r} score"
            )
        return margin_share(rec.score_a, rec.score_b, policy)

    return share


def margin_reward(n: float) -> float:
    """Training reward ``(n + 1)/(n + 2)`` for a win by margin ``n``."""
    if n < 0:
        raise RatingError("margin must be >= 0; negate the reward for the loser")
    return (n + 1.0) / (n + 2.0)


def ecf_game_score(r_x: float, r_y: float, outcome: Outcome | str) -> float:
    """Per-game ECF performance of X against Y.

    A win scores Y's rating plus 50 but never less than X's own plus 10;
    a loss mirrors this; a draw scores Y's rating.
    """
    outcome = Outcome(outcome)
    if outcome is Outcome.A_WINS:
        return max(r_y + ECF_WIN_BONUS, r_x + ECF_MIN_GAIN)
    if outcome is Outcome.B_WINS:
        return min(r_y - ECF_WIN_BONUS, r_x - ECF_MIN_GAIN)
    return r_y


def ecf_to_elo(b: float) -> float:
    """Elo advantage matching an ECF advantage ``b`` (valid for |b| < 40)."""
    if not abs(b) < ECF_VALID_LIMIT:
        raise RangeViolation(
            f"ECF advantage {b} outside the conversion's validity range |B| < 40 "
            "(win probability between 0.1 and 0.9)"
        )
    return advantage_from_prob(0.5 + b / 100.0)


def elo_to_ecf(a: float) -> float:
    """ECF advantage matching an Elo advantage ``a``."""
    b = 100.0 * (win_prob(a, 0.0) - 0.5)
    if not abs(b) < ECF_VALID_LIMIT:
        raise RangeViolation(
            f"Elo advantage {a} maps to ECF {b:.1f}, outside the validity range |B| < 40"
        )
    return b


ecf_elo_convert = ecf_to_elo


def ecf_fit(
    prob_edges: Sequence[tuple[str, str, float]],
    target_mean: float = 100.0,
    tol: float = 0.05,
    damping: float = 0.5,
) -> LlsResult:
    """ECF ratings whose expected scores match observed win probabilities.

    Solves ``R_i = mean_j(R_j + (2 P_ij - 1) * 50)`` with the same damped
    averaging as the least-squares fit. Edge probabilities outside
    (0.1, 0.9) are accepted; :func:`ecf_out_of_range` lists them.
    Structural uncertainty is in ECF points. Statistical uncertainty is
    not modeled, so a nominal 1e-9 is carried.
    """
    edges = []
    for i, j, p in prob_edges:
        if not 0.0 <= p <= 1.0:
            raise RatingError(f"edge {i}-{j}: probability {p} outside [0, 1]")
        edges.append(AdvantageEdge(i, j, (2.0 * p - 1.0) * ECF_WIN_BONUS, 1e-9))
    return fit_lls(edges, target_mean, tol, damping)


def ecf_out_of_range(prob_edges: Sequence[tuple[str, str, float]]) -> list[tuple[str, str]]:
    """Edges whose probability lies outside the conversion's (0.1, 0.9)."""
    return [(i, j) for i, j, p in prob_edges if not 0.1 < p < 0.9]
