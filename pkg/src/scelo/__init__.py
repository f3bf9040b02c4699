"""Self-consistent Elo, batch and least-squares rating estimators."""

from scelo.core import (
    BETA,
    DEFAULT_MEAN,
    ComparisonEdge,
    GameRecord,
    Outcome,
    RatingEstimate,
    TournamentGraph,
    build_graph,
)
from scelo.errors import ConvergenceError, ParseError, RangeViolation, RatingError
from scelo.probability import advantage_from_prob, win_prob

__version__ = "0.1.0"

__all__ = [
    "BETA",
    "DEFAULT_MEAN",
    "ComparisonEdge",
    "ConvergenceError",
    "GameRecord",
    "Outcome",
    "ParseError",
    "RangeViolation",
    "RatingError",
    "RatingEstimate",
    "TournamentGraph",
    "advantage_from_prob",
    "build_graph",
    "win_prob",
]
