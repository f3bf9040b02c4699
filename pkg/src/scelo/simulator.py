"""Seeded synthetic tournaments between agents with role-dependent strength.

Agents arrive in eras. Each era introduces new agents whose base strength
is the era mean plus noise, with separate Red and Blue capabilities. Every
new agent plays a block of games in each role against the previous era's
best performers (or, in the first era, against the other newcomers). Game
outcomes are drawn from the win probability of the two role capabilities.

Random numbers come from numpy's PCG64 generator. The population and the
game outcomes use two independent streams spawned from one seed.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, fields

import numpy as np

from scelo.batch_fit import BatchConfig, fit_pml
from scelo.core import DEFAULT_MEAN, DEFAULT_SIGMA, GameRecord, Outcome, RatingEstimate, build_graph
from scelo.errors import RatingError
from scelo.lls_fit import build_advantage_graph, fit_lls
from scelo.probability import win_prob_array

PRNG_NAME = "numpy.random.PCG64"
RED, BLUE = "Red", "Blue"


@dataclass(frozen=True)
class SimConfig:
    eras: int = 10
    agents_per_era: int = 20
    carryover: int = 5
    games_per_pairing_block: int = 100
    era_step: float = 150.0
    base_spread: float = 200.0
    role_spread: float = 200.0
    base_mean: float = DEFAULT_MEAN
    seed: int = 0
    perturbation: str = "uniform"
    role_assignment: str = "alternate"

    def __post_init__(self) -> None:
        for name in ("eras", "agents_per_era", "carryover", "games_per_pairing_block"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise RatingError(f"config field {name!r} must be an integer >= 1, got {value!r}")
        for name in ("base_spread", "role_spread"):
            if not getattr(self, name) >= 0:
                raise RatingError(f"config field {name!r} must be >= 0")
        for name in ("era_step", "base_mean"):
            if not math.isfinite(getattr(self, name)):
                raise RatingError(f"config field {name!r} must be finite")
        if self.perturbation not in {"uniform", "normal"}:
            raise RatingError("config field 'perturbation' must be 'uniform' or 'normal'")
        if self.role_assignment not in {"alternate", "random"}:
            raise RatingError("config field 'role_assignment' must be 'alternate' or 'random'")
        if not 0 <= int(self.seed) < 2**64:
            raise RatingError("config field 'seed' must be a 64-bit unsigned integer")
        if self.agents_per_era < 2 and self.eras == 1:
            raise RatingError("a single era needs at least two agents")

    @classmethod
    def from_mapping(cls, data: Mapping) -> SimConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise RatingError(f"unknown config field(s): {', '.join(unknown)}")
        return cls(**dict(data))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SimAgent:
    id: str
    era: int
    red_cap: float
    blue_cap: float

    @property
    def true_combined(self) -> float:
        """Harmonic mean of the two role capabilities."""
        return 2.0 / (1.0 / self.red_cap + 1.0 / self.blue_cap)

    def cap(self, role: str) -> float:
        return self.red_cap if role == RED else self.blue_cap


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    pop, games = np.random.SeedSequence(int(seed)).spawn(2)
    return np.random.Generator(np.random.PCG64(pop)), np.random.Generator(np.random.PCG64(games))


def _noise(rng: np.random.Generator, spread: float, kind: str) -> float:
    if spread == 0:
        return 0.0
    if kind == "uniform":
        return float(rng.uniform(-spread, spread))
    return float(rng.normal(0.0, spread))


def generate_population(cfg: SimConfig) -> list[SimAgent]:
    """All agents of all eras, in era order.

    Base strength is the era mean plus noise of half-width
    ``base_spread`` (uniform) or standard deviation ``base_spread``
    (normal). Each role adds its own noise of scale ``role_spread``.
    """
    rng, _ = _streams(cfg.seed)
    agents = []
    for era in range(cfg.eras):
        mean = cfg.base_mean + era * cfg.era_step
        for k in range(cfg.agents_per_era):
            base = mean + _noise(rng, cfg.base_spread, cfg.perturbation)
            red = base + _noise(rng, cfg.role_spread, cfg.perturbation)
            blue = base + _noise(rng, cfg.role_spread, cfg.perturbation)
            if red <= 0 or blue <= 0:
                raise RatingError(
                    "capabilities must stay positive for the harmonic mean; raise base_mean"
                )
            agents.append(SimAgent(f"E{era:02d}A{k:02d}", era, red, blue))
    return agents


def _top_by_win_rate(wins: Mapping[str, float], played: Mapping[str, int], n: int) -> list[str]:
    ranked = sorted(played, key=lambda a: (-wins.get(a, 0.0) / played[a], a))
    return ranked[:n]


def play_schedule(agents: Sequence[SimAgent], cfg: SimConfig) -> list[GameRecord]:
    """Play every era and return the game records in order.

    Each new agent plays ``2 * games_per_pairing_block`` games, cycling
    through its opponent pool and alternating Red and Blue (or flipping a
    coin with ``role_assignment="random"``). The pool is the carryover set
    from the previous era or, in the first era, the other new agents. The
    carryover set is the top ``carryover`` agents by win rate in the era
    just played, ties broken by agent id.
    """
    _, rng = _streams(cfg.seed)
    by_id = {a.id: a for a in agents}
    eras: dict[int, list[SimAgent]] = {}
    for a in agents:
        eras.setdefault(a.era, []).append(a)
    records: list[GameRecord] = []
    carry: list[str] = []
    per_agent = 2 * cfg.games_per_pairing_block
    for era in sorted(eras):
        newcomers = eras[era]
        wins: dict[str, float] = {}
        played: dict[str, int] = {}
        for agent in newcomers:
            pool = carry or [b.id for b in newcomers if b.id != agent.id]
            if not pool:
                raise RatingError(f"agent {agent.id} has no opponents in era {era}")
            if cfg.role_assignment == "alternate":
                red_first = np.arange(per_agent) % 2 == 0
            else:
                red_first = rng.random(per_agent) < 0.5
            opponents = [pool[(g // 2) % len(pool)] for g in range(per_agent)]
            cap_a = np.array(
                [agent.red_cap if red else agent.blue_cap for red in red_first]
            )
            cap_b = np.array(
                [by_id[o].blue_cap if red else by_id[o].red_cap for o, red in zip(opponents, red_first)]
            )
            a_wins = rng.random(per_agent) < win_prob_array(cap_a, cap_b)
            for g in range(per_agent):
                opp = opponents[g]
                role_a, role_b = (RED, BLUE) if red_first[g] else (BLUE, RED)
                outcome = Outcome.A_WINS if a_wins[g] else Outcome.B_WINS
                records.append(
                    GameRecord(
                        f"g{len(records) + 1:06d}", agent.id, role_a, opp, role_b,
                        f"era{era}", None, None, outcome,
                    )
                )
                winner = agent.id if a_wins[g] else opp
                for pid in (agent.id, opp):
                    played[pid] = played.get(pid, 0) + 1
                wins[winner] = wins.get(winner, 0.0) + 1.0
        carry = _top_by_win_rate(wins, played, cfg.carryover)
    return records


@dataclass(frozen=True)
class FitEvaluation:
    correlation: float
    rms_error: float
    ratings: Mapping[str, float]


def compare_to_truth(
    ratings: Mapping[str, float], truth: Mapping[str, float]
) -> tuple[float, float]:
    """Pearson correlation and RMS error after aligning the means."""
    ids = sorted(set(ratings) & set(truth))
    if len(ids) < 2:
        raise RatingError("need at least two agents in common with the truth")
    r = np.array([ratings[a] for a in ids], dtype=float)
    t = np.array([truth[a] for a in ids], dtype=float)
    aligned = r - r.mean() + t.mean()
    rms = float(np.sqrt(np.mean((aligned - t) ** 2)))
    if r.std() == 0 or t.std() == 0:
        return 0.0, rms
    return float(np.corrcoef(r, t)[0, 1]), rms


def fit_ratings(records: Sequence[GameRecord], fitter: str = "pml", **kwargs) -> dict[str, float]:
    """Ratings from a flat prior (mean 1000, sigma 1000) with either fitter."""
    prior = RatingEstimate(DEFAULT_MEAN, DEFAULT_SIGMA)
    graph = build_graph(records, default_prior=prior)
    if fitter == "pml":
        return dict(fit_pml(graph, kwargs.get("cfg") or BatchConfig()).ratings)
    if fitter == "lls":
        edges = build_advantage_graph(graph, kwargs.get("prior_weight", 0.1))
        return dict(fit_lls(edges, target_mean=DEFAULT_MEAN).ratings)
    raise RatingError(f"unknown fitter {fitter!r}")


def evaluate_fit(
    records: Sequence[GameRecord], agents: Sequence[SimAgent], fitter: str = "pml", **kwargs
) -> FitEvaluation:
    ratings = fit_ratings(records, fitter, **kwargs)
    corr, rms = compare_to_truth(ratings, {a.id: a.true_combined for a in agents})
    return FitEvaluation(corr, rms, ratings)


def era_participants(records: Sequence[GameRecord]) -> dict[str, set[str]]:
    """Distinct agents seen per scenario (era) tag."""
    out: dict[str, set[str]] = {}
    for r in records:
        out.setdefault(r.scenario, set()).update((r.player_a, r.player_b))
    return out
