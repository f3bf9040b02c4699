"""Domain types, tournament-graph construction and flat-file I/O."""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from pathlib import Path
from types import MappingProxyType

from scelo.errors import ParseError, RatingError

BETA = math.log(10.0) / 400.0
DEFAULT_MEAN = 1000.0
DEFAULT_SIGMA = 1000.0
# Chess historically clamps ratings at 100; off unless a caller opts in.
RATING_FLOOR: float | None = None

ROLE_SEPARATOR = "@"

RECORD_FIELDS = (
    "game_id",
    "player_a",
    "role_a",
    "player_b",
    "role_b",
    "scenario",
    "score_a",
    "score_b",
    "outcome",
)


class Outcome(str, Enum):
    A_WINS = "A"
    B_WINS = "B"
    DRAW = "D"

    @property
    def score_a(self) -> float:
        return {"A": 1.0, "B": 0.0, "D": 0.5}[self.value]


@dataclass(frozen=True)
class RatingEstimate:
    """Rating mean and uncertainty, both in Elo points.

    ``sigma == 0`` marks an anchor whose rating never moves. The
    adjustment factor ``k`` is derived as ``BETA * sigma**2``.
    """

    mu: float
    sigma: float = DEFAULT_SIGMA

    def __post_init__(self) -> None:
        if not math.isfinite(self.mu):
            raise RatingError(f"rating mean must be finite, got {self.mu}")
        if not self.sigma >= 0:
            raise RatingError(f"sigma must be >= 0, got {self.sigma}")

    @property
    def k(self) -> float:
        return BETA * self.sigma * self.sigma

    @property
    def frozen(self) -> bool:
        return self.sigma == 0

    @classmethod
    def from_k(cls, mu: float, k: float) -> RatingEstimate:
        if k < 0:
            raise RatingError(f"K must be >= 0, got {k}")
        return cls(mu, math.sqrt(k / BETA))


@dataclass(frozen=True)
class GameRecord:
    """One contest between two (player, role) identities.

    Scores are optional. When ``outcome`` is None the result is read from
    the scores, which is only meaningful when both sides played the same
    role (see :func:`like_role_comparisons`).
    """

    game_id: str
    player_a: str
    role_a: str
    player_b: str
    role_b: str
    scenario: str = ""
    score_a: float | None = None
    score_b: float | None = None
    outcome: Outcome | None = None

    def __post_init__(self) -> None:
        if not self.game_id:
            raise RatingError("game_id must be non-empty")
        if not self.player_a or not self.player_b:
            raise RatingError(f"game {self.game_id}: player ids must be non-empty")
        if self.player_a == self.player_b and self.role_a == self.role_b:
            raise RatingError(
                f"game {self.game_id}: a player may only meet itself in a different role"
            )
        if self.outcome is None and (self.score_a is None or self.score_b is None):
            raise RatingError(f"game {self.game_id}: needs an outcome or both scores")

    def resolved_outcome(self) -> Outcome:
        if self.outcome is not None:
            return self.outcome
        if self.role_a != self.role_b:
            raise RatingError(
                f"game {self.game_id}: scores of roles {self.role_a!r} and "
                f"{self.role_b!r} are different metrics and cannot be compared"
            )
        if self.score_a > self.score_b:
            return Outcome.A_WINS
        if self.score_a < self.score_b:
            return Outcome.B_WINS
        return Outcome.DRAW


def role_identity(player: str, role: str) -> str:
    return f"{player}{ROLE_SEPARATOR}{role}"


def split_identity(identity: str) -> tuple[str, str]:
    """Inverse of :func:`role_identity`; role is '' for a plain player id."""
    player, sep, role = identity.rpartition(ROLE_SEPARATOR)
    if not sep:
        return identity, ""
    return player, role


@dataclass(frozen=True)
class ComparisonEdge:
    """Aggregated results between identities ``i`` and ``j``.

    ``weighted_score_i`` defaults to wins plus half the draws; margin
    scoring replaces it with a sum of fractional shares.
    """

    i: str
    j: str
    wins_i: int
    draws: int
    wins_j: int
    weighted_score_i: float

    def __post_init__(self) -> None:
        if self.i == self.j:
            raise RatingError(f"edge endpoints must differ, got {self.i!r}")
        if min(self.wins_i, self.draws, self.wins_j) < 0:
            raise RatingError("edge counts must be >= 0")
        if self.games < 1:
            raise RatingError(f"edge {self.i}-{self.j} has no games")
        if not 0.0 <= self.weighted_score_i <= self.games:
            raise RatingError(
                f"edge {self.i}-{self.j}: weighted score {self.weighted_score_i} "
                f"outside [0, {self.games}]"
            )

    @property
    def games(self) -> int:
        return self.wins_i + self.draws + self.wins_j

    @property
    def weighted_score_j(self) -> float:
        return self.games - self.weighted_score_i

    def reversed(self) -> ComparisonEdge:
        return ComparisonEdge(
            self.j, self.i, self.wins_j, self.draws, self.wins_i, self.weighted_score_j
        )

    def oriented(self, identity: str) -> ComparisonEdge:
        """Return the edge with ``identity`` as the ``i`` endpoint."""
        if identity == self.i:
            return self
        if identity == self.j:
            return self.reversed()
        raise KeyError(identity)


@dataclass(frozen=True)
class TournamentGraph:
    """Identities with priors plus aggregated pairwise edges.

    Identities are kept in sorted order and every edge has ``i < j``, so
    the same set of results always yields the same graph.
    """

    players: Mapping[str, RatingEstimate]
    edges: tuple[ComparisonEdge, ...]
    _index: Mapping[str, tuple[int, ...]] = field(
        init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self) -> None:
        players = dict(sorted(self.players.items()))
        incident: dict[str, list[int]] = {p: [] for p in players}
        merged: dict[tuple[str, str], ComparisonEdge] = {}
        for e in self.edges:
            e = e if e.i < e.j else e.reversed()
            for end in (e.i, e.j):
                if end not in players:
                    raise RatingError(f"edge endpoint {end!r} is not a player")
            prev = merged.get((e.i, e.j))
            if prev is not None:
                e = ComparisonEdge(
                    e.i, e.j, prev.wins_i + e.wins_i, prev.draws + e.draws,
                    prev.wins_j + e.wins_j, prev.weighted_score_i + e.weighted_score_i,
                )
            merged[(e.i, e.j)] = e
        edges = tuple(merged[k] for k in sorted(merged))
        for n, e in enumerate(edges):
            incident[e.i].append(n)
            incident[e.j].append(n)
        object.__setattr__(self, "players", MappingProxyType(players))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(
            self, "_index", MappingProxyType({p: tuple(v) for p, v in incident.items()})
        )

    @property
    def identities(self) -> tuple[str, ...]:
        return tuple(self.players)

    def incident_edges(self, identity: str) -> tuple[ComparisonEdge, ...]:
        """Edges touching ``identity``, each oriented with it as ``i``."""
        return tuple(self.edges[n].oriented(identity) for n in self._index[identity])

    def games(self, identity: str) -> int:
        return sum(self.edges[n].games for n in self._index[identity])

    def with_priors(self, priors: Mapping[str, RatingEstimate]) -> TournamentGraph:
        merged = {p: priors.get(p, est) for p, est in self.players.items()}
        return TournamentGraph(merged, self.edges)

    def components(self) -> list[tuple[str, ...]]:
        """Connected components, each sorted, ordered by first member."""
        parent = {p: p for p in self.players}

        def find(x: str) -> str:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in self.edges:
            ri, rj = find(e.i), find(e.j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
        groups: dict[str, list[str]] = {}
        for p in self.players:
            groups.setdefault(find(p), []).append(p)
        return sorted(tuple(g) for g in groups.values())


ShareFn = Callable[[GameRecord], float]


def outcome_share(record: GameRecord) -> float:
    """Default score share for side A: 1, 0.5 or 0."""
    return record.resolved_outcome().score_a


def build_graph(
    records: Iterable[GameRecord],
    role_split: bool = False,
    priors: Mapping[str, RatingEstimate] | None = None,
    default_prior: RatingEstimate | None = None,
    share: ShareFn | None = None,
) -> TournamentGraph:
    """Aggregate game records into a tournament graph.

    Args:
        records: the games. Must be non-empty with unique ``game_id``.
        role_split: when set, each (player, role) pair becomes its own
            identity, written ``player@role``.
        priors: optional prior per identity.
        default_prior: prior for identities missing from ``priors``;
            defaults to mean 1000, sigma 1000.
        share: maps a record to side A's fractional score. Defaults to
            1/0.5/0 from the outcome; margin scoring plugs in here.

    Returns:
        The aggregated, canonically ordered graph.
    """
    records = list(records)
    if not records:
        raise RatingError("cannot build a graph from an empty record list")
    priors = priors or {}
    default_prior = default_prior or RatingEstimate(DEFAULT_MEAN, DEFAULT_SIGMA)
    share = share or outcome_share

    seen_ids: set[str] = set()
    # key (lo, hi) -> [wins_lo, draws, wins_hi, weighted_lo]
    acc: dict[tuple[str, str], list[float]] = {}
    names: set[str] = set()
    for rec in records:
        if rec.game_id in seen_ids:
            raise RatingError(f"duplicate game_id {rec.game_id!r}")
        seen_ids.add(rec.game_id)
        if role_split:
            a, b = role_identity(rec.player_a, rec.role_a), role_identity(rec.player_b, rec.role_b)
        else:
            if rec.player_a == rec.player_b:
                raise RatingError(
                    f"game {rec.game_id}: self-play needs role_split to separate the sides"
                )
            a, b = rec.player_a, rec.player_b
        outcome = rec.resolved_outcome()
        s_a = float(share(rec))
        if not 0.0 <= s_a <= 1.0:
            raise RatingError(f"game {rec.game_id}: score share {s_a} outside [0, 1]")
        names.update((a, b))
        if a < b:
            key, flip = (a, b), False
        else:
            key, flip = (b, a), True
        slot = acc.setdefault(key, [0, 0, 0, 0.0])
        if outcome is Outcome.DRAW:
            slot[1] += 1
        elif (outcome is Outcome.A_WINS) != flip:
            slot[0] += 1
        else:
            slot[2] += 1
        slot[3] += (1.0 - s_a) if flip else s_a

    edges = []
    for (i, j), (wi, d, wj, ws) in acc.items():
        games = wi + d + wj
        edges.append(ComparisonEdge(i, j, int(wi), int(d), int(wj), min(max(ws, 0.0), games)))
    players = {p: priors.get(p, default_prior) for p in names}
    return TournamentGraph(players, tuple(edges))


def like_role_comparisons(records: Iterable[GameRecord]) -> list[GameRecord]:
    """Rearrange scored, non-interactive records into like-role comparisons.

    Each side of each record is an independent performance scored on its
    role's own metric. Performances are grouped by (scenario, role) and
    every pair of different players within a group becomes one derived
    record, with the higher score on side A. The derived records carry
    both scores so margin scoring can be applied.
    """
    cells: dict[tuple[str, str], list[tuple[str, float, str]]] = {}
    for rec in records:
        if rec.score_a is None or rec.score_b is None:
            raise RatingError(f"game {rec.game_id}: like-role comparison needs both scores")
        cells.setdefault((rec.scenario, rec.role_a), []).append(
            (rec.player_a, rec.score_a, rec.game_id)
        )
        cells.setdefault((rec.scenario, rec.role_b), []).append(
            (rec.player_b, rec.score_b, rec.game_id)
        )
    out: list[GameRecord] = []
    for (scenario, role), entries in sorted(cells.items()):
        for (p1, s1, g1), (p2, s2, g2) in combinations(entries, 2):
            if p1 == p2:
                continue
            if s2 > s1:
                (p1, s1, g1), (p2, s2, g2) = (p2, s2, g2), (p1, s1, g1)
            outcome = Outcome.DRAW if s1 == s2 else Outcome.A_WINS
            out.append(
                GameRecord(f"{g1}~{g2}~{len(out)}", p1, role, p2, role, scenario, s1, s2, outcome)
            )
    return out


# ---------------------------------------------------------------- file I/O


def _parse_float(text: str, name: str, line: int) -> float | None:
    text = text.strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{name} {text!r} is not a number", line) from None
    if not math.isfinite(value):
        raise ParseError(f"{name} must be finite", line)
    return value


def parse_records(text: str) -> list[GameRecord]:
    """Parse the comma-separated game-record format.

    Lines starting with ``#`` and blank lines are skipped, as is a header
    line whose first field is ``game_id``. An empty outcome field means
    the outcome is read from the scores.
    """
    out = []
    for line_no, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if row[0].strip() == "game_id":
            continue
        if len(row) != len(RECORD_FIELDS):
            raise ParseError(f"expected {len(RECORD_FIELDS)} fields, got {len(row)}", line_no)
        gid, pa, ra, pb, rb, scen, sa, sb, oc = (c.strip() for c in row)
        code = oc.upper()
        if code and code not in {"A", "B", "D"}:
            raise ParseError(f"unknown outcome code {oc!r}", line_no)
        try:
            out.append(
                GameRecord(
                    gid, pa, ra, pb, rb, scen,
                    _parse_float(sa, "score_a", line_no),
                    _parse_float(sb, "score_b", line_no),
                    Outcome(code) if code else None,
                )
            )
        except ParseError:
            raise
        except RatingError as exc:
            raise ParseError(str(exc), line_no) from None
    return out


def read_records(path: str | Path) -> list[GameRecord]:
    return parse_records(Path(path).read_text(encoding="utf-8"))


def _fmt_score(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def format_records(records: Iterable[GameRecord], header_lines: Iterable[str] = ()) -> str:
    buf = io.StringIO()
    for h in header_lines:
        buf.write(f"# {h}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_FIELDS)
    for r in records:
        writer.writerow(
            [
                r.game_id, r.player_a, r.role_a, r.player_b, r.role_b, r.scenario,
                _fmt_score(r.score_a), _fmt_score(r.score_b),
                r.outcome.value if r.outcome is not None else "",
            ]
        )
    return buf.getvalue()


def write_records(
    path: str | Path, records: Iterable[GameRecord], header_lines: Iterable[str] = ()
) -> None:
    Path(path).write_text(format_records(records, header_lines), encoding="utf-8")


def parse_priors(text: str) -> dict[str, RatingEstimate]:
    """Parse a JSON priors mapping ``{identity: {"mu": .., "sigma": ..}}``.

    A top-level ``"priors"`` key is also accepted so that files with an
    embedded manifest can be read back.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"priors are not valid JSON: {exc.msg}", exc.lineno) from None
    if isinstance(data, dict) and isinstance(data.get("priors"), dict):
        data = data["priors"]
    if not isinstance(data, dict):
        raise ParseError("priors must be a JSON object")
    out = {}
    for name, entry in data.items():
        if name == "manifest":
            continue
        if not isinstance(entry, dict) or "mu" not in entry:
            raise ParseError(f"prior for {name!r} needs a 'mu' field")
        try:
            out[name] = RatingEstimate(
                float(entry["mu"]), float(entry.get("sigma", DEFAULT_SIGMA))
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(f"prior for {name!r}: {exc}") from None
    return out


def read_priors(path: str | Path) -> dict[str, RatingEstimate]:
    return parse_priors(Path(path).read_text(encoding="utf-8"))


def graph_to_dict(graph: TournamentGraph) -> dict:
    return {
        "players": {p: {"mu": e.mu, "sigma": e.sigma} for p, e in graph.players.items()},
        "edges": [
            {
                "i": e.i, "j": e.j, "wins_i": e.wins_i, "draws": e.draws,
                "wins_j": e.wins_j, "weighted_score_i": e.weighted_score_i,
            }
            for e in graph.edges
        ],
    }


def graph_from_dict(data: Mapping) -> TournamentGraph:
    players = {
        p: RatingEstimate(float(v["mu"]), float(v["sigma"])) for p, v in data["players"].items()
    }
    edges = tuple(
        ComparisonEdge(
            e["i"], e["j"], int(e["wins_i"]), int(e["draws"]), int(e["wins_j"]),
            float(e["weighted_score_i"]),
        )
        for e in data["edges"]
    )
    return TournamentGraph(players, edges)


def dumps_graph(graph: TournamentGraph) -> str:
    return json.dumps(graph_to_dict(graph), sort_keys=True, indent=1, allow_nan=False)


def loads_graph(text: str) -> TournamentGraph:
    return graph_from_dict(json.loads(text))
