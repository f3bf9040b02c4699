"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 unreadable or malformed input,
4 non-convergence, 5 value outside a formula's valid range, 6 otherwise
invalid data.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import warnings
from collections.abc import Sequence
from pathlib import Path

from scelo import __version__
from scelo.asymmetric import anova, fit_role_ratings
from scelo.batch_fit import BatchConfig, fit_pml, pml_residuals
from scelo.betting import BetParams, optimal_bet
from scelo.core import (
    DEFAULT_MEAN,
    DEFAULT_SIGMA,
    RatingEstimate,
    build_graph,
    format_records,
    like_role_comparisons,
    read_priors,
    read_records,
)
from scelo.elo_update import (
    UpdateContext,
    classic_update,
    sc_update,
    sc_update_uninformative,
)
from scelo.errors import ConvergenceError, ParseError, RangeViolation, RatingError
from scelo.lls_fit import (
    build_advantage_graph,
    fit_lls,
    fit_lls_weighted,
    uncertainty_decomposition,
)
from scelo.probability import (
    elo_average,
    mean_win_prob,
    population_improvement,
    required_sample_size,
)
from scelo.scoring import MarginPolicy, ecf_to_elo, elo_to_ecf, record_share
from scelo.simulator import (
    PRNG_NAME,
    SimConfig,
    compare_to_truth,
    generate_population,
    play_schedule,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_CONVERGENCE = 4
EXIT_RANGE = 5
EXIT_INVALID = 6
EXIT_CHECK_FAILED = 1

ENV_TOL = "SCELO_TOL"
ENV_SEED = "SCELO_SEED"


def _env_float(name: str, default: float) -> float:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise RatingError(f"environment variable {name}={raw!r} is not a number") from None


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise RatingError(f"environment variable {name}={raw!r} is not an integer") from None


# ----------------------------------------------------------------- helpers


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _manifest(command: str, config: dict, inputs: Sequence[Path], seed: int | None = None) -> dict:
    return {
        "tool": "scelo",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": {p.name: _digest(p) for p in inputs},
        "seed": seed,
    }


def _check_finite(obj, where: str = "report") -> None:
    if isinstance(obj, float) and not math.isfinite(obj):
        raise RatingError(f"non-finite value in {where}")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{where}.{k}")
    elif isinstance(obj, (list, tuple)):
        for v in obj:
            _check_finite(v, where)


def _dump_json(data: dict) -> str:
    _check_finite(data)
    return json.dumps(data, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _manifest_line(manifest: dict) -> str:
    return "# manifest: " + json.dumps(manifest, sort_keys=True) + "\n"


def _write(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")


def _table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [[str(h) for h in headers]] + [
        [f"{c:.1f}" if isinstance(c, float) else str(c) for c in row] for row in rows
    ]
    widths = [max(len(r[n]) for r in cells) for n in range(len(headers))]
    lines = []
    for k, row in enumerate(cells):
        lines.append("  ".join(c.rjust(w) if k and n else c.ljust(w)
                               for n, (c, w) in enumerate(zip(row, widths))).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _load_inputs(args) -> tuple[list, dict, list[Path]]:
    paths = [Path(args.records)]
    try:
        records = read_records(paths[0])
    except OSError as exc:
        raise ParseError(f"cannot read {args.records}: {exc.strerror}") from None
    priors = {}
    if getattr(args, "priors", None):
        paths.append(Path(args.priors))
        try:
            priors = read_priors(paths[1])
        except OSError as exc:
            raise ParseError(f"cannot read {args.priors}: {exc.strerror}") from None
    if getattr(args, "pairing", "direct") == "like-role":
        records = like_role_comparisons(records)
    return records, priors, paths


def _graph(args, records, priors, role_split: bool):
    policy = MarginPolicy.parse(args.margin)
    share = record_share(policy) if policy is not None else None
    default = RatingEstimate(DEFAULT_MEAN, DEFAULT_SIGMA)
    return build_graph(records, role_split, priors, default, share)


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("records", help="game-record file")
    p.add_argument("--priors", help="JSON priors file {id: {mu, sigma}}")
    p.add_argument("--margin", default="off", help="off | rms:FRAC | fixed:DELTA")
    p.add_argument(
        "--pairing",
        choices=["direct", "like-role"],
        default="direct",
        help="like-role compares scores of the same role within each scenario",
    )
    p.add_argument("--roles", action="store_true", help="rate each (player, role) separately")
    p.add_argument("--tol", type=float, default=None, help="convergence tolerance (Elo)")
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--out", help="write the JSON report here")


# ---------------------------------------------------------------- commands


def cmd_rate(args) -> int:
    tol = args.tol if args.tol is not None else _env_float(ENV_TOL, 0.05)
    records, priors, paths = _load_inputs(args)
    graph = _graph(args, records, priors, args.roles)
    rows, players = [], {}
    for ident in graph.identities:
        prior = graph.players[ident]
        if args.k is not None:
            prior = RatingEstimate.from_k(prior.mu, args.k)
        edges = graph.incident_edges(ident)
        opponents = tuple((graph.players[e.j].mu, e.games) for e in edges)
        score = math.fsum(e.weighted_score_i for e in edges)
        ctx = UpdateContext(prior, opponents, score)
        if args.method == "classic" or prior.frozen:
            res = classic_update(ctx)
        elif args.method == "sc":
            res = sc_update(ctx, tol, args.damping)
        else:
            res = sc_update_uninformative(ctx, tol)
        players[ident] = {
            "prior_mu": prior.mu,
            "prior_sigma": prior.sigma,
            "k": prior.k,
            "rating": res.rating,
            "sigma": res.sigma,
            "games": int(ctx.games),
            "actual_score": score,
            "expected_score": res.expected_score,
            "iterations": res.iterations,
        }
        rows.append((ident, prior.mu, res.rating, res.sigma, int(ctx.games), f"{score:.3f}",
                     f"{res.expected_score:.3f}"))
    config = {
        "method": args.method, "k": args.k, "tol": tol, "damping": args.damping,
        "margin": args.margin, "pairing": args.pairing, "roles": args.roles,
    }
    report = {"manifest": _manifest("rate", config, paths), "players": players}
    _write(args.out, _dump_json(report))
    sys.stdout.write(_manifest_line(report["manifest"]))
    sys.stdout.write(
        _table(["player", "prior", "rating", "sigma", "games", "A", "E"], rows)
    )
    return EXIT_OK


def cmd_fit(args) -> int:
    tol = args.tol if args.tol is not None else _env_float(ENV_TOL, 0.05)
    records, priors, paths = _load_inputs(args)
    graph = _graph(args, records, priors, args.roles)
    caught: list[str] = []
    report: dict = {}
    with warnings.catch_warnings(record=True) as wlist:
        warnings.simplefilter("always")
        adv = build_advantage_graph(graph, args.prior_weight, args.moments)
        diagnostics: dict = {}
        if args.roles:
            if args.fitter == "lls-weighted":
                raise RatingError("--roles supports the pml and lls fitters")
            rr = fit_role_ratings(
                graph, args.fitter, prior_weight=args.prior_weight,
                cfg=BatchConfig(tol=tol, damping=args.damping, max_iters=args.max_iters),
            )
            shift = args.target_mean if args.target_mean is not None else 0.0
            ratings = {f"{a}@{rr.roles[0]}": r + shift for a, r in rr.rp.items()}
            ratings.update({f"{a}@{rr.roles[1]}": r + shift for a, r in rr.rg.items()})
            res = anova(rr)
            report["anova"] = {
                "roles": list(rr.roles),
                "rho": res.rho,
                "agents": {
                    a: {"overall": res.overall[a] + shift, "residual": res.residual[a]}
                    for a in sorted(res.overall)
                },
            }
        elif args.fitter == "pml":
            cfg = BatchConfig(tol=tol, damping=args.damping, max_iters=args.max_iters,
                              target_mean=args.target_mean)
            fit = fit_pml(graph, cfg)
            ratings = dict(fit.ratings)
            resid = pml_residuals(graph, ratings)
            diagnostics = {
                "iterations": fit.iterations,
                "max_residual": max((abs(v) for v in resid.values()), default=0.0),
                "shift_applied": fit.shift_applied,
            }
        elif args.fitter == "lls":
            target = args.target_mean if args.target_mean is not None else DEFAULT_MEAN
            fit = fit_lls(adv, target, tol, args.damping)
            ratings = dict(fit.ratings)
            diagnostics = {"iterations": fit.iterations, "max_residual": fit.max_residual}
        else:
            fit = fit_lls_weighted(adv, dict(graph.players), tol, args.damping)
            ratings = dict(fit.ratings)
            diagnostics = {"iterations": fit.iterations, "max_residual": fit.max_residual}
        caught = [str(w.message) for w in wlist]
    dec = uncertainty_decomposition(ratings, adv)
    players = {}
    rows = []
    for ident in sorted(ratings):
        tot, stat, struct = dec.get(ident, (None, None, None))
        entry = {
            "rating": ratings[ident],
            "games": graph.games(ident) if ident in graph.players else 0,
        }
        if tot is not None:
            entry.update(sigma_total=tot, sigma_statistical=stat, sigma_structural=struct)
        players[ident] = entry
        rows.append((ident, ratings[ident], "-" if tot is None else tot,
                     "-" if stat is None else stat, "-" if struct is None else struct,
                     entry["games"]))
    config = {
        "fitter": args.fitter, "roles": args.roles, "target_mean": args.target_mean,
        "prior_weight": args.prior_weight, "moments": args.moments, "tol": tol,
        "damping": args.damping, "max_iters": args.max_iters, "margin": args.margin,
        "pairing": args.pairing,
    }
    report.update(
        manifest=_manifest("fit", config, paths),
        players=players,
        diagnostics=diagnostics,
        warnings=caught,
    )
    _write(args.out, _dump_json(report))
    for msg in caught:
        sys.stderr.write(f"warning: {msg}\n")
    sys.stdout.write(_manifest_line(report["manifest"]))
    sys.stdout.write(
        _table(["player", "rating", "sigma", "stat", "struct", "games"], rows)
    )
    if "anova" in report:
        a = report["anova"]
        sys.stdout.write(f"\nside advantage rho ({a['roles'][0]} over {a['roles'][1]}): "
                         f"{a['rho']:.1f}\n")
        sys.stdout.write(_table(
            ["agent", "overall", "residual"],
            [(k, v["overall"], v["residual"]) for k, v in a["agents"].items()],
        ))
    return EXIT_OK


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"config is not valid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(data, dict):
        raise ParseError("config must be a JSON object")
    data.pop("manifest", None)
    return data


def cmd_simulate(args) -> int:
    data = _load_config(args.config)
    if args.seed is not None:
        data["seed"] = args.seed
    elif "seed" not in data:
        data["seed"] = _env_int(ENV_SEED, 0)
    cfg = SimConfig.from_mapping(data)
    agents = generate_population(cfg)
    records = play_schedule(agents, cfg)
    inputs = [Path(args.config)] if args.config else []
    manifest = _manifest("simulate", cfg.to_dict(), inputs, cfg.seed)
    manifest["prng"] = PRNG_NAME
    header = ["manifest: " + json.dumps(manifest, sort_keys=True)]
    text = format_records(records, header)
    Path(args.out_records).write_text(text, encoding="utf-8")
    buf = io.StringIO()
    buf.write(f"# {header[0]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["agent", "era", "red_cap", "blue_cap", "true_combined"])
    for a in agents:
        w.writerow([a.id, a.era, repr(a.red_cap), repr(a.blue_cap), repr(a.true_combined)])
    Path(args.out_truth).write_text(buf.getvalue(), encoding="utf-8")
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    sys.stdout.write(
        f"{len(records)} records, {len(agents)} agents, seed {cfg.seed} ({PRNG_NAME})\n"
        f"records sha256 {digest}\n"
    )
    return EXIT_OK


def read_truth(path: str | Path) -> dict[str, float]:
    out = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_no, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or row[0].startswith("#") or row[0] == "agent":
            continue
        if len(row) != 5:
            raise ParseError(f"expected 5 truth fields, got {len(row)}", line_no)
        try:
            out[row[0]] = float(row[4])
        except ValueError:
            raise ParseError(f"bad true_combined {row[4]!r}", line_no) from None
    return out


def cmd_eval(args) -> int:
    try:
        report = json.loads(Path(args.report).read_text(encoding="utf-8"))
        truth = read_truth(args.truth)
    except OSError as exc:
        raise ParseError(f"cannot read input: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"report is not valid JSON: {exc.msg}", exc.lineno) from None
    if "anova" in report:
        ratings = {a: v["overall"] for a, v in report["anova"]["agents"].items()}
    else:
        ratings = {p: v["rating"] for p, v in report.get("players", {}).items()}
    corr, rms = compare_to_truth(ratings, truth)
    sys.stdout.write(f"correlation {corr:.4f} rms {rms:.1f}\n")
    if args.min_correlation is not None and corr < args.min_correlation:
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_tools(args) -> int:
    t = args.tool
    if t == "convert-ecf":
        value = elo_to_ecf(args.value) if args.inverse else ecf_to_elo(args.value)
        out = f"{value:.1f}"
    elif t == "sample-size":
        out = str(required_sample_size(args.advantage, args.k_sigma, args.rounding))
    elif t == "bet":
        out = f"{optimal_bet(BetParams(args.p, args.r, d_pain=args.d_pain)):.2f}"
    elif t == "elo-average":
        r = elo_average(args.opponent, args.components)
        out = f"{r:.1f} {mean_win_prob(args.opponent, args.components):.4f}"
    else:
        out = f"{population_improvement(args.p1, args.p2):+.1f}"
    sys.stdout.write(out + "\n")
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scelo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"scelo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", help="per-player updates against opponents at their priors")
    _common_flags(p)
    p.add_argument("--method", choices=["classic", "sc", "sc-flat"], default="sc")
    p.add_argument("--k", type=float, default=None, help="K for every player, overriding priors")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("fit", help="fit all ratings at once")
    _common_flags(p)
    p.add_argument("--fitter", choices=["pml", "lls", "lls-weighted"], default="pml")
    p.add_argument("--target-mean", type=float, default=None)
    p.add_argument("--prior-weight", type=float, default=0.1)
    p.add_argument("--moments", choices=["approx", "numeric"], default="approx")
    p.add_argument("--max-iters", type=int, default=100_000)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="generate a synthetic tournament")
    p.add_argument("--config", help="JSON simulator config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-records", required=True)
    p.add_argument("--out-truth", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="compare a fit report against a truth file")
    p.add_argument("report")
    p.add_argument("truth")
    p.add_argument("--min-correlation", type=float, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("tools", help="single-value calculators")
    tools = p.add_subparsers(dest="tool", required=True)
    t = tools.add_parser("convert-ecf", help="ECF advantage to Elo advantage")
    t.add_argument("value", type=float)
    t.add_argument("--inverse", action="store_true", help="Elo advantage to ECF")
    t = tools.add_parser("sample-size", help="games needed to detect an advantage")
    t.add_argument("advantage", type=float)
    t.add_argument("k_sigma", type=float)
    t.add_argument("--rounding", choices=["ceil", "nearest"], default="ceil")
    t = tools.add_parser("bet", help="risk-averse optimal stake")
    t.add_argument("p", type=float)
    t.add_argument("r", type=float)
    t.add_argument("d_pain", type=float)
    t = tools.add_parser("elo-average", help="Elo-average of component ratings")
    t.add_argument("opponent", type=float)
    t.add_argument("components", type=float, nargs="+")
    t = tools.add_parser("population-shift", help="rating gain between two populations")
    t.add_argument("p1", type=float)
    t.add_argument("p2", type=float)
    p.set_defaults(func=cmd_tools)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ParseError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PARSE
    except ConvergenceError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONVERGENCE
    except RangeViolation as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_RANGE
    except RatingError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
