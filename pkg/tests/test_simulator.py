from __future__ import annotations

import numpy as np
import pytest

from scelo.core import Outcome, format_records
from scelo.errors import RatingError
from scelo.simulator import (
    SimAgent,
    SimConfig,
    compare_to_truth,
    era_participants,
    evaluate_fit,
    fit_ratings,
    generate_population,
    play_schedule,
)


def win_fraction(records, agent_id):
    won = sum((r.player_a == agent_id) == (r.outcome is Outcome.A_WINS) for r in records)
    return won / len(records)


class TestPopulation:
    def test_default_size(self, default_sim):
        _, agents, _ = default_sim
        assert len(agents) == 200
        assert len({a.id for a in agents}) == 200

    def test_caps_respect_spreads(self, default_sim):
        cfg, agents, _ = default_sim
        for a in agents:
            era_mean = cfg.base_mean + a.era * cfg.era_step
            assert abs(a.red_cap - a.blue_cap) <= 2 * cfg.role_spread
            assert abs((a.red_cap + a.blue_cap) / 2 - era_mean) <= cfg.base_spread + cfg.role_spread
            assert min(a.red_cap, a.blue_cap) <= a.true_combined <= max(a.red_cap, a.blue_cap)

    def test_zero_spread_era_is_uniform(self):
        agents = generate_population(SimConfig(eras=2, base_spread=0, role_spread=0))
        assert {a.red_cap for a in agents if a.era == 0} == {1000.0}
        assert {a.blue_cap for a in agents if a.era == 1} == {1150.0}

    def test_same_seed_same_population(self):
        assert generate_population(SimConfig(seed=5)) == generate_population(SimConfig(seed=5))
        assert generate_population(SimConfig(seed=5)) != generate_population(SimConfig(seed=6))

    def test_normal_mode(self):
        agents = generate_population(SimConfig(perturbation="normal", seed=1))
        assert len(agents) == 200


class TestSchedule:
    def test_default_record_count(self, default_sim):
        _, _, records = default_sim
        assert len(records) == 40_000
        assert len({r.game_id for r in records}) == 40_000

    def test_byte_identical_stream(self, default_sim):
        cfg, agents, records = default_sim
        again = play_schedule(generate_population(cfg), cfg)
        assert format_records(again) == format_records(records)

    def test_carryover_count(self, default_sim):
        cfg, _, records = default_sim
        seen = era_participants(records)
        assert len(seen["era0"]) == cfg.agents_per_era
        for era in range(1, cfg.eras):
            assert len(seen[f"era{era}"]) == cfg.agents_per_era + cfg.carryover

    def test_carryovers_come_from_previous_era(self, default_sim):
        cfg, _, records = default_sim
        seen = era_participants(records)
        for era in range(1, cfg.eras):
            old = {a for a in seen[f"era{era}"] if not a.startswith(f"E{era:02d}")}
            assert old <= seen[f"era{era - 1}"]

    def test_roles_alternate(self, default_sim):
        _, _, records = default_sim
        first = records[:4]
        assert [r.role_a for r in first] == ["Red", "Blue", "Red", "Blue"]

    def test_random_roles_are_seeded(self):
        cfg = SimConfig(eras=2, agents_per_era=4, carryover=2, games_per_pairing_block=10,
                        role_assignment="random", seed=3)
        a = play_schedule(generate_population(cfg), cfg)
        b = play_schedule(generate_population(cfg), cfg)
        assert a == b
        assert {r.role_a for r in a} == {"Red", "Blue"}

    def test_identical_agents_split_evenly(self):
        cfg = SimConfig(eras=1, agents_per_era=2, games_per_pairing_block=2000, seed=4)
        agents = [SimAgent("E00A00", 0, 1000.0, 1000.0), SimAgent("E00A01", 0, 1000.0, 1000.0)]
        records = play_schedule(agents, cfg)
        f = win_fraction(records, "E00A00")
        assert abs(f - 0.5) <= 3 * np.sqrt(0.25 / len(records))

    def test_strong_agent_win_rate(self):
        cfg = SimConfig(eras=1, agents_per_era=2, games_per_pairing_block=2000, seed=8)
        agents = [SimAgent("E00A00", 0, 1400.0, 1400.0), SimAgent("E00A01", 0, 1000.0, 1000.0)]
        records = play_schedule(agents, cfg)
        f = win_fraction(records, "E00A00")
        p = 1 / (1 + 10 ** -1)
        assert abs(f - p) <= 3 * np.sqrt(p * (1 - p) / len(records))

    def test_single_era_has_no_carryovers(self):
        cfg = SimConfig(eras=1, agents_per_era=6, games_per_pairing_block=5)
        records = play_schedule(generate_population(cfg), cfg)
        assert len(era_participants(records)["era0"]) == 6
        assert len(records) == 6 * 10


class TestConfig:
    @pytest.mark.parametrize(
        "kw,field",
        [({"eras": 0}, "eras"), ({"carryover": 1.5}, "carryover"), ({"base_spread": -1}, "base_spread"),
         ({"perturbation": "cauchy"}, "perturbation"), ({"seed": -1}, "seed")],
    )
    def test_invalid_field_named(self, kw, field):
        with pytest.raises(RatingError, match=field):
            SimConfig(**kw)

    def test_unknown_field(self):
        with pytest.raises(RatingError, match="agents"):
            SimConfig.from_mapping({"agents": 3})

    def test_round_trip(self):
        cfg = SimConfig(eras=3, seed=99)
        assert SimConfig.from_mapping(cfg.to_dict()) == cfg


class TestEvaluation:
    def test_pml_tracks_truth(self, default_sim):
        _, agents, records = default_sim
        ev = evaluate_fit(records, agents, "pml")
        assert ev.correlation > 0.99
        assert ev.rms_error < 60

    def test_lls_agrees_with_pml(self, default_sim):
        _, _, records = default_sim
        pml = fit_ratings(records, "pml")
        lls = fit_ratings(records, "lls")
        ids = sorted(pml)
        assert np.corrcoef([pml[i] for i in ids], [lls[i] for i in ids])[0, 1] > 0.999

    def test_era_means_rise(self, default_sim):
        cfg, agents, records = default_sim
        fitted = fit_ratings(records, "pml")
        means = [np.mean([fitted[a.id] for a in agents if a.era == e]) for e in range(cfg.eras)]
        rising = sum(b >= a for a, b in zip(means, means[1:]))
        # ten eras give nine adjacent pairs
        assert rising == cfg.eras - 1

    def test_zero_spread_single_era(self):
        cfg = SimConfig(eras=1, agents_per_era=5, base_spread=0, role_spread=0, seed=2)
        agents = generate_population(cfg)
        fitted = fit_ratings(play_schedule(agents, cfg), "pml")
        # 200 games each at even odds: a few binomial sigmas of rating noise
        assert np.ptp(list(fitted.values())) < 150

    def test_compare_to_truth(self):
        corr, rms = compare_to_truth({"a": 1.0, "b": 2.0, "c": 3.0}, {"a": 11.0, "b": 12.0, "c": 13.0})
        assert corr == pytest.approx(1.0) and rms == pytest.approx(0.0)
        with pytest.raises(RatingError):
            compare_to_truth({"a": 1.0}, {"a": 1.0})

    def test_unknown_fitter(self, default_sim):
        with pytest.raises(RatingError):
            fit_ratings(default_sim[2][:10], "glicko")
