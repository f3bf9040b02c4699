from __future__ import annotations

import json
import subprocess
import sys

import pytest

from scelo import cli


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def report(path):
    return json.loads(path.read_text())


class TestRate:
    def test_classic_overshoot(self, capsys, fixtures, tmp_path):
        out = tmp_path / "r.json"
        code, _, _ = run(capsys, "rate", fixtures / "overshoot_400.csv", "--priors",
                         fixtures / "overshoot_priors.json", "--method", "classic", "--k", 116, "--out", out)
        assert code == 0
        assert report(out)["players"]["P"]["rating"] == pytest.approx(8210.0, abs=0.1)

    def test_self_consistent(self, capsys, fixtures, tmp_path):
        out = tmp_path / "r.json"
        code, stdout, _ = run(capsys, "rate", fixtures / "overshoot_400.csv", "--priors",
                              fixtures / "overshoot_priors.json", "--method", "sc", "--k", 116, "--out", out)
        assert code == 0
        assert report(out)["players"]["P"]["rating"] == pytest.approx(1355.8, abs=0.1)
        assert "1355.8" in stdout
        assert stdout.startswith("# manifest: ")

    def test_margin_scoring_of_like_role_comparisons(self, capsys, fixtures, tmp_path):
        out = tmp_path / "r.json"
        code, _, _ = run(capsys, "rate", fixtures / "hni_scores.csv", "--priors", fixtures / "hni_priors.json",
                         "--pairing", "like-role", "--margin", "rms:0.1", "--k", 50, "--method", "classic",
                         "--out", out)
        assert code == 0
        x = report(out)["players"]["X"]
        assert x["actual_score"] == pytest.approx(2.012, abs=0.01)
        assert x["rating"] == pytest.approx(1270.5, abs=0.2)

    def test_sweep_rejected_by_flat_prior(self, capsys, fixtures):
        code, _, err = run(capsys, "rate", fixtures / "sweep.csv", "--method", "sc-flat")
        assert code == cli.EXIT_RANGE
        assert "sweep" in err

    def test_frozen_player_keeps_rating(self, capsys, fixtures, tmp_path):
        out = tmp_path / "r.json"
        code, _, _ = run(capsys, "rate", fixtures / "anchor.csv", "--priors", fixtures / "anchor_priors.json",
                         "--out", out)
        assert code == 0
        assert report(out)["players"]["script"]["rating"] == 1000.0


class TestFit:
    def test_anchor_unchanged(self, capsys, fixtures, tmp_path):
        out = tmp_path / "f.json"
        code, _, _ = run(capsys, "fit", fixtures / "anchor.csv", "--priors", fixtures / "anchor_priors.json",
                         "--out", out)
        assert code == 0
        players = report(out)["players"]
        assert players["script"]["rating"] == 1000.0
        assert players["agent"]["rating"] > 1000.0

    def test_single_game_lls(self, capsys, fixtures, tmp_path):
        out = tmp_path / "f.json"
        code, _, _ = run(capsys, "fit", fixtures / "single_game.csv", "--fitter", "lls", "--out", out)
        assert code == 0
        players = report(out)["players"]
        assert players["alpha"]["rating"] > players["beta"]["rating"]
        assert players["alpha"]["sigma_total"] > 0

    @pytest.mark.parametrize("fitter", ["pml", "lls", "lls-weighted"])
    def test_reports_are_byte_identical(self, capsys, fixtures, tmp_path, fitter):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert run(capsys, "fit", fixtures / "anchor.csv", "--priors", fixtures / "anchor_priors.json",
                       "--fitter", fitter, "--out", out)[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_like_role_comparisons_cannot_feed_role_fit(self, capsys, fixtures):
        code, _, err = run(capsys, "fit", fixtures / "hni_scores.csv", "--pairing", "like-role",
                           "--margin", "rms:0.1", "--roles", "--fitter", "lls")
        assert code == cli.EXIT_INVALID
        assert "cross roles" in err

    def test_self_play_roles(self, capsys, tmp_path):
        rows = ["game_id,player_a,role_a,player_b,role_b,scenario,score_a,score_b,outcome"]
        rows += [f"g{n},A,Pink,A,Green,,,,{'A' if n % 4 else 'B'}" for n in range(400)]
        src = tmp_path / "self.csv"
        src.write_text("\n".join(rows) + "\n")
        out = tmp_path / "f.json"
        code, stdout, _ = run(capsys, "fit", src, "--roles", "--fitter", "lls", "--out", out)
        assert code == 0
        rep = report(out)
        assert rep["anova"]["roles"] == ["Green", "Pink"]
        assert rep["anova"]["rho"] == pytest.approx(-190.85 / 2, abs=1.0)
        assert "side advantage" in stdout

    def test_non_convergence_exit_code(self, capsys, fixtures):
        code, _, err = run(capsys, "fit", fixtures / "overshoot_400.csv", "--max-iters", 1)
        assert code == cli.EXIT_CONVERGENCE
        assert "converge" in err

    def test_parse_error_exit_code(self, capsys, fixtures):
        code, _, err = run(capsys, "fit", fixtures / "bad_outcome.csv")
        assert code == cli.EXIT_PARSE
        assert "line 3" in err

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "fit", tmp_path / "nope.csv")[0] == cli.EXIT_PARSE

    def test_cross_metric_scores_are_invalid(self, capsys, fixtures):
        code, _, err = run(capsys, "fit", fixtures / "hni_scores.csv")
        assert code == cli.EXIT_INVALID
        assert "different metrics" in err

    def test_usage_error(self, capsys):
        assert run(capsys, "fit")[0] == cli.EXIT_USAGE
        assert run(capsys, "rate", "x.csv", "--method", "bogus")[0] == cli.EXIT_USAGE

    def test_env_tolerance(self, capsys, fixtures, tmp_path, monkeypatch):
        monkeypatch.setenv("SCELO_TOL", "0.001")
        out = tmp_path / "f.json"
        run(capsys, "fit", fixtures / "anchor.csv", "--out", out)
        assert report(out)["manifest"]["config"]["tol"] == 0.001


class TestSimulateAndEval:
    def test_default_run_round_trip(self, capsys, tmp_path):
        rec, truth, rep = tmp_path / "g.csv", tmp_path / "t.csv", tmp_path / "f.json"
        code, stdout, _ = run(capsys, "simulate", "--seed", 7, "--out-records", rec, "--out-truth", truth)
        assert code == 0
        assert stdout.startswith("40000 records, 200 agents")
        assert run(capsys, "fit", rec, "--out", rep)[0] == 0
        code, stdout, _ = run(capsys, "eval", rep, truth, "--min-correlation", 0.99)
        assert code == 0
        corr = float(stdout.split()[1])
        assert corr > 0.99

    def test_same_seed_same_digest(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"eras": 2, "agents_per_era": 4, "carryover": 2, "games_per_pairing_block": 5}))
        outs = []
        for k in range(2):
            rec, truth = tmp_path / f"g{k}.csv", tmp_path / f"t{k}.csv"
            run(capsys, "simulate", "--config", cfg, "--seed", 3, "--out-records", rec, "--out-truth", truth)
            outs.append((rec.read_bytes(), truth.read_bytes()))
        assert outs[0] == outs[1]
        head = outs[0][0].decode().splitlines()[0]
        manifest = json.loads(head.removeprefix("# manifest: "))
        assert manifest["seed"] == 3 and manifest["prng"] == "numpy.random.PCG64"

    def test_env_seed(self, capsys, tmp_path, monkeypatch):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"eras": 1, "agents_per_era": 3, "games_per_pairing_block": 2}))
        monkeypatch.setenv("SCELO_SEED", "11")
        rec, truth = tmp_path / "g.csv", tmp_path / "t.csv"
        run(capsys, "simulate", "--config", cfg, "--out-records", rec, "--out-truth", truth)
        assert '"seed": 11' in rec.read_text().splitlines()[0]

    def test_single_era(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"eras": 1, "agents_per_era": 4, "games_per_pairing_block": 3}))
        rec, truth = tmp_path / "g.csv", tmp_path / "t.csv"
        assert run(capsys, "simulate", "--config", cfg, "--out-records", rec, "--out-truth", truth)[0] == 0
        players = {line.split(",")[1] for line in rec.read_text().splitlines() if not line.startswith(("#", "game_id"))}
        assert len(players) == 4

    def test_invalid_config_field_named(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"eras": 0}))
        code, _, err = run(capsys, "simulate", "--config", cfg, "--out-records", tmp_path / "g",
                           "--out-truth", tmp_path / "t")
        assert code == cli.EXIT_INVALID
        assert "eras" in err

    def test_eval_threshold_failure(self, capsys, tmp_path):
        rep, truth = tmp_path / "r.json", tmp_path / "t.csv"
        rep.write_text(json.dumps({"players": {"a": {"rating": 1}, "b": {"rating": 2}, "c": {"rating": 3}}}))
        truth.write_text("agent,era,red_cap,blue_cap,true_combined\na,0,1,1,3\nb,0,1,1,2\nc,0,1,1,1\n")
        code, _, _ = run(capsys, "eval", rep, truth, "--min-correlation", 0.5)
        assert code == cli.EXIT_CHECK_FAILED


class TestTools:
    @pytest.mark.parametrize(
        "argv,expected",
        [
            (["sample-size", 200, 1], "7"),
            (["sample-size", 200, 1, "--rounding", "nearest"], "6"),
            (["sample-size", 100, 1.5, "--rounding", "nearest"], "55"),
            (["convert-ecf", 30], "240.8"),
            (["convert-ecf", 240.8, "--inverse"], "30.0"),
            (["bet", 0.5, 3, 100], "33.33"),
            (["elo-average", 1200, 1400, 1100], "1241.8 0.5598"),
            (["population-shift", 0.675, 0.423], "+180.9"),
        ],
    )
    def test_values(self, capsys, argv, expected):
        code, out, _ = run(capsys, "tools", *argv)
        assert code == 0
        assert out.strip() == expected

    def test_range_violation_cites_bound(self, capsys):
        code, _, err = run(capsys, "tools", "convert-ecf", 45)
        assert code == cli.EXIT_RANGE
        assert "40" in err


def test_console_script(fixtures):
    proc = subprocess.run(
        [sys.executable, "-m", "scelo.cli", "tools", "sample-size", "34.9", "2"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert abs(int(proc.stdout) - 796) <= 1
