import csv
import json

import pytest

from pgg_evo.cli import main

GAME = ["--n", "10", "--b", "10", "--c", "5", "--delta", "0.9"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_payoff_value(capsys):
    code, out, _ = run(capsys, "payoff", *GAME, "--epsilon", "0.05", "--incumbent-k", "9", "--focal-k", "9")
    assert code == 0
    assert float(out) == pytest.approx(10.3006, abs=5e-5)


def test_payoff_indistinguishable(capsys):
    code, out, _ = run(capsys, "payoff", *GAME, "--epsilon", "0", "--incumbent-k", "9", "--focal-k", "7")
    assert code == 0 and float(out) == pytest.approx(50.0, rel=1e-12)


def test_payoff_out_of_range(capsys):
    code, _, err = run(capsys, "payoff", *GAME, "--epsilon", "0.05", "--incumbent-k", "9", "--focal-k", "11")
    assert code == 2 and "k out of range" in err


def test_payoff_with_oracle_json(capsys):
    code, out, _ = run(capsys, "payoff", *GAME, "--epsilon", "0.05", "--incumbent-k", "9",
                       "--focal-k", "10", "--oracle", "20000", "--format", "json", "--seed", "3")
    report = json.loads(out)
    assert code == 0 and report["case"] == "b"
    assert abs(report["oracle"]["z"]) < 4
    assert report["config"]["oracle"] == 20000


def test_payoff_divergence_is_numeric_failure(capsys):
    code, _, err = run(capsys, "payoff", "--n", "10", "--b", "10", "--c", "5", "--delta", "1",
                       "--epsilon", "0", "--incumbent-k", "9", "--focal-k", "9")
    assert code == 1 and "diverges" in err


def test_usage_errors(capsys):
    assert run(capsys, "payoff", *GAME)[0] == 2  # missing options
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "stability", "--n", "10", "--b", "10", "--c", "20", "--delta", "0.9", "--k", "9")[0] == 2


@pytest.mark.parametrize("k,eps,verdict", [(9, "0", "NeutrallyStable"), (5, "0", "Unstable"),
                                           (9, "0.05", "EvolutionarilyStable")])
def test_stability(capsys, k, eps, verdict):
    code, out, _ = run(capsys, "stability", *GAME, "--epsilon", eps, "--k", str(k))
    report = json.loads(out)
    assert code == 0 and report["verdict"] == verdict
    if verdict == "Unstable":
        invaders = [w["invader"] for w in report["witnesses"] if w["gap"] < 0]
        assert invaders == [10]


def test_band(capsys):
    code, out, _ = run(capsys, "band", *GAME, "--k", "9")
    report = json.loads(out)
    assert code == 0 and report["eps_lower"] == 0
    assert report["eps_upper"] == pytest.approx(0.06813, abs=1e-4)


def test_band_all(capsys):
    code, out, _ = run(capsys, "band", *GAME)
    report = json.loads(out)
    assert code == 0 and report["ok"] and len(report["bands"]) == 9


def test_sweep_shape_and_stability(tmp_path, capsys):
    path = tmp_path / "sweep.csv"
    plot = tmp_path / "sweep.gp"
    assert main(["sweep", "--n", "10", "--deltas", "1,0.9,0.8", "--out", str(path),
                 "--gnuplot", str(plot)]) == 0
    first = path.read_bytes()
    assert main(["sweep", "--n", "10", "--deltas", "1,0.9,0.8", "--out", str(path)]) == 0
    assert path.read_bytes() == first
    assert "plot" in plot.read_text()
    rows = list(csv.DictReader(path.open()))
    assert list(rows[0]) == ["delta", "k", "epsilon", "Delta", "threshold"]
    for k in range(1, 10):
        curve = [float(r["Delta"]) for r in rows if r["delta"] == "1.0" and r["k"] == str(k)]
        assert all(a > b for a, b in zip(curve, curve[1:]))


def test_config_file_and_round_trip(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"n": 10, "b": 10, "c": 5, "delta": 0.9, "epsilon": 0.05, "k": 9}))
    code, out, _ = run(capsys, "stability", "--config", str(cfg))
    report = json.loads(out)
    assert code == 0 and report["verdict"] == "EvolutionarilyStable"
    for key, value in json.loads(cfg.read_text()).items():
        assert report["config"][key] == value
    # flags beat the file
    code, out, _ = run(capsys, "stability", "--config", str(cfg), "--epsilon", "0")
    assert json.loads(out)["verdict"] == "NeutrallyStable"


def test_config_unknown_field(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"n": 10, "typo_delta": 0.9}))
    code, _, err = run(capsys, "band", "--config", str(cfg))
    assert code == 2 and "typo_delta" in err


def test_missing_config_file(capsys):
    assert run(capsys, "band", "--config", "/nonexistent/x.json")[0] == 1


def test_simulate_is_deterministic(tmp_path, monkeypatch):
    args = ["simulate", "--n", "5", "--b", "5", "--c", "2.5", "--delta", "0.9", "--epsilon", "0.05",
            "--size", "50", "--generations", "40", "--seed", "9", "--mutation-rate", "0.05"]
    outs = []
    for threads in ("1", "3"):
        monkeypatch.setenv("PGG_EVO_THREADS", threads)
        path = tmp_path / f"trace{threads}.csv"
        summary = tmp_path / f"summary{threads}.json"
        assert main(args + ["--out", str(path), "--summary", str(summary)]) == 0
        outs.append(path.read_bytes())
        assert json.loads(summary.read_text())["cli"]["seed"] == 9
    assert outs[0] == outs[1]
    assert outs[0].decode().startswith("generation,k,frequency,mean_payoff\n")


def test_simulate_drift(capsys):
    code, out, _ = run(capsys, "simulate", "--n", "4", "--b", "4", "--c", "2", "--delta", "0.9",
                       "--epsilon", "0.05", "--size", "20", "--generations", "20",
                       "--episodes-per-generation", "1", "--drift", "30")
    report = json.loads(out)
    assert code == 0 and report["trials"] == 30


def test_validate_quick(capsys):
    code, out, _ = run(capsys, "validate", "--quick")
    assert code == 0
    assert "FAIL" not in out and "checks passed" in out
