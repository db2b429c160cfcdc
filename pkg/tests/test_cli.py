import json

import numpy as np
import pandas as pd
import pytest

from rprvkit.harness.cli import load_predictor, main
from rprvkit.harness.systems import NOISY_REFERENCE_FORMULA
from rprvkit.predictors import ARPredictor, ConstantVelocityPredictor

F = NOISY_REFERENCE_FORMULA


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    p = lambda name: str(d / name)
    assert main(["generate", "--system", "noisy-reference", "--count", "80", "--seed", "1",
                 "--prefix", "tr", "--out", p("train.csv")]) == 0
    assert main(["generate", "--system", "noisy-reference", "--count", "60", "--seed", "2",
                 "--prefix", "ca", "--out", p("calib.csv")]) == 0
    assert main(["generate", "--system", "noisy-reference", "--count", "30", "--seed", "3",
                 "--prefix", "al", "--out", p("alpha.csv")]) == 0
    assert main(["generate", "--system", "noisy-reference", "--count", "10", "--seed", "4",
                 "--sigma", "3.5", "--prefix", "te", "--out", p("test.csv")]) == 0
    assert main(["fit-predictor", "--traj", p("train.csv"), "--order", "3", "--out", p("ar.json")]) == 0
    return p


def test_generate_swarm(tmp_path, capsys):
    out = tmp_path / "swarm.csv"
    assert main(["generate", "--system", "swarm-lite", "--count", "2", "--agents", "3",
                 "--out", str(out)]) == 0
    df = pd.read_csv(out)
    assert len(df) == 2 * 121 * 3
    assert "wrote 2 trajectories" in capsys.readouterr().out


def test_fit_predictor_kinds(files, tmp_path):
    assert isinstance(load_predictor(files("ar.json")), ARPredictor)
    assert main(["fit-predictor", "--kind", "dar", "--order", "2", "--traj", files("train.csv"),
                 "--out", str(tmp_path / "dar.json")]) == 0
    dar = load_predictor(str(tmp_path / "dar.json"))
    assert dar.difference and not dar.fit_intercept
    assert main(["fit-predictor", "--kind", "cv", "--window", "4", "--out", str(tmp_path / "cv.json")]) == 0
    cv = load_predictor(str(tmp_path / "cv.json"))
    assert isinstance(cv, ConstantVelocityPredictor) and cv.window == 4


def test_predictor_file_round_trip_predicts_identically(files):
    from rprvkit.harness.io import load_trajectories
    X = load_trajectories(files("train.csv")).X
    fresh = ARPredictor(order=3).fit(X)
    assert np.array_equal(load_predictor(files("ar.json")).predict(X[0, :50], 5), fresh.predict(X[0, :50], 5))


@pytest.mark.parametrize("method", ["accurate", "interp1", "interp2"])
def test_calibrate_and_verify(files, tmp_path, method):
    art = str(tmp_path / f"{method}.json")
    extra = [] if method == "accurate" else ["--alpha-traj", files("alpha.csv")]
    assert main(["calibrate", "--formula", F, "--t", "100", "--traj", files("calib.csv"),
                 "--predictor", files("ar.json"), "--method", method, "--epsilon", "0.05",
                 "--out", art] + extra) == 0
    body = json.loads(open(art).read())
    assert body["method"] == method
    out = str(tmp_path / f"{method}.csv")
    assert main(["verify", "--artifact", art, "--traj", files("test.csv"),
                 "--predictor", files("ar.json"), "--out", out]) == 0
    df = pd.read_csv(out)
    assert len(df) == 10
    assert set(df.columns) == {"trial", "rho_star", "satisfied", "level", "method"}
    assert (df.satisfied == (df.rho_star > 0)).all()
    if method != "accurate":
        bounds = pd.read_csv(str(tmp_path / f"{method}_bounds.csv"))
        assert len(bounds) == 10 * 5


def test_calibrate_infeasible_exit_code(files, tmp_path):
    code = main(["calibrate", "--formula", F, "--t", "100", "--traj", files("calib.csv"),
                 "--predictor", files("ar.json"), "--epsilon", "0.3", "--out", str(tmp_path / "x.json")])
    assert code == 2
    art = str(tmp_path / "x.json")
    out = str(tmp_path / "v.csv")
    assert main(["verify", "--artifact", art, "--traj", files("test.csv"),
                 "--predictor", files("ar.json"), "--out", out]) == 2
    assert (pd.read_csv(out).rho_star == -np.inf).all()


def test_interpretable_calibration_needs_alpha(files, tmp_path, capsys):
    code = main(["calibrate", "--formula", F, "--t", "100", "--traj", files("calib.csv"),
                 "--predictor", files("ar.json"), "--method", "interp1", "--out", str(tmp_path / "a.json")])
    assert code == 1
    assert "alpha" in capsys.readouterr().err


def test_overlapping_alpha_set_rejected(files, tmp_path):
    code = main(["calibrate", "--formula", F, "--t", "100", "--traj", files("calib.csv"),
                 "--alpha-traj", files("calib.csv"), "--predictor", files("ar.json"),
                 "--method", "interp2", "--out", str(tmp_path / "a.json")])
    assert code == 1


def test_estimate_shift(files, tmp_path):
    out = str(tmp_path / "eps.json")
    assert main(["estimate-shift", "--formula", F, "--t", "100", "--traj", files("calib.csv"),
                 "--test", files("test.csv"), "--alpha-traj", files("alpha.csv"),
                 "--predictor", files("ar.json"), "--out", out]) == 0
    body = json.loads(open(out).read())
    assert body["epsilon"] == max(body["components"].values())
    assert 0.0 <= body["epsilon"] <= 1.0


def test_monitor(files, tmp_path):
    out = str(tmp_path / "mon.csv")
    assert main(["monitor", "--formula", F, "--traj", files("test.csv"), "--out", out]) == 0
    df = pd.read_csv(out)
    assert len(df) == 10
    assert (df.satisfied == (df.robustness > 0)).all()


def test_monitor_strel_with_weight_spec(tmp_path):
    traj = str(tmp_path / "s.csv")
    assert main(["generate", "--system", "swarm-lite", "--count", "2", "--out", traj]) == 0
    out = str(tmp_path / "m.csv")
    assert main(["monitor", "--formula", "G[0,10] somewhere[0,6] (s[2] <= 50)", "--weights",
                 "star:2:scaled=0.2:dims=0,1,2", "--traj", traj, "--out", out]) == 0
    assert len(pd.read_csv(out)) == 2


def test_experiment_command(tmp_path):
    out = tmp_path / "exp"
    code = main(["experiment", "--system", "noisy-reference", "--epsilon", "0.1", "--K", "40",
                 "--M", "10", "--R", "2", "--n-calibration", "60", "--n-test", "20", "--n-alpha", "20",
                 "--n-predictor-train", "30", "--quiet", "--out", str(out)])
    assert code == 0
    assert (out / "summary.json").exists()
    assert len(pd.read_csv(out / "rows.csv")) == 2 * 10 * 3 * 2


@pytest.mark.parametrize("argv", [
    ["monitor", "--formula", "G[0,3] (", "--traj", "nope.csv"],
    ["verify", "--artifact", "missing.json", "--traj", "x.csv", "--predictor", "p.json"],
    ["experiment", "--train-param", "sigma", "--out", "x"],
    ["frobnicate"],
])
def test_errors_exit_one(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err.startswith("error:")
