import csv
import io
import os
import subprocess
import sys

import pytest

from hybridshrink.cli import main
from hybridshrink.fileio import read_artifact

CORPUS = "id,theta_hat,sigma_hat,selected\na,1.2,0.1,true\nb,0.9,0.2,false\nc,1.05,0.05,true\n"


@pytest.fixture
def corpus(tmp_path):
    p = tmp_path / "corpus.csv"
    p.write_text(CORPUS)
    return p


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def _table(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_estimate_three_rows(capsys, corpus):
    code, out, _ = _run(capsys, "estimate", corpus, "--m0", 1, "--tau", 0.01)
    rows = _table(out)
    assert code == 0 and len(rows) == 3
    assert set(rows[0]) >= {"id", "method", "mean", "variance", "interval_low", "interval_high", "lambda_used", "converged"}


def test_estimate_bad_sigma_names_row(capsys, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("id,theta_hat,sigma_hat\na,1,0.1\nb,1,0\n")
    code, _, err = _run(capsys, "estimate", p, "--m0", 1, "--tau", 1)
    assert code == 2 and "row 3" in err


def test_face_value_passthrough(capsys, corpus):
    code, out, _ = _run(capsys, "estimate", corpus, "--method", "face-value")
    assert code == 0
    assert [float(r["mean"]) for r in _table(out)] == [1.2, 0.9, 1.05]


def test_estimate_needs_prior(capsys, corpus):
    code, _, err = _run(capsys, "estimate", corpus)
    assert code == 2 and "--calibration" in err


def test_estimate_unit_level(capsys, tmp_path):
    p = tmp_path / "units.csv"
    p.write_text("experiment_id,unit_id,z,y\ne1,1,1,2\ne1,2,1,4\ne1,3,0,1\ne1,4,0,3\n")
    code, out, _ = _run(capsys, "estimate", p, "--unit-level", "--method", "face-value")
    assert code == 0 and float(_table(out)[0]["mean"]) == 1.5


def test_calibrate_requires_ack_for_selected_only(capsys, tmp_path):
    p = tmp_path / "sel.csv"
    p.write_text("id,theta_hat,sigma_hat,selected\na,1,0.1,true\nb,2,0.1,true\n")
    code, _, err = _run(capsys, "calibrate", p)
    assert code == 2 and "--selected-only-ack" in err
    assert _run(capsys, "calibrate", p, "--selected-only-ack")[0] == 0


def test_calibrate_constant_corpus_floors_tau(capsys, tmp_path):
    p = tmp_path / "const.csv"
    p.write_text("id,theta_hat,sigma_hat,selected\na,1,0.1,false\nb,1,0.1,true\nc,1,0.1,false\n")
    out = tmp_path / "art.txt"
    with pytest.warns(UserWarning):
        assert _run(capsys, "calibrate", p, "--method", "moments", "-o", out)[0] == 0
    rep, _ = read_artifact(out)
    assert rep.hyperparams.tau == 1e-12 and rep.tau_floored


def test_calibration_round_trip_and_dominance(capsys, tmp_path):
    lines = ["id,theta_hat,sigma_hat,selected"]
    import numpy as np

    rng = np.random.default_rng(0)
    for i in range(60):
        lines.append(f"e{i},{1 + rng.normal(0, 0.3) + rng.normal(0, 0.1)!r},0.1,{str(i % 2 == 0).lower()}")
    p = tmp_path / "c.csv"
    p.write_text("\n".join(lines) + "\n")
    mom, mle = tmp_path / "mom.txt", tmp_path / "mle.txt"
    assert _run(capsys, "calibrate", p, "--method", "moments", "-o", mom)[0] == 0
    assert _run(capsys, "calibrate", p, "--method", "mle", "-o", mle)[0] == 0
    r_mom, sha = read_artifact(mom)
    r_mle, _ = read_artifact(mle)
    assert r_mle.log_marginal_likelihood >= r_mom.log_marginal_likelihood
    import hashlib

    assert sha == hashlib.sha256(p.read_bytes()).hexdigest()
    # estimates from the artifact equal estimates from the same flags
    _, a, _ = _run(capsys, "estimate", p, "--calibration", mle)
    hp = r_mle.hyperparams
    _, b, _ = _run(capsys, "estimate", p, "--m0", repr(hp.m0), "--tau", repr(hp.tau))
    assert a == b


def test_check_and_evaluate(capsys, tmp_path):
    p = tmp_path / "rep.csv"
    p.write_text("id,theta_hat,sigma_hat,selected,replication_theta_hat,replication_sigma_hat\n"
                 "a,1.2,0.1,true,1.1,0.1\nb,0.9,0.2,true,,\nc,1.3,0.1,true,1.0,0.1\n")
    code, out, _ = _run(capsys, "check", p, "--m0", 1, "--tau", 0.04, "--statistic", "abs-deviation", "--draws", 500)
    rows = _table(out)
    assert code == 0 and len(rows) == 3 and all(0 <= float(r["tail_area"]) <= 1 for r in rows)
    code, out, _ = _run(capsys, "evaluate", p, "--m0", 1, "--tau", 0.04)
    rows = _table(out)
    assert code == 0 and [r["method"] for r in rows] == ["face-value", "global", "hybrid"]
    assert all(r["n_pairs"] == "2" for r in rows)


def test_simulate_cardinality_and_determinism(capsys, tmp_path):
    args = ["simulate", "--kind", "heavy-tails", "--nu", "3,100", "--n-selected", 1500]
    assert _run(capsys, *args, "--output-dir", tmp_path / "a")[0] == 0
    assert _run(capsys, *args, "--output-dir", tmp_path / "b")[0] == 0
    rows = _table((tmp_path / "a" / "metrics.csv").read_text())
    assert len(rows) == 2 * 3 * 3
    for name in ("metrics.csv", "summary.txt", "figure1.png"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_independence_reported(capsys, tmp_path):
    code, out, _ = _run(capsys, "simulate", "--kind", "hidden-selection", "--rho", "0",
                        "--n-selected", 3000, "--no-plot", "--output-dir", tmp_path)
    assert code == 0
    assert "[PASS] independence at rho=0" in out


def test_simulate_infeasible_names_point(capsys, tmp_path):
    # threshold 40 sigma makes selection practically impossible
    code, _, err = _run(capsys, "simulate", "--kind", "heavy-tails", "--nu", "5", "--threshold", "40",
                        "--n-selected", 10, "--draw-cap", 100_000, "--no-plot", "--output-dir", tmp_path)
    assert code == 3 and "nu=5" in err


def test_output_io_error_exit_4(capsys, corpus, tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    code, _, err = _run(capsys, "estimate", corpus, "--method", "face-value", "-o", blocker / "x.csv")
    assert code == 4 and "x.csv" in err


def test_seed_env_var(tmp_path, corpus):
    cmd = [sys.executable, "-m", "hybridshrink.cli", "check", str(corpus), "--m0", "1", "--tau", "0.04",
           "--draws", "200"]
    env = dict(os.environ, HYBRIDSHRINK_SEED="17")
    a = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True).stdout
    b = subprocess.run(cmd + ["--seed", "17"], capture_output=True, text=True, check=True).stdout
    c = subprocess.run(cmd + ["--seed", "18"], capture_output=True, text=True, check=True).stdout
    assert a == b != c
