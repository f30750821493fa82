import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from gpboundary.geometry import read_image
from gpboundary.harness.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def b1_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("img") / "b1.csv"
    assert main(["simulate", "--case", "b1", "--m", "60", "--p-in", "0.5", "--p-out", "0.2", "--seed", "3", "--out", str(path)]) == 0
    return path


def test_simulate(capsys, tmp_path):
    path = tmp_path / "g2.csv"
    code, out, _ = run(capsys, "simulate", "--case", "g2", "--m", "30", "--seed", "1", "--out", path)
    assert code == 0
    record = json.loads(out)
    assert record["status"] == "ok" and record["pixels"] == 900
    image = read_image(path)
    assert image.n == 900
    assert image.meta["case"] == "G2" and image.meta["family"] == "gaussian"


def test_simulate_binary_noise_parameters(tmp_path):
    path = tmp_path / "b.csv"
    assert main(["simulate", "--case", "B1", "--m", "20", "--p-in", "1", "--p-out", "0", "--out", str(path)]) == 0
    assert read_image(path).meta["noise"] == {"p_in": 1.0, "p_out": 0.0}


def test_detect(capsys, b1_csv, tmp_path):
    out_dir = tmp_path / "fit"
    code, out, _ = run(
        capsys, "detect", "--input", b1_csv, "--noise", "bernoulli", "--iters", 200, "--burnin", 100,
        "--j", 6, "--seed", 1, "--out-dir", out_dir,
    )
    assert code == 0
    assert json.loads(out)["draws"] == 200
    with open(out_dir / "draws.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 201 and len(rows[0]) == 512
    with open(out_dir / "band.csv", newline="") as fh:
        band = list(csv.DictReader(fh))
    assert len(band) == 512
    assert all(float(r["lower"]) <= float(r["center"]) <= float(r["upper"]) for r in band)
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["input"] == str(b1_csv)
    with open(out_dir / "scalars.csv", newline="") as fh:
        assert {"p_in", "p_out", "a", "tau"} <= set(next(csv.reader(fh)))


def test_detect_is_seeded(capsys, b1_csv, tmp_path):
    args = ["detect", "--input", b1_csv, "--noise", "bernoulli", "--iters", 50, "--burnin", 20, "--j", 4, "--seed", 9]
    run(capsys, *args, "--out-dir", tmp_path / "a")
    run(capsys, *args, "--out-dir", tmp_path / "b")
    for name in ("draws.csv", "scalars.csv", "band.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_detect_cp5_prior_mean(capsys, tmp_path):
    img = tmp_path / "g1.csv"
    main(["simulate", "--case", "g1", "--m", "60", "--seed", "2", "--out", str(img)])
    capsys.readouterr()
    code, _, _ = run(
        capsys, "detect", "--input", img, "--noise", "gaussian", "--iters", 30, "--burnin", 10, "--j", 4,
        "--prior-mean", "cp5", "--out-dir", tmp_path / "fit",
    )
    assert code == 0


@pytest.mark.parametrize("method", ["mce", "cp"])
def test_baseline(capsys, b1_csv, tmp_path, method):
    out = tmp_path / f"{method}.csv"
    code, _, _ = run(capsys, "baseline", "--method", method, "--n-basis", 5, "--input", b1_csv, "--out", out, "--n-angles", 200)
    assert code == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 200
    radius = np.array([float(r["radius"]) for r in rows])
    assert np.all((radius > 0) & (radius <= np.sqrt(2) / 2))


def test_study_and_report(capsys, tmp_path):
    config = {
        "case": "B1", "m": 30, "replications": 2, "master_seed": 4,
        "sampler": {"iterations": 150, "burn_in": 50, "J": 4}, "baselines": ["mce5"], "n_angles": 100,
        "band_halfwidth": 0.2,
    }
    path = tmp_path / "study.json"
    path.write_text(json.dumps(config))
    code, out, _ = run(capsys, "study", "--config", path, "--out-dir", tmp_path / "s1")
    assert code == 0
    record = json.loads(out)
    assert record["failures"] == 0 and set(record["mean_errors"]) == {"bayes", "mce5"}
    run(capsys, "study", "--config", path, "--out-dir", tmp_path / "s2")
    for name in ("replications.csv", "summary.csv"):
        assert (tmp_path / "s1" / name).read_bytes() == (tmp_path / "s2" / name).read_bytes()

    code, out, _ = run(capsys, "report", "--dir", tmp_path)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].split()[:2] == ["case", "method"]
    assert sum(line.startswith("B1") for line in lines) == 4


def test_runtime_error_record(capsys, tmp_path):
    code, out, err = run(capsys, "detect", "--input", tmp_path / "missing.csv", "--noise", "bernoulli", "--out-dir", tmp_path)
    assert code == 1 and out == ""
    record = json.loads(err)
    assert record["status"] == "error" and record["command"] == "detect"
    assert record["error"] in {"FileNotFoundError", "OSError"}


def test_insufficient_band_record(capsys, tmp_path):
    img = tmp_path / "small.csv"
    main(["simulate", "--case", "b1", "--m", "40", "--seed", "0", "--out", str(img)])
    capsys.readouterr()
    code, _, err = run(capsys, "baseline", "--method", "mce", "--input", img, "--out", tmp_path / "o.csv")
    assert code == 1
    assert json.loads(err)["error"] == "InsufficientBandDataError"


def test_report_without_summaries(capsys, tmp_path):
    code, _, err = run(capsys, "report", "--dir", tmp_path)
    assert code == 1
    assert json.loads(err)["error"] == "CliError"


def test_bad_prior_mean(capsys, b1_csv, tmp_path):
    code, _, err = run(capsys, "detect", "--input", b1_csv, "--noise", "bernoulli", "--prior-mean", "wide", "--out-dir", tmp_path)
    assert code == 1
    assert "prior-mean" in json.loads(err)["message"]


def test_usage_error_record(capsys):
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--case", "q7", "--out", "x.csv"])
    assert info.value.code == 2
    record = json.loads(capsys.readouterr().err)
    assert record["status"] == "error" and record["error"] == "ArgumentError"


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "gpboundary", "baseline", "--method", "mce", "--input", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o.csv")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1
    assert json.loads(proc.stderr)["command"] == "baseline"
