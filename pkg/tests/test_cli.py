"""CLI surface: subcommand flows, exit codes, artifact emission."""

import json
import os

import numpy as np
import pytest

from ibis.cli import dispatch
from ibis.csif import parse_csif_file


def run(args):
    return dispatch(list(args))


@pytest.fixture(scope="module")
def small_csif(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "small.csif"
    code = run(["synth", "--out", str(path), "--seed", "3",
                "--samples-per-class", "2", "--antennas", "2",
                "--bandwidth", "20", "--packet-rate", "400"])
    assert code == 0
    return path


def test_synth_output_parses(small_csif):
    ds = parse_csif_file(small_csif)
    assert len(ds.samples) == 10
    assert ds.antenna_count == 2


def test_synth_determinism(tmp_path, small_csif):
    other = tmp_path / "again.csif"
    assert run(["synth", "--out", str(other), "--seed", "3",
                "--samples-per-class", "2", "--antennas", "2",
                "--bandwidth", "20", "--packet-rate", "400"]) == 0
    assert other.read_bytes() == small_csif.read_bytes()


def test_inspect_csif(small_csif, capsys):
    assert run(["inspect", str(small_csif)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["format"] == "csif"
    assert doc["header"]["antenna_count"] == 2
    assert len(doc["header"]["samples"]) == 10


def test_unknown_subcommand_exits_one(capsys):
    with pytest.raises(SystemExit) as exc:
        dispatch(["frobnicate"])
    assert exc.value.code == 1


def test_no_subcommand_exits_one():
    assert dispatch([]) == 1


def test_missing_required_flag_exits_one():
    with pytest.raises(SystemExit) as exc:
        dispatch(["synth"])  # --out is required
    assert exc.value.code == 1


def test_data_error_exits_two(tmp_path):
    bogus = tmp_path / "bogus.csif"
    bogus.write_bytes(b"NOPE" + b"\x00" * 32)
    assert run(["inspect", str(bogus)]) == 2


def test_missing_file_exits_two(tmp_path):
    assert run(["inspect", str(tmp_path / "missing.csif")]) == 2


def test_config_unknown_key_exits_two(tmp_path, small_csif):
    cfg = tmp_path / "run.json"
    cfg.write_text('{"dopler": {}}')
    assert run(["sanitize", "--in", str(small_csif), "--out",
                str(tmp_path / "x.npz")]) == 0
    assert run(["doppler", "--config", str(cfg), "--in", str(small_csif),
                "--out", str(tmp_path / "y.dopp")]) == 2


def test_sanitize_writes_phase_matrices(small_csif, tmp_path):
    out = tmp_path / "phases.npz"
    assert run(["sanitize", "--in", str(small_csif), "--out", str(out)]) == 0
    z = np.load(out)
    assert "phase_s0_a0" in z
    assert z["phase_s0_a0"].shape[1] == 56


def test_doppler_roundtrip_and_sidecars(small_csif, tmp_path, capsys):
    dopp = tmp_path / "t.dopp"
    pgm = tmp_path / "t.pgm"
    csv = tmp_path / "t.csv"
    assert run(["doppler", "--in", str(small_csif), "--out", str(dopp),
                "--pgm", str(pgm), "--csv", str(csv),
                "--sample", "2", "--antenna", "1"]) == 0
    capsys.readouterr()
    assert run(["inspect", str(dopp)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["format"] == "dopp"
    assert doc["header"]["velocity_bins"] == 81
    assert doc["header"]["duration_s"] == 4.5
    assert pgm.read_bytes().startswith(b"P5\n")
    assert len(csv.read_text().strip().splitlines()) >= 2


def test_train_eval_gridsearch_flow(small_csif, tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "seed": 4,
        "model": {"filters": 2, "pool_filters": 2, "hidden": 6},
        "train": {"epochs": 2, "batch_size": 8, "learning_rate": 3e-3},
        "svm": {"kernels": ["rbf"], "c_values": [1.0], "gamma_values": [1.0],
                "folds": 2},
    }))
    model_path = tmp_path / "model.ibn1"
    assert run(["train", "--config", str(cfg), "--data", str(small_csif),
                "--out", str(model_path)]) == 0
    capsys.readouterr()
    assert run(["inspect", str(model_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["format"] == "checkpoint"
    assert doc["header"]["svm"]["pairs"] == 10

    report = tmp_path / "eval.json"
    assert run(["eval", "--config", str(cfg), "--data", str(small_csif),
                "--model", str(model_path), "--out", str(report)]) == 0
    scored = json.loads(report.read_text())
    assert 0.0 <= scored["metrics"]["accuracy"] <= 100.0
    assert len(scored["confusion"]) == 5

    surface = tmp_path / "grid.json"
    assert run(["gridsearch", "--config", str(cfg), "--data", str(small_csif),
                "--model", str(model_path), "--out", str(surface)]) == 0
    grid = json.loads(surface.read_text())
    assert grid["cv_folds"] == 2
    assert len(grid["surface"]) == 1


@pytest.fixture(scope="module")
def experiment_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("results")
    cfg = tmp_path_factory.mktemp("cfg") / "run.json"
    cfg.write_text(json.dumps({
        "seed": 6,
        "repetitions": 1,
        "bandwidths": [20],
        "synth": {"samples_per_class": 4, "antenna_count": 2,
                  "bandwidth_mhz": 20},
        "doppler": {"stft": {"window_len": 128, "hop": 64, "fft_len": 128,
                             "window_kind": "hann"}},
        "model": {"filters": 2, "pool_filters": 2, "hidden": 6},
        "train": {"epochs": 2, "batch_size": 16, "learning_rate": 3e-3},
        "svm": {"kernels": ["rbf"], "c_values": [1.0], "gamma_values": [1.0],
                "folds": 2},
    }))
    code = dispatch(["experiment", "--config", str(cfg), "--out", str(out),
                     "--ablations", "--sweep-antennas"])
    assert code == 0
    runs = list(out.iterdir())
    assert len(runs) == 1
    return runs[0]


def test_experiment_artifacts(experiment_dir):
    names = {p.name for p in experiment_dir.iterdir()}
    assert "report.json" in names
    assert "resolved_config.json" in names
    assert "metrics.csv" in names
    assert "antenna_sweep.csv" in names
    assert "reference_comparison.csv" in names
    report = json.loads((experiment_dir / "report.json").read_text())
    assert set(report["runs"]) == {"full", "no_doppler", "no_svm"}
    assert report["reference_comparison"]["20"]["ibis"]["accuracy"]["reference"] == 89.27
    figures = {p.name for p in (experiment_dir / "figures").iterdir()}
    assert "accuracy_by_bandwidth.png" in figures
    assert "ablations.png" in figures
    assert "antenna_sweep.png" in figures
    assert "spectrograms.png" in figures
    pgms = list((experiment_dir / "spectrograms").glob("*.pgm"))
    assert len(pgms) == 5


def test_experiment_confusion_csvs(experiment_dir):
    path = experiment_dir / "confusion_full_20mhz_ibis.csv"
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 6
    assert lines[0].startswith("true\\pred,")


def test_resolved_config_reflects_seed_override(experiment_dir):
    doc = json.loads((experiment_dir / "resolved_config.json").read_text())
    assert doc["seed"] == 6
    # Every defaulted section is echoed in full.
    assert "sanitizer" in doc and doc["sanitizer"]["lambda"] == 0.01


def test_seed_flag_overrides_config(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text('{"seed": 1, "synth": {"samples_per_class": 1, "antenna_count": 1, "bandwidth_mhz": 20}}')
    a = tmp_path / "a.csif"
    b = tmp_path / "b.csif"
    assert run(["synth", "--config", str(cfg), "--out", str(a)]) == 0
    assert run(["synth", "--config", str(cfg), "--seed", "2", "--out", str(b)]) == 0
    assert a.read_bytes() != b.read_bytes()
    c = tmp_path / "c.csif"
    assert run(["synth", "--seed", "2", "--config", str(cfg), "--out", str(c)]) == 0
    assert b.read_bytes() == c.read_bytes()
