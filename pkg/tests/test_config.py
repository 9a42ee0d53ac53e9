"""Strict config loading: defaulting, unknown keys, invariant messages."""

import json

import pytest

from ibis.config import default_config, load_config, resolve_config
from ibis.errors import InvariantViolation, ParseError, UnknownKey


def test_minimal_config_is_fully_defaulted(tmp_path):
    path = tmp_path / "run.json"
    path.write_text('{ "seed": 1 }')
    cfg = load_config(path)
    assert cfg.seed == 1
    doc = cfg.document
    assert doc["repetitions"] == 10
    assert doc["bandwidths"] == [20, 40, 80]
    assert doc["synth"]["antenna_count"] == 4
    assert doc["train"]["optimizer"]["kind"] == "adam"
    assert doc["svm"]["folds"] == 5
    assert doc["split"]["train_fraction"] == 0.7


def test_unknown_top_level_key():
    with pytest.raises(UnknownKey, match="dopler"):
        resolve_config({"dopler": {}})


def test_unknown_nested_key():
    with pytest.raises(UnknownKey, match="synth"):
        resolve_config({"synth": {"anten_count": 2}})


def test_negative_gamma_cites_path():
    with pytest.raises(InvariantViolation, match="svm.gamma"):
        resolve_config({"svm": {"gamma_values": [0.1, -1.0]}})


def test_bad_bandwidth_rejected():
    with pytest.raises(InvariantViolation, match="bandwidths"):
        resolve_config({"bandwidths": [30]})


def test_bad_split_rejected():
    with pytest.raises(InvariantViolation):
        resolve_config({"split": {"train_fraction": 0.7, "test_fraction": 0.4}})


def test_parse_error_carries_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{ "seed": 1,\n  "bad" }')
    with pytest.raises(ParseError, match="line 2"):
        load_config(path)


def test_missing_file_is_parse_error(tmp_path):
    with pytest.raises(ParseError):
        load_config(tmp_path / "nope.json")


def test_defaults_round_trip_through_json():
    cfg = default_config()
    again = resolve_config(json.loads(json.dumps(cfg.document)))
    assert again.document == cfg.document


def test_typed_views_match_document():
    cfg = resolve_config({"seed": 3, "synth": {"samples_per_class": 7},
                          "train": {"epochs": 4}})
    assert cfg.synth_config().samples_per_class == 7
    assert cfg.synth_config().seed == 3
    ecfg = cfg.experiment_config()
    assert ecfg.train.epochs == 4
    assert ecfg.seed == 3
    assert ecfg.bandwidths == (20, 40, 80)


def test_snr_null_means_noiseless():
    cfg = resolve_config({"synth": {"snr_db": None}})
    assert cfg.synth_config().snr_db is None
