"""Converter contract tests: fixture conversion, determinism, validation,
and interoperability with the main toolkit's `ibis inspect`."""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

import convert as C
import validate as V

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


@pytest.fixture()
def manifest():
    return C.load_manifest(FIXTURES / "manifest.json")


def run_convert(out, extra=()):
    return subprocess.run(
        [sys.executable, str(FIXTURES.parent / "convert.py"),
         "--src", str(FIXTURES / "data"),
         "--manifest", str(FIXTURES / "manifest.json"),
         "--out", str(out), *extra],
        capture_output=True, text=True,
    )


def test_fixture_conversion_writes_one_csif_per_sample(tmp_path, manifest):
    log = C.convert(FIXTURES / "data", manifest, tmp_path)
    assert len(log["written"]) == 3
    assert log["dropped"] == []
    files = sorted(p.name for p in tmp_path.glob("*.csif"))
    assert files == ["sample_0000.csif", "sample_0001.csif", "sample_0002.csif"]


def test_outputs_pass_standalone_validation(tmp_path, manifest):
    C.convert(FIXTURES / "data", manifest, tmp_path)
    for path in sorted(tmp_path.glob("*.csif")):
        summary = V.validate(path)
        assert summary["samples"] == 1
        assert summary["antennas"] == 2


def test_outputs_pass_primary_inspect(tmp_path, manifest):
    C.convert(FIXTURES / "data", manifest, tmp_path)
    for path in sorted(tmp_path.glob("*.csif")):
        proc = subprocess.run(["ibis", "inspect", str(path)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        header = json.loads(proc.stdout)
        assert header["format"] == "csif"
        assert header["header"]["antenna_count"] == 2


def test_rerun_is_byte_identical(tmp_path, manifest):
    a, b = tmp_path / "a", tmp_path / "b"
    C.convert(FIXTURES / "data", manifest, a)
    C.convert(FIXTURES / "data", manifest, b)
    for name in ("sample_0000.csif", "sample_0001.csif", "sample_0002.csif",
                 "conversion_log.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_wrong_subcarrier_count_names_the_file(tmp_path, manifest):
    src = tmp_path / "src"
    shutil.copytree(FIXTURES / "data", src)
    bad = np.load(src / "s0_a0.npy")[:, :60]
    np.save(src / "s0_a0.npy", bad)
    with pytest.raises(C.ShapeMismatch, match="s0_a0.npy"):
        C.convert(src, manifest, tmp_path / "out")


def test_missing_file(tmp_path, manifest):
    src = tmp_path / "src"
    shutil.copytree(FIXTURES / "data", src)
    (src / "s2_a1.npy").unlink()
    with pytest.raises(C.MissingFile):
        C.convert(src, manifest, tmp_path / "out")


def test_unknown_label_rejected(tmp_path):
    doc = json.loads((FIXTURES / "manifest.json").read_text())
    doc["samples"][0]["label"] = "dancing"
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(C.UnknownLabel):
        C.load_manifest(path)


def test_duplicate_mapping_rejected(tmp_path):
    doc = json.loads((FIXTURES / "manifest.json").read_text())
    doc["samples"][1]["sample_id"] = 0
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(C.ConverterError, match="duplicate"):
        C.load_manifest(path)


def test_short_captures_dropped_and_logged(tmp_path, manifest):
    log = C.convert(FIXTURES / "data", manifest, tmp_path, min_duration_s=10.0)
    assert len(log["dropped"]) == 3
    assert not list(tmp_path.glob("*.csif"))
    on_disk = json.loads((tmp_path / "conversion_log.json").read_text())
    assert len(on_disk["dropped"]) == 3


def test_cli_exit_codes(tmp_path):
    ok = run_convert(tmp_path / "full")
    assert ok.returncode == 0, ok.stderr
    partial = run_convert(tmp_path / "partial", extra=("--min-duration", "10"))
    assert partial.returncode == 1
    allowed = run_convert(tmp_path / "allowed",
                          extra=("--min-duration", "10", "--allow-partial"))
    assert allowed.returncode == 0


def test_validator_flags_corruption(tmp_path, manifest):
    C.convert(FIXTURES / "data", manifest, tmp_path)
    path = tmp_path / "sample_0000.csif"
    blob = bytearray(path.read_bytes())

    truncated = tmp_path / "truncated.csif"
    truncated.write_bytes(blob[:-16])
    with pytest.raises(V.HeaderMismatch):
        V.validate(truncated)

    nan_payload = bytearray(blob)
    nan_payload[-8:-4] = np.float32("nan").tobytes()
    poisoned = tmp_path / "nan.csif"
    poisoned.write_bytes(nan_payload)
    with pytest.raises(V.NonFiniteValue, match="frame"):
        V.validate(poisoned)

    blob[:4] = b"XSIF"
    bad_magic = tmp_path / "bad_magic.csif"
    bad_magic.write_bytes(blob)
    with pytest.raises(V.BadMagic):
        V.validate(bad_magic)


def test_timestamps_from_manifest_survive(tmp_path, manifest):
    C.convert(FIXTURES / "data", manifest, tmp_path)
    blob = (tmp_path / "sample_0001.csif").read_bytes()
    _, _, hlen = C._PREFIX.unpack_from(blob)
    offset = C._PREFIX.size + hlen
    ts = np.frombuffer(blob, dtype="<f8", count=120, offset=offset)
    expected = np.load(FIXTURES / "data" / "s1_ts.npy")
    assert np.array_equal(ts, expected)
