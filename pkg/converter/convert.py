#!/usr/bin/env python3
"""Convert per-antenna CSI matrix exports into CSIF v1 files.

A hand-authored manifest pins down the on-disk layout (the public release
varies by mirror), mapping every source file to exactly one
(sample_id, antenna_id). Each sample becomes one CSIF file. Captures that
are too short are dropped and logged; any drop fails the run unless
--allow-partial is given.

Usage:
    convert.py --src DIR --manifest manifest.json --out DIR [--allow-partial]

The CSIF writer here is intentionally independent of the main toolkit: the
file format is the contract between the two, and the toolkit's `ibis
inspect` validates the results.
"""

from __future__ import annotations

import argparse
import json
import struct
import sys
from pathlib import Path

import numpy as np

LABEL_CODES = {"empty": 0, "sitting": 1, "walking": 2, "running": 3, "jumping": 4}
FFT_SIZES = {20: 64, 40: 128, 80: 256}

MAGIC = b"CSIF"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")


class ConverterError(Exception):
    pass


class MissingFile(ConverterError):
    pass


class ShapeMismatch(ConverterError):
    pass


class UnknownLabel(ConverterError):
    pass


def load_manifest(path: Path) -> dict:
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise MissingFile(f"cannot read manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConverterError(f"manifest is not valid JSON: {exc}") from exc
    for key in ("scenario", "center_freq_hz", "packet_rate_hz", "bandwidth_mhz",
                "antenna_count", "samples"):
        if key not in manifest:
            raise ConverterError(f"manifest missing key {key!r}")
    if int(manifest["bandwidth_mhz"]) not in FFT_SIZES:
        raise ConverterError(f"unsupported bandwidth {manifest['bandwidth_mhz']} MHz")
    seen: dict[tuple[int, int], str] = {}
    for entry in manifest["samples"]:
        label = str(entry["label"]).lower()
        if label not in LABEL_CODES:
            raise UnknownLabel(f"sample {entry['sample_id']}: unknown label {entry['label']!r}")
        for antenna, name in entry["files"].items():
            key = (int(entry["sample_id"]), int(antenna))
            if key in seen:
                raise ConverterError(
                    f"duplicate mapping for sample {key[0]} antenna {key[1]}: "
                    f"{seen[key]} and {name}"
                )
            seen[key] = name
    return manifest


def _load_matrix(path: Path, subcarriers: int) -> np.ndarray:
    if not path.exists():
        raise MissingFile(f"source file not found: {path}")
    arr = np.load(path)
    if arr.ndim != 2 or arr.shape[1] != subcarriers:
        raise ShapeMismatch(
            f"{path.name}: expected [frames x {subcarriers}] matrix, got {arr.shape}"
        )
    values = arr.astype(np.complex64)
    if not np.all(np.isfinite(values.view(np.float32))):
        raise ShapeMismatch(f"{path.name}: contains non-finite values")
    return values


def _write_csif(path: Path, meta: dict, antenna_count: int,
                timestamps: np.ndarray, blocks: list[np.ndarray]) -> None:
    header = {
        "schema": "csif/1",
        "antenna_count": antenna_count,
        "samples": [meta],
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    stacked = np.stack(blocks, axis=1)  # [frames x antennas x subcarriers]
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(hbytes)))
        fh.write(hbytes)
        fh.write(np.ascontiguousarray(timestamps, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(stacked, dtype="<c8").tobytes())


def convert(src: Path, manifest: dict, out: Path,
            min_duration_s: float = 0.0) -> dict:
    """Convert every manifest sample; returns a conversion log dict."""
    out.mkdir(parents=True, exist_ok=True)
    subcarriers = FFT_SIZES[int(manifest["bandwidth_mhz"])]
    antenna_count = int(manifest["antenna_count"])
    rate = float(manifest["packet_rate_hz"])
    written, dropped = [], []

    for entry in manifest["samples"]:
        sample_id = int(entry["sample_id"])
        label = str(entry["label"]).lower()
        blocks = {}
        for antenna, name in entry["files"].items():
            blocks[int(antenna)] = _load_matrix(src / name, subcarriers)
        if sorted(blocks) != list(range(antenna_count)):
            raise ShapeMismatch(
                f"sample {sample_id}: antennas {sorted(blocks)} do not cover "
                f"0..{antenna_count - 1}"
            )
        frames = {a: b.shape[0] for a, b in blocks.items()}
        if len(set(frames.values())) != 1:
            dropped.append({"sample_id": sample_id,
                            "reason": f"frame counts differ across antennas: {frames}"})
            continue
        num_frames = next(iter(frames.values()))
        if num_frames < 1 or num_frames / rate < min_duration_s:
            dropped.append({"sample_id": sample_id,
                            "reason": f"capture too short: {num_frames} frames"})
            continue

        if "timestamps" in entry:
            ts = np.load(src / entry["timestamps"]).astype(np.float64)
            if ts.shape != (num_frames,):
                raise ShapeMismatch(
                    f"{entry['timestamps']}: {ts.shape} timestamps for {num_frames} frames"
                )
            if num_frames > 1 and not np.all(np.diff(ts) > 0):
                raise ShapeMismatch(f"{entry['timestamps']}: not strictly increasing")
        else:
            ts = np.arange(num_frames, dtype=np.float64) / rate

        meta = {
            "sample_id": sample_id,
            "label_code": LABEL_CODES[label],
            "center_freq_hz": float(manifest["center_freq_hz"]),
            "packet_rate_hz": rate,
            "bandwidth_mhz": int(manifest["bandwidth_mhz"]),
            "num_frames": int(num_frames),
        }
        target = out / f"sample_{sample_id:04d}.csif"
        _write_csif(target, meta, antenna_count, ts,
                    [blocks[a] for a in range(antenna_count)])
        written.append({"sample_id": sample_id, "file": target.name,
                        "frames": int(num_frames), "label": label})

    log = {
        "scenario": manifest["scenario"],
        "written": written,
        "dropped": dropped,
    }
    (out / "conversion_log.json").write_text(json.dumps(log, indent=2, sort_keys=True))
    return log


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--src", required=True, type=Path)
    parser.add_argument("--manifest", required=True, type=Path)
    parser.add_argument("--out", required=True, type=Path)
    parser.add_argument("--min-duration", type=float, default=0.0,
                        help="drop captures shorter than this many seconds")
    parser.add_argument("--allow-partial", action="store_true",
                        help="exit 0 even when captures were dropped")
    args = parser.parse_args(argv)
    try:
        manifest = load_manifest(args.manifest)
        log = convert(args.src, manifest, args.out, args.min_duration)
    except ConverterError as exc:
        print(f"convert: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(log['written'])} samples, dropped {len(log['dropped'])} "
          f"(log: {args.out / 'conversion_log.json'})")
    if log["dropped"] and not args.allow_partial:
        for item in log["dropped"]:
            print(f"dropped sample {item['sample_id']}: {item['reason']}",
                  file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
