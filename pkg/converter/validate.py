#!/usr/bin/env python3
"""Standalone CSIF v1 validator.

Checks magic, version, header/payload consistency, and finiteness, and
prints summary counts. Error classes mirror the main toolkit's parse
taxonomy so logs read the same on both sides of the format boundary.
"""

from __future__ import annotations

import argparse
import json
import struct
import sys
from pathlib import Path

import numpy as np

FFT_SIZES = {20: 64, 40: 128, 80: 256}

MAGIC = b"CSIF"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")


class ValidationError(Exception):
    pass


class BadMagic(ValidationError):
    pass


class UnsupportedVersion(ValidationError):
    pass


class HeaderMismatch(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


def validate(path: Path) -> dict:
    """Validate one CSIF file; returns summary counts or raises."""
    blob = path.read_bytes()
    if len(blob) < _PREFIX.size:
        raise HeaderMismatch("file shorter than the fixed prefix")
    magic, version, hlen = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, found {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported CSIF version {version}")
    if len(blob) < _PREFIX.size + hlen:
        raise HeaderMismatch("file truncated inside the JSON header")
    try:
        header = json.loads(blob[_PREFIX.size:_PREFIX.size + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HeaderMismatch(f"unreadable JSON header: {exc}") from exc

    antenna_count = int(header["antenna_count"])
    offset = _PREFIX.size + hlen
    total_frames = 0
    for meta in header["samples"]:
        bandwidth = int(meta["bandwidth_mhz"])
        if bandwidth not in FFT_SIZES:
            raise HeaderMismatch(f"sample {meta['sample_id']}: bandwidth {bandwidth}")
        num_frames = int(meta["num_frames"])
        subcarriers = FFT_SIZES[bandwidth]
        nbytes = num_frames * 8 + num_frames * antenna_count * subcarriers * 8
        chunk = blob[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise HeaderMismatch(
                f"sample {meta['sample_id']}: payload truncated "
                f"({len(chunk)} of {nbytes} bytes)"
            )
        values = np.frombuffer(chunk, dtype="<f4", offset=num_frames * 8)
        finite = np.isfinite(values)
        if not finite.all():
            per_frame = finite.reshape(num_frames, -1).all(axis=1)
            frame = int(np.argmin(per_frame))
            raise NonFiniteValue(
                f"sample {meta['sample_id']}: non-finite value in frame {frame}"
            )
        offset += nbytes
        total_frames += num_frames
    if offset != len(blob):
        raise HeaderMismatch(f"{len(blob) - offset} trailing bytes after the payload")
    return {
        "samples": len(header["samples"]),
        "antennas": antenna_count,
        "frames": total_frames,
        "bytes": len(blob),
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("files", nargs="+", type=Path)
    args = parser.parse_args(argv)
    failures = 0
    for path in args.files:
        try:
            summary = validate(path)
        except (OSError, ValidationError, KeyError, ValueError) as exc:
            print(f"{path}: FAIL {type(exc).__name__}: {exc}")
            failures += 1
            continue
        print(f"{path}: OK {summary['samples']} samples x {summary['antennas']} "
              f"antennas, {summary['frames']} frames, {summary['bytes']} bytes")
    return 2 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
