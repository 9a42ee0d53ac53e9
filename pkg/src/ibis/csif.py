"""CSIF v1: the little-endian binary container for CSI datasets.

Layout:

    magic   "CSIF" (4 bytes)
    version u16 = 1
    hlen    u32, byte length of the JSON header
    header  UTF-8 JSON: {"schema", "antenna_count", "samples": [
                {"sample_id", "label_code", "center_freq_hz",
                 "packet_rate_hz", "bandwidth_mhz", "num_frames"}, ...]}
    payload per sample, in header order:
        timestamps  float64[num_frames]
        values      float32 re,im pairs, frame-major:
                    [num_frames][antenna_count][total_count]

Complex values are stored at float32 precision; parsing rejects malformed
or non-finite data instead of repairing it.
"""

from __future__ import annotations

import io
import json
import struct
from typing import Iterable, Iterator

import numpy as np

from .csi import ActivityLabel, CsiDataset, CsiRecording, CsiSample, default_layout
from .errors import BadMagic, HeaderMismatch, NonFiniteValue, UnsupportedVersion

MAGIC = b"CSIF"
VERSION = 1
SCHEMA = "csif/1"

_PREFIX = struct.Struct("<4sHI")


def _sample_meta(sample: CsiSample) -> dict:
    rec = sample.recordings[0]
    label = sample.label
    return {
        "sample_id": int(sample.sample_id),
        "label_code": None if label is None else int(label),
        "center_freq_hz": float(rec.center_freq_hz),
        "packet_rate_hz": float(rec.packet_rate_hz),
        "bandwidth_mhz": int(rec.layout.bandwidth_mhz),
        "num_frames": int(rec.num_frames),
    }


def _sample_payload(sample: CsiSample) -> bytes:
    block = np.stack([rec.values for rec in sample.recordings], axis=1)
    ts = np.ascontiguousarray(sample.recordings[0].timestamps_s, dtype="<f8")
    return ts.tobytes() + np.ascontiguousarray(block, dtype="<c8").tobytes()


def write_csif(dataset: CsiDataset) -> bytes:
    """Serialize a dataset. Raises InvariantViolation if it is malformed."""
    dataset.validate()
    header = {
        "schema": SCHEMA,
        "antenna_count": dataset.antenna_count,
        "samples": [_sample_meta(s) for s in dataset.samples],
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    out = io.BytesIO()
    out.write(_PREFIX.pack(MAGIC, VERSION, len(hbytes)))
    out.write(hbytes)
    for sample in dataset.samples:
        out.write(_sample_payload(sample))
    return out.getvalue()


def write_csif_file(path, dataset: CsiDataset) -> None:
    with open(path, "wb") as fh:
        fh.write(write_csif(dataset))


def stream_write_csif(path, antenna_count: int, samples: Iterable[CsiSample],
                      metas: list[dict]) -> None:
    """Write a CSIF file sample by sample without holding them all in memory.

    metas must list, in order, the header entry of every sample about to be
    yielded (the header precedes the payload in the file).
    """
    header = {"schema": SCHEMA, "antenna_count": antenna_count, "samples": metas}
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(hbytes)))
        fh.write(hbytes)
        for sample in samples:
            sample.validate()
            fh.write(_sample_payload(sample))


def _read_header(blob: bytes) -> tuple[dict, int]:
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
    for key in ("schema", "antenna_count", "samples"):
        if key not in header:
            raise HeaderMismatch(f"header missing required key {key!r}")
    return header, _PREFIX.size + hlen


def inspect_csif(blob: bytes) -> dict:
    """Return the parsed header without touching the payload."""
    header, _ = _read_header(blob)
    return header


def _decode_sample(meta: dict, antenna_count: int, payload: bytes) -> CsiSample:
    try:
        sample_id = int(meta["sample_id"])
        num_frames = int(meta["num_frames"])
        bandwidth = int(meta["bandwidth_mhz"])
        code = meta["label_code"]
    except (KeyError, TypeError, ValueError) as exc:
        raise HeaderMismatch(f"malformed sample entry: {exc}") from exc
    label = None if code is None else ActivityLabel(int(code))
    layout = default_layout(bandwidth)

    ts_bytes = num_frames * 8
    val_bytes = num_frames * antenna_count * layout.total_count * 8
    if len(payload) != ts_bytes + val_bytes:
        raise HeaderMismatch(
            f"sample {sample_id}: payload is {len(payload)} bytes, "
            f"header declares {ts_bytes + val_bytes}"
        )
    timestamps = np.frombuffer(payload, dtype="<f8", count=num_frames).copy()
    values = np.frombuffer(payload, dtype="<c8", offset=ts_bytes).reshape(
        num_frames, antenna_count, layout.total_count
    )
    finite = np.isfinite(values.view("<f4"))
    if not finite.all():
        frame = int(np.argwhere(~finite.reshape(num_frames, -1).all(axis=1))[0, 0])
        raise NonFiniteValue(f"sample {sample_id}: non-finite value in frame {frame}")

    recordings = [
        CsiRecording(
            antenna_id=a,
            center_freq_hz=float(meta["center_freq_hz"]),
            packet_rate_hz=float(meta["packet_rate_hz"]),
            layout=layout,
            timestamps_s=timestamps,
            values=values[:, a, :].copy(),
            label=label,
        )
        for a in range(antenna_count)
    ]
    return CsiSample(sample_id=sample_id, recordings=recordings)


def _sample_nbytes(meta: dict, antenna_count: int) -> int:
    num_frames = int(meta["num_frames"])
    total = default_layout(int(meta["bandwidth_mhz"])).total_count
    return num_frames * 8 + num_frames * antenna_count * total * 8


def parse_csif(blob: bytes) -> CsiDataset:
    """Parse a CSIF byte string into a validated dataset."""
    header, offset = _read_header(blob)
    antenna_count = int(header["antenna_count"])
    samples = []
    for meta in header["samples"]:
        nbytes = _sample_nbytes(meta, antenna_count)
        chunk = blob[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise HeaderMismatch("file truncated inside the payload")
        samples.append(_decode_sample(meta, antenna_count, chunk))
        offset += nbytes
    if offset != len(blob):
        raise HeaderMismatch(f"{len(blob) - offset} trailing bytes after the payload")
    dataset = CsiDataset(samples=samples, antenna_count=antenna_count)
    dataset.validate()
    return dataset


def parse_csif_file(path) -> CsiDataset:
    with open(path, "rb") as fh:
        return parse_csif(fh.read())


def iter_csif_samples(path) -> Iterator[CsiSample]:
    """Stream samples from a CSIF file one by one (large-file friendly)."""
    with open(path, "rb") as fh:
        head = fh.read(_PREFIX.size)
        if len(head) < _PREFIX.size:
            raise HeaderMismatch("file shorter than the fixed prefix")
        magic, version, hlen = _PREFIX.unpack(head)
        if magic != MAGIC:
            raise BadMagic(f"expected magic {MAGIC!r}, found {magic!r}")
        if version != VERSION:
            raise UnsupportedVersion(f"unsupported CSIF version {version}")
        hbytes = fh.read(hlen)
        if len(hbytes) != hlen:
            raise HeaderMismatch("file truncated inside the JSON header")
        try:
            header = json.loads(hbytes.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise HeaderMismatch(f"unreadable JSON header: {exc}") from exc
        antenna_count = int(header["antenna_count"])
        for meta in header["samples"]:
            nbytes = _sample_nbytes(meta, antenna_count)
            chunk = fh.read(nbytes)
            if len(chunk) != nbytes:
                raise HeaderMismatch("file truncated inside the payload")
            sample = _decode_sample(meta, antenna_count, chunk)
            sample.validate()
            yield sample
        if fh.read(1):
            raise HeaderMismatch("trailing bytes after the payload")
