"""Core CSI domain types, subcarrier layouts, and sub-band extraction.

A recording holds the per-packet complex channel estimates of one antenna as
a [frames x subcarriers] array (complex64, matching the on-disk precision).
Subcarrier layouts follow the 802.11ac numerology: 312.5 kHz spacing, FFT
sizes 64/128/256 for 20/40/80 MHz, with guard, pilot, and data index sets
laid out in DC-centered FFT order (index i maps to tone k = i - total/2).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from .errors import InvariantViolation, UnsupportedBandwidth, UpsampleRequested

SUBCARRIER_SPACING_HZ = 312_500.0

#: Supported channel widths and their FFT sizes.
FFT_SIZES = {20: 64, 40: 128, 80: 256}

# Tone indices relative to DC. Edge guards cover the unused band edges; the
# DC region is nulled (single tone at 20 MHz, three tones at 40/80 MHz).
_PILOT_TONES = {
    20: (-21, -7, 7, 21),
    40: (-53, -25, -11, 11, 25, 53),
    80: (-103, -75, -39, -11, 11, 39, 75, 103),
}
_USED_SPAN = {20: 28, 40: 58, 80: 122}  # outermost occupied tone |k|
_DC_NULL = {20: (0,), 40: (-1, 0, 1), 80: (-1, 0, 1)}


class ActivityLabel(IntEnum):
    """The five recognized activity classes, with stable file codes 0-4."""

    EMPTY = 0
    SITTING = 1
    WALKING = 2
    RUNNING = 3
    JUMPING = 4


@dataclass(frozen=True)
class SubcarrierLayout:
    """Partition of the FFT grid into data, pilot, and guard subcarriers."""

    bandwidth_mhz: int
    total_count: int
    data_indices: tuple[int, ...]
    pilot_indices: tuple[int, ...]
    guard_indices: tuple[int, ...]

    @property
    def active_indices(self) -> np.ndarray:
        """Data plus pilot indices, sorted. These carry channel information."""
        return np.array(sorted(self.data_indices + self.pilot_indices))

    @property
    def dc_index(self) -> int:
        return self.total_count // 2

    def baseband_freqs_hz(self) -> np.ndarray:
        """Baseband frequency of every subcarrier, index-relative to DC."""
        k = np.arange(self.total_count) - self.dc_index
        return k * SUBCARRIER_SPACING_HZ

    def validate(self) -> None:
        sets = (set(self.data_indices), set(self.pilot_indices), set(self.guard_indices))
        if len(sets[0] | sets[1] | sets[2]) != self.total_count:
            raise InvariantViolation("layout index sets do not cover the FFT grid")
        if sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2]:
            raise InvariantViolation("layout index sets overlap")


def default_layout(bandwidth_mhz: int) -> SubcarrierLayout:
    """Canonical 802.11ac subcarrier layout for a supported channel width."""
    if bandwidth_mhz not in FFT_SIZES:
        raise UnsupportedBandwidth(f"unsupported bandwidth: {bandwidth_mhz} MHz")
    total = FFT_SIZES[bandwidth_mhz]
    half = total // 2
    span = _USED_SPAN[bandwidth_mhz]

    guards = set(range(-half, -span)) | set(range(span + 1, half)) | set(_DC_NULL[bandwidth_mhz])
    pilots = set(_PILOT_TONES[bandwidth_mhz])
    data = set(range(-span, span + 1)) - guards - pilots

    to_idx = lambda tones: tuple(sorted(k + half for k in tones))
    layout = SubcarrierLayout(
        bandwidth_mhz=bandwidth_mhz,
        total_count=total,
        data_indices=to_idx(data),
        pilot_indices=to_idx(pilots),
        guard_indices=to_idx(guards),
    )
    layout.validate()
    return layout


@dataclass(frozen=True)
class CsiFrame:
    """One captured packet: a timestamp and one complex value per subcarrier."""

    timestamp_s: float
    values: np.ndarray  # complex64 [total_count]


@dataclass
class CsiRecording:
    """Time series of CSI frames captured on a single antenna.

    values is [num_frames x total_count] complex64; timestamps_s is the
    matching float64 vector, strictly increasing.
    """

    antenna_id: int
    center_freq_hz: float
    packet_rate_hz: float
    layout: SubcarrierLayout
    timestamps_s: np.ndarray
    values: np.ndarray
    label: ActivityLabel | None = None

    def __post_init__(self):
        self.timestamps_s = np.asarray(self.timestamps_s, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.complex64)

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def duration_s(self) -> float:
        return self.num_frames / self.packet_rate_hz

    def frame(self, t: int) -> CsiFrame:
        return CsiFrame(timestamp_s=float(self.timestamps_s[t]), values=self.values[t])

    def validate(self) -> None:
        if self.antenna_id < 0:
            raise InvariantViolation("antenna_id must be >= 0")
        if self.packet_rate_hz <= 0:
            raise InvariantViolation("packet_rate_hz must be > 0")
        if self.num_frames < 1:
            raise InvariantViolation("recording must contain at least one frame")
        if self.values.ndim != 2 or self.values.shape[1] != self.layout.total_count:
            raise InvariantViolation(
                f"frame width {self.values.shape} does not match layout "
                f"total_count {self.layout.total_count}"
            )
        if self.timestamps_s.shape != (self.num_frames,):
            raise InvariantViolation("timestamp count does not match frame count")
        if self.num_frames > 1 and not np.all(np.diff(self.timestamps_s) > 0):
            raise InvariantViolation("timestamps must be strictly increasing")
        if not np.all(np.isfinite(self.values.view(np.float32))):
            raise InvariantViolation("recording contains non-finite values")


@dataclass
class CsiSample:
    """One physical event captured simultaneously on several antennas."""

    sample_id: int
    recordings: list[CsiRecording]

    @property
    def label(self) -> ActivityLabel | None:
        return self.recordings[0].label

    def validate(self) -> None:
        if not self.recordings:
            raise InvariantViolation(f"sample {self.sample_id} has no recordings")
        first = self.recordings[0]
        for rec in self.recordings:
            rec.validate()
            if rec.label != first.label:
                raise InvariantViolation(f"sample {self.sample_id}: labels differ across antennas")
            if rec.num_frames != first.num_frames:
                raise InvariantViolation(f"sample {self.sample_id}: frame counts differ across antennas")
            if not np.array_equal(rec.timestamps_s, first.timestamps_s):
                raise InvariantViolation(f"sample {self.sample_id}: timestamps differ across antennas")


@dataclass
class CsiDataset:
    """Collection of samples, each carrying antenna_count recordings."""

    samples: list[CsiSample]
    antenna_count: int

    @property
    def recordings(self) -> list[CsiRecording]:
        return [rec for sample in self.samples for rec in sample.recordings]

    def validate(self) -> None:
        if self.antenna_count < 1:
            raise InvariantViolation("antenna_count must be >= 1")
        for sample in self.samples:
            sample.validate()
            if len(sample.recordings) != self.antenna_count:
                raise InvariantViolation(
                    f"sample {sample.sample_id} has {len(sample.recordings)} recordings, "
                    f"expected {self.antenna_count}"
                )


def extract_subband(recording: CsiRecording, target_mhz: int) -> CsiRecording:
    """Restrict a recording to the contiguous center block of a narrower channel.

    The output carries the canonical layout of the target width; its values
    are the source subcarriers centered on DC. Timestamps, packet rate, and
    carrier frequency are untouched.
    """
    if target_mhz not in FFT_SIZES:
        raise UnsupportedBandwidth(f"unsupported bandwidth: {target_mhz} MHz")
    if recording.layout.bandwidth_mhz not in FFT_SIZES:
        raise UnsupportedBandwidth(f"unsupported bandwidth: {recording.layout.bandwidth_mhz} MHz")
    if target_mhz > recording.layout.bandwidth_mhz:
        raise UpsampleRequested(
            f"cannot widen {recording.layout.bandwidth_mhz} MHz to {target_mhz} MHz"
        )
    if target_mhz == recording.layout.bandwidth_mhz:
        return replace(recording)

    target_layout = default_layout(target_mhz)
    src_half = recording.layout.total_count // 2
    dst_half = target_layout.total_count // 2
    lo, hi = src_half - dst_half, src_half + dst_half
    return CsiRecording(
        antenna_id=recording.antenna_id,
        center_freq_hz=recording.center_freq_hz,
        packet_rate_hz=recording.packet_rate_hz,
        layout=target_layout,
        timestamps_s=recording.timestamps_s,
        values=recording.values[:, lo:hi],
        label=recording.label,
    )


def extract_subband_dataset(dataset: CsiDataset, target_mhz: int) -> CsiDataset:
    """Apply extract_subband to every recording of a dataset."""
    samples = [
        CsiSample(s.sample_id, [extract_subband(r, target_mhz) for r in s.recordings])
        for s in dataset.samples
    ]
    return CsiDataset(samples=samples, antenna_count=dataset.antenna_count)
