"""Doppler velocity spectrograms from phase matrices.

Each active subcarrier's phase series is re-expressed as a unit-modulus
complex signal, short-time Fourier transformed, and the magnitude-squared
spectrograms are averaged incoherently across subcarriers. Frequency maps
to radial velocity through f = reflection_factor * v * f_c / c, the time
axis is center-cropped to exactly 4.5 s, and power is scaled to a global
maximum of one.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .csi import ActivityLabel
from .errors import HeaderMismatch, BadMagic, NyquistViolation, SignalTooShort, UnsupportedVersion
from .sanitize import PhaseMatrix

SPEED_OF_LIGHT = 299_792_458.0

TRACE_DURATION_S = 4.5
VELOCITY_SPAN = 4.0

DOPP_MAGIC = b"DOPP"
DOPP_VERSION = 1
_PREFIX = struct.Struct("<4sHI")


@dataclass(frozen=True)
class StftConfig:
    window_len: int = 128
    hop: int = 32
    fft_len: int = 256
    window_kind: str = "hann"

    def validate(self) -> None:
        if not (0 < self.hop <= self.window_len <= self.fft_len):
            raise ValueError("require 0 < hop <= window_len <= fft_len")
        if self.fft_len & (self.fft_len - 1):
            raise ValueError("fft_len must be a power of two")
        if self.window_kind not in ("hann", "rect"):
            raise ValueError(f"unknown window kind {self.window_kind!r}")

    def window(self) -> np.ndarray:
        if self.window_kind == "rect":
            return np.ones(self.window_len)
        n = np.arange(self.window_len)
        return 0.5 - 0.5 * np.cos(2 * np.pi * n / self.window_len)


@dataclass(frozen=True)
class DopplerConfig:
    center_freq_hz: float
    reflection_factor: int = 2
    velocity_bins: int = 81
    stft: StftConfig = field(default_factory=StftConfig)

    def validate(self) -> None:
        if self.center_freq_hz <= 0:
            raise ValueError("center_freq_hz must be > 0")
        if self.reflection_factor not in (1, 2):
            raise ValueError("reflection_factor must be 1 or 2")
        if self.velocity_bins < 3 or self.velocity_bins % 2 == 0:
            raise ValueError("velocity_bins must be an odd integer >= 3")
        self.stft.validate()

    def velocity_axis(self) -> np.ndarray:
        return np.linspace(-VELOCITY_SPAN, VELOCITY_SPAN, self.velocity_bins)


@dataclass
class DopplerTrace:
    """Normalized time x velocity power map over a 4.5 s window."""

    power: np.ndarray  # float32 [time_bins x velocity_bins], max 1 unless all-zero
    velocity_axis: np.ndarray
    duration_s: float = TRACE_DURATION_S
    label: ActivityLabel | None = None
    antenna_id: int = 0

    @property
    def time_bins(self) -> int:
        return self.power.shape[0]

    @property
    def velocity_bins(self) -> int:
        return self.power.shape[1]


def doppler_frequency(velocity_mps: float, center_freq_hz: float, reflection_factor: int) -> float:
    """Doppler shift of a scatterer moving at the given radial velocity."""
    return reflection_factor * velocity_mps * center_freq_hz / SPEED_OF_LIGHT


def stft(signal: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Short-time FFT: [frames x fft_len], DC at bin 0, hop-spaced windows."""
    cfg.validate()
    signal = np.asarray(signal)
    if signal.ndim != 1:
        raise ValueError("stft expects a 1-D signal")
    if signal.size < cfg.window_len:
        raise SignalTooShort(
            f"signal of {signal.size} samples is shorter than the {cfg.window_len}-sample window"
        )
    frames = _windowed(signal[np.newaxis, :], cfg)[0]
    return np.fft.fft(frames, n=cfg.fft_len, axis=-1)


def _windowed(signals: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """[rows x frames x window_len] strided view of hop-spaced windows, tapered."""
    view = sliding_window_view(signals, cfg.window_len, axis=-1)[:, ::cfg.hop, :]
    return view * cfg.window()


def num_time_bins(cfg: StftConfig, packet_rate_hz: float) -> int:
    """STFT frame count of an exactly 4.5 s signal."""
    n45 = int(round(TRACE_DURATION_S * packet_rate_hz))
    if n45 < cfg.window_len:
        raise SignalTooShort("4.5 s of signal is shorter than one window")
    return (n45 - cfg.window_len) // cfg.hop + 1


def normalize_trace(power: np.ndarray) -> np.ndarray:
    """Scale to a global maximum of 1; all-zero input passes through."""
    peak = power.max(initial=0.0)
    if peak == 0.0:
        return power.copy()
    return power / peak


def doppler_trace(phase: PhaseMatrix, cfg: DopplerConfig,
                  label: ActivityLabel | None = None, antenna_id: int = 0) -> DopplerTrace:
    """Velocity spectrogram of a phase matrix spanning at least 4.5 s."""
    cfg.validate()
    rate = phase.packet_rate_hz
    n45 = int(round(TRACE_DURATION_S * rate))
    if phase.num_frames < n45:
        raise SignalTooShort(
            f"{phase.num_frames} frames at {rate} Hz is shorter than {TRACE_DURATION_S} s"
        )
    f_edge = doppler_frequency(VELOCITY_SPAN, cfg.center_freq_hz, cfg.reflection_factor)
    if rate < 2 * f_edge:
        raise NyquistViolation(
            f"packet rate {rate} Hz cannot represent {VELOCITY_SPAN} m/s "
            f"(needs >= {2 * f_edge:.1f} Hz)"
        )

    signals = np.exp(1j * phase.values.T)  # [subcarriers x time]
    frames = _windowed(signals, cfg.stft)
    spec = np.fft.fft(frames, n=cfg.stft.fft_len, axis=-1)
    power = np.mean(np.abs(spec) ** 2, axis=0)  # [frames x fft_len]
    power = np.fft.fftshift(power, axes=1)

    freqs = np.fft.fftshift(np.fft.fftfreq(cfg.stft.fft_len, d=1.0 / rate))
    v_src = freqs * SPEED_OF_LIGHT / (cfg.reflection_factor * cfg.center_freq_hz)
    v_axis = cfg.velocity_axis()
    resampled = _interp_rows(power, v_src, v_axis)

    target_bins = num_time_bins(cfg.stft, rate)
    start = (resampled.shape[0] - target_bins) // 2
    cropped = resampled[start:start + target_bins]

    return DopplerTrace(
        power=normalize_trace(cropped).astype(np.float32),
        velocity_axis=v_axis,
        duration_s=TRACE_DURATION_S,
        label=label,
        antenna_id=antenna_id,
    )


def _interp_rows(rows: np.ndarray, x_src: np.ndarray, x_dst: np.ndarray) -> np.ndarray:
    """Linear interpolation of every row from the shared x_src grid onto x_dst."""
    idx = np.searchsorted(x_src, x_dst).clip(1, x_src.size - 1)
    x0, x1 = x_src[idx - 1], x_src[idx]
    w = np.clip((x_dst - x0) / (x1 - x0), 0.0, 1.0)
    return rows[:, idx - 1] * (1.0 - w) + rows[:, idx] * w


# --- DOPP v1 container -------------------------------------------------------

def write_dopp(trace: DopplerTrace) -> bytes:
    header = {
        "time_bins": int(trace.time_bins),
        "velocity_bins": int(trace.velocity_bins),
        "duration_s": float(trace.duration_s),
        "velocity_min": float(trace.velocity_axis[0]),
        "velocity_max": float(trace.velocity_axis[-1]),
        "label_code": None if trace.label is None else int(trace.label),
        "antenna_id": int(trace.antenna_id),
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    out = io.BytesIO()
    out.write(_PREFIX.pack(DOPP_MAGIC, DOPP_VERSION, len(hbytes)))
    out.write(hbytes)
    out.write(np.ascontiguousarray(trace.power, dtype="<f4").tobytes())
    return out.getvalue()


def inspect_dopp(blob: bytes) -> dict:
    header, _ = _read_dopp_header(blob)
    return header


def _read_dopp_header(blob: bytes) -> tuple[dict, int]:
    if len(blob) < _PREFIX.size:
        raise HeaderMismatch("file shorter than the fixed prefix")
    magic, version, hlen = _PREFIX.unpack_from(blob)
    if magic != DOPP_MAGIC:
        raise BadMagic(f"expected magic {DOPP_MAGIC!r}, found {magic!r}")
    if version != DOPP_VERSION:
        raise UnsupportedVersion(f"unsupported DOPP version {version}")
    if len(blob) < _PREFIX.size + hlen:
        raise HeaderMismatch("file truncated inside the JSON header")
    try:
        header = json.loads(blob[_PREFIX.size:_PREFIX.size + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise HeaderMismatch(f"unreadable JSON header: {exc}") from exc
    return header, _PREFIX.size + hlen


def parse_dopp(blob: bytes) -> DopplerTrace:
    header, offset = _read_dopp_header(blob)
    t, v = int(header["time_bins"]), int(header["velocity_bins"])
    expected = t * v * 4
    if len(blob) - offset != expected:
        raise HeaderMismatch(
            f"payload is {len(blob) - offset} bytes, header declares {expected}"
        )
    power = np.frombuffer(blob, dtype="<f4", offset=offset).reshape(t, v).copy()
    if not np.isfinite(power).all():
        raise HeaderMismatch("payload contains non-finite values")
    code = header["label_code"]
    return DopplerTrace(
        power=power,
        velocity_axis=np.linspace(header["velocity_min"], header["velocity_max"], v),
        duration_s=float(header["duration_s"]),
        label=None if code is None else ActivityLabel(int(code)),
        antenna_id=int(header["antenna_id"]),
    )


def write_dopp_file(path, trace: DopplerTrace) -> None:
    with open(path, "wb") as fh:
        fh.write(write_dopp(trace))


def parse_dopp_file(path) -> DopplerTrace:
    with open(path, "rb") as fh:
        return parse_dopp(fh.read())


# --- inspection exports ------------------------------------------------------

def trace_to_pgm(trace: DopplerTrace) -> bytes:
    """8-bit binary PGM (P5) image of the power map, velocity along width."""
    h, w = trace.power.shape
    pixels = np.round(np.clip(trace.power, 0.0, 1.0) * 255).astype(np.uint8)
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes()


def trace_to_csv(trace: DopplerTrace) -> str:
    """Comma-delimited matrix with the velocity axis as the header row."""
    lines = [",".join(f"{v:.6g}" for v in trace.velocity_axis)]
    for row in trace.power:
        lines.append(",".join(f"{p:.8g}" for p in row))
    return "\n".join(lines) + "\n"
