"""Phase sanitization: strip CFO/SFO-induced trends from CSI phase.

Per frame, the phase across active subcarriers is unwrapped and an
L1-regularized linear trend (slope over subcarrier index plus intercept) is
removed; per subcarrier, the temporal median is then subtracted. Amplitude
never enters: scaling the channel leaves the output untouched, and any
constant-plus-linear phase offset applied to every frame cancels exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .csi import CsiRecording
from .errors import DegenerateInput

DEFAULT_LAMBDA = 1e-2

_CONVERGENCE = 1e-10
_MAX_SWEEPS = 10_000


@dataclass
class PhaseMatrix:
    """Phase-only view of a recording: [num_frames x num_active_subcarriers]."""

    values: np.ndarray
    active_indices: np.ndarray
    packet_rate_hz: float

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def duration_s(self) -> float:
        return self.num_frames / self.packet_rate_hz


@dataclass(frozen=True)
class LassoFit:
    slope: float
    intercept: float
    lam: float


def unwrap_phase(angles: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unwrap so adjacent differences along axis land in (-pi, pi].

    The output differs from the input by integer multiples of 2*pi per
    element; smooth inputs pass through unchanged.
    """
    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape[axis] < 2:
        return angles.copy()
    moved = np.moveaxis(angles, axis, -1)
    d = np.diff(moved, axis=-1)
    d_wrapped = d - 2 * np.pi * np.ceil((d - np.pi) / (2 * np.pi))
    out = np.empty_like(moved)
    out[..., 0] = moved[..., 0]
    np.cumsum(d_wrapped, axis=-1, out=out[..., 1:])
    out[..., 1:] += moved[..., :1]
    return np.moveaxis(out, -1, axis)


def _soft(v, lam):
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def _lasso_batch(x: np.ndarray, ys: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Fit slope/intercept rows of ys against x, minimizing
    0.5*sum((y - a*x - b)^2) + lam*(|a| + |b|) per row.

    Cyclic coordinate descent with soft-thresholding, warm-started at the
    least-squares solution; stops when no parameter moves more than 1e-10.
    """
    n = x.size
    sx = x.sum()
    sxx = float(x @ x)
    det = n * sxx - sx * sx
    if det <= 0 or np.ptp(x) == 0:
        raise DegenerateInput("all subcarrier indices equal; cannot fit a trend")

    sy = ys.sum(axis=1)
    sxy = ys @ x
    a = (n * sxy - sx * sy) / det
    b = (sy - a * sx) / n
    for _ in range(_MAX_SWEEPS):
        a_new = _soft(sxy - b * sx, lam) / sxx
        b_new = _soft(sy - a_new * sx, lam) / n
        delta = max(np.abs(a_new - a).max(), np.abs(b_new - b).max())
        a, b = a_new, b_new
        if delta < _CONVERGENCE:
            break
    return a, b


def lasso_fit(x, y, lam: float = DEFAULT_LAMBDA) -> LassoFit:
    """L1-regularized linear fit of y against x (both penalty terms active)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise DegenerateInput("need matching x/y vectors of length >= 2")
    if lam < 0:
        raise DegenerateInput("penalty must be >= 0")
    a, b = _lasso_batch(x, y[np.newaxis, :], lam)
    return LassoFit(slope=float(a[0]), intercept=float(b[0]), lam=lam)


def raw_phase_matrix(recording: CsiRecording) -> PhaseMatrix:
    """Wrapped per-subcarrier phase on the active indices, untouched."""
    active = recording.layout.active_indices
    return PhaseMatrix(
        values=np.angle(recording.values[:, active]).astype(np.float64),
        active_indices=active,
        packet_rate_hz=recording.packet_rate_hz,
    )


def sanitize_recording(recording: CsiRecording, lam: float = DEFAULT_LAMBDA) -> PhaseMatrix:
    """Offset-free phase matrix of a recording.

    Guard subcarriers are excluded up front; their contents are hardware
    artifacts, not channel state.
    """
    active = recording.layout.active_indices
    if active.size < 2:
        raise DegenerateInput("need at least 2 active subcarriers")
    angles = np.angle(recording.values[:, active]).astype(np.float64)
    unwrapped = unwrap_phase(angles, axis=1)
    a, b = _lasso_batch(active.astype(np.float64), unwrapped, lam)
    detrended = unwrapped - np.outer(a, active.astype(np.float64)) - b[:, np.newaxis]
    detrended -= np.median(detrended, axis=0, keepdims=True)
    return PhaseMatrix(
        values=detrended,
        active_indices=active,
        packet_rate_hz=recording.packet_rate_hz,
    )
