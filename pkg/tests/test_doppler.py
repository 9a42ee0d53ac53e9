"""STFT, velocity mapping, trace normalization, and the DOPP container."""

import numpy as np
import pytest

from ibis.csi import ActivityLabel, CsiRecording, default_layout
from ibis.doppler import (DopplerConfig, DopplerTrace, StftConfig, doppler_trace,
                          doppler_frequency, inspect_dopp, normalize_trace,
                          num_time_bins, parse_dopp, stft, trace_to_csv,
                          trace_to_pgm, write_dopp, SPEED_OF_LIGHT)
from ibis.errors import NyquistViolation, SignalTooShort
from ibis.sanitize import PhaseMatrix, raw_phase_matrix
from ibis.synth import ConstantVelocity, MultipathComponent, _field


# --- stft ------------------------------------------------------------------


def test_tone_hits_single_bin():
    cfg = StftConfig(window_len=64, hop=64, fft_len=64, window_kind="rect")
    n = np.arange(256)
    signal = np.exp(2j * np.pi * 5 * n / 64)
    spec = np.abs(stft(signal, cfg))
    peak = spec[:, 5]
    others = np.delete(spec, 5, axis=1)
    assert np.all(others.max(axis=1) < 1e-9 * peak)


def test_zero_signal():
    cfg = StftConfig(window_len=32, hop=16, fft_len=32, window_kind="rect")
    assert np.all(stft(np.zeros(128, dtype=complex), cfg) == 0.0)


def test_too_short():
    with pytest.raises(SignalTooShort):
        stft(np.zeros(16, dtype=complex), StftConfig(32, 16, 32, "rect"))


def _naive_stft(signal, cfg):
    """Independent oracle: direct DFT of each window, plain loops."""
    window = cfg.window()
    frames = (len(signal) - cfg.window_len) // cfg.hop + 1
    out = np.zeros((frames, cfg.fft_len), dtype=complex)
    for t in range(frames):
        chunk = signal[t * cfg.hop:t * cfg.hop + cfg.window_len] * window
        for k in range(cfg.fft_len):
            acc = 0.0 + 0.0j
            for idx in range(cfg.window_len):  # zero padding adds nothing
                acc += chunk[idx] * np.exp(-2j * np.pi * k * idx / cfg.fft_len)
            out[t, k] = acc
    return out


def test_stft_matches_naive_dft_on_chirp():
    cfg = StftConfig(window_len=16, hop=8, fft_len=32, window_kind="hann")
    n = np.arange(96)
    chirp = np.exp(1j * 0.002 * n ** 2 + 0.3j * n)
    ours = stft(chirp, cfg)
    oracle = _naive_stft(chirp, cfg)
    assert np.abs(ours - oracle).max() < 1e-9


def test_parseval_rect_nonoverlapping():
    cfg = StftConfig(window_len=64, hop=64, fft_len=64, window_kind="rect")
    rng = np.random.default_rng(0)
    signal = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    spec = stft(signal, cfg)
    for t in range(spec.shape[0]):
        chunk = signal[t * 64:(t + 1) * 64]
        lhs = np.sum(np.abs(spec[t]) ** 2) / 64  # unnormalized DFT scaling
        rhs = np.sum(np.abs(chunk) ** 2)
        assert abs(lhs - rhs) < 1e-6 * rhs


# --- normalize ----------------------------------------------------------------


def test_normalize_examples():
    out = normalize_trace(np.array([[2.0, 4.0], [1.0, 0.0]]))
    assert np.array_equal(out, [[0.5, 1.0], [0.25, 0.0]])
    zeros = np.zeros((3, 3))
    assert np.array_equal(normalize_trace(zeros), zeros)


def test_normalize_postcondition():
    rng = np.random.default_rng(1)
    power = rng.random((10, 7)) * 13.7
    out = normalize_trace(power)
    assert out.max() == 1.0


# --- doppler traces --------------------------------------------------------------


def _single_path_recording(velocity, rate=400.0, fc=5.18e9, refl=2, seconds=4.5):
    lay = default_layout(20)
    times = np.arange(int(round(seconds * rate))) / rate
    comp = MultipathComponent(alpha=1.0, phi0=0.4, tau=45e-9, velocity=velocity)
    values = _field([(comp, ConstantVelocity())], times, lay, fc, refl)
    return CsiRecording(antenna_id=0, center_freq_hz=fc, packet_rate_hz=rate,
                        layout=lay, timestamps_s=times,
                        values=values.astype(np.complex64))


def _argmax_velocities(trace):
    return trace.velocity_axis[trace.power.argmax(axis=1)]


def test_single_path_peak_at_true_velocity():
    rec = _single_path_recording(1.5)
    trace = doppler_trace(raw_phase_matrix(rec), DopplerConfig(center_freq_hz=5.18e9))
    hits = np.abs(_argmax_velocities(trace) - 1.5) <= 0.1 + 1e-9
    assert hits.mean() >= 0.95


def test_static_channel_peaks_at_zero():
    lay = default_layout(20)
    times = np.arange(1800) / 400.0
    comps = [(MultipathComponent(1.0, 0.3, 20e-9), ConstantVelocity()),
             (MultipathComponent(0.4, 1.1, 60e-9), ConstantVelocity())]
    values = _field(comps, times, lay, 5.18e9, 2)
    rec = CsiRecording(0, 5.18e9, 400.0, lay, times, values.astype(np.complex64))
    trace = doppler_trace(raw_phase_matrix(rec), DopplerConfig(center_freq_hz=5.18e9))
    assert np.all(_argmax_velocities(trace) == 0.0)


def test_mirror_symmetry():
    plus = doppler_trace(raw_phase_matrix(_single_path_recording(3.0)),
                         DopplerConfig(center_freq_hz=5.18e9))
    minus = doppler_trace(raw_phase_matrix(_single_path_recording(-3.0)),
                          DopplerConfig(center_freq_hz=5.18e9))
    assert np.allclose(_argmax_velocities(plus), -_argmax_velocities(minus))
    assert np.allclose(plus.power, minus.power[:, ::-1], atol=1e-9)


def test_velocity_mapping_halves_when_carrier_doubles():
    # A fixed-frequency phase tone lands at half the velocity when the
    # carrier doubles: v = f * c / (k * f_c).
    rate = 1600.0
    f_tone = 80.0
    t = np.arange(int(4.5 * rate)) / rate
    phase = np.tile((2 * np.pi * f_tone * t)[:, None], (1, 4))
    pm = PhaseMatrix(values=phase, active_indices=np.arange(4), packet_rate_hz=rate)
    fc = 5.18e9
    v1 = _argmax_velocities(doppler_trace(pm, DopplerConfig(center_freq_hz=fc)))
    v2 = _argmax_velocities(doppler_trace(pm, DopplerConfig(center_freq_hz=2 * fc)))
    expected1 = f_tone * SPEED_OF_LIGHT / (2 * fc)
    assert abs(np.median(v1) - expected1) <= 0.1
    assert abs(np.median(v2) - expected1 / 2) <= 0.1


def test_doppler_frequency_closed_form():
    assert doppler_frequency(1.0, SPEED_OF_LIGHT, 2) == 2.0
    assert doppler_frequency(-2.0, SPEED_OF_LIGHT / 2, 1) == -1.0


def test_signal_too_short():
    rec = _single_path_recording(1.0, seconds=2.0)
    with pytest.raises(SignalTooShort):
        doppler_trace(raw_phase_matrix(rec), DopplerConfig(center_freq_hz=5.18e9))


def test_nyquist_violation():
    rec = _single_path_recording(1.0, rate=100.0)
    with pytest.raises(NyquistViolation):
        doppler_trace(raw_phase_matrix(rec), DopplerConfig(center_freq_hz=5.18e9))


def test_trace_shape_is_deterministic():
    cfg = DopplerConfig(center_freq_hz=5.18e9)
    for seconds in (4.5, 5.2, 6.0):
        rec = _single_path_recording(1.0, seconds=seconds)
        trace = doppler_trace(raw_phase_matrix(rec), cfg)
        assert trace.power.shape == (num_time_bins(cfg.stft, 400.0), 81)
        assert trace.power.max() == 1.0
        assert trace.velocity_axis[0] == -4.0 and trace.velocity_axis[-1] == 4.0


def test_trace_invariant_to_global_constant_phase():
    # End-to-end: a constant phase on every subcarrier and frame is offset
    # noise the sanitizer removes, so the trace does not move.
    from ibis.sanitize import sanitize_recording
    lay = default_layout(20)
    times = np.arange(1800) / 400.0
    comps = [(MultipathComponent(1.0, 0.1, 20e-9), ConstantVelocity()),
             (MultipathComponent(0.5, 0.9, 55e-9, velocity=1.2), ConstantVelocity())]
    values = _field(comps, times, lay, 5.18e9, 2)
    cfg = DopplerConfig(center_freq_hz=5.18e9)
    base = CsiRecording(0, 5.18e9, 400.0, lay, times, values.astype(np.complex64))
    rotated = CsiRecording(0, 5.18e9, 400.0, lay, times,
                           (values * np.exp(1.3j)).astype(np.complex64))
    t1 = doppler_trace(sanitize_recording(base), cfg)
    t2 = doppler_trace(sanitize_recording(rotated), cfg)
    assert np.allclose(t1.power, t2.power, atol=1e-4)


# --- DOPP container ---------------------------------------------------------------


def _random_trace(seed=0):
    rng = np.random.default_rng(seed)
    power = rng.random((12, 9)).astype(np.float32)
    power /= power.max()
    return DopplerTrace(power=power, velocity_axis=np.linspace(-4, 4, 9),
                        label=ActivityLabel.RUNNING, antenna_id=2)


def test_dopp_round_trip():
    trace = _random_trace()
    parsed = parse_dopp(write_dopp(trace))
    assert np.array_equal(parsed.power, trace.power)
    assert np.array_equal(parsed.velocity_axis, trace.velocity_axis)
    assert parsed.label is ActivityLabel.RUNNING
    assert parsed.antenna_id == 2
    assert parsed.duration_s == trace.duration_s
    assert write_dopp(parsed) == write_dopp(trace)


def test_dopp_header_contents():
    header = inspect_dopp(write_dopp(_random_trace()))
    assert header["time_bins"] == 12
    assert header["velocity_bins"] == 9
    assert header["duration_s"] == 4.5
    assert header["label_code"] == int(ActivityLabel.RUNNING)


def test_pgm_and_csv_exports():
    trace = _random_trace()
    pgm = trace_to_pgm(trace)
    assert pgm.startswith(b"P5\n9 12\n255\n")
    assert len(pgm) == len(b"P5\n9 12\n255\n") + 12 * 9
    csv = trace_to_csv(trace)
    lines = csv.strip().splitlines()
    assert len(lines) == 13
    assert len(lines[0].split(",")) == 9
