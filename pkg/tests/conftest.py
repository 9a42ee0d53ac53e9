import numpy as np
import pytest

from ibis.csi import ActivityLabel, CsiDataset, CsiRecording, CsiSample, default_layout


def make_recording(bw=20, frames=3, antenna=0, rate=100.0, label=None, seed=0,
                   timestamps=None):
    lay = default_layout(bw)
    rng = np.random.default_rng(seed)
    values = (rng.standard_normal((frames, lay.total_count))
              + 1j * rng.standard_normal((frames, lay.total_count))).astype(np.complex64)
    ts = np.arange(frames) / rate if timestamps is None else timestamps
    return CsiRecording(antenna_id=antenna, center_freq_hz=5.18e9,
                        packet_rate_hz=rate, layout=lay, timestamps_s=ts,
                        values=values, label=label)


def make_dataset(num_samples=2, antennas=2, bw=20, frames=3, seed=0):
    samples = []
    for s in range(num_samples):
        label = ActivityLabel(s % 5)
        recs = [make_recording(bw=bw, frames=frames, antenna=a, label=label,
                               seed=seed * 1000 + s * 10 + a)
                for a in range(antennas)]
        samples.append(CsiSample(sample_id=s, recordings=recs))
    return CsiDataset(samples=samples, antenna_count=antennas)


@pytest.fixture
def tiny_dataset():
    return make_dataset()
