#!/usr/bin/env python3
"""Regenerate the fixture mini-dataset (synthetic stand-in for the real
matrix exports). Deterministic; run from this directory."""

import json
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent
FRAMES = 120
SUBCARRIERS = 64  # 20 MHz export
RATE = 80.0

SAMPLES = [
    (0, "empty", 0.0),
    (1, "walking", 1.2),
    (2, "running", 2.8),
]


def channel(rng: np.random.Generator, velocity: float) -> np.ndarray:
    t = np.arange(FRAMES) / RATE
    k = np.arange(SUBCARRIERS) - SUBCARRIERS // 2
    tau = rng.uniform(20e-9, 60e-9, size=2)
    static = sum(
        a * np.exp(-2j * np.pi * k * 312_500.0 * tau_i)[None, :]
        for a, tau_i in zip((1.0, 0.4), tau)
    )
    moving = 0.5 * np.exp(1j * 2 * np.pi * (2 * 5.18e9 / 2.998e8) * velocity * t)[:, None] \
        * np.exp(-2j * np.pi * k * 312_500.0 * rng.uniform(30e-9, 70e-9))[None, :]
    noise = 0.05 * (rng.standard_normal((FRAMES, SUBCARRIERS))
                    + 1j * rng.standard_normal((FRAMES, SUBCARRIERS)))
    return (static + moving + noise).astype(np.complex64)


def main() -> None:
    data = HERE / "data"
    data.mkdir(exist_ok=True)
    rng = np.random.default_rng(2024)
    manifest = {
        "scenario": "FIXTURE",
        "center_freq_hz": 5.18e9,
        "packet_rate_hz": RATE,
        "bandwidth_mhz": 20,
        "antenna_count": 2,
        "samples": [],
    }
    for sample_id, label, velocity in SAMPLES:
        files = {}
        for antenna in range(2):
            name = f"s{sample_id}_a{antenna}.npy"
            np.save(data / name, channel(rng, velocity))
            files[str(antenna)] = name
        entry = {"sample_id": sample_id, "label": label, "files": files}
        if sample_id == 1:
            ts_name = f"s{sample_id}_ts.npy"
            np.save(data / ts_name, np.arange(FRAMES) / RATE + 0.25)
            entry["timestamps"] = ts_name
        manifest["samples"].append(entry)
    (HERE / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"wrote {len(SAMPLES)} fixture samples under {data}")


if __name__ == "__main__":
    main()
