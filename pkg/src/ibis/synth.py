"""Synthetic multipath CSI generation.

The channel is a sum of discrete paths, each with amplitude, initial phase,
delay, and a radial velocity that advances the path phase over time:

    H_i(t) = sum_l alpha_l * exp(j*(phi_l + 2*pi*k*(f_c/c)*integral(v_l) - 2*pi*f_i*tau_l))

where f_i is the subcarrier's baseband frequency and k the reflection
factor shared with the Doppler stage, so synthesized velocities land on the
velocity axis the spectrograms report. Activity scripts attach slowly or
periodically moving paths to each class; everything is a pure function of
the configuration and seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .csi import ActivityLabel, CsiDataset, CsiFrame, CsiRecording, CsiSample, SubcarrierLayout, default_layout
from .doppler import SPEED_OF_LIGHT
from .errors import InvariantViolation

MAX_ACTIVITY_SPEED = 4.0  # m/s, edge of the reportable velocity range


@dataclass(frozen=True)
class MultipathComponent:
    alpha: float          # amplitude
    phi0: float           # initial phase, radians
    tau: float            # delay, seconds
    velocity: float = 0.0  # radial velocity, m/s

    def validate(self) -> None:
        if self.alpha < 0:
            raise InvariantViolation("path amplitude must be >= 0")
        if self.tau < 0:
            raise InvariantViolation("path delay must be >= 0")
        if abs(self.velocity) > MAX_ACTIVITY_SPEED:
            raise InvariantViolation("path velocity outside the +-4 m/s activity band")


@dataclass(frozen=True)
class ConstantVelocity:
    """Path moves at the component's own velocity for the whole capture."""

    kind: str = "constant_v"


@dataclass(frozen=True)
class SinusoidalVelocity:
    """Path velocity oscillates: v(t) = amplitude * sin(2*pi*t / period)."""

    amplitude_mps: float
    period_s: float
    kind: str = "sinusoidal_v"


Modulation = ConstantVelocity | SinusoidalVelocity


@dataclass
class ActivityScript:
    label: ActivityLabel
    static_paths: list[MultipathComponent]
    dynamic_paths: list[tuple[MultipathComponent, Modulation]]
    duration_s: float = 4.5
    snr_db: float | None = 20.0

    def validate(self) -> None:
        if self.duration_s < 4.5:
            raise InvariantViolation("script must span at least 4.5 s")
        if not self.static_paths:
            raise InvariantViolation("script needs at least one static path")
        for p in self.static_paths:
            p.validate()
        for p, mod in self.dynamic_paths:
            p.validate()
            if isinstance(mod, SinusoidalVelocity) and abs(mod.amplitude_mps) > MAX_ACTIVITY_SPEED:
                raise InvariantViolation("modulation amplitude outside the +-4 m/s band")


@dataclass(frozen=True)
class SynthConfig:
    packet_rate_hz: float = 400.0
    center_freq_hz: float = 5.18e9
    bandwidth_mhz: int = 80
    antenna_count: int = 4
    samples_per_class: int = 10
    seed: int = 0
    snr_db: float | None = 20.0
    duration_s: float = 4.5
    reflection_factor: int = 2

    def validate(self) -> None:
        if self.antenna_count < 1:
            raise InvariantViolation("antenna_count must be >= 1")
        if self.samples_per_class < 1:
            raise InvariantViolation("samples_per_class must be >= 1")
        if self.packet_rate_hz <= 0 or self.center_freq_hz <= 0:
            raise InvariantViolation("rates and frequencies must be positive")
        if self.duration_s < 4.5:
            raise InvariantViolation("duration_s must be >= 4.5")
        if self.reflection_factor not in (1, 2):
            raise InvariantViolation("reflection_factor must be 1 or 2")


def _doppler_phase(mod: Modulation, velocity: float, times: np.ndarray,
                   center_freq_hz: float, reflection_factor: int) -> np.ndarray:
    """Accumulated motion phase 2*pi*k*(f_c/c) * integral of v(t) dt."""
    scale = 2 * np.pi * reflection_factor * center_freq_hz / SPEED_OF_LIGHT
    if isinstance(mod, SinusoidalVelocity):
        # integral of A*sin(2*pi*t/T) is A*T/(2*pi) * (1 - cos(2*pi*t/T))
        omega = 2 * np.pi / mod.period_s
        return scale * (mod.amplitude_mps / omega) * (1.0 - np.cos(omega * times))
    return scale * velocity * times


def _field(components: list[tuple[MultipathComponent, Modulation]],
           times: np.ndarray, layout: SubcarrierLayout,
           center_freq_hz: float, reflection_factor: int) -> np.ndarray:
    """Complex channel [time x subcarriers] of the given paths; guards zero.

    Each path factors into a time-only motion phasor and a subcarrier-only
    delay phasor, so the sum over paths is a single rank-L product.
    """
    if not components:
        return np.zeros((times.size, layout.total_count), dtype=np.complex128)
    freqs = layout.baseband_freqs_hz()
    time_factors = np.stack([
        comp.alpha * np.exp(1j * (comp.phi0 + _doppler_phase(
            mod, comp.velocity, times, center_freq_hz, reflection_factor)))
        for comp, mod in components
    ])
    subc_factors = np.stack([
        np.exp(-2j * np.pi * freqs * comp.tau) for comp, _ in components
    ])
    total = time_factors.T @ subc_factors
    total[:, list(layout.guard_indices)] = 0.0
    return total


def csi_at(components: list[MultipathComponent], t: float, layout: SubcarrierLayout,
           center_freq_hz: float, reflection_factor: int = 2) -> CsiFrame:
    """Single frame of the multipath channel at time t (constant velocities)."""
    paths = [(c, ConstantVelocity()) for c in components]
    values = _field(paths, np.array([t], dtype=np.float64), layout,
                    center_freq_hz, reflection_factor)[0]
    return CsiFrame(timestamp_s=t, values=values.astype(np.complex64))


def _u(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(rng.uniform(lo, hi))


def _statics(rng: np.random.Generator) -> list[MultipathComponent]:
    los = MultipathComponent(alpha=1.0, phi0=_u(rng, 0, 2 * np.pi),
                             tau=_u(rng, 10e-9, 30e-9))
    wall = MultipathComponent(alpha=_u(rng, 0.3, 0.5), phi0=_u(rng, 0, 2 * np.pi),
                              tau=_u(rng, 40e-9, 90e-9))
    return [los, wall]


def _dyn(rng: np.random.Generator, alpha: float, velocity: float = 0.0) -> MultipathComponent:
    return MultipathComponent(alpha=alpha, phi0=_u(rng, 0, 2 * np.pi),
                              tau=_u(rng, 30e-9, 80e-9), velocity=velocity)


def _script(label: ActivityLabel, rng: np.random.Generator,
            duration_s: float, snr_db: float | None) -> ActivityScript:
    statics = _statics(rng)
    dyn: list[tuple[MultipathComponent, Modulation]] = []
    if label is ActivityLabel.SITTING:
        dyn = [(_dyn(rng, _u(rng, 0.35, 0.55)),
                SinusoidalVelocity(_u(rng, 0.15, 0.3), _u(rng, 2.5, 4.0)))]
    elif label is ActivityLabel.WALKING:
        sign = rng.choice((-1.0, 1.0))
        dyn = [
            (_dyn(rng, _u(rng, 0.35, 0.5), sign * _u(rng, 1.0, 1.3)), ConstantVelocity()),
            (_dyn(rng, _u(rng, 0.18, 0.3)),
             SinusoidalVelocity(_u(rng, 0.6, 1.0), _u(rng, 0.9, 1.3))),
        ]
    elif label is ActivityLabel.RUNNING:
        sign = rng.choice((-1.0, 1.0))
        dyn = [
            (_dyn(rng, _u(rng, 0.5, 0.7), sign * _u(rng, 2.5, 3.1)), ConstantVelocity()),
            (_dyn(rng, _u(rng, 0.35, 0.5)),
             SinusoidalVelocity(_u(rng, 2.2, 3.0), _u(rng, 0.45, 0.7))),
        ]
    elif label is ActivityLabel.JUMPING:
        dyn = [
            (_dyn(rng, _u(rng, 0.55, 0.75)),
             SinusoidalVelocity(_u(rng, 3.2, 3.8), _u(rng, 0.7, 0.9))),
            (_dyn(rng, _u(rng, 0.3, 0.45)),
             SinusoidalVelocity(_u(rng, 1.8, 2.6), _u(rng, 0.4, 0.6))),
        ]
    script = ActivityScript(label=label, static_paths=statics, dynamic_paths=dyn,
                            duration_s=duration_s, snr_db=snr_db)
    script.validate()
    return script


def default_scripts(seed: int, duration_s: float = 4.5,
                    snr_db: float | None = 20.0) -> list[ActivityScript]:
    """One jittered script per activity class, deterministic in the seed."""
    scripts = []
    for label in ActivityLabel:
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, 0xAC71, int(label)])))
        scripts.append(_script(label, rng, duration_s, snr_db))
    return scripts


def _sample_rng(cfg: SynthConfig, *key: int) -> np.random.Generator:
    entropy = [cfg.seed & 0xFFFFFFFFFFFFFFFF, *key]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def synthesize_sample(cfg: SynthConfig, script: ActivityScript, sample_id: int,
                      rng_statics: list[np.random.Generator],
                      rng_noise: list[np.random.Generator]) -> CsiSample:
    """Render one scripted event on every antenna.

    Dynamic paths (and their phases) are shared across antennas; static path
    phases and the additive noise are independent per antenna. Noise power is
    set against the summed static-path power.
    """
    layout = default_layout(cfg.bandwidth_mhz)
    num_frames = int(round(script.duration_s * cfg.packet_rate_hz))
    times = np.arange(num_frames, dtype=np.float64) / cfg.packet_rate_hz

    dynamic = _field(script.dynamic_paths, times, layout,
                     cfg.center_freq_hz, cfg.reflection_factor)
    static_power = sum(p.alpha ** 2 for p in script.static_paths)
    active = [i for i in range(layout.total_count) if i not in set(layout.guard_indices)]

    recordings = []
    for a in range(cfg.antenna_count):
        rng = rng_statics[a]
        statics = [
            MultipathComponent(alpha=p.alpha, phi0=_u(rng, 0, 2 * np.pi), tau=p.tau)
            for p in script.static_paths
        ]
        values = dynamic + _field([(p, ConstantVelocity()) for p in statics], times,
                                  layout, cfg.center_freq_hz, cfg.reflection_factor)
        if script.snr_db is not None and math.isfinite(script.snr_db):
            sigma = math.sqrt(static_power / (10 ** (script.snr_db / 10.0)) / 2.0)
            noise = rng_noise[a].normal(0.0, sigma, size=(num_frames, len(active), 2))
            values[:, active] += noise[..., 0] + 1j * noise[..., 1]
        recordings.append(CsiRecording(
            antenna_id=a,
            center_freq_hz=cfg.center_freq_hz,
            packet_rate_hz=cfg.packet_rate_hz,
            layout=layout,
            timestamps_s=times,
            values=values.astype(np.complex64),
            label=script.label,
        ))
    return CsiSample(sample_id=sample_id, recordings=recordings)


def iter_synthetic_samples(cfg: SynthConfig) -> Iterator[CsiSample]:
    """Yield the dataset's samples one by one, class-major, deterministically."""
    cfg.validate()
    for label in ActivityLabel:
        for idx in range(cfg.samples_per_class):
            sample_id = int(label) * cfg.samples_per_class + idx
            script_rng = _sample_rng(cfg, int(label), idx, 0)
            script = _script(label, script_rng, cfg.duration_s, cfg.snr_db)
            statics = [_sample_rng(cfg, int(label), idx, 1, a)
                       for a in range(cfg.antenna_count)]
            noises = [_sample_rng(cfg, int(label), idx, 2, a)
                      for a in range(cfg.antenna_count)]
            yield synthesize_sample(cfg, script, sample_id, statics, noises)


def generate_dataset(cfg: SynthConfig) -> CsiDataset:
    """Materialize the full synthetic dataset (5 * samples_per_class samples)."""
    dataset = CsiDataset(samples=list(iter_synthetic_samples(cfg)),
                         antenna_count=cfg.antenna_count)
    dataset.validate()
    return dataset
