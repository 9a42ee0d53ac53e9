"""Strict JSON run configuration.

Unknown keys are rejected rather than ignored, every sub-config invariant
is checked at load, and the fully defaulted document is echoed back so a
run directory always carries enough to reproduce itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from typing import Any

from .doppler import StftConfig
from .errors import InvariantViolation, ParseError, UnknownKey
from .nn import OptimizerConfig, TrainConfig
from .pipeline import DopplerSettings, ExperimentConfig, ModelConfig, SplitConfig
from .svm import KERNELS, SvmGrid
from .synth import SynthConfig

_DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "repetitions": 10,
    "bandwidths": [20, 40, 80],
    "threads": 1,
    "synth": {
        "packet_rate_hz": 400.0,
        "center_freq_hz": 5.18e9,
        "bandwidth_mhz": 80,
        "antenna_count": 4,
        "samples_per_class": 10,
        "snr_db": 20.0,
        "duration_s": 4.5,
        "reflection_factor": 2,
    },
    "doppler": {
        "reflection_factor": 2,
        "velocity_bins": 81,
        "stft": {"window_len": 128, "hop": 32, "fft_len": 256, "window_kind": "hann"},
    },
    "sanitizer": {"lambda": 0.01},
    "model": {"filters": 16, "pool_filters": 16, "hidden": 64},
    "train": {
        "epochs": 30,
        "batch_size": 16,
        "learning_rate": 1e-3,
        "grad_clip": 0.0,
        "optimizer": {
            "kind": "adam", "beta1": 0.9, "beta2": 0.999, "eps": 1e-8,
            "momentum": 0.0, "lr_decay": 1.0,
        },
    },
    "svm": {
        "kernels": list(KERNELS),
        "c_values": [0.01, 0.1, 1.0],
        "gamma_values": [0.01, 0.1, 1.0],
        "folds": 5,
    },
    "split": {"train_fraction": 0.7, "test_fraction": 0.3},
}


def _merge(defaults: Any, given: Any, path: str) -> Any:
    if isinstance(defaults, dict):
        if not isinstance(given, dict):
            raise InvariantViolation(f"{path or 'config'} must be an object")
        for key in given:
            if key not in defaults:
                raise UnknownKey(f"unknown key {key!r}" + (f" in {path}" if path else ""))
        return {
            key: _merge(defaults[key], given[key], f"{path}.{key}" if path else key)
            if key in given else json.loads(json.dumps(defaults[key]))
            for key in defaults
        }
    return given


@dataclass
class RunConfig:
    """The resolved experiment document plus typed views of each section."""

    document: dict

    @property
    def seed(self) -> int:
        return int(self.document["seed"])

    def synth_config(self) -> SynthConfig:
        s = self.document["synth"]
        snr = s["snr_db"]
        return SynthConfig(
            packet_rate_hz=float(s["packet_rate_hz"]),
            center_freq_hz=float(s["center_freq_hz"]),
            bandwidth_mhz=int(s["bandwidth_mhz"]),
            antenna_count=int(s["antenna_count"]),
            samples_per_class=int(s["samples_per_class"]),
            seed=self.seed,
            snr_db=None if snr is None else float(snr),
            duration_s=float(s["duration_s"]),
            reflection_factor=int(s["reflection_factor"]),
        )

    def doppler_settings(self) -> DopplerSettings:
        d = self.document["doppler"]
        st = d["stft"]
        return DopplerSettings(
            reflection_factor=int(d["reflection_factor"]),
            velocity_bins=int(d["velocity_bins"]),
            stft=StftConfig(
                window_len=int(st["window_len"]), hop=int(st["hop"]),
                fft_len=int(st["fft_len"]), window_kind=str(st["window_kind"]),
            ),
        )

    def experiment_config(self) -> ExperimentConfig:
        doc = self.document
        t = doc["train"]
        o = t["optimizer"]
        return ExperimentConfig(
            seed=self.seed,
            repetitions=int(doc["repetitions"]),
            bandwidths=tuple(int(b) for b in doc["bandwidths"]),
            lasso_lambda=float(doc["sanitizer"]["lambda"]),
            doppler=self.doppler_settings(),
            model=ModelConfig(
                filters=int(doc["model"]["filters"]),
                pool_filters=int(doc["model"]["pool_filters"]),
                hidden=int(doc["model"]["hidden"]),
            ),
            train=TrainConfig(
                epochs=int(t["epochs"]), batch_size=int(t["batch_size"]),
                learning_rate=float(t["learning_rate"]), seed=self.seed,
                optimizer=OptimizerConfig(
                    kind=str(o["kind"]), beta1=float(o["beta1"]),
                    beta2=float(o["beta2"]), eps=float(o["eps"]),
                    momentum=float(o["momentum"]), lr_decay=float(o["lr_decay"]),
                ),
                grad_clip=float(t["grad_clip"]),
            ),
            svm_grid=SvmGrid(
                kernels=tuple(doc["svm"]["kernels"]),
                c_values=tuple(float(c) for c in doc["svm"]["c_values"]),
                gamma_values=tuple(float(g) for g in doc["svm"]["gamma_values"]),
            ),
            svm_folds=int(doc["svm"]["folds"]),
            split=SplitConfig(
                train_fraction=float(doc["split"]["train_fraction"]),
                test_fraction=float(doc["split"]["test_fraction"]),
            ),
            threads=int(doc["threads"]),
        )

    def validate(self) -> None:
        doc = self.document
        def check(cond: bool, path: str, msg: str) -> None:
            if not cond:
                raise InvariantViolation(f"{path}: {msg}")

        check(doc["repetitions"] >= 1, "repetitions", "must be >= 1")
        check(all(b in (20, 40, 80) for b in doc["bandwidths"]),
              "bandwidths", "entries must be one of 20/40/80")
        check(len(doc["bandwidths"]) >= 1, "bandwidths", "must not be empty")
        check(doc["threads"] >= 1, "threads", "must be >= 1")
        check(doc["sanitizer"]["lambda"] >= 0, "sanitizer.lambda", "must be >= 0")
        for name, val in (("c_values", doc["svm"]["c_values"]),
                          ("gamma_values", doc["svm"]["gamma_values"])):
            for i, v in enumerate(val):
                check(v > 0, f"svm.{name}[{i}]", "must be > 0")
        for k in doc["svm"]["kernels"]:
            check(k in KERNELS, "svm.kernels", f"unknown kernel {k!r}")
        check(doc["svm"]["folds"] >= 2, "svm.folds", "must be >= 2")
        try:
            self.synth_config().validate()
            self.experiment_config().validate()
            # DopplerConfig invariants need a carrier; any positive one works.
            self.doppler_settings().as_doppler_config(5e9).validate()
        except (ValueError, InvariantViolation) as exc:
            raise InvariantViolation(str(exc)) from exc


def resolve_config(document: dict) -> RunConfig:
    """Fill defaults, reject unknown keys, validate invariants."""
    merged = _merge(_DEFAULTS, document, "")
    cfg = RunConfig(document=merged)
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc}") from exc
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(document, dict):
        raise ParseError("config root must be a JSON object")
    return resolve_config(document)


def default_config() -> RunConfig:
    return resolve_config({})
