"""End-to-end experiment orchestration.

One experiment: per bandwidth, turn every recording into a Doppler trace,
split stratified at the sample level (all antennas of a sample stay on one
side), train the hybrid classifier and the convolution-only baseline, fit
the SVM refinement stage on the training probabilities, fuse per-antenna
test predictions by majority vote, and score. Repetitions re-run the split
and training with consecutive seeds; traces are deterministic per dataset
and bandwidth, so they are computed once and shared.
"""

from __future__ import annotations

import logging
import multiprocessing
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from .csi import ActivityLabel, CsiDataset, CsiSample, extract_subband
from .doppler import DopplerConfig, StftConfig, doppler_trace, num_time_bins
from .errors import (CountExceedsAntennas, EmptyInput, EmptySelection,
                     InvariantViolation, LengthMismatch, MixedSampleIds)
from .nn import (NUM_CLASSES, TrainConfig, init_baseline, init_hybrid,
                 predict_proba, train)
from .sanitize import DEFAULT_LAMBDA, PhaseMatrix, sanitize_recording
from .svm import GridSearchResult, SvmGrid, fit_multiclass, grid_search, predict_votes
from .synth import SynthConfig, iter_synthetic_samples

log = logging.getLogger("ibis")


@dataclass
class Prediction:
    sample_id: int
    antenna_id: int
    probabilities: np.ndarray  # [5], sums to 1
    label: ActivityLabel


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # [5 x 5] ints, rows true, cols predicted

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return 100.0 * float(np.trace(self.counts)) / self.total


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    per_class: dict[str, list[float]]

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "f1": self.f1, "per_class": self.per_class,
        }


def majority_vote(predictions: list[Prediction]) -> ActivityLabel:
    """Fuse one sample's per-antenna predictions.

    Most frequent label wins; ties go to the label with the largest summed
    probability mass across antennas, then to the smallest label code.
    """
    if not predictions:
        raise EmptyInput("no predictions to fuse")
    ids = {p.sample_id for p in predictions}
    if len(ids) != 1:
        raise MixedSampleIds(f"predictions mix sample ids {sorted(ids)}")
    counts = Counter(int(p.label) for p in predictions)
    top = max(counts.values())
    tied = sorted(code for code, n in counts.items() if n == top)
    if len(tied) == 1:
        return ActivityLabel(tied[0])
    mass = {code: sum(float(p.probabilities[code]) for p in predictions) for code in tied}
    best = max(mass.values())
    winner = min(code for code in tied if mass[code] == best)
    return ActivityLabel(winner)


def evaluate(true_labels, predicted_labels) -> tuple[ConfusionMatrix, MetricsReport]:
    """Confusion counts plus macro-averaged percentage metrics.

    Classes absent from both truth and prediction contribute zeros to the
    macro averages; empty denominators score zero rather than NaN.
    """
    truth = np.asarray([int(t) for t in true_labels])
    pred = np.asarray([int(p) for p in predicted_labels])
    if truth.shape != pred.shape or truth.size == 0:
        raise LengthMismatch(
            f"need equal nonempty label vectors, got {truth.size} vs {pred.size}"
        )
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(counts, (truth, pred), 1)
    cm = ConfusionMatrix(counts=counts)

    precision, recall, f1 = [], [], []
    for cls in range(NUM_CLASSES):
        tp = counts[cls, cls]
        predicted = counts[:, cls].sum()
        actual = counts[cls, :].sum()
        p = 100.0 * tp / predicted if predicted else 0.0
        r = 100.0 * tp / actual if actual else 0.0
        f = 2 * p * r / (p + r) if (p + r) else 0.0
        precision.append(float(p))
        recall.append(float(r))
        f1.append(float(f))
    report = MetricsReport(
        accuracy=cm.accuracy(),
        precision=float(np.mean(precision)),
        recall=float(np.mean(recall)),
        f1=float(np.mean(f1)),
        per_class={"precision": precision, "recall": recall, "f1": f1},
    )
    return cm, report


# --- experiment configuration ------------------------------------------------


@dataclass(frozen=True)
class ModelConfig:
    filters: int = 16
    pool_filters: int = 16
    hidden: int = 64

    def validate(self) -> None:
        if min(self.filters, self.pool_filters, self.hidden) < 1:
            raise InvariantViolation("model sizes must be >= 1")


@dataclass(frozen=True)
class DopplerSettings:
    """Doppler parameters minus the carrier, which tracks the data."""

    reflection_factor: int = 2
    velocity_bins: int = 81
    stft: StftConfig = field(default_factory=StftConfig)

    def as_doppler_config(self, center_freq_hz: float) -> DopplerConfig:
        return DopplerConfig(
            center_freq_hz=center_freq_hz,
            reflection_factor=self.reflection_factor,
            velocity_bins=self.velocity_bins,
            stft=self.stft,
        )


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.7
    test_fraction: float = 0.3

    def validate(self) -> None:
        if not (0 < self.train_fraction < 1):
            raise InvariantViolation("train_fraction must lie in (0, 1)")
        if abs(self.train_fraction + self.test_fraction - 1.0) > 1e-9:
            raise InvariantViolation("split fractions must sum to 1")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    repetitions: int = 10
    bandwidths: tuple[int, ...] = (20, 40, 80)
    lasso_lambda: float = DEFAULT_LAMBDA
    doppler: DopplerSettings = field(default_factory=DopplerSettings)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    svm_grid: SvmGrid = field(default_factory=SvmGrid)
    svm_folds: int = 5
    split: SplitConfig = field(default_factory=SplitConfig)
    threads: int = 1

    def validate(self) -> None:
        if self.repetitions < 1:
            raise InvariantViolation("repetitions must be >= 1")
        self.model.validate()
        self.train.validate()
        self.split.validate()


# --- trace preparation ---------------------------------------------------------


@dataclass
class BandInputs:
    """Per-bandwidth network inputs: one trace per (sample, antenna)."""

    bandwidth_mhz: int
    traces: np.ndarray        # [samples x antennas x time x velocity_bins]
    phases: np.ndarray | None  # [samples x antennas x time x active_subcarriers]
    labels: np.ndarray        # [samples]
    sample_ids: np.ndarray    # [samples]

    @property
    def antenna_count(self) -> int:
        return self.traces.shape[1]


def phase_time_downsample(pm: PhaseMatrix, cfg: DopplerConfig) -> np.ndarray:
    """Sanitized phase sampled at the Doppler trace's frame centers."""
    stft_cfg = cfg.stft
    target = num_time_bins(stft_cfg, pm.packet_rate_hz)
    total = (pm.num_frames - stft_cfg.window_len) // stft_cfg.hop + 1
    start = (total - target) // 2
    centers = (start + np.arange(target)) * stft_cfg.hop + stft_cfg.window_len // 2
    return pm.values[centers]


def _doppler_cfg(cfg: ExperimentConfig, center_freq_hz: float) -> DopplerConfig:
    return cfg.doppler.as_doppler_config(center_freq_hz)


def _sample_inputs(sample: CsiSample, bandwidths, cfg: ExperimentConfig,
                   with_phases: bool):
    """Traces (and optionally phase inputs) for every (bandwidth, antenna)."""
    out = {}
    for bw in bandwidths:
        traces, phases = [], []
        for rec in sample.recordings:
            sub = extract_subband(rec, bw)
            dcfg = _doppler_cfg(cfg, sub.center_freq_hz)
            pm = sanitize_recording(sub, cfg.lasso_lambda)
            trace = doppler_trace(pm, dcfg, label=sub.label, antenna_id=sub.antenna_id)
            traces.append(trace.power.astype(np.float64))
            if with_phases:
                phases.append(phase_time_downsample(pm, dcfg))
        out[bw] = (np.stack(traces), np.stack(phases) if with_phases else None)
    return int(sample.label), int(sample.sample_id), out


_POOL_STATE: dict = {}


def _pool_init(samples, bandwidths, cfg, with_phases):
    _POOL_STATE["args"] = (samples, bandwidths, cfg, with_phases)


def _pool_task(index: int):
    samples, bandwidths, cfg, with_phases = _POOL_STATE["args"]
    return _sample_inputs(samples[index], bandwidths, cfg, with_phases)


def _synth_pool_init(synth_cfg, bandwidths, cfg, with_phases):
    _POOL_STATE["synth"] = (synth_cfg, bandwidths, cfg, with_phases)


def _synth_pool_task(index: int):
    synth_cfg, bandwidths, cfg, with_phases = _POOL_STATE["synth"]
    sample = _materialize_synth_sample(synth_cfg, index)
    return _sample_inputs(sample, bandwidths, cfg, with_phases)


def _materialize_synth_sample(synth_cfg: SynthConfig, index: int) -> CsiSample:
    from .csi import ActivityLabel as AL
    from .synth import _sample_rng, _script, synthesize_sample

    label = AL(index // synth_cfg.samples_per_class)
    idx = index % synth_cfg.samples_per_class
    script = _script(label, _sample_rng(synth_cfg, int(label), idx, 0),
                     synth_cfg.duration_s, synth_cfg.snr_db)
    statics = [_sample_rng(synth_cfg, int(label), idx, 1, a)
               for a in range(synth_cfg.antenna_count)]
    noises = [_sample_rng(synth_cfg, int(label), idx, 2, a)
              for a in range(synth_cfg.antenna_count)]
    return synthesize_sample(synth_cfg, script, index, statics, noises)


def prepare_band_inputs(data, cfg: ExperimentConfig,
                        with_phases: bool = False) -> dict[int, BandInputs]:
    """Compute every (sample, antenna, bandwidth) input exactly once."""
    bandwidths = tuple(cfg.bandwidths)
    if isinstance(data, SynthConfig):
        data.validate()
        count = 5 * data.samples_per_class
        if cfg.threads > 1:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(cfg.threads, initializer=_synth_pool_init,
                          initargs=(data, bandwidths, cfg, with_phases)) as pool:
                rows = pool.map(_synth_pool_task, range(count), chunksize=1)
        else:
            rows = [
                _sample_inputs(sample, bandwidths, cfg, with_phases)
                for sample in iter_synthetic_samples(data)
            ]
    else:
        dataset: CsiDataset = data
        dataset.validate()
        samples = dataset.samples
        if cfg.threads > 1:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(cfg.threads, initializer=_pool_init,
                          initargs=(samples, bandwidths, cfg, with_phases)) as pool:
                rows = pool.map(_pool_task, range(len(samples)), chunksize=1)
        else:
            rows = [_sample_inputs(s, bandwidths, cfg, with_phases) for s in samples]

    out = {}
    for bw in bandwidths:
        traces = np.stack([row[2][bw][0] for row in rows])
        phases = (np.stack([row[2][bw][1] for row in rows]) if with_phases else None)
        out[bw] = BandInputs(
            bandwidth_mhz=bw,
            traces=traces,
            phases=phases,
            labels=np.array([row[0] for row in rows]),
            sample_ids=np.array([row[1] for row in rows]),
        )
    return out


# --- one experiment repetition --------------------------------------------------


def stratified_split(labels: np.ndarray, train_fraction: float,
                     seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class sample split; returns (train_idx, test_idx), both sorted."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x5311])))
    train, test = [], []
    for cls in sorted(int(c) for c in np.unique(labels)):
        members = rng.permutation(np.flatnonzero(labels == cls))
        n_train = int(round(train_fraction * len(members)))
        n_train = min(max(n_train, 1), len(members) - 1)
        train.extend(members[:n_train])
        test.extend(members[n_train:])
    return np.array(sorted(train)), np.array(sorted(test))


@dataclass
class RepetitionResult:
    rep: int
    ibis: MetricsReport
    inception: MetricsReport
    ibis_confusion: ConfusionMatrix
    inception_confusion: ConfusionMatrix
    grid: GridSearchResult | None
    test_sample_ids: np.ndarray
    test_labels: np.ndarray
    ibis_antenna_labels: np.ndarray        # [test_samples x antennas]
    ibis_antenna_probs: np.ndarray         # [test_samples x antennas x 5]
    inception_antenna_labels: np.ndarray
    inception_antenna_probs: np.ndarray


def _fuse(sample_ids, antenna_labels, antenna_probs) -> list[ActivityLabel]:
    fused = []
    for s in range(len(sample_ids)):
        preds = [
            Prediction(sample_id=int(sample_ids[s]), antenna_id=a,
                       probabilities=antenna_probs[s, a],
                       label=ActivityLabel(int(antenna_labels[s, a])))
            for a in range(antenna_labels.shape[1])
        ]
        fused.append(majority_vote(preds))
    return fused


def run_repetition(inputs: BandInputs, cfg: ExperimentConfig, rep: int,
                   use_svm: bool = True, use_traces: bool = True) -> RepetitionResult:
    seed = cfg.seed + rep
    # Cube-root compression of the normalized power: the informative
    # sidebands sit orders of magnitude below the unit peak, and the
    # classifiers converge far faster on the compressed dynamic range.
    x_all = np.cbrt(inputs.traces) if use_traces else inputs.phases
    n_samples, antennas = x_all.shape[0], x_all.shape[1]
    train_idx, test_idx = stratified_split(inputs.labels, cfg.split.train_fraction, seed)
    overlap = set(inputs.sample_ids[train_idx]) & set(inputs.sample_ids[test_idx])
    if overlap:
        raise InvariantViolation(f"samples {sorted(overlap)} appear in both splits")

    def flat(idx):
        x = x_all[idx].reshape(-1, *x_all.shape[2:])
        y = np.repeat(inputs.labels[idx], antennas)
        return x, y

    x_train, y_train = flat(train_idx)
    # Standardize channels on training statistics; sigma floors at 1e-6 so
    # dead channels (guard-adjacent bins, the unit DC column) stay finite.
    mu = x_train.mean(axis=(0, 1))
    sigma = np.maximum(x_train.std(axis=(0, 1)), 1e-6)
    x_train = (x_train - mu) / sigma
    channels = x_train.shape[2]
    tcfg = replace(cfg.train, seed=seed)

    hybrid = init_hybrid(channels, cfg.model.filters, cfg.model.pool_filters,
                         cfg.model.hidden, seed=seed)
    hybrid, _ = train(hybrid, (x_train, y_train), tcfg)
    baseline = init_baseline(channels, cfg.model.filters, cfg.model.pool_filters,
                             seed=seed)
    baseline, _ = train(baseline, (x_train, y_train), tcfg)

    grid_result = None
    svm_model = None
    if use_svm:
        train_probs = predict_proba(hybrid, x_train)
        grid_result = grid_search((train_probs, y_train), cfg.svm_grid,
                                  k=cfg.svm_folds, seed=seed)
        svm_model = fit_multiclass(train_probs, y_train, grid_result.best)

    x_test = x_all[test_idx]  # [S x A x T x C]
    test_labels = inputs.labels[test_idx]
    test_ids = inputs.sample_ids[test_idx]
    flat_test = (x_test.reshape(-1, *x_test.shape[2:]) - mu) / sigma

    ibis_probs = predict_proba(hybrid, flat_test).reshape(len(test_idx), antennas, -1)
    if use_svm:
        svm_labels, _, _ = predict_votes(svm_model, ibis_probs.reshape(-1, NUM_CLASSES))
        ibis_labels = svm_labels.reshape(len(test_idx), antennas)
    else:
        ibis_labels = ibis_probs.argmax(axis=2)

    base_probs = predict_proba(baseline, flat_test).reshape(len(test_idx), antennas, -1)
    base_labels = base_probs.argmax(axis=2)

    ibis_fused = _fuse(test_ids, ibis_labels, ibis_probs)
    base_fused = _fuse(test_ids, base_labels, base_probs)
    ibis_cm, ibis_metrics = evaluate(test_labels, ibis_fused)
    base_cm, base_metrics = evaluate(test_labels, base_fused)

    return RepetitionResult(
        rep=rep, ibis=ibis_metrics, inception=base_metrics,
        ibis_confusion=ibis_cm, inception_confusion=base_cm, grid=grid_result,
        test_sample_ids=test_ids, test_labels=test_labels,
        ibis_antenna_labels=ibis_labels, ibis_antenna_probs=ibis_probs,
        inception_antenna_labels=base_labels, inception_antenna_probs=base_probs,
    )


# --- full experiment --------------------------------------------------------------


@dataclass
class BandReport:
    bandwidth_mhz: int
    ibis: MetricsReport
    inception: MetricsReport
    ibis_confusion: ConfusionMatrix     # counts summed over repetitions
    inception_confusion: ConfusionMatrix
    repetitions: list[RepetitionResult]


@dataclass
class ExperimentReport:
    kind: str  # full | no_doppler | no_svm
    seed: int
    repetitions: int
    bands: dict[int, BandReport]
    antenna_count: int

    def accuracy(self, bw: int, model: str = "ibis") -> float:
        return getattr(self.bands[bw], model).accuracy


def _mean_metrics(reports: list[MetricsReport]) -> MetricsReport:
    def mean(getter):
        return float(np.mean([getter(r) for r in reports]))

    per_class = {
        key: [float(np.mean([r.per_class[key][c] for r in reports]))
              for c in range(NUM_CLASSES)]
        for key in ("precision", "recall", "f1")
    }
    return MetricsReport(
        accuracy=mean(lambda r: r.accuracy),
        precision=mean(lambda r: r.precision),
        recall=mean(lambda r: r.recall),
        f1=mean(lambda r: r.f1),
        per_class=per_class,
    )


_REP_STATE: dict = {}


def _rep_pool_init(band_inputs, cfg, use_svm, use_traces):
    _REP_STATE["args"] = (band_inputs, cfg, use_svm, use_traces)


def _rep_pool_task(task: tuple[int, int]):
    band_inputs, cfg, use_svm, use_traces = _REP_STATE["args"]
    bw, rep = task
    return bw, run_repetition(band_inputs[bw], cfg, rep, use_svm, use_traces)


def _run_all_repetitions(band_inputs: dict[int, BandInputs], cfg: ExperimentConfig,
                         use_svm: bool, use_traces: bool):
    tasks = [(bw, rep) for bw in cfg.bandwidths for rep in range(cfg.repetitions)]
    if cfg.threads > 1:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(cfg.threads, initializer=_rep_pool_init,
                      initargs=(band_inputs, cfg, use_svm, use_traces)) as pool:
            rows = pool.map(_rep_pool_task, tasks, chunksize=1)
    else:
        rows = [_rep_pool_task_serial(band_inputs, cfg, use_svm, use_traces, t)
                for t in tasks]
    grouped: dict[int, list[RepetitionResult]] = {bw: [] for bw in cfg.bandwidths}
    for bw, result in rows:
        grouped[bw].append(result)
    for bw in grouped:
        grouped[bw].sort(key=lambda r: r.rep)
    return grouped


def _rep_pool_task_serial(band_inputs, cfg, use_svm, use_traces, task):
    bw, rep = task
    return bw, run_repetition(band_inputs[bw], cfg, rep, use_svm, use_traces)


def _assemble(kind: str, cfg: ExperimentConfig, antenna_count: int,
              grouped: dict[int, list[RepetitionResult]]) -> ExperimentReport:
    bands = {}
    for bw, reps in grouped.items():
        bands[bw] = BandReport(
            bandwidth_mhz=bw,
            ibis=_mean_metrics([r.ibis for r in reps]),
            inception=_mean_metrics([r.inception for r in reps]),
            ibis_confusion=ConfusionMatrix(
                counts=np.sum([r.ibis_confusion.counts for r in reps], axis=0)),
            inception_confusion=ConfusionMatrix(
                counts=np.sum([r.inception_confusion.counts for r in reps], axis=0)),
            repetitions=reps,
        )
    return ExperimentReport(kind=kind, seed=cfg.seed, repetitions=cfg.repetitions,
                            bands=bands, antenna_count=antenna_count)


def run_experiment(data, cfg: ExperimentConfig,
                   inputs: dict[int, BandInputs] | None = None) -> ExperimentReport:
    """Full pipeline over every configured bandwidth and repetition.

    Pass precomputed band inputs to share trace preparation between the
    main run and ablations.
    """
    cfg.validate()
    band_inputs = inputs or prepare_band_inputs(data, cfg, with_phases=False)
    antenna_count = next(iter(band_inputs.values())).antenna_count
    log.info("inputs ready: %s bandwidths, %d samples",
             list(band_inputs), len(next(iter(band_inputs.values())).labels))
    grouped = _run_all_repetitions(band_inputs, cfg, use_svm=True, use_traces=True)
    return _assemble("full", cfg, antenna_count, grouped)


def ablate(kind: str, data, cfg: ExperimentConfig,
           inputs: dict[int, BandInputs] | None = None) -> ExperimentReport:
    """Re-run the experiment with one stage removed.

    no_doppler feeds the time-downsampled sanitized phase straight into the
    network; no_svm classifies by the hybrid's own argmax.
    """
    cfg.validate()
    if kind == "no_doppler":
        if inputs is None or any(b.phases is None for b in inputs.values()):
            inputs = prepare_band_inputs(data, cfg, with_phases=True)
        grouped = _run_all_repetitions(inputs, cfg, use_svm=True, use_traces=False)
    elif kind == "no_svm":
        if inputs is None:
            inputs = prepare_band_inputs(data, cfg, with_phases=False)
        grouped = _run_all_repetitions(inputs, cfg, use_svm=False, use_traces=True)
    else:
        raise ValueError(f"unknown ablation {kind!r}")
    antenna_count = next(iter(inputs.values())).antenna_count
    return _assemble(kind, cfg, antenna_count, grouped)


def no_svm_from_report(report: ExperimentReport, cfg: ExperimentConfig) -> ExperimentReport:
    """Derive the no_svm ablation from a finished full run.

    Training does not depend on the SVM stage, so re-scoring the stored
    per-antenna probabilities by argmax reproduces ablate("no_svm", ...)
    exactly without retraining.
    """
    bands = {}
    for bw, band in report.bands.items():
        reps = []
        for r in band.repetitions:
            labels = r.ibis_antenna_probs.argmax(axis=2)
            fused = _fuse(r.test_sample_ids, labels, r.ibis_antenna_probs)
            cm, metrics = evaluate(r.test_labels, fused)
            reps.append(RepetitionResult(
                rep=r.rep, ibis=metrics, inception=r.inception,
                ibis_confusion=cm, inception_confusion=r.inception_confusion,
                grid=None, test_sample_ids=r.test_sample_ids,
                test_labels=r.test_labels, ibis_antenna_labels=labels,
                ibis_antenna_probs=r.ibis_antenna_probs,
                inception_antenna_labels=r.inception_antenna_labels,
                inception_antenna_probs=r.inception_antenna_probs,
            ))
        bands[bw] = _assemble("no_svm", cfg, report.antenna_count, {bw: reps}).bands[bw]
    return ExperimentReport(kind="no_svm", seed=report.seed,
                            repetitions=report.repetitions, bands=bands,
                            antenna_count=report.antenna_count)


# --- antenna sweep ------------------------------------------------------------------


def sweep_from_report(report: ExperimentReport,
                      counts: list[int]) -> dict[int, dict[int, MetricsReport]]:
    """Re-fuse stored per-antenna predictions using only the first k antennas.

    Returns {bandwidth: {k: mean MetricsReport}}.
    """
    if not counts:
        raise EmptySelection("no antenna counts requested")
    for k in counts:
        if k < 1:
            raise EmptySelection(f"cannot fuse {k} antennas")
        if k > report.antenna_count:
            raise CountExceedsAntennas(
                f"{k} antennas requested, dataset has {report.antenna_count}"
            )
    out: dict[int, dict[int, MetricsReport]] = {}
    for bw, band in report.bands.items():
        out[bw] = {}
        for k in counts:
            per_rep = []
            for r in band.repetitions:
                fused = _fuse(r.test_sample_ids, r.ibis_antenna_labels[:, :k],
                              r.ibis_antenna_probs[:, :k])
                _, metrics = evaluate(r.test_labels, fused)
                per_rep.append(metrics)
            out[bw][k] = _mean_metrics(per_rep)
    return out


def antenna_sweep(data, cfg: ExperimentConfig,
                  counts: list[int]) -> dict[int, dict[int, MetricsReport]]:
    """Run the full experiment, then score fusion over antenna prefixes."""
    if not counts:
        raise EmptySelection("no antenna counts requested")
    report = run_experiment(data, cfg)
    return sweep_from_report(report, counts)
