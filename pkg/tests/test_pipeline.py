"""Fusion, metrics, splits, and small end-to-end experiment runs."""

import dataclasses

import numpy as np
import pytest

from ibis.csi import ActivityLabel
from ibis.doppler import StftConfig
from ibis.errors import (CountExceedsAntennas, EmptyInput, EmptySelection,
                         LengthMismatch, MixedSampleIds)
from ibis.nn import OptimizerConfig, TrainConfig
from ibis.pipeline import (ConfusionMatrix, DopplerSettings, ExperimentConfig,
                           ModelConfig, Prediction, ablate, antenna_sweep,
                           evaluate, majority_vote, no_svm_from_report,
                           prepare_band_inputs, run_experiment, sweep_from_report,
                           stratified_split)
from ibis.svm import SvmGrid
from ibis.synth import SynthConfig


def _pred(sample_id, antenna, label, probs=None):
    p = np.zeros(5)
    if probs is None:
        p[label] = 1.0
    else:
        p[:] = probs
    return Prediction(sample_id=sample_id, antenna_id=antenna,
                      probabilities=p, label=ActivityLabel(label))


# --- majority vote ---------------------------------------------------------


def test_strict_majority():
    preds = [_pred(1, a, lab) for a, lab in enumerate([2, 2, 3, 2])]
    assert majority_vote(preds) is ActivityLabel.WALKING


def test_tie_breaks_on_probability_mass():
    preds = [
        _pred(0, 0, 3, probs=[0, 0, 0, 0.7, 0.3]),
        _pred(0, 1, 4, probs=[0, 0, 0, 0.4, 0.6]),
        _pred(0, 2, 3, probs=[0, 0, 0, 0.7, 0.3]),
        _pred(0, 3, 4, probs=[0, 0, 0, 0.3, 0.5]),
    ]
    # Running mass 2.1, Jumping mass 1.7.
    assert majority_vote(preds) is ActivityLabel.RUNNING


def test_remaining_tie_prefers_smaller_code():
    preds = [
        _pred(0, 0, 1, probs=[0, 0.5, 0.5, 0, 0]),
        _pred(0, 1, 2, probs=[0, 0.5, 0.5, 0, 0]),
    ]
    assert majority_vote(preds) is ActivityLabel.SITTING


def test_single_antenna_identity():
    assert majority_vote([_pred(5, 0, 4)]) is ActivityLabel.JUMPING


def test_vote_is_permutation_invariant():
    preds = [_pred(1, a, lab) for a, lab in enumerate([0, 3, 3, 1])]
    rng = np.random.default_rng(0)
    for _ in range(5):
        perm = rng.permutation(len(preds))
        assert majority_vote([preds[i] for i in perm]) is majority_vote(preds)


def test_vote_errors():
    with pytest.raises(EmptyInput):
        majority_vote([])
    with pytest.raises(MixedSampleIds):
        majority_vote([_pred(1, 0, 1), _pred(2, 1, 1)])


# --- evaluate ----------------------------------------------------------------


def test_perfect_predictions():
    truth = [0, 1, 2, 3, 4] * 2
    cm, metrics = evaluate(truth, truth)
    assert metrics.accuracy == 100.0
    assert metrics.precision == 100.0
    assert metrics.recall == 100.0
    assert metrics.f1 == 100.0
    assert np.trace(cm.counts) == 10


def test_hand_computed_confusion():
    # Oracle: worked by hand. truth [0,0,1,1], pred [0,1,1,1]:
    # class 0: TP=1, FN=1, FP=0 -> precision 100, recall 50.
    cm, metrics = evaluate([0, 0, 1, 1], [0, 1, 1, 1])
    assert metrics.accuracy == 75.0
    assert metrics.per_class["precision"][0] == 100.0
    assert metrics.per_class["recall"][0] == 50.0
    assert cm.counts[0, 1] == 1
    assert cm.total == 4


def test_absent_class_scores_zero():
    truth = [4, 4, 0, 0]
    pred = [0, 0, 0, 0]
    _, metrics = evaluate(truth, pred)
    assert metrics.per_class["precision"][4] == 0.0
    assert metrics.per_class["recall"][4] == 0.0
    assert metrics.per_class["f1"][4] == 0.0


def test_metrics_identity_against_direct_match_rate():
    rng = np.random.default_rng(0)
    truth = rng.integers(0, 5, size=200)
    pred = rng.integers(0, 5, size=200)
    cm, metrics = evaluate(truth, pred)
    direct = 100.0 * float(np.mean(truth == pred))
    assert abs(metrics.accuracy - direct) < 1e-12
    assert abs(cm.accuracy() - direct) < 1e-12


def test_evaluate_length_mismatch():
    with pytest.raises(LengthMismatch):
        evaluate([0, 1], [0])
    with pytest.raises(LengthMismatch):
        evaluate([], [])


# --- splits -----------------------------------------------------------------


def test_stratified_split_hygiene_and_ratio():
    labels = np.repeat(np.arange(5), 10)
    train, test = stratified_split(labels, 0.7, seed=3)
    assert len(set(train) & set(test)) == 0
    assert len(train) == 35 and len(test) == 15
    assert np.array_equal(np.bincount(labels[train]), np.full(5, 7))


def test_split_changes_with_seed():
    labels = np.repeat(np.arange(5), 10)
    a, _ = stratified_split(labels, 0.7, seed=1)
    b, _ = stratified_split(labels, 0.7, seed=2)
    assert not np.array_equal(a, b)


# --- tiny end-to-end experiments ------------------------------------------------


def tiny_config(threads=1, reps=2):
    return ExperimentConfig(
        seed=5, repetitions=reps, bandwidths=(20,),
        doppler=DopplerSettings(stft=StftConfig(128, 64, 128, "hann")),
        model=ModelConfig(filters=2, pool_filters=2, hidden=8),
        train=TrainConfig(epochs=2, batch_size=16, learning_rate=3e-3, seed=5,
                          optimizer=OptimizerConfig(lr_decay=0.9), grad_clip=5.0),
        svm_grid=SvmGrid(kernels=("rbf",), c_values=(1.0,), gamma_values=(1.0,)),
        svm_folds=2, threads=threads,
    )


@pytest.fixture(scope="module")
def tiny_run():
    scfg = SynthConfig(samples_per_class=4, antenna_count=2, seed=9, bandwidth_mhz=20)
    cfg = tiny_config()
    return scfg, cfg, run_experiment(scfg, cfg)


def test_experiment_report_structure(tiny_run):
    _, cfg, report = tiny_run
    assert report.kind == "full"
    assert set(report.bands) == {20}
    band = report.bands[20]
    assert len(band.repetitions) == 2
    # 4 per class split 70/30 -> 3 train + 1 test per class -> 5 fused test
    # samples per repetition.
    assert band.ibis_confusion.total == 2 * 5
    for rep in band.repetitions:
        assert rep.grid is not None
        assert rep.ibis_antenna_probs.shape == (5, 2, 5)
        sums = rep.ibis_antenna_probs.sum(axis=2)
        assert np.allclose(sums, 1.0, atol=1e-9)


def test_mean_over_repetitions_is_exact(tiny_run):
    _, _, report = tiny_run
    band = report.bands[20]
    mean_acc = float(np.mean([r.ibis.accuracy for r in band.repetitions]))
    assert band.ibis.accuracy == mean_acc


def test_experiment_is_deterministic(tiny_run):
    scfg, cfg, report = tiny_run
    again = run_experiment(scfg, cfg)
    for bw in report.bands:
        assert report.bands[bw].ibis.accuracy == again.bands[bw].ibis.accuracy
        assert report.bands[bw].inception.accuracy == again.bands[bw].inception.accuracy
        assert np.array_equal(report.bands[bw].ibis_confusion.counts,
                              again.bands[bw].ibis_confusion.counts)


def test_threaded_equals_serial(tiny_run):
    scfg, cfg, report = tiny_run
    threaded = run_experiment(scfg, tiny_config(threads=2))
    assert threaded.bands[20].ibis.accuracy == report.bands[20].ibis.accuracy
    assert np.array_equal(threaded.bands[20].ibis_confusion.counts,
                          report.bands[20].ibis_confusion.counts)


def test_no_svm_reuse_matches_direct_ablation(tiny_run):
    scfg, cfg, report = tiny_run
    derived = no_svm_from_report(report, cfg)
    direct = ablate("no_svm", scfg, cfg)
    assert derived.kind == direct.kind == "no_svm"
    assert derived.accuracy(20) == direct.accuracy(20)
    assert np.array_equal(derived.bands[20].ibis_confusion.counts,
                          direct.bands[20].ibis_confusion.counts)


def test_no_doppler_ablation_runs_and_is_marked(tiny_run):
    scfg, cfg, _ = tiny_run
    report = ablate("no_doppler", scfg, cfg)
    assert report.kind == "no_doppler"
    assert set(report.bands) == {20}
    assert 0.0 <= report.accuracy(20) <= 100.0


def test_unknown_ablation_rejected(tiny_run):
    scfg, cfg, _ = tiny_run
    with pytest.raises(ValueError):
        ablate("no_everything", scfg, cfg)


def test_sweep_from_report(tiny_run):
    _, cfg, report = tiny_run
    sweep = sweep_from_report(report, [1, 2])
    assert set(sweep[20]) == {1, 2}
    band = report.bands[20]
    # k = antenna_count reproduces the report's own fusion.
    assert sweep[20][2].accuracy == band.ibis.accuracy
    # k = 1 equals single-antenna predictions scored directly.
    per_rep = []
    for r in band.repetitions:
        acc = 100.0 * float(np.mean(r.ibis_antenna_labels[:, 0] == r.test_labels))
        per_rep.append(acc)
    assert abs(sweep[20][1].accuracy - float(np.mean(per_rep))) < 1e-9


def test_sweep_errors(tiny_run):
    _, cfg, report = tiny_run
    with pytest.raises(EmptySelection):
        sweep_from_report(report, [])
    with pytest.raises(EmptySelection):
        sweep_from_report(report, [0])
    with pytest.raises(CountExceedsAntennas):
        sweep_from_report(report, [3])


def test_phase_inputs_have_subcarrier_channels():
    scfg = SynthConfig(samples_per_class=1, antenna_count=1, seed=2, bandwidth_mhz=20)
    cfg = tiny_config()
    inputs = prepare_band_inputs(scfg, cfg, with_phases=True)
    assert inputs[20].phases.shape[3] == 56  # data + pilot subcarriers at 20 MHz
    assert inputs[20].phases.shape[2] == inputs[20].traces.shape[2]
