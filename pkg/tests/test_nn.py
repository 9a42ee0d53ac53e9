"""Network building blocks: forward semantics, exact gradients, training."""

import numpy as np
import pytest

from ibis.errors import EmptyDataset, ShapeMismatch
from ibis.nn import (BaselineModel, OptimizerConfig, TrainConfig, analytic_gradients,
                     bilstm_forward, grad_check, inception_forward, init_baseline,
                     init_hybrid, max_relative_error, numeric_gradients,
                     parse_checkpoint, predict_proba, train, write_checkpoint)
from ibis.nn.layers import relu
from ibis.svm import SvmHyperParams, fit_multiclass


def small_model(seed=0, channels=6, hidden=4):
    return init_hybrid(channels=channels, filters=2, pool_filters=2,
                       hidden=hidden, seed=seed)


# --- inception block ---------------------------------------------------------


def test_zero_trace_gives_relu_bias():
    m = small_model()
    p = m.inception
    p.b3[:] = [0.5, -0.5]
    p.b5[:] = [1.0, 2.0]
    p.b7[:] = [-1.0, 0.25]
    p.bp[:] = [0.0, 3.0]
    out = inception_forward(np.zeros((9, 6)), p)
    expected = relu(np.concatenate([p.b3, p.b5, p.b7, p.bp]))
    assert np.allclose(out, np.tile(expected, (9, 1)))


def test_delta_kernel_reproduces_input_channel():
    m = init_hybrid(channels=1, filters=1, pool_filters=1, hidden=2, seed=0)
    p = m.inception
    for arr in (p.w3, p.w5, p.w7, p.wp, p.b3, p.b5, p.b7, p.bp):
        arr[...] = 0.0
    p.w3[1, 0, 0] = 1.0  # centered delta
    x = np.random.default_rng(0).random((12, 1))  # nonnegative input
    out = inception_forward(x, p)
    assert np.allclose(out[:, 0], x[:, 0])


def _naive_inception(x, p):
    """Oracle: nested-loop same-padded convolutions plus the pool branch."""
    steps, channels = x.shape
    outs = []
    for w, b in ((p.w3, p.b3), (p.w5, p.b5), (p.w7, p.b7)):
        k = w.shape[0]
        pad = k // 2
        branch = np.zeros((steps, w.shape[2]))
        for t in range(steps):
            for f in range(w.shape[2]):
                acc = b[f]
                for d in range(k):
                    src = t + d - pad
                    if 0 <= src < steps:
                        for c in range(channels):
                            acc += w[d, c, f] * x[src, c]
                branch[t, f] = acc
        outs.append(np.maximum(branch, 0.0))
    pooled = np.zeros_like(x)
    for t in range(steps):
        lo, hi = max(0, t - 1), min(steps, t + 2)
        pooled[t] = x[lo:hi].max(axis=0)
    outs.append(np.maximum(pooled @ p.wp + p.bp, 0.0))
    return np.concatenate(outs, axis=1)


def test_inception_matches_naive_oracle():
    m = small_model(seed=3)
    x = np.random.default_rng(4).standard_normal((10, 6))
    ours = inception_forward(x, m.inception)
    oracle = _naive_inception(x, m.inception)
    assert np.abs(ours - oracle).max() < 1e-10


def test_inception_shape_mismatch():
    m = small_model()
    with pytest.raises(ShapeMismatch):
        inception_forward(np.zeros((5, 7)), m.inception)


def test_translation_equivariance_interior():
    m = small_model(seed=1)
    rng = np.random.default_rng(2)
    x = rng.standard_normal((64, 6))
    shift = 5
    shifted = np.roll(x, shift, axis=0)
    y = inception_forward(x, m.inception)
    y_shifted = inception_forward(shifted, m.inception)
    interior = slice(8, 56)
    assert np.allclose(y_shifted[interior], y[8 - shift:56 - shift], atol=1e-12)


# --- bilstm head --------------------------------------------------------------


def test_probabilities_sum_to_one():
    m = small_model(seed=5)
    feats = inception_forward(np.random.default_rng(0).random((7, 6)), m.inception)
    probs = bilstm_forward(feats, m.bilstm, m.head)
    assert abs(probs.sum() - 1.0) < 1e-12
    assert np.all(probs > 0)


def test_softmax_is_a_probability_vector_for_extreme_logits():
    from ibis.nn.layers import softmax
    logits = np.array([[1e8, -1e8, 0.0, 3.0, -7.0],
                       [-745.0, 745.0, 0.0, 0.0, 0.0]])
    probs = softmax(logits)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(probs >= 0.0)
    assert np.all(np.isfinite(probs))


def test_single_step_sequence():
    m = small_model()
    feats = inception_forward(np.random.default_rng(1).random((1, 6)), m.inception)
    probs = bilstm_forward(feats, m.bilstm, m.head)
    assert probs.shape == (5,)
    assert abs(probs.sum() - 1.0) < 1e-12


def test_direction_symmetry():
    # Oracle: reversing time while swapping the direction parameter sets
    # (and the matching head halves) must reproduce the output exactly.
    m = small_model(seed=7)
    seq = np.random.default_rng(8).standard_normal((9, m.inception.out_channels))
    base = bilstm_forward(seq, m.bilstm, m.head)

    from ibis.nn import BiLstmParams, DenseParams
    swapped = BiLstmParams(
        fwd_wx=m.bilstm.bwd_wx, fwd_wh=m.bilstm.bwd_wh, fwd_b=m.bilstm.bwd_b,
        bwd_wx=m.bilstm.fwd_wx, bwd_wh=m.bilstm.fwd_wh, bwd_b=m.bilstm.fwd_b,
    )
    hidden = m.bilstm.hidden
    head = DenseParams(w=np.concatenate([m.head.w[hidden:], m.head.w[:hidden]]),
                       b=m.head.b)
    mirrored = bilstm_forward(seq[::-1], swapped, head)
    assert np.allclose(base, mirrored, atol=1e-12)


# --- gradients ------------------------------------------------------------------


def test_grad_check_random_models():
    for seed in range(3):
        m = small_model(seed=seed)
        trace = np.random.default_rng(seed).random((8, 6))
        assert grad_check(m, (trace, seed % 5)) < 1e-6


def test_grad_check_all_zero_weights():
    m = small_model(seed=0)
    for v in m.parameters().values():
        v[...] = 0.0
    trace = np.random.default_rng(1).random((8, 6))
    assert grad_check(m, (trace, 2)) < 1e-6


def test_grad_check_baseline_model():
    m = init_baseline(channels=6, filters=2, pool_filters=2, seed=0)
    trace = np.random.default_rng(2).random((8, 6))
    assert grad_check(m, (trace, 1)) < 1e-6


def test_corrupted_gradient_detected():
    m = small_model(seed=0)
    x = np.random.default_rng(3).random((8, 6))[np.newaxis]
    y = np.array([1])
    ga = analytic_gradients(m, x, y)
    gn = numeric_gradients(m, x, y)
    assert max_relative_error(ga, gn) < 1e-6
    ga["inception.w3"] = ga["inception.w3"] * 2.0
    assert max_relative_error(ga, gn) > 0.3


# --- training ----------------------------------------------------------------------


def _toy_dataset(n_per_class=4, steps=12, channels=6, seed=0):
    rng = np.random.default_rng(seed)
    traces, labels = [], []
    for cls in range(5):
        for _ in range(n_per_class):
            t = np.zeros((steps, channels))
            t[:, cls] = 1.0 + 0.01 * rng.standard_normal(steps)
            traces.append(t)
            labels.append(cls)
    return list(zip(traces, labels))


def test_training_fits_separable_toy():
    data = _toy_dataset()
    m = small_model(seed=0, hidden=6)
    cfg = TrainConfig(epochs=50, batch_size=4, learning_rate=1e-2, seed=0)
    m, history = train(m, data, cfg)
    x = np.stack([t for t, _ in data])
    y = np.array([l for _, l in data])
    acc = (predict_proba(m, x).argmax(axis=1) == y).mean()
    assert acc == 1.0
    assert history[-1] < history[0]
    assert len(history) == 50


def test_zero_learning_rate_keeps_loss_constant():
    data = _toy_dataset()
    m = small_model(seed=1)
    before = {k: v.copy() for k, v in m.parameters().items()}
    _, history = train(m, data, TrainConfig(epochs=5, batch_size=7, learning_rate=0.0, seed=3))
    # Parameters must be untouched; the epoch means agree up to batch
    # summation order.
    for k, v in m.parameters().items():
        assert np.array_equal(v, before[k])
    assert np.allclose(history, history[0], rtol=0, atol=1e-12)


def test_training_is_deterministic():
    data = _toy_dataset()
    cfg = TrainConfig(epochs=4, batch_size=4, learning_rate=5e-3, seed=9)
    m1, h1 = train(small_model(seed=2), data, cfg)
    m2, h2 = train(small_model(seed=2), data, cfg)
    assert h1 == h2
    for a, b in zip(m1.parameters().values(), m2.parameters().values()):
        assert np.array_equal(a, b)


def test_empty_dataset_rejected():
    with pytest.raises(EmptyDataset):
        train(small_model(), [], TrainConfig(epochs=1))


def test_sgd_momentum_path():
    data = _toy_dataset(n_per_class=2)
    cfg = TrainConfig(epochs=3, batch_size=5, learning_rate=1e-2, seed=0,
                      optimizer=OptimizerConfig(kind="sgd", momentum=0.9))
    _, history = train(small_model(seed=4), data, cfg)
    assert len(history) == 3


def test_predict_proba_preserves_order():
    m = small_model(seed=6)
    x = np.random.default_rng(7).random((5, 8, 6))
    batch = predict_proba(m, x)
    singles = np.stack([predict_proba(m, x[i]) for i in range(5)])
    assert np.allclose(batch, singles, atol=1e-12)
    two_stage = np.stack([
        bilstm_forward(inception_forward(x[i], m.inception), m.bilstm, m.head)
        for i in range(5)
    ])
    assert np.allclose(batch, two_stage, atol=1e-12)


# --- checkpoint --------------------------------------------------------------------


def test_checkpoint_round_trip_with_svm():
    m = small_model(seed=11)
    rng = np.random.default_rng(12)
    probs = rng.dirichlet(np.ones(5), size=40)
    labels = np.repeat(np.arange(5), 8)
    svm = fit_multiclass(probs, labels, SvmHyperParams(C=1.0, gamma=0.5, kernel="rbf"))
    blob = write_checkpoint(m, svm)
    m2, svm2 = parse_checkpoint(blob)
    for (ka, va), (kb, vb) in zip(m.parameters().items(), m2.parameters().items()):
        assert ka == kb
        assert np.array_equal(va, vb)
    assert svm2.hyper == svm.hyper
    for pair in svm.models:
        assert np.array_equal(svm.models[pair].support_vectors,
                              svm2.models[pair].support_vectors)
        assert np.array_equal(svm.models[pair].dual_coefs,
                              svm2.models[pair].dual_coefs)
        assert svm.models[pair].bias == svm2.models[pair].bias
    assert write_checkpoint(m2, svm2) == blob


def test_checkpoint_round_trip_baseline():
    m = init_baseline(channels=5, filters=3, pool_filters=2, seed=1)
    m2, svm2 = parse_checkpoint(write_checkpoint(m))
    assert isinstance(m2, BaselineModel)
    assert svm2 is None
    for a, b in zip(m.parameters().values(), m2.parameters().values()):
        assert np.array_equal(a, b)
