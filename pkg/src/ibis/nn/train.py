"""Training loop, optimizers, and the finite-difference gradient checker."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyDataset
from .layers import cross_entropy, softmax_xent_backward


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.0
    lr_decay: float = 1.0  # per-epoch multiplier on the learning rate

    def validate(self) -> None:
        if self.kind not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if not (0 < self.lr_decay <= 1):
            raise ValueError("lr_decay must lie in (0, 1]")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 1e-3
    seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    grad_clip: float = 0.0  # global-norm ceiling, 0 disables

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.grad_clip < 0:
            raise ValueError("grad_clip must be >= 0")
        self.optimizer.validate()


def _clip_gradients(grads: dict[str, np.ndarray], ceiling: float) -> None:
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > ceiling:
        scale = ceiling / total
        for g in grads.values():
            g *= scale


def _as_arrays(dataset) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(dataset, tuple) and len(dataset) == 2:
        return np.asarray(dataset[0], dtype=np.float64), np.asarray(dataset[1])
    pairs = list(dataset)
    if not pairs:
        raise EmptyDataset("training dataset is empty")
    traces = [np.asarray(getattr(t, "power", t), dtype=np.float64) for t, _ in pairs]
    labels = [int(y) for _, y in pairs]
    return np.stack(traces), np.asarray(labels)


class _Adam:
    def __init__(self, params: dict[str, np.ndarray], cfg: OptimizerConfig, lr: float):
        self.cfg, self.lr, self.t = cfg, lr, 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        c = self.cfg
        self.t += 1
        bias1 = 1.0 - c.beta1 ** self.t
        bias2 = 1.0 - c.beta2 ** self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = c.beta1 * self.m[k] + (1.0 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1.0 - c.beta2) * g * g
            p -= self.lr * (self.m[k] / bias1) / (np.sqrt(self.v[k] / bias2) + c.eps)


class _Sgd:
    def __init__(self, params: dict[str, np.ndarray], cfg: OptimizerConfig, lr: float):
        self.cfg, self.lr = cfg, lr
        self.vel = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for k, p in params.items():
            self.vel[k] = self.cfg.momentum * self.vel[k] - self.lr * grads[k]
            p += self.vel[k]


def train(model, dataset, cfg: TrainConfig):
    """Minimize mean cross-entropy in place. Returns (model, loss_history).

    The per-epoch shuffle is drawn from the seed stream alone, so a fixed
    (dataset, config) pair reproduces training bitwise.
    """
    cfg.validate()
    x, y = _as_arrays(dataset)
    if len(x) == 0:
        raise EmptyDataset("training dataset is empty")
    n = len(x)
    params = model.parameters()
    opt_cls = _Adam if cfg.optimizer.kind == "adam" else _Sgd
    opt = opt_cls(params, cfg.optimizer, cfg.learning_rate)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 0x5EED])))

    history = []
    for epoch in range(cfg.epochs):
        opt.lr = cfg.learning_rate * cfg.optimizer.lr_decay ** epoch
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            probs, cache = model.forward(x[idx])
            total += cross_entropy(probs, y[idx]) * len(idx)
            grads = model.backward(cache, softmax_xent_backward(probs, y[idx]))
            if cfg.grad_clip > 0:
                _clip_gradients(grads, cfg.grad_clip)
            opt.step(params, grads)
        history.append(total / n)
    return model, history


def model_loss(model, x: np.ndarray, y: np.ndarray) -> float:
    probs, _ = model.forward(x)
    return cross_entropy(probs, y)


def analytic_gradients(model, x: np.ndarray, y: np.ndarray) -> dict[str, np.ndarray]:
    probs, cache = model.forward(x)
    return model.backward(cache, softmax_xent_backward(probs, y))


def _cast_model_params(model, dtype):
    import copy

    clone = copy.deepcopy(model)
    for container in (getattr(clone, "inception", None),
                      getattr(clone, "bilstm", None),
                      getattr(clone, "head", None)):
        if container is None:
            continue
        for name, value in vars(container).items():
            if isinstance(value, np.ndarray):
                setattr(container, name, value.astype(dtype))
    return clone


def _loss_scalar(model, x: np.ndarray, y: np.ndarray):
    """Cross-entropy without demoting the evaluation dtype."""
    probs, _ = model.forward(x)
    picked = probs[np.arange(len(y)), y]
    return -np.mean(np.log(np.maximum(picked, 1e-300)))


def numeric_gradients(model, x: np.ndarray, y: np.ndarray,
                      eps: float = 1e-5) -> dict[str, np.ndarray]:
    """Central finite differences of the loss over every parameter element.

    The difference quotient is evaluated in extended precision so the
    oracle's own rounding noise sits well below the tolerances it is used
    to enforce; the model under test stays float64.
    """
    work = _cast_model_params(model, np.longdouble)
    x_hi = np.asarray(x, dtype=np.longdouble)
    eps_hi = np.longdouble(eps)
    grads = {}
    for name, p in work.parameters().items():
        g = np.zeros(p.shape)
        flat_p = p.ravel()
        flat_g = g.ravel()
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + eps_hi
            hi = _loss_scalar(work, x_hi, y)
            flat_p[i] = orig - eps_hi
            lo = _loss_scalar(work, x_hi, y)
            flat_p[i] = orig
            flat_g[i] = float((hi - lo) / (2.0 * eps_hi))
        grads[name] = g
    return grads


def max_relative_error(analytic: dict[str, np.ndarray],
                       numeric: dict[str, np.ndarray]) -> float:
    worst = 0.0
    for name, ga in analytic.items():
        gn = numeric[name]
        denom = np.maximum(1e-8, np.abs(ga) + np.abs(gn))
        worst = max(worst, float((np.abs(ga - gn) / denom).max(initial=0.0)))
    return worst


def grad_check(model, sample, eps: float = 1e-5) -> float:
    """Worst relative disagreement between analytic and numeric gradients
    of the cross-entropy loss on one labeled sample."""
    trace, label = sample
    x = np.asarray(getattr(trace, "power", trace), dtype=np.float64)[np.newaxis]
    y = np.array([int(label)])
    return max_relative_error(
        analytic_gradients(model, x, y),
        numeric_gradients(model, x, y, eps=eps),
    )
