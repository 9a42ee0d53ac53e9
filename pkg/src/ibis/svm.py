"""Kernel SVM trained by sequential minimal optimization, one-vs-one
multiclass voting, and stratified grid search over C and gamma.

The solver works on the dual soft-margin problem, repeatedly updating the
maximal-KKT-violating pair of multipliers until the violation gap drops
below tolerance. Box and equality constraints hold by construction, which
the tests assert directly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InsufficientClassMembers, SingleClassInput

KERNELS = ("rbf", "poly", "sigmoid")
_KERNEL_RANK = {k: i for i, k in enumerate(KERNELS)}

_SMO_TOL = 1e-3
_SMO_MAX_PASSES = 10_000


@dataclass(frozen=True)
class SvmHyperParams:
    C: float = 1.0
    gamma: float = 1.0
    kernel: str = "rbf"
    degree: int = 3
    coef0: float | None = None  # defaults: 1 for poly, 0 for sigmoid

    def validate(self) -> None:
        if self.C <= 0:
            raise ValueError("C must be > 0")
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")

    @property
    def effective_coef0(self) -> float:
        if self.coef0 is not None:
            return self.coef0
        return 1.0 if self.kernel == "poly" else 0.0


def gram_matrix(hyper: SvmHyperParams, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kernel matrix K[i, j] = k(a_i, b_j)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"feature widths differ: {a.shape[1]} vs {b.shape[1]}")
    if hyper.kernel == "rbf":
        sq = (
            (a * a).sum(axis=1)[:, None]
            + (b * b).sum(axis=1)[None, :]
            - 2.0 * (a @ b.T)
        )
        return np.exp(-hyper.gamma * np.maximum(sq, 0.0))
    dots = a @ b.T
    if hyper.kernel == "poly":
        return (hyper.gamma * dots + hyper.effective_coef0) ** hyper.degree
    return np.tanh(hyper.gamma * dots + hyper.effective_coef0)


def kernel_eval(hyper: SvmHyperParams, x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatch(f"vector shapes differ: {x.shape} vs {y.shape}")
    return float(gram_matrix(hyper, x[np.newaxis], y[np.newaxis])[0, 0])


@dataclass
class BinarySvmModel:
    support_vectors: np.ndarray
    dual_coefs: np.ndarray  # alpha_i * y_i
    bias: float
    hyper: SvmHyperParams

    def decision_function(self, x) -> np.ndarray:
        k = gram_matrix(self.hyper, np.atleast_2d(x), self.support_vectors)
        return k @ self.dual_coefs + self.bias


def dual_objective(alpha: np.ndarray, q: np.ndarray) -> float:
    """Value of the maximized dual: sum(alpha) - 0.5 * alpha' Q alpha."""
    return float(alpha.sum() - 0.5 * alpha @ q @ alpha)


def _smo_solve(k: np.ndarray, y: np.ndarray, c: float,
               tol: float = _SMO_TOL,
               max_passes: int = _SMO_MAX_PASSES) -> tuple[np.ndarray, float]:
    """Core SMO loop on a precomputed kernel matrix. Returns (alpha, bias)."""
    n = len(y)
    q = (y[:, None] * y[None, :]) * k
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a'Qa - sum(a)

    for _ in range(max_passes):
        neg_yg = -y * grad
        up = ((y > 0) & (alpha < c - 1e-12)) | ((y < 0) & (alpha > 1e-12))
        low = ((y > 0) & (alpha > 1e-12)) | ((y < 0) & (alpha < c - 1e-12))
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(neg_yg[up])])
        j = int(np.flatnonzero(low)[np.argmin(neg_yg[low])])
        m, mm = neg_yg[i], neg_yg[j]
        if m - mm < tol:
            break

        yi, yj = y[i], y[j]
        ai_old, aj_old = alpha[i], alpha[j]
        if yi != yj:
            lo, hi = max(0.0, aj_old - ai_old), min(c, c + aj_old - ai_old)
        else:
            lo, hi = max(0.0, ai_old + aj_old - c), min(c, ai_old + aj_old)
        if hi - lo < 1e-14:
            break  # unreachable with consistent up/low sets; defensive stop

        eta = k[i, i] + k[j, j] - 2.0 * k[i, j]
        ei = y[i] * grad[i]  # f~(x_i) - y_i, bias-free error
        ej = y[j] * grad[j]
        if eta > 1e-15:
            aj = min(max(aj_old + yj * (ei - ej) / eta, lo), hi)
        else:
            # Flat or indefinite direction: pick the better box endpoint.
            def obj_at(av):
                d_j = av - aj_old
                d_i = -yi * yj * d_j
                return (
                    0.5 * (q[i, i] * d_i * d_i + q[j, j] * d_j * d_j)
                    + q[i, j] * d_i * d_j
                    + grad[i] * d_i
                    + grad[j] * d_j
                )

            aj = lo if obj_at(lo) <= obj_at(hi) else hi
        ai = ai_old + yi * yj * (aj_old - aj)

        d_i, d_j = ai - ai_old, aj - aj_old
        if abs(d_i) < 1e-15 and abs(d_j) < 1e-15:
            break
        alpha[i] = np.clip(ai, 0.0, c)
        alpha[j] = np.clip(aj, 0.0, c)
        grad += q[:, i] * d_i + q[:, j] * d_j

    decision_wo_bias = y * (grad + 1.0)
    free = (alpha > 1e-9) & (alpha < c - 1e-9)
    if free.any():
        bias = float(np.mean(y[free] - decision_wo_bias[free]))
    else:
        neg_yg = -y * grad
        up = ((y > 0) & (alpha < c - 1e-12)) | ((y < 0) & (alpha > 1e-12))
        low = ((y > 0) & (alpha > 1e-12)) | ((y < 0) & (alpha < c - 1e-12))
        top = neg_yg[up].max() if up.any() else 0.0
        bot = neg_yg[low].min() if low.any() else 0.0
        bias = float((top + bot) / 2.0)
    return alpha, bias


def _check_binary_labels(y: np.ndarray) -> None:
    present = set(np.unique(y))
    if present != {-1.0, 1.0}:
        raise SingleClassInput(f"labels must be -1/+1 with both present, got {sorted(present)}")


def smo_train(x: np.ndarray, y: np.ndarray, hyper: SvmHyperParams,
              tol: float = _SMO_TOL, max_passes: int = _SMO_MAX_PASSES) -> BinarySvmModel:
    """Solve the dual soft-margin problem for labels in {-1, +1}."""
    hyper.validate()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_binary_labels(y)
    alpha, bias = _smo_solve(gram_matrix(hyper, x, x), y, hyper.C, tol, max_passes)
    keep = alpha > 1e-10
    return BinarySvmModel(
        support_vectors=x[keep].copy(),
        dual_coefs=(alpha * y)[keep],
        bias=bias,
        hyper=hyper,
    )


@dataclass
class MulticlassSvm:
    """One binary model per unordered pair of classes present in training."""

    models: dict[tuple[int, int], BinarySvmModel]
    classes: tuple[int, ...]
    hyper: SvmHyperParams


def fit_multiclass(x: np.ndarray, labels: np.ndarray,
                   hyper: SvmHyperParams) -> MulticlassSvm:
    """Train a one-vs-one ensemble. The first class of each pair is +1."""
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    classes = tuple(sorted(int(c) for c in np.unique(labels)))
    if len(classes) < 2:
        raise SingleClassInput("need at least two classes")
    models = {}
    for a, b in itertools.combinations(classes, 2):
        mask = (labels == a) | (labels == b)
        y = np.where(labels[mask] == a, 1.0, -1.0)
        models[(a, b)] = smo_train(x[mask], y, hyper)
    return MulticlassSvm(models=models, classes=classes, hyper=hyper)


def predict_votes(model: MulticlassSvm, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-row (labels, vote counts, summed |decision| per class)."""
    x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
    k = max(model.classes) + 1
    votes = np.zeros((len(x2), k), dtype=np.int64)
    strength = np.zeros((len(x2), k))
    for (a, b), bin_model in model.models.items():
        d = bin_model.decision_function(x2)
        wins_a = d >= 0
        votes[wins_a, a] += 1
        votes[~wins_a, b] += 1
        strength[wins_a, a] += np.abs(d[wins_a])
        strength[~wins_a, b] += np.abs(d[~wins_a])
    # Ties: larger summed |decision| among the class's wins, then smaller code.
    top_votes = votes.max(axis=1, keepdims=True)
    tied = votes == top_votes
    masked = np.where(tied, strength, -np.inf)
    winners = tied & (masked == masked.max(axis=1, keepdims=True))
    labels = winners.argmax(axis=1)
    return labels, votes, strength


def predict(model: MulticlassSvm, x) -> tuple[int, np.ndarray]:
    """Predicted label and vote counts for a single feature vector."""
    labels, votes, _ = predict_votes(model, np.atleast_2d(x))
    return int(labels[0]), votes[0]


@dataclass(frozen=True)
class SvmGrid:
    kernels: tuple[str, ...] = KERNELS
    c_values: tuple[float, ...] = (0.01, 0.1, 1.0)
    gamma_values: tuple[float, ...] = (0.01, 0.1, 1.0)

    def cells(self):
        for kernel in self.kernels:
            for c in self.c_values:
                for gamma in self.gamma_values:
                    yield SvmHyperParams(C=c, gamma=gamma, kernel=kernel)


@dataclass
class GridSearchResult:
    surface: dict[tuple[str, float, float], float]  # (kernel, C, gamma) -> accuracy %
    best: SvmHyperParams
    cv_folds: int

    @property
    def best_accuracy(self) -> float:
        return self.surface[(self.best.kernel, self.best.C, self.best.gamma)]


def stratified_folds(labels: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Round-robin class-stratified fold indices, shuffled by the seed."""
    labels = np.asarray(labels)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0xF01D])))
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in sorted(int(c) for c in np.unique(labels)):
        members = np.flatnonzero(labels == cls)
        if len(members) < k:
            raise InsufficientClassMembers(
                f"class {cls} has {len(members)} members, need >= {k} for {k}-fold CV"
            )
        for pos, idx in enumerate(rng.permutation(members)):
            folds[pos % k].append(int(idx))
    return [np.array(sorted(f)) for f in folds]


def _kernel_from_parts(hyper: SvmHyperParams, sqdist: np.ndarray,
                       dots: np.ndarray) -> np.ndarray:
    if hyper.kernel == "rbf":
        return np.exp(-hyper.gamma * sqdist)
    if hyper.kernel == "poly":
        return (hyper.gamma * dots + hyper.effective_coef0) ** hyper.degree
    return np.tanh(hyper.gamma * dots + hyper.effective_coef0)


def _ovo_cv_accuracy(k_full: np.ndarray, labels: np.ndarray, c: float,
                     train_idx: np.ndarray, test_idx: np.ndarray) -> float:
    """One-vs-one accuracy on a held-out fold, from a precomputed kernel."""
    y_tr = labels[train_idx]
    classes = sorted(int(v) for v in np.unique(y_tr))
    nc = max(classes) + 1
    votes = np.zeros((len(test_idx), nc), dtype=np.int64)
    strength = np.zeros((len(test_idx), nc))
    for a, b in itertools.combinations(classes, 2):
        mask = (y_tr == a) | (y_tr == b)
        rows = train_idx[mask]
        y = np.where(y_tr[mask] == a, 1.0, -1.0)
        alpha, bias = _smo_solve(k_full[np.ix_(rows, rows)], y, c)
        d = k_full[np.ix_(test_idx, rows)] @ (alpha * y) + bias
        wins_a = d >= 0
        votes[wins_a, a] += 1
        votes[~wins_a, b] += 1
        strength[wins_a, a] += np.abs(d[wins_a])
        strength[~wins_a, b] += np.abs(d[~wins_a])
    top = votes.max(axis=1, keepdims=True)
    tied = votes == top
    masked = np.where(tied, strength, -np.inf)
    pred = (tied & (masked == masked.max(axis=1, keepdims=True))).argmax(axis=1)
    return 100.0 * float(np.mean(pred == labels[test_idx]))


def grid_search(data, grid: SvmGrid, k: int = 5, seed: int = 0,
                evaluator=None) -> GridSearchResult:
    """Mean stratified k-fold accuracy per grid cell; ties prefer smaller C,
    then smaller gamma, then kernel order rbf < poly < sigmoid.

    The default evaluator shares pairwise distance and dot-product caches
    across all cells; a custom evaluator(hyper, train, test) sees plain
    feature/label tuples instead.
    """
    features, labels = data
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise InsufficientClassMembers("need k >= 2 folds")
    folds = stratified_folds(labels, k, seed)
    splits = []
    for held in range(k):
        train_idx = np.concatenate([folds[f] for f in range(k) if f != held])
        splits.append((np.sort(train_idx), folds[held]))

    surface = {}
    if evaluator is None:
        dots = features @ features.T
        norms = (features * features).sum(axis=1)
        sqdist = np.maximum(norms[:, None] + norms[None, :] - 2.0 * dots, 0.0)
        for hyper in grid.cells():
            k_full = _kernel_from_parts(hyper, sqdist, dots)
            scores = [_ovo_cv_accuracy(k_full, labels, hyper.C, tr, te)
                      for tr, te in splits]
            surface[(hyper.kernel, hyper.C, hyper.gamma)] = float(np.mean(scores))
    else:
        for hyper in grid.cells():
            scores = [
                evaluator(hyper, (features[tr], labels[tr]), (features[te], labels[te]))
                for tr, te in splits
            ]
            surface[(hyper.kernel, hyper.C, hyper.gamma)] = float(np.mean(scores))

    best_key = min(
        surface,
        key=lambda cell: (-surface[cell], cell[1], cell[2], _KERNEL_RANK[cell[0]]),
    )
    best = SvmHyperParams(C=best_key[1], gamma=best_key[2], kernel=best_key[0])
    return GridSearchResult(surface=surface, best=best, cv_folds=k)
