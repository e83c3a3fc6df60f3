"""Technique classification submodels.

Three linear softmax classifiers cover the hybrid's needs: a
feature-based model over the hand-crafted fragment features and two
pooled-embedding models, one trained with the plain cross-entropy and
one with the class-frequency-weighted variant that multiplies each
example's loss by total_count / class_count, punishing mistakes on rare
techniques harder.

All training is full-batch gradient descent with backtracking (see
optim); the objective is convex, so the optimizer choice only affects
the path, not the solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .optim import minimize_gd

LOSS_MODES = ("plain", "cost_weighted")


@dataclass(frozen=True)
class ClassWeights:
    """Per-class loss weights w_c = (sum of all counts) / count_c."""

    classes: tuple[str, ...]
    weights: np.ndarray

    def for_class(self, label: str) -> float:
        return float(self.weights[self.classes.index(label)])


def compute_class_weights(counts: dict[str, int]) -> ClassWeights:
    """Weights from training counts; every class must occur at least once."""
    classes = tuple(counts)
    values = np.array([counts[c] for c in classes], dtype=np.float64)
    if np.any(values <= 0):
        bad = [c for c in classes if counts[c] <= 0]
        raise ValueError(f"non-positive count for classes: {bad}")
    total = values.sum()
    return ClassWeights(classes=classes, weights=total / values)


def softmax_ce_loss(logits, target: int) -> float:
    """-log softmax(logits)[target], computed with max subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    m = logits.max()
    return float(-(logits[target] - m - np.log(np.exp(logits - m).sum())))


def weighted_ce_loss(logits, target: int, weights: ClassWeights) -> float:
    """Class-weighted cross entropy: w_target * plain loss."""
    return float(weights.weights[target]) * softmax_ce_loss(logits, target)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-5  # initial line-search trial step
    max_iters: int = 500
    l2_strength: float | None = 1.0  # C in the (1/(2C))*||W||^2 term; None = off
    tolerance: float = 1e-6
    seed: int = 0
    loss_mode: str = "plain"
    class_weights: ClassWeights | None = None
    normalize_weights: bool = False  # rescale class weights to mean 1 ("balanced")

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}")


@dataclass
class LinearClassifier:
    classes: tuple[str, ...]
    weights: np.ndarray  # (n_classes, input_dim)
    bias: np.ndarray  # (n_classes,)
    loss_mode: str = "plain"
    l2_strength: float | None = 1.0
    trained: bool = False
    # z-score statistics applied to selected columns before the linear map
    scale_columns: tuple[int, ...] = ()
    scale_means: np.ndarray = field(default_factory=lambda: np.zeros(0))
    scale_stds: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    def standardize(self, x: np.ndarray) -> np.ndarray:
        if not self.scale_columns:
            return x
        x = np.array(x, dtype=np.float64)
        cols = list(self.scale_columns)
        x[..., cols] = (x[..., cols] - self.scale_means) / self.scale_stds
        return x

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.standardize(np.asarray(x, dtype=np.float64)) @ self.weights.T + self.bias


def _loss_and_grad(x: np.ndarray, y: np.ndarray, sample_weights: np.ndarray,
                   n_classes: int, l2: float | None):
    """Mean weighted CE plus L2 on the weight matrix, with gradient."""
    n, dim = x.shape

    def fun(theta: np.ndarray):
        w = theta[: n_classes * dim].reshape(n_classes, dim)
        b = theta[n_classes * dim:]
        logits = x @ w.T + b
        loss_sum, dlogits = kernels.dense_softmax_ce(
            np.ascontiguousarray(logits), y, sample_weights)
        loss = loss_sum / n
        dw = dlogits.T @ x / n
        db = dlogits.sum(axis=0) / n
        if l2 is not None:
            loss += 0.5 / l2 * float((w * w).sum())
            dw = dw + w / l2
        return loss, np.concatenate([dw.ravel(), db])

    return fun


def _sample_weights(y: np.ndarray, classes: tuple[str, ...],
                    config: TrainConfig) -> np.ndarray:
    if config.loss_mode == "plain":
        return np.ones(len(y))
    cw = config.class_weights
    if cw is None:
        counts = {c: int((y == i).sum()) for i, c in enumerate(classes)}
        zero = [c for c, n in counts.items() if n == 0]
        if zero:
            raise ValueError(
                f"cost_weighted training needs every class present; missing {zero}"
            )
        cw = compute_class_weights(counts)
    elif tuple(cw.classes) != tuple(classes):
        raise ValueError("class_weights classes do not match training classes")
    per_class = cw.weights.copy()
    if config.normalize_weights:
        per_class /= per_class.mean()
    return per_class[y]


def train(dataset, config: TrainConfig, classes: tuple[str, ...] | None = None,
          standardize_columns: tuple[int, ...] = ()):
    """Train a linear softmax classifier on (vector, label) pairs.

    Returns (LinearClassifier, history) where history rows are
    (iteration, loss, gradient_norm). Deterministic for a fixed config.
    """
    if not dataset:
        raise ValueError("empty training set")
    labels = [label for _, label in dataset]
    if classes is None:
        classes = tuple(sorted(set(labels)))
    index = {c: i for i, c in enumerate(classes)}
    unknown = sorted({l for l in labels if l not in index})
    if unknown:
        raise ValueError(f"labels outside the class set: {unknown}")

    x = np.ascontiguousarray([vec for vec, _ in dataset], dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("input vectors must share one dimension")
    y = np.array([index[l] for l in labels], dtype=np.int64)

    means = np.zeros(0)
    stds = np.zeros(0)
    if standardize_columns:
        cols = list(standardize_columns)
        means = x[:, cols].mean(axis=0)
        stds = x[:, cols].std(axis=0)
        stds[stds == 0] = 1.0
        x[:, cols] = (x[:, cols] - means) / stds

    sample_weights = _sample_weights(y, classes, config)
    n_classes, dim = len(classes), x.shape[1]
    fun = _loss_and_grad(x, y, sample_weights, n_classes, config.l2_strength)
    theta0 = np.zeros(n_classes * dim + n_classes)
    theta, history = minimize_gd(
        fun, theta0,
        initial_step=config.learning_rate,
        max_iters=config.max_iters,
        tolerance=config.tolerance,
    )
    model = LinearClassifier(
        classes=tuple(classes),
        weights=theta[: n_classes * dim].reshape(n_classes, dim),
        bias=theta[n_classes * dim:],
        loss_mode=config.loss_mode,
        l2_strength=config.l2_strength,
        trained=True,
        scale_columns=tuple(standardize_columns),
        scale_means=means,
        scale_stds=stds,
    )
    return model, history


def predict(classifier: LinearClassifier, x) -> tuple[str, np.ndarray]:
    """Most probable class (ties go to the lowest index) and all probabilities."""
    logits = classifier.logits(np.asarray(x, dtype=np.float64))
    m = logits.max()
    exps = np.exp(logits - m)
    probs = exps / exps.sum()
    return classifier.classes[int(np.argmax(probs))], probs


def pool_embedding(seq) -> np.ndarray:
    """Whole-context vector of an embedding sequence (reserved row 0)."""
    return np.asarray(seq.vectors[0], dtype=np.float64)
