"""Small differentiable classifiers trained by weighted mini-batch descent.

Two architectures: multinomial logistic regression and a one-hidden-layer
tanh MLP (tanh keeps the loss twice differentiable everywhere, which the
curvature analysis downstream relies on). All parameter vectors are flat
float64 arrays; the mapping to weight matrices is fixed per architecture.

Training is bit-reproducible: the batch order of epoch e is drawn from a
counter-based Philox stream keyed by (config.seed, e), so two runs with
identical inputs produce identical parameters and accuracy deltas are
attributable to sample weights, never to shuffling noise.
"""

from __future__ import annotations

from dataclasses import dataclass
import json
from pathlib import Path

import numpy as np

from .datamodel import Dataset
from .errors import ConfigurationError, NumericError, UndefinedChangeError

LOGISTIC = "logistic"
MLP = "mlp"

_INIT_STREAM = 0xFFFFFFFFFFFFFFFF  # Philox sub-key reserved for parameter init


@dataclass(frozen=True)
class ModelConfig:
    """Training hyperparameters.

    `hidden_width` only applies to the MLP. `bias` only applies to logistic
    regression: without it the decision boundary passes through the origin,
    which is the natural parameterization for the origin-symmetric synthetic
    clouds (the MLP always keeps its bias units).
    """

    architecture: str = LOGISTIC
    hidden_width: int = 0
    bias: bool = True
    learning_rate: float = 0.4
    weight_decay: float = 0.001
    batch_size: int = 64
    epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.architecture not in (LOGISTIC, MLP):
            raise ConfigurationError(f"unknown architecture {self.architecture!r}")
        if self.architecture == MLP and self.hidden_width < 1:
            raise ConfigurationError("mlp requires hidden_width >= 1")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")

    def to_dict(self):
        return {"architecture": self.architecture, "hidden_width": self.hidden_width,
                "bias": self.bias, "learning_rate": self.learning_rate,
                "weight_decay": self.weight_decay, "batch_size": self.batch_size,
                "epochs": self.epochs, "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass(frozen=True)
class ModelParams:
    """Flat parameter vector plus the architecture it parameterizes."""

    theta: np.ndarray
    architecture: dict
    epoch_index: int = 0

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        expected = _model(self.architecture).num_params
        if theta.shape != (expected,):
            raise ValueError(f"theta has length {theta.shape}, expected ({expected},)")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta contains non-finite entries")

    def with_theta(self, theta, epoch_index=None):
        return ModelParams(theta, self.architecture,
                           self.epoch_index if epoch_index is None else epoch_index)


@dataclass(frozen=True)
class EpochMetrics:
    """Per-class accuracy on an evaluation split after a given epoch."""

    per_class_accuracy: np.ndarray
    overall_accuracy: float
    epoch_index: int

    def __post_init__(self):
        acc = np.asarray(self.per_class_accuracy, dtype=np.float64)
        acc.setflags(write=False)
        object.__setattr__(self, "per_class_accuracy", acc)


@dataclass(frozen=True)
class DeltaVector:
    """Per-class relative accuracy change, stored as a dimensionless fraction."""

    delta: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.delta, dtype=np.float64)
        d.setflags(write=False)
        object.__setattr__(self, "delta", d)

    def as_percent(self):
        return self.delta * 100.0


# ---------------------------------------------------------------------------
# Architecture internals (batched forward / gradient / Hessian-vector product)
# ---------------------------------------------------------------------------

def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


class _Logistic:
    def __init__(self, input_dim, num_classes, bias=True):
        self.d = input_dim
        self.k = num_classes
        self.bias = bias
        self.cols = input_dim + (1 if bias else 0)
        self.num_params = num_classes * self.cols

    def init_theta(self, rng):
        return np.zeros(self.num_params)

    def _w(self, theta):
        return theta.reshape(self.k, self.cols)

    def _aug(self, x):
        if not self.bias:
            return x
        return np.concatenate([x, np.ones((x.shape[0], 1))], axis=1)

    def logits(self, theta, x):
        return self._aug(x) @ self._w(theta).T

    def loss_batch(self, theta, x, y):
        logp = _log_softmax(self.logits(theta, x))
        return -logp[np.arange(len(y)), y]

    def grad_batch(self, theta, x, y):
        xa = self._aug(x)
        dz = _softmax(self.logits(theta, x))
        dz[np.arange(len(y)), y] -= 1.0
        return np.einsum("nk,na->nka", dz, xa).reshape(len(y), self.num_params)

    def weighted_grad(self, theta, x, y, w):
        # mean_i w_i * grad_i, without materializing per-sample gradients
        xa = self._aug(x)
        dz = _softmax(self.logits(theta, x))
        dz[np.arange(len(y)), y] -= 1.0
        g = (dz * w[:, None]).T @ xa / len(y)
        return g.ravel()

    def hvp_sum(self, theta, x, y, v, w=None):
        xa = self._aug(x)
        p = _softmax(self.logits(theta, x))
        rz = xa @ v.reshape(self.k, self.cols).T
        rdz = p * rz - p * np.sum(p * rz, axis=1, keepdims=True)
        if w is not None:
            rdz = rdz * w[:, None]
        return (rdz.T @ xa).ravel()


class _Mlp:
    def __init__(self, input_dim, num_classes, hidden_width):
        self.d = input_dim
        self.k = num_classes
        self.h = hidden_width
        self.num_params = (hidden_width * input_dim + hidden_width
                           + num_classes * hidden_width + num_classes)

    def init_theta(self, rng):
        # small random init; zeros would freeze the hidden layer by symmetry
        scale = 1.0 / np.sqrt(max(self.d, 1))
        w1 = scale * rng.standard_normal((self.h, self.d))
        b1 = np.zeros(self.h)
        w2 = (1.0 / np.sqrt(self.h)) * rng.standard_normal((self.k, self.h))
        b2 = np.zeros(self.k)
        return self.pack(w1, b1, w2, b2)

    def pack(self, w1, b1, w2, b2):
        return np.concatenate([w1.ravel(), b1.ravel(), w2.ravel(), b2.ravel()])

    def unpack(self, theta):
        d, h, k = self.d, self.h, self.k
        i = 0
        w1 = theta[i:i + h * d].reshape(h, d); i += h * d
        b1 = theta[i:i + h]; i += h
        w2 = theta[i:i + k * h].reshape(k, h); i += k * h
        b2 = theta[i:i + k]
        return w1, b1, w2, b2

    def _forward(self, theta, x):
        w1, b1, w2, b2 = self.unpack(theta)
        a1 = np.tanh(x @ w1.T + b1)
        z2 = a1 @ w2.T + b2
        return a1, z2

    def logits(self, theta, x):
        return self._forward(theta, x)[1]

    def loss_batch(self, theta, x, y):
        logp = _log_softmax(self.logits(theta, x))
        return -logp[np.arange(len(y)), y]

    def _backward(self, theta, x, y):
        w1, b1, w2, b2 = self.unpack(theta)
        a1, z2 = self._forward(theta, x)
        dz2 = _softmax(z2)
        dz2[np.arange(len(y)), y] -= 1.0
        da1 = dz2 @ w2
        dz1 = da1 * (1.0 - a1 ** 2)
        return a1, dz2, da1, dz1

    def grad_batch(self, theta, x, y):
        a1, dz2, _, dz1 = self._backward(theta, x, y)
        n = len(y)
        gw1 = np.einsum("nh,nd->nhd", dz1, x).reshape(n, self.h * self.d)
        gw2 = np.einsum("nk,nh->nkh", dz2, a1).reshape(n, self.k * self.h)
        return np.concatenate([gw1, dz1, gw2, dz2], axis=1)

    def weighted_grad(self, theta, x, y, w):
        a1, dz2, _, dz1 = self._backward(theta, x, y)
        n = len(y)
        dz1w = dz1 * w[:, None]
        dz2w = dz2 * w[:, None]
        return self.pack(dz1w.T @ x, dz1w.sum(axis=0),
                         dz2w.T @ a1, dz2w.sum(axis=0)) / n

    def hvp_sum(self, theta, x, y, v, w=None):
        # exact forward-over-reverse product with the per-sample loss Hessians
        w1, b1, w2, b2 = self.unpack(theta)
        v1, c1, v2, c2 = self.unpack(v)
        a1, z2 = self._forward(theta, x)
        p = _softmax(z2)
        dz2 = p.copy()
        dz2[np.arange(len(y)), y] -= 1.0
        da1 = dz2 @ w2
        s = 1.0 - a1 ** 2  # tanh'
        rz1 = x @ v1.T + c1
        ra1 = s * rz1
        rz2 = a1 @ v2.T + ra1 @ w2.T + c2
        rdz2 = p * rz2 - p * np.sum(p * rz2, axis=1, keepdims=True)
        rda1 = dz2 @ v2 + rdz2 @ w2
        rdz1 = rda1 * s + da1 * (-2.0 * a1 * ra1)
        if w is not None:
            rdz1 = rdz1 * w[:, None]
            rdz2w = rdz2 * w[:, None]
            # cross term of the W2 block also carries the weight
            cross = (dz2 * w[:, None]).T @ ra1
        else:
            rdz2w = rdz2
            cross = dz2.T @ ra1
        return self.pack(rdz1.T @ x, rdz1.sum(axis=0),
                         rdz2w.T @ a1 + cross, rdz2w.sum(axis=0))


def _model(architecture):
    name = architecture["name"]
    if name == LOGISTIC:
        return _Logistic(architecture["input_dim"], architecture["num_classes"],
                         architecture.get("bias", True))
    if name == MLP:
        return _Mlp(architecture["input_dim"], architecture["num_classes"],
                    architecture["hidden_width"])
    raise ConfigurationError(f"unknown architecture {name!r}")


def _epoch_rng(seed, epoch_index):
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, epoch_index & 0xFFFFFFFFFFFFFFFF],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def init_params(config: ModelConfig, input_dim, num_classes) -> ModelParams:
    """Epoch-0 parameters; deterministic in config.seed."""
    arch = {"name": config.architecture, "input_dim": int(input_dim),
            "num_classes": int(num_classes)}
    if config.architecture == MLP:
        arch["hidden_width"] = int(config.hidden_width)
    elif not config.bias:
        arch["bias"] = False
    rng = _epoch_rng(config.seed, _INIT_STREAM)
    theta = _model(arch).init_theta(rng)
    return ModelParams(theta, arch, epoch_index=0)


# ---------------------------------------------------------------------------
# Loss / gradient on single samples and datasets
# ---------------------------------------------------------------------------

def _check_sample(model, sample):
    if sample.features.shape != (model.d,):
        raise ValueError(
            f"sample {sample.id}: feature dim {sample.features.shape} != ({model.d},)")


def loss(params: ModelParams, sample) -> float:
    """Cross-entropy loss of one sample."""
    model = _model(params.architecture)
    _check_sample(model, sample)
    val = model.loss_batch(params.theta, sample.features[None, :],
                           np.array([sample.label]))[0]
    if not np.isfinite(val):
        raise NumericError(f"non-finite loss for sample {sample.id}")
    return float(val)


def loss_gradient(params: ModelParams, sample) -> np.ndarray:
    """Exact gradient of the sample loss with respect to the flat parameters."""
    model = _model(params.architecture)
    _check_sample(model, sample)
    g = model.grad_batch(params.theta, sample.features[None, :],
                         np.array([sample.label]))[0]
    if not np.all(np.isfinite(g)):
        raise NumericError(f"non-finite gradient for sample {sample.id}")
    return g


def dataset_losses(params: ModelParams, dataset: Dataset) -> np.ndarray:
    model = _model(params.architecture)
    return model.loss_batch(params.theta, dataset.features, dataset.labels)


def total_loss(params: ModelParams, dataset: Dataset) -> float:
    """Sum of per-sample losses (the quantity influence scores predict)."""
    return float(dataset_losses(params, dataset).sum())


def per_sample_gradients(params: ModelParams, dataset: Dataset) -> np.ndarray:
    """(n, |theta|) matrix of per-sample loss gradients."""
    model = _model(params.architecture)
    g = model.grad_batch(params.theta, dataset.features, dataset.labels)
    if not np.all(np.isfinite(g)):
        bad = int(dataset.ids[np.flatnonzero(~np.isfinite(g).all(axis=1))[0]])
        raise NumericError(f"non-finite gradient for sample {bad}")
    return g


def sum_gradient(params: ModelParams, dataset: Dataset) -> np.ndarray:
    """Sum over the dataset of per-sample loss gradients."""
    model = _model(params.architecture)
    n = len(dataset)
    w = np.full(n, float(n))  # weighted_grad divides by n
    return model.weighted_grad(params.theta, dataset.features, dataset.labels, w)


def hessian_vector_product(params: ModelParams, dataset: Dataset, v,
                           weights=None) -> np.ndarray:
    """sum_i w_i * (d^2 loss_i / d theta^2) @ v, exact (no finite differences)."""
    model = _model(params.architecture)
    v = np.asarray(v, dtype=np.float64)
    return model.hvp_sum(params.theta, dataset.features, dataset.labels, v,
                         None if weights is None else np.asarray(weights, float))


# ---------------------------------------------------------------------------
# Training / evaluation
# ---------------------------------------------------------------------------

def _as_weight_array(weights, n):
    w = getattr(weights, "w", weights)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"weight vector has shape {w.shape}, expected ({n},)")
    return w


def train_weighted(init: ModelParams, train: Dataset, weights, config: ModelConfig,
                   num_epochs: int) -> ModelParams:
    """Mini-batch gradient descent on (1/n) sum_i w_i loss_i + wd * ||theta||^2.

    Weights multiply the data loss only, never the decay term. Batch order of
    absolute epoch e comes from Philox(config.seed, e), so resuming from a
    checkpoint replays the exact original batches.
    """
    n = len(train)
    w = _as_weight_array(weights, n)
    model = _model(init.architecture)
    theta = init.theta.copy()
    x, y = train.features, train.labels
    for e in range(num_epochs):
        epoch = init.epoch_index + e
        order = _epoch_rng(config.seed, epoch).permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            g = model.weighted_grad(theta, x[idx], y[idx], w[idx])
            if config.weight_decay:
                g = g + 2.0 * config.weight_decay * theta
            theta -= config.learning_rate * g
        if not np.all(np.isfinite(theta)):
            raise NumericError(
                f"non-finite parameters after epoch {epoch} "
                f"(lr={config.learning_rate}, batch_size={config.batch_size})")
    return ModelParams(theta, init.architecture, init.epoch_index + num_epochs)


def train(init: ModelParams, train_set: Dataset, config: ModelConfig,
          num_epochs=None) -> ModelParams:
    """Unweighted training: train_weighted with the all-ones baseline."""
    epochs = config.epochs if num_epochs is None else num_epochs
    return train_weighted(init, train_set, np.ones(len(train_set)), config, epochs)


def predict(params: ModelParams, features) -> np.ndarray:
    model = _model(params.architecture)
    return np.argmax(model.logits(params.theta, np.asarray(features)), axis=1)


def evaluate_per_class(params: ModelParams, eval_set: Dataset) -> EpochMetrics:
    """Fraction of class-k samples predicted as k, for every class."""
    pred = predict(params, eval_set.features)
    k = eval_set.num_classes
    acc = np.zeros(k)
    for c in range(k):
        mask = eval_set.labels == c
        if not mask.any():
            raise ValueError(f"class {c} has no samples in the evaluation set")
        acc[c] = float(np.mean(pred[mask] == c))
    overall = float(np.mean(pred == eval_set.labels))
    return EpochMetrics(acc, overall, params.epoch_index)


def relative_change(old: EpochMetrics, new: EpochMetrics) -> DeltaVector:
    """delta_k = (new_k - old_k) / old_k; undefined when old_k == 0."""
    a, b = old.per_class_accuracy, new.per_class_accuracy
    if a.shape != b.shape:
        raise ValueError("metrics have different class counts")
    zero = np.flatnonzero(a == 0.0)
    if len(zero):
        raise UndefinedChangeError(
            f"relative change undefined for classes {zero.tolist()} with zero accuracy")
    return DeltaVector((b - a) / a)


# ---------------------------------------------------------------------------
# Checkpoint format (versioned JSON; floats round-trip exactly via repr)
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_params(params: ModelParams, path):
    payload = {"format_version": CHECKPOINT_VERSION,
               "architecture": params.architecture,
               "epoch_index": params.epoch_index,
               "theta": [float(v) for v in params.theta]}
    Path(path).write_text(json.dumps(payload) + "\n", encoding="utf-8", newline="\n")


def load_params(path) -> ModelParams:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {data.get('format_version')}")
    return ModelParams(np.array(data["theta"], dtype=np.float64),
                       data["architecture"], int(data["epoch_index"]))
