"""Toy data generation, a minimal feedforward network, and out-of-control samplers.

The toy setting has two 7-dimensional Gaussian classes centred at 0 and
10 * 1 with banded unit-variance covariances, and an out-of-control
distribution centred halfway between them. Class labels are 0 and 1 here
(the network predicts 1 when its logistic output is at least 0.5).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from depthmon.errors import ConfigError, DataError, TrainingError
from depthmon.reference import EmbeddingRecord, Phase

logger = logging.getLogger(__name__)

TOY_DIM = 7
TOY_ARCH = (7, 10, 3, 1)


# ---------------------------------------------------------------- toy data


def banded_covariance(dim: int, off_diagonal: float) -> np.ndarray:
    """Unit diagonal with ``off_diagonal`` on the first band above and below it."""
    cov = np.eye(dim)
    i = np.arange(dim - 1)
    cov[i, i + 1] = off_diagonal
    cov[i + 1, i] = off_diagonal
    return cov


@dataclass(frozen=True)
class GaussianClassSpec:
    mean: np.ndarray
    covariance: np.ndarray
    count: int

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float)
        if not np.allclose(cov, cov.T) or np.linalg.eigvalsh(cov)[0] <= 0:
            raise ConfigError("covariance must be symmetric positive definite")

    def sample(self, rng: np.random.Generator, count: int | None = None) -> np.ndarray:
        return rng.multivariate_normal(self.mean, self.covariance, size=self.count if count is None else count)


@dataclass
class ToyData:
    """Training, in-control and out-of-control blocks of the toy example."""

    x_train: np.ndarray
    y_train: np.ndarray
    x_in_control: np.ndarray
    y_in_control: np.ndarray
    x_out_of_control: np.ndarray
    classes: tuple[GaussianClassSpec, GaussianClassSpec] = field(repr=False)
    out_of_control: GaussianClassSpec = field(repr=False)


def toy_class_specs(train_per_class: int = 100):
    cov1 = banded_covariance(TOY_DIM, 0.3)
    cov2 = banded_covariance(TOY_DIM, -0.3)
    c1 = GaussianClassSpec(np.zeros(TOY_DIM), cov1, train_per_class)
    c2 = GaussianClassSpec(np.full(TOY_DIM, 10.0), cov2, train_per_class)
    ooc = GaussianClassSpec(np.full(TOY_DIM, 5.0), cov1, 50)
    return c1, c2, ooc


def gen_toy_data(
    seed: int,
    train_per_class: int = 100,
    in_control_per_class: int = 50,
    out_of_control: int = 50,
) -> ToyData:
    """Sample the toy example blocks.

    In-control points of both classes are shuffled into one stream; the
    out-of-control block follows it.
    """
    rng = np.random.default_rng(seed)
    c1, c2, ooc = toy_class_specs(train_per_class)
    x_train = np.vstack([c1.sample(rng), c2.sample(rng)])
    y_train = np.repeat([0, 1], train_per_class)
    x_ic = np.vstack([c1.sample(rng, in_control_per_class), c2.sample(rng, in_control_per_class)])
    y_ic = np.repeat([0, 1], in_control_per_class)
    perm = rng.permutation(len(y_ic))
    x_ooc = ooc.sample(rng, out_of_control)
    return ToyData(x_train, y_train, x_ic[perm], y_ic[perm], x_ooc, (c1, c2), ooc)


# ---------------------------------------------------------------- network


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class TinyFNN:
    """Fully connected network with ReLU hidden layers and a logistic output.

    ``weights[l]`` maps layer ``l`` to layer ``l + 1`` and has shape
    ``(layer_sizes[l + 1], layer_sizes[l])``. Embeddings are the
    pre-activation values of layer ``embedding_layer_index``.
    """

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    embedding_layer_index: int = -1

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if self.embedding_layer_index < 0:
            # last hidden layer, or the output logit when there is none
            self.embedding_layer_index = max(len(self.layer_sizes) - 2, 1)
        if not 1 <= self.embedding_layer_index < len(self.layer_sizes):
            raise ConfigError("embedding layer must be a hidden or output layer")

    @classmethod
    def initialize(cls, layer_sizes: Sequence[int], seed: int, embedding_layer_index: int = -1) -> "TinyFNN":
        """He-normal weights, zero biases."""
        if len(layer_sizes) < 2 or layer_sizes[-1] != 1:
            raise ConfigError("architecture needs at least two layers and a single output")
        rng = np.random.default_rng(seed)
        weights = [
            rng.standard_normal((n_out, n_in)) * np.sqrt(2.0 / n_in)
            for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:])
        ]
        biases = [np.zeros(n) for n in layer_sizes[1:]]
        return cls(tuple(layer_sizes), weights, biases, embedding_layer_index)

    def _check_input(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.layer_sizes[0]:
            raise DataError(f"input dimension {x.shape[1]} does not match input layer {self.layer_sizes[0]}")
        return x, single

    def forward(self, x: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Pre-activations and activations of every layer (index 0 is the input)."""
        pre = [x]
        act = [x]
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = act[-1] @ w.T + b
            pre.append(z)
            act.append(_sigmoid(z) if l == last else np.maximum(z, 0.0))
        return pre, act

    def embed(self, x) -> np.ndarray:
        x, single = self._check_input(x)
        pre, _ = self.forward(x)
        m = pre[self.embedding_layer_index]
        return m[0] if single else m

    def score(self, x) -> np.ndarray:
        x, single = self._check_input(x)
        _, act = self.forward(x)
        s = act[-1][:, 0]
        return float(s[0]) if single else s

    def predict(self, x):
        """Class (1 iff the logistic output is >= 0.5) and the output score."""
        s = self.score(x)
        label = (np.asarray(s) >= 0.5).astype(int)
        if np.ndim(s) == 0:
            return int(label), float(s)
        return label, s


def loss_and_grads(net: TinyFNN, x: np.ndarray, y: np.ndarray):
    """Mean binary cross-entropy and its gradients with respect to weights and biases."""
    pre, act = net.forward(x)
    n = x.shape[0]
    z_out = pre[-1][:, 0]
    # log(1 + e^z) - y z, written stably
    loss = float(np.mean(np.logaddexp(0.0, z_out) - y * z_out))
    delta = (act[-1][:, 0] - y)[:, None] / n
    gw = [None] * len(net.weights)
    gb = [None] * len(net.weights)
    for l in range(len(net.weights) - 1, -1, -1):
        gw[l] = delta.T @ act[l]
        gb[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ net.weights[l]) * (pre[l] > 0)
    return loss, gw, gb


def train_fnn(
    x: np.ndarray,
    y: np.ndarray,
    layer_sizes: Sequence[int] = TOY_ARCH,
    epochs: int = 2000,
    learning_rate: float = 0.05,
    seed: int = 0,
) -> TinyFNN:
    """Full-batch gradient descent on binary cross-entropy.

    Stops as soon as every training point is classified correctly.

    Raises:
        TrainingError: If the epoch cap is reached first.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.isin(y, (0, 1)).all():
        raise DataError("training labels must be 0 or 1")
    net = TinyFNN.initialize(layer_sizes, seed)
    for epoch in range(epochs + 1):
        labels, _ = net.predict(x)
        if np.array_equal(labels, y):
            logger.debug("training accuracy 1.0 after %d epochs", epoch)
            return net
        if epoch == epochs:
            break
        _, gw, gb = loss_and_grads(net, x, y)
        for l in range(len(net.weights)):
            net.weights[l] -= learning_rate * gw[l]
            net.biases[l] -= learning_rate * gb[l]
    acc = float(np.mean(net.predict(x)[0] == y))
    raise TrainingError(f"training accuracy {acc:.3f} < 1 after {epochs} epochs; try another seed")


def toy_records(
    seed: int,
    data: ToyData | None = None,
    net: TinyFNN | None = None,
    layer_sizes: Sequence[int] = TOY_ARCH,
):
    """Run the toy example through a freshly trained network.

    Returns:
        The records (Phase I training, Phase II in-control, then
        out-of-control, indexed in that order), the data, and the network.
    """
    data = gen_toy_data(seed) if data is None else data
    net = train_fnn(data.x_train, data.y_train, layer_sizes, seed=seed) if net is None else net
    records = []

    def add(xs, ys, phase):
        emb = net.embed(xs)
        labels, scores = net.predict(xs)
        for i in range(xs.shape[0]):
            s = float(scores[i])
            records.append(
                EmbeddingRecord(
                    index=len(records),
                    embedding=emb[i],
                    predicted_label=int(labels[i]),
                    phase=phase,
                    true_label=None if ys is None else int(ys[i]),
                    softmax=np.array([1.0 - s, s]),
                )
            )

    add(data.x_train, data.y_train, Phase.PHASE_I)
    add(data.x_in_control, data.y_in_control, Phase.PHASE_II_IN_CONTROL)
    add(data.x_out_of_control, None, Phase.PHASE_II_OUT_OF_CONTROL)
    return records, data, net


def toy_inputs(data: ToyData) -> tuple[np.ndarray, list[Phase], list[int | None]]:
    """Raw inputs in record order with their phases and labels."""
    x = np.vstack([data.x_train, data.x_in_control, data.x_out_of_control])
    phases = (
        [Phase.PHASE_I] * len(data.y_train)
        + [Phase.PHASE_II_IN_CONTROL] * len(data.y_in_control)
        + [Phase.PHASE_II_OUT_OF_CONTROL] * len(data.x_out_of_control)
    )
    labels = [int(y) for y in data.y_train] + [int(y) for y in data.y_in_control]
    labels += [None] * len(data.x_out_of_control)
    return x, phases, labels


# ---------------------------------------------------------------- beta ratio


def fit_beta_moments(values) -> tuple[float, float]:
    """Method-of-moments Beta parameters of values in [0, 1]."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size < 2 or np.any(v < 0) or np.any(v > 1):
        raise DataError("beta fit needs at least two values in [0, 1]")
    mean = v.mean()
    var = v.var(ddof=1)
    if var <= 0:
        raise DataError("beta fit needs non-degenerate variance")
    common = mean * (1.0 - mean) / var - 1.0
    if common <= 0:
        raise DataError("sample variance too large for a beta distribution")
    return float(mean * common), float((1.0 - mean) * common)


@dataclass(frozen=True)
class BetaSampler:
    a: float
    b: float

    def sample(self, count: int, dim: int, seed: int) -> np.ndarray:
        return np.random.default_rng(seed).beta(self.a, self.b, size=(count, dim))


def beta_ratio_ooc(class1_values, class2_values) -> BetaSampler:
    """Out-of-control sampler with parameters ``a1 / a2`` and ``b1 / b2`` of per-class beta fits."""
    a1, b1 = fit_beta_moments(class1_values)
    a2, b2 = fit_beta_moments(class2_values)
    return BetaSampler(a1 / a2, b1 / b2)
