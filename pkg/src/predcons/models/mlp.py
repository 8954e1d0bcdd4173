"""Small feed-forward softmax classifier trained by minibatch gradient descent.

Hidden layers use ``tanh``; it is smooth, which keeps finite-difference gradient
checks clean. Loss terms are means over their datasets:

    mean CE(local one-hot labels) + lam * mean CE(shared soft pseudo-labels)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError, NumericalError
from ..rng import make_rng


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 0.0
    learning_rate: float = 0.1
    local_epochs: int = 5
    batch_size_local: int = 64
    batch_size_shared: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidInputError("lambda must be non-negative")
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be positive")
        if self.local_epochs < 1:
            raise InvalidInputError("local_epochs must be at least 1")
        if self.batch_size_local < 1 or self.batch_size_shared < 1:
            raise InvalidInputError("batch sizes must be positive")


@dataclass
class MlpModel:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise InvalidInputError(f"bad layer sizes {self.layer_sizes}")
        if not self.weights:
            self.weights = [np.zeros((i, o)) for i, o in zip(self.layer_sizes[:-1], self.layer_sizes[1:])]
            self.biases = [np.zeros(o) for o in self.layer_sizes[1:]]
        for k, (i, o) in enumerate(zip(self.layer_sizes[:-1], self.layer_sizes[1:])):
            if self.weights[k].shape != (i, o) or self.biases[k].shape != (o,):
                raise InvalidInputError(f"layer {k} parameters inconsistent with sizes {self.layer_sizes}")

    @classmethod
    def initialize(cls, layer_sizes, rng: np.random.Generator) -> MlpModel:
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases, layer by layer."""
        sizes = tuple(layer_sizes)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(sizes, weights, biases)

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> MlpModel:
        return MlpModel(self.layer_sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts += [w.ravel(), b.ravel()]
        return np.concatenate(parts)

    def with_flat(self, theta) -> MlpModel:
        theta = np.asarray(theta, dtype=np.float64)
        weights, biases, pos = [], [], 0
        for i, o in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            weights.append(theta[pos : pos + i * o].reshape(i, o).copy())
            pos += i * o
            biases.append(theta[pos : pos + o].copy())
            pos += o
        if pos != theta.size:
            raise InvalidInputError(f"expected {pos} parameters, got {theta.size}")
        return MlpModel(self.layer_sizes, weights, biases)

    def predict_proba(self, inputs) -> np.ndarray:
        return mlp_forward(self, inputs)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _forward(model: MlpModel, x: np.ndarray):
    acts = [x]
    h = x
    last = len(model.weights) - 1
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        h = z if k == last else np.tanh(z)
        acts.append(h)
    return acts


def _check_inputs(model: MlpModel, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.layer_sizes[0]:
        raise InvalidInputError(f"inputs of shape {x.shape} do not match input size {model.layer_sizes[0]}")
    return x


def mlp_forward(model: MlpModel, inputs) -> np.ndarray:
    x = _check_inputs(model, inputs)
    return np.exp(_log_softmax(_forward(model, x)[-1]))


def _ce_and_delta(model, x, targets):
    # mean soft-target cross-entropy and its gradient w.r.t. the logits
    acts = _forward(model, x)
    logp = _log_softmax(acts[-1])
    loss = -np.sum(targets * logp) / x.shape[0]
    delta = (np.exp(logp) - targets) / x.shape[0]
    return loss, acts, delta


def _backward(model, acts, delta, scale, gw, gb):
    for k in range(len(model.weights) - 1, -1, -1):
        gw[k] += scale * (acts[k].T @ delta)
        gb[k] += scale * delta.sum(axis=0)
        if k > 0:
            delta = (delta @ model.weights[k].T) * (1.0 - acts[k] ** 2)


def one_hot(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise InvalidInputError(f"labels must lie in [0, {num_classes})")
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels.astype(int)] = 1.0
    return out


def loss_and_grad(model: MlpModel, x_local, y_local, x_shared=None, pseudo=None, lam: float = 0.0):
    """Combined loss and its gradients ``(loss, grad_weights, grad_biases)``."""
    gw = [np.zeros_like(w) for w in model.weights]
    gb = [np.zeros_like(b) for b in model.biases]
    loss = 0.0
    if x_local is not None and len(x_local):
        x = _check_inputs(model, x_local)
        targets = one_hot(y_local, model.num_classes)
        part, acts, delta = _ce_and_delta(model, x, targets)
        loss += part
        _backward(model, acts, delta, 1.0, gw, gb)
    if lam > 0 and x_shared is not None and len(x_shared):
        xs = _check_inputs(model, x_shared)
        part, acts, delta = _ce_and_delta(model, xs, np.asarray(pseudo, dtype=np.float64))
        loss += lam * part
        _backward(model, acts, delta, lam, gw, gb)
    return float(loss), gw, gb


def flat_grad(model: MlpModel, *args, **kwargs) -> tuple[float, np.ndarray]:
    loss, gw, gb = loss_and_grad(model, *args, **kwargs)
    parts = []
    for w, b in zip(gw, gb):
        parts += [w.ravel(), b.ravel()]
    return loss, np.concatenate(parts)


def mlp_train_collaborative(model: MlpModel, local_x, local_y, shared_x, pseudo, config: TrainConfig) -> MlpModel:
    """Run ``config.local_epochs`` passes of minibatch GD on a private copy of ``model``.

    Each local minibatch is paired with the next shared minibatch, cycling through
    a fresh permutation of the shared set. Shuffling draws from ``config.seed`` only.
    """
    local_x = _check_inputs(model, local_x)
    local_y = np.asarray(local_y)
    if local_y.shape != (local_x.shape[0],):
        raise InvalidInputError("local labels must be a vector matching local inputs")
    if local_y.size and (local_y.min() < 0 or local_y.max() >= model.num_classes):
        raise InvalidInputError(f"labels must lie in [0, {model.num_classes})")
    use_shared = config.lam > 0
    if use_shared:
        shared_x = _check_inputs(model, shared_x)
        pseudo = np.asarray(pseudo, dtype=np.float64)
        if pseudo.shape != (shared_x.shape[0], model.num_classes):
            raise InvalidInputError("pseudo-labels must be (n_S, C)")

    rng = make_rng(config.seed)
    out = model.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        # overflow surfaces as a non-finite loss and is raised as NumericalError
        _run_epochs(out, rng, local_x, local_y, shared_x, pseudo, config)
    if not np.all(np.isfinite(out.flat())):
        raise NumericalError("parameters became non-finite", epoch=config.local_epochs - 1)
    return out


def _run_epochs(out: MlpModel, rng, local_x, local_y, shared_x, pseudo, config: TrainConfig) -> None:
    use_shared = config.lam > 0
    n = local_x.shape[0]
    for epoch in range(config.local_epochs):
        order = rng.permutation(n)
        if use_shared:
            shared_order = rng.permutation(shared_x.shape[0])
            spos = 0
        for start in range(0, n, config.batch_size_local):
            idx = order[start : start + config.batch_size_local]
            xs_b = ps_b = None
            if use_shared:
                take = np.arange(spos, spos + config.batch_size_shared) % shared_order.size
                sidx = shared_order[take]
                spos = (spos + config.batch_size_shared) % shared_order.size
                xs_b, ps_b = shared_x[sidx], pseudo[sidx]
            loss, gw, gb = loss_and_grad(out, local_x[idx], local_y[idx], xs_b, ps_b, config.lam)
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite loss in epoch {epoch}", epoch=epoch)
            for k in range(len(out.weights)):
                out.weights[k] -= config.learning_rate * gw[k]
                out.biases[k] -= config.learning_rate * gb[k]


def mlp_local_fit(model: MlpModel, x, y, config: TrainConfig) -> MlpModel:
    return mlp_train_collaborative(model, x, y, None, None, TrainConfig(
        lam=0.0,
        learning_rate=config.learning_rate,
        local_epochs=config.local_epochs,
        batch_size_local=config.batch_size_local,
        batch_size_shared=config.batch_size_shared,
        seed=config.seed,
    ))
