"""Synthetic datasets for the toy experiments.

All generators are pure functions of ``(spec, seed)``; randomness comes from
:func:`predcons.rng.make_rng` streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .rng import DATA, FLIP, SHARED, make_rng

# f(x) = 0.5 x^3 + 0.3 x^2 - 5 x + 4, highest degree first
CUBIC_COEFFS = (0.5, 0.3, -5.0, 4.0)
CLASS_MEANS = ((-2.0, 2.0), (2.0, 2.0), (-2.0, -2.0), (2.0, -2.0))


def true_cubic(x) -> np.ndarray:
    return np.polyval(CUBIC_COEFFS, np.asarray(x, dtype=np.float64))


@dataclass(frozen=True)
class RegressionAgentSpec:
    x_mean: float
    x_std: float = 1.0
    n: int = 50
    noise_std: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError("n must be at least 1")
        if not self.x_std > 0:
            raise InvalidInputError("x_std must be positive")
        if self.noise_std < 0:
            raise InvalidInputError("noise_std must be non-negative")


def gen_cubic_regression(spec: RegressionAgentSpec, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """x ~ N(x_mean, x_std^2), y = f(x) + N(0, noise_std^2)."""
    rng = make_rng(seed, DATA)
    x = spec.x_mean + spec.x_std * rng.standard_normal(spec.n)
    y = true_cubic(x) + spec.noise_std * rng.standard_normal(spec.n)
    return x, y


def gen_shared_grid(lo: float, hi: float, n: int) -> np.ndarray:
    if not lo < hi:
        raise InvalidInputError("need lo < hi")
    if n < 2:
        raise InvalidInputError("need at least two grid points")
    return np.linspace(lo, hi, n)


def default_mixtures(num_clients: int, num_classes: int = 4, major: float = 0.7) -> np.ndarray:
    """Client c puts ``major`` mass on class ``c % C`` and splits the rest evenly."""
    rest = (1.0 - major) / (num_classes - 1)
    mix = np.full((num_clients, num_classes), rest)
    for c in range(num_clients):
        mix[c, c % num_classes] = major
    return mix


@dataclass(frozen=True)
class ClassificationSpec:
    mixtures: tuple[tuple[float, ...], ...]
    # a single size for every client, or one size per client
    n_per_client: int | tuple[int, ...] = 200
    n_shared_per_class: int = 50
    class_means: tuple[tuple[float, float], ...] = CLASS_MEANS

    def __post_init__(self):
        mix = np.asarray(self.mixtures, dtype=np.float64)
        c = len(self.class_means)
        if mix.ndim != 2 or mix.shape[1] != c:
            raise InvalidInputError(f"mixtures must have one weight per class ({c})")
        if np.any(mix < 0) or np.abs(mix.sum(axis=1) - 1.0).max() > 1e-9:
            raise InvalidInputError("mixture weights must be non-negative and sum to 1")
        sizes = [self.client_size(c) for c in range(mix.shape[0])]
        if min(sizes) < 1 or self.n_shared_per_class < 0:
            raise InvalidInputError("sample counts out of range")

    def client_size(self, client: int) -> int:
        if isinstance(self.n_per_client, (tuple, list)):
            return int(self.n_per_client[client])
        return int(self.n_per_client)

    @property
    def num_classes(self) -> int:
        return len(self.class_means)


@dataclass
class ClassificationData:
    clients: list[tuple[np.ndarray, np.ndarray]]
    shared_x: np.ndarray
    shared_y: np.ndarray = field(repr=False)


def _sample_classes(rng, labels, means) -> np.ndarray:
    # covariance is the identity
    return means[labels] + rng.standard_normal((labels.size, means.shape[1]))


def gen_gaussian_classes(spec: ClassificationSpec, seed: int) -> ClassificationData:
    """Per-client samples from each client's class mixture plus a class-balanced shared set."""
    means = np.asarray(spec.class_means, dtype=np.float64)
    clients = []
    for c, mix in enumerate(spec.mixtures):
        rng = make_rng(seed, DATA, c)
        labels = rng.choice(spec.num_classes, size=spec.client_size(c), p=np.asarray(mix))
        clients.append((_sample_classes(rng, labels, means), labels))
    rng = make_rng(seed, SHARED)
    shared_y = np.repeat(np.arange(spec.num_classes), spec.n_shared_per_class)
    shared_x = _sample_classes(rng, shared_y, means)
    return ClassificationData(clients, shared_x, shared_y)


@dataclass(frozen=True)
class CorruptionSpec:
    flip_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.flip_fraction <= 1.0:
            raise InvalidInputError("flip_fraction must lie in [0, 1]")


def flip_labels(labels, spec: CorruptionSpec, num_classes: int) -> np.ndarray:
    """Reassign floor(fraction * n) random positions to a different, uniformly chosen class."""
    if num_classes < 2:
        raise InvalidInputError("flipping needs at least two classes")
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise InvalidInputError(f"labels must lie in [0, {num_classes})")
    out = labels.copy()
    k = int(np.floor(spec.flip_fraction * labels.size))
    if k == 0:
        return out
    rng = make_rng(spec.seed, FLIP)
    idx = rng.choice(labels.size, size=k, replace=False)
    shift = rng.integers(1, num_classes, size=k)
    out[idx] = (labels[idx] + shift) % num_classes
    return out


def dirichlet_partition(x, y, n_clients: int, alpha: float, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a labeled set across clients with Dirichlet(alpha) class proportions.

    Every sample lands in exactly one client; a client may get no samples of a class.
    """
    if not alpha > 0:
        raise InvalidInputError("alpha must be positive")
    if n_clients < 2:
        raise InvalidInputError("need at least two clients")
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape[0] != y.shape[0]:
        raise InvalidInputError("x and y lengths differ")
    rng = make_rng(seed, DATA)
    buckets: list[list[np.ndarray]] = [[] for _ in range(n_clients)]
    for cls in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == cls))
        props = rng.dirichlet(np.full(n_clients, alpha))
        cuts = (np.cumsum(props)[:-1] * idx.size).astype(int)
        for k, part in enumerate(np.split(idx, cuts)):
            buckets[k].append(part)
    out = []
    for parts in buckets:
        idx = np.sort(np.concatenate(parts)) if parts else np.array([], dtype=int)
        out.append((x[idx], y[idx]))
    return out
