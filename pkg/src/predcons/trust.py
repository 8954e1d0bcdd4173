"""Trust matrices computed from agents' predictions on the shared set.

Prediction sets are arrays: ``(N, n_S, C)`` class probabilities for classification,
``(N, n_S)`` scalars for regression. Each row of a trust matrix is computed from
that agent's own view only, so rows can be evaluated in any order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .consensus_math import as_stochastic
from .errors import InvalidInputError, StateError

SCHEMES = ("naive", "static", "dynamic")
PROB_TOL = 1e-6


@dataclass(frozen=True)
class TrustScheme:
    variant: str = "dynamic"
    confidence_weighted: bool = True
    entropy_floor: float = 1e-3

    def __post_init__(self):
        if self.variant not in SCHEMES:
            raise InvalidInputError(f"unknown trust scheme {self.variant!r}; expected one of {SCHEMES}")
        if not self.entropy_floor > 0:
            raise InvalidInputError("entropy_floor must be positive")


@dataclass(frozen=True)
class TrustMatrix:
    matrix: np.ndarray
    round: int
    scheme: TrustScheme

    def __post_init__(self):
        m = as_stochastic(self.matrix)
        if np.any(m <= 0):
            raise InvalidInputError("trust matrices must be strictly positive")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def validate_classification_preds(preds) -> np.ndarray:
    preds = np.asarray(preds, dtype=np.float64)
    if preds.ndim != 3:
        raise InvalidInputError(f"classification predictions need shape (N, n_S, C), got {preds.shape}")
    n, ns, _ = preds.shape
    if n < 2:
        raise InvalidInputError("need at least two agents")
    if ns == 0:
        raise InvalidInputError("shared set is empty")
    if np.any(preds < 0):
        raise InvalidInputError("probabilities must be non-negative")
    if np.abs(preds.sum(axis=2) - 1.0).max() > PROB_TOL:
        raise InvalidInputError("probability rows must sum to 1")
    return preds


def shannon_entropy(p, floor: float = 1e-3) -> float | np.ndarray:
    """Natural-log entropy of the last axis, clamped below at ``floor``.

    Accepts a single distribution or a stack of them.
    """
    if not floor > 0:
        raise InvalidInputError("floor must be positive")
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0):
        raise InvalidInputError("negative probability")
    if np.abs(p.sum(axis=-1) - 1.0).max() > PROB_TOL:
        raise InvalidInputError("probabilities must sum to 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    h = np.maximum(-terms.sum(axis=-1), floor)
    return float(h) if h.ndim == 0 else h


def _per_sample_cosine(pi: np.ndarray, pj: np.ndarray) -> np.ndarray:
    ni = np.linalg.norm(pi, axis=-1)
    nj = np.linalg.norm(pj, axis=-1)
    if np.any(ni == 0) or np.any(nj == 0):
        raise InvalidInputError("zero-norm prediction row")
    return np.einsum("sc,sc->s", pi, pj) / (ni * nj)


def pairwise_cosine(preds_i, preds_j) -> float:
    """Mean over shared samples of the cosine between two agents' probability vectors."""
    pi = np.asarray(preds_i, dtype=np.float64)
    pj = np.asarray(preds_j, dtype=np.float64)
    if pi.shape != pj.shape or pi.ndim != 2:
        raise InvalidInputError(f"mismatched prediction shapes {pi.shape} and {pj.shape}")
    return float(_per_sample_cosine(pi, pj).mean())


def trust_row_classification(preds: np.ndarray, i: int, scheme: TrustScheme) -> np.ndarray:
    """Normalized trust row of agent ``i`` (entropy-weighted mean cosine when enabled)."""
    own = preds[i]
    if scheme.confidence_weighted:
        weight = 1.0 / shannon_entropy(own, scheme.entropy_floor)
    else:
        weight = np.ones(own.shape[0])
    raw = np.array([np.mean(weight * _per_sample_cosine(own, preds[j])) for j in range(preds.shape[0])])
    return raw / raw.sum()


def trust_matrix_classification(preds, scheme: TrustScheme = TrustScheme(), round: int = 0) -> TrustMatrix:
    preds = validate_classification_preds(preds)
    rows = [trust_row_classification(preds, i, scheme) for i in range(preds.shape[0])]
    return TrustMatrix(np.vstack(rows), round, scheme)


def trust_matrix_regression(preds, scheme: TrustScheme = TrustScheme(), round: int = 0) -> TrustMatrix:
    """RBF kernel on prediction-vector distance, bandwidth = median nonzero pairwise distance."""
    preds = np.asarray(preds, dtype=np.float64)
    if preds.ndim != 2:
        raise InvalidInputError(f"regression predictions need shape (N, n_S), got {preds.shape}")
    n, ns = preds.shape
    if n < 2:
        raise InvalidInputError("need at least two agents")
    if ns == 0:
        raise InvalidInputError("shared set is empty")
    diff = preds[:, None, :] - preds[None, :, :]
    dist = np.sqrt(np.einsum("ijs,ijs->ij", diff, diff))
    iu = np.triu_indices(n, k=1)
    nonzero = dist[iu][dist[iu] > 0]
    if nonzero.size == 0:
        return TrustMatrix(np.full((n, n), 1.0 / n), round, scheme)
    sigma = max(float(np.median(nonzero)), 1e-9)
    sim = np.exp(-(dist**2) / (2.0 * sigma**2))
    # exp underflow would break strict positivity for extreme outliers
    sim = np.maximum(sim, np.finfo(np.float64).tiny)
    return TrustMatrix(sim / sim.sum(axis=1, keepdims=True), round, scheme)


def naive_trust(n: int, round: int = 0, scheme: TrustScheme | None = None) -> TrustMatrix:
    if n < 2:
        raise InvalidInputError("need at least two agents")
    return TrustMatrix(np.full((n, n), 1.0 / n), round, scheme or TrustScheme("naive"))


def compute_trust(preds, scheme: TrustScheme, round: int = 0) -> TrustMatrix:
    """Dispatch on prediction shape: 3-d is classification, 2-d is regression."""
    preds = np.asarray(preds)
    if preds.ndim == 3:
        return trust_matrix_classification(preds, scheme, round)
    return trust_matrix_regression(preds, scheme, round)


def resolve_trust(
    scheme: TrustScheme,
    round: int,
    preds,
    cache: TrustMatrix | None = None,
    first_round: int = 1,
) -> TrustMatrix:
    """Trust for ``round`` under ``scheme``.

    Static trust is computed once at ``first_round`` (the first collaborative round)
    and the cached matrix is returned afterwards.
    """
    n = np.asarray(preds).shape[0]
    if scheme.variant == "naive":
        return naive_trust(n, round, scheme)
    if scheme.variant == "dynamic":
        return compute_trust(preds, scheme, round)
    if cache is not None:
        return cache
    if round > first_round:
        raise StateError(f"static trust requested at round {round} without the round-{first_round} cache")
    return compute_trust(preds, scheme, round)
