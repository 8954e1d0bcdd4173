"""Row-stochastic matrix analysis for trust matrices and their products.

Matrices are plain ``numpy`` arrays of shape ``(N, N)``; every public function
validates its input with :func:`as_stochastic` and never mutates it.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence

import numpy as np

from .errors import ConvergenceError, InvalidInputError, ParameterRangeError, RatioPreconditionError

ROW_TOL = 1e-9
PRODUCT_TOL = 1e-8


def as_stochastic(w, tol: float = ROW_TOL) -> np.ndarray:
    """Validate ``w`` as an N x N row-stochastic matrix (N >= 2) and return it as float64."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {w.shape}")
    if w.shape[0] < 2:
        raise InvalidInputError("dimension must be at least 2")
    if not np.all(np.isfinite(w)):
        raise InvalidInputError("matrix has non-finite entries")
    if np.any(w < 0):
        raise InvalidInputError("matrix has negative entries")
    row_err = np.abs(w.sum(axis=1) - 1.0).max()
    if row_err > tol:
        raise InvalidInputError(f"rows do not sum to 1 (max deviation {row_err:.3e})")
    return w


def is_row_stochastic(w, tol: float = ROW_TOL) -> bool:
    try:
        as_stochastic(w, tol)
    except InvalidInputError:
        return False
    return True


def uniform_matrix(n: int) -> np.ndarray:
    if n < 2:
        raise InvalidInputError("dimension must be at least 2")
    return np.full((n, n), 1.0 / n)


def row_difference_delta(w) -> float:
    """Largest per-column spread between any two rows; 0 iff all rows are identical."""
    w = as_stochastic(w, PRODUCT_TOL)
    return float((w.max(axis=0) - w.min(axis=0)).max())


def _min_pair_overlap(w: np.ndarray) -> float:
    # sum_j min(w[i1, j], w[i2, j]) over all pairs i1 < i2
    overlaps = np.minimum(w[:, None, :], w[None, :, :]).sum(axis=2)
    iu = np.triu_indices(w.shape[0], k=1)
    return float(overlaps[iu].min())


def scrambling_coefficient(w) -> float:
    """One minus the smallest row-pair overlap. Values below 1 mean ``w`` is scrambling."""
    w = as_stochastic(w, PRODUCT_TOL)
    return float(min(1.0, max(0.0, 1.0 - _min_pair_overlap(w))))


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        v = stack.pop()
        for u in np.flatnonzero(adj[v] & ~seen):
            seen[u] = True
            stack.append(int(u))
    return seen


def is_irreducible(w) -> bool:
    """True iff the support graph (edge i -> j when w_ij > 0) is strongly connected."""
    w = as_stochastic(w, PRODUCT_TOL)
    adj = w > 0
    return all(_reachable(adj, v).all() for v in range(w.shape[0]))


def is_aperiodic(w) -> bool:
    """Self-loop aperiodicity: every diagonal entry is positive.

    This is deliberately stricter than gcd-of-cycle-lengths aperiodicity; a chain
    such as a 3-cycle with one added self-loop is aperiodic in general but fails here.
    """
    w = as_stochastic(w, PRODUCT_TOL)
    return bool(np.all(np.diag(w) > 0))


def is_sia(w) -> bool:
    """Stochastic, irreducible and (self-loop) aperiodic."""
    if not is_row_stochastic(w, PRODUCT_TOL):
        return False
    return is_irreducible(w) and is_aperiodic(w)


def chain_product(ws: Sequence) -> np.ndarray:
    """Multiply a chronological sequence ``[W1, ..., Wt]`` as ``Wt @ ... @ W1``."""
    ws = list(ws)
    if not ws:
        raise InvalidInputError("empty matrix sequence")
    mats = [as_stochastic(w, PRODUCT_TOL) for w in ws]
    n = mats[0].shape[0]
    if any(m.shape != (n, n) for m in mats):
        raise InvalidInputError("dimension mismatch in matrix sequence")
    out = mats[0].copy()
    for m in mats[1:]:
        out = m @ out
    return out


def stationary_distribution(w, tol: float = 1e-10, max_iter: int = 100_000) -> np.ndarray:
    """Left fixed point ``pi @ w = pi`` by power iteration from the uniform vector.

    Convergence is measured as the L1 change between successive iterates.
    """
    w = as_stochastic(w, PRODUCT_TOL)
    if not is_sia(w):
        raise InvalidInputError("power iteration requires an SIA matrix")
    n = w.shape[0]
    pi = np.full(n, 1.0 / n)
    residual = np.inf
    for _ in range(max_iter):
        nxt = pi @ w
        nxt /= nxt.sum()
        residual = float(np.abs(nxt - pi).sum())
        pi = nxt
        if residual < tol:
            return pi
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} steps (residual {residual:.3e})",
        last_iterate=pi,
        residual=residual,
    )


def metropolis_from_stationary(phi, pi) -> np.ndarray:
    """Metropolis chain with proposal ``phi`` and target stationary distribution ``pi``.

    Off-diagonal ``p(x, y) = phi(x, y) * min(1, pi(y) phi(y, x) / (pi(x) phi(x, y)))``; for a
    symmetric ``phi`` the correction reduces to ``pi(y) / pi(x)``. The diagonal absorbs the
    rejected mass, so ``p(x, x) >= phi(x, x)``.
    """
    phi = as_stochastic(phi)
    pi = np.asarray(pi, dtype=np.float64)
    n = phi.shape[0]
    if pi.shape != (n,):
        raise InvalidInputError(f"pi has shape {pi.shape}, expected ({n},)")
    if np.any(pi <= 0):
        raise InvalidInputError("stationary distribution must be strictly positive")
    if abs(pi.sum() - 1.0) > ROW_TOL:
        raise InvalidInputError("stationary distribution must sum to 1")

    p = np.zeros_like(phi)
    for x in range(n):
        for y in range(n):
            if x == y:
                continue
            fwd, back = phi[x, y], phi[y, x]
            if fwd == 0.0:
                if back != 0.0:
                    raise InvalidInputError(f"phi[{x},{y}] is zero but phi[{y},{x}] is not")
                continue
            ratio = (pi[y] * back) / (pi[x] * fwd)
            p[x, y] = fwd * min(1.0, ratio)
        p[x, x] = 1.0 - p[x].sum()
    return p


def column_sums(w) -> np.ndarray:
    return np.asarray(w, dtype=np.float64).sum(axis=0)


def check_single_lowquality_conditions(w, b: int) -> bool:
    """Node ``b`` gets each other row's minimum trust and has the strictly smallest column sum."""
    w = as_stochastic(w, PRODUCT_TOL)
    n = w.shape[0]
    if not 0 <= b < n:
        raise InvalidInputError(f"index {b} out of range for N={n}")
    for j in range(n):
        if j != b and w[j, b] > w[j].min():
            return False
    cs = column_sums(w)
    others = np.delete(cs, b)
    return bool(np.all(cs[b] < others))


def _partition(n: int, regular: Iterable[int], lowq: Iterable[int]) -> tuple[list[int], list[int]]:
    regular, lowq = sorted(set(regular)), sorted(set(lowq))
    if not regular or not lowq:
        raise InvalidInputError("regular and low-quality sets must both be non-empty")
    if set(regular) & set(lowq):
        raise InvalidInputError("regular and low-quality sets overlap")
    if set(regular) | set(lowq) != set(range(n)):
        raise InvalidInputError(f"index sets do not cover 0..{n - 1}")
    return regular, lowq


def check_multi_lowquality_conditions(w, regular: Iterable[int], lowq: Iterable[int]) -> bool:
    """Sufficient conditions for a set of low-quality nodes to keep low consensus importance.

    (1) every regular column sum is strictly above every low-quality column sum;
    (2) sum_{n in R} (w_nr - w_nb) > w_bb - w_br for all r in R, b in B;
    (3) w_nr >= w_nb for all r in R, b in B and every row n != b.
    """
    w = as_stochastic(w, PRODUCT_TOL)
    regular, lowq = _partition(w.shape[0], regular, lowq)
    cs = column_sums(w)
    if not cs[regular].min() > cs[lowq].max():
        return False
    for r in regular:
        for b in lowq:
            gap = float(np.sum(w[regular, r] - w[regular, b]))
            if not gap > w[b, b] - w[b, r]:
                return False
            rows = [n for n in range(w.shape[0]) if n != b]
            if np.any(w[rows, r] < w[rows, b]):
                return False
    return True


def confidence_weighting_check(a, b, bad: int, c1: float, c2: float) -> bool:
    """Does up-weighting the confident region lower the bad node's normalized similarity share?

    ``a`` holds similarities inside the confident region (weight ``c1 > 1``) and ``b`` those
    outside it (weight ``0 < c2 < 1``). Requires ``a[bad]/sum(a) < b[bad]/sum(b)``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise InvalidInputError("a and b must be 1-d vectors of equal length")
    if np.any(a <= 0) or np.any(b <= 0):
        raise InvalidInputError("a and b must be strictly positive")
    if not 0 <= bad < a.size:
        raise InvalidInputError(f"index {bad} out of range")
    if not c1 > 1:
        raise ParameterRangeError(f"c1 must exceed 1, got {c1}")
    if not 0 < c2 < 1:
        raise ParameterRangeError(f"c2 must lie in (0, 1), got {c2}")
    if not a[bad] / a.sum() < b[bad] / b.sum():
        raise RatioPreconditionError("bad-node share inside the confident region is not smaller than outside")
    weighted = (c1 * a[bad] + c2 * b[bad]) / np.sum(c1 * a + c2 * b)
    plain = (a[bad] + b[bad]) / np.sum(a + b)
    return bool(weighted < plain)
