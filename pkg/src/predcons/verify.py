"""Randomized property suites over the stochastic-matrix toolkit.

Each suite draws its instances from a ``numpy`` generator and returns a
:class:`SuiteResult`; failing instances are kept verbatim as counterexamples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import consensus_math as cm
from .errors import GenerationError, InvalidInputError
from .rng import make_rng

SUITES = ("scrambling_lemma", "metropolis", "prop_single", "prop_multi", "confidence_ineq", "sia")
MAX_ATTEMPTS = 10_000
LEMMA_SLACK = 1e-12

# Worked four-state example: symmetric proposal, target (0.3, 0.3, 0.3, 0.1)
GOLDEN_PHI = np.array([
    [1 / 3, 1 / 4, 1 / 4, 1 / 6],
    [1 / 4, 1 / 3, 1 / 4, 1 / 6],
    [1 / 4, 1 / 4, 1 / 3, 1 / 6],
    [1 / 6, 1 / 6, 1 / 6, 1 / 2],
])
GOLDEN_PI = np.array([0.3, 0.3, 0.3, 0.1])
GOLDEN_P = np.array([
    [4 / 9, 1 / 4, 1 / 4, 1 / 18],
    [1 / 4, 4 / 9, 1 / 4, 1 / 18],
    [1 / 4, 1 / 4, 4 / 9, 1 / 18],
    [1 / 6, 1 / 6, 1 / 6, 1 / 2],
])


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    failed: int = 0
    counterexamples: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def record(self, ok: bool, **details) -> None:
        if ok:
            self.passed += 1
        else:
            self.failed += 1
            self.counterexamples.append(details)


def random_stochastic(n: int, rng: np.random.Generator, alpha=1.0) -> np.ndarray:
    """Rows drawn independently from Dirichlet(alpha); strictly positive almost surely."""
    alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (n, n))
    w = np.vstack([rng.dirichlet(alpha[i]) for i in range(n)])
    # Dirichlet draws can underflow to exact zeros for small alpha
    w = np.maximum(w, 1e-300)
    return w / w.sum(axis=1, keepdims=True)


def _proposal_alpha(n: int, regular: list[int], boost: float) -> np.ndarray:
    alpha = np.ones((n, n))
    alpha[:, regular] += boost
    alpha[np.arange(n), np.arange(n)] += boost
    return alpha


def sample_single_lowquality(n: int, b: int, rng, boost: float = 2.0, max_attempts: int = MAX_ATTEMPTS) -> np.ndarray:
    """Rejection-sample a positive stochastic matrix meeting the single low-quality-node conditions."""
    regular = [k for k in range(n) if k != b]
    alpha = _proposal_alpha(n, regular, boost)
    for _ in range(max_attempts):
        w = random_stochastic(n, rng, alpha)
        if cm.check_single_lowquality_conditions(w, b):
            return w
    raise GenerationError(f"no single low-quality sample for N={n} after {max_attempts} attempts")


def sample_multi_lowquality(
    n: int, lowq: list[int], rng, boost: float = 2.0, max_attempts: int = MAX_ATTEMPTS
) -> np.ndarray:
    """Rejection-sample a positive stochastic matrix meeting the multi low-quality-node conditions."""
    regular = [k for k in range(n) if k not in lowq]
    alpha = _proposal_alpha(n, regular, boost)
    for _ in range(max_attempts):
        w = random_stochastic(n, rng, alpha)
        if cm.check_multi_lowquality_conditions(w, regular, lowq):
            return w
    raise GenerationError(f"no multi low-quality sample for N={n}, B={lowq} after {max_attempts} attempts")


def suite_scrambling_lemma(trials: int, rng) -> SuiteResult:
    res = SuiteResult("scrambling_lemma")
    for _ in range(trials):
        n = int(rng.integers(2, 9))
        length = int(rng.integers(1, 11))
        chain = [random_stochastic(n, rng) for _ in range(length)]
        delta = cm.row_difference_delta(cm.chain_product(chain))
        bound = float(np.prod([cm.scrambling_coefficient(w) for w in chain]))
        res.record(delta <= bound + LEMMA_SLACK, delta=delta, bound=bound, matrices=chain)
    return res


def _golden_metropolis(res: SuiteResult) -> None:
    p = cm.metropolis_from_stationary(GOLDEN_PHI, GOLDEN_PI)
    err = float(np.abs(p - GOLDEN_P).max())
    res.record(err <= 1e-12, check="golden transition matrix", max_error=err, matrices=[p])
    pi = cm.stationary_distribution(p)
    err = float(np.abs(pi - GOLDEN_PI).max())
    res.record(err <= 1e-8, check="golden stationary distribution", max_error=err, matrices=[p])


def random_symmetric_stochastic(n: int, rng, max_attempts: int = MAX_ATTEMPTS) -> np.ndarray:
    """Strictly positive, symmetric (hence doubly stochastic) and self-confident matrix.

    A diagonally heavy symmetric matrix is balanced by symmetric Sinkhorn scaling;
    draws whose diagonal is not the row maximum are rejected.
    """
    for _ in range(max_attempts):
        a = rng.uniform(0.1, 1.0, size=(n, n))
        a = a + a.T
        a[np.diag_indices(n)] = a.sum(axis=1) / 2
        for _ in range(1000):
            a = a / a.sum(axis=1, keepdims=True)
            a = (a + a.T) / 2
            if np.abs(a.sum(axis=1) - 1).max() < 1e-14:
                break
        # fold residual drift into the diagonal, which keeps symmetry
        a[np.diag_indices(n)] += 1.0 - a.sum(axis=1)
        if np.all(np.diag(a) >= a.max(axis=1)):
            return a
    raise GenerationError(f"no self-confident symmetric sample for N={n} after {max_attempts} attempts")


def suite_metropolis(trials: int, rng) -> SuiteResult:
    res = SuiteResult("metropolis")
    _golden_metropolis(res)
    for _ in range(trials):
        n = int(rng.integers(2, 9))
        phi = random_symmetric_stochastic(n, rng)
        pi = rng.dirichlet(np.ones(n))
        pi = np.maximum(pi, 1e-3)
        pi /= pi.sum()
        p = cm.metropolis_from_stationary(phi, pi)
        stat = cm.stationary_distribution(p, tol=1e-13)
        ok = (
            cm.is_row_stochastic(p)
            and np.all(np.diag(p) >= np.diag(phi) - 1e-15)
            and np.abs(stat - pi).max() <= 1e-8
        )
        res.record(bool(ok), pi=pi, stationary=stat, matrices=[phi, p])
    return res


def suite_prop_single(trials: int, rng) -> SuiteResult:
    res = SuiteResult("prop_single")
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        b = int(rng.integers(n))
        w1 = sample_single_lowquality(n, b, rng)
        w2 = sample_single_lowquality(n, b, rng)
        prod = w2 @ w1
        res.record(cm.check_single_lowquality_conditions(prod, b), low_quality=b, matrices=[w1, w2, prod])
    return res


def suite_prop_multi(trials: int, rng) -> SuiteResult:
    res = SuiteResult("prop_multi")
    for _ in range(trials):
        n = int(rng.integers(3, 7))
        k = int(rng.integers(1, n - 1))
        lowq = sorted(int(v) for v in rng.choice(n, size=k, replace=False))
        regular = [v for v in range(n) if v not in lowq]
        w1 = sample_multi_lowquality(n, lowq, rng)
        w2 = sample_multi_lowquality(n, lowq, rng)
        prod = w2 @ w1
        res.record(
            cm.check_multi_lowquality_conditions(prod, regular, lowq), low_quality=lowq, matrices=[w1, w2, prod]
        )
    return res


def suite_confidence_ineq(trials: int, rng) -> SuiteResult:
    res = SuiteResult("confidence_ineq")
    done = 0
    while done < trials:
        n = int(rng.integers(2, 9))
        a = rng.uniform(0.01, 1.0, n)
        b = rng.uniform(0.01, 1.0, n)
        bad = int(rng.integers(n))
        ra, rb = a[bad] / a.sum(), b[bad] / b.sum()
        if ra == rb:
            continue
        if ra > rb:
            a, b = b, a
        c1 = float(rng.uniform(1.0, 10.0))
        c2 = float(rng.uniform(0.0, 1.0))
        if c1 == 1.0 or c2 == 0.0:
            continue
        ok = cm.confidence_weighting_check(a, b, bad, c1, c2)
        res.record(ok, a=a, b=b, bad=bad, c1=c1, c2=c2)
        done += 1
    return res


def suite_sia(trials: int, rng) -> SuiteResult:
    """Positive matrices are SIA and so are their products; two fixed negative controls are not."""
    res = SuiteResult("sia")
    controls = [np.eye(3), np.roll(np.eye(3), 1, axis=1)]
    for w in controls:
        res.record(not cm.is_sia(w), check="negative control", matrices=[w])
    for _ in range(trials):
        n = int(rng.integers(2, 9))
        chain = [random_stochastic(n, rng) for _ in range(int(rng.integers(1, 6)))]
        prod = cm.chain_product(chain)
        res.record(all(cm.is_sia(w) for w in chain) and cm.is_sia(prod), matrices=chain + [prod])
    return res


SUITE_FUNCS = {
    "scrambling_lemma": suite_scrambling_lemma,
    "metropolis": suite_metropolis,
    "prop_single": suite_prop_single,
    "prop_multi": suite_prop_multi,
    "confidence_ineq": suite_confidence_ineq,
    "sia": suite_sia,
}


def run_suite(name: str, trials: int, seed: int = 0) -> list[SuiteResult]:
    """Run one suite, or every suite for ``"all"``; each suite gets its own stream."""
    if trials < 1:
        raise InvalidInputError("trials must be at least 1")
    names = SUITES if name == "all" else (name,)
    unknown = [s for s in names if s not in SUITE_FUNCS]
    if unknown:
        raise InvalidInputError(f"unknown suite {unknown[0]!r}; expected one of {SUITES + ('all',)}")
    return [SUITE_FUNCS[s](trials, make_rng(seed, 100 + SUITES.index(s))) for s in names]


def format_counterexample(example: dict) -> str:
    lines = []
    for key, value in example.items():
        if key == "matrices":
            continue
        if isinstance(value, np.ndarray):
            value = ",".join(repr(float(v)) for v in value)
        lines.append(f"  {key}: {value}")
    for k, m in enumerate(example.get("matrices", [])):
        lines.append(f"  matrix {k}:")
        lines.extend("    " + ",".join(repr(float(v)) for v in row) for row in np.asarray(m))
    return "\n".join(lines)
