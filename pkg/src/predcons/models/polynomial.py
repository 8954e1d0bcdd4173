"""Polynomial agents with a closed-form collaborative fit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError, NumericalError

RIDGE = 1e-10


@dataclass(frozen=True)
class PolynomialModel:
    # highest degree first, the np.polyval convention
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=np.float64).reshape(-1)
        if c.size == 0:
            raise InvalidInputError("a polynomial needs at least one coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def predict(self, xs) -> np.ndarray:
        return poly_predict(self, xs)

    @classmethod
    def zeros(cls, degree: int) -> PolynomialModel:
        return cls(np.zeros(degree + 1))


def poly_predict(model: PolynomialModel, xs) -> np.ndarray:
    return np.polyval(model.coefficients, np.asarray(xs, dtype=np.float64))


def normal_equations(local_x, local_y, shared_x, pseudo, degree: int, lam: float):
    """System ``M theta = r`` whose solution minimizes mean local SE + lam * mean shared SE."""
    a = np.vander(np.asarray(local_x, dtype=np.float64), degree + 1)
    y = np.asarray(local_y, dtype=np.float64)
    m = a.T @ a / a.shape[0]
    r = a.T @ y / a.shape[0]
    if lam > 0:
        b = np.vander(np.asarray(shared_x, dtype=np.float64), degree + 1)
        psi = np.asarray(pseudo, dtype=np.float64)
        m = m + lam * (b.T @ b) / b.shape[0]
        r = r + lam * (b.T @ psi) / b.shape[0]
    return m, r


def objective_gradient(theta, local_x, local_y, shared_x, pseudo, lam: float) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    m, r = normal_equations(local_x, local_y, shared_x, pseudo, theta.size - 1, lam)
    return 2.0 * (m @ theta - r)


def poly_fit_collaborative(local_x, local_y, shared_x, pseudo, degree: int, lam: float) -> PolynomialModel:
    """Exact minimizer of ``mean((A theta - y)^2) + lam * mean((B theta - psi)^2)``.

    Falls back to a ``1e-10`` ridge when the normal matrix is rank deficient
    (e.g. fewer distinct x values than coefficients).
    """
    local_x = np.asarray(local_x, dtype=np.float64)
    local_y = np.asarray(local_y, dtype=np.float64)
    if degree < 0:
        raise InvalidInputError("degree must be non-negative")
    if lam < 0:
        raise InvalidInputError("lambda must be non-negative")
    if local_x.size == 0 or local_x.shape != local_y.shape:
        raise InvalidInputError("need matching, non-empty local x and y")
    if lam > 0:
        shared_x = np.asarray(shared_x, dtype=np.float64)
        if shared_x.size == 0 or np.shape(pseudo) != shared_x.shape:
            raise InvalidInputError("need matching, non-empty shared x and pseudo-labels")
    m, r = normal_equations(local_x, local_y, shared_x, pseudo, degree, lam)
    if np.linalg.matrix_rank(m) < m.shape[0]:
        m = m + RIDGE * np.eye(m.shape[0])
    try:
        theta = np.linalg.solve(m, r)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"normal equations are singular even with ridge: {exc}") from exc
    if not np.all(np.isfinite(theta)):
        raise NumericalError("normal-equation solution is not finite")
    return PolynomialModel(theta)


def poly_local_fit(x, y, degree: int) -> PolynomialModel:
    return poly_fit_collaborative(x, y, None, None, degree, 0.0)
