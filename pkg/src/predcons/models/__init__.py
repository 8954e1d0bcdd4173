"""Agent-local learners and their flat-text serialization.

Text format: a header line (``poly <degree>`` or ``mlp <size> <size> ...``)
followed by one line of whitespace-separated parameters written with ``repr`` so
they round-trip exactly. MLP parameters are ordered W1, b1, W2, b2, ... with
weights in row-major (fan_in, fan_out) layout.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError
from .mlp import (
    MlpModel,
    TrainConfig,
    flat_grad,
    loss_and_grad,
    mlp_forward,
    mlp_local_fit,
    mlp_train_collaborative,
    one_hot,
)
from .polynomial import (
    PolynomialModel,
    objective_gradient,
    poly_fit_collaborative,
    poly_local_fit,
    poly_predict,
)

__all__ = [
    "MlpModel",
    "PolynomialModel",
    "TrainConfig",
    "dumps_model",
    "flat_grad",
    "loads_model",
    "local_fit",
    "loss_and_grad",
    "mlp_forward",
    "mlp_train_collaborative",
    "objective_gradient",
    "one_hot",
    "poly_fit_collaborative",
    "poly_predict",
    "predict",
]


def predict(model, inputs) -> np.ndarray:
    """Predictions on ``inputs``: scalars for polynomials, class probabilities for MLPs."""
    if isinstance(model, PolynomialModel):
        return poly_predict(model, inputs)
    return mlp_forward(model, inputs)


def local_fit(model, x, y, config: TrainConfig | None = None):
    """Fit to local data alone (lambda = 0).

    ``model`` is a :class:`PolynomialModel` (only its degree is used) or an initialized
    :class:`MlpModel`.
    """
    if len(x) == 0:
        raise InvalidInputError("local data is empty")
    if isinstance(model, PolynomialModel):
        return poly_local_fit(x, y, model.degree)
    return mlp_local_fit(model, x, y, config or TrainConfig())


def dumps_model(model) -> str:
    if isinstance(model, PolynomialModel):
        header = f"poly {model.degree}"
        params = model.coefficients
    else:
        header = "mlp " + " ".join(str(s) for s in model.layer_sizes)
        params = model.flat()
    return header + "\n" + " ".join(repr(float(v)) for v in params) + "\n"


def loads_model(text: str):
    lines = text.strip().splitlines()
    if not lines:
        raise InvalidInputError("empty model text")
    head = lines[0].split()
    params = np.array([float(v) for v in " ".join(lines[1:]).split()])
    if head[0] == "poly":
        degree = int(head[1])
        if params.size != degree + 1:
            raise InvalidInputError(f"expected {degree + 1} coefficients, got {params.size}")
        return PolynomialModel(params)
    if head[0] == "mlp":
        return MlpModel(tuple(int(s) for s in head[1:])).with_flat(params)
    raise InvalidInputError(f"unknown model kind {head[0]!r}")
