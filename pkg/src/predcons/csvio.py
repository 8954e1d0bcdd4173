"""CSV readers and writers. Floats are written with ``repr`` so they round-trip exactly."""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable
from pathlib import Path

import numpy as np

from .errors import InvalidInputError


def fmt(x) -> str:
    return repr(float(x))


def matrix_to_csv(w) -> str:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2:
        raise InvalidInputError("expected a 2-d matrix")
    return "".join(",".join(fmt(v) for v in row) + "\n" for row in w)


def matrix_from_csv(text: str) -> np.ndarray:
    rows = [line for line in text.splitlines() if line.strip()]
    try:
        data = [[float(v) for v in line.split(",")] for line in rows]
    except ValueError as exc:
        raise InvalidInputError(f"bad matrix CSV: {exc}") from exc
    if not data or len({len(r) for r in data}) != 1:
        raise InvalidInputError("matrix CSV rows are empty or ragged")
    return np.array(data)


def write_matrix_csv(path, w) -> None:
    Path(path).write_text(matrix_to_csv(w))


def read_matrix_csv(path) -> np.ndarray:
    return matrix_from_csv(Path(path).read_text())


def write_rows(path, header: list[str], rows: Iterable[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue())


def write_dataset_csv(path, x, y=None) -> None:
    """x columns first, then the label column; unlabeled sets omit it."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    header = [f"x{k}" for k in range(x.shape[1])]
    if y is None:
        rows = ([fmt(v) for v in row] for row in x)
    else:
        header.append("label")
        y = np.asarray(y)
        rows = ([fmt(v) for v in row] + [str(int(lab)) if np.issubdtype(y.dtype, np.integer) else fmt(lab)]
                for row, lab in zip(x, y))
    write_rows(path, header, rows)


def read_dataset_csv(path) -> tuple[np.ndarray, np.ndarray | None]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [row for row in reader]
    has_label = header[-1] == "label"
    ncol = len(header) - int(has_label)
    x = np.array([[float(v) for v in row[:ncol]] for row in data]).reshape(len(data), ncol)
    y = np.array([int(row[-1]) for row in data]) if has_label else None
    return x, y


def write_predictions_csv(path, preds) -> None:
    """Long format: one line per (agent, sample); regression has a single ``value`` column."""
    preds = np.asarray(preds, dtype=np.float64)
    if preds.ndim == 2:
        header = ["agent", "sample", "value"]
        rows = ([str(i), str(s), fmt(preds[i, s])] for i in range(preds.shape[0]) for s in range(preds.shape[1]))
    else:
        header = ["agent", "sample"] + [f"p{c}" for c in range(preds.shape[2])]
        rows = ([str(i), str(s)] + [fmt(v) for v in preds[i, s]]
                for i in range(preds.shape[0]) for s in range(preds.shape[1]))
    write_rows(path, header, rows)


METRICS_HEADER = ["round", "agent", "metric", "value"]


def metrics_rows(round_: int, per_agent: list[dict[str, float]], disagreement: float) -> list[list[str]]:
    rows = []
    for i, m in enumerate(per_agent):
        for name in sorted(m):
            rows.append([str(round_), str(i), name, fmt(m[name])])
    rows.append([str(round_), "all", "disagreement", fmt(disagreement)])
    return rows


def append_metrics(path, rows: list[list[str]]) -> None:
    path = Path(path)
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if new:
            writer.writerow(METRICS_HEADER)
        writer.writerows(rows)
