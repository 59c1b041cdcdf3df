"""Expected contingency tables and Pearson goodness-of-fit summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import marginals as mg
from .datasets import CountTable
from .errors import DataError, DomainError

__all__ = ["GofReport", "expected_table", "pearson", "tail_masses"]


@dataclass
class GofReport:
    expected: np.ndarray
    residuals: np.ndarray
    K: float
    max_abs_residual: float

    def to_dict(self):
        return {
            "expected": self.expected.tolist(),
            "residuals": self.residuals.tolist(),
            "K": float(self.K),
            "max_abs_residual": float(self.max_abs_residual),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["expected"], dtype=float), np.array(d["residuals"], dtype=float),
                   float(d["K"]), float(d["max_abs_residual"]))


def tail_masses(m, adjust, k):
    """Cell masses ``f(0..k-1)``, their ``f h`` products, and the pooled
    ``X >= k`` pair ``(P(X >= k), sum_{x >= k} f h)``.

    The pooled ``f h`` sum is obtained from the zero mean of ``h``, so no
    infinite tail is summed.
    """
    xs = np.arange(k, dtype=float)
    f = mg.pmf_or_pdf(m, xs)
    fh = f * adjust(xs)
    return f, fh, float(mg.sf(m, k - 1)), -float(fh.sum())


def expected_table(model, n, shape):
    """``n`` times the model cell probabilities on a ``shape`` grid.

    The last row and column pool everything at or above their index, so the
    table sums to ``n``.
    """
    if not model.discrete:
        raise DomainError("expected tables need discrete marginals")
    r, c = shape
    if r < 2 or c < 2:
        raise DomainError("table needs at least two rows and two columns")
    f1, fh1, s1, t1 = tail_masses(model.m1, model.h1, r - 1)
    f2, fh2, s2, t2 = tail_masses(model.m2, model.h2, c - 1)
    p1 = np.append(f1, s1)
    p2 = np.append(f2, s2)
    q1 = np.append(fh1, t1)
    q2 = np.append(fh2, t2)
    return n * (np.outer(p1, p2) + model.alpha * np.outer(q1, q2))


def pearson(table, expected):
    """Residuals ``(N - E) / sqrt(E)``, their sum of squares ``K`` and the
    largest absolute residual.

    Raises:
        DataError: if shapes differ or some expected cell is not positive.
    """
    counts = table.counts if isinstance(table, CountTable) else np.asarray(table)
    counts = counts.astype(float)
    expected = np.asarray(expected, dtype=float)
    if counts.shape != expected.shape:
        raise DataError(f"table shape {counts.shape} does not match expected {expected.shape}")
    if np.any(expected <= 0):
        i, j = np.argwhere(expected <= 0)[0]
        raise DataError(f"expected count at cell ({i}, {j}) is not positive; residual undefined")
    res = (counts - expected) / np.sqrt(expected)
    return GofReport(expected, res, float(np.sum(res * res)), float(np.max(np.abs(res))))
