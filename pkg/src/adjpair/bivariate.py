"""Joint model ``f1(x) f2(y) {1 + alpha h1(x) h2(y)}`` and its properties."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import adjustments as adj_mod
from . import marginals as mg
from .adjustments import AdjustmentSpec
from .errors import ConfigurationError, DomainError, InvalidModelError
from .marginals import Family, MarginalSpec

__all__ = [
    "BivariateModel",
    "CorrRange",
    "alpha_range",
    "exact_alpha_range",
    "corr_range",
    "four_region_density",
    "binormal_ratio",
    "phi_kernel_conditional_variance",
]

# bracket values below this are reported rather than floored
_NEG_TOL = -1e-12


def alpha_range(m1, m2, adj1, adj2):
    """Open interval ``(-1/(c1 c2), 1/(c1 c2))`` on which the model is proper."""
    c = adj_mod.bound(adj1, m1) * adj_mod.bound(adj2, m2)
    return -1.0 / c, 1.0 / c


def exact_alpha_range(m1, m2, adj1, adj2):
    """Sharp positivity range of ``1 + alpha h1 h2``.

    The symmetric range of :func:`alpha_range` is sufficient; this one uses
    the actual extremes of the product ``h1(x) h2(y)`` and is never narrower.
    Endpoints are excluded.
    """
    l1, u1 = adj_mod.h_range(adj1, m1)
    l2, u2 = adj_mod.h_range(adj2, m2)
    prods = (l1 * l2, l1 * u2, u1 * l2, u1 * u2)
    top, bottom = max(prods), min(prods)
    lo = -1.0 / top if top > 0 else -math.inf
    hi = -1.0 / bottom if bottom < 0 else math.inf
    return lo, hi


@dataclass(frozen=True)
class CorrRange:
    lo: float
    hi: float


def corr_range(m1, m2, adj1, adj2) -> CorrRange:
    """Attainable correlation over the symmetric admissible range."""
    _, hi_alpha = alpha_range(m1, m2, adj1, adj2)
    per_alpha = _corr_per_alpha(m1, m2, adj1, adj2)
    hi = abs(per_alpha) * hi_alpha
    return CorrRange(-hi if hi else 0.0, hi)


def _corr_per_alpha(m1, m2, adj1, adj2):
    _, s1 = mg.mean_sd(m1)
    _, s2 = mg.mean_sd(m2)
    return adj_mod.nu(adj1, m1) * adj_mod.nu(adj2, m2) / (s1 * s2)


@dataclass(frozen=True)
class BivariateModel:
    """Two marginals tied together by centred adjustments and ``alpha``.

    ``admissibility`` selects the range that ``alpha`` is checked against at
    construction: ``"bound"`` (symmetric, ``|alpha| < 1/(c1 c2)``) or
    ``"exact"`` (sharp positivity range).  Boundary values are rejected.
    """

    m1: MarginalSpec
    m2: MarginalSpec
    adj1: AdjustmentSpec
    adj2: AdjustmentSpec
    alpha: float = 0.0
    admissibility: str = "bound"

    def __post_init__(self):
        adj_mod.check_compatible(self.adj1, self.m1)
        adj_mod.check_compatible(self.adj2, self.m2)
        if self.admissibility not in ("bound", "exact"):
            raise ConfigurationError(f"unknown admissibility rule {self.admissibility!r}")
        lo, hi = self.alpha_range()
        if not (lo < self.alpha < hi):
            raise InvalidModelError(f"alpha={self.alpha:g} outside the admissible range ({lo:g}, {hi:g})")

    def alpha_range(self):
        if self.admissibility == "exact":
            return exact_alpha_range(self.m1, self.m2, self.adj1, self.adj2)
        return alpha_range(self.m1, self.m2, self.adj1, self.adj2)

    def with_alpha(self, alpha):
        return BivariateModel(self.m1, self.m2, self.adj1, self.adj2, alpha, self.admissibility)

    @property
    def discrete(self):
        return self.m1.discrete and self.m2.discrete

    def h1(self, x):
        return adj_mod.h(self.adj1, self.m1, x)

    def h2(self, y):
        return adj_mod.h(self.adj2, self.m2, y)

    def bracket(self, x, y):
        """``1 + alpha h1(x) h2(y)``; raises if it is materially negative."""
        br = 1.0 + self.alpha * self.h1(x) * self.h2(y)
        if np.any(br < _NEG_TOL):
            raise InvalidModelError("joint density is negative at a support point")
        return np.maximum(br, 0.0)

    def density(self, x, y):
        """Joint mass/density at ``(x, y)`` (broadcasting)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        f1 = mg.pmf_or_pdf(self.m1, x)
        f2 = mg.pmf_or_pdf(self.m2, y)
        return f1 * f2 * self.bracket(x, y)

    def conditional(self, values, given, axis=0):
        """Conditional density of the other coordinate.

        ``axis=0`` conditions on ``X = given`` and returns ``f2(y | x)`` at
        ``values``; ``axis=1`` conditions on ``Y = given`` and returns
        ``f1(x | y)``.
        """
        if axis == 0:
            mg.logpmf(self.m1, given)
            return mg.pmf_or_pdf(self.m2, values) * self.bracket(given, values)
        if axis == 1:
            mg.logpmf(self.m2, given)
            return mg.pmf_or_pdf(self.m1, values) * self.bracket(values, given)
        raise DomainError("axis must be 0 or 1")

    def correlation(self):
        return self.alpha * _corr_per_alpha(self.m1, self.m2, self.adj1, self.adj2)

    def corr_range(self):
        return corr_range(self.m1, self.m2, self.adj1, self.adj2)

    def sample(self, n, seed):
        """Draw ``n`` pairs: ``X`` from its marginal, then ``Y`` given ``X``.

        Discrete conditionals are inverted through their cdf on the truncated
        support (residual tail mass goes to the last point); continuous ones
        are drawn by exact rejection from ``f2`` with envelope
        ``1 + |alpha| c1 c2``.
        """
        n = int(n)
        if n < 1:
            raise DomainError("sample size must be >= 1")
        rng = np.random.default_rng(seed)
        xs = _draw_marginal(self.m1, n, rng)
        ys = np.empty(n)
        if self.m2.discrete:
            support = mg.truncated_support(self.m2)
            f2 = mg.pmf_or_pdf(self.m2, support)
            h2 = self.h2(support)
            u = rng.random(n)
            for xv in np.unique(xs):
                sel = xs == xv
                probs = f2 * np.maximum(1.0 + self.alpha * self.h1(xv) * h2, 0.0)
                cum = np.cumsum(probs)
                cum[-1] = max(cum[-1], 1.0)
                ys[sel] = support[np.searchsorted(cum, u[sel], side="right").clip(max=len(support) - 1)]
        else:
            envelope = 1.0 + abs(self.alpha) * adj_mod.bound(self.adj1, self.m1) * adj_mod.bound(self.adj2, self.m2)
            todo = np.arange(n)
            while todo.size:
                prop = _draw_marginal(self.m2, todo.size, rng)
                accept = rng.random(todo.size) * envelope <= 1.0 + self.alpha * self.h1(xs[todo]) * self.h2(prop)
                ys[todo[accept]] = prop[accept]
                todo = todo[~accept]
        if self.m1.discrete:
            xs = xs.astype(np.int64)
        if self.m2.discrete:
            ys = ys.astype(np.int64)
        return np.column_stack([xs, ys])


def _draw_marginal(m, n, rng):
    if m.discrete:
        support = mg.truncated_support(m)
        cum = np.cumsum(mg.pmf_or_pdf(m, support))
        cum[-1] = max(cum[-1], 1.0)
        return support[np.searchsorted(cum, rng.random(n), side="right").clip(max=len(support) - 1)]
    if m.family is Family.NORMAL:
        loc, scale = m.params
        return loc + scale * rng.standard_normal(n)
    return -np.log1p(-rng.random(n)) / m.params[0]


def four_region_density(theta1, theta2, alpha, x, y):
    """Poisson pair with the zero-indicator adjustment, region by region."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    e1, e2 = math.exp(-theta1), math.exp(-theta2)
    base = np.exp(mg.poisson_logpmf(x, theta1) + mg.poisson_logpmf(y, theta2))
    factor = np.select(
        [(x == 0) & (y == 0), (x == 0) & (y >= 1), (x >= 1) & (y == 0)],
        [
            1.0 + alpha * (1.0 - e1) * (1.0 - e2),
            1.0 - alpha * (1.0 - e1) * e2,
            1.0 - alpha * e1 * (1.0 - e2),
        ],
        default=1.0 + alpha * e1 * e2,
    )
    return base * factor


def binormal_ratio(x, y, rho):
    """Binormal density over the product of standard normals."""
    if not abs(rho) < 1:
        raise DomainError("|rho| must be < 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r2 = 1.0 - rho * rho
    return np.exp(rho / r2 * (x * y - 0.5 * rho * (x * x + y * y))) / math.sqrt(r2)


def phi_kernel_conditional_variance(alpha, x):
    """Var(Y | x) under standard normal marginals with the phi-kernel."""
    a = 1.0 / (2.0 * math.sqrt(math.pi))
    return 1.0 - 0.5 * alpha * a * (mg.normal_pdf(x) - a)
