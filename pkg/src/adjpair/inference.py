"""Likelihood fitting, observed information and profile confidence curves.

Each likelihood class binds a dataset and exposes ``loglik(params)``, which
returns ``-inf`` for infeasible parameters (non-positive rates, dependence
outside the admissible range, a non-positive bracket at an observed pair).
:func:`fit` maximises it with a restarted Nelder-Mead simplex, polishes with
Newton steps on a finite-difference Hessian, and reports standard errors from
the observed information.  :func:`profile` turns any scalar parameter into a
:class:`ConfidenceCurve`.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from . import adjustments as adj_mod
from . import marginals as mg
from .adjustments import AdjustmentSpec
from .bivariate import BivariateModel, exact_alpha_range, alpha_range
from .datasets import CountTable, PairSample, Studies
from .errors import ConfigurationError, ConvergenceError, DataError
from .marginals import MarginalSpec

__all__ = [
    "FitResult",
    "ConfidenceCurve",
    "Poisson3Likelihood",
    "Poisson4Likelihood",
    "PoissonLimitLikelihood",
    "IndependentPoissonLikelihood",
    "Binomial2Likelihood",
    "AuditC3Likelihood",
    "CorrelationReparam",
    "loglik_poisson3",
    "fit",
    "profile",
    "profile_correlation",
    "independence_score_test",
    "observed_information",
    "numeric_gradient",
    "default_auditc_thresholds",
]


# Results --------------------------------------------------------------------

def _nullable(values):
    """Floats for JSON, with non-finite entries as ``None``."""
    return [float(v) if np.isfinite(v) else None for v in np.asarray(values, dtype=float)]


def _from_nullable(values):
    return np.array([math.nan if v is None else v for v in values], dtype=float)


@dataclass
class FitResult:
    names: tuple
    estimates: np.ndarray
    se: np.ndarray
    loglik_max: float
    info: np.ndarray
    converged: bool
    n_evals: int
    model: str = ""
    settings: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return float(self.estimates[self.names.index(name)])

    def se_of(self, name):
        return float(self.se[self.names.index(name)])

    def to_dict(self):
        return {
            "model": self.model,
            "settings": dict(self.settings),
            "names": list(self.names),
            "estimates": [float(v) for v in self.estimates],
            "se": _nullable(self.se),
            "loglik_max": float(self.loglik_max),
            "info": [_nullable(row) for row in np.atleast_2d(self.info)],
            "converged": bool(self.converged),
            "n_evals": int(self.n_evals),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            names=tuple(d["names"]),
            estimates=np.array(d["estimates"], dtype=float),
            se=_from_nullable(d["se"]),
            loglik_max=float(d["loglik_max"]),
            info=np.array([_from_nullable(row) for row in d["info"]]),
            converged=bool(d["converged"]),
            n_evals=int(d["n_evals"]),
            model=d.get("model", ""),
            settings=dict(d.get("settings", {})),
        )


@dataclass
class ConfidenceCurve:
    """Profile deviance ``D`` and confidence ``cc = chi1_cdf(D)`` on a grid.

    Grid points where no admissible parameter exists carry ``D = inf`` and
    ``cc = 1``; points whose inner optimisation failed are flagged in
    ``failed`` and carry NaN.
    """

    param_name: str
    grid: np.ndarray
    deviance: np.ndarray
    cc: np.ndarray
    point_estimate: float
    profile_loglik: np.ndarray
    failed: np.ndarray

    def interval(self, level):
        """Linear-interpolation endpoints of ``{cc <= level}`` around the estimate.

        An end that never reaches ``level`` inside the grid is returned as
        ``-inf`` / ``inf``.  If the neighbouring grid point is infeasible the
        last feasible grid value is returned instead of interpolating.
        """
        grid, cc = self.grid, self.cc
        ok = ~np.isnan(cc)
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            return -math.inf, math.inf
        i0 = idx[np.argmin(np.abs(grid[idx] - self.point_estimate))]
        return self._walk(i0, level, -1), self._walk(i0, level, +1)

    def _walk(self, i0, level, step):
        grid, cc = self.grid, self.cc
        prev = i0
        i = i0 + step
        while 0 <= i < len(grid):
            if np.isnan(cc[i]):
                i += step
                continue
            if cc[i] >= level:
                if not np.isfinite(self.deviance[i]):
                    return float(grid[prev])
                c0, c1 = cc[prev], cc[i]
                if c1 == c0:
                    return float(grid[i])
                w = (level - c0) / (c1 - c0)
                return float(grid[prev] + w * (grid[i] - grid[prev]))
            prev = i
            i += step
        return -math.inf if step < 0 else math.inf

    def to_dict(self):
        def clean(a):
            return [None if not np.isfinite(v) else float(v) for v in np.asarray(a, dtype=float)]

        return {
            "param_name": self.param_name,
            "point_estimate": float(self.point_estimate),
            "grid": clean(self.grid),
            "deviance": clean(self.deviance),
            "cc": clean(self.cc),
            "profile_loglik": clean(self.profile_loglik),
            "failed": [bool(v) for v in self.failed],
        }

    @classmethod
    def from_dict(cls, d):
        def arr(vals, missing):
            return np.array([missing if v is None else v for v in vals], dtype=float)

        failed = np.array(d["failed"], dtype=bool)
        deviance = arr(d["deviance"], math.inf)
        cc = arr(d["cc"], math.nan)
        deviance[failed] = math.nan
        return cls(
            param_name=d["param_name"],
            grid=arr(d["grid"], math.nan),
            deviance=deviance,
            cc=cc,
            point_estimate=float(d["point_estimate"]),
            profile_loglik=np.where(failed, math.nan, arr(d["profile_loglik"], -math.inf)),
            failed=failed,
        )


# Likelihoods ----------------------------------------------------------------

class Likelihood:
    """Base class: subclasses set ``name`` and ``names`` and implement ``loglik``."""

    name = ""
    names: tuple = ()
    # per-parameter optimisation transform: "id" or "log"
    transforms: tuple = ()

    def loglik(self, params):
        raise NotImplementedError

    def start(self):
        raise NotImplementedError

    def steps(self):
        return np.full(len(self.names), 0.1)

    def settings(self):
        return {}

    def to_internal(self, params):
        params = np.asarray(params, dtype=float)
        out = params.copy()
        for i, tr in enumerate(self._transforms()):
            if tr == "log":
                out[i] = math.log(params[i]) if params[i] > 0 else -math.inf
        return out

    def from_internal(self, z):
        z = np.asarray(z, dtype=float)
        out = z.copy()
        for i, tr in enumerate(self._transforms()):
            if tr == "log":
                out[i] = math.exp(min(z[i], 700.0))
        return out

    def _transforms(self):
        return self.transforms or ("id",) * len(self.names)


def _admissible(alpha, lo_hi):
    lo, hi = lo_hi
    return lo < alpha < hi


class _PoissonPairBase(Likelihood):
    """Shared machinery for the Poisson pair models on count data.

    ``censor_at`` switches the top cell of each margin from an exact count to
    a "K or more" event whose probability aggregates the tail.
    """

    def __init__(self, data, censor_at=None, admissibility="exact"):
        if isinstance(data, CountTable):
            data = data.to_pairs()
        if not isinstance(data, PairSample):
            raise DataError("Poisson models need pair data")
        if admissibility not in ("exact", "bound"):
            raise ConfigurationError(f"unknown admissibility rule {admissibility!r}")
        self.data = data
        self.censor_at = censor_at
        self.admissibility = admissibility
        self.x, self.y, self.w = data.unique_counts()
        self.n = float(self.w.sum())
        if censor_at is not None:
            if np.any(self.x > censor_at) or np.any(self.y > censor_at):
                raise DataError("censored likelihood expects values capped at censor_at")
            self.cx = self.x == censor_at
            self.cy = self.y == censor_at

    def settings(self):
        s = {"censor_at": self.censor_at, "admissibility": self.admissibility}
        s.update(self._extra_settings())
        return s

    def _extra_settings(self):
        return {}

    def start(self):
        xbar = float((self.w * self.x).sum() / self.n)
        ybar = float((self.w * self.y).sum() / self.n)
        return np.array([max(xbar, 0.05), max(ybar, 0.05), 0.0])

    def steps(self):
        return np.array([0.05, 0.05, 0.2])

    def _range(self, m1, m2, adj1, adj2):
        if self.admissibility == "exact":
            return exact_alpha_range(m1, m2, adj1, adj2)
        return alpha_range(m1, m2, adj1, adj2)

    def _loglik(self, theta1, theta2, alpha, adj):
        if not (theta1 > 0 and theta2 > 0 and math.isfinite(alpha)):
            return -math.inf
        m1, m2 = MarginalSpec.poisson(theta1), MarginalSpec.poisson(theta2)
        if not _admissible(alpha, self._range(m1, m2, adj, adj)):
            return -math.inf
        h1 = adj_mod.h(adj, m1, self.x)
        h2 = adj_mod.h(adj, m2, self.y)
        lx = mg.poisson_logpmf(self.x, theta1)
        ly = mg.poisson_logpmf(self.y, theta2)
        if self.censor_at is None:
            br = 1.0 + alpha * h1 * h2
            if np.any(br <= 0):
                return -math.inf
            return float(np.sum(self.w * (lx + ly + np.log(br))))
        # "K or more": P(X >= K, Y = y) = f2(y) [S1 + alpha H1 h2(y)],
        # with S1 = P(X >= K) and H1 = sum_{x >= K} f1 h1 = -sum_{x < K} f1 h1
        k = float(self.censor_at)
        below = np.arange(self.censor_at, dtype=float)
        s1 = float(mg.sf(m1, k - 1))
        s2 = float(mg.sf(m2, k - 1))
        big_h1 = -float(np.sum(np.exp(mg.poisson_logpmf(below, theta1)) * adj_mod.h(adj, m1, below)))
        big_h2 = -float(np.sum(np.exp(mg.poisson_logpmf(below, theta2)) * adj_mod.h(adj, m2, below)))
        mx = np.where(self.cx, s1, np.exp(lx))
        my = np.where(self.cy, s2, np.exp(ly))
        hx = np.where(self.cx, big_h1, np.exp(lx) * h1)
        hy = np.where(self.cy, big_h2, np.exp(ly) * h2)
        prob = mx * my + alpha * hx * hy
        if np.any(prob <= 0):
            return -math.inf
        return float(np.sum(self.w * np.log(prob)))

    def _corr_per_alpha(self, theta1, theta2, adj):
        m1, m2 = MarginalSpec.poisson(theta1), MarginalSpec.poisson(theta2)
        return adj_mod.nu(adj, m1) * adj_mod.nu(adj, m2) / math.sqrt(theta1 * theta2)


class Poisson3Likelihood(_PoissonPairBase):
    """Poisson pair with ``g(x) = exp(-t x)`` for fixed ``t``; parameters
    ``(theta1, theta2, alpha)``."""

    name = "poisson3"
    names = ("theta1", "theta2", "alpha")

    def __init__(self, data, t=1.0, censor_at=None, admissibility="exact"):
        super().__init__(data, censor_at, admissibility)
        self.t = float(t)
        self.adj = AdjustmentSpec.exp_decay(self.t)

    def _extra_settings(self):
        return {"t": self.t}

    def loglik(self, params):
        theta1, theta2, alpha = params
        return self._loglik(theta1, theta2, alpha, self.adj)

    def model(self, params):
        theta1, theta2, alpha = params
        return BivariateModel(MarginalSpec.poisson(theta1), MarginalSpec.poisson(theta2),
                              self.adj, self.adj, alpha, self.admissibility)

    def corr_per_alpha(self, params):
        return self._corr_per_alpha(params[0], params[1], self.adj)


class PoissonLimitLikelihood(Poisson3Likelihood):
    """The ``t -> infinity`` limit: ``g`` is the indicator of zero."""

    name = "poisson_limit"

    def __init__(self, data, censor_at=None, admissibility="exact"):
        _PoissonPairBase.__init__(self, data, censor_at, admissibility)
        self.t = math.inf
        self.adj = AdjustmentSpec.limit_brutal()

    def _extra_settings(self):
        return {"t": "inf"}


class Poisson4Likelihood(_PoissonPairBase):
    """Poisson pair with the tuning value ``t`` as a fourth parameter
    (optimised on the log scale)."""

    name = "poisson4"
    names = ("theta1", "theta2", "alpha", "t")
    transforms = ("id", "id", "id", "log")

    def loglik(self, params):
        theta1, theta2, alpha, t = params
        if not (t > 0 and math.isfinite(t)):
            return -math.inf
        return self._loglik(theta1, theta2, alpha, AdjustmentSpec.exp_decay(t))

    def start(self):
        return np.append(super().start(), 1.0)

    def steps(self):
        return np.array([0.05, 0.05, 0.2, 0.2])

    def model(self, params):
        theta1, theta2, alpha, t = params
        adj = AdjustmentSpec.exp_decay(t)
        return BivariateModel(MarginalSpec.poisson(theta1), MarginalSpec.poisson(theta2),
                              adj, adj, alpha, self.admissibility)

    def corr_per_alpha(self, params):
        return self._corr_per_alpha(params[0], params[1], AdjustmentSpec.exp_decay(params[3]))


class IndependentPoissonLikelihood(_PoissonPairBase):
    """Two independent Poissons; parameters ``(theta1, theta2)``."""

    name = "independent"
    names = ("theta1", "theta2")

    def __init__(self, data, censor_at=None):
        super().__init__(data, censor_at, "exact")
        self._adj = AdjustmentSpec.exp_decay(1.0)

    def loglik(self, params):
        return self._loglik(params[0], params[1], 0.0, self._adj)

    def start(self):
        return super().start()[:2]

    def steps(self):
        return np.array([0.05, 0.05])

    def model(self, params):
        return BivariateModel(MarginalSpec.poisson(params[0]), MarginalSpec.poisson(params[1]),
                              self._adj, self._adj, 0.0)


def loglik_poisson3(data, theta1, theta2, alpha, t=1.0):
    """Three-parameter Poisson log-likelihood; ``-inf`` when infeasible."""
    if not isinstance(data, (PairSample, CountTable)):
        data = PairSample.from_pairs(data)
    return Poisson3Likelihood(data, t=t).loglik((theta1, theta2, alpha))


class Binomial2Likelihood(Likelihood):
    """Binomial pair with common success probability and indicator adjustments.

    Parameters ``(p, alpha)``; ``trials`` and thresholds are fixed.  Default
    thresholds are the rounded average of the two sample means.
    """

    name = "binomial2"
    names = ("p", "alpha")

    def __init__(self, data, trials=100, x0=None, y0=None, admissibility="exact"):
        if not isinstance(data, PairSample):
            raise DataError("binomial2 needs pair data")
        self.data = data
        self.trials = int(trials)
        if np.any(data.x > self.trials) or np.any(data.y > self.trials):
            raise DataError(f"counts exceed the number of trials ({self.trials})")
        default = int(math.floor(0.5 * (data.x.mean() + data.y.mean()) + 0.5))
        self.x0 = default if x0 is None else int(x0)
        self.y0 = default if y0 is None else int(y0)
        self.admissibility = admissibility
        self.x, self.y, self.w = data.unique_counts()
        self.adj1 = AdjustmentSpec.indicator(self.x0)
        self.adj2 = AdjustmentSpec.indicator(self.y0)

    def settings(self):
        return {"trials": self.trials, "x0": self.x0, "y0": self.y0, "admissibility": self.admissibility}

    def start(self):
        p = float((self.data.x.sum() + self.data.y.sum()) / (2.0 * len(self.data) * self.trials))
        return np.array([min(max(p, 0.01), 0.99), 0.0])

    def steps(self):
        return np.array([0.01, 0.3])

    def _marginal(self, p):
        return MarginalSpec.binomial(self.trials, p)

    def loglik(self, params):
        p, alpha = params
        if not (0.0 < p < 1.0 and math.isfinite(alpha)):
            return -math.inf
        m = self._marginal(p)
        rng = (exact_alpha_range if self.admissibility == "exact" else alpha_range)(m, m, self.adj1, self.adj2)
        if not _admissible(alpha, rng):
            return -math.inf
        br = 1.0 + alpha * adj_mod.h(self.adj1, m, self.x) * adj_mod.h(self.adj2, m, self.y)
        if np.any(br <= 0):
            return -math.inf
        lm = mg.binom_logpmf(self.x, self.trials, p) + mg.binom_logpmf(self.y, self.trials, p)
        return float(np.sum(self.w * (lm + np.log(br))))

    def model(self, params):
        p, alpha = params
        m = self._marginal(p)
        return BivariateModel(m, m, self.adj1, self.adj2, alpha, self.admissibility)

    def corr_per_alpha(self, params):
        m = self._marginal(params[0])
        return adj_mod.nu(self.adj1, m) * adj_mod.nu(self.adj2, m) / mg.mean_sd(m)[1] ** 2


def default_auditc_thresholds(studies):
    """``round(n1 * p1_pooled)``, ``round(n2 * p2_pooled)`` per study."""
    x, n1, y, n2 = studies.arrays()
    p1 = x.sum() / n1.sum()
    p2 = y.sum() / n2.sum()
    return np.floor(n1 * p1 + 0.5).astype(int), np.floor(n2 * p2 + 0.5).astype(int)


class AuditC3Likelihood(Likelihood):
    """Per-study binomial pairs with shared ``(p1, p2, alpha)``.

    Study ``i`` has ``X_i ~ Bin(n1_i, p1)``, ``Y_i ~ Bin(n2_i, p2)`` and
    indicator adjustments at thresholds ``x0_i``, ``y0_i``.  ``alpha`` must
    be admissible in every study simultaneously.
    """

    name = "auditc3"
    names = ("p1", "p2", "alpha")

    def __init__(self, studies, x0=None, y0=None, admissibility="exact"):
        if not isinstance(studies, Studies):
            raise DataError("auditc3 needs study rows")
        self.studies = studies
        self.x, self.n1, self.y, self.n2 = studies.arrays()
        dx0, dy0 = default_auditc_thresholds(studies)
        self.x0 = np.asarray(dx0 if x0 is None else x0, dtype=float)
        self.y0 = np.asarray(dy0 if y0 is None else y0, dtype=float)
        if self.x0.shape != self.x.shape or self.y0.shape != self.y.shape:
            raise ConfigurationError("one threshold per study is required")
        if np.any(self.x0 < 0) or np.any(self.x0 >= self.n1) or np.any(self.y0 < 0) or np.any(self.y0 >= self.n2):
            raise ConfigurationError("thresholds must satisfy 0 <= x0 < n1 and 0 <= y0 < n2")
        if admissibility not in ("exact", "bound"):
            raise ConfigurationError(f"unknown admissibility rule {admissibility!r}")
        self.admissibility = admissibility
        self._lcomb = (special.gammaln(self.n1 + 1) - special.gammaln(self.x + 1) - special.gammaln(self.n1 - self.x + 1)
                       + special.gammaln(self.n2 + 1) - special.gammaln(self.y + 1) - special.gammaln(self.n2 - self.y + 1))
        self.ix = (self.x <= self.x0).astype(float)
        self.iy = (self.y <= self.y0).astype(float)

    def settings(self):
        return {"x0": self.x0.astype(int).tolist(), "y0": self.y0.astype(int).tolist(),
                "admissibility": self.admissibility}

    def start(self):
        return np.array([self.x.sum() / self.n1.sum(), self.y.sum() / self.n2.sum(), 0.0])

    def steps(self):
        return np.array([0.01, 0.01, 0.3])

    def alpha_range(self, p1, p2):
        b1 = mg.binom_cdf(self.x0, self.n1, p1)
        b2 = mg.binom_cdf(self.y0, self.n2, p2)
        return self._range_from_cdfs(b1, b2)

    def _range_from_cdfs(self, b1, b2):
        if self.admissibility == "bound":
            c = np.maximum(b1, 1 - b1) * np.maximum(b2, 1 - b2)
            return -1.0 / c.max(), 1.0 / c.max()
        pos = np.maximum(b1 * b2, (1 - b1) * (1 - b2))
        neg = np.maximum(b1 * (1 - b2), (1 - b1) * b2)
        return -1.0 / pos.max(), 1.0 / neg.max()

    def loglik(self, params):
        p1, p2, alpha = params
        if not (0.0 < p1 < 1.0 and 0.0 < p2 < 1.0 and math.isfinite(alpha)):
            return -math.inf
        b1 = mg.binom_cdf(self.x0, self.n1, p1)
        b2 = mg.binom_cdf(self.y0, self.n2, p2)
        if not _admissible(alpha, self._range_from_cdfs(b1, b2)):
            return -math.inf
        br = 1.0 + alpha * (self.ix - b1) * (self.iy - b2)
        if np.any(br <= 0):
            return -math.inf
        lm = (self._lcomb + self.x * math.log(p1) + (self.n1 - self.x) * math.log1p(-p1)
              + self.y * math.log(p2) + (self.n2 - self.y) * math.log1p(-p2))
        return float(np.sum(lm + np.log(br)))

    def models(self, params):
        p1, p2, alpha = params
        return [
            BivariateModel(MarginalSpec.binomial(int(n1), p1), MarginalSpec.binomial(int(n2), p2),
                           AdjustmentSpec.indicator(int(x0)), AdjustmentSpec.indicator(int(y0)),
                           alpha, "exact")
            for n1, n2, x0, y0 in zip(self.n1, self.n2, self.x0, self.y0)
        ]

    def study_correlations(self, params):
        return np.array([m.correlation() for m in self.models(params)])


class CorrelationReparam(Likelihood):
    """Re-express a likelihood with the model correlation in place of ``alpha``.

    ``alpha = rho / corr_per_alpha(other params)``; the wrapped likelihood
    must provide ``corr_per_alpha``.
    """

    def __init__(self, base):
        if "alpha" not in base.names or not hasattr(base, "corr_per_alpha"):
            raise ConfigurationError(f"{base.name} has no correlation parameterisation")
        self.base = base
        self.idx = base.names.index("alpha")
        self.names = tuple("rho" if n == "alpha" else n for n in base.names)
        self.name = base.name + "_rho"
        self.transforms = base.transforms

    def settings(self):
        return self.base.settings()

    def _to_base(self, params):
        params = np.array(params, dtype=float)
        k = self.base.corr_per_alpha(params)
        params[self.idx] = params[self.idx] / k
        return params

    def loglik(self, params):
        try:
            base = self._to_base(params)
        except (ValueError, ZeroDivisionError):
            return -math.inf
        return self.base.loglik(base)

    def from_base(self, params):
        params = np.array(params, dtype=float)
        params[self.idx] = params[self.idx] * self.base.corr_per_alpha(params)
        return params

    def start(self):
        return self.from_base(self.base.start())

    def steps(self):
        s = self.base.steps().copy()
        s[self.idx] = 0.01
        return s


# Optimisation ---------------------------------------------------------------

_NM_OPTIONS = {"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000, "maxfev": 40000}
_PROFILE_OPTIONS = {"xatol": 1e-7, "fatol": 1e-10, "maxiter": 20000, "maxfev": 40000}


def _simplex(z0, steps):
    k = len(z0)
    sim = np.tile(z0, (k + 1, 1))
    for i in range(k):
        sim[i + 1, i] += steps[i]
    return sim


def _nelder_mead(fun, z0, steps, options=None):
    """Minimise ``fun`` from ``z0``; infeasible vertices are pulled toward ``z0``."""
    sim = _simplex(np.asarray(z0, dtype=float), steps)
    for i in range(1, len(sim)):
        shrink = 0
        while not np.isfinite(fun(sim[i])) and shrink < 30:
            sim[i] = z0 + 0.5 * (sim[i] - z0)
            shrink += 1
    opts = dict(options or _NM_OPTIONS, initial_simplex=sim)
    # an absolute tolerance below the rounding level of fun would never be met
    f0 = fun(z0)
    if np.isfinite(f0):
        opts["fatol"] = max(opts["fatol"], 1e-14 * abs(f0))
    return optimize.minimize(fun, z0, method="Nelder-Mead", options=opts)


def numeric_gradient(fun, x, steps=None):
    """Five-point central-difference gradient with steps ``max(1e-4 |x_k|, 1e-5)``.

    The fourth-order stencil matters for the binomial likelihoods, whose
    large third derivatives bias the plain two-point difference.
    """
    x = np.asarray(x, dtype=float)
    h = _fd_steps(x) if steps is None else steps
    grad = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h[k]
        near = fun(x + e) - fun(x - e)
        far = fun(x + 2 * e) - fun(x - 2 * e)
        grad[k] = (8.0 * near - far) / (12.0 * h[k])
    return grad


def _fd_steps(x):
    return np.maximum(1e-4 * np.abs(x), 1e-5)


def observed_information(fun, x):
    """Negative central-difference Hessian of ``fun`` at ``x``, symmetrised."""
    x = np.asarray(x, dtype=float)
    h = _fd_steps(x)
    k = x.size
    f0 = fun(x)
    hess = np.empty((k, k))
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        hess[i, i] = (fun(x + ei) - 2.0 * f0 + fun(x - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(k)
            ej[j] = h[j]
            val = (fun(x + ei + ej) - fun(x + ei - ej) - fun(x - ei + ej) + fun(x - ei - ej)) / (4.0 * h[i] * h[j])
            hess[i, j] = hess[j, i] = val
    return -hess


class _Counter:
    def __init__(self, fun):
        self.fun = fun
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        return self.fun(x)


def _newton_polish(loglik, x, iterations=6):
    for _ in range(iterations):
        grad = numeric_gradient(loglik, x)
        if np.max(np.abs(grad)) < 1e-8:
            break
        info = observed_information(loglik, x)
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            break
        f0 = loglik(x)
        gmax = np.max(np.abs(grad))
        moved = False
        for damp in (1.0, 0.5, 0.25, 0.125):
            cand = x + damp * step
            f1 = loglik(cand)
            # near the optimum the gain falls below rounding; judge by the gradient instead
            flat = abs(f1 - f0) <= 1e-10 and np.max(np.abs(numeric_gradient(loglik, cand))) < gmax
            if f1 > f0 or flat:
                x, moved = cand, True
                break
        if not moved:
            break
    return x


def fit(lik, start=None, restarts=3, seed=0, spread_tol=1e-9):
    """Maximum-likelihood fit of ``lik``.

    Nelder-Mead runs from ``start`` (default ``lik.start()``), then from
    ``restarts`` random perturbations of the incumbent.  The fit counts as
    converged when the best log-likelihoods of the final restarts agree
    within ``spread_tol``.

    Raises:
        ConvergenceError: if the start is infeasible or no run ends at a
            finite log-likelihood.
    """
    counter = _Counter(lik.loglik)

    def neg(z):
        val = counter(lik.from_internal(z))
        return -val if np.isfinite(val) else math.inf

    z0 = lik.to_internal(lik.start() if start is None else start)
    if not np.isfinite(neg(z0)):
        raise ConvergenceError(f"{lik.name}: infeasible starting point {lik.from_internal(z0)}")
    steps = lik.steps()
    rng = np.random.default_rng(seed)
    best = _nelder_mead(neg, z0, steps)
    trace = [float(-best.fun)]
    for _ in range(restarts):
        zs = best.x + rng.normal(scale=0.5 * steps)
        if not np.isfinite(neg(zs)):
            zs = best.x
        res = _nelder_mead(neg, zs, steps)
        trace.append(float(-res.fun))
        if res.fun < best.fun:
            best = res
    if not np.isfinite(best.fun):
        raise ConvergenceError(f"{lik.name}: optimisation did not reach a finite log-likelihood", trace)
    x = _newton_polish(counter, lik.from_internal(best.x))
    loglik_max = counter(x)
    tail = trace[-restarts:] if restarts else trace
    spread = max(tail) - min(tail)
    info = observed_information(counter, x)
    info = 0.5 * (info + info.T)
    se = _standard_errors(info)
    converged = bool(spread < spread_tol and np.all(np.isfinite(se)))
    return FitResult(
        names=tuple(lik.names),
        estimates=x,
        se=se,
        loglik_max=float(loglik_max),
        info=info,
        converged=converged,
        n_evals=counter.calls,
        model=lik.name,
        settings=lik.settings(),
    )


def _standard_errors(info):
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        return np.full(info.shape[0], math.nan)
    d = np.diag(cov)
    return np.where(d > 0, np.sqrt(np.abs(d)), math.nan)


# Profiles -------------------------------------------------------------------

class _Fixed:
    """Objective over the free internal coordinates with one parameter fixed."""

    def __init__(self, lik, idx, value):
        self.lik = lik
        self.idx = idx
        self.value = value

    def full(self, z_free):
        nat = self.lik.from_internal(np.insert(np.asarray(z_free, dtype=float), self.idx, 0.0))
        nat[self.idx] = self.value
        return nat

    def __call__(self, z_free):
        val = self.lik.loglik(self.full(z_free))
        return -val if np.isfinite(val) else math.inf


def _profile_point(lik, idx, value, starts, seed):
    obj = _Fixed(lik, idx, value)
    steps = np.delete(lik.steps(), idx)
    feasible = [z for z in starts if np.isfinite(obj(z))]
    if not feasible:
        rng = np.random.default_rng(seed)
        base = starts[0]
        for k in range(200):
            z = base + rng.normal(scale=steps * (1 + k / 20))
            if np.isfinite(obj(z)):
                feasible = [z]
                break
    if not feasible:
        return -math.inf, None
    z0 = min(feasible, key=obj)
    res = _nelder_mead(obj, z0, steps, _PROFILE_OPTIONS)
    # a restart from a small simplex guards against premature collapse
    res2 = _nelder_mead(obj, res.x, 0.05 * steps, _PROFILE_OPTIONS)
    if res2.fun < res.fun:
        res = res2
    if not np.isfinite(res.fun):
        return -math.inf, None
    return float(-res.fun), res.x


def _profile_worker(args):
    lik, idx, value, starts, seed = args
    return _profile_point(lik, idx, value, starts, seed)


def profile(lik, fitted, param, grid, warm_start=True, workers=None):
    """Profile log-likelihood and confidence curve for ``param`` over ``grid``.

    With ``warm_start`` each grid point starts from its neighbour's optimum
    (walking outward from the estimate) as well as from the global estimate.
    Without it every point starts from the global estimate only, and the
    points may be spread over ``workers`` processes; results are identical
    whatever the worker count.
    """
    idx = lik.names.index(param)
    grid = np.sort(np.asarray(grid, dtype=float))
    z_hat = np.delete(lik.to_internal(fitted.estimates), idx)
    est = float(fitted.estimates[idx])
    prof = np.full(grid.size, math.nan)
    failed = np.zeros(grid.size, dtype=bool)
    if warm_start:
        right = np.flatnonzero(grid >= est)
        left = np.flatnonzero(grid < est)[::-1]
        for order in (right, left):
            prev = z_hat
            for i in order:
                starts = [prev] if prev is z_hat else [prev, z_hat]
                val, z = _profile_point(lik, idx, grid[i], starts, seed=i)
                prof[i] = val
                if z is not None:
                    prev = z
    else:
        jobs = [(lik, idx, g, [z_hat], i) for i, g in enumerate(grid)]
        if workers and workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_profile_worker, jobs))
        else:
            results = [_profile_worker(j) for j in jobs]
        prof = np.array([r[0] for r in results])
    failed |= np.isnan(prof)
    top = max(fitted.loglik_max, np.nanmax(np.where(np.isfinite(prof), prof, -math.inf)))
    dev = np.where(np.isfinite(prof), 2.0 * (top - prof), math.inf)
    dev = np.maximum(dev, 0.0)
    dev[failed] = math.nan
    cc = np.where(np.isfinite(dev), mg.chi1_cdf(np.where(np.isfinite(dev), dev, 0.0)), 1.0)
    cc[failed] = math.nan
    return ConfidenceCurve(param, grid, dev, cc, est, prof, failed)


def profile_correlation(lik, fitted, grid, **kwargs):
    """Profile the model correlation; returns ``(curve, rho_hat)``.

    ``fitted`` is the fit of ``lik`` in its own parameterisation.
    """
    rep = CorrelationReparam(lik)
    est = rep.from_base(fitted.estimates)
    as_rho = FitResult(rep.names, est, fitted.se, fitted.loglik_max, fitted.info,
                       fitted.converged, fitted.n_evals, rep.name, fitted.settings)
    curve = profile(rep, as_rho, "rho", grid, **kwargs)
    return curve, float(est[rep.idx])


# Independence test -----------------------------------------------------------

def independence_score_test(sample, m1, m2, adj1, adj2):
    """Test of ``alpha = 0`` from the one-parameter likelihood
    ``sum log{1 + alpha h1(x_i) h2(y_i)}`` with the marginals held fixed.

    Returns ``(z, p_value)`` where ``z = sqrt(n) alpha_hat sqrt(J0)`` and
    ``J0 = E h1^2 E h2^2`` is the null information per pair (one when the
    adjustments are scaled to unit variance); the p-value is two-sided.
    """
    if isinstance(sample, CountTable):
        sample = sample.to_pairs()
    x, y, w = sample.unique_counts()
    prod = adj_mod.h(adj1, m1, x) * adj_mod.h(adj2, m2, y)
    lo, hi = exact_alpha_range(m1, m2, adj1, adj2)
    # keep strictly inside the range where every observed bracket is positive
    pos, neg = prod[prod > 0], prod[prod < 0]
    lo = max(lo, -1.0 / pos.max()) if pos.size else lo
    hi = min(hi, -1.0 / neg.min()) if neg.size else hi
    lo = max(lo, -1e6)
    hi = min(hi, 1e6)
    span = hi - lo
    lo_in, hi_in = lo + 1e-9 * span, hi - 1e-9 * span

    def neg_ll(a):
        return -float(np.sum(w * np.log1p(a * prod)))

    res = optimize.minimize_scalar(neg_ll, bounds=(lo_in, hi_in), method="bounded",
                                   options={"xatol": 1e-12})
    alpha_hat = float(res.x)
    if neg_ll(0.0) <= res.fun:
        alpha_hat = 0.0
    j0 = adj_mod.variance_h(adj1, m1) * adj_mod.variance_h(adj2, m2)
    n = float(w.sum())
    z = math.sqrt(n) * alpha_hat * math.sqrt(j0)
    p_value = float(2.0 * mg.normal_cdf(-abs(z)))
    return z, p_value
