"""Bounded adjustment functions and their moments under a marginal.

An adjustment family supplies a bounded function ``g`` on the support of a
marginal.  Centring it gives ``h = g - a`` with ``a = E g(X)``; the sup-norm
``c`` of ``h`` fixes the admissible dependence range and the cross-moment
``nu = E X h(X)`` enters the correlation.  Closed forms are used throughout;
the ``*_numeric`` functions are brute-force counterparts (summation over the
support or adaptive quadrature) that share no code with the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate

from . import marginals as mg
from .errors import ConfigurationError
from .marginals import Family, MarginalSpec

__all__ = [
    "AdjFamily",
    "AdjustmentSpec",
    "g",
    "h",
    "center",
    "h_range",
    "bound",
    "nu",
    "nu_approx_indicator",
    "center_numeric",
    "nu_numeric",
    "bound_numeric",
]

_PHI0 = 1.0 / math.sqrt(2.0 * math.pi)


class AdjFamily(str, Enum):
    EXP_DECAY = "exp_decay"
    INDICATOR = "indicator"
    LINEAR = "linear"
    PHI_KERNEL = "phi_kernel"
    QUADRANT = "quadrant"
    EXP_QUADRATIC = "exp_quadratic"
    LIMIT_BRUTAL = "limit_brutal"


_COMPATIBLE = {
    AdjFamily.EXP_DECAY: (Family.POISSON, Family.EXPONENTIAL),
    AdjFamily.INDICATOR: (Family.BINOMIAL,),
    AdjFamily.LINEAR: (Family.BINOMIAL,),
    AdjFamily.PHI_KERNEL: (Family.NORMAL,),
    AdjFamily.QUADRANT: (Family.NORMAL,),
    AdjFamily.EXP_QUADRATIC: (Family.NORMAL,),
    AdjFamily.LIMIT_BRUTAL: (Family.POISSON,),
}


@dataclass(frozen=True)
class AdjustmentSpec:
    """An adjustment family with its tuning values.

    ``scale`` multiplies ``g`` (and therefore ``a``, ``h``, ``c`` and ``nu``);
    it exists to express the equivalence between rescaling ``g`` and
    rescaling the dependence parameter.
    """

    family: AdjFamily
    t: float | None = None
    s: float | None = None
    x0: int | None = None
    scale: float = 1.0

    def __post_init__(self):
        fam = AdjFamily(self.family)
        object.__setattr__(self, "family", fam)
        if fam in (AdjFamily.EXP_DECAY, AdjFamily.EXP_QUADRATIC):
            if self.t is None or not self.t > 0 or not math.isfinite(self.t):
                raise ConfigurationError(f"{fam.value} needs a finite tuning value t > 0")
        if fam is AdjFamily.EXP_QUADRATIC and (self.s is None or not math.isfinite(self.s)):
            raise ConfigurationError("exp_quadratic needs a finite s")
        if fam is AdjFamily.INDICATOR:
            if self.x0 is None or self.x0 != int(self.x0) or self.x0 < 0:
                raise ConfigurationError("indicator threshold x0 must be a nonnegative integer")
            object.__setattr__(self, "x0", int(self.x0))
        if self.scale == 0 or not math.isfinite(self.scale):
            raise ConfigurationError("scale must be finite and nonzero")

    @classmethod
    def exp_decay(cls, t=1.0):
        return cls(AdjFamily.EXP_DECAY, t=float(t))

    @classmethod
    def indicator(cls, x0):
        return cls(AdjFamily.INDICATOR, x0=x0)

    @classmethod
    def linear(cls):
        return cls(AdjFamily.LINEAR)

    @classmethod
    def phi_kernel(cls):
        return cls(AdjFamily.PHI_KERNEL)

    @classmethod
    def quadrant(cls):
        return cls(AdjFamily.QUADRANT)

    @classmethod
    def exp_quadratic(cls, s, t):
        return cls(AdjFamily.EXP_QUADRATIC, s=float(s), t=float(t))

    @classmethod
    def limit_brutal(cls):
        return cls(AdjFamily.LIMIT_BRUTAL)

    def scaled(self, k):
        return AdjustmentSpec(self.family, self.t, self.s, self.x0, self.scale * k)

    def __str__(self):
        bits = [f"{k}={v:g}" for k, v in (("t", self.t), ("s", self.s), ("x0", self.x0)) if v is not None]
        if self.scale != 1.0:
            bits.append(f"scale={self.scale:g}")
        return f"{self.family.value}({', '.join(bits)})"


def check_compatible(adj: AdjustmentSpec, m: MarginalSpec):
    if m.family not in _COMPATIBLE[adj.family]:
        raise ConfigurationError(f"{adj.family.value} adjustment cannot be paired with a {m.family.value} marginal")
    if adj.family is AdjFamily.INDICATOR and adj.x0 >= m.params[0]:
        raise ConfigurationError(f"threshold x0={adj.x0} leaves the indicator constant on Bin{m.params}")


def _standardize(m, x):
    loc, scale = m.params
    return (np.asarray(x, dtype=float) - loc) / scale


def _g_unscaled(adj, m, x):
    x = np.asarray(x, dtype=float)
    fam = adj.family
    if fam is AdjFamily.EXP_DECAY:
        return np.exp(-adj.t * x)
    if fam is AdjFamily.LIMIT_BRUTAL:
        return (x == 0).astype(float)
    if fam is AdjFamily.INDICATOR:
        return (x <= adj.x0).astype(float)
    if fam is AdjFamily.LINEAR:
        return x / m.params[0]
    z = _standardize(m, x)
    if fam is AdjFamily.PHI_KERNEL:
        return mg.normal_pdf(z)
    if fam is AdjFamily.QUADRANT:
        return (z <= 0).astype(float)
    return np.exp(adj.s * z - 0.5 * adj.t * z * z)


def g(adj: AdjustmentSpec, m: MarginalSpec, x):
    """The raw adjustment function at ``x`` (no centring)."""
    check_compatible(adj, m)
    return adj.scale * _g_unscaled(adj, m, x)


def _center_unscaled(adj, m):
    fam = adj.family
    if fam is AdjFamily.EXP_DECAY:
        theta = m.params[0]
        if m.family is Family.POISSON:
            return math.exp(-(-math.expm1(-adj.t)) * theta)
        return theta / (theta + adj.t)
    if fam is AdjFamily.LIMIT_BRUTAL:
        return math.exp(-m.params[0])
    if fam is AdjFamily.INDICATOR:
        return float(mg.binom_cdf(adj.x0, *m.params))
    if fam is AdjFamily.LINEAR:
        return m.params[1]
    if fam is AdjFamily.PHI_KERNEL:
        return _PHI0 / math.sqrt(2.0)
    if fam is AdjFamily.QUADRANT:
        return 0.5
    s, t = adj.s, adj.t
    return math.exp(0.5 * s * s / (1.0 + t)) / math.sqrt(1.0 + t)


def center(adj: AdjustmentSpec, m: MarginalSpec) -> float:
    """Centring constant ``a = E g(X)`` under ``m``."""
    check_compatible(adj, m)
    return adj.scale * _center_unscaled(adj, m)


def h(adj: AdjustmentSpec, m: MarginalSpec, x):
    """Centred adjustment ``g(x) - a``, mean zero under ``m``."""
    check_compatible(adj, m)
    return adj.scale * (_g_unscaled(adj, m, x) - _center_unscaled(adj, m))


def _range_unscaled(adj, m):
    a = _center_unscaled(adj, m)
    fam = adj.family
    if fam in (AdjFamily.EXP_DECAY, AdjFamily.LIMIT_BRUTAL, AdjFamily.INDICATOR, AdjFamily.LINEAR, AdjFamily.QUADRANT):
        # g ranges over [0, 1] (possibly without attaining 0)
        return -a, 1.0 - a
    if fam is AdjFamily.PHI_KERNEL:
        return -a, _PHI0 - a
    g_max = math.exp(0.5 * adj.s * adj.s / adj.t)
    return -a, g_max - a


def h_range(adj: AdjustmentSpec, m: MarginalSpec):
    """Infimum and supremum of ``h`` over the support of ``m``."""
    check_compatible(adj, m)
    lo, hi = _range_unscaled(adj, m)
    lo, hi = adj.scale * lo, adj.scale * hi
    return (lo, hi) if lo <= hi else (hi, lo)


def bound(adj: AdjustmentSpec, m: MarginalSpec) -> float:
    """Sup-norm ``c = sup |g(x) - a|``.

    For exponential marginals with ``g = exp(-t x)`` this is
    ``max(theta, t) / (theta + t)``.
    """
    lo, hi = h_range(adj, m)
    return max(-lo, hi)


def nu(adj: AdjustmentSpec, m: MarginalSpec) -> float:
    """Cross-moment ``E X h(X)`` in closed form."""
    check_compatible(adj, m)
    a = _center_unscaled(adj, m)
    fam = adj.family
    if fam is AdjFamily.EXP_DECAY:
        theta = m.params[0]
        if m.family is Family.POISSON:
            val = -theta * a * (-math.expm1(-adj.t))
        else:
            val = -adj.t / (theta + adj.t) ** 2
    elif fam is AdjFamily.LIMIT_BRUTAL:
        val = -m.params[0] * a
    elif fam is AdjFamily.INDICATOR:
        n, p = m.params
        # E X I(X <= x0) = n p B(x0 - 1; n - 1, p)
        if n == 1:
            partial = 1.0 if adj.x0 >= 1 else 0.0
        else:
            partial = float(mg.binom_cdf(adj.x0 - 1, n - 1, p)) if adj.x0 >= 1 else 0.0
        val = n * p * (partial - a)
    elif fam is AdjFamily.LINEAR:
        p = m.params[1]
        val = p * (1.0 - p)
    elif fam is AdjFamily.PHI_KERNEL:
        val = 0.0
    elif fam is AdjFamily.QUADRANT:
        val = -m.params[1] * _PHI0
    else:
        s, t = adj.s, adj.t
        val = m.params[1] * s * (1.0 + t) ** -1.5 * math.exp(0.5 * s * s / (1.0 + t))
    return adj.scale * val


def nu_approx_indicator(n, p, x0) -> float:
    """Normal approximation ``-sqrt(npq) phi((x0 - np)/sqrt(npq))`` to the
    indicator cross-moment.  Documentation only; inference uses :func:`nu`."""
    sd = math.sqrt(n * p * (1.0 - p))
    return -sd * float(mg.normal_pdf((x0 - n * p) / sd))


# Brute-force oracles -------------------------------------------------------

def _oracle_support(m):
    if m.family is Family.BINOMIAL:
        return np.arange(m.params[0] + 1, dtype=float)
    theta = m.params[0]
    k = int(theta + 40.0 * math.sqrt(theta) + 60)
    return np.arange(k + 1, dtype=float)


def _expect(m, fn):
    """E fn(X) by direct summation or adaptive quadrature."""
    if m.discrete:
        xs = _oracle_support(m)
        w = np.exp(mg.logpmf(m, xs))
        return float(np.sum(w * fn(xs)))
    if m.family is Family.EXPONENTIAL:
        rate = m.params[0]
        val, _ = integrate.quad(lambda x: rate * math.exp(-rate * x) * float(fn(x)), 0.0, np.inf,
                                epsabs=1e-13, epsrel=1e-12, limit=400)
        return val
    loc, scale = m.params

    def integrand(x):
        return float(mg.pmf_or_pdf(m, x)) * float(fn(x))

    left, _ = integrate.quad(integrand, -np.inf, loc, epsabs=1e-13, epsrel=1e-12, limit=400)
    right, _ = integrate.quad(integrand, loc, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
    return left + right


def center_numeric(adj: AdjustmentSpec, m: MarginalSpec) -> float:
    check_compatible(adj, m)
    return _expect(m, lambda x: adj.scale * _g_unscaled(adj, m, x))


def nu_numeric(adj: AdjustmentSpec, m: MarginalSpec) -> float:
    a = center_numeric(adj, m)
    return _expect(m, lambda x: np.asarray(x) * (adj.scale * _g_unscaled(adj, m, x) - a))


def bound_numeric(adj: AdjustmentSpec, m: MarginalSpec, points=100_000) -> float:
    """sup |h| over the (extended) discrete support or a dense grid."""
    a = center_numeric(adj, m)
    if m.discrete:
        xs = _oracle_support(m)
        if adj.family is AdjFamily.EXP_DECAY:
            xs = np.arange(max(len(xs), int(60.0 / adj.t) + 1), dtype=float)
    elif m.family is Family.EXPONENTIAL:
        xs = np.linspace(0.0, 50.0 / min(1.0, adj.t or 1.0), points)
    else:
        loc, scale = m.params
        xs = np.linspace(loc - 40.0 * scale, loc + 40.0 * scale, points)
        if adj.family is AdjFamily.EXP_QUADRATIC:
            xs = np.append(xs, loc + scale * adj.s / adj.t)
    return float(np.max(np.abs(adj.scale * _g_unscaled(adj, m, xs) - a)))


def variance_h(adj: AdjustmentSpec, m: MarginalSpec) -> float:
    """``E h(X)^2``, by summation/quadrature."""
    a = center(adj, m)
    return _expect(m, lambda x: (adj.scale * _g_unscaled(adj, m, x) - a) ** 2)

