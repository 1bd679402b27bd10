"""Exponentiated Weibull distribution and the random variates the sampler needs.

X ~ EW(alpha, beta, lam) has CDF ``(1 - exp(-(lam x)**beta))**alpha``.  All
density work is done in log space; ``_log1mexp`` keeps ``log(1 - e^{-t})``
accurate both for tiny ``t`` (values near zero) and for huge ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import as_generator

LOG_CDF_FLOOR = -745.0


class DomainError(ValueError):
    """Raised when an argument lies outside the support of a function."""


@dataclass(frozen=True)
class EWParams:
    alpha: float
    beta: float
    lam: float

    def __post_init__(self):
        for name in ("alpha", "beta", "lam"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"EW parameter {name} must be finite and > 0, got {v!r}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.lam)


def _log1mexp(t, logt):
    """log(1 - exp(-t)) given t and log(t), stable over the whole range."""
    t = np.asarray(t, dtype=float)
    logt = np.asarray(logt, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        small = np.log(-np.expm1(-t))
        large = np.log1p(-np.exp(-t))
        out = np.where(t < math.log(2.0), small, large)
        # t underflowed (or nearly): 1 - e^{-t} = t (1 - t/2 + ...)
        out = np.where(logt < -30.0, logt - 0.5 * np.exp(np.minimum(logt, 0.0)), out)
    return out


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)) or np.any(~np.isfinite(x)):
        raise DomainError("x must be finite and strictly positive")
    return x


def _scalar_or_array(out):
    return float(out) if np.ndim(out) == 0 else out


def ew_logpdf_raw(x, alpha, beta, lam):
    """Unvalidated log-density; arguments broadcast.  Used in the hot loops."""
    logx = np.log(x)
    logt = beta * (np.log(lam) + logx)
    with np.errstate(over="ignore"):
        t = np.exp(logt)
    return (np.log(alpha) + np.log(beta) + beta * np.log(lam) + (beta - 1.0) * logx
            + (alpha - 1.0) * _log1mexp(t, logt) - t)


def ew_logcdf_raw(x, alpha, beta, lam):
    logt = beta * (np.log(lam) + np.log(x))
    with np.errstate(over="ignore"):
        t = np.exp(logt)
    return alpha * _log1mexp(t, logt)


def ew_log_pdf(x, p: EWParams):
    x = _check_x(x)
    return _scalar_or_array(ew_logpdf_raw(x, p.alpha, p.beta, p.lam))


def ew_pdf(x, p: EWParams):
    """Density ``alpha beta lam^beta x^(beta-1) (1-e^{-(lam x)^beta})^(alpha-1) e^{-(lam x)^beta}``."""
    x = _check_x(x)
    return _scalar_or_array(np.exp(ew_logpdf_raw(x, p.alpha, p.beta, p.lam)))


def ew_log_cdf(x, p: EWParams):
    x = _check_x(x)
    return _scalar_or_array(ew_logcdf_raw(x, p.alpha, p.beta, p.lam))


def ew_cdf(x, p: EWParams):
    x = _check_x(x)
    logc = np.maximum(ew_logcdf_raw(x, p.alpha, p.beta, p.lam), LOG_CDF_FLOOR)
    return _scalar_or_array(np.exp(logc))


def ew_quantile_raw(u, alpha, beta, lam):
    """Unvalidated quantile, clipped to the positive finite doubles.

    For extreme parameters (tiny ``alpha`` or ``beta``) the exact quantile can
    fall outside the double range; it is then returned as the nearest
    representable positive value rather than 0 or inf.
    """
    # inner = -log(1 - u^(1/alpha)); with s = -log(u)/alpha this is -log(1 - e^{-s})
    s = -np.log(u) / alpha
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        inner = -_log1mexp(s, np.log(s))
        x = inner ** (1.0 / beta) / lam
    return np.clip(x, np.finfo(float).tiny, np.finfo(float).max)


def ew_quantile(u, p: EWParams):
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0) & (u < 1))):
        raise DomainError("u must lie in the open interval (0, 1)")
    return _scalar_or_array(ew_quantile_raw(u, p.alpha, p.beta, p.lam))


def ew_sample(rng, p: EWParams, size=None):
    """Inverse-transform draw(s) from EW(p)."""
    rng = as_generator(rng)
    u = rng.random(size)
    # Generator.random is on [0, 1); u == 0 would map to x == 0
    u = np.where(u == 0.0, np.finfo(float).tiny, u)
    return _scalar_or_array(ew_quantile_raw(u, p.alpha, p.beta, p.lam))


def ew_regime(p: EWParams) -> str:
    """Label the density shape regime (behaviour at 0 and modality)."""
    ab = p.alpha * p.beta
    if math.isclose(ab, 1.0, rel_tol=1e-12):
        if p.alpha < 1:
            return "finite-at-zero"
        return "boundary"
    if ab > 1:
        return "unimodal"
    return "unbounded-at-zero"


def ew_mode(p: EWParams) -> float | None:
    """Approximate mode ``(1/lam) [2(ab-1) / (b(a+1))]^(1/b)`` when ``alpha*beta > 1``.

    Returns ``None`` when the density diverges at zero (``alpha*beta < 1``) and
    0.0 on the ``alpha*beta == 1`` boundary, where the density is maximal at
    zero.  For ``alpha > 1`` on that boundary the value is the formula's own
    limit and :func:`ew_regime` reports ``"boundary"``.
    """
    regime = ew_regime(p)
    if regime in ("finite-at-zero", "boundary"):
        return 0.0
    if regime == "unbounded-at-zero":
        return None
    a, b = p.alpha, p.beta
    return (2.0 * (a * b - 1.0) / (b * (a + 1.0))) ** (1.0 / b) / p.lam


# --- generic variates -------------------------------------------------------

def gamma_sample(rng, shape, rate, size=None):
    """Gamma draw with mean ``shape / rate``."""
    if not (np.all(np.asarray(shape) > 0) and np.all(np.asarray(rate) > 0)):
        raise DomainError("gamma shape and rate must be > 0")
    return as_generator(rng).gamma(shape, 1.0 / np.asarray(rate, dtype=float), size)


def beta_sample(rng, a, b, size=None):
    if not (np.all(np.asarray(a) > 0) and np.all(np.asarray(b) > 0)):
        raise DomainError("beta parameters must be > 0")
    return as_generator(rng).beta(a, b, size)


def binomial_sample(rng, trials, prob, size=None):
    trials = np.asarray(trials)
    prob = np.asarray(prob, dtype=float)
    if np.any(trials < 0) or np.any((prob < 0) | (prob > 1)):
        raise DomainError("binomial needs trials >= 0 and prob in [0, 1]")
    return as_generator(rng).binomial(trials, prob, size)
