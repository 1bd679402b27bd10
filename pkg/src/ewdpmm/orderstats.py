"""Densities, likelihoods and simulation for variable-length order-statistics sequences.

A sequence keeps the top ``l`` of ``n`` iid EW draws in decreasing order; the
remaining ``n - l`` entries are censored.  The length is modelled as
``l = 1 + Binomial(n - 1, w)``, independent of the values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence as SequenceT

import numpy as np
from scipy.special import gammaln

from .ew import (
    DomainError,
    EWParams,
    _check_x,
    ew_logcdf_raw,
    ew_logpdf_raw,
    ew_quantile_raw,
)
from .rng import as_generator


@dataclass(frozen=True)
class Sequence:
    """Top-``l`` order statistics of an ``n``-sample, ``values[0]`` being the maximum."""

    n: int
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if not 1 <= len(vals) <= self.n:
            raise DomainError(f"observed length {len(vals)} not in [1, {self.n}]")
        if not all(math.isfinite(v) and v > 0 for v in vals):
            raise DomainError("observed values must be finite and > 0")
        if any(a <= b for a, b in zip(vals, vals[1:])):
            raise DomainError("observed values must be strictly decreasing (ties are not allowed)")

    @property
    def l(self) -> int:
        return len(self.values)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values)


@dataclass(frozen=True)
class Atom:
    ew: EWParams
    w: float

    def __post_init__(self):
        if not 0 < self.w < 1:
            raise DomainError(f"w must lie in (0, 1), got {self.w!r}")

    @classmethod
    def from_tuple(cls, t) -> "Atom":
        a, b, lam, w = (float(v) for v in t)
        return cls(EWParams(a, b, lam), w)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.ew.alpha, self.ew.beta, self.ew.lam, self.w)


def _log_falling(n, l):
    """log n! / (n - l)!"""
    return gammaln(np.asarray(n) + 1.0) - gammaln(np.asarray(n) - np.asarray(l) + 1.0)


def _log_binom(n, k):
    return gammaln(np.asarray(n) + 1.0) - gammaln(np.asarray(k) + 1.0) - gammaln(np.asarray(n) - np.asarray(k) + 1.0)


def _xlogy(k, w):
    """k * log(w) with the 0 * log(0) = 0 convention."""
    k = np.asarray(k, dtype=float)
    w = np.asarray(w, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(k == 0, 0.0, k * np.log(w))


def length_log_pmf_raw(l, n, w):
    return (_log_binom(n - 1, l - 1) + _xlogy(l - 1, w) + _xlogy(n - l, 1.0 - w))


def length_log_pmf(l: int, n: int, w: float) -> float:
    """log P(l | w) with l - 1 ~ Binomial(n - 1, w)."""
    if not (1 <= l <= n):
        raise DomainError(f"need 1 <= l <= n, got l={l}, n={n}")
    if not 0.0 <= w <= 1.0:
        raise DomainError(f"w must lie in [0, 1], got {w}")
    return float(length_log_pmf_raw(l, n, w))


def joint_log_density(seq: Sequence, p: EWParams) -> float:
    """log of ``n!/(n-l)! F(x_min)^(n-l) prod f(x)`` for the observed top-``l``."""
    x = seq.array
    out = float(_log_falling(seq.n, seq.l)) + float(np.sum(ew_logpdf_raw(x, p.alpha, p.beta, p.lam)))
    if seq.l < seq.n:
        out += (seq.n - seq.l) * float(ew_logcdf_raw(x[-1], p.alpha, p.beta, p.lam))
    return out if not math.isnan(out) else -math.inf


def conditional_log_density(x_lower, x_upper: float, j: int, n: int, p: EWParams):
    """log density of ``x_(n-j)`` given ``x_(n-j+1) = x_upper``.

    This is a ``EW((n-j) alpha, beta, lam)`` density truncated to ``(0, x_upper)``.
    """
    x_lower = _check_x(x_lower)
    if not x_upper > 0:
        raise DomainError("x_upper must be > 0")
    if np.any(x_lower >= x_upper):
        raise DomainError("need x_lower < x_upper")
    if not 1 <= j <= n - 1:
        raise DomainError(f"need 1 <= j <= n - 1, got j={j}, n={n}")
    a, b, lam = p.alpha, p.beta, p.lam
    out = (math.log(n - j) + ew_logpdf_raw(x_lower, a, b, lam)
           + (n - j - 1) * ew_logcdf_raw(x_lower, a, b, lam)
           - (n - j) * ew_logcdf_raw(x_upper, a, b, lam))
    return float(out) if np.ndim(out) == 0 else out


def _max_log_density(x, n, p: EWParams):
    return (math.log(n) + ew_logpdf_raw(x, p.alpha, p.beta, p.lam)
            + (n - 1) * ew_logcdf_raw(x, p.alpha, p.beta, p.lam))


def hierarchical_log_density(seq: Sequence, p: EWParams) -> float:
    """Same density as :func:`joint_log_density`, built as max-marginal times chained conditionals."""
    x = seq.values
    out = float(_max_log_density(x[0], seq.n, p))
    for k in range(1, seq.l):
        out += conditional_log_density(x[k], x[k - 1], k, seq.n, p)
    return out


def sequence_log_likelihood(seq: Sequence, atom: Atom) -> float:
    """log p(l | w) + log f(x | l, alpha, beta, lam)."""
    return length_log_pmf(seq.l, seq.n, atom.w) + joint_log_density(seq, atom.ew)


def order_stat_log_pdf(x, j: int, n: int, p: EWParams):
    """log density of the j-th smallest of ``n`` iid EW draws."""
    x = _check_x(x)
    if not 1 <= j <= n:
        raise DomainError(f"need 1 <= j <= n, got j={j}, n={n}")
    a, b, lam = p.alpha, p.beta, p.lam
    logF = ew_logcdf_raw(x, a, b, lam)
    with np.errstate(divide="ignore"):
        log_sf = np.log(-np.expm1(logF))
    out = (math.log(n) + float(_log_binom(n - 1, j - 1)) + ew_logpdf_raw(x, a, b, lam)
           + (j - 1) * logF)
    if n - j > 0:
        out = out + (n - j) * log_sf
    return float(out) if np.ndim(out) == 0 else out


def order_stat_marginal_pdf(x, j: int, n: int, p: EWParams):
    """``n f(x) C(n-1, j-1) F(x)^(j-1) (1 - F(x))^(n-j)``."""
    out = np.exp(order_stat_log_pdf(x, j, n, p))
    return float(out) if np.ndim(out) == 0 else out


# --- simulation -------------------------------------------------------------

def sample_order_matrix(rng, alpha, beta, lam, n: int, size: int) -> np.ndarray:
    """``size`` rows of ``n`` iid EW draws sorted in decreasing order.

    Parameters may be scalars or arrays of length ``size`` (one atom per row).
    """
    rng = as_generator(rng)
    u = rng.random((size, n))
    u[u == 0.0] = np.finfo(float).tiny
    shape = (-1, 1)
    x = ew_quantile_raw(u, np.reshape(alpha, shape) if np.ndim(alpha) else alpha,
                        np.reshape(beta, shape) if np.ndim(beta) else beta,
                        np.reshape(lam, shape) if np.ndim(lam) else lam)
    return -np.sort(-x, axis=1)


def sample_lengths(rng, w, n: int, size: int) -> np.ndarray:
    rng = as_generator(rng)
    return 1 + rng.binomial(n - 1, np.broadcast_to(np.asarray(w, dtype=float), (size,)))


def sample_padded(rng, atoms: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Simulate one censored sequence per row of ``atoms`` (columns alpha, beta, lam, w).

    Returns ``(matrix, lengths)`` where ``matrix`` is ``(M, n)`` in decreasing
    order with censored entries set to 0.
    """
    rng = as_generator(rng)
    atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
    m = atoms.shape[0]
    lengths = sample_lengths(rng, atoms[:, 3], n, m)
    x = sample_order_matrix(rng, atoms[:, 0], atoms[:, 1], atoms[:, 2], n, m)
    x[np.arange(n)[None, :] >= lengths[:, None]] = 0.0
    return x, lengths


def sample_sequence(rng, atom: Atom, n: int) -> Sequence:
    """Draw ``l = 1 + Binomial(n-1, w)``, then ``n`` EW values, and keep the top ``l``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = as_generator(rng)
    l = int(1 + rng.binomial(n - 1, atom.w))
    x = sample_order_matrix(rng, atom.ew.alpha, atom.ew.beta, atom.ew.lam, n, 1)[0]
    return Sequence(n, tuple(x[:l]))


# --- packed data for the sampler --------------------------------------------

class PackedSequences:
    """Flat array view of a dataset, for vectorised likelihood evaluation.

    ``flat`` holds every observed value; ``owner[k]`` is the observation it
    belongs to.  ``xmin`` is the smallest observed value per observation, which
    carries the censoring factor ``F(xmin)^(n-l)``.
    """

    def __init__(self, sequences: SequenceT[Sequence]):
        if len(sequences) == 0:
            raise DomainError("need at least one sequence")
        self.sequences = tuple(sequences)
        self.N = len(self.sequences)
        self.n = np.array([s.n for s in self.sequences], dtype=np.int64)
        self.l = np.array([s.l for s in self.sequences], dtype=np.int64)
        self.flat = np.concatenate([s.array for s in self.sequences])
        self.owner = np.repeat(np.arange(self.N), self.l)
        self.offsets = np.concatenate([[0], np.cumsum(self.l)])
        self.xmin = np.array([s.values[-1] for s in self.sequences])
        self.n_minus_l = (self.n - self.l).astype(float)
        self.l_minus_1 = (self.l - 1).astype(float)
        self.const = _log_falling(self.n, self.l) + _log_binom(self.n - 1, self.l - 1)
        self.log_flat = np.log(self.flat)
        self.log_xmin = np.log(self.xmin)

    def loglik_one(self, atom) -> np.ndarray:
        """Log-likelihood of every observation under a single atom (alpha, beta, lam, w)."""
        a, b, lam, w = atom
        lf = ew_logpdf_raw(self.flat, a, b, lam)
        total = np.bincount(self.owner, weights=lf, minlength=self.N)
        total += self.n_minus_l * ew_logcdf_raw(self.xmin, a, b, lam) * (self.n_minus_l > 0)
        total += _xlogy(self.l_minus_1, w) + _xlogy(self.n_minus_l, 1.0 - w) + self.const
        return _nan_to_neginf(total)

    def loglik_per_obs(self, atoms: np.ndarray) -> np.ndarray:
        """Log-likelihood of observation ``i`` under each of its own atoms ``atoms[i, j]``.

        ``atoms`` has shape ``(N, c, 4)``; the result has shape ``(N, c)``.
        """
        atoms = np.asarray(atoms, dtype=float)
        c = atoms.shape[1]
        pa = atoms[self.owner]  # (L, c, 4)
        lf = ew_logpdf_raw(self.flat[:, None], pa[..., 0], pa[..., 1], pa[..., 2])
        total = np.empty((self.N, c))
        for j in range(c):
            total[:, j] = np.bincount(self.owner, weights=lf[:, j], minlength=self.N)
        cens = ew_logcdf_raw(self.xmin[:, None], atoms[..., 0], atoms[..., 1], atoms[..., 2])
        total += np.where(self.n_minus_l[:, None] > 0, self.n_minus_l[:, None] * cens, 0.0)
        total += (_xlogy(self.l_minus_1[:, None], atoms[..., 3])
                  + _xlogy(self.n_minus_l[:, None], 1.0 - atoms[..., 3]) + self.const[:, None])
        return _nan_to_neginf(total)

    def subset(self, idx) -> "ClusterData":
        return ClusterData(self, np.asarray(idx))


class ClusterData:
    """Sufficient pieces of a cluster's members for repeated atom-posterior evaluation."""

    def __init__(self, packed: PackedSequences, idx: np.ndarray):
        self.idx = idx
        mask = np.zeros(packed.N, dtype=bool)
        mask[idx] = True
        sel = mask[packed.owner]
        self.flat = packed.flat[sel]
        self.sum_log_flat = float(packed.log_flat[sel].sum())
        self.count_flat = int(sel.sum())
        cens = packed.n_minus_l[idx] > 0
        self.xmin = packed.xmin[idx][cens]
        self.n_minus_l_cens = packed.n_minus_l[idx][cens]
        self.sum_l_minus_1 = float(packed.l_minus_1[idx].sum())
        self.sum_n_minus_l = float(packed.n_minus_l[idx].sum())
        self.const = float(packed.const[idx].sum())

    def loglik(self, a, b, lam, w) -> float:
        if not (0.0 < w < 1.0):
            return -math.inf
        lf = ew_logpdf_raw(self.flat, a, b, lam)
        out = float(lf.sum())
        if self.xmin.size:
            out += float(np.dot(self.n_minus_l_cens, ew_logcdf_raw(self.xmin, a, b, lam)))
        out += self.sum_l_minus_1 * math.log(w) + self.sum_n_minus_l * math.log1p(-w) + self.const
        return out if not math.isnan(out) else -math.inf


def _nan_to_neginf(a):
    a = np.asarray(a)
    a[np.isnan(a)] = -np.inf
    return a
