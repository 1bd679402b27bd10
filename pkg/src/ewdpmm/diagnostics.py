"""Autocorrelation and effective sample size for scalar MCMC series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SeriesDiagnostics:
    name: str
    length: int
    mean: float
    sd: float
    ess: float
    acf: tuple[float, ...]  # lags 1..max_lag; NaN when undefined
    note: str = ""


def autocorrelation(x, max_lag: int | None = None) -> np.ndarray:
    """Lag-k autocorrelations for k = 0..max_lag.

    Each lag's covariance is averaged over its ``len(x) - k`` available pairs,
    so a strictly alternating series has lag-1 value exactly -1.  Returns all
    NaN for a constant series.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    max_lag = n - 1 if max_lag is None else min(max_lag, n - 1)
    d = x - x.mean()
    var = float(np.dot(d, d)) / n
    if n < 2 or var == 0.0:
        return np.full(max_lag + 1, np.nan)
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(d, size)
    raw = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    return raw / (n - np.arange(max_lag + 1)) / var


def effective_sample_size(x) -> float:
    """Geyer initial-monotone-sequence ESS.

    A constant series returns its length (there is no autocorrelation to
    correct for).
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 4:
        return float(n)
    rho = autocorrelation(x)
    if np.isnan(rho[0]):
        return float(n)
    pairs = []
    for k in range(0, n - 1, 2):
        g = rho[k] + rho[k + 1]
        if not g > 0:
            break
        pairs.append(g)
    if not pairs:
        tau = 1.0 / np.log10(n)
    else:
        gam = np.minimum.accumulate(np.asarray(pairs))
        tau = max(-1.0 + 2.0 * float(gam.sum()), 1.0 / np.log10(n))
    return float(n / tau)


def describe(name: str, x, max_lag: int = 20) -> SeriesDiagnostics:
    x = np.asarray(x, dtype=float)
    acf = autocorrelation(x, max_lag)[1:]
    note = "constant series: autocorrelation undefined" if np.all(np.isnan(acf)) and x.size > 1 else ""
    return SeriesDiagnostics(name, int(x.size), float(x.mean()), float(x.std(ddof=1)) if x.size > 1 else 0.0,
                             effective_sample_size(x), tuple(float(v) for v in acf), note)
