"""Fitted-model statistics: omitted competitors, aggregate competition,
expected order statistics, posterior predictive checks and density grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dpmm import Trace
from .ew import DomainError, EWParams, ew_logpdf_raw
from .orderstats import (
    Atom,
    PackedSequences,
    Sequence,
    length_log_pmf_raw,
    order_stat_log_pdf,
    sample_lengths,
    sample_order_matrix,
    sample_padded,
)
from .rng import as_generator


@dataclass(frozen=True)
class OCResult:
    value: float
    mc_se: float
    flagged: bool
    epsilon: float
    draws: int


@dataclass(frozen=True)
class ACResult:
    value: float
    per_observation: np.ndarray


@dataclass(frozen=True)
class PPCheck:
    """Posterior predictive check of aggregate competition for one cluster."""

    observed: float
    replicates: np.ndarray
    tail_prob: float  # P(T_rep > T_obs)
    p_value_raw: float  # 2 (1 - tail_prob), may exceed 1
    p_value: float  # clamped to [0, 1]
    band: tuple[float, float]


def _atom_rows(atom) -> np.ndarray:
    if isinstance(atom, Atom):
        return np.array([atom.as_tuple()])
    if isinstance(atom, EWParams):
        return np.array([atom.as_tuple() + (0.5,)])
    rows = np.atleast_2d(np.asarray(atom, dtype=float))
    if rows.shape[1] == 3:
        rows = np.column_stack([rows, np.full(rows.shape[0], 0.5)])
    return rows


def _draw_rows(rng, rows: np.ndarray, draws: int) -> np.ndarray:
    """One atom per draw: the single row repeated, or uniform picks from a posterior sample."""
    if rows.shape[0] == 1:
        return np.repeat(rows, draws, axis=0)
    return rows[rng.integers(0, rows.shape[0], size=draws)]


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.shape[0]))


def oc_statistic(atom, n: int, epsilon: float = 0.05, draws: int = 100_000, rng=0) -> OCResult:
    """Expected value of the first censored entry, ``E[x_(n - l)]`` with ``l = 1 + Bin(n-1, w)``.

    A draw with ``l == n`` censors nothing and contributes 0.  ``atom`` may be
    an :class:`Atom` or an ``(M, 4)`` array of posterior atoms, in which case
    each draw uses a uniformly chosen row.
    """
    if draws < 1000:
        raise DomainError("need at least 1000 draws")
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = as_generator(rng)
    rows = _draw_rows(rng, _atom_rows(atom), draws)
    lengths = sample_lengths(rng, rows[:, 3], n, draws)
    x = sample_order_matrix(rng, rows[:, 0], rows[:, 1], rows[:, 2], n, draws)
    # in decreasing order the first censored entry sits at index l
    first_censored = np.where(lengths < n, x[np.arange(draws), np.minimum(lengths, n - 1)], 0.0)
    value, se = _mean_se(first_censored)
    return OCResult(value, se, bool(value >= epsilon), float(epsilon), int(draws))


def expected_order_statistic(atom, j: int, n: int, draws: int = 100_000, rng=0) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the ``j``-th smallest of ``n`` uncensored EW draws."""
    if not 1 <= j <= n:
        raise DomainError(f"need 1 <= j <= n, got j={j}, n={n}")
    rng = as_generator(rng)
    rows = _draw_rows(rng, _atom_rows(atom), draws)
    x = sample_order_matrix(rng, rows[:, 0], rows[:, 1], rows[:, 2], n, draws)
    return _mean_se(x[:, n - j])


def _observed_sums(sequences) -> np.ndarray:
    if isinstance(sequences, PackedSequences):
        return np.bincount(sequences.owner, weights=sequences.flat, minlength=sequences.N)
    if isinstance(sequences, np.ndarray):
        return sequences.sum(axis=1)
    return np.array([sum(s.values) for s in sequences])


def ac_statistic(sequences) -> ACResult:
    """Mean over observations of the sum of observed (uncensored) entries.

    Accepts a list of :class:`Sequence`, packed data, or a zero-padded matrix.
    """
    sums = _observed_sums(sequences)
    if sums.shape[0] == 0:
        raise DomainError("need at least one sequence")
    return ACResult(float(sums.mean()), sums)


def posterior_predictive_pvalue(trace: Trace, labels, data: PackedSequences, reps: int = 1, rng=0,
                                band=(0.025, 0.975)) -> dict[int, PPCheck]:
    """Replicate each cluster's AC from the members' own posterior atoms.

    For every retained iteration and each of ``reps`` repetitions, every member
    of a C* cluster is regenerated (length and values) from the atom it carried
    at that iteration.
    """
    rng = as_generator(rng)
    labels = np.asarray(labels)
    per_obs = trace.per_observation()  # (T, N, 4)
    obs_sums = _observed_sums(data)
    out = {}
    for g in range(int(labels.max()) + 1):
        members = np.flatnonzero(labels == g)
        n_vals = data.n[members]
        observed = float(obs_sums[members].mean())
        reps_ac = []
        for t in range(len(trace)):
            rows = np.repeat(per_obs[t, members], reps, axis=0)
            nn = np.repeat(n_vals, reps)
            sums = np.empty(rows.shape[0])
            for n in np.unique(nn):
                sel = nn == n
                mat, _ = sample_padded(rng, rows[sel], int(n))
                sums[sel] = mat.sum(axis=1)
            reps_ac.append(sums.reshape(members.size, reps).mean(axis=0))
        reps_ac = np.concatenate(reps_ac)
        tail = float(np.mean(reps_ac > observed))
        raw = 2.0 * (1.0 - tail)
        lo, hi = np.quantile(reps_ac, band)
        out[g] = PPCheck(observed, reps_ac, tail, raw, min(raw, 1.0), (float(lo), float(hi)))
    return out


def _parse_target(target, n: int):
    if target in ("pooled", "length"):
        return target, None
    if isinstance(target, tuple) and target[0] == "order":
        j = int(target[1])
    elif isinstance(target, str) and target.startswith("order:"):
        j = int(target.split(":", 1)[1])
    else:
        raise DomainError(f"unknown density target {target!r}")
    if not 1 <= j <= n:
        raise DomainError(f"order statistic {j} out of range for n={n}")
    return "order", j


def predictive_density_grid(trace: Trace, grid, target, n: int) -> np.ndarray:
    """Posterior average of the mixture ``sum_k (N_k / N) kernel(x | theta_k)`` on ``grid``.

    ``target`` is ``"pooled"`` (EW density of a single value), ``"order:j"``
    (density of the j-th smallest of ``n``), or ``"length"`` (pmf of ``l``,
    where ``grid`` holds integer lengths).
    """
    kind, j = _parse_target(target, n)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("grid must be a non-empty 1-d array")
    if kind == "length":
        if np.any(grid != np.round(grid)) or np.any((grid < 1) | (grid > n)):
            raise DomainError("length grid must hold integers in [1, n]")
    elif np.any(~(grid > 0)):
        raise DomainError("density grid must be strictly positive")

    acc = np.zeros(grid.shape[0])
    for atoms, z in zip(trace.atoms, trace.assignments):
        weights = np.bincount(z, minlength=atoms.shape[0]) / z.shape[0]
        for w_k, (a, b, lam, w) in zip(weights, atoms):
            if kind == "pooled":
                acc += w_k * np.exp(ew_logpdf_raw(grid, a, b, lam))
            elif kind == "order":
                acc += w_k * np.exp(order_stat_log_pdf(grid, j, n, EWParams(a, b, lam)))
            else:
                acc += w_k * np.exp(length_log_pmf_raw(grid, n, w))
    return acc / len(trace)


def length_grid(n: int) -> np.ndarray:
    return np.arange(1, n + 1, dtype=float)


def sequences_from_matrix(matrix: np.ndarray, n: int) -> list[Sequence]:
    return [Sequence(n, tuple(row[row > 0])) for row in np.asarray(matrix)]
