"""Posterior co-membership and a point-estimate partition under linear loss.

The partition maximises ``sum_{i<j} 1[C_i = C_j] (rho_ij - K)`` for each K in a
grid; the best (partition, K) pair overall is returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dpmm import Trace, canonical_relabel
from .rng import rng_stream

K_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
_TOL = 1e-12


@dataclass(frozen=True)
class Partition:
    labels: np.ndarray
    K_star: float
    score: float

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1


@dataclass(frozen=True)
class ClusterSummary:
    label: int
    size: int
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def coincidence_matrix(trace) -> np.ndarray:
    """Fraction of retained iterations in which each pair shares a cluster.

    Accepts a :class:`Trace` or a ``(T, N)`` array of assignments.
    """
    z = trace.assignments if isinstance(trace, Trace) else np.asarray(trace)
    if z.ndim != 2 or z.shape[0] == 0:
        raise ValueError("need a non-empty (T, N) assignment history")
    T, N = z.shape
    acc = np.zeros((N, N))
    for row in z:
        onehot = np.zeros((N, int(row.max()) + 1))
        onehot[np.arange(N), row] = 1.0
        acc += onehot @ onehot.T
    return acc / T


def canonical_labels(labels) -> np.ndarray:
    return canonical_relabel(np.asarray(labels, dtype=np.int64))[0]


def partition_score(labels, rho, K: float) -> float:
    labels = np.asarray(labels)
    rho = np.asarray(rho, dtype=float)
    same = labels[:, None] == labels[None, :]
    iu = np.triu_indices(labels.shape[0], k=1)
    return float(np.sum(np.where(same[iu], rho[iu] - K, 0.0)))


def _local_search(S: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Best-improvement merges and single-element moves until no step helps."""
    N = S.shape[0]
    lab = canonical_labels(labels).copy()
    C = int(lab.max()) + 1
    onehot = np.zeros((N, C))
    onehot[np.arange(N), lab] = 1.0
    G = S @ onehot  # G[i, c] = sum_{j in c} S[i, j]
    M = onehot.T @ G  # M[a, b] = sum_{i in a, j in b} S[i, j]
    size = np.bincount(lab, minlength=C)
    rows = np.arange(N)

    while True:
        C = size.shape[0]
        mm = M.copy()
        np.fill_diagonal(mm, -np.inf)
        m_idx = int(np.argmax(mm))
        m_gain = mm.flat[m_idx] if C > 1 else -np.inf
        own = G[rows, lab]
        mv = G - own[:, None]
        mv[rows, lab] = -np.inf
        v_idx = int(np.argmax(mv))
        v_gain = mv.flat[v_idx] if C > 1 else -np.inf
        fresh = np.where(size[lab] > 1, -own, -np.inf)
        f_idx = int(np.argmax(fresh))
        f_gain = fresh[f_idx]

        best = max(m_gain, v_gain, f_gain)
        if not best > _TOL:
            break
        if m_gain == best:
            a, b = sorted(divmod(m_idx, C))
            M[a, :] += M[b, :]
            M[:, a] += M[:, b]
            G[:, a] += G[:, b]
            size[a] += size[b]
            lab[lab == b] = a
            M, G, size = _drop(M, G, size, lab, b)
            continue
        if v_gain == best:
            i, dest = divmod(v_idx, C)
        else:
            i, dest = f_idx, C
            M = np.pad(M, ((0, 1), (0, 1)))
            G = np.pad(G, ((0, 0), (0, 1)))
            size = np.append(size, 0)
        src = lab[i]
        g_i = G[i].copy()
        # row/column updates also give the (src, dest) entry its exact new value
        M[src, :] -= g_i
        M[:, src] -= g_i
        M[dest, :] += g_i
        M[:, dest] += g_i
        G[:, src] -= S[:, i]
        G[:, dest] += S[:, i]
        lab[i] = dest
        size[src] -= 1
        size[dest] += 1
        if size[src] == 0:
            M, G, size = _drop(M, G, size, lab, src)
    return canonical_labels(lab)


def _drop(M, G, size, lab, b):
    lab[lab > b] -= 1
    keep = np.arange(size.shape[0]) != b
    return M[np.ix_(keep, keep)], G[:, keep], size[keep]


def _search_one_k(rho: np.ndarray, K: float, restarts: int, seed: int):
    N = rho.shape[0]
    S = rho - K
    np.fill_diagonal(S, 0.0)
    rng = rng_stream(seed, "partition")
    starts = [np.arange(N)]
    for _ in range(restarts):
        k = int(rng.integers(1, min(N, 10) + 1))
        starts.append(rng.integers(0, k, size=N))
    best_labels, best_score = None, -np.inf
    for start in starts:
        labels = _local_search(S, start)
        score = partition_score(labels, rho, K)
        if score > best_score + _TOL or (abs(score - best_score) <= _TOL and _lex_less(labels, best_labels)):
            best_labels, best_score = labels, score
    return best_labels, best_score


def _lex_less(a, b) -> bool:
    if b is None:
        return True
    diff = np.flatnonzero(a != b)
    return bool(diff.size) and a[diff[0]] < b[diff[0]]


def optimal_partition(rho, K_grid=K_GRID, restarts: int = 10, seed: int = 0) -> Partition:
    """Maximise the linear-loss score over partitions for each K, then over K.

    Ties go to the smaller K, then to the lexicographically smaller canonical labels.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("rho must be a square matrix")
    best = None
    for K in sorted(K_grid):
        labels, score = _search_one_k(rho, float(K), restarts, seed)
        if best is None or score > best.score + _TOL:
            best = Partition(labels, float(K), score)
    return best


def clusterwise_summaries(trace: Trace, partition, quantiles=(0.025, 0.975)) -> list[ClusterSummary]:
    """Per C* cluster: average the members' atom values within each iteration, then summarise across iterations."""
    labels = partition.labels if isinstance(partition, Partition) else np.asarray(partition)
    if labels.shape[0] != trace.n_obs:
        raise ValueError("partition and trace cover different numbers of observations")
    per_obs = trace.per_observation()
    out = []
    for g in range(int(labels.max()) + 1):
        members = labels == g
        series = per_obs[:, members, :].mean(axis=1)  # (T, 4)
        lo, hi = np.quantile(series, quantiles, axis=0)
        out.append(ClusterSummary(g, int(members.sum()), series.mean(axis=0), lo, hi))
    return out
