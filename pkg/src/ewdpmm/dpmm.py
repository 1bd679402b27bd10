"""Dirichlet process mixture sampler for EW order-statistics sequences.

One iteration of :func:`run_chain` is

1. an auxiliary-atom (Neal's algorithm 8) Gibbs sweep over assignments,
2. a short Metropolis-Hastings chain on each live cluster's atom,
3. an Escobar-West auxiliary-variable update of the concentration ``nu``.

Cluster atoms are stored once per cluster (``ChainState.atoms``, columns
alpha, beta, lam, w) next to an assignment vector; per-observation atom
values are only materialised by :class:`Trace`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import betaln, gammaln

from .orderstats import Atom, ClusterData, PackedSequences
from .rng import as_generator, rng_stream

log = logging.getLogger(__name__)

PARAMS = ("alpha", "beta", "lambda", "w")


class ChainError(RuntimeError):
    """The chain reached a state it cannot continue from."""


@dataclass(frozen=True)
class Hyperparams:
    """Base-measure and concentration priors (all Gammas are shape-rate)."""

    a: float = 1.0
    b: float = 1.0
    alpha1: float = 1.0
    alpha2: float = 0.1
    beta1: float = 1.0
    beta2: float = 0.1
    lambda1: float = 1.0
    lambda2: float = 0.1
    tau1: float = 1.0
    tau2: float = 1.0

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"hyperparameter {k} must be finite and > 0, got {v!r}")

    @classmethod
    def vague(cls) -> "Hyperparams":
        return cls()

    @classmethod
    def retail(cls) -> "Hyperparams":
        return cls(a=2.0, b=3.0, alpha1=7.0, alpha2=0.7, beta1=0.5, beta2=1.0,
                   lambda1=1.0, lambda2=1.0, tau1=5.0, tau2=1.0)


@dataclass(frozen=True)
class MCMCConfig:
    iterations: int = 10000
    burn_in: int = 200
    thin: int = 10
    aux_count: int = 3
    mh_inner: int = 20
    step_sizes: tuple[float, float, float, float] = (0.3, 0.3, 0.3, 0.05)
    init_clusters: int = 10
    seed: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.thin < 1 or self.aux_count < 1 or self.mh_inner < 1 or self.init_clusters < 1:
            raise ValueError("thin, aux_count, mh_inner and init_clusters must be >= 1")
        if len(self.step_sizes) != 4 or not all(s > 0 for s in self.step_sizes):
            raise ValueError("step_sizes needs four positive values")

    @property
    def n_retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


@dataclass
class ChainState:
    assignments: np.ndarray
    atoms: np.ndarray
    nu: float

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.atoms.shape[0])

    @property
    def n_star(self) -> int:
        return int(self.atoms.shape[0])

    def copy(self) -> "ChainState":
        return ChainState(self.assignments.copy(), self.atoms.copy(), self.nu)

    def check(self):
        counts = self.counts
        if counts.shape[0] != self.atoms.shape[0] or np.any(counts == 0):
            raise ChainError("state has empty clusters or orphan assignments")
        if not (np.all(np.isfinite(self.atoms)) and math.isfinite(self.nu)):
            raise ChainError("state contains non-finite values")


@dataclass
class AcceptanceStats:
    proposed: int = 0
    accepted: int = 0
    out_of_range: int = 0

    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")


@dataclass
class Trace:
    """Thinned post-burn-in history of a chain."""

    iterations: np.ndarray
    assignments: np.ndarray
    atoms: list[np.ndarray]
    nu: np.ndarray
    acceptance: dict[str, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.iterations.shape[0])

    @property
    def n_obs(self) -> int:
        return int(self.assignments.shape[1])

    @property
    def n_star(self) -> np.ndarray:
        return np.array([a.shape[0] for a in self.atoms], dtype=np.int64)

    def per_observation(self) -> np.ndarray:
        """``(T, N, 4)`` atom values carried by each observation at each retained iteration."""
        return np.stack([a[z] for a, z in zip(self.atoms, self.assignments)])


# --- base measure -----------------------------------------------------------

def _gamma_logpdf(x, shape, rate):
    with np.errstate(divide="ignore", invalid="ignore"):
        return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x


def g0_sample_array(rng, h: Hyperparams, size) -> np.ndarray:
    """Draws from G0 stacked on a trailing axis of length 4."""
    rng = as_generator(rng)
    size = (size,) if np.ndim(size) == 0 else tuple(size)
    out = np.empty(size + (4,))
    out[..., 0] = rng.gamma(h.alpha1, 1.0 / h.alpha2, size)
    out[..., 1] = rng.gamma(h.beta1, 1.0 / h.beta2, size)
    out[..., 2] = rng.gamma(h.lambda1, 1.0 / h.lambda2, size)
    out[..., 3] = rng.beta(h.a, h.b, size)
    # numpy's gamma can return exactly 0 for tiny shapes; keep the support open
    tiny = np.finfo(float).tiny
    out[..., :3] = np.maximum(out[..., :3], tiny)
    out[..., 3] = np.clip(out[..., 3], tiny, 1.0 - np.finfo(float).epsneg)
    return out


def g0_sample(rng, h: Hyperparams) -> Atom:
    return Atom.from_tuple(g0_sample_array(rng, h, ()))


def g0_log_density(atom, h: Hyperparams):
    """Log density of Gamma x Gamma x Gamma x Beta at ``atom`` (Atom or array ending in 4)."""
    if isinstance(atom, Atom):
        atom = np.array(atom.as_tuple())
    atom = np.asarray(atom, dtype=float)
    a, b, lam, w = atom[..., 0], atom[..., 1], atom[..., 2], atom[..., 3]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (_gamma_logpdf(a, h.alpha1, h.alpha2) + _gamma_logpdf(b, h.beta1, h.beta2)
               + _gamma_logpdf(lam, h.lambda1, h.lambda2)
               + (h.a - 1.0) * np.log(w) + (h.b - 1.0) * np.log1p(-w) - betaln(h.a, h.b))
    valid = (a > 0) & (b > 0) & (lam > 0) & (w > 0) & (w < 1)
    out = np.where(valid, out, -np.inf)
    return float(out) if out.ndim == 0 else out


def prior_expected_clusters(nu: float, N: int) -> float:
    """Approximate prior mean number of occupied clusters, ``nu log((nu + N) / nu)``."""
    if not nu > 0 or N < 1:
        raise ValueError("need nu > 0 and N >= 1")
    return nu * math.log1p(N / nu)


# --- assignment sweep -------------------------------------------------------

def _choose(logw: np.ndarray, u: float) -> int:
    m = np.max(logw)
    if not np.isfinite(m):
        raise ChainError("every assignment weight is zero: the data have zero likelihood "
                         "under all live and auxiliary atoms (check priors against the data)")
    p = np.exp(logw - m)
    c = np.cumsum(p)
    return int(min(np.searchsorted(c, u * c[-1], side="right"), len(c) - 1))


def _normalise(logw: np.ndarray) -> np.ndarray:
    m = np.max(logw)
    if not np.isfinite(m):
        raise ChainError("every assignment weight is zero")
    p = np.exp(logw - m)
    return p / p.sum()


def assignment_log_weights(counts_wo_i, ll_live, nu: float, ll_aux) -> np.ndarray:
    """Unnormalised log weights over live clusters then auxiliaries.

    Live cluster ``k`` gets ``N_k f(x | theta_k)``; each of the ``c`` auxiliaries
    gets ``(nu / c) f(x | theta_aux)``.  The common factor ``1 / (N - 1 + nu)``
    is dropped.
    """
    counts_wo_i = np.asarray(counts_wo_i, dtype=float)
    ll_aux = np.asarray(ll_aux, dtype=float)
    with np.errstate(divide="ignore"):
        live = np.log(counts_wo_i) + np.asarray(ll_live, dtype=float)
    aux = math.log(nu / ll_aux.shape[0]) + ll_aux
    return np.concatenate([live, aux])


def assignment_weights(i: int, state: ChainState, aux: np.ndarray, data: PackedSequences) -> np.ndarray:
    """Probabilities of reassigning observation ``i`` to each live cluster, then each auxiliary.

    ``aux`` holds ``c`` atoms (rows alpha, beta, lam, w).  When ``i`` is alone in
    its cluster, that cluster disappears from the live list and its atom takes
    auxiliary slot 0.  The returned vector therefore has length
    ``N* + c`` (or ``N* - 1 + c`` for a singleton).
    """
    aux = np.array(aux, dtype=float, copy=True)
    counts = state.counts.copy()
    k = int(state.assignments[i])
    counts[k] -= 1
    keep = np.ones(state.n_star, dtype=bool)
    if counts[k] == 0:
        aux[0] = state.atoms[k]
        keep[k] = False
    ll_live = np.array([data.loglik_one(a)[i] for a in state.atoms[keep]])
    ll_aux = data.loglik_per_obs(np.broadcast_to(aux, (data.N,) + aux.shape))[i]
    return _normalise(assignment_log_weights(counts[keep], ll_live, state.nu, ll_aux))


class _Clusters:
    """Growable cluster table used inside a sweep."""

    def __init__(self, atoms: np.ndarray, ll: np.ndarray, counts: np.ndarray):
        cap = max(8, 2 * atoms.shape[0])
        n = ll.shape[0]
        self.atoms = np.zeros((cap, 4))
        self.ll = np.full((n, cap), -np.inf)
        self.counts = np.zeros(cap, dtype=np.int64)
        k = atoms.shape[0]
        self.atoms[:k] = atoms
        self.ll[:, :k] = ll
        self.counts[:k] = counts
        self.size = k

    def free_slot(self) -> int:
        dead = np.flatnonzero(self.counts[: self.size] == 0)
        if dead.size:
            return int(dead[0])
        if self.size == self.atoms.shape[0]:
            cap = 2 * self.size
            self.atoms = np.concatenate([self.atoms, np.zeros((cap - self.size, 4))])
            self.ll = np.concatenate([self.ll, np.full((self.ll.shape[0], cap - self.size), -np.inf)], axis=1)
            self.counts = np.concatenate([self.counts, np.zeros(cap - self.size, dtype=np.int64)])
        self.size += 1
        return self.size - 1


def canonical_relabel(assignments: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Relabel clusters by first appearance; returns ``(labels, old_ids_in_new_order)``."""
    _, first = np.unique(assignments, return_index=True)
    order = assignments[np.sort(first)]
    remap = np.empty(int(assignments.max()) + 1, dtype=np.int64)
    remap[order] = np.arange(order.size)
    return remap[assignments], order


def gibbs_assignment_sweep(state: ChainState, data: PackedSequences, h: Hyperparams, rng,
                           aux_count: int = 3, flat_likelihood: bool = False) -> ChainState:
    """Reassign every observation once, in index order, by algorithm 8.

    ``flat_likelihood=True`` replaces every likelihood by 1 (a test hook under
    which the sweep is a Chinese-restaurant-process Gibbs sampler).
    """
    rng = as_generator(rng)
    N = data.N
    c = aux_count
    assign = state.assignments.copy()
    aux_atoms = g0_sample_array(rng, h, (N, c))
    u = rng.random(N)
    if flat_likelihood:
        ll = np.zeros((N, state.n_star))
        aux_ll = np.zeros((N, c))
    else:
        ll = np.column_stack([data.loglik_one(a) for a in state.atoms])
        aux_ll = data.loglik_per_obs(aux_atoms)
    cl = _Clusters(state.atoms, ll, np.bincount(assign, minlength=state.n_star))
    log_nu_c = math.log(state.nu / c)

    for i in range(N):
        k = assign[i]
        cl.counts[k] -= 1
        singleton = cl.counts[k] == 0
        lla = aux_ll[i].copy()
        if singleton:
            lla[0] = cl.ll[i, k]
        K = cl.size
        with np.errstate(divide="ignore"):
            logw = np.concatenate([np.log(cl.counts[:K]) + cl.ll[i, :K], log_nu_c + lla])
        choice = _choose(logw, u[i])
        if choice < K:
            new = choice
        elif singleton and choice == K:
            new = k  # own atom, kept in auxiliary slot 0
        else:
            atom = aux_atoms[i, choice - K]
            new = cl.free_slot()
            cl.atoms[new] = atom
            cl.ll[:, new] = 0.0 if flat_likelihood else data.loglik_one(atom)
        assign[i] = new
        cl.counts[new] += 1

    labels, order = canonical_relabel(assign)
    return ChainState(labels, cl.atoms[order].copy(), state.nu)


# --- Metropolis-Hastings atom refresh ---------------------------------------

def mh_log_target(atom, members: ClusterData | None, h: Hyperparams) -> float:
    """Unnormalised log posterior of one cluster atom: prior plus member log-likelihoods."""
    if isinstance(atom, Atom):
        atom = atom.as_tuple()
    a, b, lam, w = (float(v) for v in atom)
    if not (a > 0 and b > 0 and lam > 0 and 0 < w < 1):
        return -math.inf
    out = g0_log_density(np.array([a, b, lam, w]), h)
    if members is not None:
        out += members.loglik(a, b, lam, w)
    return out if not math.isnan(out) else -math.inf


def log_hastings_correction(new, old) -> float:
    """log q(old | new) / q(new | old) for log-normal random-walk proposals on positive values."""
    return float(np.sum(np.log(new)) - np.sum(np.log(old)))


def mh_refresh_atom(atom, members: ClusterData | None, h: Hyperparams, step_sizes, n_steps: int,
                    rng, free=(True, True, True, True), stats: AcceptanceStats | None = None) -> np.ndarray:
    """Run ``n_steps`` joint MH steps from ``atom``; returns the last state.

    alpha, beta and lam move on the log scale; w moves additively and
    proposals outside (0, 1) are rejected outright.
    """
    rng = as_generator(rng)
    cur = np.array(atom, dtype=float)
    free = np.asarray(free, dtype=bool)
    steps = np.where(free, np.asarray(step_sizes, dtype=float), 0.0)
    z = rng.standard_normal((n_steps, 4)) * steps
    logu = np.log(rng.random(n_steps))
    cur_lp = mh_log_target(cur, members, h)
    pos = free[:3]
    for t in range(n_steps):
        prop = cur.copy()
        prop[:3] = cur[:3] * np.exp(z[t, :3])
        prop[3] = cur[3] + z[t, 3]
        if stats is not None:
            stats.proposed += 1
        if not 0.0 < prop[3] < 1.0:
            if stats is not None:
                stats.out_of_range += 1
            continue
        prop_lp = mh_log_target(prop, members, h)
        log_a = prop_lp - cur_lp + log_hastings_correction(prop[:3][pos], cur[:3][pos])
        if logu[t] < log_a:
            cur, cur_lp = prop, prop_lp
            if stats is not None:
                stats.accepted += 1
    return cur


def mh_cluster_update(k: int, state: ChainState, data: PackedSequences, h: Hyperparams,
                      config: MCMCConfig, rng, stats: AcceptanceStats | None = None,
                      free=(True, True, True, True)) -> ChainState:
    members = data.subset(np.flatnonzero(state.assignments == k))
    atoms = state.atoms.copy()
    atoms[k] = mh_refresh_atom(atoms[k], members, h, config.step_sizes, config.mh_inner, rng,
                               free=free, stats=stats)
    return ChainState(state.assignments, atoms, state.nu)


# --- concentration ----------------------------------------------------------

def nu_update(state: ChainState, h: Hyperparams, rng, N: int | None = None, n_star: int | None = None) -> ChainState:
    """Escobar-West auxiliary-variable Gibbs refresh of ``nu``."""
    rng = as_generator(rng)
    N = state.assignments.shape[0] if N is None else N
    k = state.n_star if n_star is None else n_star
    nu = _nu_step(state.nu, N, k, h.tau1, h.tau2, rng)
    return ChainState(state.assignments, state.atoms, nu)


def _nu_step(nu, N, k, tau1, tau2, rng):
    gamma_aux = rng.beta(nu + 1.0, N)
    rate = tau2 - math.log(gamma_aux)
    odds = (tau1 + k - 1.0) / (N * rate)
    pi = odds / (1.0 + odds)
    shape = tau1 + k if rng.random() < pi else tau1 + k - 1.0
    return float(rng.gamma(shape, 1.0 / rate))


# --- driver -----------------------------------------------------------------

def initial_state(data: PackedSequences, h: Hyperparams, config: MCMCConfig, rng) -> ChainState:
    """Random balanced split into ``init_clusters`` groups with G0 atoms; ``nu`` at its prior mean."""
    rng = as_generator(rng)
    k = min(config.init_clusters, data.N)
    assign = rng.permutation(data.N) % k
    labels, _ = canonical_relabel(assign)
    atoms = g0_sample_array(rng, h, k)
    return ChainState(labels, atoms, h.tau1 / h.tau2)


def run_chain(data: PackedSequences, h: Hyperparams, config: MCMCConfig, seed: int | None = None,
              init: ChainState | None = None, progress_every: int = 0) -> Trace:
    seed = config.seed if seed is None else seed
    rngs = {name: rng_stream(seed, name) for name in ("init", "sweep", "mh", "nu")}
    state = initial_state(data, h, config, rngs["init"]) if init is None else init.copy()
    stats = AcceptanceStats()
    kept_it, kept_z, kept_atoms, kept_nu = [], [], [], []

    for it in range(1, config.iterations + 1):
        state = gibbs_assignment_sweep(state, data, h, rngs["sweep"], config.aux_count)
        atoms = state.atoms.copy()
        for k in range(state.n_star):
            members = data.subset(np.flatnonzero(state.assignments == k))
            atoms[k] = mh_refresh_atom(atoms[k], members, h, config.step_sizes, config.mh_inner,
                                       rngs["mh"], stats=stats)
        state = ChainState(state.assignments, atoms, state.nu)
        state = nu_update(state, h, rngs["nu"])
        if not (np.all(np.isfinite(state.atoms)) and math.isfinite(state.nu) and state.nu > 0):
            raise ChainError(f"non-finite chain state at iteration {it}")
        if it > config.burn_in and (it - config.burn_in) % config.thin == 0:
            kept_it.append(it)
            kept_z.append(state.assignments.copy())
            kept_atoms.append(state.atoms.copy())
            kept_nu.append(state.nu)
        if progress_every and it % progress_every == 0:
            log.info("iteration %d: N*=%d nu=%.3f accept=%.3f", it, state.n_star, state.nu, stats.rate())

    rate = stats.rate()
    acceptance = {p: rate for p in PARAMS}
    acceptance["joint"] = rate
    acceptance["w_out_of_range"] = stats.out_of_range / stats.proposed if stats.proposed else float("nan")
    return Trace(np.array(kept_it, dtype=np.int64),
                 np.array(kept_z, dtype=np.int64).reshape(len(kept_z), data.N),
                 kept_atoms, np.array(kept_nu), acceptance)
