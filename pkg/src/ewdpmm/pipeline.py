"""Command implementations behind the CLI: simulate, fit, partition, diagnose, pp-check.

Every command is a pure function of its inputs, config and seed, so reruns
produce byte-identical files.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path

import numpy as np

from . import io as fio
from .analytics import (
    ac_statistic,
    expected_order_statistic,
    length_grid,
    oc_statistic,
    posterior_predictive_pvalue,
    predictive_density_grid,
)
from .diagnostics import describe
from .dpmm import PARAMS, Trace, run_chain
from .orderstats import PackedSequences
from .partition import Partition, clusterwise_summaries, coincidence_matrix, optimal_partition
from .rng import rng_stream
from .simulate import STUDIES, Study, simulate_study

log = logging.getLogger(__name__)


def _clean(v):
    """JSON-safe floats: NaN/inf become null."""
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_json(path, obj) -> None:
    fio.atomic_write_text(path, json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


# --- simulate ---------------------------------------------------------------

def load_study(name: str, atoms_path=None) -> Study:
    if name in STUDIES:
        return STUDIES[name]
    if name != "custom":
        raise ValueError(f"unknown study {name!r}; choose study1, study2 or custom")
    if atoms_path is None:
        raise ValueError("custom study needs --atoms FILE")
    with open(atoms_path, encoding="utf-8") as fh:
        mix = json.load(fh)
    return Study(mix.get("kernel", "ew"), tuple(tuple(map(float, a)) for a in mix["atoms"]),
                 tuple(map(float, mix["weights"])))


def simulate_cmd(study: Study, N: int, n: int, seed: int, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    sim = simulate_study(study, N, n, rng_stream(seed, "simulate"))
    width = len(study.atoms[0])
    ids = [f"obs{i + 1}" for i in range(N)]
    paths = {"data": out / "data.csv", "truth": out / "truth.csv"}
    fio.write_data_csv(paths["data"], ids, sim.matrix)
    atoms = np.asarray(study.atoms, dtype=float)
    fio.write_csv(paths["truth"], ["id", "component", *study.param_names, "l"],
                  ([oid, int(c), *(float(v) for v in atoms[c, :width]), int(l)]
                   for oid, c, l in zip(ids, sim.components, sim.lengths)))
    return paths


def read_truth(path) -> tuple[list[str], np.ndarray]:
    rows = list(fio._read_rows(path))
    return [c[0] for _, c in rows[1:]], np.array([int(c[1]) for _, c in rows[1:]])


# --- fit --------------------------------------------------------------------

def resolve_target(target: str, n: int):
    """Config target names: ``pooled``, ``length``, ``top`` (the maximum) or ``order:j``."""
    if target == "top":
        return f"order:{n}"
    return target


def density_grids(trace: Trace, data: fio.Dataset, targets, points: int) -> dict[str, tuple[str, np.ndarray, np.ndarray]]:
    xmax = max(s.values[0] for s in data.sequences) * 1.05
    x = xmax * np.arange(1, points + 1) / points
    out = {}
    for t in targets:
        t = resolve_target(t, data.n)
        if t == "length":
            g = length_grid(data.n)
            out[t] = ("l", g, predictive_density_grid(trace, g, "length", data.n))
        else:
            out[t] = ("x", x, predictive_density_grid(trace, x, t, data.n))
    return out


def _grid_name(target: str) -> str:
    return "density_grid_" + target.replace(":", "_") + ".csv"


def cluster_report(trace: Trace, part: Partition, data: fio.Dataset, packed: PackedSequences,
                   cfg: dict, rng) -> list[dict]:
    summaries = clusterwise_summaries(trace, part)
    per_obs = trace.per_observation()
    pp = posterior_predictive_pvalue(trace, part.labels, packed, reps=int(cfg["pp.reps"]), rng=rng)
    n = data.n
    draws = int(cfg["oc_draws"])
    out = []
    for s in summaries:
        members = np.flatnonzero(part.labels == s.label)
        rows = per_obs[:, members, :].reshape(-1, 4)
        oc = oc_statistic(rows, n, epsilon=float(cfg["epsilon"]), draws=draws, rng=rng)
        eos = []
        for j in range(n, max(n - 4, 0), -1):
            m, se = expected_order_statistic(rows, j, n, draws=draws, rng=rng)
            eos.append({"j": j, "value": m, "mc_se": se})
        c = pp[s.label]
        out.append({
            "label": s.label,
            "size": s.size,
            "members": [data.ids[i] for i in members],
            "params": {p: {"mean": s.mean[k], "lower": s.lower[k], "upper": s.upper[k]}
                       for k, p in enumerate(PARAMS)},
            "oc": {"value": oc.value, "mc_se": oc.mc_se, "flagged": oc.flagged,
                   "epsilon": oc.epsilon, "draws": oc.draws},
            "ac": ac_statistic([data.sequences[i] for i in members]).value,
            "expected_order_statistics": eos,
            "pp_check": {"observed": c.observed, "tail_prob": c.tail_prob, "p_value": c.p_value,
                         "p_value_raw": c.p_value_raw, "band": list(c.band),
                         "replicates": int(c.replicates.size)},
        })
    return out


def fit_cmd(data_path, cfg: dict, out_dir, progress_every: int = 0) -> dict:
    out = Path(out_dir)
    data = fio.ingest_csv(data_path, n=cfg.get("n"))
    packed = PackedSequences(data.sequences)
    seed = int(cfg["seed"])
    trace = run_chain(packed, fio.hyperparams(cfg), fio.mcmc_config(cfg), seed=seed,
                      progress_every=progress_every)
    fio.write_trace_csv(out / "trace.csv", trace, data.ids)
    rho = coincidence_matrix(trace)
    fio.write_matrix_csv(out / "coincidence.csv", data.ids, rho)
    part = optimal_partition(rho, cfg["k_grid"], restarts=int(cfg["partition.restarts"]), seed=seed)
    fio.write_partition_csv(out / "partition.csv", data.ids, part.labels, part.K_star, part.score)
    for target, (col, grid, dens) in density_grids(trace, data, cfg["density.targets"],
                                                   int(cfg["density.grid_points"])).items():
        fio.write_csv(out / _grid_name(target), [col, "density"], zip(grid, dens))

    clusters = cluster_report(trace, part, data, packed, cfg, rng_stream(seed, "analytics"))
    nstar = trace.n_star
    values, counts = np.unique(nstar, return_counts=True)
    summary = {
        "data": {"N": len(data.ids), "n": data.n},
        "chain": {
            "retained": len(trace),
            "n_star_counts": {str(int(v)): int(c) for v, c in zip(values, counts)},
            "n_star_mode": int(values[np.argmax(counts)]),
            "nu_mean": float(np.mean(trace.nu)),
            "acceptance": dict(trace.acceptance),
        },
        "partition": {"K_star": part.K_star, "score": part.score, "n_clusters": part.n_clusters},
        "clusters": clusters,
        "config": cfg,
    }
    write_json(out / "summary.json", summary)
    return summary


# --- partition, pp-check ----------------------------------------------------

def partition_cmd(trace_path, cfg: dict, out_dir) -> Partition:
    out = Path(out_dir)
    trace, ids = fio.read_trace_csv(trace_path)
    rho = coincidence_matrix(trace)
    fio.write_matrix_csv(out / "coincidence.csv", ids, rho)
    part = optimal_partition(rho, cfg["k_grid"], restarts=int(cfg["partition.restarts"]), seed=int(cfg["seed"]))
    fio.write_partition_csv(out / "partition.csv", ids, part.labels, part.K_star, part.score)
    return part


def _aligned_labels(trace_ids, part_ids, labels) -> np.ndarray:
    pos = {oid: k for k, oid in enumerate(part_ids)}
    missing = [oid for oid in trace_ids if oid not in pos]
    if missing or len(part_ids) != len(trace_ids):
        raise fio.DataError(f"partition and trace cover different observations (e.g. {missing[:3]})")
    return labels[[pos[oid] for oid in trace_ids]]


def pp_check_cmd(trace_path, partition_path, data_path, cfg: dict, out_dir) -> dict:
    trace, ids = fio.read_trace_csv(trace_path)
    p_ids, labels = fio.read_partition_csv(partition_path)
    labels = _aligned_labels(ids, p_ids, labels)
    data = fio.ingest_csv(data_path, n=cfg.get("n"))
    by_id = dict(data.rows)
    try:
        seqs = [by_id[oid] for oid in ids]
    except KeyError as exc:
        raise fio.DataError(f"observation {exc.args[0]!r} from the trace is missing from the data") from None
    checks = posterior_predictive_pvalue(trace, labels, PackedSequences(seqs), reps=int(cfg["pp.reps"]),
                                         rng=rng_stream(int(cfg["seed"]), "analytics"))
    out = Path(out_dir)
    fio.write_csv(out / "pp_check.csv", ["cluster", "observed_ac", "tail_prob", "p_value", "p_value_raw",
                                         "band_lower", "band_upper", "replicates"],
                  ([g, c.observed, c.tail_prob, c.p_value, c.p_value_raw, c.band[0], c.band[1],
                    int(c.replicates.size)] for g, c in sorted(checks.items())))
    fio.write_csv(out / "pp_replicates.csv", ["cluster", "replicate", "ac"],
                  ([g, r, v] for g, c in sorted(checks.items()) for r, v in enumerate(c.replicates)))
    return checks


# --- diagnose ---------------------------------------------------------------

SERIES = ("sqrt_alpha", "sqrt_beta", "sqrt_lambda", "w")


def _cluster_series(trace: Trace, labels=None) -> dict[int, np.ndarray]:
    """Per cluster, a (T, 4) series of (sqrt alpha, sqrt beta, sqrt lambda, w).

    With ``labels`` (a C* partition) the series are member averages of the
    per-observation atoms; otherwise they follow the trace's cluster ids,
    with NaN where a cluster is absent.
    """
    T = len(trace)
    out = {}
    if labels is not None:
        per_obs = trace.per_observation()
        for g in range(int(labels.max()) + 1):
            a = per_obs[:, labels == g, :]
            out[g] = np.concatenate([np.sqrt(a[..., :3]), a[..., 3:]], axis=2).mean(axis=1)
        return out
    kmax = max(a.shape[0] for a in trace.atoms)
    for k in range(kmax):
        s = np.full((T, 4), np.nan)
        for t, a in enumerate(trace.atoms):
            if k < a.shape[0]:
                s[t, :3] = np.sqrt(a[k, :3])
                s[t, 3] = a[k, 3]
        out[k] = s
    return out


def diagnose_cmd(trace_path, out_dir, partition_path=None, max_lag: int = 20) -> list:
    trace, ids = fio.read_trace_csv(trace_path)
    labels = None
    if partition_path is not None:
        p_ids, lab = fio.read_partition_csv(partition_path)
        labels = _aligned_labels(ids, p_ids, lab)
    series = _cluster_series(trace, labels)
    out = Path(out_dir)

    def long_rows():
        for t, it in enumerate(trace.iterations):
            yield [int(it), "", "nu", float(trace.nu[t])]
            yield [int(it), "", "n_star", int(trace.n_star[t])]
            for k, s in series.items():
                for p, name in enumerate(SERIES):
                    if not np.isnan(s[t, p]):
                        yield [int(it), k, name, float(s[t, p])]

    fio.write_csv(out / "trace_series.csv", ["iteration", "cluster", "series", "value"], long_rows())

    diags = [("", describe("nu", trace.nu, max_lag)),
             ("", describe("n_star", trace.n_star.astype(float), max_lag))]
    for k, s in series.items():
        for p, name in enumerate(SERIES):
            x = s[:, p]
            present = ~np.isnan(x)
            d = describe(name, x[present], max_lag) if present.sum() > 1 else None
            if d is None:
                continue
            if present.sum() < x.size:
                note = f"present in {int(present.sum())} of {x.size} samples"
                d = type(d)(**{**d.__dict__, "note": "; ".join(filter(None, [d.note, note]))})
            diags.append((k, d))
    header = ["series", "cluster", "length", "mean", "sd", "ess"] + [f"acf_{k}" for k in range(1, max_lag + 1)] + ["note"]

    def diag_rows():
        for k, d in diags:
            acf = list(d.acf) + [math.nan] * (max_lag - len(d.acf))
            yield [d.name, k, d.length, d.mean, d.sd, d.ess, *acf, d.note]

    fio.write_csv(out / "diagnostics.csv", header, diag_rows())
    return diags
