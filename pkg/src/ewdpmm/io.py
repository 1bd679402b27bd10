"""File formats: data CSV ingestion, run configuration, trace/partition/matrix CSVs.

Column orders are documented in FORMATS.md.  Floats are written with
``repr`` so files round-trip exactly and reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dpmm import Hyperparams, MCMCConfig, Trace
from .orderstats import Sequence

log = logging.getLogger(__name__)


class DataError(ValueError):
    """Malformed or invalid input data; the message lists every offending row."""


# --- atomic writes ----------------------------------------------------------

def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows, comments=()) -> None:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    atomic_write_text(path, buf.getvalue())


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _read_rows(path):
    """Yield ``(line_number, cells)`` skipping blank lines and ``#`` comments."""
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            yield lineno, next(csv.reader([s]))


# --- dataset ----------------------------------------------------------------

@dataclass
class Dataset:
    n: int
    ids: list[str]
    sequences: list[Sequence]

    @property
    def rows(self) -> list[tuple[str, Sequence]]:
        return list(zip(self.ids, self.sequences))

    def matrix(self) -> np.ndarray:
        out = np.zeros((len(self.sequences), self.n))
        for r, s in enumerate(self.sequences):
            out[r, : s.l] = s.values
        return out


def ingest_csv(path, n: int | None = None, skip_invalid: bool = False) -> Dataset:
    """Read ``id,x_1,...,x_n`` rows; zeros are censored entries.

    Each row is sorted in decreasing order, ``l`` is its count of non-zeros.
    Rows with no non-zero entry, repeated non-zero values, negative or
    malformed numbers, or the wrong width are errors.  With ``skip_invalid``
    they are dropped with a warning instead.
    """
    problems: list[str] = []
    ids: list[str] = []
    seqs: list[Sequence] = []
    first = True
    for lineno, cells in _read_rows(path):
        if first:
            first = False
            if cells and cells[0].strip().lower() == "id":
                if n is None:
                    n = len(cells) - 1
                continue
        rid = cells[0].strip() if cells else ""
        where = f"line {lineno} (id {rid!r})"
        if n is None:
            n = len(cells) - 1
        if len(cells) - 1 != n:
            problems.append(f"{where}: expected {n} values, found {len(cells) - 1}")
            continue
        try:
            vals = [float(c) for c in cells[1:]]
        except ValueError as exc:
            problems.append(f"{where}: malformed number ({exc})")
            continue
        if any(not math.isfinite(v) or v < 0 for v in vals):
            problems.append(f"{where}: values must be finite and non-negative")
            continue
        nz = sorted((v for v in vals if v > 0), reverse=True)
        if not nz:
            problems.append(f"{where}: all entries censored; at least one observed value is required")
            continue
        if any(a == b for a, b in zip(nz, nz[1:])):
            problems.append(f"{where}: tied observed values {nz}")
            continue
        ids.append(rid)
        seqs.append(Sequence(n, tuple(nz)))
    if n is None or n < 1:
        raise DataError(f"{path}: no data rows")
    if problems:
        if not skip_invalid:
            raise DataError(f"{path}: {len(problems)} invalid row(s):\n  " + "\n  ".join(problems))
        for p in problems:
            log.warning("skipping %s", p)
    if not seqs:
        raise DataError(f"{path}: no valid rows")
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate row ids")
    return Dataset(n, ids, seqs)


def write_data_csv(path, ids, matrix) -> None:
    n = matrix.shape[1]
    write_csv(path, ["id"] + [f"x{j + 1}" for j in range(n)],
              ([i] + [float(v) for v in row] for i, row in zip(ids, matrix)))


# --- configuration ----------------------------------------------------------

PRIOR_KEYS = ("a", "b", "alpha1", "alpha2", "beta1", "beta2", "lambda1", "lambda2", "tau1", "tau2")

DEFAULT_CONFIG: dict = {
    "preset": "vague",
    **{f"priors.{k}": float(getattr(Hyperparams.vague(), k)) for k in PRIOR_KEYS},
    "mcmc.iterations": 10000,
    "mcmc.burn_in": 200,
    "mcmc.thin": 10,
    "mcmc.aux_count": 3,
    "mcmc.mh_inner": 20,
    "mcmc.init_clusters": 10,
    "mcmc.step_alpha": 0.3,
    "mcmc.step_beta": 0.3,
    "mcmc.step_lambda": 0.3,
    "mcmc.step_w": 0.05,
    "seed": 1,
    "n": None,
    "epsilon": 0.05,
    "oc_draws": 100000,
    "k_grid": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
    "partition.restarts": 10,
    "pp.reps": 1,
    "density.targets": ["pooled", "length", "top"],
    "density.grid_points": 200,
}

PRESETS = {
    "vague": {},
    "retail": {"preset": "retail",
               **{f"priors.{k}": float(getattr(Hyperparams.retail(), k)) for k in PRIOR_KEYS}},
}


def default_config(preset: str = "vague") -> dict:
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    cfg = dict(DEFAULT_CONFIG)
    cfg.update(PRESETS[preset])
    return cfg


def dump_config(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"


def load_config(path=None, overrides: dict | None = None, preset: str | None = None) -> dict:
    """Defaults, then the preset (argument, else the file's ``preset`` key), then the file's keys, then ``overrides``."""
    user = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
        if not isinstance(user, dict):
            raise ValueError(f"{path}: config must be a JSON object")
    preset = preset or user.get("preset", "vague")
    cfg = default_config(preset)
    unknown = sorted(set(user) - set(cfg))
    if unknown:
        raise ValueError(f"unknown config keys: {unknown}")
    cfg.update(user)
    cfg["preset"] = preset
    cfg.update(overrides or {})
    hyperparams(cfg)
    mcmc_config(cfg)
    return cfg


def hyperparams(cfg: dict) -> Hyperparams:
    return Hyperparams(**{k: float(cfg[f"priors.{k}"]) for k in PRIOR_KEYS})


def mcmc_config(cfg: dict) -> MCMCConfig:
    return MCMCConfig(
        iterations=int(cfg["mcmc.iterations"]),
        burn_in=int(cfg["mcmc.burn_in"]),
        thin=int(cfg["mcmc.thin"]),
        aux_count=int(cfg["mcmc.aux_count"]),
        mh_inner=int(cfg["mcmc.mh_inner"]),
        step_sizes=tuple(float(cfg[f"mcmc.step_{p}"]) for p in ("alpha", "beta", "lambda", "w")),
        init_clusters=int(cfg["mcmc.init_clusters"]),
        seed=int(cfg["seed"]),
    )


# --- trace and matrices -----------------------------------------------------

TRACE_HEADER = ["iteration", "obs_id", "cluster", "alpha", "beta", "lambda", "w", "nu", "n_star"]


def write_trace_csv(path, trace: Trace, ids) -> None:
    def rows():
        for it, z, atoms, nu in zip(trace.iterations, trace.assignments, trace.atoms, trace.nu):
            k = atoms.shape[0]
            for oid, c in zip(ids, z):
                a = atoms[c]
                yield [int(it), oid, int(c), a[0], a[1], a[2], a[3], float(nu), k]
    write_csv(path, TRACE_HEADER, rows())


def read_trace_csv(path) -> tuple[Trace, list[str]]:
    """Inverse of :func:`write_trace_csv` (acceptance rates are not stored in the file)."""
    rows = list(_read_rows(path))
    if not rows or rows[0][1] != TRACE_HEADER:
        raise DataError(f"{path}: line {rows[0][0] if rows else 1}: expected header {','.join(TRACE_HEADER)}")
    iters: list[int] = []
    z_all, atoms_all, nu_all = [], [], []
    ids: list[str] | None = None
    cur_ids: list[str] = []
    cur_z: list[int] = []
    cur_atoms: dict[int, tuple] = {}
    cur_it = None
    cur_nu = None

    def flush():
        nonlocal ids
        if cur_it is None:
            return
        if ids is None:
            ids = list(cur_ids)
        elif cur_ids != ids:
            raise DataError(f"{path}: iteration {cur_it} lists observations in a different order")
        k = max(cur_atoms) + 1
        if sorted(cur_atoms) != list(range(k)):
            raise DataError(f"{path}: iteration {cur_it} has non-contiguous cluster ids")
        iters.append(cur_it)
        z_all.append(cur_z.copy())
        atoms_all.append(np.array([cur_atoms[c] for c in range(k)]))
        nu_all.append(cur_nu)

    for lineno, cells in rows[1:]:
        if len(cells) != len(TRACE_HEADER):
            raise DataError(f"{path}: line {lineno}: expected {len(TRACE_HEADER)} columns")
        try:
            it, oid, c = int(cells[0]), cells[1], int(cells[2])
            atom = tuple(float(v) for v in cells[3:7])
            nu = float(cells[7])
        except ValueError as exc:
            raise DataError(f"{path}: line {lineno}: {exc}") from None
        if it != cur_it:
            flush()
            cur_it, cur_nu = it, nu
            cur_ids, cur_z, cur_atoms = [], [], {}
        cur_ids.append(oid)
        cur_z.append(c)
        prev = cur_atoms.setdefault(c, atom)
        if prev != atom:
            raise DataError(f"{path}: line {lineno}: cluster {c} has two different atoms in iteration {it}")
    flush()
    if not iters:
        raise DataError(f"{path}: no trace rows")
    trace = Trace(np.array(iters, dtype=np.int64), np.array(z_all, dtype=np.int64), atoms_all, np.array(nu_all))
    return trace, ids


def write_matrix_csv(path, ids, mat) -> None:
    write_csv(path, ["id"] + list(ids), ([i] + [float(v) for v in row] for i, row in zip(ids, mat)))


def write_partition_csv(path, ids, labels, K_star: float, score: float) -> None:
    write_csv(path, ["id", "cluster"], ([i, int(c)] for i, c in zip(ids, labels)),
              comments=[f"K_star={K_star!r} score={score!r}"])


def read_partition_csv(path) -> tuple[list[str], np.ndarray]:
    rows = list(_read_rows(path))
    if not rows or rows[0][1] != ["id", "cluster"]:
        raise DataError(f"{path}: expected header id,cluster")
    ids, labels = [], []
    for lineno, cells in rows[1:]:
        try:
            ids.append(cells[0])
            labels.append(int(cells[1]))
        except (ValueError, IndexError):
            raise DataError(f"{path}: line {lineno}: malformed row") from None
    return ids, np.array(labels, dtype=np.int64)
