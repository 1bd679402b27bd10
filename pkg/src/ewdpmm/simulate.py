"""Synthetic mixtures of censored order-statistics sequences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .orderstats import Sequence, sample_lengths, sample_padded
from .rng import as_generator

STUDY1_ATOMS = ((0.15, 0.8, 0.91, 0.65), (2.5, 3.3, 0.35, 0.75), (0.64, 1.7, 0.4, 0.9))
STUDY2_ATOMS = ((0.15, 0.5, 0.65), (1.7, 1.0, 0.75), (32.0, 10.0, 0.9))
STUDY_WEIGHTS = (0.4, 0.35, 0.25)


@dataclass(frozen=True)
class Study:
    """A finite mixture; ``kernel`` is ``"ew"`` (alpha, beta, lam, w) or ``"gamma"`` (shape, rate, w)."""

    kernel: str
    atoms: tuple[tuple[float, ...], ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if self.kernel not in ("ew", "gamma"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        width = 4 if self.kernel == "ew" else 3
        if len(self.atoms) != len(self.weights) or not self.atoms:
            raise ValueError("atoms and weights must be non-empty and of equal length")
        if any(len(a) != width for a in self.atoms):
            raise ValueError(f"{self.kernel} atoms need {width} values each")
        if any(w < 0 for w in self.weights) or not np.isclose(sum(self.weights), 1.0):
            raise ValueError("weights must be non-negative and sum to 1")

    @property
    def param_names(self) -> tuple[str, ...]:
        return ("alpha", "beta", "lambda", "w") if self.kernel == "ew" else ("shape", "rate", "w")


STUDY1 = Study("ew", STUDY1_ATOMS, STUDY_WEIGHTS)
STUDY2 = Study("gamma", STUDY2_ATOMS, STUDY_WEIGHTS)
STUDIES = {"study1": STUDY1, "study2": STUDY2}


@dataclass
class SimulatedData:
    study: Study
    n: int
    components: np.ndarray
    matrix: np.ndarray  # (N, n), decreasing, censored entries 0
    lengths: np.ndarray

    def sequences(self) -> list[Sequence]:
        return [Sequence(self.n, tuple(row[:l])) for row, l in zip(self.matrix, self.lengths)]


def simulate_study(study: Study, N: int, n: int, rng) -> SimulatedData:
    """Draw a component per observation, then a censored sequence from it."""
    rng = as_generator(rng)
    comp = rng.choice(len(study.weights), size=N, p=np.asarray(study.weights))
    atoms = np.asarray(study.atoms, dtype=float)[comp]
    if study.kernel == "ew":
        matrix, lengths = sample_padded(rng, atoms, n)
    else:
        lengths = sample_lengths(rng, atoms[:, 2], n, N)
        x = rng.gamma(atoms[:, :1], 1.0 / atoms[:, 1:2], size=(N, n))
        matrix = -np.sort(-x, axis=1)
        matrix[np.arange(n)[None, :] >= lengths[:, None]] = 0.0
    return SimulatedData(study, n, comp, matrix, lengths)
