"""Compute oracle values once and freeze them to tests/data/oracles.json.

Run ``python3 tests/freeze_oracles.py`` to regenerate.  The tests only read
the frozen file, so a change to the package can never move its own goalposts.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

sys.path.insert(0, str(Path(__file__).parent))
import oracles  # noqa: E402

OUT = Path(__file__).parent / "data" / "oracles.json"
K_GRID = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]


def point_values(rng):
    rows = []
    for _ in range(200):
        a, b = np.exp(rng.uniform(np.log(0.05), np.log(20), 2))
        lam = np.exp(rng.uniform(np.log(0.1), np.log(10)))
        x = float(oracles.exponweib(a, b, lam).ppf(rng.uniform(0.02, 0.98)))
        rows.append({"x": x, "alpha": a, "beta": b, "lam": lam,
                     "pdf": float(oracles.pdf(x, a, b, lam)), "cdf": float(oracles.cdf(x, a, b, lam))})
    return rows


def random_atom(rng):
    a = float(np.exp(rng.uniform(np.log(0.2), np.log(8))))
    b = float(np.exp(rng.uniform(np.log(0.5), np.log(6))))
    lam = float(np.exp(rng.uniform(np.log(0.3), np.log(3))))
    w = float(rng.uniform(0.05, 0.95))
    return a, b, lam, w


def order_stat_values(rng):
    rows = []
    for _ in range(20):
        a, b, lam, w = random_atom(rng)
        n = int(rng.integers(2, 11))
        j = int(rng.integers(1, n + 1))
        rows.append({"alpha": a, "beta": b, "lam": lam, "w": w, "n": n, "j": j,
                     "expected": oracles.expected_order_stat(j, n, a, b, lam),
                     "oc": oracles.oc_value(a, b, lam, w, n)})
    return rows


def joint_masses():
    rows = []
    for (a, b, lam) in [(1.0, 1.0, 1.0), (0.6, 1.7, 0.4), (2.5, 3.3, 0.35)]:
        for n in range(1, 7):
            for l in range(1, min(n, 3) + 1):
                rows.append({"alpha": a, "beta": b, "lam": lam, "n": n, "l": l,
                             "mass": oracles.joint_mass(l, n, a, b, lam)})
    return rows


def partition_cases(rng):
    cases = []
    for c in range(50):
        N = int(rng.integers(2, 9))
        if c % 3 == 0:
            m = rng.uniform(0, 1, (N, N))
        elif c % 3 == 1:
            m = rng.beta(0.3, 0.3, (N, N))
        else:
            # co-membership from a random synthetic trace
            z = rng.integers(0, int(rng.integers(1, 4)), size=(40, N))
            m = (z[:, :, None] == z[:, None, :]).mean(axis=0)
        rho = np.triu(m, 1)
        rho = rho + rho.T + np.eye(N)
        cases.append({"rho": rho.tolist(), "best": [oracles.exhaustive_best(rho, K) for K in K_GRID]})
    return cases


def nu_case():
    N, k, tau1, tau2 = 275, 3, 5.0, 1.0
    edges = np.linspace(0.0, 3.0, 31)
    fine = np.linspace(1e-6, 3.0, 300001)
    logp = oracles.nu_posterior_grid(fine, N, k, tau1, tau2)
    p = np.exp(logp - logp.max())
    p /= trapezoid(p, fine)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(fine))])
    probs = np.diff(np.interp(edges, fine, cdf))
    return {"N": N, "k": k, "tau1": tau1, "tau2": tau2, "edges": edges.tolist(), "probs": probs.tolist(),
            "mean": float(trapezoid(fine * p, fine))}


def lambda_slice_case(rng):
    """Posterior of lambda for one member with (alpha, beta, w) fixed, on bins."""
    a, b, lam_true, w, n = 2.5, 3.3, 0.35, 0.75, 6
    x = np.sort(oracles.exponweib(a, b, lam_true).rvs(size=n, random_state=rng))[::-1]
    xs = [float(v) for v in x[:4]]
    shape, rate = 1.0, 0.1
    edges = np.linspace(0.05, 1.2, 47)
    fine = np.linspace(edges[0], edges[-1], 200001)
    lik = np.array([oracles.joint_density(xs, n, a, b, lam) for lam in fine[::100]])
    coarse = fine[::100]
    post = lik * stats.gamma.pdf(coarse, shape, scale=1.0 / rate)
    dens = np.interp(fine, coarse, post)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(fine))])
    cdf /= cdf[-1]
    probs = np.diff(np.interp(edges, fine, cdf))
    return {"alpha": a, "beta": b, "w": w, "n": n, "values": xs, "lambda_shape": shape, "lambda_rate": rate,
            "edges": edges.tolist(), "probs": probs.tolist()}


def main():
    rng = np.random.default_rng(20240601)
    frozen = {
        "points": point_values(rng),
        "order_stats": order_stat_values(rng),
        "joint_mass": joint_masses(),
        "partitions": partition_cases(rng),
        "nu": nu_case(),
        "lambda_slice": lambda_slice_case(rng),
        "crp": {"nu": 1.0, "N": 50, "expected": oracles.crp_expected_clusters(1.0, 50),
                "nu_large": 1e4, "N_small": 10, "expected_large": oracles.crp_expected_clusters(1e4, 10)},
    }
    OUT.parent.mkdir(exist_ok=True)
    OUT.write_text(json.dumps(frozen, indent=1) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
