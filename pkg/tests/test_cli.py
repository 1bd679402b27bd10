import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from ewdpmm import io as fio
from ewdpmm.cli import main
from ewdpmm.orderstats import Sequence

FAST = {"mcmc.iterations": 60, "mcmc.burn_in": 10, "mcmc.thin": 5, "oc_draws": 2000,
        "mcmc.step_alpha": 0.05, "mcmc.step_beta": 0.05, "mcmc.step_lambda": 0.05, "mcmc.step_w": 0.01,
        "density.grid_points": 20}


def read_bytes(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "study1", "-N", "40", "-n", "8", "--seed", "7", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def fitted(sim, tmp_path_factory):
    root = tmp_path_factory.mktemp("fit")
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps(FAST))
    out = root / "out"
    assert main(["fit", str(sim / "data.csv"), "--config", str(cfg), "--out", str(out)]) == 0
    return root, cfg, out


def test_simulate_study1_proportions(tmp_path):
    main(["simulate", "study1", "-N", "500", "-n", "20", "--seed", "7", "--out", str(tmp_path)])
    rows = (tmp_path / "truth.csv").read_text().splitlines()[1:]
    comp = np.array([int(r.split(",")[1]) for r in rows])
    assert comp.size == 500
    for k, w in enumerate((0.4, 0.35, 0.25)):
        assert abs(np.mean(comp == k) - w) < 3 * np.sqrt(w * (1 - w) / 500)
    ds = fio.ingest_csv(tmp_path / "data.csv")
    assert len(ds.sequences) == 500 and ds.n == 20


def test_simulate_study2_gamma_mean(tmp_path):
    main(["simulate", "study2", "-N", "2000", "-n", "20", "--seed", "3", "--out", str(tmp_path)])
    ds = fio.ingest_csv(tmp_path / "data.csv")
    comp = np.array([int(r.split(",")[1]) for r in (tmp_path / "truth.csv").read_text().splitlines()[1:]])
    vals = np.concatenate([ds.sequences[i].array for i in np.flatnonzero(comp == 2)])
    # top order statistics of Gamma(32, 10) sit a little above the mean 3.2
    assert 3.0 < np.median(vals) < 4.0


def test_simulate_round_trip_and_determinism(sim, tmp_path):
    main(["simulate", "study1", "-N", "40", "-n", "8", "--seed", "7", "--out", str(tmp_path)])
    assert read_bytes(tmp_path) == read_bytes(sim)
    ds = fio.ingest_csv(sim / "data.csv")
    truth = [r.split(",") for r in (sim / "truth.csv").read_text().splitlines()[1:]]
    assert [s.l for s in ds.sequences] == [int(t[-1]) for t in truth]
    assert all(isinstance(s, Sequence) for s in ds.sequences)


def test_simulate_custom(tmp_path):
    mix = tmp_path / "atoms.json"
    mix.write_text(json.dumps({"kernel": "ew", "atoms": [[1, 1, 1, 0.5], [3, 3, 3, 0.5]], "weights": [0.5, 0.5]}))
    assert main(["simulate", "custom", "--atoms", str(mix), "-N", "10", "-n", "4", "--out", str(tmp_path / "o")]) == 0
    assert main(["simulate", "custom", "-N", "10", "--out", str(tmp_path / "o2")]) == 2


def test_emit_default_config_matches_shipped(capsys):
    from importlib.resources import files
    assert main(["fit", "--emit-default-config"]) == 0
    assert capsys.readouterr().out == (files("ewdpmm") / "configs" / "default.json").read_text()


def test_fit_outputs_and_schema(fitted):
    _, _, out = fitted
    names = {p.name for p in out.iterdir()}
    assert {"trace.csv", "coincidence.csv", "partition.csv", "summary.json",
            "density_grid_pooled.csv", "density_grid_length.csv", "density_grid_order_8.csv"} <= names
    from importlib.resources import files
    schema = json.loads((files("ewdpmm") / "schema" / "summary.schema.json").read_text())
    summary = json.loads((out / "summary.json").read_text())
    jsonschema.validate(summary, schema)
    assert summary["config"]["mcmc.iterations"] == 60
    assert summary["chain"]["retained"] == 10


def test_fit_rerun_byte_identical(sim, fitted, tmp_path):
    _, cfg, out = fitted
    main(["fit", str(sim / "data.csv"), "--config", str(cfg), "--out", str(tmp_path)])
    assert read_bytes(tmp_path) == read_bytes(out)


def test_partition_diagnose_ppcheck(sim, fitted, tmp_path):
    _, cfg, out = fitted
    assert main(["partition", str(out / "trace.csv"), "--config", str(cfg), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "partition.csv").read_bytes() == (out / "partition.csv").read_bytes()
    assert main(["diagnose", str(out / "trace.csv"), "--out", str(tmp_path / "d")]) == 0
    assert main(["diagnose", str(out / "trace.csv"), "--partition", str(out / "partition.csv"),
                 "--out", str(tmp_path / "d2")]) == 0
    header = (tmp_path / "d" / "diagnostics.csv").read_text().splitlines()[0]
    assert header.startswith("series,cluster,length,mean,sd,ess,acf_1")
    series = (tmp_path / "d2" / "trace_series.csv").read_text()
    assert "sqrt_alpha" in series and "n_star" in series
    args = ["pp-check", str(out / "trace.csv"), str(out / "partition.csv"), str(sim / "data.csv"),
            "--config", str(cfg), "--out"]
    assert main(args + [str(tmp_path / "pp1")]) == 0
    assert main(args + [str(tmp_path / "pp2")]) == 0
    assert read_bytes(tmp_path / "pp1") == read_bytes(tmp_path / "pp2")
    d1 = tmp_path / "d3"
    main(["diagnose", str(out / "trace.csv"), "--out", str(d1)])
    assert read_bytes(d1) == read_bytes(tmp_path / "d")


def test_errors_are_reported(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("p1,0.5,0.5,0\n")
    assert main(["fit", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "tied" in capsys.readouterr().err
    assert main(["diagnose", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "ewdpmm.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "pp-check" in r.stdout
