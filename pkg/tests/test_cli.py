import csv
import json

import numpy as np
import pytest

from cutoffcontracts.cli import main


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path / "out")])


def write_config(tmp_path, payload):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload))
    return str(path)


def read_json(tmp_path, name):
    return json.loads((tmp_path / "out" / name).read_text())


def read_csv(tmp_path, name):
    with (tmp_path / "out" / name).open() as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_analyze_laplace(tmp_path):
    cfg = write_config(tmp_path, {"density": {"family": "laplace"}})
    assert run(tmp_path, "analyze", "--config", cfg) == 0
    header, rows = read_csv(tmp_path, "elasticity.csv")
    assert header == ["x", "phi", "eta"]
    xs = np.array([float(r[0]) for r in rows])
    etas = np.array([float(r[2]) for r in rows])
    inside = xs < 20.0
    np.testing.assert_allclose(etas[inside], xs[inside], atol=1e-9)
    summary = read_json(tmp_path, "analysis.json")
    assert summary["iea_holds"] is True
    assert summary["global_mlrp"] is True
    assert summary["eta_inverse_n"] == pytest.approx(1.0, abs=1e-6)


def test_solve_gaussian(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "density": {"family": "gaussian"},
            "cost": {"kind": "power", "a": 0.125, "p": 2.0},
        },
    )
    assert run(tmp_path, "solve", "--config", cfg, "--curve") == 0
    result = read_json(tmp_path, "solve.json")
    assert result["d_star"] == pytest.approx(0.7187, abs=1e-3)
    assert result["lambda_star"] == pytest.approx(1.3913, abs=1e-3)
    header, rows = read_csv(tmp_path, "cutoff_curve.csv")
    assert header == ["d", "lambda", "payoff", "product"]
    assert len(rows) >= 256


def test_solve_variant_gaussian_prior(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "density": {"family": "gaussian"},
            "variant": {"type": "gaussian_prior", "lambda0": 1.0},
        },
    )
    assert run(tmp_path, "solve", "--config", cfg) == 0
    result = read_json(tmp_path, "solve.json")
    assert result["posterior_precision"] * result["d_star"] == pytest.approx(1.0, abs=2e-3)


def test_solve_classic_pa_variant(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "cost": {"kind": "power", "a": 0.5, "p": 2.0},
            "variant": {
                "type": "classic_pa",
                "output_model": {"family": "exponential_mean_e"},
            },
        },
    )
    assert run(tmp_path, "solve", "--config", cfg) == 0
    result = read_json(tmp_path, "solve.json")
    assert result["e_star"] == pytest.approx(0.6065, abs=2e-3)


def test_infeasible_exit_code(tmp_path):
    cfg = write_config(
        tmp_path,
        {"cost": {"kind": "affine_power", "c0": 10.0, "a": 1e-9, "p": 2.0}},
    )
    assert run(tmp_path, "solve", "--config", cfg) == 2


def test_config_error_exit_code(tmp_path):
    cfg = write_config(tmp_path, {"density": {"family": "cauchy"}})
    assert run(tmp_path, "analyze", "--config", cfg) == 1
    cfg = write_config(tmp_path, {"density": {"family": "gaussian", "bogus": 1}})
    assert run(tmp_path, "analyze", "--config", cfg) == 1
    cfg = write_config(tmp_path, {"numerics": {"lambda_min": -1.0}})
    assert run(tmp_path, "analyze", "--config", cfg) == 1


def test_density_and_cost_overrides(tmp_path):
    cfg = write_config(tmp_path, {})
    code = run(
        tmp_path,
        "analyze",
        "--config",
        cfg,
        "--density",
        "truncated_exp_inverse:eps=0.1",
    )
    assert code == 0
    summary = read_json(tmp_path, "analysis.json")
    assert summary["family"] == "truncated_exp_inverse"
    assert summary["iea_holds"] is False
    assert summary["witness"] is not None


def test_sweep_artifacts(tmp_path):
    cfg = write_config(
        tmp_path,
        {"sweep": {"lambda_points": 8, "d_points": 8, "lambda_range": [0.5, 2.0], "d_range": [0.1, 2.0]}},
    )
    assert run(tmp_path, "sweep", "--config", cfg) == 0
    header, rows = read_csv(tmp_path, "sweep.csv")
    assert header == ["lambda", "d", "expected_transfer"]
    assert len(rows) == 64
    header, rows = read_csv(tmp_path, "boundary.csv")
    assert header == ["lambda", "d"]
    lam, d = (float(v) for v in rows[0])
    assert lam * d == pytest.approx(1.0, abs=1e-6)  # gaussian threshold


def test_compare_report(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "cost": {"kind": "power", "a": 0.125, "p": 2.0},
            "cost2": {"kind": "power", "a": 0.25, "p": 2.0},
        },
    )
    assert run(tmp_path, "compare", "--config", cfg) == 0
    report = read_json(tmp_path, "compare.json")
    assert report["hypothesis_holds"] is True
    assert report["d_ordering_holds"] is True
    assert report["lambda_ordering_holds"] is True


def test_compare_needs_cost2(tmp_path):
    cfg = write_config(tmp_path, {})
    assert run(tmp_path, "compare", "--config", cfg) == 1


def test_tabulated_density_csv(tmp_path):
    xs = np.linspace(-4, 4, 161)
    phis = np.exp(-0.5 * xs**2) / np.sqrt(2 * np.pi)
    csv_path = tmp_path / "density.csv"
    with csv_path.open("w") as fh:
        fh.write("x,phi\n")
        for x, p in zip(xs, phis):
            fh.write(f"{x},{p}\n")
    cfg = write_config(tmp_path, {"density": {"family": "tabulated", "csv": str(csv_path)}})
    assert run(tmp_path, "analyze", "--config", cfg) == 0
    summary = read_json(tmp_path, "analysis.json")
    assert summary["eta_inverse_n"] == pytest.approx(1.0, abs=5e-3)


def test_tabulated_cost_csv(tmp_path):
    lams = np.linspace(0.0, 4.0, 33)
    costs = 0.125 * lams**2
    csv_path = tmp_path / "cost.csv"
    with csv_path.open("w") as fh:
        fh.write("lambda,cost\n")
        for l, c in zip(lams, costs):
            fh.write(f"{l},{c}\n")
    cfg = write_config(
        tmp_path,
        {"density": {"family": "gaussian"}, "cost": {"kind": "tabulated", "csv": str(csv_path)}},
    )
    assert run(tmp_path, "solve", "--config", cfg) == 0
    result = read_json(tmp_path, "solve.json")
    # piecewise-linear samples of the quadratic cost reproduce its solution
    assert result["d_star"] == pytest.approx(0.7187, abs=5e-3)


def test_verify_small_and_deterministic(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "density": {"family": "gaussian"},
            "cost": {"kind": "power", "a": 0.125, "p": 2.0},
            "seed": 4,
            "verify": {"grid_cells": 4, "value_levels": 2, "pipeline_transfers": 2, "pipeline_cells": 16},
        },
    )
    assert run(tmp_path, "verify", "--config", cfg, "--dump-transfers") == 0
    first = (tmp_path / "out" / "verify.json").read_text()
    report = json.loads(first)
    assert report["certification"]["certified"] is True
    assert report["pipeline"]["min_guarantee_margin"] >= -1e-6
    assert (tmp_path / "out" / "pipeline_000.csv").exists()
    assert run(tmp_path, "verify", "--config", cfg, "--dump-transfers") == 0
    assert (tmp_path / "out" / "verify.json").read_text() == first


def test_refute_report(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "density": {"family": "truncated_exp_inverse", "eps": 0.1},
            "refute": {
                "lambda_ref": 1.0,
                "d_ref": 0.5,
                "x1": 0.2,
                "x2": 0.8,
                "kappa": 0.5,
                "grid_cells": 6,
                "value_levels": 2,
            },
        },
    )
    assert run(tmp_path, "refute", "--config", cfg) == 0
    report = read_json(tmp_path, "refute.json")
    assert report["counterexample_margin"] > 0


def test_csv_floats_have_12_significant_digits(tmp_path):
    cfg = write_config(tmp_path, {"density": {"family": "gaussian"}})
    assert run(tmp_path, "analyze", "--config", cfg) == 0
    _, rows = read_csv(tmp_path, "elasticity.csv")
    # spot check: mantissas carry at most 12 significant digits
    for val in (rows[1][0], rows[1][1], rows[500][2]):
        mantissa = val.split("e")[0].replace("-", "").replace(".", "").lstrip("0")
        assert 0 < len(mantissa) <= 12
