import json
import subprocess
import sys

import pytest

from nonlocal_eig.cli import main

PROBLEM = {"dimension": 1, "profile": {"shape": "epanechnikov", "mass": 1.0},
           "map": {"kind": "linear", "matrix": [[2.0]]}}


def write_config(tmp_path, **sections):
    cfg = {"problem": PROBLEM}
    cfg.update(sections)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def run(tmp_path, task, cfg, *extra, name="out"):
    out = tmp_path / name
    code = main([task, "--config", cfg, "--output", str(out), *extra])
    return code, out


def test_eigen_json(tmp_path):
    cfg = write_config(tmp_path, eigen={"radius": 16, "spacing": 0.05})
    code, out = run(tmp_path, "eigen", cfg)
    assert code == 0
    data = json.loads(out.read_text())
    for key in ("lambda1", "lambda_T", "residual", "psi_mass", "bounds"):
        assert key in data
    assert data["lambda1"] == pytest.approx(2 * data["lambda_T"])
    assert data["bounds"]["exact_linear"] == pytest.approx(0.171573, abs=1e-6)
    assert 0.1716 <= data["lambda1"] <= 0.409911


def test_bounds_json(tmp_path):
    cfg = write_config(tmp_path, bounds={"radius": 20, "delta": 2})
    code, out = run(tmp_path, "bounds", cfg)
    data = json.loads(out.read_text())
    assert code == 0 and data["exact_linear"] is not None
    assert data["lower"] <= data["exact_linear"] <= data["upper_sup"]
    assert data["finite_radius"]["C"] == 4.0


def test_sweep_csv_and_jobs(tmp_path):
    cfg = write_config(tmp_path, sweep={"radii": [2, 4, 8], "spacing": {"rule": "fraction", "divisor": 40}})
    code, out = run(tmp_path, "sweep", cfg, "--format", "csv", "--jobs", "2")
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "R,h,lambda1,lambda_T,iterations,residual,converged"
    assert len(lines) == 4


def test_witness_determinism(tmp_path):
    cfg = write_config(tmp_path, witness={"family": "expansive_geometric", "params": {"sigma": 1.0},
                                          "samples": 20000})
    c1, o1 = run(tmp_path, "witness", cfg, "--seed", "3", name="a.json")
    c2, o2 = run(tmp_path, "witness", cfg, "--seed", "3", name="b.json")
    assert c1 == c2 == 0
    assert o1.read_bytes() == o2.read_bytes()
    data = json.loads(o1.read_text())
    assert data["seed"] == 3 and data["samples"] == 20000


def test_witness_shear_needs_no_linear_dimension_one(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"problem": {"dimension": 2, "map": {"kind": "linear", "matrix": [[1, 1], [0, 1]]}},
                               "witness": {"family": "jordan_shear", "params": {"k": 5}, "samples": 6000}}))
    code, out = run(tmp_path, "witness", str(cfg))
    assert code == 0
    assert json.loads(out.read_text())["analytic_ratio"] == pytest.approx(5 / 6)


def test_evolve_csv(tmp_path):
    cfg = write_config(tmp_path, evolve={"radius": 4, "spacing": 0.1, "T_end": 3.0})
    code, out = run(tmp_path, "evolve", cfg, "--format", "csv")
    assert code == 0
    assert out.read_text().splitlines()[0] == "t,l2sq"


def test_invalid_tol_leaves_no_output(tmp_path):
    cfg = write_config(tmp_path, eigen={"radius": 4, "spacing": 0.1, "tol": -1})
    code, out = run(tmp_path, "eigen", cfg)
    assert code == 2 and not out.exists()
    code, out = run(tmp_path, "eigen", write_config(tmp_path, eigen={"radius": 4, "spacing": 0.1}), "--tol", "-1")
    assert code == 2 and not out.exists()


@pytest.mark.parametrize("bad", [
    "not json",
    json.dumps({"problem": {"dimension": 4, "map": {"kind": "linear", "matrix": [[1.0]]}}}),
    json.dumps({"problem": {"dimension": 1, "map": {"kind": "linear", "matrix": [[0.0]]}}}),
    json.dumps({"problem": PROBLEM, "sweep": {"radii": [4, 2], "spacing": 0.1}}),
])
def test_validation_errors(tmp_path, bad):
    cfg = tmp_path / "bad.json"
    cfg.write_text(bad)
    task = "sweep" if "sweep" in bad else "eigen"
    code, out = run(tmp_path, task, str(cfg))
    assert code == 2 and not out.exists()


def test_missing_config_file(tmp_path):
    assert main(["eigen", "--config", str(tmp_path / "nope.json")]) == 2


def test_nonconvergence_exit_code(tmp_path):
    cfg = write_config(tmp_path, eigen={"radius": 8, "spacing": 0.05, "maxiter": 1, "tol": 1e-30})
    code, out = run(tmp_path, "eigen", cfg)
    assert code == 3 and not out.exists()


def test_entry_point_subprocess(tmp_path):
    cfg = write_config(tmp_path, bounds={})
    proc = subprocess.run([sys.executable, "-m", "nonlocal_eig.cli", "bounds", "--config", cfg],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["upper_sup"] == pytest.approx(3.0)
