import json

import numpy as np
import pytest

from multistable import __version__, fileio, models
from multistable.cli import EXIT_SOLVER, EXIT_USAGE, main
from multistable.lindblad import save_model

from conftest import td


@pytest.fixture
def balanced(tmp_path):
    path = tmp_path / "balanced.json"
    save_model(models.two_qubit_balanced(), path)
    return path


def write_state(path, rho):
    fileio.write_matrix(rho, path)
    return path


def test_hermitian_returns_singlet(tmp_path, balanced, capsys):
    rho0 = write_state(tmp_path / "phi.json", models.projector(models.PHI_MINUS))
    out = tmp_path / "ss.json"
    assert main(["solve", "--model", str(balanced), "--rho0", str(rho0), "--hermitian", "-o", str(out)]) == 0
    assert td(fileio.read_matrix(out), models.projector(models.PHI_MINUS)) < 1e-12
    line = capsys.readouterr().out
    assert "method=hermitian" in line and "n=2" in line and "residual=" in line


def test_resolvent_vs_hermitian(tmp_path, balanced, rng):
    from conftest import ginibre
    phi = write_state(tmp_path / "phi.json", models.projector(models.PHI_MINUS))
    rnd = write_state(tmp_path / "r.json", ginibre(rng, 4))
    # the resolvent bias is first order in epsilon, so a random start is compared at 1e-6
    for rho0, eps, tol in ((phi, "1e-4", 1e-5), (rnd, "1e-6", 1e-6)):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["solve", "--model", str(balanced), "--rho0", str(rho0), "--resolvent", "--epsilon", eps,
                     "-o", str(a)]) == 0
        assert main(["solve", "--model", str(balanced), "--rho0", str(rho0), "--hermitian", "-o", str(b)]) == 0
        assert td(fileio.read_matrix(a), fileio.read_matrix(b)) <= tol


def test_solve_output_roundtrip_bitwise(tmp_path, rng):
    from conftest import ginibre
    rho0 = write_state(tmp_path / "r.json", ginibre(rng, 4))
    out = tmp_path / "ss.json"
    assert main(["solve", "--builtin", "two_qubit_driven", "--rho0", str(rho0), "-o", str(out)]) == 0
    first = fileio.read_matrix(out)
    fileio.write_matrix(first, tmp_path / "again.json")
    assert np.array_equal(fileio.read_matrix(tmp_path / "again.json"), first)
    assert json.loads(out.read_text())["schema_version"] == 1


def test_malformed_json_exit_2(tmp_path, balanced, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    out = tmp_path / "ss.json"
    assert main(["solve", "--model", str(balanced), "--rho0", str(bad), "-o", str(out)]) == EXIT_USAGE
    assert not out.exists()
    assert main(["solve", "--model", str(bad), "--rho0", str(bad), "-o", str(out)]) == EXIT_USAGE
    assert not out.exists()
    assert "error" in capsys.readouterr().err


def test_usage_errors(tmp_path, balanced):
    rho0 = write_state(tmp_path / "r.json", np.eye(2) / 2)
    assert main(["solve", "--model", str(balanced), "--rho0", str(rho0)]) == EXIT_USAGE
    assert main(["solve", "--model", str(balanced), "--rho0", str(rho0), "--kernel", "--hermitian"]) == EXIT_USAGE
    assert main(["kernel", "--builtin", "two_qubit_decay", "--frobnicate"]) == EXIT_USAGE
    assert main(["kernel", "--builtin", "two_ensemble_decay", "--N", "5"]) == EXIT_USAGE
    assert main(["solve", "--model", str(tmp_path / "missing.json"), "--rho0", str(rho0)]) == EXIT_USAGE


def test_solver_failures_exit_3(tmp_path):
    rho0 = write_state(tmp_path / "r.json", np.eye(4) / 4)
    out = tmp_path / "ss.json"
    for flag in ("--spectral", "--hermitian"):
        assert main(["solve", "--builtin", "two_qubit_decay", "--rho0", str(rho0), flag, "-o", str(out)]) \
            == EXIT_SOLVER
    assert not out.exists()


@pytest.mark.parametrize("args,n", [(["--builtin", "two_qubit_decay"], 4),
                                    (["--builtin", "two_qubit_balanced"], 2),
                                    (["--builtin", "two_ensemble_balanced", "--N", "4"], 3)])
def test_kernel_dimensions(tmp_path, capsys, args, n):
    out = tmp_path / "k.json"
    assert main(["kernel", *args, "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["n"] == n and len(doc["right"]) == n and len(doc["left"]) == n
    assert doc["biorthogonality_residual"] <= 1e-10
    assert f"n={n}" in capsys.readouterr().out


def test_dump_model_roundtrip(tmp_path):
    dumped = tmp_path / "m.json"
    assert main(["kernel", "--builtin", "two_qubit_driven", "--dump-model", str(dumped),
                 "-o", str(tmp_path / "k1.json")]) == 0
    assert main(["kernel", "--model", str(dumped), "-o", str(tmp_path / "k2.json")]) == 0
    k1, k2 = (json.loads((tmp_path / f).read_text()) for f in ("k1.json", "k2.json"))
    assert k1["n"] == k2["n"] == 2


def test_scenario_balanced_rows(tmp_path, capsys):
    assert main(["scenario", "two_qubit_balanced", "--samples", "300", "--seed", "7", "--out", str(tmp_path)]) == 0
    assert len(fileio.read_csv(tmp_path / "two_qubit_balanced_7.csv")) == 300
    assert "PASS" in capsys.readouterr().out


def test_scenario_protocol(tmp_path):
    assert main(["scenario", "balanced_protocol", "--N", "4", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "balanced_protocol_7.json").read_text())
    assert doc["summary"]["F_pro"] == pytest.approx(8.0, rel=1e-12)


def test_scenario_imbalanced_support(tmp_path):
    assert main(["scenario", "two_ensemble_decay", "--N", "20", "--eta", "4", "--out", str(tmp_path)]) == 0
    rows = fileio.read_csv(tmp_path / "two_ensemble_decay_7.csv")
    support = [int(r["S"]) for r in rows if float(r["p_S"]) > 1e-14]
    assert min(support) == 4


def test_unknown_scenario(tmp_path, capsys):
    assert main(["scenario", "nope", "--out", str(tmp_path)]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "two_qubit_balanced" in err and "balanced_protocol" in err


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(fileio.OUTPUT_ENV, str(tmp_path))
    assert main(["sample", "--dim", "3", "--seed", "2", "--count", "2"]) == 0
    a, b = (fileio.read_matrix(tmp_path / f"sample_2_{i}.json") for i in (0, 1))
    assert a.shape == (3, 3) and not np.array_equal(a, b)


def test_bench_single_row(tmp_path, capsys):
    rc = main(["bench", "--N", "4", "--repeats", "1", "--gamma-t", "20", "40", "--out", str(tmp_path)])
    assert rc == 0
    rows = fileio.read_csv(tmp_path / "benchmark_0.csv")
    assert all(float(r["error"]) <= 1e-5 for r in rows)


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out
