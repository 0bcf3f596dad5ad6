import os

import numpy as np
import pytest

from gradflow.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    ConfigError,
    RunConfig,
    load_config,
    main,
    resolve_config_path,
)

import oracles


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    out = tmp_path / "out"
    monkeypatch.setenv("GRADFLOW_OUT", str(out))
    return out


def _write_cfg(tmp_path, text, name="test.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


SMALL_ACCURACY = """
[grid]
nx = 8
ny = 8

[scheme]
kind = iec
aux = softplus

[run]
dts = 0.1 0.05
t_end = 0.5
forcing = analytic

[output]
label = smoke
"""


def test_validate_subcommand_passes():
    assert main(["validate"]) == EXIT_OK


def test_accuracy_subcommand(tmp_path, outdir, capsys):
    cfg = _write_cfg(tmp_path, SMALL_ACCURACY)
    assert main(["accuracy", "--config", cfg]) == EXIT_OK
    csv = outdir / "accuracy_iec_softplus_smoke" / "accuracy.csv"
    assert csv.exists()
    lines = csv.read_text().splitlines()
    assert lines[0] == "scheme,aux,alpha,L,flow,dt,l2_error,order"
    assert len(lines) == 3
    assert "l2_error" in capsys.readouterr().out or True


def test_accuracy_determinism(tmp_path, outdir):
    cfg = _write_cfg(tmp_path, SMALL_ACCURACY)
    assert main(["accuracy", "--config", cfg]) == EXIT_OK
    first = (outdir / "accuracy_iec_softplus_smoke" / "accuracy.csv").read_bytes()
    assert main(["accuracy", "--config", cfg, "--jobs", "2"]) == EXIT_OK
    second = (outdir / "accuracy_iec_softplus_smoke" / "accuracy.csv").read_bytes()
    assert first == second


def test_energy_subcommand(tmp_path, outdir):
    cfg = _write_cfg(
        tmp_path,
        """
[grid]
nx = 8
ny = 8

[scheme]
kind = ief
aux = monomial:k=1

[run]
dt = 0.05
t_end = 0.5
ic = sincos

[output]
label = e
""",
    )
    assert main(["energy", "--config", cfg]) == EXIT_OK
    csv = outdir / "energy_ief_monomial_k1_e" / "energy.csv"
    assert csv.exists()
    rows = csv.read_text().splitlines()
    assert rows[0].startswith("step,time,energy_modified")
    assert len(rows) == 12  # header + steps 0..10


def test_energy_gap_subcommand(tmp_path, outdir):
    cfg = _write_cfg(
        tmp_path,
        """
[grid]
nx = 8
ny = 8

[scheme]
kind = iec
aux = softplus

[run]
dts = 0.1 0.05
t_end = 0.5
ic = sincos

[output]
label = g
""",
    )
    assert main(["energy-gap", "--config", cfg]) == EXIT_OK
    assert (outdir / "energy-gap_iec_softplus_g" / "gap.csv").exists()


def test_coarsen_subcommand(tmp_path, outdir):
    cfg = _write_cfg(
        tmp_path,
        """
[grid]
nx = 16
ny = 16

[model]
flow = cahn-hilliard

[scheme]
kind = iec
aux = softplus

[run]
ic = two_circle
dt = 0.01
t_end = 0.1
snapshot_every = 0.05

[output]
label = c
""",
    )
    assert main(["coarsen", "--config", cfg]) == EXIT_OK
    run_dir = outdir / "coarsen_iec_softplus_c"
    assert (run_dir / "energy.csv").exists()
    assert (run_dir / "components.csv").exists()
    assert (run_dir / "c_t0.05.snap").exists()
    assert (run_dir / "c_t0.10.snap").exists()


def test_step_debug_matches_dense_oracle(outdir):
    assert main(["step-debug", "--grid", "4", "--scheme", "iec", "--aux", "quadratic",
                 "--alpha", "1.0", "--dt", "0.1", "--label", "dbg"]) == EXIT_OK
    run_dir = outdir / "step-debug_iec_quadratic_dbg"
    mat = np.loadtxt(run_dir / "matrix.txt")
    rhs = np.loadtxt(run_dir / "rhs.txt")
    sol = np.loadtxt(run_dir / "solution.txt")

    hx = 2.0 * np.pi / 4.0
    x = np.arange(4) * hx
    phi0 = np.tile(np.sin(x), 4)
    r0 = np.sqrt(oracles.double_well(phi0) + 1.0)
    phi_o, mu_o, r_o = oracles.dense_iec_step(
        phi0, r0, "allen-cahn", 0.6, 0.4, 0.1, 1.0, 2.0, 1.0, "quadratic"
    )
    expected = np.linalg.solve(mat, rhs)
    assert np.max(np.abs(sol - expected)) < 1e-10
    assert np.max(np.abs(sol - np.concatenate([phi_o, mu_o, r_o]))) < 1e-10


def test_alpha_below_half_rejected(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, SMALL_ACCURACY)
    code = main(["accuracy", "--config", cfg, "--alpha", "0.4"])
    assert code == EXIT_CONFIG
    assert "stability" in capsys.readouterr().err


def test_unknown_aux_rejected(tmp_path):
    cfg = _write_cfg(tmp_path, SMALL_ACCURACY)
    assert main(["accuracy", "--config", cfg, "--aux", "cubic"]) == EXIT_CONFIG


def test_missing_config_rejected():
    assert main(["accuracy", "--config", "no_such_config"]) == EXIT_CONFIG


def test_nondivisible_t_end_rejected(tmp_path):
    cfg = _write_cfg(tmp_path, SMALL_ACCURACY)
    assert main(["energy", "--config", cfg, "--dt", "0.3", "--t-end", "1.0"]) == EXIT_CONFIG


def test_unknown_config_key_rejected(tmp_path):
    path = _write_cfg(tmp_path, "[run]\nnonsense = 1\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_resolve_config_from_repo_dir(monkeypatch):
    repo_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    monkeypatch.chdir(repo_root)
    path = resolve_config_path("table1_softplus")
    assert path.endswith("table1_softplus.cfg")
    cfg = load_config(path)
    assert cfg.aux == "softplus" and cfg.alpha == 0.5 and cfg.lipschitz == 2.0
    assert cfg.dts == [0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125]


def test_shipped_configs_all_parse(monkeypatch):
    repo_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    cfg_dir = os.path.join(repo_root, "configs")
    names = sorted(os.listdir(cfg_dir))
    assert len(names) >= 18
    for name in names:
        cfg = load_config(os.path.join(cfg_dir, name))
        needs = bool(cfg.dts)
        cfg.validate(needs_dts=needs)


def test_run_config_defaults_valid():
    RunConfig().validate()
