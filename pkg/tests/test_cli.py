import json

import numpy as np
import pytest

from rubyqsl.cli import (
    EXIT_BUDGET,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_VALIDATION,
    ConfigError,
    config_hash,
    load_config,
    main,
    resolve_axis_point,
)


def run_cli(*argv):
    return main(list(argv))


# --- config plumbing ------------------------------------------------------------

def test_defaults_load_and_hash_deterministically():
    a = load_config(None, [])
    b = load_config(None, [])
    assert a == b
    assert config_hash(a) == config_hash(b)


def test_set_overrides_parse_json_with_string_fallback():
    cfg = load_config(None, [
        "patch=triangle-3",            # bare string
        "omega0_mhz=2.5",              # float
        "integrator.dt_us=0.001",      # nested key
        "species=null",                # JSON null
        'probes=["n_bar"]',            # JSON list
    ])
    assert cfg["patch"] == "triangle-3"
    assert cfg["omega0_mhz"] == 2.5
    assert cfg["integrator"]["dt_us"] == 0.001
    assert cfg["species"] is None
    assert config_hash(cfg) != config_hash(load_config(None, []))


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown config key"):
        load_config(None, ["bogus=1"])
    with pytest.raises(ConfigError, match="unknown config section"):
        load_config(None, ["bogus.dt=1"])


def test_config_file_merge_and_errors(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text('{"patch": "triangle-3", "tau_us": 0.5}')
    cfg = load_config(path, ["tau_us=0.25"])
    assert cfg["patch"] == "triangle-3"
    assert cfg["tau_us"] == 0.25   # --set wins over the file

    path.write_text('{"patch": "triangle-3",}')
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(path, [])
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.json", [])


def test_probe_validation():
    with pytest.raises(ConfigError, match="unknown probe"):
        load_config(None, ['probes=["banana"]'])
    with pytest.raises(ConfigError, match="undefined pattern"):
        load_config(None, ['probes=["pattern:missing"]'])


def test_axis_validation():
    with pytest.raises(ConfigError, match="unknown sweep axis"):
        load_config(None, ['axes=[{"parameter":"banana","values":[1]}]'])
    with pytest.raises(ConfigError, match="finite values"):
        load_config(None, ['axes=[{"parameter":"nu","values":[]}]'])


def test_resolve_axis_point_dimensionless_axes():
    cfg = load_config(None, [])
    out = resolve_axis_point(cfg, {"omega0_mhz": 1.5, "delta_f_over_omega0": 4.0})
    assert out["delta_final_rb_mhz"] == pytest.approx(6.0)
    out = resolve_axis_point(cfg, {"tq_over_tau": 0.1})
    assert out["t_q_us"] == pytest.approx(0.25)


# --- run ------------------------------------------------------------------------

def test_run_writes_trajectory_and_observables(tmp_path, capsys):
    sets = [
        "patch=triangle-3", "tau_us=0.25", "t_q_us=0.025",
        f"output_dir={tmp_path}", 'patterns={"seed":[0]}',
        'probes=["n_bar","pattern:seed"]',
    ]
    code = run_cli("run", *[arg for s in sets for arg in ("--set", s)])
    assert code == EXIT_OK
    assert "run: patch=triangle-3" in capsys.readouterr().out

    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    digest = config_hash(load_config(None, sets))
    assert lines[0] == f"# config_sha256: {digest}"
    assert lines[1] == "t_us,norm,n_bar,pattern:seed"
    first = lines[2].split(",")
    assert float(first[0]) == 0.0
    assert float(first[1]) == pytest.approx(1.0, abs=1e-12)

    summary = json.loads((tmp_path / "observables.json").read_text())
    assert summary["config_sha256"] == digest
    assert summary["basis_dim"] == 4
    assert 0.0 <= summary["n_bar"] <= 1.0
    assert "seed" in summary["patterns"]
    assert summary["star_statistics"] == []   # triangle-3 has no interior vertex


def test_run_exports_loadable_state(tmp_path):
    code = run_cli(
        "run", "--set", "patch=kagome-12", "--set", "tau_us=0.25",
        "--set", "t_q_us=0.025", "--set", f"output_dir={tmp_path}",
        "--set", "export_state=true",
    )
    assert code == EXIT_OK
    sidecar = json.loads((tmp_path / "state.json").read_text())
    assert sidecar["format"] == "complex64-le-interleaved"
    assert sidecar["dim"] == 256
    amps = np.fromfile(tmp_path / "state.bin", dtype="<c8")
    assert amps.size == 256
    assert np.linalg.norm(amps) == pytest.approx(1.0, abs=1e-6)


# --- sweep ----------------------------------------------------------------------

def test_sweep_long_format_csv(tmp_path):
    code = run_cli(
        "sweep", "--set", "patch=triangle-3", "--set", "tau_us=0.25",
        "--set", "t_q_us=0.025", "--set", f"output_dir={tmp_path}",
        "--set", 'axes=[{"parameter":"delta_f_over_omega0","values":[2.0,1.0]}]',
    )
    assert code == EXIT_OK
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("# config_sha256: ")
    assert lines[1] == "delta_f_over_omega0,metric,value,status"
    rows = [ln.split(",") for ln in lines[2:]]
    # grid points come out sorted regardless of input order
    xs = sorted({float(r[0]) for r in rows})
    assert xs == [1.0, 2.0]
    assert all(r[-1] == "ok" for r in rows)
    assert {"n_bar"} <= {r[1] for r in rows}
    n_bar_rows = [r for r in rows if r[1] == "n_bar"]
    assert len(n_bar_rows) == 2
    for r in n_bar_rows:
        assert 0.0 <= float(r[2]) <= 1.0


def test_sweep_without_axes_is_a_config_error(capsys):
    assert run_cli("sweep", "--set", "patch=triangle-3") == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_sweep_budget_exceeded_status(tmp_path, capsys):
    # a_um on an axis forces a per-point basis build, so the size cap
    # surfaces as a status row rather than killing the whole command
    code = run_cli(
        "sweep", "--set", "patch=kagome-9", "--set", "max_states=10",
        "--set", f"output_dir={tmp_path}",
        "--set", 'axes=[{"parameter":"a_um","values":[4.0,4.5]}]',
    )
    assert code == EXIT_BUDGET
    rows = (tmp_path / "sweep.csv").read_text().splitlines()[2:]
    assert all(r.endswith("budget_exceeded") for r in rows)


def test_sweep_norm_drift_status(tmp_path):
    code = run_cli(
        "sweep", "--set", "patch=triangle-3", "--set", "tau_us=0.25",
        "--set", "t_q_us=0.025", "--set", f"output_dir={tmp_path}",
        "--set", "integrator.norm_budget=1e-18",
        "--set", 'axes=[{"parameter":"nu","values":[1.0]}]',
    )
    assert code == EXIT_BUDGET
    rows = (tmp_path / "sweep.csv").read_text().splitlines()[2:]
    assert rows and all(r.endswith("norm_drift") for r in rows)


def test_shared_basis_budget_exceeds_whole_command(tmp_path, capsys):
    # without an a_um axis the basis is built once up front; the cap then
    # fails the command with the resource exit code
    code = run_cli(
        "sweep", "--set", "patch=kagome-9", "--set", "max_states=10",
        "--set", f"output_dir={tmp_path}",
        "--set", 'axes=[{"parameter":"nu","values":[1.0]}]',
    )
    assert code == EXIT_BUDGET
    assert "resource budget exceeded" in capsys.readouterr().err


# --- validate -------------------------------------------------------------------

def test_validate_passes_on_small_patch(capsys):
    code = run_cli(
        "validate", "--set", "patch=kagome-9", "--set", "tau_us=0.5",
        "--set", "t_q_us=0.05",
    )
    out = capsys.readouterr().out
    assert code == EXIT_OK
    for name in (
        "basis-dimension-law",
        "basis-closure-under-clears",
        "basis-exclusion-rule",
        "matvec-vs-dense",
        "norm-conservation",
        "constrained-vs-full-densities",
        "reduced-density-vs-full-trace",
        "pure-state-complement-entropy",
    ):
        assert f"PASS {name}" in out
    assert "FAIL" not in out


def test_validate_corrupt_basis_negative_control(capsys):
    code = run_cli(
        "validate", "--set", "patch=kagome-9", "--set", "tau_us=0.5",
        "--set", "t_q_us=0.05", "--corrupt-basis",
    )
    assert code == EXIT_VALIDATION
    assert "FAIL" in capsys.readouterr().out


def test_validate_rejects_large_patches(capsys):
    assert run_cli("validate", "--set", "patch=kagome-18") == EXIT_CONFIG
    assert "at most 12 sites" in capsys.readouterr().err


# --- lattice --------------------------------------------------------------------

def test_lattice_tables(tmp_path):
    code = run_cli(
        "lattice", "--set", "patch=kagome-9", "--set", f"output_dir={tmp_path}",
    )
    assert code == EXIT_OK
    lattice = (tmp_path / "lattice.csv").read_text().splitlines()
    assert lattice[1] == "id,x_um,y_um,species,is_edge"
    assert len(lattice) == 2 + 9
    assert sum(int(row.split(",")[4]) for row in lattice[2:]) == 8
    stars = (tmp_path / "stars.csv").read_text().splitlines()
    assert len(stars) == 2 + 2


def test_lattice_species_assignment_flows_through(tmp_path):
    code = run_cli(
        "lattice", "--set", "patch=kagome-12", "--set", "a_um=4.0",
        "--set", "species=kagome-12-half-cs", "--set", f"output_dir={tmp_path}",
    )
    assert code == EXIT_OK
    rows = (tmp_path / "lattice.csv").read_text().splitlines()[2:]
    species = [row.split(",")[3] for row in rows]
    assert species.count("Cs") == 6


# --- entropy --------------------------------------------------------------------

@pytest.fixture(scope="module")
def exported_state(tmp_path_factory):
    out = tmp_path_factory.mktemp("state")
    code = run_cli(
        "run", "--set", "patch=kagome-12", "--set", "tau_us=0.25",
        "--set", "t_q_us=0.025", "--set", f"output_dir={out}",
        "--set", "export_state=true",
    )
    assert code == EXIT_OK
    return out


def test_entropy_from_saved_state(exported_state, tmp_path, capsys):
    code = run_cli(
        "entropy", "--state", str(exported_state / "state.json"),
        "--set", "patch=kagome-12", "--set", f"output_dir={tmp_path}",
        "--set", "subsets=kagome-12-kitaev-preskill",
    )
    assert code == EXIT_OK
    assert "gamma=" in capsys.readouterr().out
    mi = (tmp_path / "mi_curve.csv").read_text().splitlines()
    assert mi[1] == "k,mutual_information"
    ks = [int(row.split(",")[0]) for row in mi[2:]]
    assert ks == list(range(1, 12))
    assert all(float(row.split(",")[1]) > -1e-9 for row in mi[2:])
    entropy = (tmp_path / "entropy.csv").read_text()
    assert entropy.startswith("# config_sha256: ")


def test_entropy_requires_state_file(capsys):
    assert run_cli("entropy", "--set", "patch=kagome-12") == EXIT_CONFIG
    assert "state_file" in capsys.readouterr().err


def test_entropy_rejects_stale_sidecar(exported_state, tmp_path, capsys):
    sidecar = json.loads((exported_state / "state.json").read_text())
    sidecar["states_sha256"] = "0" * 64
    stale = tmp_path / "state.json"
    stale.write_text(json.dumps(sidecar))
    (tmp_path / "state.bin").write_bytes((exported_state / "state.bin").read_bytes())
    code = run_cli("entropy", "--state", str(stale), "--set", f"output_dir={tmp_path}")
    assert code == EXIT_VALIDATION
    assert "does not match" in capsys.readouterr().err


def test_entropy_rejects_wrong_amplitude_count(exported_state, tmp_path, capsys):
    (tmp_path / "state.json").write_text((exported_state / "state.json").read_text())
    blob = (exported_state / "state.bin").read_bytes()
    (tmp_path / "state.bin").write_bytes(blob[: len(blob) // 2])
    code = run_cli(
        "entropy", "--state", str(tmp_path / "state.json"),
        "--set", f"output_dir={tmp_path}",
    )
    assert code == EXIT_VALIDATION
    assert "amplitudes" in capsys.readouterr().err
