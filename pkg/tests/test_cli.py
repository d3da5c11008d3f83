import json
import subprocess
import sys

import numpy as np
import pytest

from driftlab import __version__
from driftlab.cli import SCHEMA, load_config, main, parse_beta_grid, thread_count
from driftlab.csvio import read_columns, read_csv
from driftlab.errors import ConfigError
from driftlab.tw import load_branch


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


@pytest.fixture(scope="module")
def soliton_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("continue")
    cfg = write(root / "cont.ini", "[continuation]\nstart_beta = 1.9\ntargets = 1.95\n"
                                   "seed = soliton\nnormalizations = party_mass\n")
    out = root / "out"
    assert main(["continue", "--config", str(cfg), "--out-dir", str(out)]) == 0
    return out


# ---------------------------------------------------------------- configuration


def test_defaults_cover_every_key():
    cfg = load_config(None, "simulate")
    assert set(cfg) == set(SCHEMA["simulate"])
    assert cfg["model"]["beta"] == 0.0


@pytest.mark.parametrize("text", [
    "[model]\nbeta = fast\n",
    "[model]\ncolour = red\n",
    "[nonsense]\nx = 1\n",
    "beta = 1\n",
])
def test_bad_configs_exit_with_config_error(tmp_path, text):
    cfg = write(tmp_path / "bad.ini", text)
    assert main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2


def test_inline_comments_and_empty_optionals(tmp_path):
    cfg = write(tmp_path / "c.ini", "[model]\nbeta = 0.35   # strength\n[integrator]\ndt =   # auto\n")
    resolved = load_config(cfg, "simulate")
    assert resolved["model"]["beta"] == 0.35
    assert resolved["integrator"]["dt"] is None


def test_config_errors_name_the_key(tmp_path):
    cfg = write(tmp_path / "bad.ini", "[integrator]\nt_end = soon\n")
    with pytest.raises(ConfigError, match=r"\[integrator\] t_end"):
        load_config(cfg, "simulate")


def test_beta_grid_forms():
    assert parse_beta_grid("0, 0.5,1") == [0.0, 0.5, 1.0]
    assert parse_beta_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    for bad in ("", " ", "0:1", "0:1:-1", "a,b"):
        with pytest.raises(ConfigError):
            parse_beta_grid(bad)


def test_thread_count_from_environment(monkeypatch):
    monkeypatch.setenv("DRIFTLAB_THREADS", "3")
    assert thread_count(None) == 3
    assert thread_count("2") == 2
    monkeypatch.setenv("DRIFTLAB_THREADS", "zero")
    with pytest.raises(ConfigError):
        thread_count(None)
    with pytest.raises(ConfigError):
        thread_count("0")


# ---------------------------------------------------------------- simulate


def test_uniform_state_without_bias_is_stationary(tmp_path):
    cfg = write(tmp_path / "u.ini", "[initial]\nkind = uniform\nsize = 16\n"
                                    "[integrator]\nt_end = 20\noutput_dt = 2\n")
    assert main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    d = read_columns(tmp_path / "diagnostics.csv")
    assert len(d["t"]) == 11
    for name in ("mean_opinion", "mass_party", "mass_trailing", "mass_leading"):
        assert np.ptp(d[name]) <= 1e-12
    header, rows = read_csv(tmp_path / "spacetime.csv")
    assert header[0] == "t" and len(header) == 17
    assert len(rows) == 11
    assert [o["path"] for o in manifest(tmp_path)["outputs"]] == [
        "snapshots.csv", "spacetime.csv", "diagnostics.csv"]


def test_linear_bias_party_mass_decays(tmp_path):
    cfg = write(tmp_path / "lin.ini", "[model]\nbias = linear\nbeta = 0.1\nrange = 1\n"
                                      "[integrator]\nt_end = 300\nmethod = rk45\nrtol = 1e-10\n"
                                      "output_dt = 10\n")
    assert main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    d = read_columns(tmp_path / "diagnostics.csv")
    party = d["mass_party"][d["t"] >= 50]
    assert np.all(np.diff(party) < 0)
    total = d["mass_party"] + d["mass_trailing"] + d["mass_leading"]
    np.testing.assert_allclose(total, 1.0, atol=1e-8)


def test_divergent_integration_exits_with_convergence_error(tmp_path):
    cfg = write(tmp_path / "div.ini", "[model]\nbeta = 0.5\n[initial]\nkind = uniform_random\n"
                                      "size = 32\nperturbation = 0.1\n"
                                      "[integrator]\nt_end = 200\ndt = 0.5\n")
    assert main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 3


def test_random_initial_data_follows_the_seed(tmp_path):
    cfg = write(tmp_path / "r.ini", "[initial]\nkind = uniform_random\nsize = 8\n"
                                    "[integrator]\nt_end = 1\n")
    digests = []
    for seed in (1, 1, 2):
        out = tmp_path / f"s{len(digests)}"
        assert main(["simulate", "--config", str(cfg), "--out-dir", str(out), "--seed", str(seed)]) == 0
        digests.append(manifest(out)["outputs"][0]["sha256"])
    assert digests[0] == digests[1] != digests[2]


# ---------------------------------------------------------------- continue


def test_speeds_schema(soliton_run):
    header, rows = read_csv(soliton_run / "speeds.csv")
    assert header == ["beta", "c", "m_infinity", "peak", "N", "L", "h_error", "L_error"]
    betas = [r[0] for r in rows]
    assert betas[0] == pytest.approx(1.9) and betas[-1] == pytest.approx(1.95)
    assert all(np.diff(betas) > 0)
    scaled = read_columns(soliton_run / "speeds_party_mass.csv")
    branch = load_branch(soliton_run / "branch.dlb")
    expected = [pt.c / pt.profile.party_mass for pt in branch.points]
    np.testing.assert_allclose(scaled["c"], expected, rtol=1e-14)


@pytest.mark.parametrize("key,value", [("targets", "0.0"), ("start_beta", "2.0")])
def test_out_of_range_betas_exit_with_domain_error(tmp_path, key, value):
    cfg = write(tmp_path / "c.ini", f"[continuation]\n{key} = {value}\n")
    assert main(["continue", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 4


# ---------------------------------------------------------------- spectral and predict


def test_spectral_row_without_bias_matches_the_grid_oracle(tmp_path):
    assert main(["spectral", "--beta-grid", "0", "--out-dir", str(tmp_path)]) == 0
    row = read_columns(tmp_path / "spreading.csv")
    assert row["v"][0] == pytest.approx(3.8073971189, abs=1e-4)
    assert row["v_left"][0] == pytest.approx(3.8073971189, abs=1e-4)


def test_empty_beta_grid_is_a_usage_error(tmp_path):
    assert main(["spectral", "--beta-grid", "", "--out-dir", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as info:
        main(["spectral", "--out-dir", str(tmp_path)])
    assert info.value.code == 2


def test_spreading_is_slower_than_the_party(soliton_run, tmp_path):
    branch = str(soliton_run / "branch.dlb")
    assert main(["spectral", "--m-mode", "from-branch", "--branch", branch, "--beta-grid", "branch",
                 "--out-dir", str(tmp_path)]) == 0
    t = read_columns(tmp_path / "spreading.csv")
    assert len(t["beta"]) >= 2
    assert np.all(t["v_left"] < t["c_party"])
    assert np.all(t["spreading_below_party"] == 1)


def test_predict_threshold_speed(tmp_path):
    assert main(["predict", "--beta-grid", "0.1,1.9", "--out-dir", str(tmp_path)]) == 0
    t = read_columns(tmp_path / "predictions.csv")
    assert t["c_theorem1"][1] == pytest.approx(3.89333, abs=5e-6)
    assert t["c_small_beta"][0] == pytest.approx(0.063662, abs=5e-7)
    assert np.isnan(t["c_theorem1"][0]) and np.isnan(t["c_small_beta"][1])


def test_manifest_is_reproducible(tmp_path):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["predict", "--beta-grid", "0:2:0.1", "--out-dir", str(out)]) == 0
        runs.append(manifest(out))
    a, b = runs
    assert a["outputs"] == b["outputs"]
    assert a["config_hash"] == b["config_hash"]
    assert a["tool_version"] == __version__
    assert a["inputs"]["threads"] == 1
    assert a["timestamp"].endswith("+00:00")


# ---------------------------------------------------------------- export and verify


def test_export_branch(soliton_run, tmp_path):
    branch = str(soliton_run / "branch.dlb")
    assert main(["export-branch", "--branch", branch, "--out-dir", str(tmp_path)]) == 0
    a, b = load_branch(branch), load_branch(tmp_path / "branch.csv")
    assert all(np.array_equal(x.profile.q, y.profile.q) for x, y in zip(a.points, b.points))
    assert main(["export-branch", "--branch", branch, "--point", "0", "--out-dir", str(tmp_path)]) == 0
    assert read_csv(tmp_path / "profile.csv")[0] == ["xi", "Q", "q"]
    assert main(["export-branch", "--branch", branch, "--point", "99", "--out-dir", str(tmp_path)]) == 2


def test_quick_verify_passes(tmp_path):
    assert main(["verify", "--quick", "--out-dir", str(tmp_path)]) == 0
    t = read_columns(tmp_path / "verify.csv")
    assert np.all(t["passed"] == 1)


@pytest.mark.parametrize("fault,criterion", [("melnikov", "8"), ("operator", "9")])
def test_injected_fault_fails_verify(tmp_path, fault, criterion):
    assert main(["verify", "--only", criterion, "--inject-fault", fault,
                 "--out-dir", str(tmp_path)]) == 1
    assert main(["verify", "--only", criterion, "--out-dir", str(tmp_path)]) == 0


def test_console_script_runs(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "driftlab.cli", "predict", "--beta-grid", "1.9",
                           "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "predictions.csv").exists()
