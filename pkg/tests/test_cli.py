import subprocess
import sys

import numpy as np
import pytest

from ioest import datagen
from ioest.cli import ConfigError, main, parse_config, spec_from_config


def _gen(tmp_path, *extra):
    out = tmp_path / "data.csv"
    assert main(["gen", "--out", str(out), *extra]) == 0
    return out


def test_gen_is_deterministic(tmp_path):
    a = _gen(tmp_path, "--scenario", "FOP-B", "--n", "3", "--seed", "7")
    first = a.read_bytes()
    a = _gen(tmp_path, "--scenario", "FOP-B", "--n", "3", "--seed", "7")
    assert a.read_bytes() == first
    lines = first.decode().splitlines()
    assert lines[0] == "u_1,y_1" and len(lines) == 4


def test_gen_round_trip(tmp_path):
    path = _gen(tmp_path, "--scenario", "FOP-E(2)", "--n", "20", "--seed", "1")
    with open(path) as fh:
        back = datagen.dataset_from_csv(fh)
    ref = datagen.generate("FOP-E(2)", 20, 1)
    assert back.u.tobytes() == ref.u.tobytes() and back.y.tobytes() == ref.y.tobytes()


def test_gen_ce_inputs(tmp_path):
    path = _gen(tmp_path, "--scenario", "CE", "--n", "4", "--seed", "2")
    with open(path) as fh:
        data = datagen.dataset_from_csv(fh)
    assert set(data.u[:, 0]) <= {0.0, 20.0}


def test_gen_zero_noise_sqr(tmp_path):
    path = _gen(tmp_path, "--scenario", "SQR-1", "--n", "5", "--seed", "3", "--zero-noise")
    with open(path) as fh:
        data = datagen.dataset_from_csv(fh)
    np.testing.assert_array_equal(data.y, np.clip(np.sqrt(data.u), 0, 1))


def test_gen_to_stdout(capsys):
    assert main(["gen", "--scenario", "FOP-A", "--n", "2"]) == 0
    assert capsys.readouterr().out.startswith("u_1,y_1\n")


def test_unknown_scenario_exit_code(capsys):
    assert main(["gen", "--scenario", "NOPE", "--n", "2"]) == 2


def test_estimate_noiseless_ena(tmp_path, capsys):
    path = _gen(tmp_path, "--scenario", "FOP-B", "--n", "50", "--seed", "3", "--zero-noise")
    out = tmp_path / "res.csv"
    assert main(["estimate", str(path), "--scenario", "FOP-B", "--method", "ena",
                 "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "theta_1 = 0.5\n" in text and "loss = 0\n" in text
    assert out.read_text().splitlines()[1].startswith("ENA,0.5,")


@pytest.mark.parametrize("method", ["kka", "via", "spa"])
def test_estimate_other_methods(tmp_path, capsys, method):
    path = _gen(tmp_path, "--scenario", "FOP-B", "--n", "60", "--seed", "1")
    assert main(["estimate", str(path), "--scenario", "FOP-B", "--method", method]) == 0
    assert "theta_1 = " in capsys.readouterr().out


def test_estimate_spa_with_kernel(tmp_path, capsys):
    path = _gen(tmp_path, "--scenario", "FOP-E(1)", "--n", "60", "--seed", "1")
    assert main(["estimate", str(path), "--scenario", "FOP-E(1)", "--method", "spa",
                 "--gamma", "0.3", "--sigma", "0.01"]) == 0
    assert main(["estimate", str(path), "--scenario", "FOP-E(1)", "--method", "spa",
                 "--gamma", "0.3"]) == 2
    assert main(["estimate", str(path), "--scenario", "FOP-E(1)", "--method", "spa",
                 "--no-project"]) == 3


def test_estimate_schema_mismatch(tmp_path):
    path = _gen(tmp_path, "--scenario", "FOP-B", "--n", "5", "--seed", "1")
    assert main(["estimate", str(path), "--scenario", "FOP-D(3)", "--method", "kka"]) == 2
    assert main(["estimate", str(tmp_path / "missing.csv"), "--scenario", "FOP-B",
                 "--method", "kka"]) == 2


def test_estimate_failure_exit_code(tmp_path):
    path = _gen(tmp_path, "--scenario", "FOP-A", "--n", "5", "--seed", "1")
    assert main(["estimate", str(path), "--scenario", "FOP-A", "--method", "ena",
                 "--eps", "0"]) == 3


# --- run -----------------------------------------------------------------------------------


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_config():
    cfg = parse_config("# demo\nscenario = FOP-B\nmethods = ena, kka\nn_list = 10,100\n"
                       "reps = 3\nproject = no\n\ndelta = 0.02  # finer\n")
    assert cfg == {"scenario": "FOP-B", "methods": ("ENA", "KKA"), "n_list": (10, 100),
                   "reps": 3, "project": False, "delta": 0.02}


@pytest.mark.parametrize("text", ["scenario = FOP-B\nbogus = 1\n", "reps = 3\n",
                                  "scenario = FOP-B\nreps = x\n", "scenario = FOP-B\nreps\n",
                                  "scenario = FOP-B\nscenario = CE\n"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_seed_env_override():
    spec, _, _ = spec_from_config({"scenario": "FOP-B", "master_seed": 1}, env={"IOEST_SEED": "9"})
    assert spec.master_seed == 9
    with pytest.raises(ConfigError):
        spec_from_config({"scenario": "FOP-B"}, env={"IOEST_SEED": "x"})


def test_run_minimal(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = _write(tmp_path, f"scenario = FOP-B\nmethods = ENA\nn_list = 10\nreps = 1\n"
                           f"out_dir = {out}\nworkers = 1\n")
    assert main(["run", str(cfg)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["raw.csv", "scatter_ENA.csv", "table.csv"]


def test_run_table_schema_and_rerun(tmp_path, monkeypatch):
    monkeypatch.delenv("IOEST_SEED", raising=False)
    cfg = _write(tmp_path, "scenario = FOP-A\nmethods = ENA,KKA,VIA\nn_list = 10,30,50\nreps = 2\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "a"), "--workers", "1"]) == 0
    assert main(["run", str(cfg), "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    header = (tmp_path / "a" / "table.csv").read_text().splitlines()[0].split(",")
    assert header == ["method", "10", "30", "50"]
    for name in ["table.csv", "raw.csv", "scatter_ENA.csv", "scatter_KKA.csv", "scatter_VIA.csv"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_seed_env_changes_output(tmp_path, monkeypatch):
    cfg = _write(tmp_path, "scenario = FOP-B\nmethods = KKA\nn_list = 10\nreps = 2\n")
    monkeypatch.setenv("IOEST_SEED", "1")
    main(["run", str(cfg), "--out", str(tmp_path / "a"), "--workers", "1"])
    monkeypatch.setenv("IOEST_SEED", "2")
    main(["run", str(cfg), "--out", str(tmp_path / "b"), "--workers", "1"])
    assert (tmp_path / "a" / "raw.csv").read_bytes() != (tmp_path / "b" / "raw.csv").read_bytes()


def test_run_errors(tmp_path):
    assert main(["run", str(tmp_path / "none.cfg")]) == 2
    assert main(["run", str(_write(tmp_path, "scenario = FOP-B\nn_list = 5,1\n"))]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = _write(tmp_path, f"scenario = FOP-B\nout_dir = {blocker}/sub\n", "b.cfg")
    assert main(["run", str(cfg), "--workers", "1"]) == 2


def test_run_reports_failed_reps(tmp_path):
    cfg = _write(tmp_path, "scenario = FOP-D(10)\nmethods = ENA\nn_list = 10\nreps = 1\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o"), "--workers", "1"]) == 3


def test_fixtures_command(capsys):
    assert main(["fixtures"]) == 0
    out = capsys.readouterr().out
    assert "FOP-I: identifiable=True" in out and "theta_hat=0.7" in out
    assert "FOP-II: identifiable=False" in out and "Q(1.0)=0, Q(1.5)=0, Q(2.0)=0" in out
    assert "theta_hat=1.3" in out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ioest", "gen", "--scenario", "FOP-A", "--n", "1"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.startswith("u_1,y_1")


def test_long_flags_only():
    with pytest.raises(SystemExit) as exc:
        main(["gen", "-n", "3", "--scenario", "FOP-A"])
    assert exc.value.code == 2
