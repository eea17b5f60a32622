import json

import pytest

from impact_harvest import cli

SIM = ["simulate", "--d", "0.16", "--gbar", "0.12201", "--phi", "5.98290620528663",
       "--init", "0.08", "0.4460472581024223", "0", "--transient", "20", "--window", "80"]


def _files(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_simulate_writes_outputs(tmp_path):
    assert cli.main(SIM + ["--out", str(tmp_path), "--svg"]) == 0
    names = set(_files(tmp_path))
    assert {"pattern.csv", "impacts.csv", "trajectory.csv", "trajectory.svg", "phase.svg"} <= names
    assert "2:1" in (tmp_path / "pattern.csv").read_text()


def test_outputs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(SIM + ["--out", str(a), "--svg"]) == 0
    assert cli.main(SIM + ["--out", str(b), "--svg"]) == 0
    assert _files(a) == _files(b)


def test_dump_config_round_trip(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(SIM + ["--out", str(a), "--format", "json", "--dump-config"]) == 0
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(capsys.readouterr().out)
    assert not a.exists()
    assert cli.main(SIM + ["--out", str(a), "--format", "json"]) == 0
    assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(b)]) == 0
    assert _files(a) == _files(b)
    assert json.loads(cfg_path.read_text())["format"] == "json"


def test_solve_json(tmp_path):
    args = ["solve", "--d", "0.16", "--gbar", "0.12201", "--type", "2:1",
            "--guess", "0.45", "6.0", "0.21", "0.46", "--format", "json", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    rows = json.loads((tmp_path / "orbits.json").read_text())
    assert rows[0]["valid"] is True
    assert rows[0]["v_k1"] == pytest.approx(0.1924, abs=5e-4)
    assert rows[0]["class"] in ("StableNode", "StableFocus")


def test_physical_parameters_are_converted(capsys):
    args = ["simulate", "--M", "0.1245", "--s", "0.27", "--omega", "15.707963267948966",
            "--F", "5", "--beta", "0.5235987755982988", "--dump-config"]
    assert cli.main(args) == 0
    cfg = cli.RunConfig.from_dict(json.loads(capsys.readouterr().out))
    p = cfg.system_params()
    assert p.gbar == pytest.approx(0.122010, abs=1e-12)
    assert p.d == pytest.approx(0.168075, abs=1e-12)


def test_dimensionless_parameters_win():
    cfg = cli.RunConfig(params={"d": 0.16, "gbar": 0.1},
                        physical={"M": 0.1245, "s": 0.27, "omega": 15.7, "F_norm": 5, "beta": 0.5})
    p = cfg.system_params()
    assert (p.d, p.gbar) == (0.16, 0.1)


@pytest.mark.parametrize("args", [
    ["sweep", "--d", "0.16", "--gbar", "0.12", "--d-range", "0.2", "0.1"],
    ["sweep", "--d", "0.16", "--gbar", "0.12"],
    ["simulate", "--d", "-1", "--gbar", "0.12"],
    ["simulate", "--gbar", "0.12"],
    ["graze", "--d", "0.14", "--gbar", "0.12", "--d-range", "0.13", "0.15", "--d-step", "-0.1"],
    ["reproduce", "fig99"],
    ["frobnicate"],
])
def test_config_errors_exit_2(args, tmp_path):
    assert cli.main(args + ["--out", str(tmp_path)]) == 2


def test_unknown_config_key_exit_2(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"params": {"d": 0.1, "gbar": 0.1}, "colour": "red"}))
    assert cli.main(["simulate", "--config", str(path)]) == 2


def test_numerical_failure_exit_3(tmp_path):
    args = ["solve", "--d", "0.16", "--gbar", "0.12201", "--guess", "5", "0", "0.9", "0.05",
            "--out", str(tmp_path)]
    assert cli.main(args) == 3
    diag = json.loads((tmp_path / "diagnostics.json").read_text())
    assert diag["error"] == "NoConvergence"


def test_env_overrides_jobs(monkeypatch):
    monkeypatch.setenv(cli.ENV_JOBS, "3")
    args = cli.build_parser().parse_args(["simulate", "--d", "0.2", "--gbar", "0.1", "--jobs", "1"])
    assert cli.resolve_config(args).jobs == 3


def test_pmap_parallel_matches_serial():
    assert cli.pmap(abs, [-1, 2, -3], 2) == cli.pmap(abs, [-1, 2, -3], 1) == [1, 2, 3]


def test_sweep_scenario(tmp_path):
    args = ["sweep", "--d", "0.18", "--gbar", "0.21133", "--d-range", "0.17", "0.19",
            "--d-step", "0.005", "--out", str(tmp_path), "--svg"]
    assert cli.main(args) == 0
    summary = json.loads((tmp_path / "sweep_summary.json").read_text())
    assert summary["stable_windows"] == [[0.17, 0.19]]
    assert (tmp_path / "sweep.svg").read_text().startswith("<svg")


def test_energy_scenario(tmp_path):
    args = SIM[1:]
    assert cli.main(["energy", *args, "--gamma", "1", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "energy_summary.csv").read_text()
    assert text.splitlines()[0].startswith("pattern,U_I_avg,U_T_avg")


def test_reproduce_fig3(tmp_path):
    assert cli.main(["reproduce", "fig3", "--out", str(tmp_path)]) == 0
    assert any(p.suffix == ".csv" for p in tmp_path.iterdir())
