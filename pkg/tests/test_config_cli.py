import csv

import pytest
import yaml

from helperoffload.cli import main
from helperoffload.config import (
    ConfigError,
    ConfigParseError,
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    expand_values,
    load_config,
    params_from_dict,
    parse_values,
)
from helperoffload.energy import SystemParams
from helperoffload.experiments import CSV_COLUMNS, policy_params, run_dp_compare, run_sweep


def _write(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else yaml.safe_dump(data))
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# config


def test_empty_config_gives_defaults(tmp_path):
    cfg = load_config(_write(tmp_path, ""))
    assert cfg == ExperimentConfig()
    assert cfg.params == SystemParams()


def test_nested_and_flat_params():
    a = params_from_dict({"cpu_chain": {"P11": 0.5}, "D": 100})
    b = params_from_dict({"P11": 0.5, "D": 100})
    assert a == b and a.P11 == 0.5 and a.D == 100


@pytest.mark.parametrize(
    "raw, msg",
    [
        ({"params": {"P11": 1.3}}, "params.P11"),
        ({"params": {"bogus": 1}}, "bogus"),
        ({"policies": ["nope"]}, "nope"),
        ({"sweep": {"axis": "X", "values": [1]}}, "sweep.axis"),
        ({"sweep": {"axis": "D", "values": []}}, "sweep.values"),
        ({"sweep": {"axis": "P11", "values": [1.5]}}, "P11"),
        ({"episodes": 0}, "episodes"),
        ({"initial": {"cpu": "asleep", "channel": "good"}}, "initial"),
        ({"extra": 1}, "extra"),
    ],
)
def test_invalid_configs(raw, msg):
    with pytest.raises(ConfigError, match=msg):
        config_from_dict(raw)


def test_range_sweep_expands_inclusive():
    assert expand_values({"start": 1000, "stop": 5000, "step": 1000}) == [1000, 2000, 3000, 4000, 5000]
    assert parse_values("0.1:0.9:0.2") == [0.1, 0.3, 0.5, 0.7, 0.9]
    assert parse_values("1,2, 3") == [1.0, 2.0, 3.0]
    with pytest.raises(ConfigError):
        parse_values("1:2")


def test_yaml_parse_error_has_location(tmp_path):
    with pytest.raises(ConfigParseError, match="line"):
        load_config(_write(tmp_path, "params: [1, 2\nseed: 3\n"))


def test_config_roundtrip():
    cfg = config_from_dict(
        {"params": {"D": 500, "P11": 0.3}, "policies": ["tlbp"], "sweep": {"axis": "Q", "values": [0, 10]},
         "seed": 4, "initial": {"cpu": "idle", "channel": "bad"}, "q_threshold": 12}
    )
    assert config_from_dict(config_to_dict(cfg)) == cfg


def test_shipped_configs_load():
    for name in ("desk_dp", "sweep_D", "sweep_Q"):
        load_config(f"configs/{name}.yaml")
    assert load_config("configs/sweep_D.yaml").values == [1000, 2000, 3000, 4000, 5000]


# experiments


def test_policy_params():
    p = SystemParams(Q=300)
    assert policy_params("zero-opt", p).Q == 0
    assert policy_params("large-sub", p).Q == p.D
    assert policy_params("tlbp", p).Q == 300


def test_sweep_rows_order_and_columns():
    cfg = ExperimentConfig(
        params=SystemParams(D=300, Q=30), policies=["tlbp", "equal", "zbp"], axis="D",
        values=[200, 100], episodes=20,
    )
    rows = run_sweep(cfg)
    assert [(r["value"], r["policy"]) for r in rows] == [
        (200, "equal"), (200, "tlbp"), (200, "zbp"), (100, "equal"), (100, "tlbp"), (100, "zbp"),
    ]
    assert all(set(CSV_COLUMNS) == set(r) for r in rows)
    assert all(r["error"] == "" and r["mean_energy_J"] > 0 for r in rows)


def test_per_cell_error_column():
    cfg = ExperimentConfig(policies=["dp", "equal"], episodes=5)
    rows = run_sweep(cfg)
    by = {r["policy"]: r for r in rows}
    assert "BudgetExceededError" in by["dp"]["error"]
    assert by["dp"]["mean_energy_J"] is None
    assert by["equal"]["error"] == "" and by["equal"]["mean_energy_J"] > 0


def test_dp_compare_rows():
    cfg = ExperimentConfig(params=SystemParams(D=20, K=3, Q=20), policies=["dp", "tlbp", "zbp"])
    rows = {r["policy"]: r for r in run_dp_compare(cfg)}
    assert rows["dp"]["rel_gap"] == pytest.approx(0, abs=1e-12)
    assert rows["tlbp"]["rel_gap"] >= -1e-12 and rows["zbp"]["rel_gap"] >= -1e-12


# CLI


def test_cli_simulate_writes_csv_and_sidecar(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code = main(["simulate", "--policy", "tlbp", "--policy", "equal", "--episodes", "30", "--out", str(out)])
    assert code == 0
    rows = _rows(out)
    assert [r["policy"] for r in rows] == ["equal", "tlbp"]
    assert list(rows[0]) == list(CSV_COLUMNS)
    meta = yaml.safe_load((tmp_path / "r.csv.meta.yaml").read_text())
    assert meta["config"]["episodes"] == 30
    assert meta["command"].startswith("helperoffload simulate")


def test_cli_sweep_range_gives_five_points(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--policy", "equal", "--axis", "D", "--values", "1000:5000:1000",
                 "--episodes", "10", "--out", str(out)]) == 0
    assert [float(r["value"]) for r in _rows(out)] == [1000, 2000, 3000, 4000, 5000]


def test_cli_output_is_byte_identical(tmp_path):
    args = ["sweep", "--policy", "zbp", "--policy", "tlbp", "--axis", "Q", "--values", "0,100",
            "--episodes", "25", "--seed", "9"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_validation_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, {"params": {"P11": 1.3}})
    assert main(["simulate", "--config", str(cfg)]) == 3
    assert "P11" in capsys.readouterr().err
    assert main(["sweep", "--episodes", "5"]) == 3


def test_cli_parse_exit_code(tmp_path):
    assert main(["simulate", "--config", str(_write(tmp_path, "a: [\n"))]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.yaml")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--policy", "nonsense"])
    assert exc.value.code == 2


def test_cli_budget_exit_code(tmp_path, capsys):
    assert main(["dp-solve", "--out", str(tmp_path / "x.npz")]) == 4
    assert "budget" in capsys.readouterr().err


def test_cli_dp_commands(tmp_path, capsys):
    cfg = _write(tmp_path, {"params": {"D": 12, "K": 3, "Q": 12}, "policies": ["tlbp", "dp"]})
    assert main(["dp-solve", "--config", str(cfg), "--out", str(tmp_path / "s.npz")]) == 0
    assert (tmp_path / "s.npz").exists()
    out = tmp_path / "c.csv"
    assert main(["dp-compare", "--config", str(cfg), "--out", str(out)]) == 0
    rows = {r["policy"]: r for r in _rows(out)}
    assert float(rows["dp"]["rel_gap"]) == pytest.approx(0, abs=1e-12)


def test_cli_threshold(tmp_path):
    cfg = _write(tmp_path, {"params": {"D": 600, "P11": 1.0}})
    out = tmp_path / "t.yaml"
    assert main(["threshold", "--config", str(cfg), "--episodes", "50", "--out", str(out)]) == 0
    res = yaml.safe_load(out.read_text())
    assert res["converged"] and res["iterations"] == 1 and res["q_threshold"] == 150
