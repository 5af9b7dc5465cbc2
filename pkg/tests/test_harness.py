import json
import math

import numpy as np
import pytest

from rbqos import harness
from rbqos.sysmodel import ConfigError


@pytest.fixture
def config_file(tmp_path):
    doc = {
        "system": {
            "M": 1, "F": 5,
            "rate_L_bps": [1.0e6], "rate_S_bps": [90e3], "eps": [1e-2],
        },
        "train": {"batch_size": 8, "total_iters": 25, "holdout": 6,
                  "hidden": [12, 12], "eval_cadence": 10, "seed": 4},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


def test_load_config_defaults_and_conversion(config_file):
    system, tcfg = harness.load_config(config_file)
    assert system.B == 30e3 and system.L == 12 and system.Nr == 64
    assert system.Pmax == pytest.approx(10 ** ((23 - 30) / 10))
    assert system.RL[0] == pytest.approx(1.0e6 * math.log(2))
    assert tcfg.batch_size == 8 and tcfg.hidden == (12, 12)


def test_config_round_trip(config_file):
    system, tcfg = harness.load_config(config_file)
    dumped = harness.dump_config(system, tcfg)
    system2 = harness._system_from_dict(dumped["system"])
    assert harness.config_to_dict(system2) == harness.config_to_dict(system)
    tcfg2 = harness._train_from_dict(dumped["train"])
    assert tcfg2 == tcfg


def test_load_config_errors(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"system": {"rate_L_bps": [1e6], "rate_S_bps": [1e5]}}))
    with pytest.raises(ConfigError, match="eps"):
        harness.load_config(path)
    path.write_text(json.dumps({"system": {"rate_L_bps": [1e6], "rate_S_bps": [1e5],
                                           "eps": [1e-2], "bogus_field": 3}}))
    with pytest.raises(ConfigError, match="bogus_field"):
        harness.load_config(path)
    path.write_text(json.dumps({}))
    with pytest.raises(ConfigError, match="system"):
        harness.load_config(path)


def test_gen_data_reproducible_byte_for_byte(config_file, tmp_path):
    out1 = tmp_path / "d1.jsonl"
    out2 = tmp_path / "d2.jsonl"
    args = ["gen-data", "--config", str(config_file), "--samples", "12", "--seed", "7"]
    assert harness.cli_dispatch(args + ["--out", str(out1)]) == 0
    assert harness.cli_dispatch(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    config, states = harness.read_dataset(out1)
    assert len(states) == 12
    assert states[0].gamma.shape == (1, 5)


def test_solver_cli_outputs(config_file, tmp_path):
    data = tmp_path / "d.jsonl"
    harness.cli_dispatch(["gen-data", "--config", str(config_file),
                          "--samples", "6", "--seed", "3", "--out", str(data)])
    for cmd, out_name in (("solve-su", "su.jsonl"), ("solve-mu", "mu.jsonl"),
                          ("oracle", "oracle.jsonl")):
        out = tmp_path / out_name
        code = harness.cli_dispatch([cmd, "--dataset", str(data), "--out", str(out)])
        assert code == 0
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(rows) == 6
        assert {"occupied", "feasible", "pL", "pS", "gapL", "gapS"} <= rows[0].keys()
    su = [json.loads(line) for line in (tmp_path / "su.jsonl").read_text().splitlines()]
    ora = [json.loads(line) for line in (tmp_path / "oracle.jsonl").read_text().splitlines()]
    assert [r["occupied"] for r in su] == [r["occupied"] for r in ora]
    # solver outputs are reproducible byte-for-byte as well
    out_again = tmp_path / "su2.jsonl"
    harness.cli_dispatch(["solve-su", "--dataset", str(data), "--out", str(out_again)])
    assert out_again.read_bytes() == (tmp_path / "su.jsonl").read_bytes()


def test_train_eval_cli(config_file, tmp_path):
    data = tmp_path / "d.jsonl"
    harness.cli_dispatch(["gen-data", "--config", str(config_file),
                          "--samples", "30", "--seed", "5", "--out", str(data)])
    out_dir = tmp_path / "run"
    code = harness.cli_dispatch(["train", "--config", str(config_file),
                                 "--dataset", str(data), "--out", str(out_dir)])
    assert code == 0
    assert (out_dir / "log.csv").exists()
    assert (out_dir / "checkpoint.json").exists()
    assert (out_dir / "learning_curve.png").exists()
    header = (out_dir / "log.csv").read_text().splitlines()[0]
    assert header == "iter,loss,avg_rbs,viol_L,viol_S,V,Vbar,kappa"
    code = harness.cli_dispatch(["eval", "--checkpoint", str(out_dir / "checkpoint.json"),
                                 "--dataset", str(data), "--out", str(out_dir / "eval")])
    assert code == 0
    assert (out_dir / "eval" / "metrics.json").exists()
    assert (out_dir / "eval" / "gap_cdf.csv").exists()
    assert (out_dir / "eval" / "gap_cdf.png").exists()
    metrics = json.loads((out_dir / "eval" / "metrics.json").read_text())
    assert set(metrics) == {"avg_occupied_rbs", "violation_fraction_L",
                            "violation_fraction_S"}


def test_bench_cli(tmp_path):
    out_dir = tmp_path / "bench"
    code = harness.cli_dispatch(["bench", "--out", str(out_dir),
                                 "--f-values", "3,4", "--rl-scales", "1.0",
                                 "--instances", "2", "--seed", "1"])
    assert code == 0
    assert (out_dir / "bench.csv").exists()
    assert (out_dir / "bench.png").exists()
    rows = (out_dir / "bench.csv").read_text().splitlines()
    assert rows[0] == "sweep,value,method,mean_seconds,instances"
    assert len(rows) == 1 + 3 * 3  # (2 F points + 1 RL point) x 3 methods


def test_cli_error_codes(config_file, tmp_path):
    with pytest.raises(SystemExit) as exc:
        harness.cli_dispatch(["solve-su", "--no-such-flag"])
    assert exc.value.code == 2
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text(json.dumps({"system": {"rate_L_bps": [1e6],
                                              "rate_S_bps": [1e5]}}))
    code = harness.cli_dispatch(["gen-data", "--config", str(bad_cfg),
                                 "--samples", "1", "--seed", "0",
                                 "--out", str(tmp_path / "x.jsonl")])
    assert code == 2
    code = harness.cli_dispatch(["solve-su", "--dataset", str(tmp_path / "missing.jsonl"),
                                 "--out", str(tmp_path / "y.jsonl")])
    assert code == 1
