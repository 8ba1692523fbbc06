import csv
import json
import math
from pathlib import Path

import pytest

from wignerlab import cli
from wignerlab.errors import ConfigError


def minimal_config(**overrides):
    base = {
        "spec": {"entry_dist": {"kind": "gaussian", "w": 1.0}, "convention": "goe"},
        "phi": {"kind": "polynomial", "coefficients": [0, 0, 1]},
        "n_list": [256],
        "replicas": 200,
        "root_seed": 1,
    }
    base.update(overrides)
    return base


def write_config(tmp_path: Path, obj) -> Path:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(obj))
    return path


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def test_minimal_config_parses(tmp_path):
    cfg = cli.parse_config(write_config(tmp_path, minimal_config()))
    assert cfg.n_list == (256,)
    assert cfg.replicas == 200
    assert cfg.spec.convention == "goe"


def test_negative_w_names_field(tmp_path):
    bad = minimal_config()
    bad["spec"]["entry_dist"]["w"] = -1.0
    with pytest.raises(ConfigError) as err:
        cli.parse_config(write_config(tmp_path, bad))
    assert err.value.field == "config.spec.entry_dist.w"


def test_unknown_keys_rejected(tmp_path):
    bad = minimal_config(extra_knob=3)
    with pytest.raises(ConfigError):
        cli.parse_config(write_config(tmp_path, bad))
    bad = minimal_config()
    bad["spec"]["entry_dist"]["scale"] = 2
    with pytest.raises(ConfigError):
        cli.parse_config(write_config(tmp_path, bad))


def test_complex_phi_rejected(tmp_path):
    bad = minimal_config()
    bad["phi"] = {"kind": "polynomial", "coefficients": [0, {"re": 0.0, "im": 1.0}]}
    with pytest.raises(ConfigError) as err:
        cli.parse_config(write_config(tmp_path, bad))
    assert "complex" in str(err.value)
    bad["phi"] = {"kind": "polynomial", "coefficients": [0, [0.0, 1.0]]}
    with pytest.raises(ConfigError):
        cli.parse_config(write_config(tmp_path, bad))


def test_bad_json_and_missing_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        cli.parse_config(path)
    with pytest.raises(ConfigError):
        cli.parse_config(tmp_path / "absent.json")


def test_invalid_discrete_distribution_field(tmp_path):
    bad = minimal_config()
    bad["spec"] = {
        "entry_dist": {
            "kind": "two_point",
            "w": 1.0,
            "params": {"atoms": [-1.0, 2.0], "probs": [0.8, 0.2]},
        }
    }
    with pytest.raises(ConfigError):
        cli.parse_config(write_config(tmp_path, bad))


def test_config_hash_is_stable():
    h1 = cli.config_hash(minimal_config())
    h2 = cli.config_hash(json.loads(json.dumps(minimal_config())))
    assert h1 == h2
    assert len(h1) == 16


# ---------------------------------------------------------------------------
# subcommands end to end
# ---------------------------------------------------------------------------


def test_predict_end_to_end(tmp_path):
    cfg = minimal_config()
    cfg["phi"] = {"kind": "polynomial", "coefficients": [0, 0, 0, 0, 1]}
    cfg["spec"] = {"entry_dist": {"kind": "rademacher", "w": 1.0}}
    code = cli.run_cli(
        ["predict", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path / "p")]
    )
    assert code == 0
    out = json.loads((tmp_path / "p" / "prediction.json").read_text())
    assert out["v_w"] == pytest.approx(2.0, abs=1e-9)
    assert out["v_goe"] == pytest.approx(20.0, abs=1e-9)
    assert out["kappa4_term"] == pytest.approx(-18.0, abs=1e-9)
    manifest = json.loads((tmp_path / "p" / "manifest.json").read_text())
    assert manifest["outputs"] == ["prediction.json"]


def test_simulate_deterministic_across_threads(tmp_path):
    cfg_path = write_config(tmp_path, minimal_config(n_list=[64], replicas=150))
    for threads, out in ((1, "a"), (4, "b")):
        code = cli.run_cli(
            ["simulate", "--config", str(cfg_path), "--out", str(tmp_path / out),
             "--threads", str(threads), "--raw"]
        )
        assert code == 0
    a = (tmp_path / "a" / "result.json").read_bytes()
    b = (tmp_path / "b" / "result.json").read_bytes()
    assert a == b
    assert (tmp_path / "a" / "replicas.csv").read_bytes() == (tmp_path / "b" / "replicas.csv").read_bytes()


def test_simulate_seed_override_changes_output(tmp_path):
    cfg_path = write_config(tmp_path, minimal_config(n_list=[64], replicas=150))
    cli.run_cli(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / "s1")])
    cli.run_cli(["simulate", "--config", str(cfg_path), "--seed", "99", "--out", str(tmp_path / "s2")])
    r1 = json.loads((tmp_path / "s1" / "result.json").read_text())
    r2 = json.loads((tmp_path / "s2" / "result.json").read_text())
    assert r1["per_n"][0]["samples_hash"] != r2["per_n"][0]["samples_hash"]
    assert r2["config"]["root_seed"] == 99


def test_replicas_csv_round_trips_floats(tmp_path):
    cfg_path = write_config(tmp_path, minimal_config(n_list=[64], replicas=120))
    cli.run_cli(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / "r"), "--raw"])
    result = json.loads((tmp_path / "r" / "result.json").read_text())
    with (tmp_path / "r" / "replicas.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 120
    assert rows[0]["n"] == "64"
    values = [float(row["y_value"]) for row in rows]  # repr round-trip is exact
    import numpy as np
    import hashlib

    assert hashlib.blake2b(np.array(values).tobytes(), digest_size=8).hexdigest() == \
        result["per_n"][0]["samples_hash"]


def test_result_json_round_trip(tmp_path):
    cfg_path = write_config(tmp_path, minimal_config(n_list=[64], replicas=150))
    cli.run_cli(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / "j")])
    text = (tmp_path / "j" / "result.json").read_text()
    obj = json.loads(text)
    assert json.dumps(obj, sort_keys=True, indent=1) + "\n" == text


def test_volterra_subcommand(tmp_path):
    code = cli.run_cli(["volterra", "--out", str(tmp_path / "v"), "--h", "0.08,0.04", "--t-max", "1.0"])
    assert code == 0
    with (tmp_path / "v" / "volterra_residuals.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert {row["case"] for row in rows} >= {"coveq", "scalar_v_equation"}
    finite_orders = [float(r["order_estimate"]) for r in rows if r["order_estimate"] != "nan"]
    assert all(1.5 <= o <= 2.5 for o in finite_orders)


def test_lemma_subcommand(tmp_path):
    cfg = minimal_config(n_list=[16, 32, 64, 128], replicas=120, t_grid=[1.0])
    code = cli.run_cli(
        ["lemma", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path / "l")]
    )
    assert code == 0
    with (tmp_path / "l" / "lemma_decay.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 20  # 5 statistics x 4 sizes
    assert {row["statistic"] for row in rows} == {"U_jj", "v_n", "v_n_pair", "v_n1", "v_n2"}


def test_report_subcommand(tmp_path, capsys):
    cfg_path = write_config(tmp_path, minimal_config(n_list=[64], replicas=150))
    cli.run_cli(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / "rep")])
    code = cli.run_cli(["report", str(tmp_path / "rep" / "result.json")])
    assert code == 0
    out = capsys.readouterr().out
    assert "prediction" in out
    assert "variance" in out


# ---------------------------------------------------------------------------
# exit codes and error channel
# ---------------------------------------------------------------------------


def test_exit_code_validation_error(tmp_path, capsys):
    bad = minimal_config()
    bad["spec"]["entry_dist"]["w"] = -2.0
    code = cli.run_cli(
        ["predict", "--config", str(write_config(tmp_path, bad)), "--out", str(tmp_path)]
    )
    assert code == 2
    err = capsys.readouterr().err.strip()
    payload = json.loads(err)  # single-line JSON on stderr
    assert payload["error"] == "ConfigError"
    assert payload["field"] == "config.spec.entry_dist.w"
    assert "\n" not in err


def test_exit_code_unknown_subcommand(capsys):
    assert cli.run_cli(["frobnicate"]) == 2
    assert cli.run_cli([]) == 2


def test_exit_code_unreadable_result(tmp_path, capsys):
    assert cli.run_cli(["report", str(tmp_path / "missing.json")]) == 1


def test_exit_code_numeric_failure(tmp_path, capsys, monkeypatch):
    from wignerlab.errors import NumericFailureError

    def explode(cfg, threads=None):
        raise NumericFailureError("eigendecomposition did not converge", seed=1, replica=3)

    monkeypatch.setattr(cli, "run_entry_experiment", explode)
    cfg_path = write_config(tmp_path, minimal_config())
    code = cli.run_cli(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / "x")])
    assert code == 3
    payload = json.loads(capsys.readouterr().err.strip())
    assert payload["error"] == "NumericFailureError"


def test_derive_seed_reexported():
    assert cli.derive_seed(0, []) == 16294208416658607535
    assert cli.splitmix64(0) == 16294208416658607535
