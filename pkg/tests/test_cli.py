from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from hte_select.cli import ENV_COVARIATES, load_config, main, parse_config

ROOT = Path(__file__).resolve().parents[1]
TINY_CRITERIA = ["oracle", "factual", "wfactual", "plug_S_LR", "pseudo_DR_LR", "match"]


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def tiny(out, **plan):
    base = {"settings": ["B"], "rho_values": [0.1], "n_trainval": [60], "n_test": 30, "seeds": 2,
            "criteria": TINY_CRITERIA}
    base.update(plan)
    return {"plan": base, "output_dir": str(out), "synth": {"n_rows": 400, "d_continuous": 6, "d_binary": 2}}


@pytest.fixture(autouse=True)
def no_env(monkeypatch):
    monkeypatch.delenv(ENV_COVARIATES, raising=False)


def test_committed_configs_validate(capsys):
    for name in ("default.json", "smoke.json"):
        assert main(["validate", str(ROOT / "configs" / name)]) == 0
    cfg = load_config(ROOT / "configs" / "default.json")
    assert len(cfg.plan.cell_keys()) == 240 and cfg.plan.test_size(1000) == 500


def test_validate_rejects_rho(tmp_path, capsys):
    assert main(["validate", str(write(tmp_path, {"plan": {"rho_values": [1.5]}}))]) == 1
    assert "rho" in capsys.readouterr().err


def test_validate_single_seed_warns(tmp_path, caplog):
    assert main(["validate", str(write(tmp_path, {"plan": {"seeds": 1}}))]) == 0
    assert "SE unavailable" in caplog.text


def test_missing_covariates_without_fallback(tmp_path, capsys):
    assert main(["validate", str(write(tmp_path, {"synth": {"enabled": False}}))]) == 1
    assert "covariate_csv" in capsys.readouterr().err


@pytest.mark.parametrize("doc, field", [
    ({"plan": {"settings": ["Z"]}}, "settings"),
    ({"plan": {"seeds": 0}}, "seeds"),
    ({"plan": {"criteria": ["plug_Q_LR", "factual"]}}, "criteria"),
    ({"plan": {"criteria": ["oracle"]}}, "criteria"),
    ({"workers": 0}, "workers"),
    ({"bogus": 1}, "bogus"),
    ({"covariate_csv": "/nonexistent.csv"}, "covariate_csv"),
])
def test_field_level_errors(tmp_path, capsys, doc, field):
    assert main(["validate", str(write(tmp_path, doc))]) == 1
    assert field in capsys.readouterr().err


def test_invalid_json(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["validate", str(p)]) == 1


def test_env_covariates_fallback(tmp_path, monkeypatch):
    csv_path = tmp_path / "cov.csv"
    csv_path.write_text("a,b\n" + "\n".join(f"{i * 0.37},{i % 2}" for i in range(200)) + "\n")
    monkeypatch.setenv(ENV_COVARIATES, str(csv_path))
    cfg = parse_config({"synth": {"enabled": False}})
    assert cfg.covariate_csv == str(csv_path)


def test_overrides():
    cfg = parse_config({"master_seed": 3}, {"master_seed": 9, "workers": 2, "output_dir": "x"})
    assert (cfg.master_seed, cfg.workers, cfg.output_dir, cfg.plan.master_seed) == (9, 2, "x", 9)


@pytest.fixture(scope="module")
def run_twice(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    outs = []
    for i in range(2):
        out = base / f"out{i}"
        cfg = base / f"cfg{i}.json"
        cfg.write_text(json.dumps(tiny(out)))
        assert main(["run", str(cfg)]) == 0
        outs.append(out)
    return outs


def test_run_writes_all_outputs(run_twice):
    out = run_twice[0]
    for name in ("learners.csv", "selectors.csv", "congeniality.csv", "aggregates.csv", "manifest.json"):
        assert (out / name).is_file()
    with (out / "selectors.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 * 1 * 2 * len(TINY_CRITERIA)
    assert list(rows[0]) == ["setting", "rho", "n", "seed", "criterion", "selected_strategy", "selected_method",
                             "selected_pehe", "delta_pehe_fact"]
    with (out / "learners.csv").open() as fh:
        header = fh.readline().strip().split(",")
    assert header == ["setting", "rho", "n", "seed", "strategy", "method", "pehe", "factual_rmse"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok" and manifest["master_seed"] == 0
    assert manifest["config"]["plan"]["criteria"] == TINY_CRITERIA
    assert "wall_time_seconds" in manifest and manifest["version"]


def test_run_is_byte_identical(run_twice):
    a, b = run_twice
    for name in ("learners.csv", "selectors.csv", "congeniality.csv", "aggregates.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_csv_format(run_twice):
    raw = (run_twice[0] / "learners.csv").read_bytes()
    assert b"\r\n" not in raw
    rows = list(csv.DictReader(raw.decode("utf-8").splitlines()))
    value = rows[0]["pehe"]
    assert float(format(float(value), ".17g")) == float(value)
    assert rows[0]["rho"] == format(0.1, ".17g")


def test_manifest_reproduces_run(run_twice, tmp_path):
    manifest = json.loads((run_twice[0] / "manifest.json").read_text())
    config = manifest["config"]
    config["output_dir"] = str(tmp_path / "again")
    assert main(["run", str(write(tmp_path, config))]) == 0
    assert (tmp_path / "again" / "selectors.csv").read_bytes() == (run_twice[0] / "selectors.csv").read_bytes()


def test_runtime_failure_keeps_partial_outputs(tmp_path, monkeypatch, capsys):
    import hte_select.harness as h

    real = h.run_cell
    calls = []

    def failing(*args, **kwargs):
        calls.append(args)
        if len(calls) == 2:
            raise RuntimeError("boom")
        return real(*args, **kwargs)

    monkeypatch.setattr(h, "run_cell", failing)
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, tiny(out)))]) == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "failed" and "boom" in manifest["error"]
    assert manifest["cells_completed"] == 1
    assert len((out / "selectors.csv").read_text().splitlines()) == 1 + len(TINY_CRITERIA)
