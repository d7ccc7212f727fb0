"""Command-line entry point: ``hte-select run|validate <config.json>``.

Exit codes: 0 success, 1 invalid configuration, 2 runtime failure (partial
outputs are kept and the manifest records the failure).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import Method, derive_rng
from .criteria import CriterionSpec, default_criteria
from .dgp import CovariateTable, load_covariates, synth_table
from .harness import (CellResult, ExperimentPlan, aggregate, congeniality_stats, learner_records,
                      run_plan, selector_records)

log = logging.getLogger("hte_select")

ENV_COVARIATES = "HTE_SELECT_COVARIATES"

LEARNER_COLUMNS = ["setting", "rho", "n", "seed", "strategy", "method", "pehe", "factual_rmse"]
SELECTOR_COLUMNS = ["setting", "rho", "n", "seed", "criterion", "selected_strategy", "selected_method",
                    "selected_pehe", "delta_pehe_fact"]
CONGENIALITY_COLUMNS = ["analysis", "method_filter", "rho", "criterion", "group", "proportion",
                        "n_conditioning", "n_selected"]
AGGREGATE_COLUMNS = ["table", "metric", "setting", "rho", "n", "key", "mean", "se", "count"]

PLAN_KEYS = {"settings", "rho_values", "n_trainval", "n_test", "seeds", "candidate_pool", "criteria", "folds"}
SYNTH_KEYS = {"enabled", "n_rows", "d_continuous", "d_binary"}
TOP_KEYS = {"plan", "covariate_csv", "synth", "output_dir", "workers", "master_seed"}


class ConfigError(ValueError):
    def __init__(self, problems):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


@dataclass
class SynthParams:
    enabled: bool = True
    n_rows: int = 4802
    d_continuous: int = 23
    d_binary: int = 5


@dataclass
class RunConfig:
    plan: ExperimentPlan
    covariate_csv: str | None = None
    synth: SynthParams = field(default_factory=SynthParams)
    output_dir: str = "results"
    workers: int = 1
    master_seed: int = 0

    def to_json(self) -> dict:
        p = self.plan
        return {
            "plan": {
                "settings": list(p.settings), "rho_values": list(p.rho_values),
                "n_trainval": list(p.n_trainval), "n_test": p.n_test, "seeds": p.seeds,
                "candidate_pool": p.candidate_pool, "criteria": [c.name for c in p.criteria],
                "folds": p.folds,
            },
            "covariate_csv": self.covariate_csv,
            "synth": vars(self.synth).copy(),
            "output_dir": self.output_dir,
            "workers": self.workers,
            "master_seed": self.master_seed,
        }


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float))) and not isinstance(v, bool)


def parse_config(raw: dict, overrides: dict | None = None) -> RunConfig:
    """Validate a decoded config document; every problem is reported with its field name."""
    problems = []
    if not isinstance(raw, dict):
        raise ConfigError(["config: top level must be a JSON object"])
    raw = {**raw, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    for k in sorted(set(raw) - TOP_KEYS):
        problems.append(f"{k}: unknown field")

    plan_raw = raw.get("plan", {})
    if not isinstance(plan_raw, dict):
        problems.append("plan: must be an object")
        plan_raw = {}
    for k in sorted(set(plan_raw) - PLAN_KEYS):
        problems.append(f"plan.{k}: unknown field")

    defaults = ExperimentPlan.__dataclass_fields__
    kwargs = {}

    def listed(name, check, msg):
        v = plan_raw.get(name, defaults[name].default)
        if not isinstance(v, (list, tuple)) or not v:
            problems.append(f"{name}: must be a non-empty list")
            return
        bad = [x for x in v if not check(x)]
        if bad:
            problems.append(f"{name}: {msg}, got {bad}")
            return
        kwargs[name] = tuple(v)

    listed("settings", lambda s: s in ("A", "B", "C", "D"), "entries must be one of A, B, C, D")
    listed("rho_values", lambda r: _is_num(r) and 0 <= r <= 1, "entries must lie in [0, 1]")
    listed("n_trainval", lambda n: _is_int(n) and n >= 30, "entries must be integers >= 30")
    if "rho_values" in kwargs:
        kwargs["rho_values"] = tuple(float(r) for r in kwargs["rho_values"])

    n_test = plan_raw.get("n_test")
    if n_test is not None and not (_is_int(n_test) and n_test >= 30):
        problems.append(f"n_test: must be an integer >= 30 or null, got {n_test!r}")
    kwargs["n_test"] = n_test
    seeds = plan_raw.get("seeds", defaults["seeds"].default)
    if not (_is_int(seeds) and seeds >= 1):
        problems.append(f"seeds: must be a positive integer, got {seeds!r}")
    kwargs["seeds"] = seeds
    pool = plan_raw.get("candidate_pool", "full")
    if pool not in ("full", "indirect"):
        problems.append(f"candidate_pool: must be 'full' or 'indirect', got {pool!r}")
    kwargs["candidate_pool"] = pool
    folds = plan_raw.get("folds", 5)
    if not (_is_int(folds) and folds >= 2):
        problems.append(f"folds: must be an integer >= 2, got {folds!r}")
    kwargs["folds"] = folds

    crit = plan_raw.get("criteria", "all")
    if crit == "all":
        kwargs["criteria"] = tuple(default_criteria())
    elif isinstance(crit, list) and crit:
        specs = []
        for name in crit:
            try:
                specs.append(CriterionSpec.parse(str(name)))
            except ValueError as exc:
                problems.append(f"criteria: {exc}")
        names = [s.name for s in specs]
        if "factual" not in names:
            problems.append("criteria: must include 'factual'")
        if len(set(names)) != len(names):
            problems.append("criteria: duplicate entries")
        kwargs["criteria"] = tuple(specs)
    else:
        problems.append("criteria: must be \"all\" or a non-empty list of criterion names")

    master_seed = raw.get("master_seed", 0)
    if not _is_int(master_seed) or master_seed < 0:
        problems.append(f"master_seed: must be a nonnegative integer, got {master_seed!r}")
    workers = raw.get("workers", 1)
    if not _is_int(workers) or workers < 1:
        problems.append(f"workers: must be an integer >= 1, got {workers!r}")
    output_dir = raw.get("output_dir", "results")
    if not isinstance(output_dir, str) or not output_dir:
        problems.append("output_dir: must be a non-empty path")

    synth_raw = raw.get("synth", {})
    synth = SynthParams()
    if not isinstance(synth_raw, dict):
        problems.append("synth: must be an object")
        synth_raw = {}
    for k in sorted(set(synth_raw) - SYNTH_KEYS):
        problems.append(f"synth.{k}: unknown field")
    if "enabled" in synth_raw:
        if not isinstance(synth_raw["enabled"], bool):
            problems.append("synth.enabled: must be true or false")
        else:
            synth.enabled = synth_raw["enabled"]
    for k, lo in (("n_rows", 30), ("d_continuous", 4), ("d_binary", 0)):
        if k in synth_raw:
            if not _is_int(synth_raw[k]) or synth_raw[k] < lo:
                problems.append(f"synth.{k}: must be an integer >= {lo}")
            else:
                setattr(synth, k, synth_raw[k])

    covariate_csv = raw.get("covariate_csv") or os.environ.get(ENV_COVARIATES) or None
    if covariate_csv is not None and not Path(covariate_csv).is_file():
        problems.append(f"covariate_csv: file {covariate_csv} does not exist")
    if covariate_csv is None and not synth.enabled:
        problems.append(f"covariate_csv: missing (set it or {ENV_COVARIATES}, or enable synth)")
    if covariate_csv is None and synth.enabled and "n_trainval" in kwargs:
        need = max(kwargs["n_trainval"]) + (n_test if _is_int(n_test) else max(kwargs["n_trainval"]) // 2)
        if need > synth.n_rows:
            problems.append(f"synth.n_rows: {synth.n_rows} rows cannot supply {need} units per dataset")

    if problems:
        raise ConfigError(problems)
    try:
        plan = ExperimentPlan(master_seed=master_seed, **kwargs)
    except ValueError as exc:
        raise ConfigError([str(exc)]) from None
    return RunConfig(plan, covariate_csv, synth, output_dir, workers, master_seed)


def load_config(path, overrides=None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc}"]) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: invalid JSON at line {exc.lineno}: {exc.msg}"]) from None
    return parse_config(raw, overrides)


def resolve_covariates(cfg: RunConfig) -> tuple[CovariateTable, dict]:
    if cfg.covariate_csv:
        table = load_covariates(cfg.covariate_csv)
        digest = hashlib.sha256(Path(cfg.covariate_csv).read_bytes()).hexdigest()
        return table, {"source": "csv", "path": str(cfg.covariate_csv), "sha256": digest,
                       "rows": int(table.values.shape[0]), "continuous": int(table.continuous.sum())}
    s = cfg.synth
    table = synth_table(s.n_rows, s.d_continuous, s.d_binary, rng=derive_rng(cfg.master_seed, "covariates"))
    return table, {"source": "synthetic", **vars(s)}


# -- output -----------------------------------------------------------------

def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, columns, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) for c in columns])


def congeniality_rows(cells: list[CellResult], criteria) -> list[dict]:
    rows = []
    rhos = sorted({c.rho for c in cells})
    for analysis, method in (("strategy", Method.GB), ("method", None)):
        for rho in [None, *rhos]:
            for r in congeniality_stats(cells, analysis, method=method, rho=rho, criteria=criteria):
                rows.append(dict(analysis=analysis, method_filter=method.value if method else "all",
                                 rho="all" if rho is None else rho, criterion=r.criterion, group=r.group,
                                 proportion=r.proportion, n_conditioning=r.n_conditioning,
                                 n_selected=r.n_selected))
    return rows


def aggregate_rows(learners: list[dict], selectors: list[dict]) -> list[dict]:
    rows = []
    for table, records, key_fn, metrics in (
        ("learners", learners, lambda r: f"{r['strategy']}-{r['method']}", ("pehe", "factual_rmse")),
        ("selectors", selectors, lambda r: r["criterion"], ("selected_pehe", "delta_pehe_fact")),
    ):
        keyed = [{**r, "key": key_fn(r)} for r in records]
        for metric in metrics:
            for a in aggregate(keyed, metric, ("setting", "rho", "n", "key")):
                setting, rho, n, key = a.keys
                rows.append(dict(table=table, metric=metric, setting=setting, rho=rho, n=n, key=key,
                                 mean=a.mean, se=a.se, count=a.count))
    return rows


def write_outputs(out: Path, cells: list[CellResult], cfg: RunConfig) -> None:
    out.mkdir(parents=True, exist_ok=True)
    criteria = [c.name for c in cfg.plan.criteria]
    learners = learner_records(cells)
    selectors = selector_records(cells, criteria)
    write_csv(out / "learners.csv", LEARNER_COLUMNS, learners)
    write_csv(out / "selectors.csv", SELECTOR_COLUMNS, selectors)
    write_csv(out / "congeniality.csv", CONGENIALITY_COLUMNS, congeniality_rows(cells, criteria) if cells else [])
    write_csv(out / "aggregates.csv", AGGREGATE_COLUMNS, aggregate_rows(learners, selectors))


def cmd_validate(cfg: RunConfig) -> int:
    print(json.dumps(cfg.to_json(), indent=2))
    print(f"cells: {len(cfg.plan.cell_keys())}, criteria: {len(cfg.plan.criteria)}")
    return 0


def cmd_run(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: output_dir: cannot create {out}: {exc}", file=sys.stderr)
        return 1
    started = time.time()
    cells: list[CellResult] = []
    manifest = {
        "version": __version__,
        "config": cfg.to_json(),
        "master_seed": cfg.master_seed,
        "n_cells": len(cfg.plan.cell_keys()),
        "environment": {"python": platform.python_version(), "numpy": np.__version__},
    }
    status, error, code = "ok", None, 0
    try:
        covariates, manifest["covariates"] = resolve_covariates(cfg)
        run_plan(cfg.plan, covariates, workers=cfg.workers, on_result=cells.append)
    except Exception as exc:  # noqa: BLE001 - keep whatever finished
        log.exception("run failed")
        status, error, code = "failed", f"{type(exc).__name__}: {exc}", 2
    write_outputs(out, cells, cfg)
    manifest.update(status=status, error=error, cells_completed=len(cells),
                    failures={"|".join(map(str, c.key)): c.failures for c in cells if c.failures},
                    wall_time_seconds=round(time.time() - started, 3),
                    finished_at=time.strftime("%Y-%m-%dT%H:%M:%S%z"))
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    if code:
        print(f"error: {error} (partial outputs in {out})", file=sys.stderr)
    else:
        print(f"wrote {len(cells)} cells to {out}")
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hte-select", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run the experiment plan"), ("validate", "check a config without running")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config", help="JSON config file")
        sp.add_argument("--workers", type=int, help="parallel worker processes")
        sp.add_argument("--seed", type=int, help="override master_seed")
        sp.add_argument("--output", help="override output_dir")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"workers": args.workers, "master_seed": args.seed, "output_dir": args.output}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return 1
    if cfg.plan.seeds < 2:
        log.warning("seeds=%d: SE unavailable", cfg.plan.seeds)
    if args.command == "validate":
        return cmd_validate(cfg)
    return cmd_run(cfg)


if __name__ == "__main__":
    sys.exit(main())
