"""Seeded experiment runner: fit the candidate pool, score every criterion,
record selections, and summarize across seeds."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .base_learners import DEFAULT_GRID, HyperGrid
from .core import Method, Strategy, derive_rng, derive_seed
from .criteria import CriterionSpec, ValidationContext, default_criteria, oracle_score, select_best
from .dgp import SETTINGS, CovariateTable, DgpConfig, generate_dataset
from .meta_learners import fit_cate_estimator

log = logging.getLogger(__name__)

POOLS = ("full", "indirect")
ALL_CANDIDATES = tuple((s, m) for s in Strategy for m in Method)


def candidate_name(strategy: Strategy, method: Method) -> str:
    return f"{strategy.value}-{method.value}"


def pool_candidates(pool: str) -> tuple[tuple[Strategy, Method], ...]:
    if pool == "full":
        return ALL_CANDIDATES
    if pool == "indirect":
        return tuple(c for c in ALL_CANDIDATES if c[0].indirect)
    raise ValueError(f"unknown candidate pool {pool!r}")


@dataclass(frozen=True)
class ExperimentPlan:
    settings: tuple[str, ...] = ("A", "B", "C", "D")
    rho_values: tuple[float, ...] = (0.0, 0.1, 0.3)
    n_trainval: tuple[int, ...] = (1000,)
    seeds: int = 20
    candidate_pool: str = "full"
    criteria: tuple[CriterionSpec, ...] = field(default_factory=lambda: tuple(default_criteria()))
    n_test: int | None = None  # None: half of n_trainval
    master_seed: int = 0
    folds: int = 5
    grid: HyperGrid = DEFAULT_GRID

    def __post_init__(self):
        for name in ("settings", "rho_values", "n_trainval", "criteria"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        for s in self.settings:
            if s not in SETTINGS:
                raise ValueError(f"settings: unknown setting {s!r}")
        for r in self.rho_values:
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"rho: {r} is outside [0, 1]")
        for n in self.n_trainval:
            if n < 30:
                raise ValueError(f"n_trainval: {n} is below 30")
        if self.n_test is not None and self.n_test < 30:
            raise ValueError(f"n_test: {self.n_test} is below 30")
        if self.seeds < 1:
            raise ValueError("seeds must be at least 1")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        pool_candidates(self.candidate_pool)
        names = [c.name for c in self.criteria]
        if len(set(names)) != len(names):
            raise ValueError("criteria contain duplicates")
        if "factual" not in names:
            raise ValueError("criteria must include 'factual' (the reference for delta_pehe_fact)")

    def test_size(self, n: int) -> int:
        return self.n_test if self.n_test is not None else n // 2

    def cell_keys(self) -> list[tuple[str, float, int, int]]:
        return [(s, r, n, k) for s in sorted(self.settings) for r in sorted(self.rho_values)
                for n in sorted(self.n_trainval) for k in range(self.seeds)]


@dataclass
class CellResult:
    """Everything measured in one (setting, rho, n, seed) cell.

    Scores are kept per candidate so a selection can be recomputed for any
    sub-pool; ``None`` marks a failed or non-evaluable candidate.
    """

    setting: str
    rho: float
    n: int
    seed: int
    candidates: tuple[str, ...]
    pehe: list
    factual_rmse: list
    scores: dict  # criterion name -> list of scores aligned with candidates
    failures: dict = field(default_factory=dict)

    @property
    def key(self):
        return (self.setting, self.rho, self.n, self.seed)

    def pool_mask(self, pool=None, method: Method | None = None) -> list[bool]:
        allowed = {candidate_name(*c) for c in pool_candidates(pool or "full")}
        return [name in allowed and (method is None or name.endswith("-" + Method(method).value))
                for name in self.candidates]

    def select(self, criterion: str, pool=None, method: Method | None = None) -> int | None:
        """Index of the candidate chosen by ``criterion`` within the sub-pool, or None."""
        raw = self.pehe if criterion == "oracle" else self.scores[criterion]
        mask = self.pool_mask(pool, method)
        masked = [s if ok and self.pehe[i] is not None else None for i, (s, ok) in enumerate(zip(raw, mask))]
        try:
            return select_best(masked)
        except ValueError:
            return None

    def oracle_choice(self, pool=None, method=None) -> int | None:
        return self.select("oracle", pool, method)

    def selected_pehe(self, criterion: str, pool=None, method=None) -> float | None:
        i = self.select(criterion, pool, method)
        return None if i is None else self.pehe[i]

    def check_oracle_dominance(self, pool=None, method=None) -> None:
        best = self.selected_pehe("oracle", pool, method)
        for name in self.scores:
            chosen = self.selected_pehe(name, pool, method)
            if chosen is not None and chosen < best:
                raise AssertionError(f"criterion {name} beat the oracle in cell {self.key}")


def pehe(tau_hat, tau_true) -> float:
    tau_hat = np.asarray(tau_hat, dtype=float)
    tau_true = np.asarray(tau_true, dtype=float)
    if tau_hat.shape != tau_true.shape or tau_hat.size == 0:
        raise ValueError("pehe needs two non-empty vectors of equal length")
    return float(np.sqrt(np.mean((tau_hat - tau_true) ** 2)))


def delta_pehe_fact(criterion_pehe: float, factual_pehe: float) -> float:
    return criterion_pehe - factual_pehe


def _cell_config(plan: ExperimentPlan, setting, rho, n, seed) -> DgpConfig:
    # settings share the data stream: covariates, coefficients and noise are
    # paired across A-D, only representation and confounding differ
    data_seed = derive_seed(plan.master_seed, "data", float(rho), int(n), int(seed))
    return DgpConfig.for_setting(setting, rho=rho, n_trainval=n, n_test=plan.test_size(n), seed=data_seed)


def run_cell(setting: str, rho: float, n: int, seed: int, plan: ExperimentPlan,
             covariates: CovariateTable) -> CellResult:
    sim = generate_dataset(_cell_config(plan, setting, rho, n, seed), covariates)
    cell_key = (plan.master_seed, setting, float(rho), int(n), int(seed))
    test, truth = sim.test, sim.truth["test"]

    names, fitted, failures = [], [], {}
    for strategy, method in pool_candidates(plan.candidate_pool):
        name = candidate_name(strategy, method)
        names.append(name)
        try:
            est = fit_cate_estimator(strategy, method, sim.train, rng=derive_rng(*cell_key, "fit", name),
                                     grid=plan.grid)
        except Exception as exc:  # noqa: BLE001 - a failed fit drops the candidate, not the cell
            log.warning("cell %s: candidate %s failed: %s", cell_key[1:], name, exc)
            failures[name] = str(exc)
            est = None
        fitted.append(est)

    pehes = [None if e is None else oracle_score(e, test.X, truth.tau) for e in fitted]
    fact = []
    for e in fitted:
        if e is None or not e.indirect:
            fact.append(None)
            continue
        mu0, mu1 = e.predict_po(test.X)
        fact.append(float(np.sqrt(np.mean((test.Y - np.where(test.A == 1, mu1, mu0)) ** 2))))

    ctx = ValidationContext(sim.val, seed=derive_seed(*cell_key, "validate"), grid=plan.grid, folds=plan.folds)
    scores = {}
    for spec in plan.criteria:
        if spec.kind == "oracle":
            scores[spec.name] = list(pehes)
            continue
        try:
            scores[spec.name] = ctx.score(spec, fitted)
        except Exception as exc:  # noqa: BLE001
            log.warning("cell %s: criterion %s failed: %s", cell_key[1:], spec.name, exc)
            failures[spec.name] = str(exc)
            scores[spec.name] = [None] * len(fitted)

    cell = CellResult(setting, float(rho), int(n), int(seed), tuple(names), pehes, fact, scores, failures)
    cell.check_oracle_dominance()
    return cell


def _run_key(args):
    key, plan, covariates = args
    return run_cell(*key, plan, covariates)


def run_plan(plan: ExperimentPlan, covariates: CovariateTable, workers: int = 1,
             on_result=None) -> list[CellResult]:
    """Run every cell; results come back in sorted cell-key order regardless of ``workers``."""
    keys = plan.cell_keys()
    results = []
    if workers <= 1:
        for i, key in enumerate(keys):
            results.append(run_cell(*key, plan, covariates))
            log.info("cell %d/%d done: %s", i + 1, len(keys), key)
            if on_result:
                on_result(results[-1])
        return results
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for i, cell in enumerate(pool.map(_run_key, [(k, plan, covariates) for k in keys])):
            results.append(cell)
            log.info("cell %d/%d done: %s", i + 1, len(keys), cell.key)
            if on_result:
                on_result(cell)
    return results


# -- long-format records ---------------------------------------------------

def learner_records(cells: Iterable[CellResult]) -> list[dict]:
    rows = []
    for c in cells:
        for name, p, f in zip(c.candidates, c.pehe, c.factual_rmse):
            strategy, method = name.split("-")
            rows.append(dict(setting=c.setting, rho=c.rho, n=c.n, seed=c.seed, strategy=strategy,
                             method=method, pehe=p, factual_rmse=f))
    return rows


def selector_records(cells: Iterable[CellResult], criteria: Sequence[str] | None = None,
                     pool=None, method=None) -> list[dict]:
    rows = []
    for c in cells:
        names = list(criteria) if criteria is not None else ["oracle", *[k for k in c.scores if k != "oracle"]]
        fact = c.selected_pehe("factual", pool, method)
        for name in names:
            i = c.select(name, pool, method)
            p = None if i is None else c.pehe[i]
            strategy, meth = (None, None) if i is None else c.candidates[i].split("-")
            delta = None if p is None or fact is None else delta_pehe_fact(p, fact)
            rows.append(dict(setting=c.setting, rho=c.rho, n=c.n, seed=c.seed, criterion=name,
                             selected_strategy=strategy, selected_method=meth, selected_pehe=p,
                             delta_pehe_fact=delta))
    return rows


@dataclass(frozen=True)
class AggregateRow:
    keys: tuple
    mean: float
    se: float | None
    count: int


def aggregate(records: Iterable[dict], metric: str, group_keys: Sequence[str]) -> list[AggregateRow]:
    """Mean and standard error (sample SD / sqrt(k)) of ``metric`` per group.

    Missing values are skipped; ``se`` is None for groups with fewer than 2 values.
    """
    groups = defaultdict(list)
    for r in records:
        v = r[metric]
        if v is None or (isinstance(v, float) and math.isnan(v)):
            continue
        groups[tuple(r[k] for k in group_keys)].append(float(v))
    out = []
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
        vals = np.array(groups[key])
        se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) >= 2 else None
        out.append(AggregateRow(key, float(vals.mean()), se, len(vals)))
    return out


@dataclass(frozen=True)
class CongenialityRow:
    analysis: str  # "strategy" or "method"
    criterion: str
    group: str
    proportion: float | None  # None when no cell conditions on this group
    n_conditioning: int
    n_selected: int


def _group_of(name: str, group_by: str) -> str:
    strategy, method = name.split("-")
    return strategy if group_by == "strategy" else method


def congeniality_stats(cells: Sequence[CellResult], group_by: str = "strategy", method: Method | None = None,
                       pool=None, rho: float | None = None,
                       criteria: Sequence[str] | None = None) -> list[CongenialityRow]:
    """How often a criterion picks group ``g`` in cells whose oracle picked something else.

    ``method`` restricts the candidate pool (the strategy analysis is meant to
    run on one method's implementations); ``rho`` keeps only matching cells.
    """
    if group_by not in ("strategy", "method"):
        raise ValueError("group_by must be 'strategy' or 'method'")
    if not cells:
        raise ValueError("need at least one cell")
    cells = [c for c in cells if rho is None or c.rho == rho]
    if criteria is None:
        criteria = [k for k in cells[0].scores] if cells else []
    groups = [s.value for s in Strategy] if group_by == "strategy" else [m.value for m in Method]
    rows = []
    for crit in criteria:
        for g in groups:
            cond = hits = 0
            for c in cells:
                top = c.oracle_choice(pool, method)
                chosen = c.select(crit, pool, method)
                if top is None or chosen is None or _group_of(c.candidates[top], group_by) == g:
                    continue
                cond += 1
                hits += _group_of(c.candidates[chosen], group_by) == g
            rows.append(CongenialityRow(group_by, crit, g, hits / cond if cond else None, cond, hits))
    return rows
