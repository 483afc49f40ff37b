"""Experiment orchestration: a parameter grid x repeated seeded runs of
one scoring method over a generated dataset, with per-cell artifacts and
a deterministic summary table.

Layout under the output directory:

    <outdir>/<method>/<grid-hash>/run<k>/scores.csv
    <outdir>/<method>/<grid-hash>/run<k>/metrics.json
    <outdir>/summary.csv

Cells are independent and may execute concurrently; the summary is
assembled after all cells finish, in grid-then-run order, so re-running a
plan reproduces summary.csv byte for byte.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as gio
from .cad import (TaskScaling, fit_cad_model, rwcad_scores, rwcad_scores_loo,
                  scale_scores, softhad_score, weighted_knn_scores,
                  weighted_knn_scores_loo)
from .datasets import (CoreSpec, MixtureSpec, flip_labels, gen_core_dataset,
                       gen_gauss_mixture, load_dataset_spec, parse_config_text)
from .errors import InputError
from .graph import GraphConfig, PointSet, build_graph
from .harmonic import SoftConfig
from .metrics import auroc

METHODS = ("rwcad", "knn", "softhad")


@dataclass(frozen=True)
class ExperimentPlan:
    method: str
    grid: dict[str, list]
    dataset: str
    n_samples: int = 1000
    flip_fraction: float = 0.03
    n_runs: int = 1
    base_seed: int = 0
    outdir: str = "plan-out"

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"method must be one of {METHODS}")
        if self.n_runs < 1:
            raise InputError("n_runs must be >= 1")
        if not self.grid:
            raise InputError("parameter grid must be non-empty")


def plan_from_config(path: str | Path, outdir: str | None = None) -> ExperimentPlan:
    path = Path(path)
    cfg = parse_config_text(path.read_text())
    grid = {}
    for key, value in cfg.items():
        if key.startswith("grid."):
            grid[key[len("grid."):]] = value if isinstance(value, list) else [value]
    if not grid:
        grid = {"default": [0]}
    dataset = cfg.get("dataset")
    if dataset is None:
        raise InputError("plan config needs a 'dataset' key")
    dataset_path = (path.parent / dataset).resolve()
    return ExperimentPlan(
        method=cfg.get("method", "rwcad"),
        grid=grid,
        dataset=str(dataset_path),
        n_samples=int(cfg.get("n_samples", 1000)),
        flip_fraction=float(cfg.get("flip_fraction", 0.03)),
        n_runs=int(cfg.get("n_runs", 1)),
        base_seed=int(cfg.get("base_seed", 0)),
        outdir=str(outdir if outdir is not None else cfg.get("outdir", "plan-out")),
    )


def grid_points(grid: dict[str, list]) -> list[dict]:
    keys = sorted(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def grid_hash(params: dict) -> str:
    canon = json.dumps(params, sort_keys=True)
    return hashlib.sha1(canon.encode()).hexdigest()[:10]


def score_method(method: str, params: dict, spec, seed: int, n_samples: int,
                 flip_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    """One run: generate, corrupt, score.  Returns (scores, binary truth)."""
    if isinstance(spec, MixtureSpec):
        clean = gen_gauss_mixture(spec, n_samples, seed)
        corrupted, mask = flip_labels(clean, flip_fraction, seed + 1_000_003)
        scores = _transductive_scores(method, params, corrupted)
        return scores, mask
    if isinstance(spec, CoreSpec):
        train, test, truth = gen_core_dataset(spec, seed)
        scores = _train_test_scores(method, params, train, test)
        return scores, truth.anomaly_mask
    raise InputError(f"unsupported dataset spec {type(spec).__name__}")


def _sigma(params: dict) -> float | None:
    return float(params["sigma"]) if "sigma" in params else None


def _transductive_scores(method: str, params: dict, ps: PointSet) -> np.ndarray:
    if method == "rwcad":
        return rwcad_scores_loo(ps, float(params.get("lambda", 0.01)), _sigma(params),
                                priors=str(params.get("priors", "empirical")))
    if method == "knn":
        return weighted_knn_scores_loo(ps, _sigma(params))
    cfg = SoftConfig(gamma_g=float(params.get("gamma_g", 1.0)),
                     c_l=float(params.get("c_l", 1.0)),
                     c_u=float(params.get("c_l", 1.0)))
    gcfg = GraphConfig(mode="knn", k_neighbors=int(params.get("knn", 10)),
                       sigma=_sigma(params))
    return softhad_score(build_graph(ps, gcfg), ps.labels, cfg)


def _train_test_scores(method: str, params: dict, train: PointSet,
                       test: PointSet) -> np.ndarray:
    if method in ("rwcad", "knn"):
        model = fit_cad_model(train, float(params.get("lambda", 0.01)), _sigma(params),
                              priors=str(params.get("priors", "empirical")))
        if method == "rwcad":
            return rwcad_scores(model, test.points, test.labels)
        return weighted_knn_scores(model, test.points, test.labels)
    cfg = SoftConfig(gamma_g=float(params.get("gamma_g", 1.0)),
                     c_l=float(params.get("c_l", 1.0)),
                     c_u=float(params.get("c_l", 1.0)))
    combined = PointSet(np.vstack([train.points, test.points]),
                        np.concatenate([train.labels, test.labels]),
                        train.feature_weights)
    gcfg = GraphConfig(mode="knn", k_neighbors=int(params.get("knn", 10)),
                       sigma=_sigma(params))
    scores = softhad_score(build_graph(combined, gcfg), combined.labels, cfg)
    return scores[train.n:]


@dataclass
class CellResult:
    params: dict
    run: int
    seed: int
    status: str
    auroc: float | None
    n: int
    error: str = ""


def _run_cell(plan: ExperimentPlan, spec, params: dict, run: int, outdir: Path) -> CellResult:
    seed = plan.base_seed + run
    cell_dir = outdir / plan.method / grid_hash(params) / f"run{run}"
    cell_dir.mkdir(parents=True, exist_ok=True)
    try:
        scores, truth = score_method(plan.method, params, spec, seed,
                                     plan.n_samples, plan.flip_fraction)
        scaling = TaskScaling.fit(scores)
        gio.write_scores_csv(cell_dir / "scores.csv", scores, scale_scores(scaling, scores))
        value = auroc(scores, truth)
        gio.write_metrics_json(cell_dir / "metrics.json", {
            "auroc": value, "n": int(scores.size), "method": plan.method,
            "params": params, "seed": seed,
            "flips_before_split": True,
        })
        return CellResult(params, run, seed, "ok", value, int(scores.size))
    except Exception as exc:  # recorded per-row, aggregation skips failures
        (cell_dir / "error.txt").write_text(
            "".join(traceback.format_exception(exc)))
        return CellResult(params, run, seed, "failed", None, 0, error=str(exc))


def run_plan(plan: ExperimentPlan, threads: int = 1) -> list[CellResult]:
    """Execute every (grid point, run) cell and write summary.csv."""
    spec = load_dataset_spec(plan.dataset)
    outdir = Path(plan.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    points = grid_points(plan.grid)
    cells = [(params, run) for params in points for run in range(plan.n_runs)]
    workers = threads if threads > 0 else (os.cpu_count() or 1)
    if workers == 1:
        results = [_run_cell(plan, spec, params, run, outdir) for params, run in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, plan, spec, params, run, outdir)
                       for params, run in cells]
            results = [f.result() for f in futures]
    _write_summary(outdir / "summary.csv", plan, points, results)
    return results


def _write_summary(path: Path, plan: ExperimentPlan, points: list[dict],
                   results: list[CellResult]) -> None:
    keys = sorted(plan.grid)
    lines = ["method," + ",".join(keys) + ",run,seed,status,auroc,n"]
    by_point: dict[str, list[CellResult]] = {}
    for res in results:
        by_point.setdefault(grid_hash(res.params), []).append(res)
    for params in points:
        group = sorted(by_point.get(grid_hash(params), []), key=lambda r: r.run)
        prefix = plan.method + "," + ",".join(_fmt_param(params[k]) for k in keys)
        for res in group:
            value = gio.fmt17(res.auroc) if res.auroc is not None else ""
            lines.append(f"{prefix},{res.run},{res.seed},{res.status},{value},{res.n}")
        oks = [r.auroc for r in group if r.status == "ok"]
        mean = float(np.mean(oks)) if oks else float("nan")
        var = float(np.var(oks, ddof=1)) if len(oks) > 1 else 0.0
        lines.append(f"{prefix},mean,,aggregate,{gio.fmt17(mean)},{len(oks)}")
        lines.append(f"{prefix},variance,,aggregate,{gio.fmt17(var)},{len(oks)}")
    path.write_text("\n".join(lines) + "\n")


def _fmt_param(v) -> str:
    if isinstance(v, float):
        return gio.fmt17(v)
    return str(v)
