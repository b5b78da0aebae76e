"""
Replication harness for the two simulated experiments.

For every cell (one Example1Spec / Example2Spec without its seed) and every
replication r, a dataset is drawn from the seed derived from (base_seed, r),
each requested estimator runs on that same dataset, and its loss is recorded:
    example1: ||lambda_hat - lambda*||^2
    example2: (lambda_hat - lambda*)' G (lambda_hat - lambda*), G = rectangle_gram(k)

Replications are spread over a multiprocessing pool and merged after sorting
by (cell, replication), so the report does not depend on the worker count.
A diverged EWA run is counted and left out of the mean.

Usage:
    python cli.py bench example1 --n 100 --m 100,200,500 --s 5,10,15 --reps 50 --out table1.csv
"""

import sys
import json
import time
import itertools
import warnings
from dataclasses import dataclass, field, replace
from multiprocessing import Pool

import numpy as np
import pandas as pd
from tqdm import tqdm

import settings
from regression_data import build_gram, coefficient_loss, functional_loss, rectangle_gram, support_recovery
from estimators import EwaConfig, LassoConfig, ewa_fit, lasso_fit, lasso_gauss_ideal
from langevin_sampler import SamplerConfig
from datagen import Example1Spec, Example2Spec, generate

ESTIMATORS = ("ewa", "lasso", "lasso_gauss")

CSV_COLUMNS = [
    "experiment", "n", "M", "S_or_sigma", "estimator",
    "mean_loss", "sd_loss", "reps", "divergences", "seconds",
]

# Seed purposes under (base_seed, replication)
_DATA_PURPOSE = 0
_SAMPLER_PURPOSE = 1


@dataclass(frozen=True)
class BenchSpec:
    experiment: str
    cells: tuple
    estimators: tuple = ESTIMATORS
    replications: int = None
    base_seed: int = 0
    workers: int = None
    # Fill the seconds column; off by default so reports are byte-reproducible
    timing: bool = False

    def __post_init__(self):
        defaults = settings.section("bench")
        if self.experiment not in ("example1", "example2"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.replications is None:
            object.__setattr__(self, "replications", int(defaults[f"{self.experiment}_reps"]))
        if self.workers is None:
            object.__setattr__(self, "workers", int(defaults["workers"]))
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if not self.cells:
            raise ValueError("bench needs at least one cell")
        unknown = [e for e in self.estimators if e not in ESTIMATORS]
        if unknown or not self.estimators:
            raise ValueError(f"estimators must be a non-empty subset of {ESTIMATORS}, got {self.estimators}")
        cell_type = Example1Spec if self.experiment == "example1" else Example2Spec
        if not all(isinstance(c, cell_type) for c in self.cells):
            raise ValueError(f"{self.experiment} cells must be {cell_type.__name__} objects")
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "estimators", tuple(self.estimators))

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "cells": [_cell_params(c) for c in self.cells],
            "estimators": list(self.estimators),
            "replications": self.replications,
            "base_seed": self.base_seed,
            "workers": self.workers,
            "design_per_replication": "regenerated",
        }


@dataclass(frozen=True)
class BenchReport:
    spec: BenchSpec
    # One dict per (cell, estimator), keys CSV_COLUMNS plus extras
    rows: list = field(default_factory=list)
    # losses[(cell_index, estimator)] -> per-replication losses, None when diverged
    losses: dict = field(default_factory=dict)

    def to_frame(self):
        return pd.DataFrame([{c: row[c] for c in CSV_COLUMNS} for row in self.rows], columns=CSV_COLUMNS)


def derive_seed(base_seed, replication, purpose):
    """Integer seed for one (replication, purpose) stream."""
    seq = np.random.SeedSequence([int(base_seed), int(replication), int(purpose)])
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def _cell_params(cell):
    if isinstance(cell, Example1Spec):
        return {"n": cell.n, "M": cell.M, "S": cell.S}
    return {"n": cell.n, "M": cell.M, "sigma": cell.sigma, "k": cell.k}


def table_cells(experiment, grid):
    """Cartesian product of a parameter grid, e.g. {"n": [100], "M": [100, 200], "S": [5, 10]}.

    Example-1 combinations with S > M are skipped.
    """
    if experiment == "example1":
        cells = []
        for n, M, S in itertools.product(grid.get("n", [100]), grid.get("M", [100]), grid.get("S", [5])):
            if S > M:
                print(f"[Bench] skipping cell n={n} M={M} S={S} (S > M)", file=sys.stderr)
                continue
            cells.append(Example1Spec(n=int(n), M=int(M), S=int(S)))
        return tuple(cells)
    if experiment == "example2":
        return tuple(
            Example2Spec(n=int(n), sigma=float(sigma), k=int(k))
            for n, sigma, k in itertools.product(grid.get("n", [100]), grid.get("sigma", [1.0]), grid.get("k", [15]))
        )
    raise ValueError(f"unknown experiment {experiment!r}")


# ═══════════════════════════════════════════════════════════
#  One replication (runs inside a worker)
# ═══════════════════════════════════════════════════════════

def _run_replication(job):
    experiment, cell_index, cell, replication, base_seed, estimators = job
    dataset = generate(replace(cell, seed=derive_seed(base_seed, replication, _DATA_PURPOSE)))
    gram = build_gram(dataset)

    if experiment == "example2":
        loss_gram = rectangle_gram(cell.k)
        loss_of = lambda est: functional_loss(est - dataset.truth, loss_gram)
    else:
        loss_gram = np.eye(dataset.M)
        loss_of = lambda est: coefficient_loss(est, dataset.truth)

    results = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name in estimators:
            t0 = time.perf_counter()
            diverged = False
            recovery = None
            if name == "ewa":
                sampler = SamplerConfig(seed=derive_seed(base_seed, replication, _SAMPLER_PURPOSE))
                estimate, report = ewa_fit(dataset, EwaConfig(sampler=sampler), gram=gram)
                diverged = report.diverged
                recovery = support_recovery(estimate, dataset.truth)["exact"]
            elif name == "lasso":
                estimate, _ = lasso_fit(dataset, LassoConfig(), gram=gram)
            else:
                estimate, _ = lasso_gauss_ideal(dataset, loss_gram=loss_gram, gram=gram)
            results[name] = {
                "loss": None if diverged else loss_of(estimate),
                "seconds": time.perf_counter() - t0,
                "support_exact": recovery,
            }
    return cell_index, replication, results


def _summarize(spec, cell, name, entries):
    losses = [e["loss"] for e in entries if e["loss"] is not None]
    divergences = len(entries) - len(losses)
    if losses:
        mean = float(np.mean(losses))
        sd = float(np.std(losses, ddof=1)) if len(losses) > 1 else 0.0
    else:
        mean, sd = float("nan"), float("nan")
    row = {
        "experiment": spec.experiment,
        "n": cell.n,
        "M": cell.M,
        "S_or_sigma": cell.S if isinstance(cell, Example1Spec) else cell.sigma,
        "estimator": name,
        "mean_loss": mean,
        "sd_loss": sd,
        "reps": len(losses),
        "divergences": divergences,
        "seconds": float(sum(e["seconds"] for e in entries)) if spec.timing else None,
        "sd_undefined": len(losses) < 2,
    }
    if name == "ewa":
        exact = [e["support_exact"] for e in entries if e["loss"] is not None]
        row["support_recovery_rate"] = float(np.mean(exact)) if exact else None
    return row


def run_bench(spec, progress=True):
    """Run every (cell, replication) job and aggregate per (cell, estimator)."""
    jobs = [
        (spec.experiment, c, cell, r, spec.base_seed, spec.estimators)
        for c, cell in enumerate(spec.cells)
        for r in range(spec.replications)
    ]
    print(f"[Bench] {spec.experiment}: {len(spec.cells)} cell(s) x {spec.replications} replication(s), "
          f"estimators={','.join(spec.estimators)}, workers={spec.workers}", file=sys.stderr)

    t0 = time.time()
    bar = dict(total=len(jobs), desc="  Replications", ncols=80, unit="rep", file=sys.stderr, disable=not progress)
    if spec.workers == 1:
        results = [_run_replication(job) for job in tqdm(jobs, **bar)]
    else:
        results = []
        with Pool(spec.workers) as pool:
            for result in tqdm(pool.imap_unordered(_run_replication, jobs), **bar):
                results.append(result)
    results.sort(key=lambda item: (item[0], item[1]))
    print(f"[Bench] done in {(time.time() - t0) / 60:.1f} minutes", file=sys.stderr)

    rows, losses = [], {}
    for c, cell in enumerate(spec.cells):
        cell_results = [res for idx, _, res in results if idx == c]
        for name in spec.estimators:
            entries = [res[name] for res in cell_results]
            losses[(c, name)] = [e["loss"] for e in entries]
            rows.append(_summarize(spec, cell, name, entries))
            row = rows[-1]
            if row["divergences"]:
                print(f"[Bench] cell {_cell_params(cell)} {name}: {row['divergences']} diverged "
                      f"replication(s) excluded", file=sys.stderr)
    return BenchReport(spec=spec, rows=rows, losses=losses)


# ═══════════════════════════════════════════════════════════
#  Output
# ═══════════════════════════════════════════════════════════

def write_report_csv(report, path):
    """CSV with columns experiment,n,M,S_or_sigma,estimator,mean_loss,sd_loss,reps,divergences,seconds."""
    report.to_frame().to_csv(path, index=False, float_format="%.10g", lineterminator="\n")


def report_payload(report):
    return {
        "config": report.spec.to_dict(),
        "cells": [
            {k: (None if isinstance(v, float) and np.isnan(v) else v) for k, v in row.items()}
            for row in report.rows
        ],
    }


def write_report_json(report, path):
    """Rows plus the resolved bench configuration."""
    with open(path, "w") as f:
        json.dump(report_payload(report), f, indent=2, sort_keys=True)
        f.write("\n")
