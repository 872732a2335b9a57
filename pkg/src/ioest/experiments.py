"""Replicated experiments, error metrics and the paired bootstrap test."""

from __future__ import annotations

import csv
import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ioest.datagen import Scenario, derive_seed, draw_theta0, generate, get_scenario, rng_from_seed
from ioest.estimators import (
    EstimatorError,
    KernelConfig,
    cross_validate,
    ena_estimate,
    kka_estimate,
    spa_estimate,
    via_estimate,
)
from ioest.risk import population_risk

METHODS = ("ENA", "SPA", "KKA", "VIA")
METRICS = ("estimation_error", "prediction_error", "normalized_prediction_error")
MIN_TEST_SIZE = 10_000


def estimation_error(theta_hat, theta0) -> float:
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    if theta_hat.shape != theta0.shape:
        raise ValueError(f"dimension mismatch: {theta_hat.shape} vs {theta0.shape}")
    return float(np.linalg.norm(theta_hat - theta0))


def prediction_error(prob, theta_hat, scenario, test_n, seed, theta0=None) -> float:
    """Out-of-sample risk ``Q(theta_hat)`` on a fresh noisy test sample."""
    if test_n < MIN_TEST_SIZE:
        raise ValueError(f"test_n must be at least {MIN_TEST_SIZE}")
    test = generate(scenario, test_n, seed, theta0=theta0)
    return population_risk(prob, theta_hat, 0.0, test)


def normalized_prediction_error(prob, theta_hat, scenario, test_n, seed, theta0=None) -> float:
    """``Q(theta_hat) - E(w'w)``, which is zero for a perfect model."""
    scenario = get_scenario(scenario)
    q = prediction_error(prob, theta_hat, scenario, test_n, seed, theta0)
    return q - scenario.d * scenario.noise_var


def bootstrap_test(errors_a, errors_b, n_boot: int = 10_000, seed: int = 0) -> float:
    """Two-sided paired bootstrap p-value for a zero mean difference.

    Rep indices are resampled with replacement; ``count`` is the number of
    resampled mean differences on the far side of zero from the observed one
    (zero included), and ``p = min(1, (2 count + 1) / (n_boot + 1))``.  When
    every paired difference is zero the result is 1.
    """
    a = np.asarray(errors_a, dtype=float)
    b = np.asarray(errors_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired errors must be 1-D arrays of equal length")
    if n_boot < 1000:
        raise ValueError("n_boot must be at least 1000")
    diff = a - b
    if np.all(diff == 0):
        return 1.0
    observed = diff.mean()
    rng = rng_from_seed(seed)
    n = diff.size
    count = 0
    chunk = max(1, 2_000_000 // n)
    done = 0
    while done < n_boot:
        size = min(chunk, n_boot - done)
        means = diff[rng.integers(0, n, size=(size, n))].mean(axis=1)
        if observed > 0:
            count += int(np.count_nonzero(means <= 0))
        elif observed < 0:
            count += int(np.count_nonzero(means >= 0))
        else:
            count += size
        done += size
    return min(1.0, (2 * count + 1) / (n_boot + 1))


# ---------------------------------------------------------------------------
# experiment specification and report


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: str
    methods: tuple = ("ENA",)
    n_list: tuple = (10, 100, 1000)
    reps: int = 20
    master_seed: int = 0
    metric: str | None = None
    delta: float | None = None
    eps: float | None = None
    gamma: float | None = None
    sigma: float | None = None
    cv_folds: int = 5
    project: bool = True
    test_size: int = MIN_TEST_SIZE
    random_theta0: bool = False
    zero_noise: bool = False

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(m.upper() for m in self.methods))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ValueError(f"methods must be a nonempty subset of {METHODS}, got {bad}")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("methods must not repeat")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ValueError("n_list must hold positive sizes")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ValueError("n_list must be strictly increasing")
        if self.metric is not None and self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if self.test_size < MIN_TEST_SIZE:
            raise ValueError(f"test_size must be at least {MIN_TEST_SIZE}")
        if (self.gamma is None) != (self.sigma is None):
            raise ValueError("gamma and sigma must be given together")
        if self.gamma is not None:
            KernelConfig(self.gamma, self.sigma)
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")
        scen = get_scenario(self.scenario)
        if self.random_theta0 and scen.theta0_support is None:
            raise ValueError(f"{scen.name} has no random true parameter")
        if self.metric == "estimation_error" and not scen.identifiable:
            raise ValueError(f"{scen.name} has no true parameter to compare against")

    @property
    def resolved_scenario(self) -> Scenario:
        return get_scenario(self.scenario)

    @property
    def resolved_metric(self) -> str:
        if self.metric is not None:
            return self.metric
        scen = self.resolved_scenario
        return "estimation_error" if scen.identifiable else "normalized_prediction_error"


@dataclass(frozen=True)
class RepRecord:
    method: str
    n: int
    rep: int
    ok: bool
    value: float
    loss: float
    theta0: tuple
    theta_hat: tuple
    message: str = ""


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    metric: str
    records: list = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(not r.ok for r in self.records)

    def values(self, method, n) -> np.ndarray:
        return np.array([r.value for r in self.records if r.method == method and r.n == n and r.ok])

    def mean(self, method, n) -> float:
        v = self.values(method, n)
        return float(v.mean()) if v.size else math.nan

    @property
    def table(self) -> dict:
        return {(m, n): self.mean(m, n) for m in self.spec.methods for n in self.spec.n_list}

    def write_csv(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        p = self.spec.resolved_scenario.p
        paths = [out / "table.csv", out / "raw.csv"]
        with open(paths[0], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", *self.spec.n_list])
            for m in self.spec.methods:
                w.writerow([m, *(_fmt(self.mean(m, n)) for n in self.spec.n_list)])
        theta_cols = [f"theta0_{k + 1}" for k in range(p)] + [f"theta_hat_{k + 1}" for k in range(p)]
        with open(paths[1], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "n", "rep", "status", self.metric, "loss", *theta_cols])
            for r in self.records:
                w.writerow([r.method, r.n, r.rep, "ok" if r.ok else "failed", _fmt(r.value),
                            _fmt(r.loss), *_theta_cells(r, p)])
        for m in self.spec.methods:
            path = out / f"scatter_{m}.csv"
            paths.append(path)
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["n", "rep", *theta_cols])
                for r in self.records:
                    if r.method == m and r.ok:
                        w.writerow([r.n, r.rep, *_theta_cells(r, p)])
        return paths


def _fmt(x) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else format(float(x), ".17g")


def _theta_cells(r, p):
    t0 = [_fmt(v) for v in r.theta0] if r.theta0 else [""] * p
    th = [_fmt(v) for v in r.theta_hat] if r.theta_hat else [""] * p
    return t0 + th


# ---------------------------------------------------------------------------
# running


def run_method(method, scenario: Scenario, data, spec: ExperimentSpec):
    prob, box = scenario.model, scenario.theta_box
    delta = scenario.delta if spec.delta is None else spec.delta
    if method == "ENA":
        eps = scenario.eps if spec.eps is None else spec.eps
        return ena_estimate(prob, data, box, delta, eps)
    if method == "SPA":
        if spec.gamma is None:
            cfg = cross_validate(prob, data, box, k_folds=spec.cv_folds)
        else:
            cfg = KernelConfig(spec.gamma, spec.sigma)
        return spa_estimate(prob, data, box, cfg, project=spec.project)
    if method == "KKA":
        return kka_estimate(prob, data, box, delta)
    return via_estimate(prob, data, box, delta)


def _run_cell(args):
    spec, n, rep = args
    scen = spec.resolved_scenario
    metric = spec.resolved_metric
    theta0 = None
    if spec.random_theta0:
        theta0 = draw_theta0(scen, derive_seed(spec.master_seed, scen.name, rep, "theta0"))
    elif scen.theta0 is not None:
        theta0 = scen.theta0
    data = generate(scen, n, derive_seed(spec.master_seed, scen.name, rep, "n", n, "data"),
                    zero_noise=spec.zero_noise, theta0=theta0)
    test_seed = derive_seed(spec.master_seed, scen.name, rep, "test")
    out = []
    for method in spec.methods:
        t0 = tuple(float(v) for v in theta0) if theta0 is not None else ()
        try:
            res = run_method(method, scen, data, spec)
        except (EstimatorError, ValueError, FloatingPointError) as exc:
            out.append(RepRecord(method, n, rep, False, math.nan, math.nan, t0, (), str(exc)))
            continue
        if metric == "estimation_error":
            value = estimation_error(res.theta_hat, theta0)
        elif metric == "prediction_error":
            value = prediction_error(scen.model, res.theta_hat, scen, spec.test_size, test_seed,
                                     theta0)
        else:
            value = normalized_prediction_error(scen.model, res.theta_hat, scen, spec.test_size,
                                                test_seed, theta0)
        out.append(RepRecord(method, n, rep, True, value, res.loss, t0,
                             tuple(float(v) for v in res.theta_hat)))
    return out


def default_workers() -> int:
    if hasattr(os, "sched_getaffinity"):
        return max(1, len(os.sched_getaffinity(0)))
    return os.cpu_count() or 1


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> ExperimentReport:
    """Run every ``(n, rep)`` cell and collect per-method records.

    Each cell draws one dataset and hands it to every method, so methods are
    compared on identical data.  Cells are independent; their results are
    gathered in ``(n, rep)`` order whatever the worker count.
    """
    cells = [(spec, n, rep) for n in spec.n_list for rep in range(spec.reps)]
    if workers <= 1 or len(cells) == 1:
        results = [_run_cell(c) for c in cells]
    else:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            results = list(pool.map(_run_cell, cells))
    records = [r for cell in results for r in cell]
    # method-major order for stable CSVs
    order = {m: i for i, m in enumerate(spec.methods)}
    records.sort(key=lambda r: (order[r.method], r.n, r.rep))
    return ExperimentReport(spec, spec.resolved_metric, records)

