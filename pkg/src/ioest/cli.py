"""Command line interface.

Commands::

    ioest gen --scenario NAME --n N --seed S [--zero-noise] [--out FILE]
    ioest estimate DATA.csv --scenario NAME --method ena|spa|kka|via [method flags] [--out FILE]
    ioest run CONFIG [--out DIR] [--workers K]
    ioest fixtures

Exit codes: 0 success, 2 bad arguments / configuration / data schema / IO,
3 estimator failure (for ``run``: at least one replication failed).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from ioest import datagen
from ioest.estimators import (
    EstimatorError,
    KernelConfig,
    cross_validate,
    ena_estimate,
    kka_estimate,
    spa_estimate,
    via_estimate,
)
from ioest.experiments import METHODS, METRICS, ExperimentSpec, run_experiment
from ioest.risk import Dataset, risk_grid

EXIT_OK, EXIT_CONFIG, EXIT_ESTIMATOR = 0, 2, 3
SEED_ENV = "IOEST_SEED"


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# run configuration file

_INT_KEYS = {"reps", "master_seed", "cv_folds", "test_size", "workers"}
_FLOAT_KEYS = {"delta", "eps", "gamma", "sigma"}
_BOOL_KEYS = {"project", "random_theta0", "zero_noise"}
_LIST_KEYS = {"methods", "n_list"}
_STR_KEYS = {"scenario", "metric", "out_dir"}
CONFIG_KEYS = _INT_KEYS | _FLOAT_KEYS | _BOOL_KEYS | _LIST_KEYS | _STR_KEYS


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Lists are comma separated.  Unknown or repeated keys are errors.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                out[key] = int(value)
            elif key in _FLOAT_KEYS:
                out[key] = float(value)
            elif key in _BOOL_KEYS:
                out[key] = _parse_bool(value)
            elif key == "n_list":
                out[key] = tuple(int(v) for v in value.split(",") if v.strip())
            elif key == "methods":
                out[key] = tuple(v.strip().upper() for v in value.split(",") if v.strip())
            else:
                out[key] = value
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    if "scenario" not in out:
        raise ConfigError("config must set scenario")
    return out


def spec_from_config(cfg: dict, env=None) -> tuple[ExperimentSpec, Path, int | None]:
    env = os.environ if env is None else env
    cfg = dict(cfg)
    out_dir = Path(cfg.pop("out_dir", "results"))
    workers = cfg.pop("workers", None)
    if env.get(SEED_ENV, "").strip():
        try:
            cfg["master_seed"] = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    try:
        spec = ExperimentSpec(**cfg)
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    return spec, out_dir, workers


def _check_writable_dir(path: Path):
    target = path
    while not target.exists():
        if target.parent == target:
            break
        target = target.parent
    if not target.is_dir() or not os.access(target, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    data = datagen.generate(args.scenario, args.n, args.seed, zero_noise=args.zero_noise)
    if args.out is None or args.out == "-":
        datagen.dataset_to_csv(data, sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            datagen.dataset_to_csv(data, fh)
    return EXIT_OK


def _estimate(args, scen, data):
    prob, box = scen.model, scen.theta_box
    delta = scen.delta if args.delta is None else args.delta
    method = args.method.upper()
    if method == "ENA":
        eps = scen.eps if args.eps is None else args.eps
        return ena_estimate(prob, data, box, delta, eps)
    if method == "SPA":
        if (args.gamma is None) != (args.sigma is None):
            raise ConfigError("--gamma and --sigma must be given together")
        if args.gamma is not None:
            cfg = KernelConfig(args.gamma, args.sigma)
        else:
            cfg = cross_validate(prob, data, box, k_folds=args.cv)
        return spa_estimate(prob, data, box, cfg, project=args.project)
    if method == "KKA":
        return kka_estimate(prob, data, box, delta)
    return via_estimate(prob, data, box, delta)


def cmd_estimate(args) -> int:
    scen = datagen.get_scenario(args.scenario)
    with open(args.data) as fh:
        data = datagen.dataset_from_csv(fh, scen.m, scen.d)
    try:
        res = _estimate(args, scen, data)
    except (ConfigError, datagen.SchemaError):
        raise
    except (EstimatorError, ValueError, FloatingPointError) as exc:
        print(f"error: estimator failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    for k, v in enumerate(res.theta_hat, 1):
        print(f"theta_{k} = {v:.17g}")
    print(f"loss = {res.loss:.17g}")
    for key, value in res.diagnostics.items():
        print(f"{key} = {value}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", *(f"theta_{k}" for k in range(1, res.theta_hat.size + 1)), "loss"])
            w.writerow([res.method, *(format(v, ".17g") for v in res.theta_hat),
                        format(res.loss, ".17g")])
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    spec, out_dir, workers = spec_from_config(parse_config(text))
    if args.out is not None:
        out_dir = Path(args.out)
    if args.workers is not None:
        workers = args.workers
    if workers is None:
        from ioest.experiments import default_workers

        workers = default_workers()
    if workers < 1:
        raise ConfigError("workers must be at least 1")
    _check_writable_dir(out_dir)
    report = run_experiment(spec, workers=workers)
    paths = report.write_csv(out_dir)
    width = max(len(m) for m in spec.methods)
    print(f"{spec.resolved_scenario.name}: {report.metric}, reps={spec.reps}")
    print(" " * width + "".join(f"{n:>12d}" for n in spec.n_list))
    for m in spec.methods:
        print(m.ljust(width) + "".join(f"{report.mean(m, n):>12.4f}" for n in spec.n_list))
    for p in paths:
        print(f"wrote {p}")
    if report.failures:
        print(f"error: {report.failures} replication(s) failed", file=sys.stderr)
        return EXIT_ESTIMATOR
    return EXIT_OK


def cmd_fixtures(args) -> int:
    fixtures = {f.name: f for f in datagen.identifiability_fixtures()}
    box = datagen.FIXTURE_BOX
    print("noiseless identifiability demo, theta in [0, 2]")

    one, two, three = fixtures["FOP-I"], fixtures["FOP-II"], fixtures["FOP-III"]
    data = Dataset([[0.0]], [[0.7]])
    res = ena_estimate(one.problem, data, box, 0.01, 0.0)
    print(f"{one.name}: identifiable={one.identifiable}; y=0.7 gives theta_hat={res.theta_hat[0]:.4g}")

    data = Dataset([[0.0]], [[1.0]])
    thetas = np.array([[1.0], [1.5], [2.0]])
    q = risk_grid(two.problem, data, thetas, 0.0)
    shown = ", ".join(f"Q({t:.1f})={v:.3g}" for t, v in zip(thetas[:, 0], q))
    print(f"{two.name}: identifiable={two.identifiable}; y=1 gives {shown}")

    data = Dataset([[-1.0]], [[0.3]])
    res = ena_estimate(three.problem, data, box, 0.01, 0.0)
    print(f"{three.name}: identifiable={three.identifiable}; u=-1, y=0.3 gives "
          f"theta_hat={res.theta_hat[0]:.4g}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ioest", description=__doc__.split("\n")[0],
                                     allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a scenario dataset as CSV", allow_abbrev=False)
    gen.add_argument("--scenario", required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--zero-noise", action="store_true")
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_gen)

    est = sub.add_parser("estimate", help="estimate the parameter from a CSV dataset",
                         allow_abbrev=False)
    est.add_argument("data")
    est.add_argument("--scenario", required=True, help="supplies the model and parameter box")
    est.add_argument("--method", required=True, type=str.upper, choices=METHODS)
    est.add_argument("--delta", type=float)
    est.add_argument("--eps", type=float)
    est.add_argument("--gamma", type=float)
    est.add_argument("--sigma", type=float)
    est.add_argument("--cv", type=int, default=5, help="cross-validation folds")
    est.add_argument("--project", action=argparse.BooleanOptionalAction, default=True)
    est.add_argument("--out")
    est.set_defaults(func=cmd_estimate)

    run = sub.add_parser("run", help="run a replicated experiment from a config file",
                         allow_abbrev=False)
    run.add_argument("config")
    run.add_argument("--out")
    run.add_argument("--workers", type=int)
    run.set_defaults(func=cmd_run)

    fix = sub.add_parser("fixtures", help="identifiability demo", allow_abbrev=False)
    fix.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, datagen.SchemaError, datagen.UnknownScenario) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


__all__ = ["CONFIG_KEYS", "METRICS", "main", "parse_config", "spec_from_config"]
