import math

import numpy as np
import pytest
from scipy.integrate import quad

from ioest.datagen import get_scenario
from ioest.experiments import (
    ExperimentSpec,
    bootstrap_test,
    estimation_error,
    normalized_prediction_error,
    prediction_error,
    run_experiment,
)


def test_estimation_error():
    assert estimation_error([1.0], [1.0]) == 0.0
    assert estimation_error([0.5], [1.0]) == 0.5
    assert estimation_error(np.full(10, 0.6), np.full(10, 0.5)) == pytest.approx(0.1 * math.sqrt(10))
    with pytest.raises(ValueError):
        estimation_error([1.0, 2.0], [1.0])


def test_prediction_error_at_truth():
    scen = get_scenario("FOP-D(3)")
    n = 100_000
    v = normalized_prediction_error(scen.model, scen.theta0, scen, n, 1)
    # Var(|w|^2) = 2 d for standard normal noise
    assert abs(v) <= 4 * math.sqrt(2 * 3 / n)


def test_prediction_error_ce_truth():
    scen = get_scenario("CE")
    assert normalized_prediction_error(scen.model, [10.0], scen, 10_000, 3) == 0.0


def test_prediction_error_against_quadrature():
    scen = get_scenario("FOP-B")

    def gap(u):
        return (np.clip(u / 2, 0, 1) - np.clip((u + 0.5) / 2, 0, 1)) ** 2 * 0.5

    exact, _ = quad(gap, 0.0, 2.0, points=[1.5, 2.0])
    est = normalized_prediction_error(scen.model, [0.0], scen, 10_000_000, 11)
    assert est == pytest.approx(exact, abs=1e-3)
    assert exact > 0


def test_prediction_error_rejects_small_test_sets():
    scen = get_scenario("FOP-B")
    with pytest.raises(ValueError):
        prediction_error(scen.model, [0.5], scen, 100, 0)


# --- bootstrap ----------------------------------------------------------------------------


def test_bootstrap_identical():
    a = np.random.default_rng(0).random(30)
    assert bootstrap_test(a, a, 2000, 1) == 1.0


def test_bootstrap_constant_shift():
    b = np.random.default_rng(0).random(30)
    assert bootstrap_test(b + 10, b, 5000, 1) == pytest.approx(1 / 5001)
    assert bootstrap_test(b, b + 10, 5000, 1) == pytest.approx(1 / 5001)


def test_bootstrap_range_and_symmetry():
    rng = np.random.default_rng(4)
    for _ in range(20):
        a, b = rng.normal(size=15), rng.normal(size=15)
        p = bootstrap_test(a, b, 1000, 7)
        assert 1 / 1001 <= p <= 1
        assert p == bootstrap_test(b, a, 1000, 7)


def test_bootstrap_validation():
    with pytest.raises(ValueError):
        bootstrap_test([1, 2], [1], 1000, 0)
    with pytest.raises(ValueError):
        bootstrap_test([1, 2], [1, 3], 10, 0)


# --- harness ----------------------------------------------------------------------------------


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec("FOP-B", n_list=(100, 10))
    with pytest.raises(ValueError):
        ExperimentSpec("FOP-B", reps=0)
    with pytest.raises(ValueError):
        ExperimentSpec("FOP-B", methods=("XYZ",))
    with pytest.raises(ValueError):
        ExperimentSpec("FOP-C", metric="estimation_error")
    with pytest.raises(ValueError):
        ExperimentSpec("FOP-B", gamma=0.1)
    assert ExperimentSpec("FOP-C").resolved_metric == "normalized_prediction_error"
    assert ExperimentSpec("FOP-B").resolved_metric == "estimation_error"


def test_noiseless_ena_column_is_zero():
    spec = ExperimentSpec("FOP-B", methods=("ENA",), n_list=(20,), reps=2, zero_noise=True)
    rep = run_experiment(spec)
    assert rep.mean("ENA", 20) == 0.0 and rep.failures == 0


def test_table_is_mean_of_raw():
    spec = ExperimentSpec("FOP-B", methods=("ENA", "KKA", "VIA", "SPA"), n_list=(10, 40), reps=3)
    rep = run_experiment(spec)
    for (m, n), v in rep.table.items():
        raw = [r.value for r in rep.records if r.method == m and r.n == n]
        assert len(raw) == 3 and v == pytest.approx(np.mean(raw), abs=1e-12)


def test_failures_are_recorded():
    spec = ExperimentSpec("FOP-D(10)", methods=("ENA", "VIA"), n_list=(20,), reps=2)
    rep = run_experiment(spec)
    assert rep.failures == 2
    assert math.isnan(rep.mean("ENA", 20)) and not math.isnan(rep.mean("VIA", 20))
    assert "limit" in rep.records[0].message


def test_random_theta0_scatter(tmp_path):
    spec = ExperimentSpec("FOP-E(1)", methods=("SPA",), n_list=(100,), reps=4, random_theta0=True)
    rep = run_experiment(spec)
    t0 = {r.theta0 for r in rep.records}
    assert len(t0) == 4
    paths = rep.write_csv(tmp_path)
    lines = (tmp_path / "scatter_SPA.csv").read_text().splitlines()
    assert lines[0] == "n,rep,theta0_1,theta_hat_1" and len(lines) == 5
    assert [p.name for p in paths] == ["table.csv", "raw.csv", "scatter_SPA.csv"]


def test_csv_layout(tmp_path):
    spec = ExperimentSpec("FOP-A", methods=("ENA", "KKA", "VIA"), n_list=(10, 30, 50), reps=2)
    run_experiment(spec).write_csv(tmp_path)
    table = (tmp_path / "table.csv").read_text().splitlines()
    assert table[0] == "method,10,30,50"
    assert [row.split(",")[0] for row in table[1:]] == ["ENA", "KKA", "VIA"]
    raw = (tmp_path / "raw.csv").read_text().splitlines()
    assert raw[0] == "method,n,rep,status,estimation_error,loss,theta0_1,theta_hat_1"
    assert len(raw) == 1 + 3 * 3 * 2


def test_worker_count_does_not_change_output(tmp_path):
    spec = ExperimentSpec("FOP-C", methods=("ENA", "KKA"), n_list=(10, 30), reps=2,
                          test_size=10_000)
    run_experiment(spec, workers=1).write_csv(tmp_path / "one")
    run_experiment(spec, workers=2).write_csv(tmp_path / "two")
    for name in ["table.csv", "raw.csv", "scatter_ENA.csv", "scatter_KKA.csv"]:
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
