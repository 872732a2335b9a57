import io

import numpy as np
import pytest

from ioest import datagen
from ioest.datagen import (
    SchemaError,
    UnknownScenario,
    dataset_from_csv,
    dataset_to_csv,
    derive_seed,
    generate,
    get_scenario,
    identifiability_fixtures,
)
from ioest.estimators import ena_estimate
from ioest.forward import solve_points
from ioest.risk import Dataset, risk_grid


@pytest.mark.parametrize(
    "name,expected",
    [("FOP-A", "FOP-A"), ("fop-d", "FOP-D(10)"), ("FOP-D:3", "FOP-D(3)"), ("FOP-E(2)", "FOP-E(2)"),
     ("SQR-1", "SQR(1)"), ("SQR-P", "SQR(10)"), ("SQR-M", "SQR(10)"), ("SQR", "SQR(1)"),
     ("CE", "CE"), ("SDH-LIKE", "SDH-LIKE"), ("FOP-F", "FOP-F")],
)
def test_scenario_names(name, expected):
    assert get_scenario(name).name == expected


def test_unknown_scenario():
    for bad in ["FOP-Z", "FOP-A(3)", "nonsense!"]:
        with pytest.raises(UnknownScenario):
            get_scenario(bad)


def test_registry_settings():
    a = get_scenario("FOP-A")
    assert a.theta0[0] == 1.0 and a.u_low[0] == -1 and a.u_high[0] == 1
    b = get_scenario("FOP-B")
    assert b.theta0[0] == 0.5 and b.u_high[0] == 2 and b.theta_box.hi[0] == 2
    d = get_scenario("FOP-D")
    assert d.p == 10 and np.all(d.theta0 == 0.5) and np.all(d.u_high == 2)
    e = get_scenario("FOP-E(4)")
    assert e.d == 5 and np.all(e.theta0 == 1) and np.all(e.theta_box.lo == 0.5)
    assert np.all(e.u_low == 1) and np.all(e.u_high == 2)
    f = get_scenario("FOP-F")
    assert f.generator.a == 1.5 and f.generator.c == 0.0 and f.generator.shift == 1.0
    assert f.theta0 is None and np.all(f.u_high == 5)
    sdh = get_scenario("SDH-LIKE")
    assert tuple(sdh.theta0) == (1.0, 4.0) and sdh.noise_sd == 1.1


def test_ce_frequencies():
    data = generate("CE", 100_000, 1)
    pairs = {(0.0, 4.0), (0.0, 6.0), (20.0, 9.0), (20.0, 11.0)}
    rows = list(zip(data.u[:, 0], data.y[:, 0]))
    assert set(rows) == pairs
    sd = np.sqrt(0.25 * 0.75 / 100_000)
    for pair in pairs:
        freq = sum(r == pair for r in rows) / 100_000
        assert abs(freq - 0.25) <= 3 * sd


def test_noiseless_fop_b():
    scen = get_scenario("FOP-B")
    data = generate(scen, 100, 2, zero_noise=True)
    np.testing.assert_array_equal(data.y[:, 0], np.clip((0.5 + data.u[:, 0]) / 2, 0, 1))


def test_sqr_closed_form():
    scen = get_scenario("SQR-1")
    np.testing.assert_array_equal(datagen.noiseless_decisions(scen, np.array([[0.25]])), [[0.5]])
    data = generate(scen, 50, 3, zero_noise=True)
    np.testing.assert_array_equal(data.y, np.clip(np.sqrt(data.u), 0, 1))


def test_reproducible_and_seed_sensitive():
    a = generate("FOP-D(3)", 500, 42)
    b = generate("FOP-D(3)", 500, 42)
    assert a.u.tobytes() == b.u.tobytes() and a.y.tobytes() == b.y.tobytes()
    c = generate("FOP-D(3)", 500, 43)
    assert not np.allclose(a.u.mean(axis=0), c.u.mean(axis=0))


def test_derive_seed():
    s = derive_seed(0, "FOP-B", 1, "data")
    assert s == derive_seed(0, "FOP-B", 1, "data")
    assert 0 <= s < 2**64
    others = {derive_seed(0, "FOP-B", 2, "data"), derive_seed(1, "FOP-B", 1, "data"),
              derive_seed(0, "FOP-A", 1, "data"), derive_seed(0, "FOP-B", 1, "test")}
    assert s not in others and len(others) == 4


@pytest.mark.parametrize("name", ["FOP-A", "FOP-B", "FOP-D(3)", "FOP-E(2)", "CE", "SDH-LIKE"])
def test_noise_is_centred(name):
    scen = get_scenario(name)
    n = 100_000
    data = generate(scen, n, 5)
    resid = data.y - solve_points(scen.model, data.u, scen.theta0)
    assert np.all(np.abs(resid.mean(axis=0)) <= 4 * scen.noise_sd / np.sqrt(n) + 1e-12)


def test_standard_normal_moments():
    z = datagen.standard_normal(datagen.rng_from_seed(1), 200_000)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01 and np.all(np.isfinite(z))


def test_random_theta0_inside_support():
    scen = get_scenario("FOP-E(1)")
    for s in range(20):
        t = datagen.draw_theta0(scen, s)
        assert scen.theta0_support.contains(t)


def test_csv_round_trip():
    data = generate("FOP-E(2)", 25, 7)
    buf = io.StringIO()
    dataset_to_csv(data, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == "u_1,u_2,u_3,y_1,y_2,y_3"
    back = dataset_from_csv(io.StringIO(text), 3, 3)
    assert back.u.tobytes() == data.u.tobytes() and back.y.tobytes() == data.y.tobytes()


@pytest.mark.parametrize("text", ["", "a,b\n1,2\n", "u_1,y_1\n1,x\n", "u_1,y_1\n1,2,3\n",
                                  "u_1,y_1\n", "u_1,y_1\nnan,1\n"])
def test_csv_schema_errors(text):
    with pytest.raises(SchemaError):
        dataset_from_csv(io.StringIO(text))


def test_csv_dimension_mismatch():
    with pytest.raises(SchemaError):
        dataset_from_csv(io.StringIO("u_1,y_1\n1,2\n"), 2, 1)


# --- identifiability fixtures ------------------------------------------------------------


def test_fixture_flags():
    flags = {f.name: f.identifiable for f in identifiability_fixtures()}
    assert flags == {"FOP-I": True, "FOP-II": False, "FOP-III": True}


def test_fixture_two_is_flat():
    prob = {f.name: f for f in identifiability_fixtures()}["FOP-II"].problem
    data = Dataset(np.zeros(5), np.ones(5))
    thetas = np.linspace(1.0, 2.0, 101)[:, None]
    q = risk_grid(prob, data, thetas, 0.0)
    assert np.ptp(q) <= 1e-12
    q3 = risk_grid(prob, data, np.array([[1.0], [1.5], [2.0]]), 0.0)
    assert q3[0] == q3[1] == q3[2]


def test_fixture_one_and_three_identify():
    fx = {f.name: f for f in identifiability_fixtures()}
    for theta0 in [0.25, 1.1, 1.9]:
        y = solve_points(fx["FOP-I"].problem, np.zeros((1, 1)), [theta0])
        res = ena_estimate(fx["FOP-I"].problem, Dataset([0.0], y), datagen.FIXTURE_BOX, 0.01, 0.0)
        assert res.theta_hat[0] == pytest.approx(theta0, abs=0.006)
        assert res.theta_hat[0] == pytest.approx(y[0, 0], abs=0.006)
        y = solve_points(fx["FOP-III"].problem, np.array([[-1.0]]), [theta0])
        assert y[0, 0] == pytest.approx(theta0 - 1)
        res = ena_estimate(fx["FOP-III"].problem, Dataset([-1.0], y), datagen.FIXTURE_BOX, 0.01, 0.0)
        assert res.theta_hat[0] == pytest.approx(theta0, abs=0.006)
