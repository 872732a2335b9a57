"""Seeded synthetic data for every experiment scenario.

Randomness comes from numpy's PCG64 generator.  Each dataset gets its own
64-bit stream seed, hashed from the master seed, the scenario name, the
replication index and a stream label, so results never depend on the order
in which replications are scheduled.  Uniform draws use ``Generator.random``
and normal draws apply the inverse normal CDF to open-interval uniforms,
which keeps the output bit-identical wherever IEEE doubles behave the same.
"""

from __future__ import annotations

import hashlib
import re
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from ioest.forward import (
    ParamBox,
    ProblemInstance,
    comfort_quad,
    linear_box,
    log_simplex,
    separable_quad_box,
    solve_points,
)
from ioest.risk import Dataset

DEFAULT_P = {"FOP-D": 10, "FOP-E": 10, "SQR": 1}
SQR_ALIASES = {"SQR-1": 1, "SQR-P": 10, "SQR-M": 10}


class UnknownScenario(KeyError):
    pass


@dataclass(frozen=True)
class Scenario:
    """One data-generating setting together with the model fitted to it.

    ``generator`` is the forward problem that produces the noiseless
    decisions; ``None`` means a closed form (``SQR``).  ``theta0`` is ``None``
    when the generator has no parameter to recover.
    """

    name: str
    model: ProblemInstance
    generator: ProblemInstance | None
    theta0: np.ndarray | None
    theta_box: ParamBox
    u_low: np.ndarray
    u_high: np.ndarray
    u_values: tuple | None = None
    noise: str = "normal"
    noise_sd: float = 1.0
    theta0_support: ParamBox | None = None
    eps: float = 0.0
    delta: float = 0.01

    @property
    def m(self):
        return self.model.m

    @property
    def d(self):
        return self.model.d

    @property
    def p(self):
        return self.model.p

    @property
    def noise_var(self) -> float:
        """Per-coordinate variance of the measurement noise."""
        return 1.0 if self.noise == "rademacher" else self.noise_sd**2

    @property
    def identifiable(self) -> bool:
        return self.theta0 is not None


def _const(value, size):
    return np.full(size, float(value))


def _box(lo, hi, p):
    return ParamBox.uniform(lo, hi, p)


def _fop_d(p):
    return separable_quad_box(p, a=1.0, c=1.0, lo=0.0, hi=1.0)


def _fop_c_generator(p):
    return separable_quad_box(p, a=1.5, c=0.0, shift=1.0, lo=0.0, hi=1.0)


def _build(base: str, p: int | None) -> Scenario:
    if base == "FOP-A":
        return Scenario("FOP-A", linear_box(-1.0, 1.0), linear_box(-1.0, 1.0), _const(1, 1),
                        _box(-1, 1, 1), _const(-1, 1), _const(1, 1),
                        theta0_support=_box(-1, 1, 1), eps=1e-3)
    if base == "FOP-B":
        prob = _fop_d(1)
        return Scenario("FOP-B", prob, prob, _const(0.5, 1), _box(0, 2, 1), _const(0, 1),
                        _const(2, 1), theta0_support=_box(0, 2, 1))
    if base == "FOP-C":
        return Scenario("FOP-C", _fop_d(1), _fop_c_generator(1), None, _box(0, 2, 1),
                        _const(0, 1), _const(5, 1))
    if base == "FOP-D":
        prob = _fop_d(p)
        return Scenario(f"FOP-D({p})", prob, prob, _const(0.5, p), _box(0, 2, p),
                        _const(0, p), _const(2, p), theta0_support=_box(0, 1, p))
    if base == "FOP-E":
        prob = log_simplex(p)
        return Scenario(f"FOP-E({p})", prob, prob, _const(1, p), _box(0.5, 2, p),
                        _const(1, p + 1), _const(2, p + 1), theta0_support=_box(0.5, 2, p))
    if base == "FOP-F":
        return Scenario("FOP-F", _fop_d(10), _fop_c_generator(10), None, _box(0, 2, 10),
                        _const(0, 10), _const(5, 10))
    if base == "SQR":
        return Scenario(f"SQR({p})", _fop_d(p), None, None, _box(0, 2, p), _const(0, p),
                        _const(5, p))
    if base == "CE":
        prob = separable_quad_box(1, a=1.0, c=1.0, lo=0.0, hi=10.0)
        return Scenario("CE", prob, prob, _const(10, 1), _box(0, 10, 1), _const(0, 1),
                        _const(20, 1), u_values=(0.0, 20.0), noise="rademacher", eps=1e-3)
    if base == "SDH-LIKE":
        prob = comfort_quad()
        return Scenario("SDH-LIKE", prob, prob, np.array([1.0, 4.0]),
                        ParamBox(np.zeros(2), np.array([3.0, 8.0])), _const(55, 1),
                        _const(95, 1), noise_sd=1.1, delta=0.05)
    raise UnknownScenario(base)


_NAME_RE = re.compile(r"^([A-Z]+(?:-[A-Z]+)?)(?:\((\d+)\)|:(\d+))?$")


def get_scenario(name: str | Scenario, p: int | None = None) -> Scenario:
    """Look up a scenario by name.

    Dimensioned scenarios accept ``FOP-D(10)``, ``FOP-D:10`` or ``p=10``;
    ``SQR-1`` is ``SQR(1)`` and ``SQR-P``/``SQR-M`` are ``SQR(10)``.
    """
    if isinstance(name, Scenario):
        return name
    key = str(name).strip().upper()
    if key in SQR_ALIASES:
        return _build("SQR", SQR_ALIASES[key])
    match = _NAME_RE.match(key)
    if not match:
        raise UnknownScenario(name)
    base = match.group(1)
    dim = match.group(2) or match.group(3)
    if dim is not None:
        p = int(dim)
    if base in DEFAULT_P:
        p = DEFAULT_P[base] if p is None else p
        if p < 1:
            raise ValueError("dimension must be at least 1")
    elif dim is not None:
        raise UnknownScenario(name)
    return _build(base, p)


SCENARIO_NAMES = ("FOP-A", "FOP-B", "FOP-C", "FOP-D", "FOP-E", "FOP-F", "SQR", "CE", "SDH-LIKE")


# ---------------------------------------------------------------------------
# seeds and random streams


def derive_seed(master_seed: int, *parts) -> int:
    """64-bit stream seed from the master seed and any labels."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<q", int(master_seed)))
    for part in parts:
        h.update(b"\x1f" + str(part).encode())
    return int.from_bytes(h.digest(), "little")


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def open_uniform(rng, size):
    """Uniforms strictly inside ``(0, 1)``."""
    return rng.random(size) + 2.0**-54


def standard_normal(rng, size):
    return ndtri(open_uniform(rng, size))


# ---------------------------------------------------------------------------
# generation


def noiseless_decisions(scenario: Scenario, U, theta0=None) -> np.ndarray:
    if scenario.generator is None:
        return np.clip(np.sqrt(np.maximum(U, 0.0)), 0.0, 1.0)
    theta = scenario.theta0 if theta0 is None else np.atleast_1d(np.asarray(theta0, float))
    if theta is None:
        # fixed-coefficient generators ignore the parameter
        theta = np.zeros(scenario.generator.p)
    return solve_points(scenario.generator, U, theta)


def draw_inputs(scenario: Scenario, n: int, rng) -> np.ndarray:
    if scenario.u_values is not None:
        idx = (rng.random((n, scenario.m)) * len(scenario.u_values)).astype(int)
        return np.asarray(scenario.u_values)[idx]
    width = scenario.u_high - scenario.u_low
    return scenario.u_low + width * rng.random((n, scenario.m))


def draw_noise(scenario: Scenario, n: int, rng) -> np.ndarray:
    if scenario.noise == "rademacher":
        return np.where(rng.random((n, scenario.d)) < 0.5, -1.0, 1.0)
    return scenario.noise_sd * standard_normal(rng, (n, scenario.d))


def generate(scenario, n: int, seed: int, zero_noise: bool = False, theta0=None) -> Dataset:
    """Draw ``n`` observations ``y = xi(u) + w`` from ``scenario``.

    Inputs are drawn before noise from one stream seeded by ``seed``, so the
    noiseless and noisy versions of a dataset share their inputs.
    """
    scenario = get_scenario(scenario)
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = rng_from_seed(seed)
    U = draw_inputs(scenario, n, rng)
    X = noiseless_decisions(scenario, U, theta0)
    if not zero_noise:
        X = X + draw_noise(scenario, n, rng)
    return Dataset(U, X)


def draw_theta0(scenario, seed: int) -> np.ndarray:
    """A random true parameter from the scenario's scatter-plot support."""
    scenario = get_scenario(scenario)
    box = scenario.theta0_support
    if box is None:
        raise ValueError(f"{scenario.name} has no parameter to randomize")
    rng = rng_from_seed(seed)
    return box.lo + (box.hi - box.lo) * rng.random(box.p)


# ---------------------------------------------------------------------------
# identifiability fixtures


@dataclass(frozen=True)
class Fixture:
    name: str
    problem: ProblemInstance
    identifiable: bool
    note: str


def identifiability_fixtures() -> list[Fixture]:
    """Three one-dimensional problems with ``theta`` in ``[0, 2]``.

    ``I``   ``min (x - theta)^2``: identifiable, ``theta = y``.
    ``II``  ``min {(x - theta)^2 : x <= 1}``: not identifiable, ``y = 1`` fits
            any ``theta`` in ``[1, 2]``.
    ``III`` ``min {(x - theta - u)^2 : x <= 1}``: identifiable once inputs
            ``u <= -1`` occur with positive probability.

    All are written as ``x^2/2 - (theta + u) x`` (same minimizers); the first
    two are fed ``u = 0``.
    """
    inf = float("inf")
    return [
        Fixture("FOP-I", separable_quad_box(1, a=0.5, c=1.0, lo=-inf, hi=inf), True,
                "theta equals the noiseless decision"),
        Fixture("FOP-II", separable_quad_box(1, a=0.5, c=1.0, lo=-inf, hi=1.0), False,
                "a decision of 1 is optimal for every theta in [1, 2]"),
        Fixture("FOP-III", separable_quad_box(1, a=0.5, c=1.0, lo=-inf, hi=1.0), True,
                "an input u = -1 gives decision theta - 1"),
    ]


FIXTURE_BOX = ParamBox(np.zeros(1), np.array([2.0]))


# ---------------------------------------------------------------------------
# CSV interchange


class SchemaError(ValueError):
    """A data file does not match the expected layout."""


def csv_header(m: int, d: int) -> list[str]:
    return [f"u_{k + 1}" for k in range(m)] + [f"y_{k + 1}" for k in range(d)]


def dataset_to_csv(data: Dataset, fh) -> None:
    """Write ``data`` with 17 significant digits so it reads back exactly."""
    fh.write(",".join(csv_header(data.m, data.d)) + "\n")
    for row in np.hstack([data.u, data.y]):
        fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def dataset_from_csv(fh, m: int | None = None, d: int | None = None) -> Dataset:
    lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise SchemaError("empty data file")
    header = [h.strip() for h in lines[0].split(",")]
    m_found = sum(h.startswith("u_") for h in header)
    d_found = len(header) - m_found
    if header != csv_header(m_found, d_found) or m_found == 0 or d_found == 0:
        raise SchemaError(f"header must read u_1..u_m,y_1..y_d, got {','.join(header)}")
    if (m is not None and m != m_found) or (d is not None and d != d_found):
        raise SchemaError(f"data has m={m_found}, d={d_found}; the model needs m={m}, d={d}")
    try:
        rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    except ValueError as exc:
        raise SchemaError(f"non-numeric entry: {exc}") from None
    if rows.ndim != 2 or rows.shape[0] == 0 or rows.shape[1] != len(header):
        raise SchemaError("every row needs one value per header column")
    if not np.all(np.isfinite(rows)):
        raise SchemaError("data must be finite")
    return Dataset(rows[:, :m_found], rows[:, m_found:])
