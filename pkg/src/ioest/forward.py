"""Parametric forward problem families.

Four families are supported:

``LinearBox``
    ``min sum_k (theta_k + u_k) x_k`` over ``lo <= x <= hi``.
``SeparableQuadBox``
    ``min sum_k a x_k^2 - (c theta_k + u_k + shift) x_k`` over ``lo <= x <= hi``.
    ``c = 0`` freezes the parameter out, which is how the fixed-coefficient
    data generators are expressed.  Bounds may be infinite.
``LogSimplex``
    ``min -sum_{k<=p} theta_k log(x_k + u_k) - log(x_{p+1} + u_{p+1})`` over
    the probability simplex in ``R^{p+1}``.
``ComfortQuad``
    ``min theta_1 (x - 76)^2 + (x - theta_2 - u)^2`` over ``70 <= x <= 76``.

All constraints are independent of the parameter.  Every function here has a
per-point form that follows the public contract and a ``*_batch`` form that
works on ``(n, m)`` input / ``(n, d)`` decision arrays for a fixed parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

NEG_INF = float("-inf")
"""Sentinel returned by :func:`dual_function` when the Lagrangian is unbounded."""

FEAS_TOL = 1e-9
ZERO_SLOPE_TOL = 1e-12


class Family(str, Enum):
    LINEAR_BOX = "LinearBox"
    SEP_QUAD_BOX = "SeparableQuadBox"
    LOG_SIMPLEX = "LogSimplex"
    COMFORT_QUAD = "ComfortQuad"


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ProblemInstance:
    """A forward problem family together with its fixed coefficients.

    Use the constructors :func:`linear_box`, :func:`separable_quad_box`,
    :func:`log_simplex` and :func:`comfort_quad` rather than building one
    directly.
    """

    family: Family
    d: int
    m: int
    p: int
    lo: np.ndarray = field(repr=False)
    hi: np.ndarray = field(repr=False)
    a: float = 1.0
    c: float = 1.0
    shift: float = 0.0
    target: float = 76.0

    @property
    def q(self):
        return 2 * self.d if self.family is not Family.LOG_SIMPLEX else self.d + 2

    @property
    def strictly_convex(self):
        return self.family is not Family.LINEAR_BOX

    @property
    def is_box(self):
        return self.family is not Family.LOG_SIMPLEX


def linear_box(lo, hi):
    lo, hi = np.atleast_1d(np.asarray(lo, float)), np.atleast_1d(np.asarray(hi, float))
    if lo.shape != hi.shape or np.any(lo >= hi):
        raise ValueError("LinearBox needs lo < hi componentwise")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("LinearBox bounds must be finite")
    d = lo.size
    return ProblemInstance(Family.LINEAR_BOX, d, d, d, _frozen(lo), _frozen(hi))


def separable_quad_box(d, a=1.0, c=1.0, shift=0.0, lo=0.0, hi=1.0):
    if a <= 0:
        raise ValueError("SeparableQuadBox needs a > 0")
    if c not in (0, 1):
        raise ValueError("SeparableQuadBox needs c in {0, 1}")
    lo = np.broadcast_to(np.asarray(lo, float), (d,))
    hi = np.broadcast_to(np.asarray(hi, float), (d,))
    if np.any(lo >= hi):
        raise ValueError("SeparableQuadBox needs lo < hi componentwise")
    return ProblemInstance(
        Family.SEP_QUAD_BOX, d, d, d, _frozen(lo), _frozen(hi), a=float(a), c=float(c),
        shift=float(shift),
    )


def log_simplex(p):
    d = p + 1
    return ProblemInstance(
        Family.LOG_SIMPLEX, d, d, p, _frozen(np.zeros(d)), _frozen(np.ones(d))
    )


def comfort_quad(lo=70.0, hi=76.0, target=76.0):
    return ProblemInstance(
        Family.COMFORT_QUAD, 1, 1, 2, _frozen([lo]), _frozen([hi]), target=float(target)
    )


@dataclass(frozen=True)
class SolutionResult:
    """A minimizer, the optimal value and the shape of the solution set.

    ``interval`` is ``None`` for a singleton.  For a ``LinearBox`` with a zero
    cost coefficient it holds ``(lower, upper)`` arrays describing the box of
    minimizers; ``point`` is then its midpoint.
    """

    point: np.ndarray
    value: float
    interval: tuple | None = None

    @property
    def set_kind(self):
        return "Singleton" if self.interval is None else "Interval"


# ---------------------------------------------------------------------------
# shape checks


def _as_rows(arr, width, name):
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if width != 1 or arr.size == 1 else arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ValueError(f"{name} has shape {arr.shape}, expected (n, {width})")
    return arr


def _vec(arr, size, name):
    arr = np.atleast_1d(np.asarray(arr, dtype=float))
    if arr.shape != (size,):
        raise ValueError(f"{name} has shape {arr.shape}, expected ({size},)")
    return arr


def _theta_full(prob, theta):
    """LogSimplex weights with the trailing fixed weight 1 appended."""
    return np.append(theta, 1.0)


# ---------------------------------------------------------------------------
# objective and constraints


def objective_batch(prob, X, U, theta):
    theta = _vec(theta, prob.p, "theta")
    X = _as_rows(X, prob.d, "x")
    U = _as_rows(U, prob.m, "u")
    fam = prob.family
    if fam is Family.LINEAR_BOX:
        return ((theta + U) * X).sum(axis=1)
    if fam is Family.SEP_QUAD_BOX:
        lin = prob.c * theta + U + prob.shift
        return (prob.a * X**2 - lin * X).sum(axis=1)
    if fam is Family.LOG_SIMPLEX:
        arg = X + U
        if np.any(arg <= 0):
            raise ValueError("log argument x_k + u_k must be positive")
        return -(np.log(arg) * _theta_full(prob, theta)).sum(axis=1)
    x, u = X[:, 0], U[:, 0]
    return theta[0] * (x - prob.target) ** 2 + (x - theta[1] - u) ** 2


def objective(prob, x, u, theta):
    """Objective value ``f(x, u, theta)``."""
    x = _vec(x, prob.d, "x")
    u = _vec(u, prob.m, "u")
    return float(objective_batch(prob, x[None, :], u[None, :], theta)[0])


def constraints_batch(prob, X, U):
    X = _as_rows(X, prob.d, "x")
    if prob.family is Family.LOG_SIMPLEX:
        s = X.sum(axis=1, keepdims=True)
        return np.hstack([-X, s - 1.0, 1.0 - s])
    with np.errstate(invalid="ignore"):
        return np.hstack([prob.lo - X, X - prob.hi])


def constraints(prob, x, u, theta=None):
    """Constraint vector ``g(x, u)``; the parameter never enters."""
    x = _vec(x, prob.d, "x")
    _vec(u, prob.m, "u")
    if theta is not None:
        _vec(theta, prob.p, "theta")
    return constraints_batch(prob, x[None, :], None)[0]


# ---------------------------------------------------------------------------
# exact solvers


def _simplex_weights_solution(W, U):
    """Solve ``min -sum_k w_k log(x_k + u_k)`` over the simplex, row-wise.

    The KKT system gives ``x_k = max(0, w_k / nu - u_k)`` with a scalar
    ``nu > 0``.  Coordinates enter the active set in decreasing order of
    ``w_k / u_k``, so sorting gives ``nu`` exactly.
    Returns ``(X, nu)``.
    """
    ratio = W / U
    order = np.argsort(-ratio, axis=1, kind="stable")
    w_s = np.take_along_axis(W, order, axis=1)
    u_s = np.take_along_axis(U, order, axis=1)
    r_s = np.take_along_axis(ratio, order, axis=1)
    nu_j = np.cumsum(w_s, axis=1) / (1.0 + np.cumsum(u_s, axis=1))
    active = r_s > nu_j
    # the active set is a prefix; its length is the count of True
    k = np.maximum(active.sum(axis=1), 1)
    nu = nu_j[np.arange(W.shape[0]), k - 1]
    X = np.maximum(0.0, W / nu[:, None] - U)
    return X, nu


def _quad_coeffs(prob, U, theta):
    """``(A, B)`` with ``f(x) = A x^2 - B x + const`` for d = 1 quadratic families.

    For SeparableQuadBox ``B`` is an ``(n, d)`` array and ``A`` a scalar.
    """
    if prob.family is Family.SEP_QUAD_BOX:
        return prob.a, prob.c * theta + U + prob.shift
    t1, t2 = theta
    return t1 + 1.0, 2.0 * (prob.target * t1 + t2 + U)


def solve_batch(prob, U, theta):
    """Minimizers for every row of ``U``; returns ``(X, lower, upper)``.

    ``lower``/``upper`` bound the solution set (equal to ``X`` for singletons).
    """
    theta = _vec(theta, prob.p, "theta")
    U = _as_rows(U, prob.m, "u")
    fam = prob.family
    if fam is Family.LINEAR_BOX:
        slope = theta + U
        lower = np.where(slope < 0, prob.hi, prob.lo)
        upper = np.where(slope > 0, prob.lo, prob.hi)
        lower = np.broadcast_to(lower, slope.shape).copy()
        upper = np.broadcast_to(upper, slope.shape).copy()
        X = np.where(slope == 0, 0.5 * (lower + upper), lower)
        return X, lower, upper
    if fam is Family.LOG_SIMPLEX:
        if np.any(theta <= 0):
            raise ValueError("LogSimplex needs theta > 0")
        if np.any(U <= 0):
            raise ValueError("LogSimplex needs u > 0")
        W = np.broadcast_to(_theta_full(prob, theta), U.shape)
        X, _ = _simplex_weights_solution(W, U)
        return X, X, X
    if fam is Family.COMFORT_QUAD and theta[0] <= -1:
        raise ValueError("ComfortQuad needs theta_1 > -1")
    A, B = _quad_coeffs(prob, U, theta)
    X = np.clip(B / (2.0 * A), prob.lo, prob.hi)
    return X, X, X


def solve_points(prob, U, theta):
    return solve_batch(prob, U, theta)[0]


def value_batch(prob, U, theta):
    X = solve_points(prob, U, theta)
    return objective_batch(prob, X, U, theta)


def solve_forward(prob, u, theta):
    """Exact minimizer and value of the forward problem at ``(u, theta)``."""
    u = _vec(u, prob.m, "u")
    X, lower, upper = solve_batch(prob, u[None, :], theta)
    point = X[0]
    value = float(objective_batch(prob, X, u[None, :], theta)[0])
    interval = None
    if prob.family is Family.LINEAR_BOX and np.any(lower[0] != upper[0]):
        interval = (lower[0], upper[0])
    return SolutionResult(point, value, interval)


# ---------------------------------------------------------------------------
# gradients (used by the baselines and the semiparametric solver)


def x_gradient_batch(prob, X, U, theta):
    """``grad_x f(x, u, theta)`` row-wise.  Defined wherever the formula is."""
    theta = _vec(theta, prob.p, "theta")
    fam = prob.family
    if fam is Family.LINEAR_BOX:
        return np.broadcast_to(theta + U, X.shape).copy()
    if fam is Family.SEP_QUAD_BOX:
        return 2.0 * prob.a * X - (prob.c * theta + U + prob.shift)
    if fam is Family.LOG_SIMPLEX:
        return -_theta_full(prob, theta) / (X + U)
    t1, t2 = theta
    return 2.0 * t1 * (X - prob.target) + 2.0 * (X - t2 - U)


def theta_gradient_batch(prob, X, U, theta):
    """``grad_theta f(x, u, theta)`` row-wise, shape ``(n, p)``."""
    fam = prob.family
    if fam is Family.LINEAR_BOX:
        return X.copy()
    if fam is Family.SEP_QUAD_BOX:
        return -prob.c * X
    if fam is Family.LOG_SIMPLEX:
        return -np.log(X[:, :-1] + U[:, :-1])
    x, u = X[:, 0], U[:, 0]
    return np.column_stack([(x - prob.target) ** 2, -2.0 * (x - theta[1] - u)])


# ---------------------------------------------------------------------------
# Lagrangian dual


def dual_function(prob, lam, u, theta):
    """Lagrangian dual ``h(lambda, u, theta) = inf_x L(x, lambda, u, theta)``.

    Returns :data:`NEG_INF` when the infimum is unbounded below.
    """
    lam = _vec(lam, prob.q, "lambda")
    u = _vec(u, prob.m, "u")
    theta = _vec(theta, prob.p, "theta")
    if np.any(lam < 0):
        raise ValueError("dual multipliers must be nonnegative")
    fam = prob.family
    if fam is Family.LOG_SIMPLEX:
        return _dual_log_simplex(prob, lam, u, theta)
    d = prob.d
    lam_lo, lam_hi = lam[:d], lam[d:]
    if np.any((lam_lo > 0) & ~np.isfinite(prob.lo)) or np.any(
        (lam_hi > 0) & ~np.isfinite(prob.hi)
    ):
        return NEG_INF
    # zero multipliers on infinite bounds contribute nothing
    const = float(
        np.sum(lam_lo * np.where(lam_lo > 0, prob.lo, 0.0))
        - np.sum(lam_hi * np.where(lam_hi > 0, prob.hi, 0.0))
    )
    if fam is Family.LINEAR_BOX:
        slope = theta + u - lam_lo + lam_hi
        if np.any(np.abs(slope) > ZERO_SLOPE_TOL):
            return NEG_INF
        return const
    if fam is Family.SEP_QUAD_BOX:
        beta = prob.c * theta + u + prob.shift + lam_lo - lam_hi
        return const - float(np.sum(beta**2)) / (4.0 * prob.a)
    # ComfortQuad: (t1 + 1) x^2 - B x + C with the multipliers folded into B
    t1, t2 = theta
    A = t1 + 1.0
    if A <= 0:
        return NEG_INF
    B = 2.0 * (prob.target * t1 + t2 + u[0]) + lam_lo[0] - lam_hi[0]
    C = prob.target**2 * t1 + (t2 + u[0]) ** 2
    return const + C - B**2 / (4.0 * A)


def _dual_log_simplex(prob, lam, u, theta):
    d = prob.d
    mu = lam[:d]
    nu = lam[d] - lam[d + 1]
    w = _theta_full(prob, theta)
    coef = nu - mu
    total = -nu
    for k in range(d):
        if w[k] < 0:
            return NEG_INF
        if coef[k] <= 0:
            if w[k] == 0 and coef[k] == 0:
                continue
            return NEG_INF
        if w[k] == 0:
            total += -coef[k] * u[k]
        else:
            total += -w[k] * np.log(w[k] / coef[k]) + w[k] - coef[k] * u[k]
    return float(total)


def kkt_multipliers(prob, u, theta):
    """Dual witness ``lambda*`` for the point returned by :func:`solve_forward`."""
    u = _vec(u, prob.m, "u")
    theta = _vec(theta, prob.p, "theta")
    sol = solve_forward(prob, u, theta)
    x = sol.point
    fam = prob.family
    if fam is Family.LOG_SIMPLEX:
        w = _theta_full(prob, theta)
        _, nu = _simplex_weights_solution(w[None, :], u[None, :])
        nu = float(nu[0])
        mu = np.where(x > 0, 0.0, np.maximum(0.0, nu - w / (x + u)))
        return np.concatenate([mu, [nu, 0.0]])
    grad = x_gradient_batch(prob, x[None, :], u[None, :], theta)[0]
    if fam is Family.LINEAR_BOX:
        at_lo = (grad > 0)
        at_hi = (grad < 0)
    else:
        at_lo = (x <= prob.lo) & (grad > 0)
        at_hi = (x >= prob.hi) & (grad < 0)
    lam_lo = np.where(at_lo, grad, 0.0)
    lam_hi = np.where(at_hi, -grad, 0.0)
    return np.concatenate([lam_lo, lam_hi])


# ---------------------------------------------------------------------------
# projection onto the feasible set


def project_simplex_rows(Z):
    """Euclidean projection of each row onto the probability simplex."""
    Z = np.asarray(Z, dtype=float)
    n, d = Z.shape
    srt = -np.sort(-Z, axis=1)
    css = np.cumsum(srt, axis=1) - 1.0
    idx = np.arange(1, d + 1)
    cond = srt - css / idx > 0
    rho = d - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(n), rho - 1] / rho
    return np.maximum(Z - tau[:, None], 0.0)


def project_feasible_batch(prob, Z):
    Z = _as_rows(Z, prob.d, "z")
    if prob.family is Family.LOG_SIMPLEX:
        return project_simplex_rows(Z)
    return np.clip(Z, prob.lo, prob.hi)


def project_feasible(prob, z, u=None):
    """Nearest feasible point to ``z`` (the feasible set does not depend on ``u``)."""
    z = _vec(z, prob.d, "z")
    return project_feasible_batch(prob, z[None, :])[0]


@dataclass(frozen=True)
class ParamBox:
    """Closed hyperrectangle of admissible parameters."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _frozen(np.atleast_1d(np.asarray(self.lo, float)))
        hi = _frozen(np.atleast_1d(np.asarray(self.hi, float)))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("ParamBox bounds must be vectors of equal length")
        if np.any(lo > hi) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("ParamBox needs finite bounds with lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def uniform(cls, lo, hi, p):
        return cls(np.full(p, float(lo)), np.full(p, float(hi)))

    @property
    def p(self):
        return self.lo.size

    @property
    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, theta, tol=1e-12):
        theta = np.asarray(theta, float)
        return bool(np.all(theta >= self.lo - tol) and np.all(theta <= self.hi + tol))

    def clip(self, theta):
        return np.clip(theta, self.lo, self.hi)
