"""Sample-average risk through projections onto (epsilon-)solution sets.

For fixed ``theta`` the duality-based risk problem decouples over
observations: each ``y_i`` is projected onto

    S(u_i, theta; eps) = {x : f(x, u_i, theta) <= V(u_i, theta) + eps, g(x, u_i) <= eps}

and ``Q_n(theta; eps)`` is the mean squared projection distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ioest import kernels
from ioest.forward import (
    FEAS_TOL,
    Family,
    _as_rows,
    _theta_full,
    _vec,
    constraints_batch,
    objective_batch,
    solve_batch,
    value_batch,
)

_BISECT_ITERS = 200
BUDGET_TOL = 1e-9


@dataclass(frozen=True)
class Dataset:
    """Observed pairs ``(u_i, y_i)`` stored as read-only ``(n, m)``/``(n, d)`` arrays."""

    u: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        y = np.array(self.y, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if u.shape[0] != y.shape[0]:
            raise ValueError("u and y must have the same number of rows")
        if u.shape[0] < 1:
            raise ValueError("a dataset needs at least one observation")
        u.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.u.shape[0]

    @property
    def m(self):
        return self.u.shape[1]

    @property
    def d(self):
        return self.y.shape[1]

    @property
    def observations(self):
        return list(zip(self.u, self.y))

    def subset(self, idx):
        return Dataset(self.u[idx], self.y[idx])


@dataclass(frozen=True)
class RiskValue:
    q: float
    points: np.ndarray
    sqdist: np.ndarray

    @property
    def per_obs(self):
        return list(zip(self.points, self.sqdist))


def _check_eps(eps):
    if eps < 0:
        raise ValueError("eps must be nonnegative")


def eps_solution_set_membership(prob, x, u, theta, eps):
    """True when ``x`` is an eps-solution of the forward problem at ``(u, theta)``."""
    _check_eps(eps)
    x = _vec(x, prob.d, "x")
    u = _vec(u, prob.m, "u")
    g = constraints_batch(prob, x[None, :], u[None, :])[0]
    if np.any(g > eps + FEAS_TOL):
        return False
    if prob.family is Family.LOG_SIMPLEX and np.any(x + u <= 0):
        return False
    v = value_batch(prob, u[None, :], theta)[0]
    f = objective_batch(prob, x[None, :], u[None, :], theta)[0]
    return bool(f <= v + eps + FEAS_TOL)


# ---------------------------------------------------------------------------
# batched projections


def _kernel_args(prob, theta):
    code = {
        Family.LINEAR_BOX: kernels.CODE_LINEAR,
        Family.SEP_QUAD_BOX: kernels.CODE_SEPQUAD,
        Family.COMFORT_QUAD: kernels.CODE_COMFORT,
    }[prob.family]
    t1 = theta[1] if theta.size > 1 else 0.0
    return code, theta[0], t1


def _project_scalar(prob, U, Y, theta, eps):
    code, t0, t1 = _kernel_args(prob, theta)
    left, right = kernels.interval_1d_numpy(
        code, U[:, 0], t0, t1, prob.lo[0], prob.hi[0], prob.a, prob.c, prob.shift,
        prob.target, eps,
    )
    return np.clip(Y[:, 0], left, right)[:, None]


def _bisect_multiplier(path, budget, n):
    """Smallest multiplier per row with ``budget(path(mu)) <= 0``.

    ``budget`` is nonincreasing along the path.  Returns the path evaluated at
    the feasible end of the final bracket.
    """
    lo = np.zeros(n)
    hi = np.ones(n)
    ok0 = budget(path(lo)) <= 0
    for _ in range(200):
        bad = ~ok0 & (budget(path(hi)) > 0)
        if not bad.any():
            break
        hi = np.where(bad, hi * 2.0, hi)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        feas = budget(path(mid)) <= 0
        hi = np.where(feas, mid, hi)
        lo = np.where(feas, lo, mid)
        if np.all((hi - lo) <= 1e-15 * np.maximum(1.0, hi)):
            break
    mu = np.where(ok0, 0.0, hi)
    return path(mu)


def _project_sepquad(prob, U, Y, theta, eps):
    # level set sum_k a (x_k - c_k)^2 <= sum_k a (x*_k - c_k)^2 + eps is a ball
    centre = (prob.c * theta + U + prob.shift) / (2.0 * prob.a)
    xstar = np.clip(centre, prob.lo, prob.hi)
    rad2 = ((xstar - centre) ** 2).sum(axis=1) + eps / prob.a
    lo, hi = prob.lo - eps, prob.hi + eps

    def path(mu):
        mu = mu[:, None]
        return np.clip((Y + mu * prob.a * centre) / (1.0 + mu * prob.a), lo, hi)

    def budget(X):
        return ((X - centre) ** 2).sum(axis=1) - rad2

    return _bisect_multiplier(path, budget, Y.shape[0])


def _project_linear(prob, U, Y, theta, eps):
    slope = theta + U
    V = np.minimum(slope * prob.lo, slope * prob.hi).sum(axis=1)
    lo, hi = prob.lo - eps, prob.hi + eps

    def path(mu):
        return np.clip(Y - mu[:, None] * slope, lo, hi)

    def budget(X):
        return (slope * X).sum(axis=1) - V - eps

    return _bisect_multiplier(path, budget, Y.shape[0])


def _project_log_simplex(prob, U, Y, theta, eps):
    w = _theta_full(prob, theta)
    V = value_batch(prob, U, theta)
    n = Y.shape[0]

    def coord(mu, eta):
        # minimize (x - y)^2 + mu phi(x) + eta x with phi(x) = -w log(x + u), x >= -eps
        b = eta[:, None] - 2.0 * (U + Y)
        t = (-b + np.sqrt(b * b + 8.0 * mu[:, None] * w)) / 4.0
        x = np.where(mu[:, None] > 0, t - U, Y - 0.5 * eta[:, None])
        return np.maximum(x, -eps)

    def inner(mu):
        eta0 = np.zeros(n)
        s0 = coord(mu, eta0).sum(axis=1)
        target = np.clip(s0, 1.0 - eps, 1.0 + eps)
        need = s0 != target
        lo = np.full(n, -1.0)
        hi = np.full(n, 1.0)
        for _ in range(200):
            grow = need & ((coord(mu, lo).sum(axis=1) < target) | (coord(mu, hi).sum(axis=1) > target))
            if not grow.any():
                break
            lo = np.where(grow, lo * 2.0, lo)
            hi = np.where(grow, hi * 2.0, hi)
        for _ in range(_BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            big = coord(mu, mid).sum(axis=1) > target
            lo = np.where(big, mid, lo)
            hi = np.where(big, hi, mid)
            if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(hi))):
                break
        eta = np.where(need, 0.5 * (lo + hi), 0.0)
        return coord(mu, eta)

    def budget(X):
        arg = X + U
        with np.errstate(invalid="ignore", divide="ignore"):
            f = -(np.log(np.where(arg > 0, arg, np.nan)) * w).sum(axis=1)
        return np.where(np.isfinite(f), f - V - eps, np.inf)

    return _bisect_multiplier(inner, budget, n)


def project_batch(prob, U, Y, theta, eps):
    """Projections of every ``y_i`` onto ``S(u_i, theta; eps)``, shape ``(n, d)``."""
    _check_eps(eps)
    theta = _vec(theta, prob.p, "theta")
    U = _as_rows(U, prob.m, "u")
    Y = _as_rows(Y, prob.d, "y")
    fam = prob.family
    if eps == 0.0:
        X, lower, upper = solve_batch(prob, U, theta)
        if fam is Family.LINEAR_BOX:
            return np.clip(Y, lower, upper)
        return X
    if prob.d == 1 and fam is not Family.LOG_SIMPLEX:
        return _project_scalar(prob, U, Y, theta, eps)
    if fam is Family.SEP_QUAD_BOX:
        return _project_sepquad(prob, U, Y, theta, eps)
    if fam is Family.LINEAR_BOX:
        return _project_linear(prob, U, Y, theta, eps)
    return _project_log_simplex(prob, U, Y, theta, eps)


def project_to_eps_solutions(prob, y, u, theta, eps):
    """Nearest eps-solution to ``y``; returns ``(x_star, squared_distance)``."""
    y = _vec(y, prob.d, "y")
    u = _vec(u, prob.m, "u")
    x = project_batch(prob, u[None, :], y[None, :], theta, eps)[0]
    return x, float(np.sum((y - x) ** 2))


def risk_saa(prob, data, theta, eps=0.0):
    """``Q_n(theta; eps)`` with the per-observation projections."""
    X = project_batch(prob, data.u, data.y, theta, eps)
    sq = ((data.y - X) ** 2).sum(axis=1)
    return RiskValue(float(np.mean(sq)), X, sq)


def risk_grid(prob, data, thetas, eps=0.0, backend=None):
    """``Q_n(theta; eps)`` for every row of ``thetas``.

    Scalar-decision box families go through the compiled kernel; the others
    loop over the grid with the batched projections.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if thetas.shape[1] != prob.p:
        raise ValueError(f"grid has {thetas.shape[1]} columns, expected {prob.p}")
    if prob.d == 1 and prob.family is not Family.LOG_SIMPLEX:
        code, _, _ = _kernel_args(prob, thetas[0])
        return kernels.risk_grid_1d(
            code, data.u[:, 0], data.y[:, 0], thetas, prob.lo[0], prob.hi[0], prob.a,
            prob.c, prob.shift, prob.target, eps, backend=backend,
        )
    return np.array([risk_saa(prob, data, t, eps).q for t in thetas])


def population_risk(prob, theta, eps, test_data):
    """Monte Carlo estimate of ``Q(theta; eps)`` on a held-out sample."""
    return risk_saa(prob, test_data, theta, eps).q
