"""KKT-residual (KKA) and variational-inequality (VIA) baseline estimators.

Both score a parameter by how far each observed decision is from satisfying
an optimality certificate and then minimize the average score over the
parameter box: on the ENA grid when ``p <= 2``, otherwise by coordinate
descent with golden-section line searches.
"""

from __future__ import annotations

import math

import numpy as np

from ioest import kernels
from ioest.estimators._common import EstimateResult, delta_net, grid_argmin
from ioest.forward import Family, x_gradient_batch
from ioest.risk import _kernel_args

DEFAULT_DELTA = 0.01
CD_SWEEPS = 50
GOLDEN_TOL = 1e-6
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
VIA, KKA = 0, 1


def _simplex_gradients(prob, data, theta):
    with np.errstate(divide="ignore", invalid="ignore"):
        return x_gradient_batch(prob, data.y, data.u, theta)


def via_residuals(prob, data, theta) -> np.ndarray:
    """Per-observation slack ``eps_i(theta)`` (already floored at zero)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if prob.family is Family.LOG_SIMPLEX:
        s = _simplex_gradients(prob, data, theta)
        # max over simplex vertices of -s.(x - y)
        return np.maximum((-s).max(axis=1) + (s * data.y).sum(axis=1), 0.0)
    code, _, _ = _kernel_args(prob, theta)
    s = kernels.box_gradients_numpy(code, data.u, data.y, theta, prob.a, prob.c, prob.shift,
                                    prob.target)
    return kernels.via_slack_box_numpy(s, data.y, prob.lo, prob.hi)


def kka_residuals(prob, data, theta, backend=None) -> np.ndarray:
    """Per-observation minimum over multipliers of the squared KKT residual."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if prob.family is Family.LOG_SIMPLEX:
        s = _simplex_gradients(prob, data, theta)
        return kernels.simplex_kka_residuals(s, data.y, backend=backend)
    code, _, _ = _kernel_args(prob, theta)
    s = kernels.box_gradients_numpy(code, data.u, data.y, theta, prob.a, prob.c, prob.shift,
                                    prob.target)
    return kernels.kka_box_numpy(s, data.y, prob.lo, prob.hi)


def baseline_loss(kind, prob, data, theta, backend=None) -> float:
    if kind == VIA:
        return float(np.mean(via_residuals(prob, data, theta) ** 2))
    return float(np.mean(kka_residuals(prob, data, theta, backend=backend)))


def baseline_grid(kind, prob, data, thetas, backend=None) -> np.ndarray:
    """Baseline loss for every row of ``thetas``."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if prob.family is Family.LOG_SIMPLEX:
        return np.array([baseline_loss(kind, prob, data, t, backend) for t in thetas])
    code, _, _ = _kernel_args(prob, thetas[0])
    return kernels.box_baseline_grid(
        kind, code, data.u, data.y, thetas, prob.lo, prob.hi, prob.a, prob.c, prob.shift,
        prob.target, backend=backend,
    )


def golden_section(fun, lo: float, hi: float, tol: float = GOLDEN_TOL):
    """Minimize a unimodal scalar function on ``[lo, hi]``; returns ``(x, f(x))``.

    The endpoints are compared with the final interior point so that a
    minimizer on the boundary is found exactly.
    """
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fun(d)
    x, fx = (c, fc) if fc <= fd else (d, fd)
    for end in (lo, hi):
        fe = fun(end)
        if fe < fx:
            x, fx = end, fe
    return x, fx


def coordinate_descent(fun, box, x0=None, sweeps=CD_SWEEPS, tol=GOLDEN_TOL):
    theta = box.center.copy() if x0 is None else box.clip(np.asarray(x0, dtype=float))
    val = fun(theta)
    done = 0
    for done in range(1, sweeps + 1):
        moved = 0.0
        for k in range(box.p):
            def line(t, k=k):
                trial = theta.copy()
                trial[k] = t
                return fun(trial)

            t_new, v_new = golden_section(line, box.lo[k], box.hi[k], tol)
            if v_new < val:
                moved = max(moved, abs(t_new - theta[k]))
                theta[k], val = t_new, v_new
        if moved <= tol:
            break
    return theta, val, done


def _estimate(kind, prob, data, theta_box, delta, backend):
    name = "VIA" if kind == VIA else "KKA"
    if theta_box.p <= 2:
        grid = delta_net(theta_box, delta)
        losses = baseline_grid(kind, prob, data, grid, backend=backend)
        best = grid_argmin(losses)
        return EstimateResult(grid[best].copy(), float(losses[best]), name,
                              {"grid_size": int(grid.shape[0]), "delta": float(delta)})
    theta, val, sweeps = coordinate_descent(
        lambda t: baseline_loss(kind, prob, data, t, backend), theta_box
    )
    return EstimateResult(theta, float(val), name, {"sweeps": sweeps})


def via_estimate(prob, data, theta_box, delta=DEFAULT_DELTA, backend=None) -> EstimateResult:
    """Minimize the mean squared variational-inequality slack."""
    return _estimate(VIA, prob, data, theta_box, delta, backend)


def kka_estimate(prob, data, theta_box, delta=DEFAULT_DELTA, backend=None) -> EstimateResult:
    """Minimize the mean squared KKT residual."""
    return _estimate(KKA, prob, data, theta_box, delta, backend)
