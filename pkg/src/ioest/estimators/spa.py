"""Semiparametric estimator: denoise, then minimize average suboptimality."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize

from ioest.estimators._common import EstimateResult, EstimatorError
from ioest.estimators.kernel import KernelConfig, cross_validate, l2nw_denoise
from ioest.forward import (
    Family,
    _as_rows,
    _vec,
    objective_batch,
    project_feasible_batch,
    solve_batch,
    theta_gradient_batch,
)

PG_TOL = 1e-3
SUBGRAD_ITERS = 2000
SUBGRAD_PATIENCE = 200
SUBGRAD_IMPROVE = 1e-10


def suboptimality_loss(prob, xbar, data, theta) -> float:
    """Mean of ``f(xbar_i, u_i, theta) - V(u_i, theta)``."""
    return _loss_and_grad(prob, _as_rows(xbar, prob.d, "xbar"), data.u, theta)[0]


def suboptimality_grad(prob, xbar, data, theta) -> np.ndarray:
    """A (sub)gradient of :func:`suboptimality_loss` in ``theta``.

    By the envelope argument the parameter-derivative of ``V`` is the
    parameter-derivative of ``f`` at the forward solution.
    """
    return _loss_and_grad(prob, _as_rows(xbar, prob.d, "xbar"), data.u, theta)[1]


def _loss_and_grad(prob, X, U, theta):
    theta = _vec(theta, prob.p, "theta")
    S, _, _ = solve_batch(prob, U, theta)
    f_bar = objective_batch(prob, X, U, theta)
    f_opt = objective_batch(prob, S, U, theta)
    g = theta_gradient_batch(prob, X, U, theta) - theta_gradient_batch(prob, S, U, theta)
    return float(np.mean(f_bar - f_opt)), g.mean(axis=0)


def projected_gradient_norm(grad, theta, box, tol=1e-9) -> float:
    """Norm of the gradient after discarding components blocked by active bounds."""
    g = np.array(grad, dtype=float)
    at_lo = theta <= box.lo + tol
    at_hi = theta >= box.hi - tol
    g[at_lo & (g > 0)] = 0.0
    g[at_hi & (g < 0)] = 0.0
    return float(np.linalg.norm(g))


def _lbfgsb(fg, box, x0):
    res = minimize(
        fg, x0, jac=True, method="L-BFGS-B", bounds=list(zip(box.lo, box.hi)),
        options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-10, "maxcor": 20},
    )
    theta = box.clip(res.x)
    val, grad = fg(theta)
    return theta, val, {"solver": "L-BFGS-B", "iterations": int(res.nit),
                        "grad_norm": projected_gradient_norm(grad, theta, box)}


def _subgradient(fg, box, x0):
    # step alpha0 / sqrt(t) along the normalized subgradient, keep the best iterate
    alpha0 = box.diameter if box.diameter > 0 else 1.0
    theta = box.clip(np.asarray(x0, dtype=float))
    best_val, grad = fg(theta)
    best = theta.copy()
    last_gain_at, ref_val = 0, best_val
    it = 0
    for it in range(1, SUBGRAD_ITERS + 1):
        norm = np.linalg.norm(grad)
        if norm == 0:
            break
        theta = box.clip(theta - alpha0 / math.sqrt(it) * grad / norm)
        val, grad = fg(theta)
        if val < best_val:
            best_val, best = val, theta.copy()
        if ref_val - best_val >= SUBGRAD_IMPROVE:
            ref_val, last_gain_at = best_val, it
        elif it - last_gain_at >= SUBGRAD_PATIENCE:
            break
    _, g_best = fg(best)
    return best, best_val, {"solver": "subgradient", "iterations": it,
                            "grad_norm": projected_gradient_norm(g_best, best, box)}


def spa_estimate(prob, data, theta_box, cfg: KernelConfig | None = None, project: bool = True,
                 solver: str | None = None, backend=None, xbar=None) -> EstimateResult:
    """Denoise the decisions, then fit ``theta`` by minimizing the suboptimality loss.

    ``cfg=None`` selects ``(gamma, sigma)`` by cross-validation.  The default
    solver is L-BFGS-B on the parameter box, which suits the continuously
    differentiable loss of strictly convex families; ``LinearBox`` falls back
    to projected subgradient descent.  Passing ``xbar`` skips the denoising.
    """
    if prob.family is Family.LOG_SIMPLEX and not project:
        raise ValueError("LogSimplex needs project=True (the log needs feasible points)")
    diag = {}
    if xbar is None:
        if cfg is None:
            cfg = cross_validate(prob, data, theta_box, backend=backend)
        xbar = l2nw_denoise(data, cfg, backend=backend)
        diag.update(gamma=cfg.gamma, sigma=cfg.sigma)
    X = _as_rows(xbar, prob.d, "xbar")
    if project:
        X = project_feasible_batch(prob, X)
    U = data.u

    def fg(theta):
        return _loss_and_grad(prob, X, U, theta)

    if solver is None:
        solver = "lbfgsb" if prob.strictly_convex else "subgradient"
    if solver == "lbfgsb":
        theta, val, info = _lbfgsb(fg, theta_box, theta_box.center)
    elif solver == "subgradient":
        theta, val, info = _subgradient(fg, theta_box, theta_box.center)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    if not np.isfinite(val):
        raise EstimatorError("suboptimality loss is not finite at the returned parameter")
    info["converged"] = info["grad_norm"] <= PG_TOL
    diag.update(info)
    return EstimateResult(theta, val, "SPA", diag)
