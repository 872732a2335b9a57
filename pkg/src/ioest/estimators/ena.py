from __future__ import annotations

import numpy as np

from ioest.estimators._common import EstimateResult, delta_net, grid_argmin
from ioest.forward import Family
from ioest.risk import risk_grid


def ena_estimate(prob, data, theta_box, delta, eps=0.0, backend=None) -> EstimateResult:
    """Minimize the sample risk ``Q_n(theta; eps)`` over a delta-net of ``theta_box``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if prob.family is Family.LINEAR_BOX and eps == 0:
        raise ValueError("LinearBox is not strictly convex; ENA needs eps > 0")
    grid = delta_net(theta_box, delta)
    q = risk_grid(prob, data, grid, eps, backend=backend)
    best = grid_argmin(q)
    return EstimateResult(
        theta_hat=grid[best].copy(),
        loss=float(q[best]),
        method="ENA",
        diagnostics={"grid_size": int(grid.shape[0]), "delta": float(delta), "eps": float(eps)},
    )
