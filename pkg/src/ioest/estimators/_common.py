from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ioest.forward import ParamBox

MAX_NET_SIZE = 100_000_000


class EstimatorError(RuntimeError):
    """An estimator could not produce a result."""


@dataclass(frozen=True)
class EstimateResult:
    theta_hat: np.ndarray
    loss: float
    method: str
    diagnostics: dict = field(default_factory=dict)


def _axis_counts(box: ParamBox, delta: float) -> list[int]:
    root_p = math.sqrt(box.p)
    counts = []
    for lo, hi in zip(box.lo, box.hi):
        ratio = root_p * (hi - lo) / delta
        # guard against ratios like 200.00000000000003
        counts.append(int(math.ceil(ratio - 1e-9 * max(1.0, ratio))) + 1)
    return counts


def net_size(box: ParamBox, delta: float) -> int:
    if not delta > 0:
        raise ValueError("delta must be positive")
    return math.prod(_axis_counts(box, delta))


def delta_net(box: ParamBox, delta: float) -> np.ndarray:
    """Axis-aligned grid covering ``box`` within Euclidean distance ``delta``.

    Rows come in lexicographic order, so ``argmin`` over a loss evaluated on
    the grid breaks ties toward the lexicographically smallest point.
    """
    size = net_size(box, delta)
    if size > MAX_NET_SIZE:
        raise ValueError(f"delta-net would have {size} points (limit {MAX_NET_SIZE})")
    axes = [
        np.linspace(lo, hi, k) if k > 1 else np.array([lo])
        for lo, hi, k in zip(box.lo, box.hi, _axis_counts(box, delta))
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g.ravel() for g in mesh])


def grid_argmin(values: np.ndarray) -> int:
    """First index attaining the minimum; NaN never wins."""
    values = np.where(np.isnan(values), np.inf, values)
    return int(np.argmin(values))
