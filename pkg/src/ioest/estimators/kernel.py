"""Regularized Nadaraya-Watson denoising and its cross-validated tuning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ioest import kernels
from ioest.estimators._common import EstimatorError

SIGMA_FACTORS = (1e-3, 1e-2, 1e-1, 1.0)
N_GAMMAS = 32
GAMMA_SPAN = (0.05, 2.0)
TIE_TOL = 1e-12


@dataclass(frozen=True)
class KernelConfig:
    gamma: float
    sigma: float
    kernel: str = "Epanechnikov"

    def __post_init__(self):
        if not (self.gamma > 0 and self.sigma > 0):
            raise ValueError("gamma and sigma must be strictly positive")
        if self.kernel != "Epanechnikov":
            raise ValueError(f"unsupported kernel {self.kernel!r}")


def _smooth(num, den, gamma, sigma, n, m):
    scale = gamma ** (-m) / n
    return scale * num / (sigma + scale * den)[..., None]


def l2nw_predict(train, u_query, cfg: KernelConfig, backend=None) -> np.ndarray:
    """Evaluate the regularized estimator fitted on ``train`` at new inputs."""
    u_query = np.asarray(u_query, dtype=float).reshape(-1, train.m)
    num, den = kernels.kernel_sums(u_query, train.u, train.y, [cfg.gamma], backend=backend)
    return _smooth(num[0], den[0], cfg.gamma, cfg.sigma, train.n, train.m)


def l2nw_denoise(data, cfg: KernelConfig, backend=None) -> np.ndarray:
    """Denoised decisions ``xbar_i`` at the observed inputs, shape ``(n, d)``.

    The kernel sums run over every observation including ``i`` itself.
    """
    return l2nw_predict(data, data.u, cfg, backend=backend)


def u_diameter(data) -> float:
    """Diagonal of the bounding box of the inputs."""
    return float(np.linalg.norm(data.u.max(axis=0) - data.u.min(axis=0)))


def default_gamma_grid(data) -> np.ndarray:
    diam = u_diameter(data)
    if diam == 0:
        diam = 1.0
    return diam * np.geomspace(*GAMMA_SPAN, N_GAMMAS)


def _fold_sums(data, gammas, k_folds, backend):
    """Kernel sums for every held-out fold against its training part."""
    fold = np.arange(data.n) % k_folds
    out = []
    for j in range(k_folds):
        test, train = fold == j, fold != j
        num, den = kernels.kernel_sums(
            data.u[test], data.u[train], data.y[train], gammas, backend=backend
        )
        out.append((test, int(train.sum()), num, den))
    return out


def _relative_sigmas(data, gammas, folds):
    # sigma competes with the density term gamma^-m (1/n) sum_j K; use its
    # average over held-out points as the scale, counting the point itself
    # so the scale stays positive when a point has no neighbours
    total = np.zeros(len(gammas))
    for _, n_tr, _, den in folds:
        total += (den + 0.75).sum(axis=1) / (n_tr + 1)
    level = np.asarray(gammas) ** (-data.m) * total / data.n
    return level[:, None] * np.asarray(SIGMA_FACTORS)[None, :]


def _fold_errors(data, gammas, sigmas, folds):
    sse = np.zeros(sigmas.shape)
    for test, n_tr, num, den in folds:
        y_te = data.y[test]
        for g, gamma in enumerate(gammas):
            for s_idx, sigma in enumerate(sigmas[g]):
                pred = _smooth(num[g], den[g], gamma, sigma, n_tr, data.m)
                sse[g, s_idx] += float(((pred - y_te) ** 2).sum())
    return sse / data.n


def cross_validate(prob, data, theta_box=None, gamma_grid=None, sigma_grid=None,
                   k_folds: int = 5, backend=None) -> KernelConfig:
    """Pick ``(gamma, sigma)`` by k-fold held-out squared prediction error.

    Fold ``j`` holds out the observations with ``i % k_folds == j``.  With no
    ``sigma_grid`` the candidates for each bandwidth are fixed fractions of the
    average kernel density term at that bandwidth.  Ties within ``1e-12`` go to
    the smallest ``gamma`` and then the smallest ``sigma``.
    """
    n = data.n
    if k_folds < 2 or n < k_folds:
        raise ValueError("need k_folds >= 2 and at least k_folds observations")
    gammas = np.sort(np.atleast_1d(np.asarray(
        default_gamma_grid(data) if gamma_grid is None else gamma_grid, dtype=float)))
    if gammas.size == 0 or np.any(gammas <= 0):
        raise ValueError("gamma grid must be nonempty and positive")
    folds = _fold_sums(data, gammas, k_folds, backend)
    if sigma_grid is None:
        sigmas = _relative_sigmas(data, gammas, folds)
    else:
        s = np.sort(np.atleast_1d(np.asarray(sigma_grid, dtype=float)))
        if s.size == 0 or np.any(s <= 0):
            raise ValueError("sigma grid must be nonempty and positive")
        sigmas = np.broadcast_to(s, (gammas.size, s.size))
    err = _fold_errors(data, gammas, sigmas, folds)
    if not np.isfinite(err).any():
        raise EstimatorError("cross-validation produced no finite score")
    best = np.nanmin(err)
    # row-major scan = smallest gamma first, then smallest sigma
    g, s_idx = np.argwhere(err <= best + TIE_TOL)[0]
    return KernelConfig(float(gammas[g]), float(sigmas[g, s_idx]))


def cv_scores(data, gammas, sigmas, k_folds=5, backend=None) -> np.ndarray:
    """Mean held-out squared error per candidate.

    ``sigmas`` has one row of candidates per bandwidth; a 1-D array is shared
    by every bandwidth.  Returns an array shaped like the broadcast ``sigmas``.
    """
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    sigmas = np.broadcast_to(np.asarray(sigmas, dtype=float), (gammas.size, np.shape(sigmas)[-1]))
    return _fold_errors(data, gammas, sigmas, _fold_sums(data, gammas, k_folds, backend))
