"""Hot inner loops, each with a numba kernel and a numpy twin.

The public dispatchers at the bottom pick the numba version when
:data:`ioest._accel.USE_NUMBA` is true; pass ``backend="numpy"`` or
``backend="numba"`` to force one (tests and the benchmark do this).

Family codes used by the kernels: 0 LinearBox, 1 SeparableQuadBox,
3 ComfortQuad.  LogSimplex never reaches the box kernels.
"""

import math

import numpy as np

from ioest import _accel
from ioest._accel import njit

try:
    from numba import prange
except ImportError:  # pragma: no cover
    prange = range

CODE_LINEAR = 0
CODE_SEPQUAD = 1
CODE_COMFORT = 3


# ---------------------------------------------------------------------------
# epsilon-solution interval for scalar decisions


@njit
def _interval_1d(code, u, t0, t1, lo, hi, a, c, shift, target, eps):
    if code == CODE_LINEAR:
        slope = t0 + u
        if slope > 0:
            xs = lo
        elif slope < 0:
            xs = hi
        else:
            return lo - eps, hi + eps
        v = slope * xs
        left = lo - eps
        right = hi + eps
        if slope > 0:
            right = min(right, (v + eps) / slope)
        else:
            left = max(left, (v + eps) / slope)
        if left > right:
            return xs, xs
        return left, right
    if code == CODE_SEPQUAD:
        aa = a
        xc = (c * t0 + u + shift) / (2.0 * a)
    else:
        aa = t0 + 1.0
        xc = (target * t0 + t1 + u) / aa
    xs = min(max(xc, lo), hi)
    if eps == 0.0:
        return xs, xs
    r = math.sqrt((xs - xc) ** 2 + eps / aa)
    left = max(xc - r, lo - eps)
    right = min(xc + r, hi + eps)
    if left > right:
        return xs, xs
    return left, right


@njit(parallel=True)
def _risk_grid_1d_nb(code, u, y, thetas, lo, hi, a, c, shift, target, eps):
    G = thetas.shape[0]
    n = u.shape[0]
    out = np.empty(G)
    for g in prange(G):
        t0 = thetas[g, 0]
        t1 = thetas[g, 1] if thetas.shape[1] > 1 else 0.0
        s = 0.0
        for i in range(n):
            left, right = _interval_1d(code, u[i], t0, t1, lo, hi, a, c, shift, target, eps)
            x = min(max(y[i], left), right)
            s += (y[i] - x) ** 2
        out[g] = s / n
    return out


def interval_1d_numpy(code, u, t0, t1, lo, hi, a, c, shift, target, eps):
    """Vectorized twin of the scalar interval routine (arrays over observations)."""
    u = np.asarray(u, float)
    if code == CODE_LINEAR:
        slope = t0 + u
        xs = np.where(slope < 0, hi, lo)
        v = slope * xs
        with np.errstate(divide="ignore", invalid="ignore"):
            cut = (v + eps) / slope
        left = np.where(slope < 0, np.maximum(lo - eps, cut), lo - eps)
        right = np.where(slope > 0, np.minimum(hi + eps, cut), hi + eps)
        bad = left > right
        return np.where(bad, xs, left), np.where(bad, xs, right)
    if code == CODE_SEPQUAD:
        aa = a
        xc = (c * t0 + u + shift) / (2.0 * a)
    else:
        aa = t0 + 1.0
        xc = (target * t0 + t1 + u) / aa
    xs = np.clip(xc, lo, hi)
    if eps == 0.0:
        return xs, xs.copy()
    r = np.sqrt((xs - xc) ** 2 + eps / aa)
    left = np.maximum(xc - r, lo - eps)
    right = np.minimum(xc + r, hi + eps)
    bad = left > right
    return np.where(bad, xs, left), np.where(bad, xs, right)


def _risk_grid_1d_np(code, u, y, thetas, lo, hi, a, c, shift, target, eps):
    out = np.empty(thetas.shape[0])
    for g in range(thetas.shape[0]):
        t1 = thetas[g, 1] if thetas.shape[1] > 1 else 0.0
        left, right = interval_1d_numpy(code, u, thetas[g, 0], t1, lo, hi, a, c, shift, target, eps)
        x = np.clip(y, left, right)
        out[g] = np.mean((y - x) ** 2)
    return out


# ---------------------------------------------------------------------------
# KKA / VIA residuals for box-constrained families


@njit
def _box_grad(code, y, u, tk, t1, a, c, shift, target):
    if code == CODE_LINEAR:
        return tk + u
    if code == CODE_SEPQUAD:
        return 2.0 * a * y - (c * tk + u + shift)
    return 2.0 * tk * (y - target) + 2.0 * (y - t1 - u)


@njit
def _kka_pair(s, glo, ghi):
    """min over lam >= 0 of (s - l1 + l2)^2 + (l1 glo)^2 + (l2 ghi)^2."""
    best = s * s
    if s > 0 and math.isfinite(glo):
        v = s * s * glo * glo / (1.0 + glo * glo)
        if v < best:
            best = v
    if s < 0 and math.isfinite(ghi):
        v = s * s * ghi * ghi / (1.0 + ghi * ghi)
        if v < best:
            best = v
    return best


@njit(parallel=True)
def _box_baseline_grid_nb(kind, code, u, y, thetas, lo, hi, a, c, shift, target):
    G = thetas.shape[0]
    n, d = y.shape
    out = np.empty(G)
    for g in prange(G):
        total = 0.0
        for i in range(n):
            acc = 0.0
            for k in range(d):
                if code == CODE_COMFORT:
                    tk = thetas[g, 0]
                    t1 = thetas[g, 1]
                else:
                    tk = thetas[g, k]
                    t1 = 0.0
                s = _box_grad(code, y[i, k], u[i, k], tk, t1, a, c, shift, target)
                glo = lo[k] - y[i, k]
                ghi = y[i, k] - hi[k]
                if kind == 0:
                    # max over the box of -s (x - y)
                    acc += max(-s * glo, -s * (hi[k] - y[i, k]))
                else:
                    acc += _kka_pair(s, glo, ghi)
            if kind == 0:
                if acc < 0.0:
                    acc = 0.0
                total += acc * acc
            else:
                total += acc
        out[g] = total / n
    return out


def box_gradients_numpy(code, u, y, theta, a, c, shift, target):
    if code == CODE_LINEAR:
        return theta + u
    if code == CODE_SEPQUAD:
        return 2.0 * a * y - (c * theta + u + shift)
    return 2.0 * theta[0] * (y - target) + 2.0 * (y - theta[1] - u)


def via_slack_box_numpy(s, y, lo, hi):
    with np.errstate(invalid="ignore"):
        per = np.maximum(-s * (lo - y), -s * (hi - y))
    return np.maximum(per.sum(axis=1), 0.0)


def kka_box_numpy(s, y, lo, hi):
    glo = lo - y
    ghi = y - hi
    best = s * s
    with np.errstate(invalid="ignore", over="ignore"):
        v_lo = np.where(np.isfinite(glo), s * s * glo * glo / (1.0 + glo * glo), np.inf)
        v_hi = np.where(np.isfinite(ghi), s * s * ghi * ghi / (1.0 + ghi * ghi), np.inf)
    best = np.where(s > 0, np.minimum(best, v_lo), best)
    best = np.where(s < 0, np.minimum(best, v_hi), best)
    return best.sum(axis=1)


def _box_baseline_grid_np(kind, code, u, y, thetas, lo, hi, a, c, shift, target):
    out = np.empty(thetas.shape[0])
    for g in range(thetas.shape[0]):
        s = box_gradients_numpy(code, u, y, thetas[g], a, c, shift, target)
        if kind == 0:
            out[g] = np.mean(via_slack_box_numpy(s, y, lo, hi) ** 2)
        else:
            out[g] = np.mean(kka_box_numpy(s, y, lo, hi))
    return out


# ---------------------------------------------------------------------------
# KKA residual for the simplex (one scalar coupling multiplier)


@njit
def _simplex_kka_one(s, y, t2, order):
    # F(nu) = nu^2 t2 + sum_k psi_k(s_k + nu), psi_k(z) = w_k z^2 (z > 0) or z^2
    d = s.shape[0]
    den = t2
    num = 0.0
    for k in range(d):
        den += 1.0
        num += s[k]
    best_nu = 0.0
    found = False
    prev = -np.inf
    for j in range(d + 1):
        nxt = -s[order[j]] if j < d else np.inf
        if den > 0.0:
            root = -num / den
            if root >= prev and root <= nxt:
                best_nu = root
                found = True
                break
        if j < d:
            k = order[j]
            w = y[k] * y[k] / (1.0 + y[k] * y[k])
            den += w - 1.0
            num += (w - 1.0) * s[k]
            prev = nxt
    if not found:
        best_val = np.inf
        for j in range(d):
            nu = -s[order[j]]
            v = _simplex_kka_value(s, y, t2, nu)
            if v < best_val:
                best_val = v
                best_nu = nu
    return _simplex_kka_value(s, y, t2, best_nu)


@njit
def _simplex_kka_value(s, y, t2, nu):
    v = nu * nu * t2
    for k in range(s.shape[0]):
        z = s[k] + nu
        if z > 0:
            v += z * z * y[k] * y[k] / (1.0 + y[k] * y[k])
        else:
            v += z * z
    return v


@njit
def _simplex_kka_nb(S, Y):
    n, d = S.shape
    out = np.empty(n)
    for i in range(n):
        t = 0.0
        for k in range(d):
            t += Y[i, k]
        t -= 1.0
        order = np.argsort(-S[i])
        out[i] = _simplex_kka_one(S[i], Y[i], t * t, order)
    return out


def _simplex_kka_np(S, Y):
    # every segment's stationary point, clipped into the segment; convexity
    # makes the smallest of those the global minimum
    n, d = S.shape
    t2 = (Y.sum(axis=1) - 1.0) ** 2
    w = Y**2 / (1.0 + Y**2)
    bps = np.sort(-S, axis=1)
    edges = np.hstack([np.full((n, 1), -np.inf), bps, np.full((n, 1), np.inf)])
    best = np.full(n, np.inf)
    for j in range(d + 1):
        left, right = edges[:, j], edges[:, j + 1]
        mid = np.where(
            np.isfinite(left) & np.isfinite(right), 0.5 * (left + right),
            np.where(np.isfinite(left), left + 1.0, right - 1.0),
        )
        pos = (S + mid[:, None]) > 0
        coef = np.where(pos, w, 1.0)
        den = t2 + coef.sum(axis=1)
        num = (coef * S).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            root = np.where(den > 0, -num / den, mid)
        nu = np.clip(root, left, right)
        nu = np.where(np.isfinite(nu), nu, mid)
        z = S + nu[:, None]
        val = nu**2 * t2 + np.where(z > 0, w * z**2, z**2).sum(axis=1)
        best = np.minimum(best, val)
    return best


# ---------------------------------------------------------------------------
# Epanechnikov kernel sums for several bandwidths at once


@njit(parallel=True)
def _kernel_sums_nb(uq, ur, yr, gammas):
    nq, m = uq.shape
    nr, d = yr.shape
    G = gammas.shape[0]
    num = np.zeros((G, nq, d))
    den = np.zeros((G, nq))
    inv = np.empty(G)
    for g in range(G):
        inv[g] = 1.0 / (gammas[g] * gammas[g])
    for i in prange(nq):
        for j in range(nr):
            d2 = 0.0
            for k in range(m):
                diff = ur[j, k] - uq[i, k]
                d2 += diff * diff
            for g in range(G):
                r = d2 * inv[g]
                if r <= 1.0:
                    w = 0.75 * (1.0 - r)
                    den[g, i] += w
                    for k in range(d):
                        num[g, i, k] += w * yr[j, k]
    return num, den


def _kernel_sums_np(uq, ur, yr, gammas, max_cells=4_000_000):
    nq, m = uq.shape
    nr, d = yr.shape
    G = gammas.shape[0]
    num = np.zeros((G, nq, d))
    den = np.zeros((G, nq))
    step = max(1, max_cells // max(1, nr * m))
    for start in range(0, nq, step):
        sl = slice(start, min(nq, start + step))
        diff = ur[None, :, :] - uq[sl, None, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        for g in range(G):
            r = d2 / (gammas[g] * gammas[g])
            K = np.where(r <= 1.0, 0.75 * (1.0 - r), 0.0)
            den[g, sl] = K.sum(axis=1)
            num[g, sl] = K @ yr
    return num, den


# ---------------------------------------------------------------------------
# dispatch


def _use_numba(backend):
    if backend is None:
        return _accel.USE_NUMBA
    if backend == "numba":
        if not _accel.HAS_NUMBA:  # pragma: no cover
            raise RuntimeError("numba backend requested but numba is not installed")
        return True
    if backend == "numpy":
        return False
    raise ValueError(f"unknown backend {backend!r}")


def risk_grid_1d(code, u, y, thetas, lo, hi, a, c, shift, target, eps, backend=None):
    """Mean squared distance to the eps-solution interval, for each grid row."""
    u = np.ascontiguousarray(u, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    thetas = np.ascontiguousarray(np.atleast_2d(thetas), dtype=float)
    args = (int(code), u, y, thetas, float(lo), float(hi), float(a), float(c),
            float(shift), float(target), float(eps))
    if _use_numba(backend):
        return _risk_grid_1d_nb(*args)
    return _risk_grid_1d_np(*args)


def box_baseline_grid(kind, code, u, y, thetas, lo, hi, a, c, shift, target, backend=None):
    """Mean VIA (``kind=0``) or KKA (``kind=1``) loss for each grid row."""
    u = np.ascontiguousarray(u, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    thetas = np.ascontiguousarray(np.atleast_2d(thetas), dtype=float)
    lo = np.ascontiguousarray(lo, dtype=float)
    hi = np.ascontiguousarray(hi, dtype=float)
    args = (int(kind), int(code), u, y, thetas, lo, hi, float(a), float(c),
            float(shift), float(target))
    if _use_numba(backend):
        return _box_baseline_grid_nb(*args)
    return _box_baseline_grid_np(*args)


def simplex_kka_residuals(S, Y, backend=None):
    """Per-observation minimal squared KKT residual on the simplex."""
    S = np.ascontiguousarray(S, dtype=float)
    Y = np.ascontiguousarray(Y, dtype=float)
    if _use_numba(backend):
        return _simplex_kka_nb(S, Y)
    return _simplex_kka_np(S, Y)


def kernel_sums(uq, ur, yr, gammas, backend=None):
    """Raw Epanechnikov sums ``sum_j K((u_j - u_i)/gamma)`` and ``sum_j y_j K``.

    Returns ``(num, den)`` with shapes ``(G, nq, d)`` and ``(G, nq)``.
    """
    uq = np.ascontiguousarray(uq, dtype=float)
    ur = np.ascontiguousarray(ur, dtype=float)
    yr = np.ascontiguousarray(yr, dtype=float)
    gammas = np.ascontiguousarray(np.atleast_1d(gammas), dtype=float)
    if _use_numba(backend):
        return _kernel_sums_nb(uq, ur, yr, gammas)
    return _kernel_sums_np(uq, ur, yr, gammas)
