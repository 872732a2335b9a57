"""Time the compiled kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel is run once to trigger compilation, then timed ``--repeat``
times per backend; the best time is reported together with the largest
relative difference between the two backends.
"""

import argparse
import time

import numpy as np

from ioest import kernels
from ioest.datagen import generate, get_scenario
from ioest.estimators import default_gamma_grid, delta_net
from ioest.estimators.baselines import KKA, VIA
from ioest.forward import x_gradient_batch
from ioest.risk import _kernel_args


def _cases():
    b = get_scenario("FOP-B")
    data_b = generate(b, 1000, 1)
    grid_b = delta_net(b.theta_box, 0.01)
    code, _, _ = _kernel_args(b.model, grid_b[0])
    risk_args = (code, data_b.u[:, 0], data_b.y[:, 0], grid_b, 0.0, 1.0, 1.0, 1.0, 0.0, 76.0, 0.0)
    yield "risk grid FOP-B (n=1000, 201 pts)", kernels.risk_grid_1d, risk_args

    sdh = get_scenario("SDH-LIKE")
    data_s = generate(sdh, 1000, 1)
    grid_s = delta_net(sdh.theta_box, 0.05)
    code, _, _ = _kernel_args(sdh.model, grid_s[0])
    base = (code, data_s.u, data_s.y, grid_s, sdh.model.lo, sdh.model.hi, 1.0, 1.0, 0.0, 76.0)
    yield f"KKA grid SDH-LIKE (n=1000, {len(grid_s)} pts)", kernels.box_baseline_grid, (KKA, *base)
    yield f"VIA grid SDH-LIKE (n=1000, {len(grid_s)} pts)", kernels.box_baseline_grid, (VIA, *base)

    e = get_scenario("FOP-E(10)")
    data_e = generate(e, 20000, 1)
    S = x_gradient_batch(e.model, data_e.y, data_e.u, e.theta0)
    yield "simplex KKA residuals (n=20000, d=11)", kernels.simplex_kka_residuals, (S, data_e.y)

    d = generate(get_scenario("FOP-D(10)"), 3000, 1)
    gammas = default_gamma_grid(d)
    yield f"kernel sums FOP-D (n=3000, m=10, {len(gammas)} bandwidths)", kernels.kernel_sums, (d.u, d.u, d.y, gammas)


def _best(fn, args, backend, repeat):
    out = fn(*args, backend=backend)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args, backend=backend)
        times.append(time.perf_counter() - t0)
    return min(times), out


def _maxdiff(a, b):
    if isinstance(a, tuple):
        return max(_maxdiff(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    print(f"{'kernel':<48}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'rel diff':>12}")
    for name, fn, fargs in _cases():
        t_nb, out_nb = _best(fn, fargs, "numba", args.repeat)
        t_np, out_np = _best(fn, fargs, "numpy", args.repeat)
        print(f"{name:<48}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>10.1f}{_maxdiff(out_nb, out_np):>12.2e}")


if __name__ == "__main__":
    main()
