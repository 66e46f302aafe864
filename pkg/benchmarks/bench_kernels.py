"""Time the numba kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3] [--steps 10000]

Each kernel is called once per backend to warm up (numba compiles or loads
its cache), then timed ``--repeat`` times; the best time is reported.
"""
import argparse
import time

import numpy as np

from open_dgd import _accel, kernels
from open_dgd.functions import FunctionClassParams, random_quadratic_arrays
from open_dgd.network import erdos_renyi
from open_dgd.open_system import EventSchedule
from open_dgd.worstcase import SearchSpace


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(steps, seed=0):
    rng = np.random.default_rng(seed)
    n, d = 10, 3
    params = FunctionClassParams(1.0, 50.0, d)
    H, C = random_quadratic_arrays(rng, n, params)
    net = erdos_renyi(n, 0.5, seed=seed)
    rho = 1.0
    eta = 1.0 / (params.beta + rho * net.lambda_n)
    x0 = rng.standard_normal((n, d))
    lap = net.laplacian

    n_ev = steps // 10
    ev_H, ev_C = random_quadratic_arrays(rng, n_ev, params)
    events = (np.arange(n_ev) * 10, rng.integers(n, size=n_ev), ev_H, ev_C)
    pool = EventSchedule(mode="adversarial_worst").adversary_pool(params)

    m = 2000
    gauss = rng.standard_normal((m, d, d))
    eig_u = rng.random((m, d))
    dir_gauss = rng.standard_normal((m, d))
    rad_u = rng.random(m)

    space = SearchSpace(4, 100.0)
    points = np.array([space.random_point(rng) for _ in range(m)])

    return {
        f"trajectory ({steps} steps, {n_ev} swaps, tracked)":
            lambda b: kernels.trajectory(H, C, lap, rho, eta, x0, steps, events=events,
                                         track=True, backend=b),
        f"greedy adversary ({steps // 10} steps)":
            lambda b: kernels.greedy_trajectory(H, C, lap, rho, eta, x0, steps // 10, pool,
                                                backend=b),
        f"synthesize ({m} quadratics, d={d})":
            lambda b: kernels.synthesize_quadratics(gauss, eig_u, dir_gauss, rad_u, 1.0, 50.0,
                                                    backend=b),
        f"pair distance ({m} points, n=4)":
            lambda b: kernels.pair_distance(points, 3, 1.0, 100.0, backend=b),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--steps", type=int, default=10_000)
    args = ap.parse_args(argv)
    backends = _accel.available_backends()
    print(f"{'kernel':48s}" + "".join(f"{b:>12s}" for b in backends) + "     speedup")
    for name, fn in cases(args.steps).items():
        t = {b: best_of(lambda: fn(b), args.repeat) for b in backends}
        row = f"{name:48s}" + "".join(f"{t[b]:11.4f}s" for b in backends)
        if "numba" in t:
            row += f"  {t['numpy'] / t['numba']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
