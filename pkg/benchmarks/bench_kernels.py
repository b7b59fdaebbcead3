"""Time the numba and pure-numpy kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The first numba call (compilation or cache load) is excluded from timing.
"""
import argparse
import time

import numpy as np

from lursync import _kernels as K
from lursync._accel import HAVE_NUMBA
from lursync.simulator import build_chua_network_system


def best_of(f, repeat):
    f()  # warm up
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        f()
        out.append(time.perf_counter() - t0)
    return min(out)


def jacobi_case():
    a = np.random.default_rng(0).standard_normal((40, 40))
    a = a + a.T
    return lambda fn: fn(a.copy(), 1e-12, 100)


def riccati_case():
    rng = np.random.default_rng(1)
    n = 6
    A = rng.standard_normal((n, n))
    A *= 0.9 / max(abs(np.linalg.eigvals(A)))
    B = rng.standard_normal((n, 1))
    F = np.stack([A] + [0.2 * rng.standard_normal((n, n)) for _ in range(4)])
    w = np.array([1.0, 0.1, 0.1, 0.1, 0.1])
    Sigma = np.array([[6.0]])
    Q0 = np.outer(B, B) / 6.0 + 1e-6 * np.eye(n)
    P0 = 1e-6 * np.eye(n)
    return lambda fn: fn(F, w, B, Sigma, Q0, P0, 0.5, 10000, 1e-9, 1e12, 1e-9)


def simulate_case():
    sys, nl = build_chua_network_system()
    rng = np.random.default_rng(2)
    trials, N, H = 20, 4, 2000
    ei, ej = np.array([0, 1, 2, 0]), np.array([1, 2, 3, 3])
    x0 = np.array([0.5, 0.1, -0.2]) + 1e-3 * rng.standard_normal((trials, N, 3))
    w = 1.0 + 0.5 * rng.standard_normal((trials, H, 4))
    v = np.zeros((0, 0, 0, 0))
    G = 0.1 * sys.C.T
    return lambda fn: fn(x0, sys.A, sys.B, sys.C, G, ei, ej, w, v, nl.code, nl.param_array(), 1e150)


CASES = {
    "jacobi 40x40": (jacobi_case, K.jacobi_eigh_nb, K.jacobi_eigh_np),
    "riccati n=6, 4 channels": (riccati_case, K.riccati_iterate_nb, K.riccati_iterate_np),
    "simulate chua ring, 20 trials x 2000 steps": (simulate_case, K.simulate_trials_nb, K.simulate_trials_np),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy kernels are available")
    print(f"{'kernel':45s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, (make, nb, py) in CASES.items():
        run = make()
        t_np = best_of(lambda: run(py), args.repeat)
        if HAVE_NUMBA:
            t_nb = best_of(lambda: run(nb), args.repeat)
            print(f"{name:45s} {1e3 * t_nb:11.3f} {1e3 * t_np:11.3f} {t_np / t_nb:7.1f}x")
        else:
            print(f"{name:45s} {'-':>11s} {1e3 * t_np:11.3f}")


if __name__ == "__main__":
    main()
