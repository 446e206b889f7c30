"""Timing of the compiled core against the numpy fallback.

    python benchmarks/bench_core.py [--repeat 5]

Prints one line per kernel with the best-of-repeat wall time of each
implementation, the speed-up, and the max abs difference of the outputs.
"""
import argparse
import time

import numpy as np

from mesokit import comb
from mesokit._accel import cy_impl, py_impl


def best_time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rng):
    x = rng.uniform(-40, 40, 2000)
    yield "hermite_table(1000, 2000 pts)", lambda m: m.hermite_table(1000, x)

    xs = rng.uniform(-30, 30, 20000)
    yield "hermite_pair(800, 20000 pts)", lambda m: np.stack(m.hermite_pair(800, xs))

    for n in (3, 4):
        u = rng.normal(size=(20000, n))
        u[:, -1] = -u[:, :-1].sum(axis=1)
        xx = np.sort(rng.normal(size=(20000, n)), axis=1)
        tab = comb.composition_table(n)
        yield (f"g_weighted_sum(n={n}, 20000 pts)",
               lambda m, u=u, xx=xx, tab=tab: m.g_weighted_sum(u, xx, 1.0, *tab))

    Y, _ = np.linalg.qr(rng.normal(size=(960, 240)))
    d = rng.random(240)
    yield "dpp_grid_sample(960 x 240)", lambda m: m.dpp_grid_sample(Y, d).astype(float)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if cy_impl is None:
        raise SystemExit("compiled core not built; run `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':36s} {'numpy [s]':>10s} {'cython [s]':>10s} {'speed-up':>9s} {'max diff':>10s}")
    for name, fn in cases(rng):
        tp, op = best_time(lambda: fn(py_impl), args.repeat)
        tc, oc = best_time(lambda: fn(cy_impl), args.repeat)
        diff = float(np.max(np.abs(np.asarray(op) - np.asarray(oc))))
        print(f"{name:36s} {tp:10.4f} {tc:10.4f} {tp / tc:9.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
