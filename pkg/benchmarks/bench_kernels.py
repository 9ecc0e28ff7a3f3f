"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each case runs the same inputs through both backends and reports the best
wall time of ``--repeat`` runs plus the speed-up.  Workloads for the
fallback are kept small where it loops in Python; the per-item time is what
is compared.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from perron import _backend
from perron.grid import build_grid
from perron.maps import make_map
from perron.transfer import NoiseKernel, averaging_operator, transfer_operator


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def _operator_cases():
    m = make_map("map1", a=0.15)
    grid = build_grid("uniform", 20000, m.domain, m.periodic)
    T = transfer_operator(m, grid)
    G = averaging_operator(NoiseKernel("symmetric-uniform", 0.01), grid)
    rho = np.ones(grid.n)
    out = np.empty(grid.n)

    def stencil(k):
        return lambda: k.stencil_apply(T.idx, T.wts, rho, out)

    def window(k):
        return lambda: k.window_apply(rho, grid.cell_widths(), True, G.idx, G.coef,
                                      G.k_lo, G.k_hi, out)

    return [("stencil_apply", grid.n, stencil, grid.n),
            ("window_apply", grid.n, window, grid.n)]


def _chain_case(steps):
    m = make_map("map3")
    rng = np.random.default_rng(0)

    def chain(k, n):
        u = rng.random((1, n))
        counts = np.zeros(4096, dtype=np.int64)
        return lambda: k.chain_histogram(m.kernel_code, m.kernel_param, 0, 1e-3,
                                         False, -1.0, 1.0, np.array([0.1]), u, counts)

    return chain


def _stadium_case():
    rng = np.random.default_rng(1)

    def run(k, n):
        u = rng.random(n)
        out = np.empty(n, dtype=np.int8)
        return lambda: k.stadium_run(1.0, 1.0, 0.3, 1.0, 0.05, 4, u, out)

    return run


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    if _backend.compiled is None:
        raise SystemExit("compiled extension not built; nothing to compare")
    fast, slow = _backend.compiled, _backend.fallback

    rows = []
    for name, n, make, _ in _operator_cases():
        tc = _best(make(fast), args.repeat)
        tp = _best(make(slow), args.repeat)
        rows.append((name, n, n, tc, tp))
    chain = _chain_case(None)
    n_fast, n_slow = 2_000_000, 20_000
    rows.append(("chain_histogram", n_fast, n_slow,
                 _best(chain(fast, n_fast), args.repeat),
                 _best(chain(slow, n_slow), args.repeat)))
    stadium = _stadium_case()
    n_fast, n_slow = 200_000, 2_000
    rows.append(("stadium_run", n_fast, n_slow,
                 _best(stadium(fast, n_fast), args.repeat),
                 _best(stadium(slow, n_slow), args.repeat)))

    print(f"{'kernel':<16} {'compiled ns/item':>17} {'python ns/item':>15} {'speed-up':>9}")
    for name, nf, ns, tc, tp in rows:
        per_c = 1e9 * tc / nf
        per_p = 1e9 * tp / ns
        print(f"{name:<16} {per_c:>17.1f} {per_p:>15.1f} {per_p / per_c:>8.1f}x")


if __name__ == "__main__":
    main()
