"""Compiled vs pure-Python simulation kernel.

Runs ``simulate_batch`` on the case-study inputs with both backends, checks
that they agree, and prints wall-clock times and the speed-up.

    python benchmarks/bench_kernels.py [--paths 20000] [--dt 1e-3] [--repeat 3]
"""
import argparse
import time

import numpy as np

from optdiv import _kernels_py
from optdiv.boundary import TimeGrid, solve_boundary
from optdiv.problem import default_problem
from optdiv.simulate import NoDividends, OptimalBarrier, StepGrid, _inputs

try:
    from optdiv import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def _best_of(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scheme", default="bridge", choices=_kernels_py.SCHEMES)
    args = ap.parse_args(argv)

    p = default_problem()
    b = solve_boundary(p, TimeGrid.geometric(p.T, 64))
    grid = StepGrid.make(0.0, p.T, args.dt)
    upper, level, pen_w, f_w, m_w = _inputs(p, [OptimalBarrier(b), NoDividends()], grid)
    xs = np.array([0.25, 0.5, 1.0]) * float(b.values[0])

    def run(mod):
        return lambda: mod.simulate_batch(xs, upper, level, pen_w, f_w, m_w, p.diff.mu,
                                          p.diff.sigma, grid.dt, args.paths, 7, 0,
                                          args.scheme, True)

    steps = grid.times.size - 1
    print(f"{args.paths} paths x {steps} steps x 2 strategies x 3 start levels ({args.scheme})")
    t_py, out_py = _best_of(run(_kernels_py), args.repeat)
    print(f"python : {t_py:8.3f} s")
    if _compiled is None:
        print("cython : not built")
        return 0
    t_cy, out_cy = _best_of(run(_compiled), args.repeat)
    dev = max(float(np.max(np.abs(out_cy[k] - out_py[k]))) for k in out_py)
    print(f"cython : {t_cy:8.3f} s")
    print(f"speed-up {t_py / t_cy:.1f}x, max output difference {dev:.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
