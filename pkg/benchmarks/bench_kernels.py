"""Compare the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Times the dense QP on controller-sized problems (6 variables, 12-20 rows),
the planar feasibility test, and one full sub-QP enumeration step.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from vocbf import _kernels_py

try:
    from vocbf import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def _qp_instances(n_inst: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_inst):
        m = int(rng.integers(12, 21))
        G = rng.normal(size=(6, 6))
        Q = G @ G.T + 0.5 * np.eye(6)
        out.append((Q, rng.normal(size=6), rng.normal(size=(m, 6)), rng.normal(size=m) + 1.0))
    return out


def _lp_instances(n_inst: int, seed: int = 1):
    rng = np.random.default_rng(seed)
    return [(rng.normal(size=(6, 2)), rng.normal(size=6)) for _ in range(n_inst)]


def _time(fn, items, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for it in items:
            fn(*it)
        best = min(best, time.perf_counter() - t0)
    return best / len(items)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--n", type=int, default=300)
    args = ap.parse_args(argv)

    qps = _qp_instances(args.n)
    lps = _lp_instances(args.n)
    backends = [("python", _kernels_py)] + ([("compiled", _compiled)] if _compiled else [])
    rows = []
    for name, mod in backends:
        t_qp = _time(mod.solve_qp_dense, qps, args.repeat)
        t_lp = _time(lambda A, b, m=mod: m.halfplane_feasible(A, b, (-1.0, -0.6), (1.0, 0.6)), lps, args.repeat)
        rows.append((name, t_qp, t_lp))
    print(f"{'backend':<10} {'qp_us':>10} {'lp_us':>10}")
    for name, t_qp, t_lp in rows:
        print(f"{name:<10} {1e6 * t_qp:>10.2f} {1e6 * t_lp:>10.2f}")
    if len(rows) == 2:
        print(f"speedup    {rows[0][1] / rows[1][1]:>10.1f} {rows[0][2] / rows[1][2]:>10.1f}")
    else:
        print("compiled extension not available; only the fallback was timed")

    # parity on the same instances
    if _compiled:
        worst = 0.0
        for Q, c, A, b in qps:
            s1, x1, _, _ = _kernels_py.solve_qp_dense(Q, c, A, b)
            s2, x2, _, _ = _compiled.solve_qp_dense(Q, c, A, b)
            assert s1 == s2
            if s1 == 0:
                worst = max(worst, float(np.max(np.abs(x1 - x2))))
        print(f"max |x_python - x_compiled| = {worst:.2e}")


if __name__ == "__main__":
    main()
