"""Time the compiled and pure-Python RK4 frame-transport kernels on the same input.

    python3 benchmarks/bench_kernels.py [--steps N] [--repeat R]
"""

import argparse
import time

import numpy as np

from semiflat import developing as dv
from semiflat import kernels


def inputs(steps: int):
    """Coefficients of the model field sampled along one loop at height y = 6."""
    fld = dv.LogChartField.model()
    h = 2 * np.pi / steps
    s = np.arange(2 * steps + 1) * (h / 2)
    p = s + 6j
    dp = np.ones_like(p)
    _, psi_p, A, B = fld.coefficients(p)
    st = dv.frame_at(fld, p[0])
    return dp, psi_p, A, B, h, st.f, st.fp


def best_of(fn, repeat: int) -> float:
    out = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out = min(out, time.perf_counter() - t0)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    data = inputs(args.steps)
    print(f"default backend: {kernels.BACKEND}, steps: {args.steps}")
    ref = kernels.rk4_transport(*data, backend="python")
    t_py = best_of(lambda: kernels.rk4_transport(*data, backend="python"), max(1, args.repeat // 2))
    print(f"python  {t_py * 1e3:9.2f} ms  ({t_py / args.steps * 1e6:.2f} us/step)")
    try:
        got = kernels.rk4_transport(*data, backend="cython")
    except ImportError:
        print("cython  not built")
        return
    t_cy = best_of(lambda: kernels.rk4_transport(*data, backend="cython"), args.repeat)
    diff = max(np.max(np.abs(got[0] - ref[0])), np.max(np.abs(got[1] - ref[1])))
    print(f"cython  {t_cy * 1e3:9.2f} ms  ({t_cy / args.steps * 1e6:.2f} us/step)")
    print(f"speedup {t_py / t_cy:.1f}x, max difference {diff:.2e}")


if __name__ == "__main__":
    main()
