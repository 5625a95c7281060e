"""Time the compiled core against the numpy fallback on realistic inputs.

    python3 benchmarks/bench_core.py [--repeat 5]

Inputs mirror actual use: the sine transform sizes of a kernel table for an
n = 48 grid, and the power term on a 48^3 and a 64^3 field.
"""

import argparse
import timeit

import numpy as np

from sbplab import _fallback
from sbplab.grid import Grid
from sbplab.kernels import default_spec, quadrature_nodes

try:
    from sbplab import _core
except ImportError:
    _core = None


def cases():
    g = Grid(48, 16.0)
    spec = default_spec(g, "bopp_podolsky", 1.0)
    k = np.pi / (4.0 * g.L) * np.sqrt(np.arange(3 * (2 * g.n) ** 2 + 1, dtype=float))[::7]
    r, w = quadrature_nodes(spec, float(k.max()))
    wg = w * spec.r_times_kernel(r)
    yield f"sine_transform ({k.size} k x {r.size} r)", "sine_transform", (k, r, wg)
    rng = np.random.default_rng(0)
    for n in (48, 64):
        u = rng.normal(size=n ** 3)
        yield f"power_term ({n}^3, p=2.5)", "power_term", (u, 2.5)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _core is None:
        print("compiled core not built; run `python3 setup.py build_ext --inplace`")
        return
    print(f"{'case':44s} {'python [ms]':>12s} {'compiled [ms]':>14s} {'speedup':>8s} {'max diff':>10s}")
    for label, name, argv in cases():
        py, cy = getattr(_fallback, name), getattr(_core, name)
        t_py = min(timeit.repeat(lambda: py(*argv), number=1, repeat=args.repeat))
        t_cy = min(timeit.repeat(lambda: cy(*argv), number=1, repeat=args.repeat))
        a, b = py(*argv), cy(*argv)
        a, b = (a[0], b[0]) if isinstance(a, tuple) else (a, b)
        diff = float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-300))
        print(f"{label:44s} {1e3 * t_py:12.2f} {1e3 * t_cy:14.2f} {t_py / t_cy:8.1f} {diff:10.1e}")


if __name__ == "__main__":
    main()
