"""Compare the numba loop kernels with the vectorised numpy kernels.

Usage::

    python benchmarks/bench_kernels.py [--h 0.05 0.025] [--repeat 5]

Kernel timings are taken in-process (both implementations are importable
side by side). End-to-end timings run a fresh interpreter per backend with
``PLAPEIG_DISABLE_NUMBA`` set accordingly, so the numpy row is what a user
without numba would see.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from plapeig import kernels
from plapeig.geometry import make_disc

PAIRS = [
    ("energy_grad", kernels._energy_grad_loop, kernels._energy_grad_np, "grad"),
    ("hessian_blocks", kernels._hessian_loop, kernels._hessian_np, "hess"),
    ("lp_power", kernels._lp_loop, kernels._lp_np, "lp"),
    ("lp_load", kernels._lp_load_loop, kernels._lp_load_np, "lp"),
]

E2E = """
import json, math, time
from plapeig import radial
from plapeig.fem import solve_first_eig
from plapeig.geometry import make_sector
t = time.perf_counter(); radial.radial_roots(3.0, 2, 2); t_rad = time.perf_counter() - t
m = make_sector(1.0, math.pi, {h})
t = time.perf_counter(); solve_first_eig(m, 3.0); t_fem = time.perf_counter() - t
print(json.dumps({{"radial": t_rad, "fem": t_fem}}))
"""


def kernel_rows(h, repeat, p=3.0):
    m = make_disc(1.0, h)
    grads, area = kernels.shape_gradients(m.vertices, m.triangles)
    u = np.random.default_rng(0).standard_normal(m.n_vertices)
    qp, qw = kernels.quadrature(p)
    args = {
        "grad": (u, m.triangles, grads, area, p),
        "hess": (u, m.triangles, grads, area, p, 1e-10),
        "lp": (u, m.triangles, area, qp, qw, p),
    }
    rows = []
    for name, fast, slow, kind in PAIRS:
        a = args[kind]
        fast(*a)  # compile outside the timing
        tf = min(timeit.repeat(lambda: fast(*a), number=5, repeat=repeat)) / 5
        ts = min(timeit.repeat(lambda: slow(*a), number=5, repeat=repeat)) / 5
        rows.append((name, m.n_triangles, tf, ts))
    return rows


def end_to_end(h):
    out = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, PLAPEIG_DISABLE_NUMBA=flag)
        # first run populates the numba on-disk cache, second is timed
        for _ in range(2):
            r = subprocess.run([sys.executable, "-c", E2E.format(h=h)], env=env, capture_output=True, text=True, check=True)
        out[label] = json.loads(r.stdout)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, nargs="+", default=[0.05, 0.025])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    print(f"{'kernel':<16}{'triangles':>10}{'numba ms':>12}{'numpy ms':>12}{'ratio':>8}")
    for h in args.h:
        for name, nt, tf, ts in kernel_rows(h, args.repeat):
            print(f"{name:<16}{nt:>10}{tf * 1e3:>12.3f}{ts * 1e3:>12.3f}{ts / tf:>8.2f}")
    print()
    print(f"{'end to end (p=3)':<24}{'numba s':>10}{'numpy s':>10}")
    for h in args.h:
        e = end_to_end(h)
        print(f"{'half-disc h=' + format(h, 'g'):<24}{e['numba']['fem']:>10.3f}{e['numpy']['fem']:>10.3f}")
    e = end_to_end(args.h[0])
    print(f"{'radial roots':<24}{e['numba']['radial']:>10.3f}{e['numpy']['radial']:>10.3f}")


if __name__ == "__main__":
    main()
