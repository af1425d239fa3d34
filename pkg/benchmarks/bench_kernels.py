"""Time the numba kernels against their pure-numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

Each case runs once untimed per backend (to compile and warm caches), then
``--repeat`` timed runs; the best time is reported.  Outputs are compared
across backends so a speedup never hides a mismatch.
"""
import argparse
import time

import numpy as np

from spreadlab import kernels
from spreadlab._accel import HAVE_NUMBA, set_backend
from spreadlab.ensemble import EnsembleParams, sample_biregular


def _cases(scale):
    n = int(4096 * scale) // 2 * 2
    A = sample_biregular(EnsembleParams(n, n // 2, 6, 3, seed=0))
    G = A.graph
    small = sample_biregular(EnsembleParams(48, 24, 6, 3, seed=1)).graph
    rng = np.random.default_rng(0)
    x = rng.standard_normal(A.n)
    dense = sample_biregular(EnsembleParams(24, 12, 6, 3, seed=2)).to_dense()[:, :4]
    starts = rng.standard_normal((32, 4))
    return {
        "sample_biregular": lambda: sample_biregular(EnsembleParams(n, n // 2, 6, 3, seed=3)).graph.right,
        "tree_depths": lambda: kernels.tree_depths(G.left_ptr, G.right, G.right_ptr, G.right_nbrs, 3, 6, 5),
        "subset_scan": lambda: kernels.subset_scan(small.neighbor_table(), small.n_right, 3)[:2],
        "edge_matvec": lambda: kernels.edge_matvec(G.left, G.right, A.signs, x, A.m),
        "lp_extremes": lambda: kernels.lp_extremes(dense, 1.5, starts, 300)[:2],
    }


def _same(a, b):
    if isinstance(a, (tuple, list)):
        return all(_same(u, v) for u, v in zip(a, b))
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), rtol=1e-9, atol=1e-12)


def _best(fn, repeat):
    out = fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0, help="multiplies the sampled matrix size")
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    cases = _cases(args.scale)
    print(f"{'kernel':<18}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}  match")
    prev = set_backend("numba")
    try:
        for name, fn in cases.items():
            set_backend("numba")
            t_nb, out_nb = _best(fn, args.repeat)
            set_backend("numpy")
            t_np, out_np = _best(fn, args.repeat)
            print(f"{name:<18}{1e3 * t_nb:>12.3f}{1e3 * t_np:>12.3f}{t_np / t_nb:>10.1f}  {_same(out_nb, out_np)}")
    finally:
        set_backend(prev)


if __name__ == "__main__":
    main()
