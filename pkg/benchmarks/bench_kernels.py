"""Time the compiled kernels against their NumPy counterparts.

Usage::

    python benchmarks/bench_kernels.py [--rows 50000] [--repeat 5] [--json out.json]

Reports the best-of-``repeat`` wall time of one split-search level, one
batch of series evaluations and one whole depth-6 tree for each backend.
"""
import argparse
import json
import math
import sys
import timeit

import numpy as np

from zitboost import kernels
from zitboost.engine import SPLIT_TIE_RTOL, BoostConfig, PresortedMatrix, fit_tree
from zitboost.tweedie import SERIES_MAX_TERMS, SERIES_REL_TOL


def level_args(rng, n, n_feat, n_nodes):
    X = np.round(rng.normal(size=(n, n_feat)), 2)
    pm = PresortedMatrix(X)
    node_of = rng.integers(0, n_nodes, size=n).astype(np.intp)
    g, h = rng.normal(size=n), rng.uniform(0.1, 2.0, n)
    node_g = np.bincount(node_of, weights=g, minlength=n_nodes)
    node_h = np.bincount(node_of, weights=h, minlength=n_nodes)
    node_n = np.bincount(node_of, minlength=n_nodes).astype(np.intp)
    return (pm.xt, pm.order, node_of, g, h, node_g, node_h, node_n, 1.0, 1, SPLIT_TIE_RTOL)


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=50_000)
    parser.add_argument("--features", type=int, default=8)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--json", help="also write the timings to this file")
    args = parser.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the NumPy backend is timed", file=sys.stderr)
    rng = np.random.default_rng(0)
    scan = level_args(rng, args.rows, args.features, 16)
    y = rng.gamma(0.8, 2.0, args.rows)
    series = (y, 1.3, 1.5, math.log(SERIES_REL_TOL), SERIES_MAX_TERMS)
    X = np.round(rng.normal(size=(args.rows, args.features)), 2)
    pm = PresortedMatrix(X)
    g, h = rng.normal(size=args.rows), rng.uniform(0.1, 2.0, args.rows)
    cfg = BoostConfig(max_depth=6, l2_lambda=1.0)

    results = {}
    for name, mod in backends.items():
        def tree():
            saved = kernels.scan_level
            kernels.scan_level = mod.scan_level
            try:
                fit_tree(g, h, pm, cfg)
            finally:
                kernels.scan_level = saved

        results[name] = {
            "scan_level": best_time(lambda: mod.scan_level(*scan), args.repeat),
            "log_a_series": best_time(lambda: mod.log_a_series(*series), args.repeat),
            "fit_tree_depth6": best_time(tree, args.repeat),
        }

    print(f"rows={args.rows} features={args.features} best of {args.repeat}")
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in results) +
          ("     speed-up" if len(results) > 1 else ""))
    for kernel in results["python"]:
        row = f"{kernel:<18}" + "".join(f"{results[b][kernel] * 1e3:>10.2f}ms" for b in results)
        if "cython" in results:
            row += f"{results['python'][kernel] / results['cython'][kernel]:>12.1f}x"
        print(row)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"rows": args.rows, "features": args.features, "seconds": results},
                      fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
