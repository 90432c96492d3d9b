"""Compiled vs pure-Python kernel timings.

    python benchmarks/bench_kernels.py [--sizes 500 2000] [--repeat 5] [--json out.json]

Reports the best-of-``repeat`` wall time per call for each hot kernel and
for one full ``train_model`` on a two-Gaussian base chunk, with the
dispatcher pointed at each backend in turn.
"""
import argparse
import json
import sys
import timeit

import numpy as np

from clusterdrift import _kernels_py, kernels
from clusterdrift.detector import train_model
from clusterdrift.streamgen import gen_base, two_gaussian_spec

try:
    from clusterdrift import _kernels as _compiled
except ImportError:
    _compiled = None

KERNELS = ("pairwise_sq_dists", "nearest_neighbor", "assign_nearest", "competitive_epoch")


def kernel_calls(impl, n, rng):
    X = np.ascontiguousarray(rng.normal(size=(n, 2)))
    P = np.ascontiguousarray(X[:10].copy())
    order = np.arange(n, dtype=np.int64)
    return {
        "pairwise_sq_dists": lambda: impl.pairwise_sq_dists(X),
        "nearest_neighbor": lambda: impl.nearest_neighbor(X),
        "assign_nearest": lambda: impl.assign_nearest(X, P),
        # the epoch moves prototypes in place, so every call gets a fresh copy
        "competitive_epoch": lambda: impl.competitive_epoch(P.copy(), X, order, 0.05, 0.02),
    }


def best_time(fn, repeat):
    fn()  # warm up
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def with_backend(impl, fn):
    saved = {k: getattr(kernels, k) for k in KERNELS}
    try:
        for k in KERNELS:
            setattr(kernels, k, getattr(impl, k))
        return fn()
    finally:
        for k, v in saved.items():
            setattr(kernels, k, v)


def run(sizes, repeat):
    backends = {"python": _kernels_py}
    if _compiled is not None:
        backends["compiled"] = _compiled
    rows = []
    for n in sizes:
        for name, impl in backends.items():
            calls = kernel_calls(impl, n, np.random.default_rng(0))
            for k, fn in calls.items():
                rows.append({"n": n, "op": k, "backend": name, "seconds": best_time(fn, repeat)})
            base = gen_base(two_gaussian_spec(n_base=n, seed=0))
            t = with_backend(impl, lambda: best_time(lambda: train_model(base), max(1, repeat // 2)))
            rows.append({"n": n, "op": "train_model", "backend": name, "seconds": t})
    return rows


def render(rows):
    ops = list(dict.fromkeys(r["op"] for r in rows))
    sizes = list(dict.fromkeys(r["n"] for r in rows))
    t = {(r["n"], r["op"], r["backend"]): r["seconds"] for r in rows}
    lines = [f"{'n':>6}  {'op':<18} {'python ms':>11} {'compiled ms':>12} {'speedup':>8}"]
    for n in sizes:
        for op in ops:
            py, cc = t[(n, op, "python")], t.get((n, op, "compiled"))
            cc_s = f"{cc * 1e3:12.2f}" if cc is not None else f"{'n/a':>12}"
            sp = f"{py / cc:7.1f}x" if cc else f"{'':>8}"
            lines.append(f"{n:>6}  {op:<18} {py * 1e3:11.2f} {cc_s} {sp}")
    return "\n".join(lines)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 2000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write raw timings here")
    args = ap.parse_args(argv)
    if _compiled is None:
        print("compiled extension not built; timing the python backend only", file=sys.stderr)
    rows = run(args.sizes, args.repeat)
    print(f"active backend: {kernels.BACKEND}")
    print(render(rows))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
