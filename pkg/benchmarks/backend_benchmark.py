"""Benchmark the compiled solver kernels against the numpy fallback.

Times one representative solve per penalty kind at benchmark scale
(p = 100, n = 100, fusion penalty with 4950 dual rows) plus the small-tree
configuration, for both available backends.

Run:  python3 benchmarks/backend_benchmark.py [--iters 2000]
"""

import argparse
import time

import numpy as np

from relshift import CounterRng, MuPolicy, PenaltySpec, indicator_matrix
from relshift.simulate import make_study1, make_study2, make_supp_smalltree
from relshift.solver import assemble, available_backends, solve_fista, subgradient_reference


def _problems():
    out = []
    ds1 = make_study1(seed=1)
    x1, y1 = ds1.train()
    spec = PenaltySpec.equi_sparsity(100)
    out.append(("es p=100 (m=4950)", assemble(
        x1.values, y1, spec, 1e-6, mu_policy=MuPolicy.accuracy(1e-2))))

    ds2 = make_study2(seed=1)
    x2, y2 = ds2.train()
    a = indicator_matrix(ds2.tree)
    for kind in ("l1", "cl2", "dl2"):
        spec = PenaltySpec.for_kind(kind, tree=ds2.tree)
        out.append((f"{kind} p=100 tree", assemble(
            x2.values @ a, y2 - y2.mean(), spec, 5e-4,
            mu_policy=MuPolicy.accuracy(1e-2))))

    ds3 = make_supp_smalltree(seed=1)
    x3, y3 = ds3.train()
    a3 = indicator_matrix(ds3.tree)
    spec = PenaltySpec.desc_l2(ds3.tree)
    out.append(("dl2 p=6 small", assemble(
        x3.values @ a3, y3 - y3.mean(), spec, 1e-2,
        mu_policy=MuPolicy.accuracy(1e-3))))
    return out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--iters", type=int, default=2000,
                        help="fixed iteration count per timed solve")
    parser.add_argument("--subgrad-iters", type=int, default=200000)
    args = parser.parse_args()

    backends = available_backends()
    print(f"available backends: {', '.join(backends)}")
    header = f"{'problem':<22}" + "".join(f"{b:>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    for name, prob in _problems():
        times = {}
        for bname in backends:
            t0 = time.perf_counter()
            rep = solve_fista(prob, max_iter=args.iters, tol=1e-15, backend=bname)
            times[bname] = (time.perf_counter() - t0) / rep.n_iter * 1e6
        row = f"{name:<22}" + "".join(f"{times[b]:>11.1f} us" for b in backends)
        if len(times) == 2:
            row += f"{times['python'] / times['compiled']:>9.1f}x"
        print(row)

    print()
    print(f"subgradient oracle ({args.subgrad_iters} iterations, small problem):")
    g = CounterRng(5)
    raw = np.abs(g.standard_normal((50, 8))) + 0.05
    x = raw / raw.sum(axis=1, keepdims=True)
    y = x @ g.standard_normal(8) + 0.1 * g.standard_normal(50)
    prob = assemble(x, y, PenaltySpec.equi_sparsity(8), 0.02)
    for bname in backends:
        t0 = time.perf_counter()
        subgradient_reference(prob, iterations=args.subgrad_iters, step_c=0.1,
                              backend=bname)
        dt = time.perf_counter() - t0
        print(f"  {bname:>9}: {dt:.2f} s ({dt / args.subgrad_iters * 1e6:.2f} us/iter)")


if __name__ == "__main__":
    main()
