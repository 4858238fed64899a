"""Compare the constructive solver with the numerical dual on random ensembles.

Prints the distribution of identified-subset sizes and the worst disagreement.
"""

import argparse
import collections
import time
import warnings

import numpy as np

from qubitdisc.bloch import Ensemble
from qubitdisc.oracle import NotConverged, minimize_dual
from qubitdisc.solver import solve


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-states", type=int, default=6)
    ap.add_argument("--pure", action="store_true")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    sizes = collections.Counter()
    worst = 0.0
    t_solve = t_dual = 0.0
    for _ in range(args.count):
        n = int(rng.integers(2, args.max_states + 1))
        v = rng.standard_normal((n, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        if not args.pure:
            v *= rng.random((n, 1))
        ens = Ensemble.from_bloch(rng.dirichlet(np.ones(n)), v)

        t0 = time.perf_counter()
        rep = solve(ens)
        t1 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NotConverged)
            dual = minimize_dual(ens)
        t2 = time.perf_counter()
        t_solve += t1 - t0
        t_dual += t2 - t1
        sizes[rep.k] += 1
        worst = max(worst, abs(rep.p_corr - dual.value))

    print(f"ensembles        {args.count}")
    print(f"outcomes k       " + ", ".join(f"{k}: {sizes[k]}" for k in sorted(sizes)))
    print(f"max |diff|       {worst:.2e}")
    print(f"solver time      {t_solve / args.count * 1e3:.3f} ms/ensemble")
    print(f"oracle time      {t_dual / args.count * 1e3:.3f} ms/ensemble")


if __name__ == "__main__":
    main()
