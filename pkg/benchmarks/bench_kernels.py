"""Time the compiled path simulator against the numpy fallback.

Both backends draw the same counter-based streams, so the script also checks
that their outputs agree bit for bit.

Usage::

    python3 benchmarks/bench_kernels.py [--paths N] [--repeat R]
"""
import argparse
import time

import numpy as np

from gvcmarkov import kernels, markov
from gvcmarkov.ingest import SyntheticSpec, chain_example, random_economy
from gvcmarkov.networks import build_output_network


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases():
    yield "three-country p=q=0.3", markov.output_chain(
        build_output_network(chain_example(0.3, 0.3)))
    for lam in (0.5, 0.9):
        e = random_economy(SyntheticSpec(3, 4, 0.5, lam, seed=1))
        yield f"n=12 lambda={lam}", markov.output_chain(build_output_network(e),
                                                        by_country=True)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not kernels.HAVE_COMPILED:
        print("compiled kernels unavailable; timing the numpy fallback only")
    print(f"{'case':<24}{'numpy s':>10}{'cython s':>10}{'speedup':>9}  identical")
    for name, chain in cases():
        t_py, r_py = _time(lambda: markov.simulate(chain, 0, 7, args.paths, backend="numpy"),
                           args.repeat)
        if kernels.HAVE_COMPILED:
            t_cy, r_cy = _time(lambda: markov.simulate(chain, 0, 7, args.paths,
                                                       backend="cython"), args.repeat)
            same = all(np.array_equal(getattr(r_py, f), getattr(r_cy, f))
                       for f in ("visits", "times", "dest"))
            print(f"{name:<24}{t_py:>10.3f}{t_cy:>10.3f}{t_py / t_cy:>8.1f}x  {same}")
        else:
            print(f"{name:<24}{t_py:>10.3f}{'-':>10}{'-':>9}  -")


if __name__ == "__main__":
    main()
