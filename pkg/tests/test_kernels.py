import os
import subprocess
import sys

import numpy as np
import pytest

from gvcmarkov import kernels, markov
from gvcmarkov._kernels_py import GOLDEN, MASK, mix64
from gvcmarkov.ingest import SyntheticSpec, chain_example, random_economy
from gvcmarkov.networks import build_input_network, build_output_network

needs_compiled = pytest.mark.skipif(not kernels.HAVE_COMPILED, reason="extension not built")


def mix_scalar(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def path_oracle(cum, start, seed, path):
    """One path replayed with plain Python integers."""
    n = cum.shape[0]
    base = mix_scalar((seed + GOLDEN) & MASK)
    key = mix_scalar((base + (path + 1) * GOLDEN) & MASK)
    state, k = start, 0
    visits = [0] * n
    while True:
        visits[state] += 1
        k += 1
        u = (mix_scalar((key + k * GOLDEN) & MASK) >> 11) * 2.0**-53
        nxt = int(np.searchsorted(cum[state], u, side="right"))
        nxt = min(nxt, cum.shape[1] - 1)
        if nxt >= n:
            return visits, k, nxt - n
        state = nxt


def chains():
    e = random_economy(SyntheticSpec(2, 3, 0.5, None, 4))
    out = build_output_network(e)
    yield markov.output_chain(out, by_country=True)
    yield markov.input_chain(build_input_network(e))
    yield markov.output_chain(build_output_network(chain_example(0.3, 0.2)))


class TestGenerator:
    def test_splitmix_reference_vector(self):
        # first output of splitmix64 seeded with 0
        assert int(mix64(np.array([GOLDEN], dtype=np.uint64))[0]) == 0xE220A8397B1DCDAF
        assert mix_scalar(GOLDEN) == 0xE220A8397B1DCDAF

    @pytest.mark.parametrize("seed", [0, 12345, 2**63 + 7])
    def test_fallback_matches_scalar_oracle(self, seed):
        chain = next(chains())
        cum = markov._cum_table(chain)
        res = markov.simulate(chain, 2, seed, 40, first_path=5, backend="numpy")
        for p in range(40):
            visits, t, d = path_oracle(cum, 2, seed, 5 + p)
            assert list(res.visits[p]) == visits
            assert res.times[p] == t and res.dest[p] == d


class TestBackends:
    @needs_compiled
    @pytest.mark.parametrize("horizon", [None, 0, 3])
    def test_bitwise_identical(self, horizon):
        for chain in chains():
            for start in range(chain.n):
                a = markov.simulate(chain, start, 99, 3000, first_path=17, horizon=horizon,
                                    backend="numpy")
                b = markov.simulate(chain, start, 99, 3000, first_path=17, horizon=horizon,
                                    backend="cython")
                np.testing.assert_array_equal(a.visits, b.visits)
                np.testing.assert_array_equal(a.times, b.times)
                np.testing.assert_array_equal(a.dest, b.dest)
                if horizon is not None:
                    np.testing.assert_array_equal(a.horizon_visits, b.horizon_visits)

    @needs_compiled
    def test_path_limit_same_path(self):
        chain = markov.AbsorbingChain(np.array([[0.9]]), np.array([0.1]))
        for backend in ("numpy", "cython"):
            with pytest.raises(markov.PathLimitError) as err:
                markov.simulate(chain, 0, 1, 500, max_steps=20, backend=backend)
            msg = str(err.value)
            assert "exceeded 20 steps" in msg

    def test_horizon_counts(self):
        chain = next(chains())
        res = markov.simulate(chain, 0, 3, 2000, horizon=4)
        np.testing.assert_array_equal(res.horizon_visits.sum(axis=1),
                                      np.minimum(res.times, 5))

    def test_env_forces_fallback(self):
        env = dict(os.environ, GVC_PURE_PYTHON="1")
        out = subprocess.run(
            [sys.executable, "-c", "from gvcmarkov import kernels; print(kernels.BACKEND)"],
            env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "numpy"

    def test_default_backend(self):
        assert kernels.BACKEND == ("cython" if kernels.HAVE_COMPILED else "numpy")
