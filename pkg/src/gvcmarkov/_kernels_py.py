"""Pure numpy path simulator, used when the compiled kernel is unavailable.

Paths advance in lockstep. Random draws come from the same counter-based
splitmix64 stream as the compiled kernel, so both produce identical paths.
"""
import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(k) for k in (30, 27, 31, 11))


def mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _C1
    z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


def unit(z: np.ndarray) -> np.ndarray:
    return (z >> _S11).astype(np.float64) * (1.0 / 9007199254740992.0)


def _u64(v: int) -> np.uint64:
    return np.uint64(v & MASK)


def simulate_paths(cum, n_transient, start, seed, first_path, n_paths,
                   max_steps, horizon):
    cum = np.ascontiguousarray(cum, dtype=np.float64)
    m = cum.shape[1]
    visits = np.zeros((n_paths, n_transient), dtype=np.int32)
    times = np.zeros(n_paths, dtype=np.int64)
    dest = np.zeros(n_paths, dtype=np.int32)
    hv = np.zeros((n_paths if horizon >= 0 else 0, n_transient), dtype=np.int32)

    base = int(mix64(np.array([_u64(seed + GOLDEN)]))[0])
    offsets = (np.arange(n_paths, dtype=np.uint64) + _u64(first_path + 1)) * _u64(GOLDEN)
    keys = mix64(offsets + _u64(base))

    alive = np.arange(n_paths)
    state = np.full(n_paths, start, dtype=np.int64)
    steps = 0
    while alive.size:
        visits[alive, state] += 1
        if steps <= horizon:
            hv[alive, state] += 1
        steps += 1
        if steps > max_steps:
            return visits, times, dest, hv, int(alive[0])
        u = unit(mix64(keys[alive] + _u64(steps * GOLDEN)))
        nxt = np.minimum((u[:, None] >= cum[state]).sum(axis=1), m - 1)
        done = nxt >= n_transient
        if done.any():
            idx = alive[done]
            times[idx] = steps
            dest[idx] = nxt[done] - n_transient
            alive = alive[~done]
            state = nxt[~done]
        else:
            state = nxt
    return visits, times, dest, hv, -1
