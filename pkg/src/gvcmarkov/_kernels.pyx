# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled path simulator. Must stay stream-identical to ``_kernels_py``."""
import numpy as np

from libc.stdint cimport uint64_t, int64_t, int32_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t C1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t C2 = 0x94D049BB133111EBULL


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * C1
    z = (z ^ (z >> 27)) * C2
    return z ^ (z >> 31)


cdef inline double unit(uint64_t z) noexcept nogil:
    return <double>(z >> 11) * (1.0 / 9007199254740992.0)


def simulate_paths(const double[:, ::1] cum, int n_transient, int start,
                   uint64_t seed, int64_t first_path, int64_t n_paths,
                   int64_t max_steps, int64_t horizon):
    cdef Py_ssize_t m = cum.shape[1]
    visits_arr = np.zeros((n_paths, n_transient), dtype=np.int32)
    times_arr = np.zeros(n_paths, dtype=np.int64)
    dest_arr = np.zeros(n_paths, dtype=np.int32)
    hv_arr = np.zeros((n_paths if horizon >= 0 else 0, n_transient), dtype=np.int32)
    cdef int32_t[:, ::1] visits = visits_arr
    cdef int64_t[::1] times = times_arr
    cdef int32_t[::1] dest = dest_arr
    cdef int32_t[:, ::1] hv = hv_arr
    cdef uint64_t base = mix64(seed + GOLDEN)
    cdef uint64_t key
    cdef int64_t p, steps, failed = -1
    cdef Py_ssize_t state, lo, hi, mid
    cdef double u
    with nogil:
        for p in range(n_paths):
            key = mix64(base + <uint64_t>(first_path + p + 1) * GOLDEN)
            state = start
            steps = 0
            while True:
                visits[p, state] += 1
                if steps <= horizon:
                    hv[p, state] += 1
                steps += 1
                if steps > max_steps:
                    failed = p
                    break
                u = unit(mix64(key + <uint64_t>steps * GOLDEN))
                lo = 0
                hi = m - 1
                while lo < hi:
                    mid = (lo + hi) >> 1
                    if u >= cum[state, mid]:
                        lo = mid + 1
                    else:
                        hi = mid
                if lo >= n_transient:
                    dest[p] = <int32_t>(lo - n_transient)
                    break
                state = lo
            times[p] = steps
            if failed >= 0:
                break
    return visits_arr, times_arr, dest_arr, hv_arr, failed
