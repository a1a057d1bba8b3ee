"""Absorbing chains on the country-industry graph.

Both chains share one representation: a substochastic transient matrix ``Q``
(row convention) and an ``n x K`` matrix of one-step absorption
probabilities. The input chain uses ``Q = A.T`` with value-added shares, the
output chain ``Q = B`` with final-use shares, optionally split by
destination country.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg

from . import kernels
from .core import Labels
from .networks import InputNetwork, OutputNetwork
from .spectral import spectral_radius

ABSORBING_MARGIN = 1e-8
MAX_PATH_STEPS = 10_000_000
ROW_TOL = 1e-10


class NonAbsorbingChainError(ValueError):
    pass


class ExtinctionError(ArithmeticError):
    def __init__(self, message: str, last_t: int):
        super().__init__(message)
        self.last_t = last_t


class PathLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class AbsorbingChain:
    Q: np.ndarray
    absorb: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        absorb = np.asarray(self.absorb, dtype=float)
        if absorb.ndim == 1:
            absorb = absorb[:, None]
        n = Q.shape[0]
        if Q.shape != (n, n) or absorb.shape[0] != n:
            raise ValueError("Q must be square and absorb must have one row per state")
        if (Q < 0).any() or (absorb < 0).any():
            raise ValueError("transition probabilities must be nonnegative")
        gap = np.abs(Q.sum(axis=1) + absorb.sum(axis=1) - 1.0).max(initial=0.0)
        if gap > ROW_TOL:
            raise ValueError(f"rows of the embedded chain miss 1 by {gap:.3g}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "absorb", absorb)

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def K(self) -> int:
        return self.absorb.shape[1]

    @cached_property
    def radius(self) -> float:
        rows = self.Q.sum(axis=1).max(initial=0.0)
        if rows <= 1.0 - ABSORBING_MARGIN:
            return float(rows)  # upper bound is enough
        return spectral_radius(self.Q)

    def check_absorbing(self) -> None:
        if self.radius > 1.0 - ABSORBING_MARGIN:
            raise NonAbsorbingChainError(
                f"spectral radius {self.radius:.12g} of Q is not below 1 - {ABSORBING_MARGIN:g}")

    @cached_property
    def lu(self):
        """LU factors of ``I - Q``, shared by every solve on this chain."""
        self.check_absorbing()
        return linalg.lu_factor(np.eye(self.n) - self.Q, check_finite=False)

    def solve(self, rhs) -> np.ndarray:
        """``(I - Q)^-1 rhs``."""
        return linalg.lu_solve(self.lu, rhs, check_finite=False)

    def with_absorb(self, absorb) -> AbsorbingChain:
        """Same transient part, different split of the absorbing mass."""
        new = AbsorbingChain(self.Q, absorb)
        if "lu" in self.__dict__:
            new.__dict__["lu"] = self.__dict__["lu"]
        return new


def output_chain(net: OutputNetwork, by_country: bool = False) -> AbsorbingChain:
    return AbsorbingChain(net.B, net.D_eta if by_country else net.gamma)


def input_chain(net: InputNetwork) -> AbsorbingChain:
    return AbsorbingChain(net.A.T, net.delta)


@dataclass(frozen=True)
class ChainStatistics:
    """Expected visits ``L``, visit variances ``L2``, and mean ``g`` /
    variance ``h`` of the time to absorption."""

    L: np.ndarray
    L2: np.ndarray
    g: np.ndarray
    h: np.ndarray


def fundamental(chain: AbsorbingChain) -> ChainStatistics:
    L = chain.solve(np.eye(chain.n))
    d = np.diag(L)
    L2 = L * (2.0 * d - 1.0)[None, :] - L * L
    g = L @ np.ones(chain.n)
    h = 2.0 * (L @ g) - g - g * g
    return ChainStatistics(L, L2, g, h)


def absorption_matrix(chain: AbsorbingChain) -> np.ndarray:
    """Probability of ending in each absorbing state, ``(I - Q)^-1 absorb``."""
    return chain.solve(chain.absorb)


def country_split(values, countries, J: int) -> np.ndarray:
    """Spread a per-node vector into an n x J matrix by node country."""
    values = np.asarray(values, dtype=float)
    out = np.zeros((values.size, J))
    out[np.arange(values.size), np.asarray(countries)] = values
    return out


def value_added_distribution(chain: AbsorbingChain, delta, countries, J: int) -> np.ndarray:
    """zeta[i, c]: share of node i's value added originating in country c.

    ``chain`` must be the input chain. ``countries`` gives the 0-based
    country of each node.
    """
    return chain.solve(country_split(delta, countries, J))


def industry_matrix(dist, labels: Labels, r: int, node_map=None) -> np.ndarray:
    """J x J slice of ``dist`` (M or zeta) for 1-based sector ``r``.

    Rows of countries whose sector-r node was dropped as inactive are NaN.
    """
    if not 1 <= r <= labels.S:
        raise IndexError(f"sector ordinal {r} outside 1..{labels.S}")
    dist = np.asarray(dist, dtype=float)
    full_pos = np.arange(labels.J) * labels.S + (r - 1)
    out = np.full((labels.J, dist.shape[1]), np.nan)
    if node_map is None:
        out[:] = dist[full_pos]
        return out
    where = {int(k): i for i, k in enumerate(node_map)}
    for c, pos in enumerate(full_pos):
        if int(pos) in where:
            out[c] = dist[where[int(pos)]]
    return out


def _propagate(vec: np.ndarray, step, t: int) -> tuple[np.ndarray, float]:
    """Apply ``step`` t times, renormalising to unit sum.

    Returns the normalised vector and the log of the dropped mass.
    """
    log_mass = 0.0
    for k in range(t):
        vec = step(vec)
        s = vec.sum()
        if not s > 0 or not math.isfinite(s):
            raise ExtinctionError(f"surviving mass vanished at t={k + 1}", last_t=k)
        vec = vec / s
        log_mass += math.log(s)
    return vec, log_mass


def _start(chain: AbsorbingChain, pi) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (chain.n,) or (pi < 0).any() or not np.isclose(pi.sum(), 1.0):
        raise ValueError("pi must be a probability vector over the transient states")
    return pi


def conditional_state_distribution(chain: AbsorbingChain, pi, t: int) -> np.ndarray:
    """Distribution at time t given no absorption yet: ``pi Q^t / (pi Q^t 1)``."""
    pi = _start(chain, pi)
    Q = chain.Q
    left, _ = _propagate(pi, lambda v: v @ Q, t)
    return left


def doubly_conditional_distribution(chain: AbsorbingChain, pi, tau: int, t: int) -> np.ndarray:
    """Distribution at time tau given no absorption by time t.

    Exact finite-horizon value ``(pi Q^tau)_j (Q^(t-tau) 1)_j / (pi Q^t 1)``.
    """
    if not 0 <= tau <= t:
        raise ValueError("need 0 <= tau <= t")
    pi = _start(chain, pi)
    Q = chain.Q
    left, _ = _propagate(pi, lambda v: v @ Q, tau)
    right, _ = _propagate(np.ones(chain.n) / chain.n, lambda v: Q @ v, t - tau)
    p = left * right
    s = p.sum()
    if not s > 0:
        raise ExtinctionError("surviving mass vanished", last_t=tau)
    return p / s


def time_averaged_distribution(chain: AbsorbingChain, pi, t: int) -> np.ndarray:
    """Mean of the doubly conditional distribution over tau = 0..t.

    This is the expected share of times 0..t spent in each state given
    survival past t. Unlike the pointwise distribution it converges to the
    product distribution on periodic chains too.
    """
    pi = _start(chain, pi)
    Q = chain.Q
    lefts = np.empty((t + 1, chain.n))
    rights = np.empty((t + 1, chain.n))
    lefts[0] = pi
    rights[0] = 1.0 / chain.n
    for k in range(1, t + 1):
        lefts[k], _ = _propagate(lefts[k - 1], lambda y: y @ Q, 1)
        rights[k], _ = _propagate(rights[k - 1], lambda y: Q @ y, 1)
    joint = lefts * rights[::-1]
    joint /= joint.sum(axis=1, keepdims=True)
    return joint.mean(axis=0)


@dataclass
class SimulationResult:
    """Per-path output of :func:`simulate`.

    ``visits[p, j]`` counts visits to state j, ``times[p]`` is the time to
    absorption and ``dest[p]`` the absorbing column reached. With a horizon,
    ``horizon_visits`` counts visits at times 0..horizon only.
    """

    visits: np.ndarray
    times: np.ndarray
    dest: np.ndarray
    seed: int
    start: int
    horizon_visits: np.ndarray | None = None
    horizon: int | None = None

    @property
    def n_paths(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class SimulationEstimate:
    mean: np.ndarray | float
    stderr: np.ndarray | float
    n_paths: int
    seed: int


def _cum_table(chain: AbsorbingChain) -> np.ndarray:
    P = np.hstack([chain.Q, chain.absorb])
    cum = np.cumsum(P, axis=1)
    cum /= cum[:, -1:]
    # clamp from the last positive column on so rounding never selects a
    # zero-probability state
    last = P.shape[1] - 1 - np.argmax(P[:, ::-1] > 0, axis=1)
    cols = np.arange(P.shape[1])[None, :]
    cum[cols >= last[:, None]] = 1.0
    return np.ascontiguousarray(cum)


def simulate(chain: AbsorbingChain, start: int, seed: int, n_paths: int, *,
             first_path: int = 0, horizon: int | None = None,
             max_steps: int = MAX_PATH_STEPS, backend: str | None = None) -> SimulationResult:
    """Sample ``n_paths`` independent paths from transient state ``start``
    (0-based).

    Path p draws from a counter-based stream keyed by ``(seed, first_path +
    p)``, so results do not depend on how paths are batched.
    """
    if not 0 <= start < chain.n:
        raise IndexError(f"start state {start} outside 0..{chain.n - 1}")
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    fn = {None: kernels.simulate_paths, "numpy": kernels.simulate_paths_py}.get(backend)
    if fn is None:
        if backend != "cython" or not kernels.HAVE_COMPILED:
            raise ValueError(f"backend {backend!r} unavailable")
        fn = kernels.simulate_paths
    visits, times, dest, hv, failed = fn(
        _cum_table(chain), chain.n, int(start), int(seed) & ((1 << 64) - 1),
        int(first_path), int(n_paths), int(max_steps),
        -1 if horizon is None else int(horizon))
    if failed >= 0:
        raise PathLimitError(
            f"path {first_path + failed} exceeded {max_steps} steps; spectral radius near 1?")
    return SimulationResult(visits, times, dest, seed, start,
                            hv if horizon is not None else None, horizon)


def _mean_se(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = samples.mean(axis=0)
    if samples.shape[0] < 2:
        return m, np.zeros_like(m)
    return m, samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])


def estimate_visits(res: SimulationResult) -> SimulationEstimate:
    """Mean visits to each state; compare with row ``start`` of ``L``."""
    m, se = _mean_se(res.visits.astype(float))
    return SimulationEstimate(m, se, res.n_paths, res.seed)


def estimate_visit_variance(res: SimulationResult) -> SimulationEstimate:
    """Variance of visit counts; compare with row ``start`` of ``L2``."""
    return _variance_estimate(res.visits.astype(float), res)


def estimate_time_mean(res: SimulationResult) -> SimulationEstimate:
    m, se = _mean_se(res.times.astype(float))
    return SimulationEstimate(float(m), float(se), res.n_paths, res.seed)


def _variance_estimate(x: np.ndarray, res: SimulationResult) -> SimulationEstimate:
    N = x.shape[0]
    c = x - x.mean(axis=0)
    var = (c ** 2).sum(axis=0) / (N - 1)
    m4 = (c ** 4).mean(axis=0)
    # large-sample standard error of the sample variance
    se = np.sqrt(np.maximum(m4 - var ** 2, 0.0) / N)
    return SimulationEstimate(var, se, N, res.seed)


def estimate_time_variance(res: SimulationResult) -> SimulationEstimate:
    est = _variance_estimate(res.times.astype(float), res)
    return SimulationEstimate(float(est.mean), float(est.stderr), est.n_paths, est.seed)


def estimate_absorption(res: SimulationResult, K: int) -> SimulationEstimate:
    """Frequency of each absorbing destination; compare with row of ``M``."""
    onehot = np.zeros((res.n_paths, K))
    onehot[np.arange(res.n_paths), res.dest] = 1.0
    m, se = _mean_se(onehot)
    return SimulationEstimate(m, se, res.n_paths, res.seed)


def _pooled(results, weights, per_path) -> tuple[np.ndarray, np.ndarray, int]:
    mean = 0.0
    var = 0.0
    count = 0
    for res, w in zip(results, weights):
        vals = per_path(res)
        if vals.shape[0] == 0:
            continue
        m, se = _mean_se(vals)
        mean = mean + w * m
        var = var + (w * se) ** 2
        count += vals.shape[0]
    return np.asarray(mean), np.sqrt(np.asarray(var)), count


def ratio_at_absorption_time(results, pi, t: int) -> SimulationEstimate:
    """``sum_i pi_i E[X_ij / X_i | X_i = t]`` from one simulation per start.

    ``results[i]`` must start at state i. Starts with no path of length t
    are skipped, so the weights of the remaining ones are renormalised.
    """
    pi = np.asarray(pi, dtype=float)
    sel = [(res, w) for res, w in zip(results, pi) if w > 0 and (res.times == t).any()]
    if not sel:
        raise ValueError(f"no simulated path has absorption time {t}")
    total = sum(w for _, w in sel)
    mean, se, count = _pooled(
        [r for r, _ in sel], [w / total for _, w in sel],
        lambda r: r.visits[r.times == t].astype(float) / t)
    return SimulationEstimate(mean, se, count, sel[0][0].seed)


def ratio_before_horizon(results, pi) -> SimulationEstimate:
    """``sum_i pi_i E[(visits at times 0..t) / t | X_i > t]``.

    ``results[i]`` must start at state i and share the same horizon t.
    """
    pi = np.asarray(pi, dtype=float)
    t = results[0].horizon
    if t is None or t < 1 or any(r.horizon != t for r in results):
        raise ValueError("all simulations need the same positive horizon")
    sel = [(res, w) for res, w in zip(results, pi) if w > 0 and (res.times > t).any()]
    if not sel:
        raise ValueError(f"no simulated path survives past t={t}")
    total = sum(w for _, w in sel)
    mean, se, count = _pooled(
        [r for r, _ in sel], [w / total for _, w in sel],
        lambda r: r.horizon_visits[r.times > t].astype(float) / t)
    return SimulationEstimate(mean, se, count, sel[0][0].seed)
