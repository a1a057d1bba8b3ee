"""Dominant eigenpairs, product distributions and ranking diagnostics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.stats import rankdata

from .networks import InputNetwork, OutputNetwork

TOL_EIG = 1e-12
MAX_ITER = 100_000


class ConvergenceError(RuntimeError):
    pass


class IrreducibilityError(ValueError):
    """Converged Perron vector has a non-positive entry."""


class DivergenceError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralSummary:
    """Perron root with left/right vectors.

    ``rho_l`` sums to one and ``rho_l @ rho_r == 1``.
    """

    lam: float
    rho_l: np.ndarray
    rho_r: np.ndarray
    iterations: int
    residual: float

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "residual": self.residual,
            "iterations": self.iterations,
            "rho_l": self.rho_l.tolist(),
            "rho_r": self.rho_r.tolist(),
        }


def _shift(M: np.ndarray) -> float:
    # half the infinity-norm bound on the spectrum; makes the dominant root
    # strictly dominant even for periodic matrices
    return 0.5 * float(np.abs(M).sum(axis=1).max())


def _power(M: np.ndarray, tol: float, max_iter: int) -> tuple[float, np.ndarray, int, float]:
    n = M.shape[0]
    sigma = _shift(M)
    v = np.full(n, 1.0)
    res = np.inf
    lam = 0.0
    for it in range(1, max_iter + 1):
        w = M @ v
        lam = float(v @ w) / float(v @ v)
        res = float(np.abs(w - lam * v).max())
        if res <= tol:
            return lam, v, it, res
        v = w + sigma * v
        v /= np.abs(v).max()
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} steps (residual {res:.3g})")


def dominant_eigenpair(matrix, tol_eig: float = TOL_EIG,
                       max_iter: int = MAX_ITER) -> SpectralSummary:
    """Perron root and vectors of a nonnegative irreducible matrix.

    Shifted power iteration on ``M`` for the right vector and on ``M.T`` for
    the left one. Iterates are scaled to unit sup-norm and convergence is
    declared on the sup-norm eigen-residual.
    """
    M = np.asarray(matrix, dtype=float)
    lam, r, it_r, res_r = _power(M, tol_eig, max_iter)
    lam_l, l, it_l, res_l = _power(M.T, tol_eig, max_iter)
    # iterates have unit sup-norm; entries at the residual scale are zeros
    # that the iteration has not finished resolving
    floor = 100.0 * tol_eig
    if (r <= floor).any() or (l <= floor).any():
        raise IrreducibilityError("dominant eigenvector is not strictly positive")
    l = l / l.sum()
    r = r / (l @ r)
    return SpectralSummary(lam, l, r, max(it_r, it_l), max(res_r, res_l))


def spectral_radius(matrix, tol: float = 1e-10) -> float:
    """Spectral radius of a nonnegative matrix, no irreducibility needed."""
    M = np.asarray(matrix, dtype=float)
    if M.shape[0] <= 400:
        return float(np.abs(np.linalg.eigvals(M)).max()) if M.size else 0.0
    return _power(M, tol, MAX_ITER)[0]


def product_distribution(summary: SpectralSummary) -> np.ndarray:
    return summary.rho_l * summary.rho_r


def _transition(network) -> np.ndarray:
    if isinstance(network, OutputNetwork):
        return network.B
    if isinstance(network, InputNetwork):
        return network.A.T
    return np.asarray(network, dtype=float)


@dataclass(frozen=True)
class ProductCheck:
    difference: float
    right_transform_gap: float = float("nan")
    left_transform_gap: float = float("nan")

    @property
    def max_abs_difference(self) -> float:
        return max(self.difference, np.nan_to_num(self.right_transform_gap),
                   np.nan_to_num(self.left_transform_gap))


def verify_theorem2(inp: InputNetwork, outp: OutputNetwork, x=None,
                    tol_eig: float = TOL_EIG) -> ProductCheck:
    """Compare product distributions of ``A`` and ``B`` computed independently.

    With gross output ``x`` also check the eigenvector maps
    ``r(B) ~ r(A) / x`` and ``l(B) ~ l(A) * x`` after sum-normalisation.
    """
    sa = dominant_eigenpair(inp.A, tol_eig)
    sb = dominant_eigenpair(outp.B, tol_eig)
    diff = float(np.abs(product_distribution(sa) - product_distribution(sb)).max())
    if x is None:
        return ProductCheck(diff)
    x = np.asarray(x, dtype=float)

    def unit_sum(v):
        return v / v.sum()

    right = float(np.abs(unit_sum(sb.rho_r) - unit_sum(sa.rho_r / x)).max())
    left = float(np.abs(unit_sum(sb.rho_l) - unit_sum(sa.rho_l * x)).max())
    return ProductCheck(diff, right, left)


def parametrized_rank_vectors(network, kappa: float, lam: float | None = None) -> np.ndarray:
    """``(I - kappa Q)^-1 1`` with ``Q = B`` (output) or ``A.T`` (input)."""
    Q = _transition(network)
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if lam is None:
        lam = spectral_radius(Q)
    if kappa * lam >= 1.0:
        raise DivergenceError(f"kappa={kappa:g} >= 1/lambda={1.0 / lam:g}")
    n = Q.shape[0]
    lu = linalg.lu_factor(np.eye(n) - kappa * Q)
    return linalg.lu_solve(lu, np.ones(n))


@dataclass(frozen=True)
class LimitVectors:
    low_lambda: np.ndarray
    high_lambda: np.ndarray


def theorem1_approximations(network, summary: SpectralSummary | None = None) -> LimitVectors:
    """Degree-based and Perron-based approximations to ``u`` or ``d``.

    ``summary`` is the eigenpair of ``B`` (output network) or of ``A``
    (input network), computed here if omitted.
    """
    if isinstance(network, OutputNetwork):
        M = network.B
        summary = summary or dominant_eigenpair(M)
        weight, vec = summary.rho_l.sum(), summary.rho_r
        low = 1.0 + M.sum(axis=1)
    elif isinstance(network, InputNetwork):
        summary = summary or dominant_eigenpair(network.A)
        weight, vec = summary.rho_r.sum(), summary.rho_l
        low = 1.0 + network.A.sum(axis=0)
    else:
        raise TypeError("expected an InputNetwork or OutputNetwork")
    if summary.lam >= 1.0:
        raise DivergenceError(f"lambda={summary.lam} is not below one")
    return LimitVectors(low, weight / (1.0 - summary.lam) * vec)


def spearman(a, b) -> float:
    """Rank correlation with average ranks for ties."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("need two 1-d vectors of equal length")
    if a.size < 2:
        raise ValueError("need at least two observations")
    ra = rankdata(a) - (a.size + 1) / 2.0
    rb = rankdata(b) - (b.size + 1) / 2.0
    den = np.sqrt((ra @ ra) * (rb @ rb))
    if den == 0:
        raise ValueError("rank correlation undefined: constant input")
    return float(np.clip((ra @ rb) / den, -1.0, 1.0))
