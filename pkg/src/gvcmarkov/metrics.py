"""Headline quantities: chain lengths, their risk, fragmentation indicators
and multi-year panels."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import markov
from .core import Economy, node_countries
from .networks import (InputNetwork, OutputNetwork, block_means, build_input_network,
                       build_output_network)
from .spectral import (IrreducibilityError, SpectralSummary, dominant_eigenpair,
                       product_distribution, spectral_radius)

log = logging.getLogger(__name__)


def _stats(network) -> markov.ChainStatistics:
    if isinstance(network, OutputNetwork):
        return markov.fundamental(markov.output_chain(network))
    if isinstance(network, InputNetwork):
        return markov.fundamental(markov.input_chain(network))
    raise TypeError("expected an InputNetwork or OutputNetwork")


def upstreamness(output_network: OutputNetwork, stats=None) -> np.ndarray:
    """Expected stages to final use, ``(I - B)^-1 1``."""
    return (stats or _stats(output_network)).g


def downstreamness(input_network: InputNetwork, stats=None) -> np.ndarray:
    """Expected stages from primary inputs, ``(I - A.T)^-1 1``."""
    return (stats or _stats(input_network)).g


def chain_risk(network, stats=None) -> np.ndarray:
    """Variance of the number of stages before absorption."""
    return (stats or _stats(network)).h


@dataclass(frozen=True)
class GlobalIndicators:
    """Domestic vs cross-border mass of the value-added (zeta) and final-use
    (M) distributions, summed over nodes."""

    gdva: float
    gieva: float
    gdfu: float
    giefu: float
    n: int

    def fractions(self) -> dict[str, float]:
        return {k: getattr(self, k) / self.n for k in ("gdva", "gieva", "gdfu", "giefu")}

    def to_dict(self) -> dict:
        d = {"gdva": self.gdva, "gieva": self.gieva, "gdfu": self.gdfu,
             "giefu": self.giefu, "n": self.n}
        d.update({f"{k}_frac": v for k, v in self.fractions().items()})
        return d


def global_indicators(M, zeta, countries) -> GlobalIndicators:
    """``countries[i]`` is the 0-based country of node i."""
    M = np.asarray(M, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    countries = np.asarray(countries)
    if M.shape != zeta.shape or M.shape[0] != countries.size:
        raise ValueError("M, zeta and node countries disagree in size")
    rows = np.arange(countries.size)
    dom_va = float(zeta[rows, countries].sum())
    dom_fu = float(M[rows, countries].sum())
    return GlobalIndicators(dom_va, float(zeta.sum()) - dom_va,
                            dom_fu, float(M.sum()) - dom_fu, countries.size)


@dataclass
class Analysis:
    """Everything computed for one year."""

    economy: Economy
    inp: InputNetwork
    outp: OutputNetwork
    stats_in: markov.ChainStatistics
    stats_out: markov.ChainStatistics
    M: np.ndarray
    zeta: np.ndarray
    spectral_A: SpectralSummary
    spectral_B: SpectralSummary
    indicators: GlobalIndicators

    @property
    def u(self) -> np.ndarray:
        return self.stats_out.g

    @property
    def d(self) -> np.ndarray:
        return self.stats_in.g

    @property
    def rho_prod(self) -> np.ndarray:
        return product_distribution(self.spectral_B)

    @property
    def irreducible(self) -> bool:
        return bool(np.isfinite(self.spectral_B.rho_r).all())

    @property
    def lam(self) -> float:
        return self.spectral_B.lam


def _summary(M: np.ndarray, tol_eig: float) -> SpectralSummary:
    """Perron pair, or NaN vectors with the true radius when M is reducible."""
    try:
        return dominant_eigenpair(M, tol_eig)
    except IrreducibilityError:
        log.warning("reducible network: Perron vectors undefined, reporting NaN")
        nan = np.full(M.shape[0], np.nan)
        return SpectralSummary(spectral_radius(M), nan, nan.copy(), 0, float("nan"))


def analyze(economy: Economy, tol_eig: float = 1e-12) -> Analysis:
    inp = build_input_network(economy)
    outp = build_output_network(economy)
    out_chain = markov.output_chain(outp, by_country=True)
    in_chain = markov.input_chain(inp)
    stats_out = markov.fundamental(out_chain)
    stats_in = markov.fundamental(in_chain)
    M = markov.absorption_matrix(out_chain)
    countries = node_countries(economy)
    zeta = markov.value_added_distribution(in_chain, inp.delta, countries, economy.labels.J)
    sA = _summary(inp.A, tol_eig)
    sB = _summary(outp.B, tol_eig)
    return Analysis(economy, inp, outp, stats_in, stats_out, M, zeta, sA, sB,
                    global_indicators(M, zeta, countries))


def expand(matrix: np.ndarray, economy: Economy) -> np.ndarray:
    """Square node matrix padded with zeros for nodes dropped as inactive."""
    if economy.node_map is None:
        return matrix
    n = economy.labels.n
    out = np.zeros((n, n))
    out[np.ix_(economy.node_map, economy.node_map)] = matrix
    return out


def country_means(values, economy: Economy) -> dict[str, float]:
    countries = node_countries(economy)
    values = np.asarray(values, dtype=float)
    return {c: float(values[countries == k].mean())
            for k, c in enumerate(economy.labels.countries) if (countries == k).any()}


def panel_row(a: Analysis) -> dict:
    e = a.economy
    J, S = e.labels.J, e.labels.S
    bA = block_means(expand(a.inp.A, e), J, S)
    bB = block_means(expand(a.outp.B, e), J, S)
    row = {"year": e.year, "n": e.n, "lambda": a.lam,
           "A_diag_mean": bA.diag_mean, "A_offdiag_mean": bA.offdiag_mean,
           "B_diag_mean": bB.diag_mean, "B_offdiag_mean": bB.offdiag_mean}
    ind = a.indicators.to_dict()
    ind.pop("n")
    row.update(ind)
    return row


def panel_report(economies, tol_eig: float = 1e-12) -> list[dict]:
    """One row per year, sorted by year."""
    rows = [panel_row(analyze(e, tol_eig)) for e in economies]
    if not rows:
        raise ValueError("need at least one year")
    return sorted(rows, key=lambda r: r["year"])


def scale_free_quantities(a: Analysis) -> dict[str, np.ndarray]:
    """Dimensionless outputs, for invariance checks."""
    return {
        "u": a.u, "d": a.d, "h_out": a.stats_out.h, "h_in": a.stats_in.h,
        "lambda": np.array([a.lam]), "rho_prod": a.rho_prod, "M": a.M, "zeta": a.zeta,
        "indicators": np.array([a.indicators.gdva, a.indicators.gieva,
                                a.indicators.gdfu, a.indicators.giefu]),
    }


def histogram(values, bins: int = 30) -> tuple[np.ndarray, np.ndarray]:
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins)
    return edges, counts

