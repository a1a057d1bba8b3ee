"""Economy snapshot, node indexing and the accounting identities.

An :class:`Economy` holds one year of a world input-output table flattened to
``n = J * S`` country-industry nodes. Node ``(c, s)`` (1-based country and
sector ordinals) maps to flat position ``(c - 1) * S + s``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

EPS_ACTIVE = 1e-9
TAU_SYNTHETIC = 1e-6
TAU_INGESTED = 1e-4


class EconomyError(ValueError):
    """Raised when table data violate a structural contract."""


@dataclass(frozen=True)
class Labels:
    countries: tuple[str, ...]
    sectors: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "countries", tuple(self.countries))
        object.__setattr__(self, "sectors", tuple(self.sectors))
        if not self.countries or not self.sectors:
            raise EconomyError("need at least one country and one sector")
        for name, codes in (("country", self.countries), ("sector", self.sectors)):
            if len(set(codes)) != len(codes):
                raise EconomyError(f"duplicate {name} codes")

    @property
    def J(self) -> int:
        return len(self.countries)

    @property
    def S(self) -> int:
        return len(self.sectors)

    @property
    def n(self) -> int:
        return self.J * self.S

    def flat_index(self, country_ordinal: int, sector_ordinal: int) -> int:
        return flat_index(country_ordinal, sector_ordinal, self.J, self.S)

    def unflatten(self, flat: int) -> tuple[int, int]:
        return unflatten(flat, self.J, self.S)

    def node_labels(self) -> list[str]:
        """``COUNTRY_SECTOR`` strings in flat order."""
        return [f"{c}_{s}" for c in self.countries for s in self.sectors]

    def country_of_node(self) -> np.ndarray:
        """0-based country position of every flat node."""
        return np.repeat(np.arange(self.J), self.S)


def flat_index(country_ordinal: int, sector_ordinal: int, J: int, S: int) -> int:
    """1-based flat node index of a (country, sector) pair."""
    if not 1 <= country_ordinal <= J:
        raise IndexError(f"country ordinal {country_ordinal} outside 1..{J}")
    if not 1 <= sector_ordinal <= S:
        raise IndexError(f"sector ordinal {sector_ordinal} outside 1..{S}")
    return (country_ordinal - 1) * S + sector_ordinal


def unflatten(flat: int, J: int, S: int) -> tuple[int, int]:
    if not 1 <= flat <= J * S:
        raise IndexError(f"flat index {flat} outside 1..{J * S}")
    c, s = divmod(flat - 1, S)
    return c + 1, s + 1


@dataclass(frozen=True)
class Economy:
    """One year of flows. ``Z`` is n x n, ``F`` is n x J (final use by
    destination country), ``x`` gross output and ``w`` value added."""

    labels: Labels
    Z: np.ndarray
    F: np.ndarray
    x: np.ndarray
    w: np.ndarray
    year: int = 0
    units: str = ""
    # original positions of retained nodes (0-based, into the unreduced table)
    node_map: np.ndarray | None = None
    clamp_count: int = 0
    clamped_mass: float = 0.0
    report: ValidationReport | None = field(default=None, compare=False, repr=False)

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def f(self) -> np.ndarray:
        """Total final use per node."""
        return self.F.sum(axis=1)

    def scaled(self, factor: float) -> Economy:
        """Same economy with every monetary flow multiplied by ``factor``."""
        return replace(self, Z=_freeze(self.Z * factor), F=_freeze(self.F * factor),
                       x=_freeze(self.x * factor), w=_freeze(self.w * factor),
                       clamped_mass=self.clamped_mass * factor, report=None)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def from_components(labels: Labels, Z, F, *, year: int = 0, units: str = "") -> Economy:
    """Build an economy deriving gross output and value added from the flows.

    ``x_i = sum_j Z_ij + sum_c F_ic`` and ``w_j = x_j - sum_i Z_ij``.
    """
    Z = np.asarray(Z, dtype=float)
    F = np.asarray(F, dtype=float)
    n = labels.n
    if Z.shape != (n, n):
        raise EconomyError(f"Z has shape {Z.shape}, expected {(n, n)}")
    if F.ndim == 1:
        F = F.reshape(-1, 1)
    if F.shape != (n, labels.J):
        raise EconomyError(f"F has shape {F.shape}, expected {(n, labels.J)}")
    if (Z < 0).any():
        raise EconomyError("Z has negative entries")
    x = Z.sum(axis=1) + F.sum(axis=1)
    if (x < 0).any():
        bad = int(np.argmax(x < 0)) + 1
        raise EconomyError(f"derived gross output negative at node {bad}")
    w = x - Z.sum(axis=0)
    return Economy(labels, _freeze(Z), _freeze(F), _freeze(x), _freeze(w), year, units)


def sanitize(labels: Labels, Z, F, *, eps_active: float = EPS_ACTIVE, year: int = 0,
             units: str = "") -> Economy:
    """Clamp negative flows to zero and drop inactive nodes.

    Nodes with derived gross output at most ``eps_active`` are removed. Labels
    keep the full country/sector lists; ``node_map`` records which flat
    positions survived.
    """
    Z = np.array(Z, dtype=float)
    F = np.array(F, dtype=float)
    if Z.shape != (labels.n, labels.n) or F.shape != (labels.n, labels.J):
        raise EconomyError(f"flow shapes {Z.shape}, {F.shape} do not match labels")
    clamp_count = int((F < 0).sum() + (Z < 0).sum())
    clamped_mass = float(-F[F < 0].sum() - Z[Z < 0].sum())
    F[F < 0] = 0.0
    Z[Z < 0] = 0.0
    n = labels.n
    keep = np.arange(n)
    # removing a node changes neighbours' outputs only through Z columns, so
    # recompute until the active set is stable
    while True:
        x = Z[np.ix_(keep, keep)].sum(axis=1) + F[keep].sum(axis=1)
        active = x > eps_active
        if active.all():
            break
        keep = keep[active]
        if keep.size == 0:
            raise EconomyError("no active nodes")
    if keep.size == n:
        e = from_components(labels, Z, F, year=year, units=units)
        return replace(e, clamp_count=clamp_count, clamped_mass=clamped_mass)
    Zr = Z[np.ix_(keep, keep)]
    Fr = F[keep]
    x = Zr.sum(axis=1) + Fr.sum(axis=1)
    w = x - Zr.sum(axis=0)
    return Economy(labels, _freeze(Zr), _freeze(Fr), _freeze(x), _freeze(w), year,
                   units, _freeze(keep).astype(int), clamp_count, clamped_mass)


def node_labels(economy: Economy) -> list[str]:
    names = economy.labels.node_labels()
    if economy.node_map is None:
        return names
    return [names[i] for i in economy.node_map]


def node_countries(economy: Economy) -> np.ndarray:
    """0-based country position of each retained node."""
    c = economy.labels.country_of_node()
    return c if economy.node_map is None else c[economy.node_map]


def node_sectors(economy: Economy) -> np.ndarray:
    s = np.tile(np.arange(economy.labels.S), economy.labels.J)
    return s if economy.node_map is None else s[economy.node_map]


@dataclass
class ValidationReport:
    abs_output: np.ndarray
    rel_output: np.ndarray
    abs_value_added: np.ndarray
    rel_value_added: np.ndarray
    tau: float
    clamp_count: int = 0
    clamped_mass: float = 0.0
    node_names: list[str] = field(default_factory=list)

    @property
    def flagged(self) -> list[int]:
        """0-based nodes whose relative residual exceeds the tolerance."""
        bad = (self.rel_output > self.tau) | (self.rel_value_added > self.tau)
        return [int(i) for i in np.flatnonzero(bad)]

    @property
    def passed(self) -> bool:
        return not self.flagged

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tau": self.tau,
            "max_rel_output_residual": float(self.rel_output.max(initial=0.0)),
            "max_rel_value_added_residual": float(self.rel_value_added.max(initial=0.0)),
            "flagged": [
                {
                    "node": self.node_names[i] if self.node_names else i + 1,
                    "rel_output": float(self.rel_output[i]),
                    "rel_value_added": float(self.rel_value_added[i]),
                }
                for i in self.flagged
            ],
            "clamp_count": self.clamp_count,
            "clamped_mass": self.clamped_mass,
        }


def validate(economy: Economy, tau: float = TAU_SYNTHETIC) -> ValidationReport:
    """Check the gross-output and value-added identities node by node.

    Relative residuals are scaled by gross output. Never raises.
    """
    Z, F, x, w = economy.Z, economy.F, economy.x, economy.w
    r_out = np.abs(x - (Z.sum(axis=1) + F.sum(axis=1)))
    r_va = np.abs(w - (x - Z.sum(axis=0)))
    scale = np.where(np.abs(x) > 0, np.abs(x), 1.0)
    return ValidationReport(r_out, r_out / scale, r_va, r_va / scale, tau,
                            economy.clamp_count, economy.clamped_mass,
                            node_labels(economy))


def with_reported_totals(economy: Economy, x, w) -> Economy:
    """Replace the derived ``x`` and ``w`` by externally reported ones."""
    return replace(economy, x=_freeze(x), w=_freeze(w), report=None)


def with_report(economy: Economy, report: ValidationReport) -> Economy:
    return replace(economy, report=report)
