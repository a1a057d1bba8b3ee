"""Table readers and writers, and synthetic economies.

Two text formats are supported; both are described in ``docs/formats.md``.

* canonical CSV: ``kind,origin_country,origin_sector,dest_country,dest_sector,value``
* WIOD-2016 long CSV: one row per (row country, row item, column country,
  column item), column names configurable.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (TAU_INGESTED, Economy, EconomyError, Labels, from_components,
                   sanitize, validate, with_report, with_reported_totals)
from .networks import gross_output
from .spectral import spectral_radius

CANONICAL_HEADER = ["kind", "origin_country", "origin_sector", "dest_country",
                    "dest_sector", "value"]
FLOW_KINDS = ("intermediate", "final")
TOTAL_KINDS = ("output", "value_added")
DECL_KINDS = ("country", "sector", "year")


class ParseError(EconomyError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


# --------------------------------------------------------------------------
# canonical CSV

@dataclass
class _Accumulator:
    countries: list[str] = field(default_factory=list)
    sectors: list[str] = field(default_factory=list)
    declared: bool = False
    inter: dict = field(default_factory=dict)
    final: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    value_added: dict = field(default_factory=dict)

    def use(self, codes: list[str], code: str, what: str, line: int) -> None:
        if code in codes:
            return
        if self.declared:
            raise ParseError(f"unknown {what} code {code!r}", line)
        codes.append(code)

    def labels(self) -> Labels:
        return Labels(self.countries, self.sectors)


def _flows_to_economy(acc: _Accumulator, year: int, units: str, tau: float) -> Economy:
    labels = acc.labels()
    S = labels.S
    ci = {c: k for k, c in enumerate(labels.countries)}
    si = {s: k for k, s in enumerate(labels.sectors)}

    def node(c, s):
        return ci[c] * S + si[s]

    Z = np.zeros((labels.n, labels.n))
    F = np.zeros((labels.n, labels.J))
    for (oc, os_, dc, ds), v in acc.inter.items():
        Z[node(oc, os_), node(dc, ds)] += v
    for (oc, os_, dc), v in acc.final.items():
        F[node(oc, os_), ci[dc]] += v
    econ = sanitize(labels, Z, F, year=year, units=units)
    if acc.output or acc.value_added:
        keep = econ.node_map if econ.node_map is not None else np.arange(labels.n)
        x_rep = np.array(gross_output(econ))
        w_rep = np.array(econ.w)
        for k, full in enumerate(keep):
            c, s = divmod(int(full), S)
            key = (labels.countries[c], labels.sectors[s])
            x_rep[k] = acc.output.get(key, x_rep[k])
            w_rep[k] = acc.value_added.get(key, w_rep[k])
        report = validate(with_reported_totals(econ, x_rep, w_rep), tau)
    else:
        report = validate(econ, tau)
    return with_report(econ, report)


def parse_canonical_csv(stream, *, tau: float = TAU_INGESTED, units: str = "") -> Economy:
    """Read a canonical CSV table.

    Duplicate keys accumulate. ``country``/``sector`` declaration rows, when
    present, fix code order and must precede every other reference; otherwise
    codes are ordered by first appearance. Optional ``output`` and
    ``value_added`` rows carry reported totals that are checked against the
    flows; the returned economy always uses totals derived from the flows.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file") from None
    if [h.strip() for h in header] != CANONICAL_HEADER:
        raise ParseError(f"bad header {header!r}", 1)
    acc = _Accumulator()
    year = 0
    flows_seen = False
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 6:
            raise ParseError(f"expected 6 fields, found {len(row)}", lineno)
        kind, oc, os_, dc, ds, raw = (c.strip() for c in row)
        if kind in DECL_KINDS:
            if flows_seen:
                raise ParseError("declarations must precede flow records", lineno)
            if kind != "year":
                acc.declared = True
            if kind == "country":
                _declare(acc.countries, oc, "country", lineno)
            elif kind == "sector":
                _declare(acc.sectors, os_, "sector", lineno)
            else:
                year = int(_number(raw, lineno))
            continue
        if kind not in FLOW_KINDS + TOTAL_KINDS:
            raise ParseError(f"unknown record kind {kind!r}", lineno)
        flows_seen = True
        value = _number(raw, lineno)
        if not oc or not os_:
            raise ParseError("origin country and sector are required", lineno)
        acc.use(acc.countries, oc, "country", lineno)
        acc.use(acc.sectors, os_, "sector", lineno)
        if kind in TOTAL_KINDS:
            if dc or ds:
                raise ParseError(f"{kind} records take no destination", lineno)
            target = acc.output if kind == "output" else acc.value_added
            target[(oc, os_)] = target.get((oc, os_), 0.0) + value
            continue
        if not dc:
            raise ParseError("destination country is required", lineno)
        acc.use(acc.countries, dc, "country", lineno)
        if kind == "final":
            if ds:
                raise ParseError("final records must have an empty dest_sector", lineno)
            key = (oc, os_, dc)
            acc.final[key] = acc.final.get(key, 0.0) + value
        else:
            if not ds:
                raise ParseError("intermediate records need a dest_sector", lineno)
            acc.use(acc.sectors, ds, "sector", lineno)
            key = (oc, os_, dc, ds)
            acc.inter[key] = acc.inter.get(key, 0.0) + value
    if not flows_seen:
        raise ParseError("no flow records")
    return _flows_to_economy(acc, year, units, tau)


def _declare(codes: list[str], code: str, what: str, line: int) -> None:
    if not code:
        raise ParseError(f"empty {what} code", line)
    if code in codes:
        raise ParseError(f"{what} {code!r} declared twice", line)
    codes.append(code)


def _number(raw: str, line: int) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ParseError(f"not a number: {raw!r}", line) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {raw!r}", line)
    return v


def _full_tables(economy: Economy) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Z, F, x, w expanded back to all J*S nodes (dropped nodes are zero)."""
    n = economy.labels.n
    if economy.node_map is None:
        return economy.Z, economy.F, economy.x, economy.w
    keep = economy.node_map
    Z = np.zeros((n, n))
    F = np.zeros((n, economy.labels.J))
    x = np.zeros(n)
    w = np.zeros(n)
    Z[np.ix_(keep, keep)] = economy.Z
    F[keep] = economy.F
    x[keep] = economy.x
    w[keep] = economy.w
    return Z, F, x, w


def write_canonical_csv(economy: Economy, stream, *, digits: int = 12,
                        totals: bool = True) -> None:
    """Write declarations, nonzero flows and (optionally) reported totals."""
    fmt = f"{{:.{digits}g}}".format
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CANONICAL_HEADER)
    lab = economy.labels
    w.writerow(["year", "", "", "", "", economy.year])
    for c in lab.countries:
        w.writerow(["country", c, "", "", "", ""])
    for s in lab.sectors:
        w.writerow(["sector", "", s, "", "", ""])
    Z, F, x, va = _full_tables(economy)
    S = lab.S
    for i, j in zip(*np.nonzero(Z)):
        ci, si = divmod(int(i), S)
        cj, sj = divmod(int(j), S)
        w.writerow(["intermediate", lab.countries[ci], lab.sectors[si],
                    lab.countries[cj], lab.sectors[sj], fmt(Z[i, j])])
    for i, c in zip(*np.nonzero(F)):
        ci, si = divmod(int(i), S)
        w.writerow(["final", lab.countries[ci], lab.sectors[si], lab.countries[c], "",
                    fmt(F[i, c])])
    if totals:
        for i in range(lab.n):
            ci, si = divmod(i, S)
            w.writerow(["output", lab.countries[ci], lab.sectors[si], "", "", fmt(x[i])])
            w.writerow(["value_added", lab.countries[ci], lab.sectors[si], "", "",
                        fmt(va[i])])


# --------------------------------------------------------------------------
# WIOD long format

FD_CATEGORIES = ("CONS_h", "CONS_np", "CONS_g", "GFCF", "INVEN")


@dataclass(frozen=True)
class WiodColumns:
    """Column names and special codes of a long-format WIOT export."""

    year: str = "Year"
    row_country: str = "Country"
    row_item: str = "RNr"
    col_country: str = "ColCountry"
    col_item: str = "ColItem"
    value: str = "Value"
    total_country: str = "TOT"
    gross_output_item: str = "GO"
    value_added_items: tuple[str, ...] = ("VA",)
    fd_categories: tuple[str, ...] = FD_CATEGORIES

    @classmethod
    def from_config(cls, text: str) -> WiodColumns:
        """Parse ``key = value`` lines; list values are comma separated."""
        kw = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected key = value", lineno)
            key, val = (p.strip() for p in line.split("=", 1))
            if key not in cls.__dataclass_fields__:
                raise ParseError(f"unknown column-map key {key!r}", lineno)
            if key in ("value_added_items", "fd_categories"):
                kw[key] = tuple(v.strip() for v in val.split(",") if v.strip())
            else:
                kw[key] = val
        return cls(**kw)


def parse_wiot_long(stream, *, columns: WiodColumns | None = None, year: int | None = None,
                    tau: float = TAU_INGESTED, units: str = "USD millions") -> Economy:
    """Read one year of a WIOD-style long table.

    Intermediate columns fill Z; the final-demand categories of each
    destination country are summed into F. Rows for the total country with
    the gross-output / value-added items provide reported totals, checked
    against the flows in the attached report.
    """
    cols = columns or WiodColumns()
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise ParseError("empty file")
    need = [cols.row_country, cols.row_item, cols.col_country, cols.col_item, cols.value]
    missing = [c for c in need if c not in reader.fieldnames]
    if missing:
        raise ParseError(f"missing columns {missing}", 1)
    has_year = cols.year in reader.fieldnames
    fd = set(cols.fd_categories)
    inter, final, go, va = {}, {}, {}, {}
    row_countries, col_countries = [], []
    sectors: list[str] = []
    seen_year = None
    tot = cols.total_country
    for lineno, rec in enumerate(reader, start=2):
        if has_year and rec[cols.year].strip():
            y = int(float(rec[cols.year]))
            if year is not None and y != year:
                continue
            if seen_year is None:
                seen_year = y
            elif y != seen_year:
                raise ParseError(f"several years in file ({seen_year}, {y}); pass year=", lineno)
        rc, ri = rec[cols.row_country].strip(), rec[cols.row_item].strip()
        cc, ci = rec[cols.col_country].strip(), rec[cols.col_item].strip()
        v = _number(rec[cols.value].strip(), lineno)
        if rc == tot:
            if ri == cols.gross_output_item:
                go[(cc, ci)] = go.get((cc, ci), 0.0) + v
            elif ri in cols.value_added_items:
                va[(cc, ci)] = va.get((cc, ci), 0.0) + v
            continue
        if ci == cols.gross_output_item:
            continue  # row totals column; recomputed from flows
        if rc not in row_countries:
            row_countries.append(rc)
        if cc not in col_countries:
            col_countries.append(cc)
        if ri not in sectors:
            sectors.append(ri)
        if ci in fd:
            key = (rc, ri, cc)
            final[key] = final.get(key, 0.0) + v
        else:
            inter[(rc, ri, cc, ci)] = v + inter.get((rc, ri, cc, ci), 0.0)
    if not row_countries:
        raise ParseError("no flow rows")
    if set(row_countries) != set(col_countries):
        raise ParseError(
            f"country set differs between rows {sorted(row_countries)} and "
            f"columns {sorted(col_countries)}")
    known = set(sectors)
    for (_, _, _, ci) in inter:
        if ci not in known:
            raise ParseError(f"unknown use-category code {ci!r}")
    for (cc, ci) in list(go) + list(va):
        if cc not in known and ci not in known:
            raise ParseError(f"unknown total column ({cc!r}, {ci!r})")
    acc = _Accumulator(row_countries, sectors, False, inter, final,
                       {k: v for k, v in go.items()}, {k: v for k, v in va.items()})
    return _flows_to_economy(acc, seen_year or (year or 0), units, tau)


def write_wiot_long(economy: Economy, stream, *, columns: WiodColumns | None = None,
                    digits: int = 12, fd_split: dict | None = None) -> None:
    """Write every Z cell, the F cells and GO / VA total rows.

    ``fd_split`` maps final-demand categories to shares of each F cell;
    by default everything goes to the first category.
    """
    cols = columns or WiodColumns()
    fmt = f"{{:.{digits}g}}".format
    split = fd_split or {cols.fd_categories[0]: 1.0}
    lab = economy.labels
    Z, F, x, va = _full_tables(economy)
    w = csv.writer(stream, lineterminator="\n")
    w.writerow([cols.year, cols.row_country, cols.row_item, cols.col_country,
                cols.col_item, cols.value])
    S = lab.S
    for i in range(lab.n):
        ci, si = divmod(i, S)
        rc, ri = lab.countries[ci], lab.sectors[si]
        for j in range(lab.n):
            cj, sj = divmod(j, S)
            w.writerow([economy.year, rc, ri, lab.countries[cj], lab.sectors[sj],
                        fmt(Z[i, j])])
        for c in range(lab.J):
            for cat, share in split.items():
                w.writerow([economy.year, rc, ri, lab.countries[c], cat,
                            fmt(F[i, c] * share)])
    va_item = cols.value_added_items[0]
    for j in range(lab.n):
        cj, sj = divmod(j, S)
        w.writerow([economy.year, cols.total_country, va_item, lab.countries[cj],
                    lab.sectors[sj], fmt(va[j])])
        w.writerow([economy.year, cols.total_country, cols.gross_output_item,
                    lab.countries[cj], lab.sectors[sj], fmt(x[j])])


# --------------------------------------------------------------------------
# synthetic economies

def chain_example(p: float, q: float) -> Economy:
    """Three single-industry countries in a line with unit gross outputs.

    Node 1 sells share p of its output to node 2, node 2 sells q to node 1
    and p to node 3, node 3 sells q to node 2; the rest goes to domestic
    final use.
    """
    if not (p > 0 and q > 0 and p + q < 1):
        raise ValueError(f"need p > 0, q > 0 and p + q < 1 (got p={p}, q={q})")
    Z = np.array([[0.0, p, 0.0], [q, 0.0, p], [0.0, q, 0.0]])
    F = np.diag([1.0 - p, 1.0 - p - q, 1.0 - q])
    return from_components(Labels(("C1", "C2", "C3"), ("I",)), Z, F)


@dataclass(frozen=True)
class SyntheticSpec:
    J: int
    S: int
    density: float = 1.0
    spectral_target: float | None = None
    seed: int = 0
    year: int = 0

    def __post_init__(self):
        if self.J < 1 or self.S < 1:
            raise ValueError("J and S must be positive")
        if not 0 < self.density <= 1:
            raise ValueError("density must lie in (0, 1]")
        if self.spectral_target is not None and not 0 < self.spectral_target < 1:
            raise ValueError("spectral_target must lie in (0, 1)")


def synthetic_labels(J: int, S: int) -> Labels:
    return Labels(tuple(f"C{k + 1:02d}" for k in range(J)),
                  tuple(f"S{k + 1:02d}" for k in range(S)))


def _output_radius(Z: np.ndarray, F: np.ndarray, scale: float) -> float:
    x = scale * Z.sum(axis=1) + F.sum(axis=1)
    return spectral_radius(scale * Z / x[:, None])


def random_economy(spec: SyntheticSpec, *, tol: float = 1e-3, max_iter: int = 60) -> Economy:
    """Random economy, deterministic in ``spec.seed``.

    Z has uniform entries on a random support of the requested density plus a
    random Hamiltonian cycle (so the networks are irreducible), balanced along
    that cycle so value added equals final use; F is strictly positive. With a
    spectral target, Z is multiplied by a common factor found by bisection in
    log scale so that the Perron root of B is within ``tol``.
    """
    rng = np.random.default_rng(spec.seed)
    labels = synthetic_labels(spec.J, spec.S)
    n = labels.n
    mask = rng.random((n, n)) < spec.density
    perm = rng.permutation(n)
    mask[perm, np.roll(perm, -1)] = True
    Z = rng.random((n, n)) * mask / max(spec.density * n, 1.0)
    _balance_on_cycle(Z, perm)
    F = rng.uniform(0.05, 1.0, size=(n, spec.J)) / spec.J
    if spec.spectral_target is not None:
        Z = Z * _fit_scale(Z, F, spec.spectral_target, tol, max_iter)
    return from_components(labels, Z, F, year=spec.year)


def _balance_on_cycle(Z: np.ndarray, cycle: np.ndarray) -> None:
    """Add a nonnegative flow along ``cycle`` so every row sum of Z equals its
    column sum. Value added then equals final use, so it stays positive at any
    scale of Z. The support of Z is unchanged."""
    if cycle.size < 2:
        return
    surplus = Z.sum(axis=0)[cycle] - Z.sum(axis=1)[cycle]
    # edge k carries cycle[k] -> cycle[k+1]; its flow minus the previous edge's
    # must equal the node's surplus
    flow = np.cumsum(surplus)
    flow -= flow.min()
    Z[cycle, np.roll(cycle, -1)] += flow


def _fit_scale(Z, F, target, tol, max_iter) -> float:
    lo, hi = 1.0, 1.0
    lam = _output_radius(Z, F, 1.0)
    if abs(lam - target) <= tol / 10:
        return 1.0
    # radius increases with the scale factor; bracket first
    for _ in range(200):
        if lam < target:
            lo, hi = hi, hi * 2.0
            lam = _output_radius(Z, F, hi)
            if lam >= target:
                break
        else:
            hi, lo = lo, lo / 2.0
            lam = _output_radius(Z, F, lo)
            if lam <= target:
                break
    else:
        raise EconomyError(f"cannot bracket spectral target {target}")
    a, b = math.log(lo), math.log(hi)
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        lam = _output_radius(Z, F, math.exp(mid))
        if abs(lam - target) <= tol / 10:
            return math.exp(mid)
        if lam < target:
            a = mid
        else:
            b = mid
    if abs(lam - target) <= tol:
        return math.exp(mid)
    raise EconomyError(f"spectral target {target} not reached (lambda={lam:.6g})")


def constant_row_sum_economy(J: int, S: int, c: float, seed: int = 0,
                             side: str = "output") -> Economy:
    """Economy whose B (``side='output'``) or A.T (``side='input'``) has all
    row sums equal to ``c``."""
    if not 0 <= c < 1:
        raise ValueError("c must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    labels = synthetic_labels(J, S)
    n = labels.n
    R = rng.random((n, n)) + 0.01
    if side == "output":
        R /= R.sum(axis=1, keepdims=True)
        x = rng.uniform(0.5, 2.0, size=n)
        Z = c * x[:, None] * R
        shares = rng.random((n, J)) + 0.01
        shares /= shares.sum(axis=1, keepdims=True)
        F = (1.0 - c) * x[:, None] * shares
    elif side == "input":
        R /= R.sum(axis=0, keepdims=True)
        A = c * R
        f = rng.uniform(0.5, 2.0, size=(n, J))
        x = np.linalg.solve(np.eye(n) - A, f.sum(axis=1))
        Z = A * x[None, :]
        F = f
    else:
        raise ValueError("side must be 'output' or 'input'")
    return from_components(labels, Z, F)

