"""Command-line entry point.

Exit codes: 0 success, 1 domain or check failure, 2 I/O or usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, markov, spectral
from .core import TAU_INGESTED, Economy, EconomyError, node_labels, node_countries, node_sectors
from .ingest import (ParseError, SyntheticSpec, WiodColumns, parse_canonical_csv,
                     parse_wiot_long, random_economy)
from .metrics import analyze, country_means, histogram, panel_row
from .networks import write_matrix_binary, write_matrix_csv
from .spectral import DivergenceError, product_distribution
from .verify import run_suite

log = logging.getLogger("gvcmarkov")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    inputs: list[str] = field(default_factory=list)
    format: str = "canonical"
    out: str = "out"
    tau: float = TAU_INGESTED
    tol_eig: float = 1e-12
    seed: int = 0
    paths: int = 100_000
    kappa_grid: str = "0.001:1.0:25"
    sectors: list[int] = field(default_factory=list)
    jobs: int = 1
    bins: int = 30
    columns: str | None = None
    synthetic: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tau <= 0 or self.tol_eig <= 0:
            raise UsageError("tolerances must be positive")
        if self.format not in ("canonical", "wiod"):
            raise UsageError(f"unknown format {self.format!r}")
        if self.jobs < 1 or self.paths < 1:
            raise UsageError("--jobs and --paths must be positive")


# --------------------------------------------------------------------------
# serialisation

def _round(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(f"{obj:.12g}")
    if isinstance(obj, (np.floating,)):
        return _round(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_round(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def dump_json(obj, path: Path) -> None:
    """Deterministic JSON: sorted keys, floats at 12 significant digits."""
    path.write_text(json.dumps(_round(obj), sort_keys=True, indent=1) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(v) for v in r) + "\n")


# --------------------------------------------------------------------------
# config

def parse_kappa_grid(text: str) -> np.ndarray:
    try:
        a, b, steps = text.split(":")
        grid = np.linspace(float(a), float(b), int(steps))
    except ValueError:
        raise UsageError(f"bad kappa grid {text!r}; expected a:b:steps") from None
    if (grid <= 0).any():
        raise UsageError("kappa values must be positive")
    return grid


def parse_synthetic(items: list[str]) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"bad synthetic setting {item!r}; expected key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def synthetic_spec(d: dict) -> SyntheticSpec:
    known = {"J", "S", "density", "seed", "lambda", "year"}
    extra = set(d) - known
    if extra:
        raise UsageError(f"unknown synthetic keys {sorted(extra)}")
    try:
        return SyntheticSpec(
            J=int(d.get("J", 3)), S=int(d.get("S", 4)), density=float(d.get("density", 1.0)),
            spectral_target=float(d["lambda"]) if "lambda" in d else None,
            seed=int(d.get("seed", 0)), year=int(d.get("year", 0)))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def read_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        k, v = (p.strip() for p in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    """Flags override the config file, which overrides defaults."""
    file_cfg = read_config_file(args.config) if args.config else {}
    cfg = {}
    casts = {"tau": float, "tol_eig": float, "seed": int, "paths": int, "jobs": int,
             "bins": int, "format": str, "out": str, "kappa_grid": str, "columns": str}
    for key, cast in casts.items():
        if key in file_cfg:
            try:
                cfg[key] = cast(file_cfg[key])
            except ValueError:
                raise UsageError(f"bad config value for {key}: {file_cfg[key]!r}") from None
    if "sectors" in file_cfg:
        cfg["sectors"] = _sector_list(file_cfg["sectors"])
    for key in casts:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "sectors", None) is not None:
        cfg["sectors"] = _sector_list(args.sectors)
    cfg["inputs"] = list(getattr(args, "inputs", []) or [])
    if getattr(args, "synthetic", None):
        cfg["synthetic"] = parse_synthetic(args.synthetic)
    return RunConfig(**cfg)


def _sector_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad sector list {text!r}") from None


def load_economy(path: str, cfg: RunConfig) -> Economy:
    """Raises OSError for unreadable files and ParseError for bad content."""
    with open(path, newline="", encoding="utf-8") as fh:
        if cfg.format == "wiod":
            columns = None
            if cfg.columns:
                columns = WiodColumns.from_config(Path(cfg.columns).read_text())
            return parse_wiot_long(fh, columns=columns, tau=cfg.tau)
        return parse_canonical_csv(fh, tau=cfg.tau)


def _year_tag(e: Economy, idx: int) -> str:
    return str(e.year) if e.year else f"input{idx + 1}"


# --------------------------------------------------------------------------
# commands

def cmd_validate(cfg: RunConfig) -> int:
    if not cfg.inputs:
        raise UsageError("validate needs at least one input file")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    for idx, path in enumerate(cfg.inputs):
        try:
            e = load_economy(path, cfg)
        except OSError as exc:
            print(f"error: cannot read {path}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        except ParseError as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            return EXIT_FAIL
        rep = e.report.to_dict()
        rep["input"] = path
        rep["year"] = e.year
        tag = _year_tag(e, idx)
        dump_json(rep, out / f"validation_{tag}.json")
        verdict = "ok" if rep["passed"] else f"FAILED ({len(rep['flagged'])} nodes flagged)"
        print(f"{path} [{tag}]: {verdict}")
        if not rep["passed"]:
            status = EXIT_FAIL
    return status


def _kappa_sweep(a, grid: np.ndarray) -> list[list]:
    lam = a.lam
    t_out = spectral.theorem1_approximations(a.outp, a.spectral_B)
    t_in = spectral.theorem1_approximations(a.inp, a.spectral_A)
    rows = []

    def corr(x, y):
        try:
            return spectral.spearman(x, y)
        except ValueError:
            return float("nan")

    for kappa in grid:
        if kappa * lam >= 1.0:
            print(f"warning: kappa={kappa:g} skipped (>= 1/lambda={1.0 / lam:.6g})",
                  file=sys.stderr)
            continue
        u = spectral.parametrized_rank_vectors(a.outp, kappa, lam)
        d = spectral.parametrized_rank_vectors(a.inp, kappa, lam)
        rows.append([float(kappa), corr(u, t_out.low_lambda), corr(u, t_out.high_lambda),
                     corr(d, t_in.low_lambda), corr(d, t_in.high_lambda)])
    return rows


def _analyze_tagged(e: Economy, tag: str, cfg: RunConfig):
    try:
        return analyze(e, cfg.tol_eig)
    except markov.NonAbsorbingChainError as exc:
        raise markov.NonAbsorbingChainError(f"year {tag}: {exc}") from None
    except EconomyError as exc:
        raise EconomyError(f"year {tag}: {exc}") from None


def analyze_one(e: Economy, tag: str, cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    a = _analyze_tagged(e, tag, cfg)
    names = node_labels(e)
    lab = e.labels
    countries = node_countries(e)
    sectors = node_sectors(e)
    rho = a.rho_prod
    write_rows(out / f"nodes_{tag}.csv",
               ["node", "country", "sector", "u", "d", "h_out", "h_in",
                "L_out_diag", "L_in_diag", "rho_prod"],
               zip(names, (lab.countries[c] for c in countries),
                   (lab.sectors[s] for s in sectors), a.u, a.d, a.stats_out.h,
                   a.stats_in.h, np.diag(a.stats_out.L), np.diag(a.stats_in.L), rho))
    dump_json({
        "year": e.year,
        "nodes": names,
        "output_chain": {"g": a.u, "h": a.stats_out.h, "L_diag": np.diag(a.stats_out.L)},
        "input_chain": {"g": a.d, "h": a.stats_in.h, "L_diag": np.diag(a.stats_in.L)},
        # diagnostic only: empirical tables tend to show larger output-chain moments
        "median_h_out": float(np.median(a.stats_out.h)),
        "median_h_in": float(np.median(a.stats_in.h)),
    }, out / f"stats_{tag}.json")
    gap = float(np.abs(rho - product_distribution(a.spectral_A)).max())
    dump_json({"year": e.year, "irreducible": a.irreducible, "A": a.spectral_A.to_dict(),
               "B": a.spectral_B.to_dict(), "rho_prod": rho, "product_gap_A_B": gap},
              out / f"spectral_{tag}.json")
    for name, mat in (("M", a.M), ("zeta", a.zeta)):
        write_matrix_csv(out / f"{name}_{tag}.csv", mat, names, list(lab.countries))
        write_matrix_binary(out / f"{name}_{tag}.bin", mat)
    for r in cfg.sectors:
        if not 1 <= r <= lab.S:
            print(f"warning: sector {r} outside 1..{lab.S}; skipped", file=sys.stderr)
            continue
        code = lab.sectors[r - 1]
        pp = markov.industry_matrix(a.M, lab, r, e.node_map)
        wp = markov.industry_matrix(a.zeta, lab, r, e.node_map)
        write_matrix_csv(out / f"PP_{tag}_{code}.csv", pp, list(lab.countries), list(lab.countries))
        write_matrix_csv(out / f"WP_{tag}_{code}.csv", wp, list(lab.countries), list(lab.countries))
    ind = a.indicators.to_dict()
    ind["year"] = e.year
    dump_json(ind, out / f"indicators_{tag}.json")
    for qname, values in (("rho_prod", rho), ("u", a.u), ("d", a.d)):
        if not np.isfinite(values).all():
            print(f"warning: {qname} undefined for {tag}; histogram skipped", file=sys.stderr)
            continue
        edges, counts = histogram(values, cfg.bins)
        write_rows(out / f"hist_{tag}_{qname}.csv", ["bin_left", "bin_right", "count"],
                   zip(edges[:-1], edges[1:], counts))
    write_rows(out / f"countries_{tag}.csv", ["country", "mean_u", "mean_d"],
               ((c, mu, country_means(a.d, e)[c]) for c, mu in country_means(a.u, e).items()))
    write_rows(out / f"kappa_sweep_{tag}.csv",
               ["kappa", "spearman_u_degree", "spearman_u_perron",
                "spearman_d_degree", "spearman_d_perron"],
               _kappa_sweep(a, parse_kappa_grid(cfg.kappa_grid)))
    return panel_row(a)


def _analyze_path(args):
    idx, path, cfg = args
    e = load_economy(path, cfg)
    tag = _year_tag(e, idx)
    return tag, analyze_one(e, tag, cfg)


def _run_years(cfg: RunConfig, fn):
    jobs = [(i, p, cfg) for i, p in enumerate(cfg.inputs)]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _synthetic_economies(cfg: RunConfig) -> list[Economy]:
    return [random_economy(synthetic_spec(cfg.synthetic))] if cfg.synthetic else []


def cmd_analyze(cfg: RunConfig) -> int:
    parse_kappa_grid(cfg.kappa_grid)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for e in _synthetic_economies(cfg):
        tag = _year_tag(e, 0) if e.year else "synthetic"
        rows.append((tag, analyze_one(e, tag, cfg)))
    if not rows and not cfg.inputs:
        raise UsageError("analyze needs input files or --synthetic")
    rows += _run_years(cfg, _analyze_path)
    print(f"analyzed {len(rows)} table(s) into {out}")
    return EXIT_OK


def _report_path(args):
    idx, path, cfg = args
    e = load_economy(path, cfg)
    return panel_row(_analyze_tagged(e, _year_tag(e, idx), cfg))


def cmd_report(cfg: RunConfig) -> int:
    if not cfg.inputs:
        raise UsageError("report needs input files")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = sorted(_run_years(cfg, _report_path), key=lambda r: r["year"])
    header = list(rows[0])
    write_rows(out / "panel.csv", header, ([r[k] for k in header] for r in rows))
    dump_json(rows, out / "panel.json")
    print(f"panel of {len(rows)} year(s) written to {out}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    targets = [(("synthetic"), e) for e in _synthetic_economies(cfg)]
    for idx, path in enumerate(cfg.inputs):
        e = load_economy(path, cfg)
        targets.append((_year_tag(e, idx), e))
    if not targets:
        raise UsageError("verify needs input files or --synthetic")
    ok = True
    for tag, e in targets:
        checks = run_suite(e, n_paths=cfg.paths, seed=cfg.seed)
        dump_json({"target": tag, "n": e.n, "checks": [c.to_dict() for c in checks],
                   "passed": all(c.passed for c in checks)}, out / f"verify_{tag}.json")
        for c in checks:
            mark = "PASS" if c.passed else "FAIL"
            print(f"[{mark}] {tag} {c.name}: {c.value:.6g} (bound {c.threshold:g}) {c.note}")
        ok &= all(c.passed for c in checks)
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"validate": cmd_validate, "analyze": cmd_analyze, "verify": cmd_verify,
            "report": cmd_report}


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("inputs", nargs="*", help="input table files, one per year")
    common.add_argument("--format", choices=["canonical", "wiod"])
    common.add_argument("--columns", help="key=value column map for --format wiod")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--config", help="key=value run configuration file")
    common.add_argument("--tau", type=float, help="relative accounting tolerance")
    common.add_argument("--tol-eig", dest="tol_eig", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--paths", type=int, help="Monte Carlo paths per start state")
    common.add_argument("--kappa-grid", dest="kappa_grid", help="a:b:steps")
    common.add_argument("--sectors", help="comma separated sector ordinals for PP/WP")
    common.add_argument("--jobs", type=int)
    common.add_argument("--bins", type=int)
    common.add_argument("--synthetic", nargs="+", metavar="KEY=VALUE",
                        help="generate an economy: J=, S=, density=, seed=, lambda=")
    p = argparse.ArgumentParser(prog="gvcmarkov", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("GVC_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (markov.NonAbsorbingChainError, DivergenceError, EconomyError,
            spectral.ConvergenceError, spectral.IrreducibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
