"""Command-line front end: ``ptfcs <command> [options]``.

Exit codes: 0 ok, 2 configuration, 3 numerical quality, 4 I/O.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .analysis import cumulant_ratios, fit_power_law, local_exponent, rate_function_curves, scaling_collapse, scan_z
from .cache import ProcessTensorCache, walk_depths
from .circuit import PAULI_Z, ChargeConvention, GateParams, build_xxz_gate
from .config import RunConfig, load_config_file, merge_config
from .errors import InvalidConfigError, PtfcsError, TruncationQualityError
from .fcs import (
    Cumulants,
    CumulantSeries,
    FcsTable,
    charge_distribution,
    correlator_series,
    cumulants_from_distribution,
    cumulants_taylor,
    lambda_grid,
    mgf_values,
)
from .io import read_table, render_table, write_table
from .oracles import (
    du_mgf,
    exact_correlator_statevector,
    exact_mgf_statevector,
    ff_correlator,
    ff_mgf_grid,
)
from .process_tensor import CrossBlockMode, Scheme, no_intervention_norm

MGF_COLUMNS = ["n", "lambda", "re_z", "im_z"]
CUMULANT_COLUMNS = ["n", "k1", "k2", "k3", "k4", "k5", "k6", "g4", "g6"]
DIST_COLUMNS = ["n", "q", "p"]
CORR_COLUMNS = ["n", "value"]


# ---------------------------------------------------------------------------
# argument parsing


def _run_options(
    p: argparse.ArgumentParser, model: bool = True, trunc: bool = True, chi_list: bool = False
) -> None:
    """Flags mirroring RunConfig; defaults stay None so config files can fill them."""
    p.add_argument("--config", help="YAML or JSON file with run settings (flags win)")
    if model:
        p.add_argument("--j", type=float, help="hopping coupling J")
        p.add_argument("--jprime", type=float, help="Ising coupling J'")
        p.add_argument("--depth", type=int, help="circuit depth n")
    if trunc:
        if chi_list:
            p.add_argument("--chi", "--chis", dest="chi_list", required=True, help="comma-separated χ values")
        else:
            p.add_argument("--chi", dest="chi_max", type=int, help="maximum bond dimension")
        p.add_argument("--cutoff", type=float, help="relative singular-value cutoff")
        p.add_argument("--mode", dest="cross_block_mode", choices=[m.value for m in CrossBlockMode])
        p.add_argument("--scheme", choices=[s.value for s in Scheme])
        p.add_argument("--cache-dir", help="process-tensor cache directory")
        p.add_argument("--threads", help="worker threads for the λ grid, or 'auto'")
    p.add_argument("--lambda-points", type=int, help="counting-field grid size (>= 2n+1)")
    p.add_argument("--output", "-o", dest="output_path", help="output file (default: stdout)")
    p.add_argument("--format", dest="output_format", choices=["csv", "json"])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ptfcs", description="Full counting statistics from process tensors.")
    ap.add_argument("--version", action="version", version=f"ptfcs {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grow", help="build and cache left/right process tensors")
    _run_options(p)
    p.add_argument("--save-every", type=int, default=0, help="also cache every k-th depth")

    p = sub.add_parser("mgf", help="generating function, distribution and cumulants")
    _run_options(p)
    p.add_argument("--route", choices=["fourier", "taylor"], default="fourier")
    p.add_argument("--final-only", action="store_true", help="only evaluate the final depth")
    p.add_argument("--strict", action="store_true", help="fail on unphysical distributions")

    p = sub.add_parser("correlator", help="<Z_0(n) Z_0(0)> for n = 0..depth")
    _run_options(p)
    p.add_argument("--observable", choices=["pauli_z"])

    p = sub.add_parser("oracle", help="exact reference values")
    p.add_argument("kind", choices=["ff", "du", "statevector"])
    _run_options(p, trunc=False)
    p.add_argument("--quantity", choices=["mgf", "correlator"], default="mgf")
    p.add_argument("--half-size", type=int, help="sites per half chain (statevector/ff)")

    p = sub.add_parser("analyze", help="power-law fits, local exponents and ratios")
    p.add_argument("input", help="cumulant or correlator CSV/JSON from mgf/correlator")
    p.add_argument("--fit-min", type=float)
    p.add_argument("--fit-max", type=float)
    p.add_argument("--output", "-o", dest="output_path")
    p.add_argument("--format", dest="output_format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("collapse", help="scaling collapse of ln Z")
    p.add_argument("input", help="mgf table holding two or more depths")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--z", type=float, help="dynamical exponent for λ n^(1/2z)")
    g.add_argument("--z-grid", help="comma-separated z values to scan")
    g.add_argument("--rate", action="store_true", help="ln Z / n against λ (large deviations)")
    p.add_argument("--depths", help="comma-separated subset of depths")
    p.add_argument("--output", "-o", dest="output_path")
    p.add_argument("--format", dest="output_format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("sweep", help="repeat mgf over a list of bond dimensions")
    _run_options(p, chi_list=True)
    return ap


def _config(ns: argparse.Namespace) -> RunConfig:
    file_values = load_config_file(ns.config) if getattr(ns, "config", None) else {}
    flags = dict(vars(ns))
    if flags.get("threads") not in (None, "auto"):
        try:
            flags["threads"] = int(flags["threads"])
        except ValueError:
            raise InvalidConfigError(f"threads must be an integer or 'auto', got {flags['threads']!r}") from None
    return merge_config(file_values, flags)


# ---------------------------------------------------------------------------
# output


def _emit(cfg_path: str | None, fmt: str, suffix: str, columns, rows, meta: dict) -> None:
    if cfg_path is None:
        if suffix:
            return  # secondary tables are only written to files
        _print_table(columns, rows, meta, fmt)
        return
    path = Path(cfg_path)
    if suffix:
        path = path.with_name(f"{path.stem}_{suffix}{path.suffix or '.' + fmt}")
    write_table(path, columns, rows, meta, fmt)


def _print_table(columns, rows, meta: dict, fmt: str) -> None:
    sys.stdout.write(render_table(columns, rows, meta, fmt))


def _meta(command: str, cfg: RunConfig | None, **extra) -> dict[str, Any]:
    out: dict[str, Any] = {"code_version": __version__, "command": command}
    if cfg is not None:
        out["config"] = cfg.echo()
    out.update(extra)
    return out


def _gate(cfg: RunConfig):
    return build_xxz_gate(GateParams(cfg.j, cfg.jprime))


def _walk(cfg: RunConfig, max_depth: int, start_at: int = 1, save_every: int = 0, resume: bool = False):
    gate = _gate(cfg)
    if cfg.cache_dir:
        cache = ProcessTensorCache(cfg.cache_dir)
        with cache:
            yield from walk_depths(gate, cfg.truncation, max_depth, cache, save_every, start_at, resume)
    else:
        yield from walk_depths(gate, cfg.truncation, max_depth, None, 0, start_at)


# ---------------------------------------------------------------------------
# commands


def cmd_grow(ns, cfg: RunConfig) -> int:
    rows = []
    total = 0.0
    for left, right in _walk(cfg, cfg.depth, 1, ns.save_every, resume=True):
        total = left.total_discarded_weight + right.total_discarded_weight
        rows.append(
            [
                left.depth,
                left.max_bond,
                right.max_bond,
                abs(no_intervention_norm(left) - 1),
                abs(no_intervention_norm(right) - 1),
                total,
            ]
        )
    cols = ["n", "max_bond_left", "max_bond_right", "norm_err_left", "norm_err_right", "discarded_weight"]
    _emit(cfg.output_path, cfg.output_format, "", cols, rows, _meta("grow", cfg, total_discarded_weight=total))
    return 0


def _fcs_series(cfg: RunConfig, route: str, final_only: bool):
    """Run the engine over depths; returns tables, distributions, cumulants and diagnostics."""
    gate = _gate(cfg)
    conv = ChargeConvention.xxz()
    tables, dists, series = [], [], CumulantSeries()
    diag = {"max_abs_im_z": 0.0, "min_p": math.inf, "total_discarded_weight": 0.0, "quality_issues": []}
    start = cfg.depth if final_only else 1
    for left, right in _walk(cfg, cfg.depth, start):
        n = left.depth
        npts = cfg.lambda_points or 4 * n + 1
        lams = lambda_grid(npts)
        table = FcsTable(n, lams, mgf_values(left, right, gate, conv, lams, cfg.n_threads))
        dist = charge_distribution(table)
        cum = cumulants_taylor(left, right, gate, conv) if route == "taylor" else cumulants_from_distribution(dist)
        tables.append(table)
        dists.append(dist)
        series.append(cum)
        diag["max_abs_im_z"] = max(diag["max_abs_im_z"], table.max_imag())
        diag["min_p"] = min(diag["min_p"], dist.min_probability)
        diag["total_discarded_weight"] = left.total_discarded_weight + right.total_discarded_weight
        diag["quality_issues"] += [f"n={n}: {s}" for s in dist.quality_issues()]
    return tables, dists, series, diag


def _cumulant_rows(series: CumulantSeries) -> list[list]:
    return [[c.depth, *c.kappas, c.gamma4, c.gamma6] for c in series]


def cmd_mgf(ns, cfg: RunConfig) -> int:
    tables, dists, series, diag = _fcs_series(cfg, ns.route, ns.final_only)
    meta = _meta("mgf", cfg, diagnostics=diag, route=ns.route)
    mgf_rows = [[t.depth, lam, z.real, z.imag] for t in tables for lam, z in zip(t.lambdas, t.values)]
    dist_rows = [[d.depth, int(q), p] for d in dists for q, p in zip(d.support, d.probabilities)]
    if cfg.output_path is None:
        _emit(None, cfg.output_format, "", CUMULANT_COLUMNS, _cumulant_rows(series), meta)
    else:
        _emit(cfg.output_path, cfg.output_format, "", MGF_COLUMNS, mgf_rows, meta)
        _emit(cfg.output_path, cfg.output_format, "cumulants", CUMULANT_COLUMNS, _cumulant_rows(series), meta)
        _emit(cfg.output_path, cfg.output_format, "distribution", DIST_COLUMNS, dist_rows, meta)
    if ns.strict and diag["quality_issues"]:
        raise TruncationQualityError("; ".join(diag["quality_issues"]))
    return 0


def cmd_correlator(ns, cfg: RunConfig) -> int:
    gate = _gate(cfg)
    for left, right in _walk(cfg, cfg.depth + 1, cfg.depth + 1):
        pass
    vals, imag = correlator_series(left, right, gate, PAULI_Z, cfg.depth)
    diag = {
        "max_abs_imag": float(np.max(np.abs(imag))),
        "total_discarded_weight": left.total_discarded_weight + right.total_discarded_weight,
    }
    rows = [[n, v] for n, v in enumerate(vals)]
    _emit(cfg.output_path, cfg.output_format, "", CORR_COLUMNS, rows, _meta("correlator", cfg, diagnostics=diag))
    return 0


def cmd_oracle(ns, cfg: RunConfig) -> int:
    n = cfg.depth
    if ns.quantity == "correlator":
        if ns.kind == "du":
            rows = [[m, 1.0 if m == 0 else 0.0] for m in range(n + 1)]
        elif ns.kind == "ff":
            half = ns.half_size or n + 1
            rows = [[m, ff_correlator(cfg.j, half, m)] for m in range(n + 1)]
        else:
            half = ns.half_size or n + 1
            rows = [[m, exact_correlator_statevector(cfg.j, cfg.jprime, half, m)] for m in range(n + 1)]
        _emit(cfg.output_path, cfg.output_format, "", CORR_COLUMNS, rows, _meta(f"oracle {ns.kind}", cfg))
        return 0
    lams = lambda_grid(cfg.n_lambda)
    if ns.kind == "du":
        vals = np.array([du_mgf(lam, n) for lam in lams], dtype=complex)
    elif ns.kind == "ff":
        vals = ff_mgf_grid(cfg.j, ns.half_size or n + 1, n, lams)
    else:
        half = ns.half_size or n
        vals = np.array([exact_mgf_statevector(cfg.j, cfg.jprime, half, n, lam) for lam in lams])
    rows = [[n, lam, z.real, z.imag] for lam, z in zip(lams, vals)]
    _emit(cfg.output_path, cfg.output_format, "", MGF_COLUMNS, rows, _meta(f"oracle {ns.kind}", cfg))
    return 0


def _numeric(cols: Sequence[str], rows) -> dict[str, np.ndarray]:
    out = {}
    for i, c in enumerate(cols):
        out[c] = np.array([float(r[i]) if r[i] not in ("", None) else np.nan for r in rows])
    return out


def cmd_analyze(ns) -> int:
    meta_in, cols, rows = read_table(ns.input)
    data = _numeric(cols, rows)
    window = None
    if ns.fit_min is not None or ns.fit_max is not None:
        window = (ns.fit_min if ns.fit_min is not None else -np.inf, ns.fit_max if ns.fit_max is not None else np.inf)
    meta = {"code_version": __version__, "command": "analyze", "input": str(ns.input), "source": meta_in}
    if "k2" in data:
        n, k2 = data["n"], data["k2"]
        fit = fit_power_law(np.column_stack([n, k2]), window)
        zloc = dict(local_exponent(np.column_stack([n, k2]))) if len(n) > 1 else {}
        ents = [Cumulants(int(m), tuple(data[f"k{r}"][i] for r in range(1, 7)), None, None) for i, m in enumerate(n)]
        ratios = cumulant_ratios(ents)
        meta["fit"] = {"quantity": "k2", "exponent_inv_z": fit.exponent, "z": 1 / fit.exponent if fit.exponent else None,
                       "amplitude": fit.amplitude, "window": fit.fit_window, "residual": fit.residual}
        cols_out = ["n", "k2", "z_local", "g4", "g6", "flagged"]
        out = [[int(m), k, zloc.get(m), r.gamma4, r.gamma6, int(r.flagged)] for m, k, r in zip(n, k2, ratios)]
    elif "value" in data:
        n, v = data["n"], data["value"]
        keep = n > 0
        fit = fit_power_law(np.column_stack([n[keep], np.abs(v[keep])]), window)
        meta["fit"] = {"quantity": "|correlator|", "exponent": fit.exponent, "amplitude": fit.amplitude,
                       "window": fit.fit_window, "residual": fit.residual}
        cols_out = ["n", "value", "fit"]
        out = [[int(m), x, float(fit.predict(m)) if m > 0 else None] for m, x in zip(n, v)]
    else:
        raise InvalidConfigError(f"{ns.input} is neither a cumulant nor a correlator table")
    _emit(ns.output_path, ns.output_format, "", cols_out, out, meta)
    return 0


def _read_tables(path: str, depths: str | None) -> list[FcsTable]:
    _, cols, rows = read_table(path)
    data = _numeric(cols, rows)
    missing = {"n", "lambda", "re_z", "im_z"} - set(data)
    if missing:
        raise InvalidConfigError(f"{path} lacks mgf columns {sorted(missing)}")
    want = {int(x) for x in depths.split(",")} if depths else None
    out = []
    for n in np.unique(data["n"]).astype(int):
        if want is not None and n not in want:
            continue
        m = data["n"] == n
        out.append(FcsTable(int(n), data["lambda"][m], data["re_z"][m] + 1j * data["im_z"][m]))
    return out


def cmd_collapse(ns) -> int:
    tables = _read_tables(ns.input, ns.depths)
    meta: dict[str, Any] = {"code_version": __version__, "command": "collapse", "input": str(ns.input)}
    if ns.z_grid:
        grid = [float(x) for x in ns.z_grid.split(",")]
        rows = [[z, r] for z, r in scan_z(tables, grid)]
        _emit(ns.output_path, ns.output_format, "", ["z", "collapse_residual"], rows, meta)
        return 0
    res = rate_function_curves(tables) if ns.rate else scaling_collapse(tables, ns.z)
    meta.update({"mode": "rate" if ns.rate else "collapse", "z": res.z, "collapse_residual": res.collapse_residual})
    rows = [[n, float(x), float(y)] for n, (xs, ys) in zip(res.depths, res.rescaled_curves) for x, y in zip(xs, ys)]
    ycol = "ln_z_over_n" if ns.rate else "ln_z"
    _emit(ns.output_path, ns.output_format, "", ["n", "x", ycol], rows, meta)
    return 0


def cmd_sweep(ns, cfg: RunConfig) -> int:
    try:
        chis = sorted({int(c) for c in ns.chi_list.split(",") if c.strip()})
    except ValueError:
        raise InvalidConfigError(f"--chi expects comma-separated integers, got {ns.chi_list!r}") from None
    if not chis:
        raise InvalidConfigError("--chi needs at least one value")
    runs = []
    for chi in chis:
        sub = merge_config(cfg.echo(), {"chi_max": chi, "output_path": None})
        _, _, series, diag = _fcs_series(sub, "fourier", False)
        runs.append((chi, series, diag))
    rows = []
    for i, (chi, series, diag) in enumerate(runs):
        last = series.entries[-1]
        row = [chi, last.depth, last.kappa(2), last.gamma4, last.gamma6]
        if i + 1 < len(runs):
            nxt = runs[i + 1][1]
            row.append(float(np.max(np.abs(series.kappa(2) - nxt.kappa(2)))))
        else:
            row.append(None)
        row += [diag["total_discarded_weight"], diag["max_abs_im_z"], diag["min_p"]]
        rows.append(row)
    cols = ["chi", "n", "k2", "g4", "g6", "delta_k2", "discarded_weight", "max_abs_im_z", "min_p"]
    _emit(cfg.output_path, cfg.output_format, "", cols, rows, _meta("sweep", cfg, chis=chis))
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        if ns.command == "analyze":
            return cmd_analyze(ns)
        if ns.command == "collapse":
            return cmd_collapse(ns)
        cfg = _config(ns)
        handler = {"grow": cmd_grow, "mgf": cmd_mgf, "correlator": cmd_correlator,
                   "oracle": cmd_oracle, "sweep": cmd_sweep}[ns.command]
        return handler(ns, cfg)
    except PtfcsError as exc:
        print(f"ptfcs {ns.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"ptfcs {ns.command}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
