"""Command-line front end: ``lpdens fit | bw | simulate``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bwselect import BandwidthResult, BwMethod, select_bandwidth
from .ecdf import Sample, ingest, quantile_grid
from .inference import InferenceTable, rbc_pointwise, scale_results, uniform_band
from .kernel import KernelKind
from .lpfit import SingularFitError
from .simulate import DEFAULT_POINTS, DGPS, SimReport, simulate

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_ESTIMATION = 0, 1, 2, 3
RULE = 75
BW_RULE = 32
CSV_FIELDS = ["grid", "bw", "eff_n", "est_p", "se_p", "est_q", "se_q", "ci_lo", "ci_hi"]

log = logging.getLogger("lpdens")


class ConfigError(ValueError):
    pass


class InputError(OSError):
    pass


# --------------------------------------------------------------------------
# input


def _column_index(header: list[str] | None, col: str) -> int:
    if col.lstrip("-").isdigit():
        return int(col)
    if header is None:
        raise ConfigError(f"column {col!r} given by name but input has no header")
    if col not in header:
        raise ConfigError(f"column {col!r} not found; available: {', '.join(header)}")
    return header.index(col)


def read_data(path: str, col: str = "0", weights_col: str | None = None):
    """Read one numeric column (plus optional weights) from CSV or whitespace text."""
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise InputError(f"{path}: no data")
    if "," in lines[0]:
        rows = [[c.strip() for c in r] for r in csv.reader(lines)]
    else:
        rows = [ln.split() for ln in lines]
    header = None
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        header, rows = rows[0], rows[1:]
    ci = _column_index(header, col)
    wi = None if weights_col is None else _column_index(header, weights_col)
    values, weights = [], []
    for lineno, row in enumerate(rows, start=2 if header else 1):
        try:
            values.append(float(row[ci]))
            if wi is not None:
                weights.append(float(row[wi]))
        except (IndexError, ValueError) as exc:
            raise InputError(f"{path}: bad value on data row {lineno}: {exc}") from exc
    return np.array(values), (np.array(weights) if wi is not None else None)


# --------------------------------------------------------------------------
# formatting


def _pct(alpha: float) -> str:
    return f"{100 * (1 - alpha):g}%"


def _header_lines(rows: list[tuple[str, str, object]]) -> list[str]:
    out = []
    for label, code, value in rows:
        out.append(f"{label:<41}{code:<8}{value}".rstrip())
    return out


def _estimand(nu: int) -> str:
    if nu == 0:
        return "Distribution function estimated"
    if nu == 1:
        return "Density function estimated"
    return "Density derivative estimated"


def _bw_label(method: str) -> str:
    return "user provided" if method == "user" else method


def _fmt(v: float, width: int) -> str:
    return f"{v:>{width}.4f}" if math.isfinite(v) else f"{'NA':>{width}}"


def _with_rules(rows: list[str], sep: int, width: int) -> list[str]:
    out = []
    for k, row in enumerate(rows, start=1):
        out.append(row)
        if sep > 0 and k % sep == 0 and k < len(rows):
            out.append("-" * width)
    return out


def format_fit_table(t: InferenceTable, sep: int = 5) -> str:
    rbc = t.q != t.p
    head = [
        ("Sample size", "(n=)", t.n),
        ("Polynomial order for point estimation", "(p=)", t.p),
        (_estimand(t.nu), "(v=)", t.nu),
        ("Polynomial order for confidence interval", "(q=)", t.q),
        ("Kernel function", "", t.kernel.value),
        ("Bandwidth selection method", "", _bw_label(t.bw_method)),
    ]
    if t.scale != 1.0:
        head.append(("Scale", "", f"{t.scale:g}"))
    lines = ["Call: lpdens fit", ""] + _header_lines(head) + [""]
    ci = f"[ Unif. {_pct(t.alpha)} C.B. ]" if t.uniform else f"[ {_pct(t.alpha)} C.I. ]"
    top = "Robust B.C." if rbc else "Conventional"
    lines += [
        "=" * RULE,
        f"{'':<32}{'Point':>10}{'Std.':>10}{'':7}{top}",
        f"{'Index':<5}{'Grid':>9}{'B.W.':>10}{'Eff.n':>8}{'Est.':>10}{'Error':>10}{'':6}{ci}",
        "=" * RULE,
    ]
    body = []
    for i in range(t.grid.size):
        row = (f"{i + 1:<4}{t.grid[i]:>10.4f}{t.h[i]:>10.4f}{int(t.eff_n[i]):>8d}"
               f"{_fmt(t.est_p[i], 10)}{_fmt(t.se_p[i], 10)}"
               f"{_fmt(t.ci_lo[i], 11)} ,{_fmt(t.ci_hi[i], 8)}")
        body.append(row)
    lines += _with_rules(body, sep, RULE)
    lines.append("=" * RULE)
    if t.uniform:
        lines.append(f"Uniform critical value: {t.band_crit:.4f}")
    if t.failed.any():
        lines.append("NA: local fit singular at this grid point")
    return "\n".join(lines)


def format_bw_table(bw: BandwidthResult, n: int, sep: int = 5) -> str:
    head = [
        ("Sample size", "(n=)", n),
        ("Polynomial order for point estimation", "(p=)", bw.p),
        (_estimand(bw.nu), "(v=)", bw.nu),
        ("Kernel function", "", bw.kernel.value),
        ("Bandwidth selection method", "", _bw_label(bw.method.value)),
    ]
    lines = ["Call: lpdens bw", ""] + _header_lines(head) + [""]
    lines += ["=" * BW_RULE, f"{'Index':<5}{'Grid':>9}{'B.W.':>10}{'Eff.n':>8}", "=" * BW_RULE]
    body = [f"{i + 1:<4}{bw.grid[i]:>10.4f}{bw.h[i]:>10.4f}{int(bw.eff_n[i]):>8d}"
            for i in range(bw.grid.size)]
    lines += _with_rules(body, sep, BW_RULE)
    lines.append("=" * BW_RULE)
    return "\n".join(lines)


def _csv_value(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return repr(v) if math.isfinite(v) else "nan"


def format_fit_csv(t: InferenceTable) -> str:
    fields = CSV_FIELDS + (["band_crit"] if t.uniform else [])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fields)
    cols = [t.grid, t.h, t.eff_n, t.est_p, t.se_p, t.est_q, t.se_q, t.ci_lo, t.ci_hi]
    for i in range(t.grid.size):
        row = [_csv_value(c[i]) for c in cols]
        if t.uniform:
            row.append(_csv_value(t.band_crit))
        writer.writerow(row)
    return buf.getvalue().rstrip("\n")


def format_bw_csv(bw: BandwidthResult) -> str:
    lines = ["grid,bw,eff_n,regularized"]
    for g, h, e, r in zip(bw.grid, bw.h, bw.eff_n, bw.regularized):
        lines.append(f"{_csv_value(g)},{_csv_value(h)},{int(e)},{int(bool(r))}")
    return "\n".join(lines)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False)


def format_fit_json(t: InferenceTable, config: dict) -> str:
    return _dumps({
        "command": "fit",
        "config": config,
        "n": t.n,
        "p": t.p, "q": t.q, "v": t.nu,
        "kernel": t.kernel.value,
        "bwselect": t.bw_method,
        "alpha": t.alpha,
        "uniform": t.uniform,
        "band_crit": t.band_crit,
        "scale": t.scale,
        "results": t.records(),
    })


def format_bw_json(bw: BandwidthResult, n: int, config: dict) -> str:
    return _dumps({
        "command": "bw",
        "config": config,
        "n": n,
        "p": bw.p, "v": bw.nu,
        "kernel": bw.kernel.value,
        "bwselect": bw.method.value,
        "results": [
            {"grid": float(g), "bw": float(h), "eff_n": int(e), "regularized": bool(r)}
            for g, h, e, r in zip(bw.grid, bw.h, bw.eff_n, bw.regularized)
        ],
    })


SIM_COLUMNS = ["method", "point", "truth", "h", "bias", "sd", "rmse", "ec", "il", "reps"]


def format_sim(report: SimReport, fmt: str) -> str:
    if fmt == "json":
        return _dumps({
            "command": "simulate", "dgp": report.dgp, "n": report.n, "reps": report.reps,
            "seed": report.seed, "points": list(report.points), "failures": report.failures,
            "results": [r.as_dict() for r in report.rows],
        })
    if fmt == "csv":
        lines = [",".join(SIM_COLUMNS)]
        for r in report.rows:
            d = r.as_dict()
            lines.append(",".join(d["method"] if c == "method" else _csv_value(d[c])
                                  for c in SIM_COLUMNS))
        return "\n".join(lines)
    width = 72
    lines = [
        f"Monte Carlo study: {report.dgp}, n={report.n}, reps={report.reps}, seed={report.seed}",
        "",
        "=" * width,
        f"{'Method':<12}{'x':>8}{'h':>8}{'Bias':>8}{'SD':>8}{'RMSE':>8}{'EC':>8}{'IL':>8}{'Reps':>4}",
        "=" * width,
    ]
    current = None
    for r in report.rows:
        if current is not None and r.method != current:
            lines.append("-" * width)
        current = r.method
        lines.append(f"{r.method:<12}{r.point:>8.3f}{r.h:>8.3f}{r.bias:>8.3f}{r.sd:>8.3f}"
                     f"{r.rmse:>8.3f}{r.ec:>8.3f}{r.il:>8.3f}{r.reps:>5d}")
    lines.append("=" * width)
    if report.failures:
        lines.append(f"{report.failures} replication-point estimates failed and were excluded")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# argument handling


def _add_data_args(sp: argparse.ArgumentParser):
    sp.add_argument("data", help="input file (CSV or whitespace separated); '-' for stdin")
    sp.add_argument("--col", default="0", help="data column, by name or 0-based index")
    sp.add_argument("--weights-col", default=None, help="optional column of observation weights")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--grid", type=float, nargs="+", help="explicit evaluation points")
    g.add_argument("--grid-range", type=float, nargs=3, metavar=("LO", "HI", "STEP"))
    g.add_argument("--grid-quantiles", type=int, metavar="K",
                   help="K quantile-spaced points (default 19)")
    sp.add_argument("--p", type=int, default=2, help="polynomial order for point estimation")
    sp.add_argument("--v", type=int, default=1, help="derivative order (0 = CDF, 1 = density)")
    sp.add_argument("--kernel", default="triangular", choices=[k.value for k in KernelKind])
    sp.add_argument("--bwselect", default="mse-dpi",
                    choices=[m.value for m in BwMethod if m is not BwMethod.USER])
    sp.add_argument("--bw", type=float, nargs="+", help="user bandwidth(s), scalar or one per point")
    sp.add_argument("--nlocalmin", type=int, default=None)
    sp.add_argument("--nuniquemin", type=int, default=None)
    sp.add_argument("--no-regularize", dest="regularize", action="store_false")
    sp.add_argument("--no-masspoints", dest="masspoints", action="store_false")
    sp.add_argument("--format", choices=["table", "csv", "json"], default="table")
    sp.add_argument("--sep", type=int, default=5, help="dashed rule every SEP rows (0 = none)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpdens",
        description="Local polynomial CDF/density estimation with robust bias-corrected inference.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", "-V", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="estimate and report intervals on a grid")
    _add_data_args(fit)
    fit.add_argument("--q", type=int, default=None, help="polynomial order for inference (default p+1)")
    fit.add_argument("--alpha", type=float, default=0.05)
    fit.add_argument("--ciuniform", action="store_true", help="report a uniform band")
    fit.add_argument("--cisimul", type=int, default=2000, help="simulations for the band")
    fit.add_argument("--scale", type=float, default=1.0)
    fit.add_argument("--seed", type=int, default=None)

    bw = sub.add_parser("bw", help="data-driven bandwidth selection only")
    _add_data_args(bw)

    sim = sub.add_parser("simulate", help="Monte Carlo coverage study")
    sim.add_argument("--dgp", default="truncnorm", help=f"one of {', '.join(DGPS)}")
    sim.add_argument("--n", type=int, default=1000)
    sim.add_argument("--reps", type=int, default=2000)
    sim.add_argument("--points", type=float, nargs="+", default=list(DEFAULT_POINTS))
    sim.add_argument("--bwselect", nargs="+", default=["mse-dpi", "imse-dpi"],
                     choices=["mse-dpi", "imse-dpi", "mse-rot", "imse-rot"])
    sim.add_argument("--alpha", type=float, default=0.05)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--baseline", action="store_true",
                     help="also report a fixed-kernel estimator without boundary correction")
    sim.add_argument("--format", choices=["table", "csv", "json"], default="table")
    return parser


def _grid(args, s: Sample) -> np.ndarray:
    if args.grid is not None:
        g = np.asarray(args.grid, dtype=float)
    elif args.grid_range is not None:
        lo, hi, step = args.grid_range
        if not step > 0 or hi < lo:
            raise ConfigError("grid range needs step > 0 and HI >= LO")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        g = lo + step * np.arange(count)
    else:
        k = 19 if args.grid_quantiles is None else args.grid_quantiles
        if k < 1:
            raise ConfigError("--grid-quantiles must be at least 1")
        return quantile_grid(s, k)
    if np.any(~np.isfinite(g)):
        raise ConfigError("grid points must be finite")
    if np.any(np.diff(g) <= 0):
        raise ConfigError("grid points must be strictly increasing")
    return g


def _validate_common(args):
    if args.p < 0 or not 0 <= args.v <= args.p:
        raise ConfigError(f"need 0 <= v <= p, got v={args.v}, p={args.p}")
    if args.bw is not None and any(not (b > 0 and math.isfinite(b)) for b in args.bw):
        raise ConfigError("bandwidths must be positive")
    if args.bw is None and args.bwselect.endswith("dpi") and args.p > 4:
        raise ConfigError("plug-in selectors support p <= 4; pass --bw or use a rot selector")
    if args.sep < 0:
        raise ConfigError("--sep must be nonnegative")


def _config_echo(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("verbose",):
            continue
        out[k] = v
    return out


def _bandwidths(args, s: Sample, grid: np.ndarray) -> BandwidthResult:
    bw = args.bw
    if bw is not None and len(bw) not in (1, grid.size):
        raise ConfigError(f"--bw takes 1 or {grid.size} values, got {len(bw)}")
    return select_bandwidth(
        s, grid, "user" if bw is not None else args.bwselect, args.p, args.v, args.kernel,
        bw=None if bw is None else (bw[0] if len(bw) == 1 else bw),
        regularize=args.regularize, n_local_min=args.nlocalmin, n_unique_min=args.nuniquemin,
        mass_points=args.masspoints,
    )


def cmd_fit(args) -> tuple[str, int]:
    q = args.p + 1 if args.q is None else args.q
    _validate_common(args)
    if q < args.p:
        raise ConfigError(f"need q >= p, got q={q}, p={args.p}")
    if not 0 < args.alpha < 1:
        raise ConfigError("--alpha must lie in (0, 1)")
    if args.ciuniform and args.cisimul < 100:
        raise ConfigError("--cisimul must be at least 100")
    if not args.scale > 0:
        raise ConfigError("--scale must be positive")
    args.q = q
    values, weights = read_data(args.data, args.col, args.weights_col)
    s = ingest(values, weights)
    grid = _grid(args, s)
    bw = _bandwidths(args, s, grid)
    if args.ciuniform:
        table = uniform_band(s, bw, args.p, q, args.v, args.kernel, args.alpha,
                             args.cisimul, args.seed, mass_points=args.masspoints)
    else:
        table = rbc_pointwise(s, bw, args.p, q, args.v, args.kernel, args.alpha,
                              mass_points=args.masspoints)
    if args.scale != 1.0:
        table = scale_results(table, args.scale)
    if table.failed.all():
        return "estimation failed at every grid point", EXIT_ESTIMATION
    if args.format == "csv":
        text = format_fit_csv(table)
    elif args.format == "json":
        text = format_fit_json(table, _config_echo(args))
    else:
        text = format_fit_table(table, args.sep)
    return text, EXIT_OK


def cmd_bw(args) -> tuple[str, int]:
    _validate_common(args)
    values, weights = read_data(args.data, args.col, args.weights_col)
    s = ingest(values, weights)
    grid = _grid(args, s)
    bw = _bandwidths(args, s, grid)
    if args.format == "csv":
        return format_bw_csv(bw), EXIT_OK
    if args.format == "json":
        return format_bw_json(bw, s.n, _config_echo(args)), EXIT_OK
    return format_bw_table(bw, s.n, args.sep), EXIT_OK


def cmd_simulate(args) -> tuple[str, int]:
    if args.dgp not in DGPS:
        raise ConfigError(f"unknown DGP {args.dgp!r}; expected one of {', '.join(DGPS)}")
    if args.reps < 50:
        raise ConfigError("--reps must be at least 50")
    if args.n < 2:
        raise ConfigError("--n must be at least 2")
    if not 0 < args.alpha < 1:
        raise ConfigError("--alpha must lie in (0, 1)")
    report = simulate(args.dgp, args.n, args.reps, tuple(args.points), tuple(args.bwselect),
                      alpha=args.alpha, seed=args.seed, workers=max(1, args.workers),
                      baseline=args.baseline)
    return format_sim(report, args.format), EXIT_OK


COMMANDS = {"fit": cmd_fit, "bw": cmd_bw, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors exit 2, --help/--version exit 0
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        text, code = COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularFitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except ValueError as exc:
        # invalid data (empty, non-finite, degenerate) is an input problem
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if code != EXIT_OK:
        print(f"error: {text}", file=sys.stderr)
        return code
    print(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
