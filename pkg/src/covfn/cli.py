"""Command-line entry point: `covfn estimate` and `covfn simulate`.

Output is CSV (comment header lines starting with '#', then column names,
then rows) or a single JSON object {meta, columns, rows}.  All numbers are
rendered with 17 significant digits so files round-trip bit-faithfully;
volatile metadata (wall time) is kept out of output files so repeated runs
with the same seed are byte-identical.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import (
    BadAlpha,
    CovfnError,
    DomainError,
    IoError,
    NotPSD,
    ParseError,
    RaggedRows,
    UsageError,
)
from .estimators import EstimateReport, bias_reduced_estimate
from .experiments import (
    ExperimentConfig,
    ResultTable,
    build_b,
    run_experiment,
)
from .functions import parse_function_spec
from .sampling import DataMatrix, RngStream
from .symmat import SymMat, schatten_norm

__all__ = ["load_data_csv", "load_config", "run_cli", "main", "console_main"]

_USAGE_EXIT = 1
_DATA_EXIT = 2


def load_data_csv(path: str, has_header: bool = False) -> DataMatrix:
    """Read a numeric CSV (rows = observations) into a DataMatrix."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    rows = []
    ncols = None
    start = 1 if has_header else 0
    for lineno, line in enumerate(lines, start=1):
        if lineno == 1 and has_header:
            continue
        if not line.strip():
            continue
        cells = line.split(",")
        if ncols is None:
            ncols = len(cells)
        elif len(cells) != ncols:
            raise RaggedRows(lineno, ncols, len(cells))
        row = []
        for colno, cell in enumerate(cells, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(lineno, colno, f"not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise ParseError(lineno, colno, f"non-finite value: {cell!r}")
            row.append(v)
        rows.append(row)
    if not rows:
        raise ParseError(max(start, 1), 1, "no data rows")
    return DataMatrix(np.array(rows))


def _render_number(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not math.isfinite(f):
            return "nan" if math.isnan(f) else ("inf" if f > 0 else "-inf")
        return format(f, ".17g")
    return str(v)


def _render_json(obj) -> str:
    if isinstance(obj, dict):
        inner = ", ".join(
            f"{_render_json(str(k))}: {_render_json(v)}" for k, v in obj.items()
        )
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_render_json(v) for v in obj) + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, float, np.integer, np.floating)):
        if isinstance(obj, (float, np.floating)) and not math.isfinite(float(obj)):
            return f'"{_render_number(obj)}"'
        return _render_number(obj)
    s = str(obj).replace("\\", "\\\\").replace('"', '\\"')
    return f'"{s}"'


def _stable_meta(meta: dict) -> dict:
    return {k: v for k, v in meta.items() if k != "wall_time_s"}


def table_to_csv(table: ResultTable) -> str:
    meta = _stable_meta(table.meta)
    seed = meta.get("seed", "")
    out = [f"# covfn {__version__} seed={seed}"]
    for key, val in meta.items():
        if key in ("tool", "version", "seed"):
            continue
        out.append(f"# {key}={_render_json(val)}")
    out.append(",".join(table.columns))
    for row in table.rows:
        out.append(",".join(_render_number(v) for v in row))
    return "\n".join(out) + "\n"


def table_to_json(table: ResultTable) -> str:
    obj = {
        "meta": _stable_meta(table.meta),
        "columns": list(table.columns),
        "rows": [list(r) for r in table.rows],
    }
    return _render_json(obj) + "\n"


def report_to_table(rep: EstimateReport, b_factor: float) -> ResultTable:
    columns = (
        "functional_value", "estimator_kind", "k", "mc_stderr", "sigma_hat",
        "ci_lo", "ci_hi", "alpha", "n", "d", "chains", "failed_chains",
        "b_normalization",
    )
    row = (
        rep.functional_value, rep.estimator_kind, rep.k, rep.mc_stderr,
        rep.sigma_hat, rep.ci[0], rep.ci[1], rep.alpha, rep.n, rep.d,
        rep.chains, rep.failed_chains, b_factor,
    )
    meta = {
        "tool": "covfn",
        "version": __version__,
        "seed": rep.master_seed,
        "config": {
            "estimator": rep.estimator_kind, "k": rep.k, "alpha": rep.alpha,
            "chains": rep.chains, "seed": rep.master_seed,
        },
    }
    return ResultTable(columns=columns, rows=(row,), meta=meta)


def _build_b_flag(spec: str, d: int):
    """B from a CLI flag: identity | rank1:IDX | file:PATH (all nuclear-
    normalized to 1); returns (SymMat, normalization factor)."""
    if spec.startswith("file:"):
        data = load_data_csv(spec[len("file:"):])
        a = data.rows
        if a.shape[0] != a.shape[1]:
            raise UsageError(f"B file must hold a square matrix, got {a.shape}")
        if a.shape[0] != d:
            raise UsageError(f"B file is {a.shape[0]}x{a.shape[0]}, data dim is {d}")
        nuc = schatten_norm(a, 1)
        factor = 1.0 / nuc if nuc > 1.0 else 1.0
        return SymMat(a * factor), factor
    return build_b(spec, d)


_CONFIG_KEYS = ("experiment", "d", "n", "k", "fn", "B", "sigma", "M", "N",
                "alpha", "seed")


def load_config(path: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse a flat key=value config file (# comments, UTF-8)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    raw = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise UsageError(
                f"{path}:{lineno}: unknown config key {key!r}; "
                f"allowed: {', '.join(_CONFIG_KEYS)}"
            )
        raw[key] = val.strip()
    if overrides:
        for key, val in overrides.items():
            if key not in _CONFIG_KEYS:
                raise UsageError(f"unknown config key {key!r} in --set")
            raw[key] = val
    if "experiment" not in raw:
        raise UsageError("config is missing the 'experiment' key")

    def int_list(s):
        return tuple(int(t) for t in s.split(","))

    try:
        return ExperimentConfig(
            experiment=raw["experiment"],
            d=int_list(raw.get("d", "10")),
            n=int_list(raw.get("n", "100")),
            k=int_list(raw.get("k", "0")),
            fn=raw.get("fn", "square"),
            b=raw.get("B", "rank1:0"),
            sigma=raw.get("sigma", "identity"),
            m=int(raw.get("M", "100")),
            nchains=int(raw.get("N", "100")),
            alpha=float(raw.get("alpha", "0.05")),
            seed=int(raw.get("seed", "0")),
        )
    except ValueError as exc:
        raise UsageError(f"bad config value: {exc}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="covfn", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    est = sub.add_parser("estimate", help="estimate <f(Sigma), B> from a data CSV")
    est.add_argument("--data", required=True, help="CSV of observations, one per row")
    est.add_argument("--has-header", action="store_true")
    est.add_argument("--fn", default="identity",
                     help="scalar function spec, NAME[:p1,p2,...]")
    est.add_argument("--B", default="identity", dest="b",
                     help="identity | rank1:INDEX | file:PATH (nuclear-normalized)")
    est.add_argument("--k", type=int, default=0, help="bias-correction order")
    est.add_argument("--chains", type=int, default=200,
                     help="bootstrap chains per estimate (ignored for k=0)")
    est.add_argument("--alpha", type=float, default=0.05)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--format", choices=("csv", "json"), default="json")
    est.add_argument("--out", default="-", help="output path, '-' for stdout")

    sim = sub.add_parser("simulate", help="run a simulation experiment")
    sim.add_argument("--config", required=True, help="key=value config file")
    sim.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a config key (repeatable)")
    sim.add_argument("--format", choices=("csv", "json"), default="csv")
    sim.add_argument("--out", default="-", help="output path, '-' for stdout")
    return parser


def _emit(text: str, out_path: str):
    if out_path == "-":
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _cmd_estimate(args) -> int:
    data = load_data_csv(args.data, args.has_header)
    f = parse_function_spec(args.fn)
    b, factor = _build_b_flag(args.b, data.d)
    rng = RngStream(args.seed)
    rep = bias_reduced_estimate(data, f, b, args.k, max(args.chains, 1),
                                rng, args.alpha)
    sampling_se = rep.sigma_hat / math.sqrt(rep.n)
    if rep.mc_stderr > 0.1 * sampling_se:
        sys.stderr.write(
            f"warning: Monte Carlo stderr {rep.mc_stderr:.3g} exceeds 10% of "
            f"the sampling stderr {sampling_se:.3g}; increase --chains\n"
        )
    table = report_to_table(rep, factor)
    render = table_to_csv if args.format == "csv" else table_to_json
    _emit(render(table), args.out)
    return 0


def _cmd_simulate(args) -> int:
    overrides = {}
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = val.strip()
    cfg = load_config(args.config, overrides)
    table = run_experiment(cfg)
    render = table_to_csv if args.format == "csv" else table_to_json
    _emit(render(table), args.out)
    return 0


def _apply_thread_cap():
    """Honor COVFN_THREADS (0 or unset = auto) for BLAS worker pools."""
    raw = os.environ.get("COVFN_THREADS", "").strip()
    if not raw or raw == "0":
        return
    try:
        cap = int(raw)
    except ValueError:
        raise UsageError(f"COVFN_THREADS must be an integer, got {raw!r}") from None
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover - optional dependency
        return
    threadpool_limits(limits=cap)


def run_cli(argv) -> int:
    """Parse argv (without the program name) and run; returns exit code."""
    parser = _build_parser()
    try:
        _apply_thread_cap()
        args = parser.parse_args(argv)
        if args.subcommand == "estimate":
            return _cmd_estimate(args)
        return _cmd_simulate(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        parser.print_usage(sys.stderr)
        return _USAGE_EXIT
    except (IoError, ParseError, RaggedRows, DomainError, NotPSD, BadAlpha) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return _DATA_EXIT
    except CovfnError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return _DATA_EXIT


main = run_cli


def console_main():  # pragma: no cover - thin wrapper
    raise SystemExit(run_cli(sys.argv[1:]))
