"""Command-line front end.

Subcommands: ``gaussian`` (Monte Carlo sweep over n), ``discrete`` (all
bounds for a problem file), ``compare`` (ordering checks), ``cd-check``
(random decoupling-lemma sweep) and ``plot-data`` (long-format series).
Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
from dataclasses import asdict, dataclass, fields
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy

from . import __version__
from .bounds import all_bounds, compare_bounds, table1_report
from .core_model import (
    CLOSED_FORM,
    EXACT,
    MONTE_CARLO,
    FiniteProblem,
    GaussianProblem,
    load_problem,
    true_gen_error,
)
from .errors import DomainError, GenBoundError, InvariantViolation, NumericError, ResourceError
from .gaussian_case import GaussianCaseConfig, icimi_gaussian, imi_report, strengthened_gaussian
from .info_measures import DEFAULT_QUAD_TOL, LN2
from .oracle import ASSERT_TOL, cd_check_sweep
from .reports import CIMI_STRENGTHENED, CMI_STRENGTHENED, PROVENANCE, BoundReport

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_INVARIANT = 4

SUBCOMMANDS = ("gaussian", "discrete", "cd-check", "compare", "plot-data")
BOUNDS_COLUMNS = ["n", "bound_name", "variant", "info_term_nats", "value", "std_error", "method", "flags"]
GAUSSIAN_COLUMNS = ["n", "sigma2", "bound_name", "value", "std_error", "scaled_value", "mc_samples", "seed"]
PLOT_COLUMNS = ["n", "series", "y"]
TRUE_ERROR = "true_error"


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    problem_file: Optional[str] = None
    n_sweep: Tuple[int, ...] = ()
    sigma2: float = 1.0
    mu: float = 0.0
    mc_samples: int = 100_000
    seed: Optional[int] = None
    quad_tol: float = DEFAULT_QUAD_TOL
    output: Optional[str] = None
    units: str = "nats"
    exact: bool = True
    strengthened: bool = False
    trials: int = 1000
    max_alphabet: int = 4
    tol: float = ASSERT_TOL
    dump_dir: Optional[str] = None
    input: Optional[str] = None
    table: bool = False

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise DomainError(f"unknown subcommand {self.subcommand!r}")
        if self.units not in ("nats", "bits"):
            raise DomainError("units must be 'nats' or 'bits'")
        if not self.sigma2 > 0:
            raise DomainError("sigma2 must be positive")
        if not self.quad_tol > 0 or not self.tol > 0:
            raise DomainError("tolerances must be positive")
        if self.mc_samples < 2:
            raise DomainError("mc_samples must be at least 2")
        if any(n < 1 for n in self.n_sweep):
            raise DomainError("every n must be a positive integer")
        if self.trials < 0 or self.max_alphabet < 2:
            raise DomainError("trials must be >= 0 and max_alphabet >= 2")
        if self.subcommand == "gaussian":
            if not self.n_sweep:
                raise DomainError("gaussian needs --n-sweep")
            if any(n < 2 for n in self.n_sweep):
                raise DomainError("gaussian sweep needs n >= 2")
        if self.subcommand in ("discrete", "compare") and not self.problem_file:
            raise DomainError(f"{self.subcommand} needs --problem")
        if self.subcommand == "plot-data" and not self.input:
            raise DomainError("plot-data needs --input")
        if self.monte_carlo and self.seed is None:
            raise DomainError("a seed is required for Monte Carlo runs")

    @property
    def monte_carlo(self) -> bool:
        return self.subcommand == "gaussian" or (self.subcommand == "discrete" and not self.exact)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_sweep"] = list(self.n_sweep)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        kw = {k: v for k, v in d.items() if k in known}
        kw["n_sweep"] = tuple(kw.get("n_sweep", ()))
        return cls(**kw)


# ---------------------------------------------------------------------------
# formatting
# ---------------------------------------------------------------------------


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _write_csv(columns: Sequence[str], rows: Sequence[Sequence], out: Optional[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(row)
    text = buf.getvalue()
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return text


def bounds_rows(reports: Sequence[BoundReport], units: str = "nats") -> Tuple[List[str], List[list]]:
    """BoundReport rows; information terms are converted only here."""
    scale = 1.0 / LN2 if units == "bits" else 1.0
    cols = list(BOUNDS_COLUMNS)
    cols[3] = f"info_term_{units}"
    rows = []
    for r in reports:
        flags = list(r.flags) + ([r.status] if not r.applicable else [])
        rows.append([
            r.n, r.bound_name, r.variant, _num(r.info_term * scale), _num(r.value),
            _num(r.std_error), r.method, ";".join(flags),
        ])
    return cols, rows


def write_manifest(config: RunConfig, path: str, bound_names: Sequence[str], extra: Optional[dict] = None):
    manifest = {
        "config": config.to_dict(),
        "versions": {
            "genbound": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
        },
        "tolerances": {"quad_tol": config.quad_tol, "assert_tol": config.tol},
        "provenance": {name: PROVENANCE[name] for name in bound_names if name in PROVENANCE},
        "notes": [
            "information terms are computed in nats; bits appear only in emitted CSV",
            "strengthened CMI/CIMI floor is sigma2 / (pi sqrt(log2 e))",
        ],
    }
    if extra:
        manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path: str) -> RunConfig:
    with open(path) as fh:
        return RunConfig.from_dict(json.load(fh)["config"])


def _manifest_path(out: str) -> str:
    return out + ".manifest.json"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def run_gaussian(config: RunConfig) -> int:
    rows = []
    names = set()
    for n in config.n_sweep:
        gc = GaussianCaseConfig(config.sigma2, n, config.mu, config.mc_samples, config.seed, config.quad_tol)
        scale = math.sqrt(n - 1) / config.sigma2
        true = true_gen_error(GaussianProblem(config.sigma2, n, config.mu), CLOSED_FORM)
        reports = [imi_report(gc), icimi_gaussian(gc)]
        if config.strengthened:
            reports += [strengthened_gaussian(gc, CMI_STRENGTHENED), strengthened_gaussian(gc, CIMI_STRENGTHENED)]
        rows.append([n, _num(config.sigma2), TRUE_ERROR, _num(true.value), _num(0.0), _num(true.value * scale),
                     config.mc_samples, config.seed])
        for r in reports:
            names.add(r.bound_name)
            rows.append([n, _num(config.sigma2), r.bound_name, _num(r.value), _num(r.std_error),
                         _num(r.value * scale), config.mc_samples, config.seed])
    _write_csv(GAUSSIAN_COLUMNS, rows, config.output)
    if config.output:
        write_manifest(config, _manifest_path(config.output), sorted(names))
    return EXIT_OK


def run_discrete(config: RunConfig) -> int:
    problem = load_problem(config.problem_file)
    if isinstance(problem, GaussianProblem):
        raise DomainError("use the gaussian subcommand for the Gaussian averager")
    reports = all_bounds(problem)
    if config.exact:
        gen = true_gen_error(problem, EXACT)
    else:
        gen = true_gen_error(problem, MONTE_CARLO, config.mc_samples, config.seed)
    gen_row = BoundReport(TRUE_ERROR, gen.value, (), "", "exact" if config.exact else MONTE_CARLO,
                          gen.std_error, problem.n)
    cols, rows = bounds_rows([gen_row] + list(reports), config.units)
    _write_csv(cols, rows, config.output)
    if config.table:
        sys.stderr.write(table1_report(problem).format() + "\n")
    if config.output:
        write_manifest(config, _manifest_path(config.output), [r.bound_name for r in reports])
    return EXIT_OK


def run_compare(config: RunConfig) -> int:
    problem = load_problem(config.problem_file)
    if not isinstance(problem, FiniteProblem):
        raise DomainError("compare needs a finite problem")
    cmp = compare_bounds(problem, tol=config.tol)
    rows = [[a, b, _num(va), _num(vb), rel, "ok" if (a, b, va, vb, rel) not in cmp.violations() else "violated"]
            for a, b, va, vb, rel in cmp.pairs]
    _write_csv(["name_a", "name_b", "value_a", "value_b", "relation", "status"], rows, config.output)
    if config.table:
        sys.stderr.write(table1_report(problem).format() + "\n")
    if not cmp.ok:
        sys.stderr.write(f"{len(cmp.violations())} ordering violation(s)\n")
        return EXIT_INVARIANT
    return EXIT_OK


def run_cd_check(config: RunConfig) -> int:
    seed = 0 if config.seed is None else config.seed
    sweep = cd_check_sweep(config.trials, config.max_alphabet, seed, config.tol, config.dump_dir)
    msg = f"cd-check: {config.trials} trials, {len(sweep.violations)} violations, max excess {sweep.max_excess:.3e}\n"
    if config.output:
        with open(config.output, "w") as fh:
            fh.write(msg)
    sys.stdout.write(msg)
    return EXIT_OK if sweep.ok else EXIT_INVARIANT


def emit_plot_data(text: str) -> List[list]:
    """Long-format ``(n, series, y)`` rows from a gaussian or bounds CSV.

    Gaussian results also produce ``<name>_scaled`` series holding
    ``value * sqrt(n-1) / sigma2``.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        return []
    if not header:
        return []
    required = {"n", "bound_name", "value"}
    if not required <= set(header):
        raise DomainError(f"results CSV lacks columns {sorted(required - set(header))}")
    idx = {c: i for i, c in enumerate(header)}
    rows = []
    for k, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(header):
            raise DomainError(f"line {k}: expected {len(header)} fields, got {len(rec)}")
        try:
            n = int(rec[idx["n"]])
            y = float(rec[idx["value"]])
        except ValueError as exc:
            raise DomainError(f"line {k}: {exc}") from None
        name = rec[idx["bound_name"]]
        if "variant" in idx and rec[idx["variant"]]:
            name = f"{name}/{rec[idx['variant']]}"
        rows.append([n, name, _num(y)])
        if "scaled_value" in idx and rec[idx["scaled_value"]]:
            rows.append([n, f"{name}_scaled", _num(float(rec[idx["scaled_value"]]))])
    return rows


def run_plot_data(config: RunConfig) -> int:
    with open(config.input) as fh:
        rows = emit_plot_data(fh.read())
    _write_csv(PLOT_COLUMNS, rows, config.output)
    return EXIT_OK


RUNNERS = {
    "gaussian": run_gaussian,
    "discrete": run_discrete,
    "compare": run_compare,
    "cd-check": run_cd_check,
    "plot-data": run_plot_data,
}


def run(config: RunConfig) -> int:
    return RUNNERS[config.subcommand](config)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _n_list(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(float(tok)) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad n list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genbound", description="Information-theoretic generalization bounds.")
    parser.add_argument("--version", action="version", version=f"genbound {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    g = sub.add_parser("gaussian", help="Gaussian mean-estimation sweep")
    g.add_argument("--n-sweep", type=_n_list, required=True, help="comma-separated n values")
    g.add_argument("--sigma2", type=float, default=1.0)
    g.add_argument("--mu", type=float, default=0.0)
    g.add_argument("--mc", dest="mc_samples", type=int, default=100_000)
    g.add_argument("--seed", type=int)
    g.add_argument("--quad-tol", type=float, default=DEFAULT_QUAD_TOL)
    g.add_argument("--strengthened", action="store_true", help="add strengthened CMI/CIMI rows (n <= 20)")
    g.add_argument("--out", dest="output")

    d = sub.add_parser("discrete", help="all bounds for a finite problem file")
    d.add_argument("--problem", dest="problem_file", required=True)
    d.add_argument("--exact", action="store_true", default=None, help="exact true error (default)")
    d.add_argument("--mc", dest="mc_samples", type=int, default=100_000, help="Monte Carlo true error instead")
    d.add_argument("--seed", type=int)
    d.add_argument("--units", choices=("nats", "bits"), default="nats")
    d.add_argument("--table", action="store_true", help="print the dichotomy table to stderr")
    d.add_argument("--out", dest="output")

    c = sub.add_parser("compare", help="ordering checks for a finite problem file")
    c.add_argument("--problem", dest="problem_file", required=True)
    c.add_argument("--tol", type=float, default=1e-12)
    c.add_argument("--table", action="store_true")
    c.add_argument("--out", dest="output")

    k = sub.add_parser("cd-check", help="random conditional decoupling sweep")
    k.add_argument("--trials", type=int, default=1000)
    k.add_argument("--max-alphabet", type=int, default=4)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--tol", type=float, default=ASSERT_TOL)
    k.add_argument("--dump-dir")
    k.add_argument("--out", dest="output")

    p = sub.add_parser("plot-data", help="long-format series from a results CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out", dest="output")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    d = {k: v for k, v in vars(args).items() if v is not None}
    if args.subcommand == "discrete":
        # --seed without --exact selects Monte Carlo for the true error
        d["exact"] = bool(args.exact) or args.seed is None
    return RunConfig.from_dict(d)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    try:
        config = config_from_args(args)
        return run(config)
    except (DomainError, ResourceError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        sys.stderr.write(f"genbound: configuration error: {exc}\n")
        return EXIT_CONFIG
    except NumericError as exc:
        sys.stderr.write(f"genbound: numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except InvariantViolation as exc:
        sys.stderr.write(f"genbound: invariant violated: {exc}\n")
        return EXIT_INVARIANT
    except GenBoundError as exc:
        sys.stderr.write(f"genbound: {exc}\n")
        return EXIT_NUMERIC
