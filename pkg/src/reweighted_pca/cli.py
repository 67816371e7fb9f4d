"""Command-line interface: ``reweighted-pca {generate,whiten,estimate,test-gaussian}``.

Tables are plain delimited text with one sample per row. Reports are JSON
documents with sorted keys; in deterministic mode (the default) they carry
no timing, so repeated runs produce identical bytes.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import secrets
import sys
import time
from contextlib import nullcontext
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import _parallel
from .exceptions import InputFormatError, NGCAError
from .model import (
    Family,
    GeneratorConfig,
    apply_whitening,
    fit_whitening,
    pair_samples,
    sample_ngca,
)
from .moments import directional_deviation, first_gaussian_test
from .ngca import NgcaResult, RunConfig, recovery_angles, run_reweighted_pca
from .spectral import subspace_distance
from .testmat import block_structure_diagnostic

__all__ = [
    "RunReport",
    "GaussianTestReport",
    "read_table",
    "write_table",
    "build_parser",
    "main",
]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_EVIDENCE = 2
FLOAT_FORMAT = "%.17g"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would collide with the
    # "no evidence" exit code of `estimate`
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- tables


def _split(line: str, delimiter: str | None) -> list[str]:
    if delimiter is None:
        delimiter = "," if "," in line else None
    return [tok.strip() for tok in line.split(delimiter)]


def read_table(path, delimiter: str | None = None, header: bool = False) -> np.ndarray:
    """Read a numeric table; blank lines are skipped.

    ``delimiter=None`` accepts commas or runs of whitespace. Malformed
    values raise :class:`InputFormatError` naming the file and line.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise InputFormatError("no such file", path=str(path)) from None
    except OSError as exc:
        raise InputFormatError(f"cannot read file ({exc.strerror})", path=str(path)) from None
    rows: list[list[float]] = []
    width = None
    skip_header = header
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if skip_header:
            skip_header = False
            continue
        tokens = _split(line.strip(), delimiter)
        try:
            values = [float(tok) for tok in tokens]
        except ValueError:
            bad = next(tok for tok in tokens if not _is_float(tok))
            raise InputFormatError(f"not a number: {bad!r}", line=lineno, path=str(path)) from None
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise InputFormatError(
                f"expected {width} columns, found {len(values)}", line=lineno, path=str(path)
            )
        rows.append(values)
    if not rows:
        return np.zeros((0, 0))
    return np.array(rows, dtype=float)


def _is_float(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def write_table(path, X, delimiter: str = ",", header: bool = False) -> None:
    """Write ``X`` with 17 significant digits, enough to round-trip float64."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    lines = []
    if header:
        lines.append(delimiter.join(f"x{j}" for j in range(X.shape[1])))
    for row in X:
        lines.append(delimiter.join(FLOAT_FORMAT % v for v in row))
    text = "\n".join(lines) + ("\n" if lines else "")
    Path(path).write_text(text)


# ---------------------------------------------------------------- reports


def _finite_or_none(x: float) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def _matrix(a: np.ndarray) -> list[list[float]]:
    return [[float(v) for v in row] for row in np.asarray(a)]


class _JsonReport:
    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str):
        return cls(**json.loads(text))


@dataclass
class RunReport(_JsonReport):
    """Output document of ``estimate``; field names are stable."""

    command: str
    seed: int
    config: dict
    input: dict
    phi: dict
    psi: dict
    combined_basis: list
    halvings_used: int
    found: bool
    diagnostics: dict
    recovery: dict | None = None
    timing_seconds: float | None = None


@dataclass
class GaussianTestReport(_JsonReport):
    """Output document of ``test-gaussian``."""

    command: str
    seed: int
    config: dict
    input: dict
    orders: list = field(default_factory=list)
    nongaussian: bool = False
    timing_seconds: float | None = None


def _matrix_table(report, estimate, block_norm=None) -> dict:
    dev = np.abs(report.eigenvalues - report.gaussian_eigenvalue)
    table = {
        "alpha": report.alpha,
        "beta": estimate.beta,
        "gaussian_eigenvalue": report.gaussian_eigenvalue,
        "eigenvalues": [float(v) for v in report.eigenvalues],
        "deviations": [float(v) for v in dev],
        "selected": [bool(v) for v in dev > estimate.beta],
        "basis": _matrix(estimate.basis),
        "dim": estimate.dim,
        "sample_count": report.sample_count,
        "effective_count": report.effective_count,
        "partition_value": report.partition_value,
    }
    if block_norm is not None:
        table["offblock_norm"] = block_norm
    return table


def _diagnostics(result: NgcaResult) -> dict:
    diag = result.diagnostics
    return {
        "moments": [
            {
                "r": m.order_r,
                "norm_moment": m.norm_moment,
                "gaussian_norm_moment": m.gaussian_norm_moment,
                "norm_stderr": m.norm_stderr,
                "dot_moment": m.dot_moment,
                "gaussian_dot_moment": m.gaussian_dot_moment,
                "dot_stderr": m.dot_stderr,
            }
            for m in diag.moments
        ],
        "trace_residuals": {
            kind.value: {
                "alpha": t.alpha,
                "trace": t.trace,
                "neg_log_derivative": t.neg_log_derivative,
                "stderr": t.stderr,
                "residual": t.residual,
                "standardized": _finite_or_none(t.standardized),
            }
            for kind, t in sorted(diag.trace_residuals.items(), key=lambda kv: kv[0].value)
        },
        "alpha_history": [[a1, a2] for a1, a2 in diag.alpha_history],
        "notes": list(diag.notes),
    }


def _recovery(result: NgcaResult, truth: np.ndarray) -> dict:
    out = {"truth_dim": int(truth.shape[1])}
    for name, basis in (
        ("phi", result.estimate_phi.basis),
        ("psi", result.estimate_psi.basis),
        ("combined", result.combined_basis),
    ):
        angles = recovery_angles(basis, truth)
        entry = {
            "dim": int(basis.shape[1]),
            "principal_angles": [float(a) for a in angles],
            "max_angle": float(angles.max()) if angles.size else None,
            "best_subspace_distance": float(math.sqrt(2.0 * np.sum(np.sin(angles) ** 2))),
        }
        if basis.shape[1] == truth.shape[1]:
            entry["subspace_distance"] = subspace_distance(basis, truth)
        out[name] = entry
    return out


# ---------------------------------------------------------------- commands


def _resolve_seed(seed: int | None) -> int:
    return int(seed) if seed is not None else secrets.randbelow(2**32)


def _load_sample(args) -> tuple[np.ndarray, dict]:
    X = read_table(args.input, args.delimiter, args.header)
    if X.shape[0] == 0:
        raise InputFormatError("no data rows", path=str(args.input))
    info = {"path": str(args.input), "rows": int(X.shape[0]), "n_features": int(X.shape[1])}
    dropped = False
    if getattr(args, "drop_last", False) and X.shape[0] % 2:
        X = X[:-1]
        dropped = True
    info["dropped_last"] = dropped
    return X, info


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _execution(args):
    return _parallel.sequential() if args.deterministic else nullcontext()


def cmd_generate(args) -> int:
    if args.count < 1:
        raise UsageError(f"--count must be a positive integer, got {args.count}")
    rotation_seed = args.seed if args.rotation_seed is None else args.rotation_seed
    config = GeneratorConfig(
        ambient_dim=args.n,
        nongauss_dim=args.d,
        family=Family.parse(args.family),
        rotation_seed=rotation_seed,
        sample_seed=args.seed,
        mixture_mean=args.mixture_mean,
    )
    X, truth = sample_ngca(config, args.count)
    write_table(args.out, X, args.delimiter, args.header)
    write_table(f"{args.out}.truth", truth.basis_E, args.delimiter, False)
    return EXIT_OK


def cmd_whiten(args) -> int:
    X, _ = _load_sample(args)
    t = fit_whitening(X)
    write_table(args.out, apply_whitening(t, X), args.delimiter or ",", args.header)
    if t.floored:
        print("warning: covariance eigenvalues were floored", file=sys.stderr)
    return EXIT_OK


def cmd_estimate(args) -> int:
    seed = _resolve_seed(args.seed)
    config = RunConfig(
        alpha1=args.alpha1,
        alpha2=args.alpha2,
        beta1=args.beta1,
        beta2=args.beta2,
        delta=args.delta,
        auto_halving=args.auto,
        max_halvings=args.max_halvings,
        K_bound=args.K,
    )
    X, info = _load_sample(args)
    truth = None
    if args.truth is not None:
        truth = read_table(args.truth, args.delimiter, False)
        if truth.size == 0:
            truth = np.zeros((X.shape[1], 0))
        if truth.shape[0] != X.shape[1]:
            raise InputFormatError(
                f"truth basis has {truth.shape[0]} rows but the data has {X.shape[1]} columns",
                path=str(args.truth),
            )
    start = time.perf_counter()
    with _execution(args):
        if args.whiten:
            X = apply_whitening(fit_whitening(X), X)
        pairs = pair_samples(X)
        result = run_reweighted_pca(pairs, config)
    elapsed = time.perf_counter() - start
    info.update(pairs=pairs.n_pairs, whitened=bool(args.whiten))

    block = {"phi": None, "psi": None}
    recovery = None
    if truth is not None:
        block = {
            "phi": block_structure_diagnostic(result.report_phi, truth),
            "psi": block_structure_diagnostic(result.report_psi, truth),
        }
        recovery = _recovery(result, truth)
    report = RunReport(
        command="estimate",
        seed=seed,
        config=config.as_dict() | {"whiten": bool(args.whiten), "deterministic": args.deterministic},
        input=info,
        phi=_matrix_table(result.report_phi, result.estimate_phi, block["phi"]),
        psi=_matrix_table(result.report_psi, result.estimate_psi, block["psi"]),
        combined_basis=_matrix(result.combined_basis),
        halvings_used=result.halvings_used,
        found=result.found,
        diagnostics=_diagnostics(result),
        recovery=recovery,
        timing_seconds=None if args.deterministic else elapsed,
    )
    _emit(report.to_json(), args.out)
    return EXIT_OK if result.found else EXIT_NO_EVIDENCE


def cmd_test_gaussian(args) -> int:
    if args.rmax < 2:
        raise UsageError(f"--rmax must be at least 2, got {args.rmax}")
    if args.probes < 0:
        raise UsageError(f"--probes must be nonnegative, got {args.probes}")
    seed = _resolve_seed(args.seed)
    X, info = _load_sample(args)
    start = time.perf_counter()
    with _execution(args):
        pairs = pair_samples(X)
        verdicts = first_gaussian_test(
            pairs, args.rmax, c=args.c, band=args.band, probe_count=args.probes, seed=seed
        )
        stacked = pairs.stacked()
        probed = [directional_deviation(stacked, v.order_r, args.probes, seed) for v in verdicts]
    elapsed = time.perf_counter() - start
    info["pairs"] = pairs.n_pairs
    orders = []
    for v, p in zip(verdicts, probed):
        m = v.moments
        orders.append(
            {
                "r": v.order_r,
                "norm_moment": m.norm_moment,
                "gaussian_norm_moment": m.gaussian_norm_moment,
                "norm_deviation": v.norm_deviation,
                "norm_stderr": v.norm_stderr,
                "norm_band": args.band * v.norm_stderr,
                "norm_flag": v.norm_flag,
                "dot_moment": m.dot_moment,
                "gaussian_dot_moment": m.gaussian_dot_moment,
                "dot_deviation": v.dot_deviation,
                "dot_stderr": v.dot_stderr,
                "dot_band": args.band * v.dot_stderr,
                "dot_flag": v.dot_flag,
                "directional_lower_bound": p.max_abs_deviation,
                "directional_argmax": [float(x) for x in p.argmax_direction],
                "eta": v.eta,
                "gamma": v.gamma,
                "norm_threshold": v.norm_threshold,
                "dot_threshold": v.dot_threshold,
                "bound_met": v.bound_met,
            }
        )
    report = GaussianTestReport(
        command="test-gaussian",
        seed=seed,
        config={
            "rmax": args.rmax,
            "probes": args.probes,
            "c": args.c,
            "band": args.band,
            "deterministic": args.deterministic,
        },
        input=info,
        orders=orders,
        nongaussian=any(v.nongaussian for v in verdicts),
        timing_seconds=None if args.deterministic else elapsed,
    )
    _emit(report.to_json(), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _beta(text: str):
    if text.strip().lower() == "auto":
        return "auto"
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number or 'auto', got {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"beta must be positive, got {text}")
    return value


def _add_input(p, drop_last=True):
    p.add_argument("input", help="delimited numeric table, one sample per row")
    p.add_argument("--header", action="store_true", help="first line is a header")
    p.add_argument("--delimiter", default=None, help="column delimiter (default: comma or whitespace)")
    if drop_last:
        p.add_argument("--drop-last", action="store_true", help="drop the last row when the count is odd")


def _add_determinism(p):
    p.add_argument(
        "--deterministic",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="sequential reductions and no timing in the report",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="reweighted-pca", description="Non-gaussian subspace estimation by reweighted PCA.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic sample and its hidden basis")
    g.add_argument("--family", required=True, choices=[f.value for f in Family])
    g.add_argument("--n", type=int, required=True, help="ambient dimension")
    g.add_argument("--d", type=int, required=True, help="non-gaussian dimension")
    g.add_argument("--count", type=int, required=True, help="number of rows")
    g.add_argument("--seed", type=int, default=0, help="sample seed")
    g.add_argument("--rotation-seed", type=int, default=None, help="hidden rotation seed (default: --seed)")
    g.add_argument("--mixture-mean", type=float, default=0.9)
    g.add_argument("--out", required=True)
    g.add_argument("--header", action="store_true")
    g.add_argument("--delimiter", default=",")
    g.set_defaults(func=cmd_generate)

    w = sub.add_parser("whiten", help="center and whiten a table")
    _add_input(w, drop_last=False)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_whiten)

    e = sub.add_parser("estimate", help="run reweighted PCA and write a JSON report")
    _add_input(e)
    e.add_argument("--alpha1", type=float, default=0.5)
    e.add_argument("--alpha2", type=float, default=0.5)
    e.add_argument("--beta1", type=_beta, default="auto")
    e.add_argument("--beta2", type=_beta, default="auto")
    e.add_argument("--delta", type=float, default=0.05)
    e.add_argument(
        "--auto",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="halve both alphas while both estimates are empty",
    )
    e.add_argument("--max-halvings", type=int, default=20)
    e.add_argument("--K", type=float, default=2.0, help="subgaussian norm proxy")
    e.add_argument("--whiten", action="store_true", help="whiten before estimating")
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--truth", default=None, help="true basis table, enables recovery scores")
    e.add_argument("--out", default=None, help="report path (default: stdout)")
    _add_determinism(e)
    e.set_defaults(func=cmd_estimate)

    t = sub.add_parser("test-gaussian", help="first gaussian test on moments")
    _add_input(t)
    t.add_argument("--rmax", type=int, default=4)
    t.add_argument("--probes", type=int, default=64)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--c", type=float, default=0.1)
    t.add_argument("--band", type=float, default=3.0)
    t.add_argument("--out", default=None)
    _add_determinism(t)
    t.set_defaults(func=cmd_test_gaussian)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (NGCAError, OSError) as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
