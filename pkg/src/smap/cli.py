"""Command-line front end.

Three subcommands: ``run`` traces a single experiment, ``mc`` averages a
Monte-Carlo ensemble, ``verify`` sweeps random updating steps through
two independent solution routes and compares them.  Results land as CSV
plus a plain-text summary; plotting stays external.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import filters, robustness
from .constrained_ls import ConstrainedLSProblem, solve_constrained
from .constraints import NOISE, ConstraintStrategy, fixed_cv, noise_cv, sc_cv, zero_cv
from .errors import InvalidInputError, SmapError
from .filters import DataWindow, FilterState
from .sim import (
    AP,
    SMAP,
    MonteCarloSummary,
    RunTrace,
    ScenarioConfig,
    run_monte_carlo,
    run_rng,
    run_single,
    steady_state_db,
)

TRACE_HEADER = [
    "k", "e", "updated", "g1", "g2", "classification",
    "lhs", "rhs", "misalignment", "max_abs_posterior",
]

_CV_CHOICES = ("fixed", "sccv", "noise", "zero")
_VERIFY_TOL = 1e-8

# key=value configuration files may set any of these; command-line flags
# win over file values.
_CONFIG_TYPES = {
    "taps": int, "reuse": int, "gamma-bar": float, "delta": float,
    "noise-var": float, "ar": float, "snr-db": float, "iters": int,
    "seed": int, "cv": str, "noise-scale": float, "mu": float,
    "out-dir": Path, "runs": int, "algos": str, "instances": int,
    "max-reuse": int,
}

__all__ = [
    "TRACE_HEADER",
    "OutputBundle",
    "VerifyResult",
    "verify_update_against_kkt",
    "write_run_outputs",
    "write_mc_outputs",
    "build_parser",
    "main",
]


@dataclass(frozen=True, slots=True)
class OutputBundle:
    """Paths produced by one command invocation; unused slots stay None."""

    trace_csv_path: Optional[Path] = None
    mse_csv_path: Optional[Path] = None
    summary_text_path: Optional[Path] = None

    @property
    def paths(self) -> tuple[Path, ...]:
        return tuple(
            p
            for p in (self.trace_csv_path, self.mse_csv_path, self.summary_text_path)
            if p is not None
        )


@dataclass(frozen=True, slots=True)
class VerifyResult:
    """Worst-case gaps between the two solution routes."""

    instances: int
    max_update_gap: float
    max_posterior_gap: float
    max_identity_residual: float
    worst_index: int

    @property
    def ok(self) -> bool:
        return (
            self.max_update_gap <= _VERIFY_TOL
            and self.max_posterior_gap <= _VERIFY_TOL
            and self.max_identity_residual <= _VERIFY_TOL
        )


def _fmt(value: float) -> str:
    return repr(float(value))


def _atomic_write(path: Path, text: str) -> None:
    """Write the full text, then move it into place in one step."""
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _strategy(name: str, noise_scale: float) -> ConstraintStrategy:
    if name == "fixed":
        return fixed_cv()
    if name == "sccv":
        return sc_cv()
    if name == "noise":
        return noise_cv(noise_scale)
    return zero_cv()


def _config_lines(config: ScenarioConfig, algorithm: str) -> list[str]:
    lines = [
        f"algorithm: {algorithm}",
        f"taps: {config.num_taps}",
        f"reuse: {config.reuse}",
        f"gamma-bar: {_fmt(config.gamma_bar)}",
        f"delta: {_fmt(config.delta)}",
        f"noise-var: {_fmt(config.noise_variance)}",
        f"ar: {_fmt(config.ar_coefficient)}",
        f"snr-db: {_fmt(config.snr_db)}",
        f"iters: {config.iterations}",
        f"seed: {config.seed}",
    ]
    if algorithm == AP:
        lines.insert(1, f"mu: {_fmt(config.ap_step)}")
    else:
        lines.insert(1, f"cv-strategy: {config.cv_strategy.kind}")
        if config.cv_strategy.kind == NOISE:
            lines.append(f"noise-scale: {_fmt(config.cv_strategy.scale)}")
    return lines


def write_run_outputs(
    trace: RunTrace, config: ScenarioConfig, algorithm: str, out_dir: Path
) -> OutputBundle:
    """Write ``trace.csv`` and ``summary.txt`` for one run."""
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for k in range(trace.errors.size):
        rec = trace.local_records[k]
        div = trace.divergence_records[k]
        rows.append([
            k,
            _fmt(trace.errors[k]),
            int(trace.update_flags[k]),
            _fmt(rec.g1),
            _fmt(rec.g2),
            rec.classification,
            _fmt(rec.lhs),
            _fmt(rec.rhs),
            _fmt(trace.misalignment[k + 1]),
            _fmt(div.max_abs_posterior),
        ])
    trace_path = out_dir / "trace.csv"
    _atomic_write(trace_path, _csv_text(TRACE_HEADER, rows))
    report = trace.global_report
    updates = int(trace.update_flags.sum())
    lines = ["command: run", *_config_lines(config, algorithm)]
    lines += [
        f"updates: {updates}",
        f"update-rate: {_fmt(trace.update_rate)}",
        f"robustness-violations: {report.condition_violations}",
        f"cv-relaxations: {trace.cv_relaxations}",
        f"global-energy-ratio: {_fmt(report.ratio)}",
        f"final-misalignment: {_fmt(trace.misalignment[-1])}",
        f"steady-state-mse-db: {_fmt(steady_state_db(trace.squared_error))}",
    ]
    summary_path = out_dir / "summary.txt"
    _atomic_write(summary_path, "\n".join(lines) + "\n")
    return OutputBundle(trace_csv_path=trace_path, summary_text_path=summary_path)


def write_mc_outputs(
    results: list[tuple[str, ScenarioConfig, str, MonteCarloSummary]],
    runs: int,
    out_dir: Path,
) -> OutputBundle:
    """Write ``mse.csv`` (one column per configuration) and ``summary.txt``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = [label for label, _, _, _ in results]
    iters = results[0][3].mse_curve.size
    rows = [
        [k] + [_fmt(summary.mse_curve[k]) for _, _, _, summary in results]
        for k in range(iters)
    ]
    mse_path = out_dir / "mse.csv"
    _atomic_write(mse_path, _csv_text(["k"] + labels, rows))
    lines = ["command: mc", f"runs: {runs}"]
    for label, config, algorithm, summary in results:
        lines.append("")
        lines.append(f"[{label}]")
        lines.extend(_config_lines(config, algorithm))
        lines += [
            f"mean-update-rate: {_fmt(summary.mean_update_rate)}",
            f"mean-robustness-violations: {_fmt(summary.mean_violation_count)}",
            f"mean-cv-relaxations: {_fmt(summary.mean_cv_relaxations)}",
            f"steady-state-mse-db: {_fmt(summary.steady_state_mse_db)}",
        ]
    summary_path = out_dir / "summary.txt"
    _atomic_write(summary_path, "\n".join(lines) + "\n")
    return OutputBundle(mse_csv_path=mse_path, summary_text_path=summary_path)


def verify_update_against_kkt(
    instances: int, num_taps: int = 10, max_reuse: int = 2, seed: int = 0
) -> VerifyResult:
    """Drive random updating steps through both solution routes.

    Each instance draws a random system, data window and in-band
    constraint vector, takes one unregularized gated step, and compares
    the coefficients against the stacked-system route.  The posterior
    errors are compared against their target and the per-step energy
    identity is evaluated on the same step.
    """
    if instances < 0:
        raise InvalidInputError(f"instance count must be nonnegative, got {instances}")
    if num_taps < max_reuse + 1:
        raise InvalidInputError("reuse window cannot exceed the tap count")
    rng = np.random.default_rng(seed)
    max_update = 0.0
    max_post = 0.0
    max_resid = 0.0
    worst_gap = -1.0
    worst_index = -1
    produced = 0
    while produced < instances:
        reuse = produced % (max_reuse + 1)
        X = rng.standard_normal((num_taps, reuse + 1))
        w_prev = rng.standard_normal(num_taps)
        w_true = rng.standard_normal(num_taps)
        noise = rng.normal(0.0, 0.1, reuse + 1)
        d = X.T @ w_true + noise
        e0 = float(d[0] - X[:, 0] @ w_prev)
        if e0 == 0.0:
            continue
        gamma_bar = 0.5 * abs(e0)  # guarantees the gate fires
        cv = rng.uniform(-gamma_bar, gamma_bar, reuse + 1)
        window = DataWindow(X, d, noise)
        state = FilterState(w_prev)
        new_state, outcome = filters.smap_update(state, window, cv, gamma_bar, 0.0)
        w_kkt = solve_constrained(ConstrainedLSProblem(X, d, w_prev, cv))
        update_gap = float(np.max(np.abs(new_state.w - w_kkt)))
        post_gap = float(np.max(np.abs(outcome.posterior_errors - cv)))
        record = robustness.local_check(w_true, state, new_state, window, cv, True, 0.0)
        resid = record.identity_residual / max(1.0, record.g2)
        max_update = max(max_update, update_gap)
        max_post = max(max_post, post_gap)
        max_resid = max(max_resid, resid)
        combined = max(update_gap, post_gap, resid)
        if combined > worst_gap:
            worst_gap = combined
            worst_index = produced
        produced += 1
    return VerifyResult(instances, max_update, max_post, max_resid, worst_index)


def _add_scenario_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--taps", type=int, default=10, help="number of adaptive coefficients")
    sub.add_argument("--reuse", type=int, default=2, help="data-reuse factor L")
    sub.add_argument("--gamma-bar", type=float, default=0.2236, help="error-magnitude threshold")
    sub.add_argument("--delta", type=float, default=1e-12, help="Gram regularization")
    sub.add_argument("--noise-var", type=float, default=0.01, help="measurement-noise variance")
    sub.add_argument("--ar", type=float, default=0.95, help="input autoregression coefficient")
    sub.add_argument("--snr-db", type=float, default=20.0, help="reference SNR target in dB")
    sub.add_argument("--iters", type=int, default=1000, help="iterations per run")
    sub.add_argument("--seed", type=int, default=0, help="master RNG seed")
    sub.add_argument("--cv", choices=_CV_CHOICES, default="fixed",
                     help="constraint-vector strategy")
    sub.add_argument("--noise-scale", type=float, default=1.0,
                     help="multiplier for the noise strategy")
    sub.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    sub.add_argument("--config", type=Path, default=None,
                     help="key=value file supplying flag defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smap",
        description="Set-membership affine projection experiments with energy-conservation checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="trace a single run")
    _add_scenario_flags(run_p)
    run_p.add_argument("--mu", type=float, default=None,
                       help="run the plain projection baseline with this step size (ignores --cv)")
    run_p.set_defaults(func=cmd_run)

    mc_p = sub.add_parser("mc", help="average a Monte-Carlo ensemble")
    _add_scenario_flags(mc_p)
    mc_p.add_argument("--runs", type=int, default=100, help="independent runs per configuration")
    mc_p.add_argument("--algos", type=str, default="smap:fixed,smap:sccv,smap:noise",
                      help="comma-separated configurations, e.g. smap:sccv or ap:0.9")
    mc_p.set_defaults(func=cmd_mc)

    verify_p = sub.add_parser("verify", help="cross-check the update against the stacked solver")
    verify_p.add_argument("--instances", type=int, default=1000, help="random instances to sweep")
    verify_p.add_argument("--taps", type=int, default=10, help="number of adaptive coefficients")
    verify_p.add_argument("--max-reuse", type=int, default=2, help="largest reuse factor to cycle")
    verify_p.add_argument("--seed", type=int, default=0, help="sweep RNG seed")
    verify_p.add_argument("--config", type=Path, default=None,
                          help="key=value file supplying flag defaults")
    verify_p.set_defaults(func=cmd_verify)
    return parser


def _load_config_file(path: Path) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    return entries


def _apply_config_file(
    args: argparse.Namespace, argv: list[str], parser: argparse.ArgumentParser
) -> None:
    try:
        entries = _load_config_file(args.config)
    except (OSError, ValueError) as err:
        parser.error(str(err))
    explicit = {
        token[2:].split("=", 1)[0] for token in argv if token.startswith("--")
    }
    for key, raw in entries.items():
        if key == "config":
            continue
        if key not in _CONFIG_TYPES:
            parser.error(f"unknown configuration key {key!r} in {args.config}")
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            parser.error(f"configuration key {key!r} does not apply to this command")
        if key in explicit:
            continue
        try:
            value = _CONFIG_TYPES[key](raw)
        except ValueError:
            parser.error(f"bad value for {key!r} in {args.config}: {raw!r}")
        setattr(args, dest, value)
    if getattr(args, "cv", "fixed") not in _CV_CHOICES:
        parser.error(f"bad value for 'cv': {args.cv!r}")


def _scenario_from_args(
    args: argparse.Namespace,
    parser: argparse.ArgumentParser,
    cv_strategy: Optional[ConstraintStrategy] = None,
    ap_step: Optional[float] = None,
) -> ScenarioConfig:
    if cv_strategy is None:
        cv_strategy = _strategy(args.cv, args.noise_scale)
    try:
        return ScenarioConfig(
            num_taps=args.taps,
            reuse=args.reuse,
            gamma_bar=args.gamma_bar,
            delta=args.delta,
            noise_variance=args.noise_var,
            ar_coefficient=args.ar,
            snr_db=args.snr_db,
            iterations=args.iters,
            cv_strategy=cv_strategy,
            ap_step=ap_step,
            seed=args.seed,
        )
    except InvalidInputError as err:
        parser.error(str(err))


def cmd_run(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    algorithm = AP if args.mu is not None else SMAP
    config = _scenario_from_args(args, parser, ap_step=args.mu)
    trace = run_single(config, algorithm, run_rng(config.seed, 0))
    bundle = write_run_outputs(trace, config, algorithm, args.out_dir)
    updates = int(trace.update_flags.sum())
    print(f"updates: {updates}/{config.iterations} (rate {trace.update_rate:.4f})")
    print(f"robustness violations: {trace.global_report.condition_violations}")
    if trace.cv_relaxations:
        print(f"constraint relaxations: {trace.cv_relaxations}")
    print(f"global energy ratio: {trace.global_report.ratio:.6f}")
    print("wrote " + ", ".join(str(p) for p in bundle.paths))
    return 0


def _parse_algo_token(
    token: str, parser: argparse.ArgumentParser, noise_scale: float
) -> tuple[str, Optional[ConstraintStrategy], Optional[float]]:
    name, _, arg = token.partition(":")
    if name == SMAP:
        strategy = arg or "fixed"
        if strategy not in _CV_CHOICES:
            parser.error(f"unknown strategy in {token!r}")
        return SMAP, _strategy(strategy, noise_scale), None
    if name == AP:
        try:
            mu = float(arg)
        except ValueError:
            parser.error(f"bad step size in {token!r}")
        if not 0.0 < mu <= 1.0:
            parser.error(f"step size in {token!r} must lie in (0, 1]")
        return AP, None, mu
    parser.error(f"unknown algorithm in {token!r}")
    raise AssertionError("unreachable")


def cmd_mc(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    tokens = [t.strip() for t in args.algos.split(",") if t.strip()]
    if not tokens:
        parser.error("--algos must name at least one configuration")
    if len(set(tokens)) != len(tokens):
        parser.error("--algos lists a configuration twice")
    if args.runs < 1:
        parser.error(f"run count must be positive, got {args.runs}")
    results = []
    for token in tokens:
        algorithm, strategy, mu = _parse_algo_token(token, parser, args.noise_scale)
        config = _scenario_from_args(args, parser, cv_strategy=strategy, ap_step=mu)
        summary = run_monte_carlo(config, algorithm, args.runs)
        results.append((token, config, algorithm, summary))
        print(
            f"{token}: update-rate {summary.mean_update_rate:.4f}  "
            f"violations {summary.mean_violation_count:.2f}  "
            f"steady-state {summary.steady_state_mse_db:.2f} dB"
        )
    bundle = write_mc_outputs(results, args.runs, args.out_dir)
    print("wrote " + ", ".join(str(p) for p in bundle.paths))
    return 0


def cmd_verify(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.instances < 0:
        parser.error(f"instance count must be nonnegative, got {args.instances}")
    if args.taps < args.max_reuse + 1:
        parser.error("reuse window cannot exceed the tap count")
    result = verify_update_against_kkt(
        args.instances, num_taps=args.taps, max_reuse=args.max_reuse, seed=args.seed
    )
    print(f"instances: {result.instances}")
    print(f"max coefficient gap:      {result.max_update_gap:.3e}")
    print(f"max posterior-target gap: {result.max_posterior_gap:.3e}")
    print(f"max identity residual:    {result.max_identity_residual:.3e} (relative)")
    if result.ok:
        print("verification passed")
        return 0
    print(
        f"verification FAILED at instance {result.worst_index} (seed {args.seed})",
        file=sys.stderr,
    )
    return 1


def main(argv: Optional[list[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is not None:
        _apply_config_file(args, argv, parser)
    try:
        return args.func(args, parser)
    except SmapError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
