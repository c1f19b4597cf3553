"""Command-line interface: ``mgtsim <command> [--config FILE] [--set section.key=value ...]``.

Exit codes: 0 success, 1 check failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings

import numpy as np

from . import block_system as bs
from .config import ConfigError, RunConfig, parse_config
from .diagnostics import run_suite
from .mild_solver import LocalExistenceError, continue_solution
from .nonlinearity import random_smooth_state
from .semigroup import propagators

__all__ = ["main", "fmt", "cmd_stability", "cmd_spectrum", "cmd_semigroup", "cmd_simulate", "cmd_fracpow",
           "cmd_verify"]

log = logging.getLogger("mgtsim")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
N_PREVIEW_COEFFS = 8


def fmt(x) -> str:
    """Shortest round-trip decimal; integral values lose the trailing ``.0``."""
    x = float(x)
    s = repr(x)
    return s[:-2] if s.endswith(".0") else s


class _Table:
    def __init__(self, header):
        self.header = list(header)
        self.rows = []

    def row(self, items):
        self.rows.append(list(items))

    def csv(self) -> str:
        lines = [",".join(self.header)]
        lines += [",".join(i if isinstance(i, str) else fmt(i) for i in r) for r in self.rows]
        return "\n".join(lines) + "\n"

    def json(self) -> str:
        rows = [[i if isinstance(i, str) else float(i) for i in r] for r in self.rows]
        return json.dumps({"columns": self.header, "rows": rows}) + "\n"


def _emit(cfg: RunConfig, table, out=None):
    text = table if isinstance(table, str) else (table.json() if cfg.output.format == "json" else table.csv())
    path = cfg.output.path
    if path is None:
        (out or sys.stdout).write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _initial_state(cfg: RunConfig, B):
    rng = np.random.default_rng(cfg.seed)
    if B.op.transform is None or not B.is_stable:
        x = rng.standard_normal((B.n_modes, 3)) * (np.arange(1, B.n_modes + 1) ** -3.0)[:, None]
        return x * (cfg.solver.r / bs.y_norm(B, x))
    return random_smooth_state(B, rng, cfg.solver.r, cfg.solver.alpha_space)


# -- commands -------------------------------------------------------------------

def cmd_stability(cfg: RunConfig, out=None) -> int:
    B = cfg.block_operator()
    p = B.params
    lam0 = B.op.lambda0
    ratio = p.gamma / (p.alpha + p.delta * lam0)
    stable, chi = bs.stability_condition(p, lam0)
    rel = "<" if stable else ">="
    text = (
        f"condition: gamma/(alpha+delta*lambda0) = {fmt(ratio)} {rel} beta = {fmt(p.beta)}\n"
        f"chi: {fmt(chi)}\n"
        f"verdict: {'stable' if stable else 'unstable'}\n"
    )
    (out or sys.stdout).write(text)
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, out=None) -> int:
    B = cfg.block_operator()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        roots = bs.spectrum(B)
    t = _Table(["mode", "lambda", "re1", "im1", "re2", "im2", "re3", "im3"])
    for k in range(B.n_modes):
        row = [str(k + 1), B.lambdas[k]]
        for z in roots[k]:
            row += [z.real, z.imag]
        t.row(row)
    _emit(cfg, t, out)
    return EXIT_OK


def cmd_semigroup(cfg: RunConfig, out=None) -> int:
    B = cfg.block_operator()
    x = _initial_state(cfg, B)
    n_steps = int(round(cfg.solver.horizon / cfg.solver.dt))
    E = propagators(B, cfg.solver.dt).mats
    t = _Table(["t", "y_norm"])
    for i in range(n_steps + 1):
        t.row([i * cfg.solver.dt, bs.y_norm(B, x)])
        x = np.einsum("kij,kj->ki", E, x)
    _emit(cfg, t, out)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out=None) -> int:
    B = cfg.block_operator()
    if not B.is_stable:
        raise ConfigError("simulate needs the stable regime (params fail gamma/(alpha+delta*lambda0) < beta): "
                          "the Y^alpha norms are undefined otherwise")
    nl = cfg.nonlinearity_model()
    x0 = _initial_state(cfg, B)
    traj = continue_solution(B, nl, x0, cfg.solver_config(), cfg.solver.horizon)
    n_coef = B.n_modes if cfg.output.full_coefficients else min(N_PREVIEW_COEFFS, B.n_modes)
    t = _Table(["t", "y_norm", "y_minus1_norm", "y_alpha_norm"] + [f"u_{k + 1}" for k in range(n_coef)])
    for i in range(len(traj)):
        t.row([traj.times[i], traj.norms["y_norm"][i], traj.norms["y_minus1_norm"][i],
               traj.norms["y_alpha_norm"][i], *traj.states[i, :n_coef, 0]])
    _emit(cfg, t, out)
    if traj.blowup:
        print(f"blow-up detected at t = {fmt(traj.blowup_time)}", file=sys.stderr)
    return EXIT_OK


def cmd_fracpow(cfg: RunConfig, out=None) -> int:
    B = cfg.block_operator()
    if not B.is_stable:
        raise ConfigError("fracpow needs the stable regime: fractional powers require Re sigma(AA) > 0")
    x = _initial_state(cfg, B)
    t = _Table(["a", "max_abs_disagreement"])
    worst = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for a in (0.25, 0.5, 0.75):
            d = float(np.abs(bs.frac_block_power_fc(B, a, x) - bs.frac_block_power_quad(B, a, x)).max())
            worst = max(worst, d)
            t.row([a, d])
    _emit(cfg, t, out)
    return EXIT_OK if worst < 1e-6 else EXIT_FAIL


def cmd_verify(cfg: RunConfig, out=None) -> int:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        report = run_suite(cfg)
    _emit(cfg, report.to_json(), out)
    for e in report.failures:
        print(f"FAILED {e.name}: {e.anchor}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


COMMANDS = {
    "stability": (cmd_stability, "print the stability condition, chi and the verdict"),
    "spectrum": (cmd_spectrum, "CSV columns: mode,lambda,re1,im1,re2,im2,re3,im3 (roots of each mode's cubic)"),
    "semigroup": (cmd_semigroup, "CSV columns: t,y_norm (linear flow on [0, solver.horizon], step solver.dt)"),
    "simulate": (cmd_simulate, "CSV columns: t,y_norm,y_minus1_norm,y_alpha_norm,u_1,... "
                               f"(first {N_PREVIEW_COEFFS} u-coefficients, all with output.full_coefficients)"),
    "fracpow": (cmd_fracpow, "CSV columns: a,max_abs_disagreement (eigen route vs integral route)"),
    "verify": (cmd_verify, "run the property suite; JSON report, exit 1 on any failing check"),
}


def _apply_thread_cap():
    raw = os.environ.get("MGT_THREADS")
    if raw is None:
        return
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ConfigError(f"MGT_THREADS must be a positive integer, got {raw!r}") from None
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        log.debug("threadpoolctl unavailable; MGT_THREADS only documents intent")
        return
    threadpool_limits(n)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mgtsim",
        description="Spectral simulator for the third-order-in-time MGT equation.",
        epilog="Exit codes: 0 success, 1 check failure, 2 configuration error. "
               "MGT_THREADS caps linear-algebra threads.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", "-c", help="TOML run configuration (defaults if omitted)")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one configuration key (TOML value syntax); repeatable")
        p.add_argument("--output", "-o", help="write to this file instead of stdout (same as output.path)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    # numerical fallbacks (near-multiple roots, quadrature fallback) are reported only with -v
    logging.captureWarnings(True)
    logging.getLogger("py.warnings").setLevel(logging.WARNING if args.verbose else logging.ERROR)
    overrides = list(args.overrides)
    if args.output is not None:
        overrides.append(f"output.path={json.dumps(args.output)}")
    try:
        _apply_thread_cap()
        cfg = parse_config(args.config, overrides)
        return COMMANDS[args.command][0](cfg)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (LocalExistenceError, bs.UnstableParametersError, ArithmeticError) as e:
        print(f"failed: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
