"""Command line interface: ``qkdfinite {simulate,rate,capacity,entropy}``.

Exit status is 0 on success (an aborted protocol run is a success), 2 for
usage or input errors and 1 when an internal invariant check fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from . import capacity, entropy, quantum, security
from .protocol import ChannelModel, ProtocolConfig, run_protocol

RATE_CSV_COLUMNS = ("M", "n", "k", "eps_bar", "eps_bar_prime", "nu_star", "eps_pa", "l",
                    "r_sifted", "r_per_signal")
CAPACITY_CSV_COLUMNS = ("gamma", "q", "a_star", "degradable", "max_coherent_info")
CURVE_CSV_COLUMNS = ("a", "I")
EPSILON_FIELDS = ("eps", "eps_ec", "eps_bar", "eps_bar_prime")


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write(text: str, output: str | None) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


# -- simulate ---------------------------------------------------------------------

def load_run_config(doc: dict) -> tuple[ProtocolConfig, ChannelModel, security.SecurityBudget]:
    """Parse a run configuration document; unknown fields are rejected."""
    if not isinstance(doc, dict):
        raise UsageError("configuration must be a JSON object")
    doc = dict(doc)
    channel = ChannelModel.from_dict(doc.pop("channel", {"kind": "ideal"}))
    eps = doc.pop("epsilons", {})
    unknown_eps = set(eps) - set(EPSILON_FIELDS)
    if unknown_eps:
        raise UsageError(f"unknown epsilon fields: {sorted(unknown_eps)}")
    budget = security.SecurityBudget(**{k: float(v) for k, v in eps.items()})
    names = {f.name for f in fields(ProtocolConfig)}
    unknown = set(doc) - names
    if unknown:
        raise UsageError(f"unknown configuration fields: {sorted(unknown)}")
    if "M" not in doc:
        raise UsageError("configuration needs M")
    return ProtocolConfig(**doc), channel, budget


def cmd_simulate(args) -> int:
    try:
        doc = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read configuration: {exc}") from exc
    config, channel, budget = load_run_config(doc)
    run = run_protocol(config, channel, budget)
    if run.key_a is not None and run.transcript_bits < run.leak_ec_bits + config.t:
        raise AssertionError("transcript accounting lost bits")
    text = run.to_json() + "\n"
    if args.output:
        _write(text, args.output)
        print(run.summary())
    else:
        sys.stdout.write(text)
        print(run.summary(), file=sys.stderr)
    return 0


# -- rate -------------------------------------------------------------------------

def _parse_sweep(spec: str) -> np.ndarray:
    try:
        name, rng = spec.split("=", 1)
        lo, hi, steps = rng.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError as exc:
        raise UsageError(f"--sweep expects M=a:b:steps, got {spec!r}") from exc
    if name != "M" or steps < 1 or lo < 100 or hi < lo:
        raise UsageError(f"invalid sweep {spec!r}")
    if steps == 1:
        return np.array([int(round(lo))])
    return np.rint(np.geomspace(lo, hi, steps)).astype(np.int64)


def _rate_report(M: int, args) -> security.RateReport:
    if args.eps <= args.eps_ec:
        return security.RateReport(0.0, 0.0, 0, None, None, 0, 0, 0, 0.0, 0.0, M=M,
                                   feasible=False, notes=["eps <= eps_ec: infeasible budget"])
    budget = security.SecurityBudget(eps=args.eps, eps_ec=args.eps_ec,
                                     eps_bar=args.eps / 2, eps_bar_prime=args.eps / 20)
    return security.optimize_rate(M, args.qber, budget, security.default_leak(args.f_ec),
                                  c_bar=args.c_bar, delta=args.delta,
                                  delta_term=args.delta_term)


def cmd_rate(args) -> int:
    for name in ("eps", "eps_ec"):
        if not 0 < getattr(args, name) < 1:
            raise UsageError(f"--{name.replace('_', '-')} must lie in (0, 1)")
    if not 0 <= args.qber < 0.5:
        raise UsageError("--qber must lie in [0, 0.5)")
    if args.sweep:
        rows = []
        for M in _parse_sweep(args.sweep):
            rep = _rate_report(int(M), args)
            rows.append((rep.M, rep.n, rep.k, rep.eps_bar, rep.eps_bar_prime, rep.nu_star,
                         rep.eps_pa_at_nu_star, rep.l_max, rep.r_sifted, rep.r_per_signal))
        _write(_csv(RATE_CSV_COLUMNS, rows), args.output)
        return 0
    if args.M is None:
        raise UsageError("--M is required without --sweep")
    if args.M < 100:
        raise UsageError("--M must be at least 100")
    rep = _rate_report(args.M, args)
    _write(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n", args.output)
    print(f"M={rep.M} r={rep.r_per_signal!r} r_sifted={rep.r_sifted!r} l={rep.l_max} "
          f"feasible={rep.feasible}", file=sys.stderr if args.output in (None, "-")
          else sys.stdout)
    return 0


# -- capacity ---------------------------------------------------------------------

def cmd_capacity(args) -> int:
    if args.curve is not None:
        if not 0 <= args.curve <= 1:
            raise UsageError("--curve gamma must lie in [0, 1]")
        if args.points < 2:
            raise UsageError("--points must be at least 2")
        rows = capacity.coherent_info_curve(args.curve, np.linspace(0, 1, args.points))
        _write(_csv(CURVE_CSV_COLUMNS, rows), args.output)
        return 0
    if not 0 <= args.gamma_min <= args.gamma_max <= 1 or args.steps < 1:
        raise UsageError("need 0 <= gamma-min <= gamma-max <= 1 and steps >= 1")
    grid = np.linspace(args.gamma_min, args.gamma_max, args.steps)
    points = capacity.capacity_sweep(grid)
    rows = [(p.gamma, p.q, p.a_star, p.degradable, p.max_coherent_info) for p in points]
    _write(_csv(CAPACITY_CSV_COLUMNS, rows), args.output)
    return 0


# -- entropy ----------------------------------------------------------------------

def _matrix_from_pairs(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise UsageError("density_matrix must be nested [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def entropy_table(doc: dict, eps: float = 0.0) -> list[tuple[str, float]]:
    """All applicable measures for the inputs in ``doc``."""
    allowed = {"distribution", "joint", "density_matrix", "dims"}
    unknown = set(doc) - allowed
    if unknown:
        raise UsageError(f"unknown entropy input fields: {sorted(unknown)}")
    rows = []
    if "distribution" in doc:
        p = doc["distribution"]
        rows += [("H", entropy.shannon_entropy(p)), ("H_min", entropy.min_entropy(p)),
                 ("H_max", entropy.max_entropy(p))]
        if eps:
            rows += [("H_min^eps", entropy.smooth_min_entropy_classical(p, eps)),
                     ("H_max^eps", entropy.smooth_max_entropy_classical(p, eps))]
    if "joint" in doc:
        j = doc["joint"]
        rows += [("H(XY)", entropy.joint_entropy(j)),
                 ("H(X|Y)", entropy.conditional_entropy(j)),
                 ("H(X:Y)", entropy.mutual_information(j)),
                 ("H_min(X|Y)", entropy.conditional_min_entropy_classical(j))]
    if "density_matrix" in doc:
        rho = quantum.density_matrix(_matrix_from_pairs(doc["density_matrix"]))
        rows.append(("H(rho)", quantum.von_neumann_entropy(rho)))
        if "dims" in doc:
            da, db = (int(x) for x in doc["dims"])
            rows.append(("H_min(A|B)", entropy.quantum_conditional_min_entropy(rho, da, db)))
    if not rows:
        raise UsageError("no distribution, joint or density_matrix given")
    return rows


def cmd_entropy(args) -> int:
    try:
        doc = json.loads(Path(args.file).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read input: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError("entropy input must be a JSON object")
    rows = entropy_table(doc, args.eps)
    width = max(len(name) for name, _ in rows)
    text = "".join(f"{name:<{width}}  {value!r}\n" for name, value in rows)
    _write(text, args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qkdfinite",
        description="Finite-key BB84 simulation, security rates and amplitude-damping capacity.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one BB84 protocol execution from a JSON config")
    p.add_argument("config", help="run configuration (JSON)")
    p.add_argument("-o", "--output", help="write the run transcript JSON here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rate", help="optimised finite-key rate")
    p.add_argument("--M", type=int, help="number of signals")
    p.add_argument("--qber", type=float, required=True)
    p.add_argument("--eps", type=float, default=1e-9)
    p.add_argument("--eps-ec", type=float, default=1e-10)
    p.add_argument("--f-ec", type=float, default=1.1)
    p.add_argument("--c-bar", type=float, default=0.5)
    p.add_argument("--delta", type=float, help="estimation threshold (default: qber)")
    p.add_argument("--delta-term", choices=security.DELTA_TERMS, default="thesis")
    p.add_argument("--sweep", help="M=a:b:steps, geometric grid; emits CSV")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("capacity", help="amplitude damping capacity sweep or I(a) curve")
    p.add_argument("--gamma-min", type=float, default=0.0)
    p.add_argument("--gamma-max", type=float, default=0.5)
    p.add_argument("--steps", type=int, default=21)
    p.add_argument("--curve", type=float, metavar="GAMMA",
                   help="emit coherent information against a at this gamma")
    p.add_argument("--points", type=int, default=101)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("entropy", help="entropy table for a distribution or state (JSON)")
    p.add_argument("file")
    p.add_argument("--eps", type=float, default=0.0, help="smoothing parameter")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_entropy)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AssertionError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
