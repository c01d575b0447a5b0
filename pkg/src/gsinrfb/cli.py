"""Command line entry point.

Examples
--------
gsinrfb solve --k 2 --m 8 --n 4 --gamma-db 4 --method group --problem pp
gsinrfb experiment --spec fig2.spec --out fig2.csv
gsinrfb feasibility --k 2 --m 8 --n 4 --gamma-db 12 --trials 200
"""
import argparse
import sys

import numpy as np

from .driver import Method, Status, solve
from .errors import ConfigError, GsinrError
from .harness import base_seed, feasibility_rates, load_spec, run_experiment, write_rows, write_trials
from .model import SystemConfig, db_to_linear, fixed_channel, generate_channel, sum_rate
from .numerics import BACKEND

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
METHODS = [m.value for m in Method]


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def _system_args(p):
    p.add_argument("--k", type=int, required=True, help="number of users")
    p.add_argument("--m", type=int, required=True, help="transmit antennas")
    p.add_argument("--n", type=_int_list, required=True, help="receive antennas, one value or a comma list")
    p.add_argument("--l", type=_int_list, default=None, help="streams per user (default: N)")
    p.add_argument("--gamma-db", type=float, default=0.0, help="SINR target in dB")
    p.add_argument("--pmax-db", type=float, default=43.0, help="power budget in dB over the noise")
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--seed", type=int, default=0, help="channel seed (MIMO_SEED overrides)")


def build_parser():
    parser = argparse.ArgumentParser(prog="gsinrfb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one channel realization")
    _system_args(p)
    p.add_argument("--method", choices=METHODS, default="group")
    p.add_argument("--problem", choices=["pr", "pp"], default="pr")
    p.add_argument("--fixed-channel", type=float, default=None, metavar="VALUE",
                   help="use a channel with every entry equal to VALUE")
    p.add_argument("--oscillation", choices=["last", "group"], default="last")

    p = sub.add_parser("experiment", help="run an experiment spec file")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True, help="aggregate CSV path ('-' for stdout)")
    p.add_argument("--trials-out", default=None, help="optional per-trial CSV path")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--full-scale", action="store_true", help="run 1000 trials regardless of the spec")

    p = sub.add_parser("feasibility", help="feasibility rates over seeded channels")
    _system_args(p)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--trials", type=int, default=200)
    return parser


def _config(args):
    n = args.n[0] if len(args.n) == 1 else tuple(args.n)
    l = None if args.l is None else (args.l[0] if len(args.l) == 1 else tuple(args.l))
    return SystemConfig(
        K=args.k,
        M=args.m,
        N=n,
        L=l,
        gamma=float(db_to_linear(args.gamma_db)),
        p_max=float(db_to_linear(args.pmax_db)),
        epsilon=args.epsilon,
        max_iters=args.max_iters,
    )


def _cmd_solve(args, out):
    cfg = _config(args)
    if args.fixed_channel is not None:
        ch = fixed_channel(cfg, args.fixed_channel)
    else:
        ch = generate_channel(cfg, base_seed(args.seed))
    kwargs = {"oscillation": args.oscillation} if args.problem == "pp" else {}
    res = solve(cfg, ch, args.method, args.problem, **kwargs)
    print(f"method: {res.method.value}", file=out)
    print(f"problem: {args.problem}", file=out)
    print(f"status: {res.status.value}", file=out)
    print(f"iterations: {res.iters_used}", file=out)
    if res.solution is not None:
        sol = res.solution
        print(f"balanced_level: {sol.level:.10g}", file=out)
        print(f"total_power: {sol.total:.10g}", file=out)
        print(f"total_power_db: {10 * np.log10(sol.total):.10g}", file=out)
        rate = sum_rate(res.channels, res.beamformers, sol.p, res.cfg.noise_power)
        print(f"sum_rate: {rate:.10g}", file=out)
        print("user_ratios: " + " ".join(f"{r:.10g}" for r in sol.ratios), file=out)
        print("stream_powers: " + " ".join(f"{p:.10g}" for p in sol.p), file=out)
    if res.oscillation_detected:
        print("oscillation: detected", file=out)
    ok = res.status in (Status.CONVERGED, Status.MAX_ITERS)
    return EXIT_OK if ok else EXIT_FAILED


def _cmd_experiment(args, out):
    spec = load_spec(args.spec)
    if args.full_scale:
        from dataclasses import replace

        spec = replace(spec, trials=1000)
    rows, records = run_experiment(spec, workers=args.workers)
    write_rows(rows, out if args.out == "-" else args.out)
    if args.trials_out:
        write_trials(records, args.trials_out)
    return EXIT_OK


def _cmd_feasibility(args, out):
    cfg = _config(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}", field="methods")
    rates = feasibility_rates(cfg, methods, args.trials, args.seed)
    print("method,feasibility_rate", file=out)
    for m, r in rates.items():
        print(f"{m},{r:.10g}", file=out)
    return EXIT_OK


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    handler = {"solve": _cmd_solve, "experiment": _cmd_experiment, "feasibility": _cmd_feasibility}
    try:
        return handler[args.command](args, out)
    except (ConfigError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"gsinrfb: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GsinrError as exc:
        print(f"gsinrfb: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
