"""Command-line front end.

    wave-apost run         [--config FILE] [--H x] [--T x] [--cfl x] [--out DIR]
    wave-apost convergence [--config FILE] [--H x] [--T x] [--cfl x] [--out DIR]
    wave-apost verify

Exit codes: 0 ok, 1 check failure, 2 config error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ConfigError, NumericalAbort
from . import verify as verify_mod
from .runs import cmd_convergence, cmd_run


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wave-apost", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "convergence"):
        s = sub.add_parser(name)
        s.add_argument("--config", default=None, help="flat key=value config file")
        s.add_argument("--H", default=None, help="coarse mesh size")
        s.add_argument("--T", default=None, help="final time")
        s.add_argument("--cfl", default=None, help="time step factor (tau = cfl*H)")
        s.add_argument("--out", default=None, help="output directory")
    sub.add_parser("verify")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "verify":
            return verify_mod.cmd_verify()
        cfg = load_config(args.config, {"H": args.H, "T": args.T,
                                        "cfl": args.cfl, "out": args.out})
        if args.command == "run":
            report = cmd_run(cfg)
            for path in report.csv_paths:
                print(f"wrote {path}")
            row = report.rows[0]
            print(f"H={row.H:g} bound_U={row.bound_U:.6g} "
                  f"bound_V={row.bound_V:.6g} "
                  f"true_error_U={row.true_error_U:.6g} "
                  f"true_error_V={row.true_error_V:.6g}")
            return 0
        report = cmd_convergence(cfg)
        print(f"wrote {report.csv_paths[0]}")
        print("# H err_energy_rel err_l2_rel bound_U bound_V")
        for r in report.rows:
            print(f"{r.H:g} {r.err_energy_rel:.6g} {r.err_l2_rel:.6g} "
                  f"{r.bound_U:.6g} {r.bound_V:.6g}")
        print("slopes: " + " ".join(f"{k}={v:.3f}"
                                    for k, v in sorted(report.slopes.items())))
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
