"""Command line: ``design``, ``simulate``, ``hwcost`` and ``selftest``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import acceptance
from .config import load_config
from .lut_equalizer import load_design
from .sim import design_all, report_hw, run_sweep


def _cmd_design(args):
    cfg = load_config(args.config)
    for path in design_all(cfg, args.snr):
        print(path)
        print(open(str(path) + ".txt").read())
    return 0


def _cmd_simulate(args):
    cfg = load_config(args.config)
    print("snr_db,frames,bit_errors,frame_errors,ber,fer,elapsed,config_hash")
    for r in run_sweep(cfg):
        print(f"{r.snr_db},{r.frames},{r.bit_errors},{r.frame_errors},{r.ber:.6e},{r.fer:.6e},"
              f"{r.elapsed:.1f},{r.config_hash}")
    return 0


def _cmd_hwcost(args):
    cfg = load_config(args.config)
    designs = [load_design(p) for p in args.designs] if args.designs else None
    reports = report_hw(cfg, designs)
    from .hwcost import reports_text
    print(reports_text(reports), end="")
    return 0


def _cmd_selftest(args):
    checks = acceptance.QUICK_CHECKS if args.quick else acceptance.ALL_CHECKS
    if args.only:
        checks = [c for c in acceptance.ALL_CHECKS if c.__name__ in args.only]
    failed = 0
    for fn in checks:
        res = fn()
        print(res.line(), flush=True)
        failed += not res.passed
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="ibturbo", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("design", help="design LUT bundles for every turbo iteration")
    p.add_argument("config")
    p.add_argument("--snr", type=float, default=None, help="design SNR (dB); default from the config")
    p.set_defaults(fn=_cmd_design)
    p = sub.add_parser("simulate", help="BER/FER sweep")
    p.add_argument("config")
    p.set_defaults(fn=_cmd_simulate)
    p = sub.add_parser("hwcost", help="transistor-count report")
    p.add_argument("config")
    p.add_argument("designs", nargs="*", help="design bundles (one per turbo iteration)")
    p.set_defaults(fn=_cmd_hwcost)
    p = sub.add_parser("selftest", help="run the acceptance checks")
    p.add_argument("--quick", action="store_true", help="skip Monte Carlo and design checks")
    p.add_argument("--only", nargs="*", help="check function names to run")
    p.set_defaults(fn=_cmd_selftest)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
