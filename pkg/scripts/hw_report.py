"""Transistor counts per equalized symbol for the conventional and IB equalizers."""
import argparse

from ibturbo import hwcost
from ibturbo.config import RunConfig, load_config
from ibturbo.lut_equalizer import load_design
from ibturbo.sim import report_hw

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("designs", nargs="*", help="IB bundles, one per turbo iteration")
ap.add_argument("--config", default=None)
ap.add_argument("--method", default=None, choices=["shared", "unshared", "mux"])
args = ap.parse_args()

cfg = load_config(args.config) if args.config else RunConfig(equalizer="conventional-quantized")
if args.method:
    cfg.hw_method = args.method
designs = [load_design(p) for p in args.designs] or None
print(hwcost.reports_text(report_hw(cfg, designs, write=False)), end="")
