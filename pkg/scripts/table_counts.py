"""Print LUT entry counts of both structures for a few width settings."""
import argparse

from ibturbo.lut_equalizer import Widths, entry_counts

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--w-r", type=int, default=5)
ap.add_argument("--w-d", type=int, default=3)
ap.add_argument("--widths", type=int, nargs="+", default=[8, 6])
args = ap.parse_args()

print(f"{'w':>3} {'fwd/bwd F':>12} {'fwd/bwd R':>12} {'final F':>12} {'final R':>12}")
for w in args.widths:
    c = entry_counts(Widths(w_r=args.w_r, w_d=args.w_d, w_alpha=w, w_beta=w))
    print(f"{w:>3} {c['forward_F']:>12} {c['forward_R']:>12} {c['final_F']:>12} {c['final_R']:>12}")
