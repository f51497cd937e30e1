"""BER of several equalizers on the same frames (no turbo iterations unless asked)."""
import argparse
from dataclasses import replace

from ibturbo.config import RunConfig
from ibturbo.sim import run_sweep

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--snr", type=float, nargs="+", default=[4.5, 5.0, 5.5])
ap.add_argument("--frames", type=int, default=200)
ap.add_argument("--schedule", type=int, nargs="+", default=[20])
ap.add_argument("--kinds", nargs="+", default=["conventional-exact", "conventional-quantized", "ib"])
args = ap.parse_args()

base = RunConfig(snr=tuple(args.snr), decoder_iters=tuple(args.schedule), design_snr=5.0,
                 min_frame_errors=10 ** 9, max_frames=args.frames, out_dir="results/compare")
print("equalizer," + ",".join(f"{s:g} dB" for s in args.snr))
for kind in args.kinds:
    rows = run_sweep(replace(base, equalizer=kind), write=False)
    print(kind + "," + ",".join(f"{r.ber:.3e}" for r in rows), flush=True)
