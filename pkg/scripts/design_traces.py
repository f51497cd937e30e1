"""Design one IB equalizer and print its I-traces and report."""
import argparse
import time

from ibturbo.channel import preset
from ibturbo.lut_equalizer import DesignOptions, Widths, design_equalizer, save_design
from ibturbo.sim import noise_psd

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--channel", default="epr4")
ap.add_argument("--snr", type=float, default=5.0, help="Eb/N0 in dB (rate 1/2)")
ap.add_argument("--structure", default="RRR")
ap.add_argument("--w", type=int, default=8)
ap.add_argument("--w-r", type=int, default=5)
ap.add_argument("--i-design", type=float, default=0.0)
ap.add_argument("--recursions", type=int, default=50)
ap.add_argument("--out", default=None, help="write the bundle here")
args = ap.parse_args()

base = preset(args.channel)
spec = base.with_noise(noise_psd(args.snr, base, 0.5))
t0 = time.time()
d = design_equalizer(spec, Widths(w_r=args.w_r, w_alpha=args.w, w_beta=args.w), args.structure, args.i_design,
                     DesignOptions(recursions=args.recursions, static_recursions=args.recursions))
rep = d.report
print(f"designed in {time.time() - t0:.1f} s; entries {d.entries}")
print(f"I(S,D;T_r) = {rep['I_channel']:.4f}  I(D;T_d) = {rep['I_feedback']:.4f}  I(D;T_e) = {rep['I_output']:.4f}")
print("recursion  forward   backward")
for i, (a, b) in enumerate(zip(rep["forward_trace"], rep["backward_trace"]), 1):
    if i in (1, 2, 5) or i % 10 == 0:
        print(f"{i:>9}  {a:.5f}  {b:.5f}")
print(f"static loss: forward {rep['static_loss_forward']:.2e}, backward {rep['static_loss_backward']:.2e}")
for w in rep["warnings"]:
    print("warning:", w)
if args.out:
    save_design(d, args.out)
