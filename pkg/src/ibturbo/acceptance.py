"""Acceptance checks shared by the test-suite and the ``selftest`` subcommand.

Every check returns a :class:`Check`; Monte Carlo checks reuse designs
cached under ``IBTURBO_CACHE`` (default ``.cache/ibturbo``).
"""
from __future__ import annotations

import functools
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import hwcost
from .channel import ChannelSpec, build_trellis, preset, transmit
from .config import RunConfig
from .lut_equalizer import (DesignOptions, Widths, _design_direction, design_channel_quantizer,
                            entry_counts, model_feedback_pmf)
from .reference import FixedPointFormat, bcjr, brute_force_posterior, maxstar
from .sim import build_code, design_for, frame_errors, noise_psd, snr_at_ber
from .turbo import IBEqualizer, TurboSchedule, interleaver

DESIGN_SNR = 5.0
SNR_GRID = (4.5, 4.75, 5.0, 5.25, 5.5, 5.75, 6.0)
SWEEP_FRAMES = 1000
COMPARE_FRAMES = 3000


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.elapsed:.1f} s)"


def _timed(name):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*a, **kw):
            t0 = time.time()
            ok, detail = fn(*a, **kw)
            return Check(name, bool(ok), detail, time.time() - t0)
        return run
    return wrap


def cache_dir() -> Path:
    return Path(os.environ.get("IBTURBO_CACHE", ".cache/ibturbo"))


# ------------------------------------------------------------ instant checks


EXPECTED_ENTRIES = {8: {"forward_F": 65536, "final_F": 2097152, "forward_R": 10240, "final_R": 65536},
           6: {"forward_F": 16384, "final_F": 131072, "forward_R": 2560, "final_R": 4096}}


@_timed("lut_entry_counts")
def check_entry_counts():
    bad = []
    for w, want in EXPECTED_ENTRIES.items():
        got = entry_counts(Widths(w_r=5, w_d=3, w_alpha=w, w_beta=w))
        for k, v in want.items():
            if got[k] != v:
                bad.append(f"w={w} {k}: {got[k]} != {v}")
        if got["backward_F"] != got["forward_F"] or got["backward_R"] != got["forward_R"]:
            bad.append(f"w={w}: backward counts differ from forward")
    return not bad, "; ".join(bad) or "all 16 counts exact"


@_timed("gate_costs")
def check_gate_costs():
    g = hwcost.GATES
    want = {"AND": 6, "OR": 6, "NOT": 2, "NAND": 4, "XOR": 10, "DFF": 18}
    bad = [k for k, v in want.items() if getattr(g, k) != v]
    # the same table reaches netlists, adders and memory
    net = hwcost.Netlist(2)
    net.outputs = [net.add("AND", 0, 1)]
    if hwcost.netlist_cost(net)[0] != 6:
        bad.append("netlist AND")
    net = hwcost.Netlist(2)
    net.outputs = [net.add("XOR", 0, 1)]
    if hwcost.netlist_cost(net)[0] != 10:
        bad.append("netlist XOR")
    if hwcost.full_adder_cost() != 38:
        bad.append("full adder")
    if hwcost.xi_memory(1, 0, 0, 1, 1, 4) != hwcost.Fraction(18 * 2, 4):
        bad.append("DFF in memory")
    if hwcost.mux_tree_cost(1, 1)[1] != 2 * 6 + 6 + 2:
        bad.append("MUX2 = 2 AND + OR + NOT")
    return not bad, ", ".join(bad) or "6/6/2/4/10, DFF=18, MUX2=20 on every path"


@_timed("metric_storage_ratio")
def check_metric_storage():
    trellis = build_trellis(preset("epr4"))
    conv = FixedPointFormat(delta=1.0, w_r=7, w_alpha_bar=11).metric_bits(trellis.memory)
    ib = 9
    ratio = (2 * conv) / (2 * ib)
    return conv == 77 and 3 <= ratio <= 13, f"conventional {conv} bits/direction vs IB {ib}: factor {ratio:.2f}"


@_timed("memory_model_identities")
def check_memory_identities():
    for n_b in range(2, 65, 2):
        if hwcost.series_2k(n_b) != sum(2 * k for k in range(1, n_b // 2)):
            return False, f"series mismatch at N_b={n_b}"
        for args in [(8, 8, 4, 2, 1), (9, 9, 4, 3, 2), (77, 77, 11, 7, 10)]:
            if hwcost.xi_memory(*args, n_b) != hwcost.xi_memory_enumerated(*args, n_b):
                return False, f"closed form != enumeration at N_b={n_b}, widths {args}"
    return True, "closed form == shift-register enumeration for N_b = 2..64"


# --------------------------------------------------------------- oracles


def random_channel(rng, memory: int) -> ChannelSpec:
    taps = rng.normal(size=memory + 1)
    taps /= np.linalg.norm(taps)
    return ChannelSpec(tuple(taps), noise_psd=float(rng.uniform(0.2, 2.0)))


@_timed("bcjr_brute_force_oracle")
def check_bcjr_oracle(instances: int = 200, seed: int = 0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        L = int(rng.integers(1, 4))
        N = int(rng.integers(1, 9))
        spec = random_channel(rng, L)
        d = rng.choice(spec.alphabet, size=N)
        r = transmit(d, spec, rng=rng)
        prior = rng.normal(0, 2, N) if rng.random() < 0.5 else None
        lp = brute_force_posterior(r, spec, prior)
        ref = lp[:, 0] - lp[:, 1]
        for model in ("forney", "ungerboeck"):
            got = bcjr(r, spec, prior, mode="exact", model=model, extrinsic=False)
            worst = max(worst, float(np.max(np.abs(got - ref))))
    return worst <= 1e-9, f"{instances} instances, max |LLR error| = {worst:.2e}"


@_timed("maxstar_property")
def check_maxstar(pairs: int = 10 ** 6, seed: int = 0):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-50, 50, pairs)
    b = a + rng.normal(0, 3, pairs)
    exact = maxstar(a, b, "exact")
    ref = np.logaddexp(a, b)
    err = float(np.max(np.abs(exact - ref)))
    gap = ref - maxstar(a, b, "approx")
    ok = err <= 1e-12 and gap.min() >= 0 and gap.max() <= math.log(2) + 1e-15
    return ok, f"exact error {err:.1e}, max-log gap in [{gap.min():.2e}, {gap.max():.4f}] (ln 2 = 0.6931)"


# ---------------------------------------------------------------- design


def design_noise(snr_db: float = DESIGN_SNR) -> float:
    return noise_psd(snr_db, preset("epr4"), 0.5)


@_timed("ib_design_convergence")
def check_ib_convergence(recursions: int = 50):
    spec = preset("epr4", design_noise())
    trellis = build_trellis(spec)
    cq = design_channel_quantizer(spec, 5, trellis=trellis)
    fb = model_feedback_pmf(0.0, 3)
    res = _design_direction(cq.p_tr, fb.pmf, trellis, 1 << 8, "reduced",
                            DesignOptions(recursions=recursions, static_recursions=recursions), False)
    delta = abs(res.trace[49] - res.trace[39])
    return delta < 1e-3, f"I(S';T'_a) = {res.trace[39]:.5f} -> {res.trace[49]:.5f} bits, change {delta:.2e}"


def random_symmetric_lut(rng, n_in: int, w_out: int) -> np.ndarray:
    half = rng.integers(0, 1 << w_out, 1 << (n_in - 1))
    return np.concatenate([half, ((1 << w_out) - 1 - half)[::-1]])


@_timed("netlist_equivalence")
def check_netlists(count: int = 50, seed: int = 0, max_inputs: int = 12):
    rng = np.random.default_rng(seed)
    worse = 0
    for i in range(count):
        n_in = int(rng.integers(2, max_inputs + 1))
        w_out = int(rng.integers(1, 4))
        t = random_symmetric_lut(rng, n_in, w_out)
        cover = hwcost.dnf_minimize(t, w_out)
        realizations = {
            "mux": hwcost.mux_tree_netlist(t, w_out).evaluate(),
            "symmetric": hwcost.symmetric_mux_netlist(t, w_out).evaluate(),
            "two-level": cover.evaluate(),
            "shared": hwcost.share_multilevel(cover).evaluate(),
            "unshared": hwcost.unshared_multilevel(cover).evaluate(),
        }
        for k, v in realizations.items():
            if not np.array_equal(v, t):
                return False, f"LUT {i} ({n_in} inputs): {k} realization differs"
        if hwcost.netlist_cost(hwcost.share_multilevel(cover))[0] > hwcost.two_level_cost(cover):
            worse += 1
    return worse == 0, f"{count} LUTs exhaustively equivalent; shared > unshared in {worse} cases"


# ----------------------------------------------------------- Monte Carlo


def acceptance_config(structure: str = "RRR", block: int = 0, decoder_iters=(20,)) -> RunConfig:
    return RunConfig(channel="epr4", equalizer="ib", structure=structure, w_r=5, w_d=3, w_alpha=(8,),
                     w_beta=(8,), w_e=4, i_design=(0.0, 0.5, 0.8), design_snr=DESIGN_SNR,
                     decoder_iters=tuple(decoder_iters), snr=SNR_GRID, block=block, overlap=10, seed=1)


@functools.lru_cache(maxsize=None)
def _designs(structure: str, iterations: int):
    cfg = acceptance_config(structure)
    spec = preset("epr4", design_noise())
    return tuple(design_for(cfg, spec, i, cache_dir())[0] for i in range(iterations))


@functools.lru_cache(maxsize=None)
def _code():
    return build_code(acceptance_config())


def _errors(structure, schedule, snr_index, snr, frames, block=0, seed=1):
    code = _code()
    designs = _designs(structure, len(schedule.decoder_iters))
    eq = IBEqualizer(list(designs), block=block or None, overlap=10)
    base = preset("epr4")
    spec = base.with_noise(noise_psd(snr, base, code.rate))
    perm = interleaver(code.n, seed)
    return frame_errors(code, perm, spec, eq, schedule, seed, snr_index, frames)


@functools.lru_cache(maxsize=None)
def ber_curve(structure: str = "RRR", block: int = 0, frames: int = SWEEP_FRAMES):
    """Plain equalize-then-decode BER over the acceptance grid (common random numbers)."""
    sched = TurboSchedule((20,))
    k = _code().k
    return tuple(float(_errors(structure, sched, i, s, frames, block).sum()) / (frames * k)
                 for i, s in enumerate(SNR_GRID))


@_timed("turbo_gain")
def check_turbo_gain(frames: int = COMPARE_FRAMES):
    bers = ber_curve("RRR")
    snr = snr_at_ber(SNR_GRID, bers, 1e-3)
    if not np.isfinite(snr):
        return False, f"N_it=0 curve never crosses 1e-3: {bers}"
    e0 = _errors("RRR", TurboSchedule((20,)), 99, snr, frames)
    e2 = _errors("RRR", TurboSchedule((5, 5, 10)), 99, snr, frames)
    k = _code().k
    d = e0 - 3.0 * e2
    lower = d.mean() - 1.645 * d.std(ddof=1) / math.sqrt(frames)
    b0, b2 = e0.sum() / (frames * k), e2.sum() / (frames * k)
    ratio = b0 / b2 if b2 > 0 else float("inf")
    return lower > 0, (f"at {snr:.2f} dB: BER N_it=0 {b0:.2e}, N_it=2 {b2:.2e}, ratio {ratio:.1f}; "
                       f"one-sided 95% bound on BER0-3*BER2 per frame {lower:.3f}")


@_timed("decomposition_loss")
def check_decomposition():
    r = ber_curve("RRR")
    f = ber_curve("FFF")
    s_r, s_f = snr_at_ber(SNR_GRID, r), snr_at_ber(SNR_GRID, f)
    gap = s_r - s_f
    return np.isfinite(gap) and gap <= 0.35, f"RRR {s_r:.3f} dB vs FFF {s_f:.3f} dB at BER 1e-3: gap {gap:.3f} dB"


@_timed("subblock_overlap")
def check_subblocks(block: int = 64):
    full = ber_curve("RRR")
    sub = ber_curve("RRR", block)
    s_full, s_sub = snr_at_ber(SNR_GRID, full), snr_at_ber(SNR_GRID, sub)
    gap = abs(s_sub - s_full)
    return np.isfinite(gap) and gap <= 0.05, (f"N_b={block}, N_o=10: {s_sub:.3f} dB vs full {s_full:.3f} dB "
                                             f"at BER 1e-3: gap {gap:.3f} dB")


# ---------------------------------------------------------------- costs


def ib_width_sets():
    return [(5, (6,)), (5, (7,)), (5, (8,)), (5, (9,)), (5, (8, 8, 7)), (5, (7, 7, 8))]


def _mux_depth_iteration(w_r, w, w_d=3, w_e=4):
    """Memory-side parameters of an IB iteration with mux-tree logic depths."""
    _, _, st1 = hwcost.mux_tree_cost(w + w_r, w)
    _, _, st2 = hwcost.mux_tree_cost(w + w_d, w)
    _, _, ste = hwcost.mux_tree_cost(2 * w, w_e)
    lv = 3 * (st1 + st2)
    return hwcost.IterationCost(0, 0, 0, lv, lv, 3 * ste, w, w, w_e)


@_timed("cost_report_ordering")
def check_cost_ordering():
    trellis = build_trellis(preset("epr4"))
    conv = hwcost.conventional_iteration_cost(trellis.num_states, trellis.num_symbols, trellis.memory, 7, 11)
    msgs = []
    mem_ok = True
    for w_r, ws in ib_width_sets():
        ib = [_mux_depth_iteration(w_r, w) for w in ws]
        for n_b in range(2, 2049, 2):
            a, b = hwcost.evaluate(ib, n_b).xi_memory, hwcost.evaluate([conv], n_b).xi_memory
            # N_b=2 has no shift registers, both sides are zero
            if a > b or (n_b > 2 and a >= b):
                mem_ok = False
                msgs.append(f"memory {hwcost.width_label(w_r, ws)} at N_b={n_b}")
                break
    design = _designs("RRR", 1)[0]
    ib8 = hwcost.ib_iteration_cost(design, "shared")
    ib_ab = ib8.xi_alpha + ib8.xi_beta
    conv_ab = conv.xi_alpha + conv.xi_beta
    upd_ok = ib_ab < conv_ab
    detail = (f"memory IB < conventional for all width sets and N_b: {mem_ok}; "
              f"forward+backward update (5,8) shared {ib_ab} vs (7,77) arithmetic {conv_ab} transistors")
    if msgs:
        detail += "; " + ", ".join(msgs)
    return mem_ok and upd_ok, detail


ALL_CHECKS = [check_entry_counts, check_gate_costs, check_bcjr_oracle, check_maxstar, check_ib_convergence,
              check_netlists, check_memory_identities, check_turbo_gain, check_decomposition,
              check_subblocks, check_metric_storage, check_cost_ordering]
QUICK_CHECKS = [check_entry_counts, check_gate_costs, check_bcjr_oracle, check_maxstar, check_netlists,
                check_memory_identities, check_metric_storage]
