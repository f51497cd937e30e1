"""Turbo loop between a channel equalizer and the LDPC decoder."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSpec, build_trellis
from .ldpc import Code, Decoder
from .lut_equalizer import EqualizerDesign, quantize_feedback, run_equalizer, run_subblocks
from .reference import FixedPointFormat, bcjr, bcjr_quantized, prior_table, quantize_channel


@dataclass(frozen=True)
class TurboSchedule:
    """Decoder iterations per equalizer run; ``len(decoder_iters) = N_it + 1``."""

    decoder_iters: tuple = (5, 5, 10)
    warm_start: bool = True

    def __post_init__(self):
        object.__setattr__(self, "decoder_iters", tuple(int(i) for i in self.decoder_iters))
        if not self.decoder_iters or min(self.decoder_iters) < 0:
            raise ValueError("decoder_iters must be a nonempty sequence of counts >= 0")

    @property
    def turbo_iterations(self) -> int:
        return len(self.decoder_iters) - 1

    @property
    def budget(self) -> int:
        return sum(self.decoder_iters)


def interleaver(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).permutation(n)


def empirical_mi(llr, bits) -> float:
    """Time-average estimate of I(D;L) in bits for LLRs with their true bits (bit 0 <-> +1)."""
    x = 1.0 - 2.0 * np.asarray(bits, dtype=float)
    z = -x * np.asarray(llr, dtype=float)
    return float(1.0 - np.mean(np.logaddexp(0.0, z)) / np.log(2))


# ------------------------------------------------------------ equalizers


class IBEqualizer:
    """Table-driven equalizer; one design per turbo iteration (the last is reused)."""

    def __init__(self, designs, block: int | None = None, overlap: int = 10):
        if isinstance(designs, EqualizerDesign):
            designs = [designs]
        self.designs = list(designs)
        self.block = block
        self.overlap = overlap

    def _design(self, i):
        return self.designs[min(i, len(self.designs) - 1)]

    def equalize(self, r, prior_llr, iteration: int):
        d = self._design(iteration)
        t_r = d.channel_quantizer(r)
        t_d = None if prior_llr is None else quantize_feedback(prior_llr, d.feedback)
        if self.block:
            _, L = run_subblocks(d, t_r, t_d, block=self.block, overlap=self.overlap)
        else:
            _, L = run_equalizer(d, t_r, t_d)
        return L, {"I_feedback_design": d.feedback.info}


class BCJREqualizer:
    """Floating-point BCJR (``mode`` exact or approx)."""

    def __init__(self, spec: ChannelSpec, mode: str = "exact", model: str = "forney"):
        self.spec, self.mode, self.model = spec, mode, model
        self.trellis = build_trellis(spec)

    def equalize(self, r, prior_llr, iteration: int):
        return bcjr(r, self.spec, prior_llr=prior_llr, mode=self.mode, model=self.model,
                    trellis=self.trellis), {}


class QuantizedBCJREqualizer:
    """Fixed-point max-log BCJR; feedback enters through ``w_d``-level prior tables."""

    def __init__(self, spec: ChannelSpec, fmt: FixedPointFormat | None = None, feedback=None,
                 model: str = "ungerboeck"):
        self.spec = spec
        self.fmt = fmt or FixedPointFormat.for_channel(spec)
        self.feedback = feedback if feedback is None or isinstance(feedback, list) else [feedback]
        self.model = model

    def equalize(self, r, prior_llr, iteration: int):
        q = quantize_channel(r, self.fmt)
        t_d, lut = None, None
        if prior_llr is not None:
            if self.feedback:
                fb = self.feedback[min(iteration, len(self.feedback) - 1)]
                t_d = quantize_feedback(prior_llr, fb)
                levels = fb.level_llrs
            else:
                # unquantized priors: one table row per symbol
                t_d = np.arange(len(prior_llr))
                levels = np.asarray(prior_llr, dtype=float)
            lut = prior_table(levels, self.spec.noise_psd, self.fmt.delta)
        L = bcjr_quantized(q, self.spec, self.fmt, t_d=t_d, prior_lut=lut, model=self.model)
        return L * self.fmt.delta / self.spec.noise_psd, {}


# ------------------------------------------------------------ turbo loop


@dataclass
class TurboResult:
    bits: np.ndarray
    converged: bool
    telemetry: list = field(default_factory=list)


def turbo_run(r, code: Code, equalizer, schedule: TurboSchedule, perm: np.ndarray,
              decoder: Decoder | None = None, codeword=None) -> TurboResult:
    """Equalize, deinterleave, decode, and feed the decoder extrinsic back.

    ``r`` holds the channel outputs of the interleaved codeword
    ``c[perm]``.  When the true ``codeword`` is given, the telemetry
    carries empirical I(D;L) of both extrinsic streams.
    """
    if len(r) != code.n or len(perm) != code.n:
        raise ValueError("frame length must equal the code length")
    decoder = decoder or Decoder(code, warm_start=schedule.warm_start)
    decoder.reset()
    prior = None
    telemetry = []
    hard, conv = None, False
    for i, iters in enumerate(schedule.decoder_iters):
        L_e, info = equalizer.equalize(r, prior, i)
        L_dec = np.empty(code.n)
        L_dec[perm] = L_e
        ext, hard, conv = decoder.decode(L_dec, iters)
        prior = ext[perm]
        row = {"iteration": i, "decoder_iters": iters, "converged": conv, **info}
        if codeword is not None:
            row["I_equalizer"] = empirical_mi(L_dec, codeword)
            row["I_decoder"] = empirical_mi(ext, codeword)
        telemetry.append(row)
    return TurboResult(bits=code.message(hard), converged=conv, telemetry=telemetry)
