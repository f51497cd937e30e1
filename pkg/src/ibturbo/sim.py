"""Monte Carlo BER/FER sweeps, design pipeline and hardware report driver."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import hwcost
from .channel import ChannelSpec, build_trellis, preset, transmit
from .config import RunConfig
from .ldpc import Code, Decoder, read_alist, regular_code
from .lut_equalizer import (DesignOptions, design_equalizer, load_design, model_feedback_pmf, save_design)
from .reference import FixedPointFormat
from .turbo import (BCJREqualizer, IBEqualizer, QuantizedBCJREqualizer, TurboSchedule, interleaver,
                    turbo_run)

log = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parents[2] / "data"

# receivers at infinite SNR still need a finite N_0 for their metrics
RX_NOISE_FLOOR = 1e-6


def noise_psd(snr_db: float, spec: ChannelSpec, rate: float) -> float:
    """``N_0 = E_s / (R 10^(snr/10))`` with ``E_s`` the received symbol energy."""
    if np.isinf(snr_db):
        return 0.0
    return spec.symbol_energy / (rate * 10 ** (snr_db / 10))


def build_code(cfg: RunConfig) -> Code:
    if cfg.alist:
        return Code(read_alist(cfg.alist))
    return regular_code(cfg.code_n, cfg.code_dv, cfg.code_dc, cfg.code_seed, cache_dir=DATA_DIR)


# ------------------------------------------------------------ designs


def design_key(cfg: RunConfig, spec: ChannelSpec, i: int) -> str:
    w = cfg.widths_at(i)
    d = {"taps": spec.taps, "n0": round(spec.noise_psd, 12), "w": asdict(w), "structure": cfg.structure,
         "order": cfg.order, "i_design": cfg.i_design_at(i), "recursions": cfg.recursions,
         "seed": cfg.design_seed}
    return hashlib.sha1(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:16]


def design_for(cfg: RunConfig, spec: ChannelSpec, i: int, cache_dir=None):
    """One design per turbo iteration index; cached by its parameters."""
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"{cfg.channel}_{cfg.structure}_{design_key(cfg, spec, i)}.ibeq"
        if path.exists():
            return load_design(path), path
    opts = DesignOptions(recursions=cfg.recursions, static_recursions=cfg.recursions,
                         seed=cfg.design_seed, order=cfg.order)
    t0 = time.time()
    d = design_equalizer(spec, cfg.widths_at(i), cfg.structure, cfg.i_design_at(i), opts)
    log.info("designed %s iteration %d in %.1f s", cfg.structure, i, time.time() - t0)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_design(d, path, extra={"turbo_iteration": i})
    return d, path


def design_all(cfg: RunConfig, snr_db: float | None = None):
    """Design bundles for every turbo iteration at the design SNR; returns their paths."""
    base = preset(cfg.channel)
    code = build_code(cfg)
    snr = cfg.design_snr if snr_db is None else snr_db
    if snr is None:
        snr = cfg.snr[0]
    spec = base.with_noise(noise_psd(snr, base, code.rate))
    out = Path(cfg.out_dir) / "designs"
    return [design_for(cfg, spec, i, out)[1] for i in range(cfg.turbo_iterations + 1)]


def make_equalizer(cfg: RunConfig, spec: ChannelSpec, design_spec: ChannelSpec | None = None, cache_dir=None):
    kind = cfg.equalizer
    if kind == "ib":
        ds = design_spec or spec
        designs = [design_for(cfg, ds, i, cache_dir)[0] for i in range(cfg.turbo_iterations + 1)]
        return IBEqualizer(designs, block=cfg.block or None, overlap=cfg.overlap)
    if kind == "conventional-exact":
        return BCJREqualizer(spec, "exact", cfg.observation_model)
    if kind == "conventional-maxlog":
        return BCJREqualizer(spec, "approx", cfg.observation_model)
    fmt = FixedPointFormat.for_channel(spec, cfg.fp_w_r, cfg.fp_w_metric)
    fbs = [model_feedback_pmf(cfg.i_design_at(i), cfg.w_d) for i in range(cfg.turbo_iterations + 1)]
    return QuantizedBCJREqualizer(spec, fmt, fbs, cfg.observation_model)


# ----------------------------------------------------------- simulation


@dataclass
class ResultRow:
    snr_db: float
    frames: int
    bit_errors: int
    frame_errors: int
    ber: float
    fer: float
    elapsed: float
    config_hash: str


def frame_rng(seed: int, snr_index: int, frame: int) -> np.random.Generator:
    return np.random.default_rng([seed, snr_index, frame])


def simulate_frame(code, perm, spec, equalizer, schedule, decoder, rng):
    """Bit errors of one frame (random message, interleaved BPSK, turbo receiver)."""
    u = rng.integers(0, 2, code.k)
    c = code.encode(u)
    r = transmit(1.0 - 2.0 * c[perm], spec, rng=rng)
    out = turbo_run(r, code, equalizer, schedule, perm, decoder)
    return int(np.sum(out.bits != u))


def frame_errors(code, perm, spec, equalizer, schedule, seed, snr_index, frames, decoder_kind="bp"):
    """Per-frame bit error counts for frames ``0..frames-1`` (common random numbers)."""
    dec = Decoder(code, decoder_kind, warm_start=schedule.warm_start)
    return np.array([simulate_frame(code, perm, spec, equalizer, schedule, dec, frame_rng(seed, snr_index, f))
                     for f in range(frames)], dtype=np.int64)


_WORKER = {}


def _worker_init(state):
    _WORKER.update(state)
    _WORKER["decoder"] = Decoder(state["code"], state["decoder_kind"], warm_start=state["schedule"].warm_start)


def _worker_run(args):
    seed, si, frames = args
    w = _WORKER
    return [simulate_frame(w["code"], w["perm"], w["spec"], w["equalizer"], w["schedule"], w["decoder"],
                           frame_rng(seed, si, f)) for f in frames]


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("IBTURBO_THREADS", "1")))
    except ValueError:
        return 1


def run_point(cfg: RunConfig, code: Code, perm, spec, equalizer, si: int, schedule: TurboSchedule) -> ResultRow:
    """Frames in index order until the stopping rule; identical for any worker count."""
    t0 = time.time()
    errs = []
    nthreads = _threads()
    stop = lambda e: sum(x > 0 for x in e) >= cfg.min_frame_errors or len(e) >= cfg.max_frames
    if nthreads == 1:
        dec = Decoder(code, cfg.decoder, warm_start=schedule.warm_start)
        while not stop(errs):
            errs.append(simulate_frame(code, perm, spec, equalizer, schedule, dec,
                                       frame_rng(cfg.seed, si, len(errs))))
    else:
        state = {"code": code, "perm": perm, "spec": spec, "equalizer": equalizer, "schedule": schedule,
                 "decoder_kind": cfg.decoder}
        with ProcessPoolExecutor(nthreads, initializer=_worker_init, initargs=(state,)) as ex:
            batch = 8 * nthreads
            while not stop(errs):
                start = len(errs)
                chunks = [(cfg.seed, si, range(start + j, start + batch, nthreads)) for j in range(nthreads)]
                res = list(ex.map(_worker_run, chunks))
                got = np.empty(batch, dtype=np.int64)
                for j, r in enumerate(res):
                    got[j::nthreads] = r
                for e in got:
                    if stop(errs):
                        break
                    errs.append(int(e))
    errs = np.array(errs)
    frames = len(errs)
    be, fe = int(errs.sum()), int((errs > 0).sum())
    return ResultRow(snr_db=float(cfg.snr[si]), frames=frames, bit_errors=be, frame_errors=fe,
                     ber=be / (frames * code.k), fer=fe / frames, elapsed=time.time() - t0,
                     config_hash=cfg.digest())


def run_sweep(cfg: RunConfig, write: bool = True):
    base = preset(cfg.channel)
    code = build_code(cfg)
    perm = interleaver(code.n, cfg.seed)
    schedule = TurboSchedule(cfg.decoder_iters, cfg.warm_start)
    cache = Path(cfg.out_dir) / "designs"
    rows = []
    for si, snr in enumerate(cfg.snr):
        spec = base.with_noise(noise_psd(snr, base, code.rate))
        dspec = spec if cfg.design_snr is None else base.with_noise(noise_psd(cfg.design_snr, base, code.rate))
        if cfg.equalizer == "ib" and dspec.noise_psd == 0:
            raise ValueError("IB designs need a finite design SNR")
        rx = spec if spec.noise_psd > 0 else spec.with_noise(RX_NOISE_FLOOR)
        eq = make_equalizer(cfg, rx, dspec, cache)
        row = run_point(cfg, code, perm, spec, eq, si, schedule)
        log.info("SNR %.2f dB: BER %.3e FER %.3e (%d frames)", snr, row.ber, row.fer, row.frames)
        rows.append(row)
    if write:
        write_rows(rows, Path(cfg.out_dir) / f"sweep_{cfg.equalizer}_{cfg.digest()}.csv")
    return rows


def write_rows(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(list(ResultRow.__dataclass_fields__))
        for r in rows:
            w.writerow(list(asdict(r).values()))
    return path


def snr_at_ber(snrs, bers, target: float = 1e-3) -> float:
    """Log-linear interpolation of the first crossing below ``target``; nan if none."""
    snrs, bers = np.asarray(snrs, float), np.asarray(bers, float)
    for i in range(len(snrs) - 1):
        b0, b1 = bers[i], bers[i + 1]
        if b0 >= target > b1:
            if b1 <= 0:
                return float(snrs[i + 1])
            f = (np.log10(b0) - np.log10(target)) / (np.log10(b0) - np.log10(b1))
            return float(snrs[i] + f * (snrs[i + 1] - snrs[i]))
    return float("nan")


# ------------------------------------------------------------- hardware


def conventional_widths(spec: ChannelSpec, w_r: int, w_metric: int) -> str:
    stored = (build_trellis(spec).num_states - 1) * w_metric
    return hwcost.width_label(w_r, [stored])


def report_hw(cfg: RunConfig, designs=None, write: bool = True):
    """Cost reports for the IB configuration and the conventional fixed-point setup."""
    base = preset(cfg.channel)
    trellis = build_trellis(base)
    reports = []
    if designs is None and cfg.equalizer == "ib":
        designs = [load_design(p) for p in design_all(cfg)]
    if designs:
        iters = [hwcost.ib_iteration_cost(d, cfg.hw_method, max_logic_inputs=cfg.max_logic_inputs)
                 for d in designs]
        label = hwcost.width_label(cfg.w_r, [d.widths.w_alpha for d in designs])
        reports.append(hwcost.optimize_subblock(iters, n_o=cfg.n_o, label=f"IB {label}"))
    conv = hwcost.conventional_iteration_cost(trellis.num_states, trellis.num_symbols, trellis.memory,
                                              cfg.fp_w_r, cfg.fp_w_metric, model=cfg.observation_model)
    label = conventional_widths(base, cfg.fp_w_r, cfg.fp_w_metric)
    reports.append(hwcost.optimize_subblock([conv], n_o=cfg.n_o, label=f"conventional {label}"))
    if write:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "hwcost.csv").write_text(hwcost.reports_csv(reports))
        (out / "hwcost.txt").write_text(hwcost.reports_text(reports))
    return reports
