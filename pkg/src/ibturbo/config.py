"""Run configuration read from a key=value file with ``[section]`` headers."""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

EQUALIZERS = ("ib", "conventional-exact", "conventional-maxlog", "conventional-quantized")


def _floats(s):
    return tuple(float(x) for x in str(s).replace(",", " ").split())


def _ints(s):
    return tuple(int(x) for x in str(s).replace(",", " ").split())


@dataclass
class RunConfig:
    # channel
    channel: str = "epr4"
    # equalizer
    equalizer: str = "ib"
    structure: str = "RRR"
    order: str = "rd"
    w_r: int = 5
    w_d: int = 3
    w_alpha: tuple = (8,)           # per turbo iteration, last value repeats
    w_beta: tuple = (8,)
    w_e: int = 4
    i_design: tuple = (0.0, 0.5, 0.8)
    design_snr: float | None = None  # None: design at every SNR point
    recursions: int = 50
    design_seed: int = 0
    block: int = 0                   # sub-block length, 0 = whole frame
    overlap: int = 10
    # fixed point (conventional-quantized)
    fp_w_r: int = 7
    fp_w_metric: int = 11
    observation_model: str = "ungerboeck"
    # code and decoder
    code_n: int = 2048
    code_dv: int = 3
    code_dc: int = 6
    code_seed: int = 0
    alist: str = ""
    decoder: str = "bp"
    # turbo
    decoder_iters: tuple = (5, 5, 10)
    warm_start: bool = True
    # sweep
    snr: tuple = (4.0, 4.5, 5.0)
    min_frame_errors: int = 200
    max_frames: int = 100000
    seed: int = 1
    # output
    out_dir: str = "results"
    # hardware report
    n_o: int = 10
    hw_method: str = "shared"
    max_logic_inputs: int = 14
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.equalizer not in EQUALIZERS:
            raise ValueError(f"equalizer must be one of {EQUALIZERS}")
        if not self.snr:
            raise ValueError("SNR list must be nonempty")
        if self.min_frame_errors < 1 or self.max_frames < 1:
            raise ValueError("stopping rule must be positive")

    @property
    def turbo_iterations(self) -> int:
        return len(self.decoder_iters) - 1

    def widths_at(self, i: int):
        from .lut_equalizer import Widths

        wa = self.w_alpha[min(i, len(self.w_alpha) - 1)]
        wb = self.w_beta[min(i, len(self.w_beta) - 1)]
        return Widths(self.w_r, self.w_d, wa, wb, self.w_e)

    def i_design_at(self, i: int) -> float:
        return self.i_design[min(i, len(self.i_design) - 1)]

    def digest(self) -> str:
        d = asdict(self)
        d.pop("out_dir")
        return hashlib.sha1(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:12]


# section -> {key: (field, parser)}
_SCHEMA = {
    "channel": {"preset": ("channel", str)},
    "equalizer": {
        "kind": ("equalizer", str), "structure": ("structure", str), "order": ("order", str),
        "w_r": ("w_r", int), "w_d": ("w_d", int), "w_alpha": ("w_alpha", _ints), "w_beta": ("w_beta", _ints),
        "w_e": ("w_e", int), "i_design": ("i_design", _floats), "recursions": ("recursions", int),
        "design_snr": ("design_snr", lambda s: float(s) if str(s).strip() else None),
        "design_seed": ("design_seed", int), "block": ("block", int), "overlap": ("overlap", int),
    },
    "fixed_point": {"w_r": ("fp_w_r", int), "w_metric": ("fp_w_metric", int),
                    "model": ("observation_model", str)},
    "code": {"n": ("code_n", int), "dv": ("code_dv", int), "dc": ("code_dc", int), "seed": ("code_seed", int),
             "alist": ("alist", str), "decoder": ("decoder", str)},
    "turbo": {"decoder_iters": ("decoder_iters", _ints), "warm_start": ("warm_start", None)},
    "sweep": {"snr": ("snr", _floats), "min_frame_errors": ("min_frame_errors", int),
              "max_frames": ("max_frames", int), "seed": ("seed", int)},
    "output": {"dir": ("out_dir", str)},
    "hw": {"n_o": ("n_o", int), "method": ("hw_method", str), "max_logic_inputs": ("max_logic_inputs", int)},
}


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.read_string(text)
    kw = {}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ValueError(f"unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in _SCHEMA[sec]:
                raise ValueError(f"unknown key {key!r} in [{sec}]")
            name, conv = _SCHEMA[sec][key]
            kw[name] = cp.getboolean(sec, key) if conv is None else conv(raw)
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())
