"""Lookup-table equalizer designed with the information bottleneck method.

Message alphabets are ``{0, .., 2^w - 1}``.  For antipodal alphabets every
design is sign-symmetric: complementing all inputs of a table complements
its output, so a message index ``t`` and ``2^w - 1 - t`` describe mirrored
beliefs.  State index 0 is the all-``+1`` state.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit
from scipy import optimize, stats

from .channel import ChannelSpec, TrellisSpec, build_trellis
from .ib import (Mapping, compress_joint, ib_cluster, llr_threshold_cluster, mutual_information,
                 scalar_quantizer_dp)

log = logging.getLogger(__name__)

LLR_CLIP = 20.0
STRUCTURES = ("FFF", "RRF", "RRR")


class DesignError(RuntimeError):
    pass


@dataclass(frozen=True)
class Widths:
    """Bits per message: channel, feedback, forward, backward, equalizer output."""

    w_r: int = 5
    w_d: int = 3
    w_alpha: int = 8
    w_beta: int = 8
    w_e: int = 4

    def __post_init__(self):
        for name in ("w_r", "w_d", "w_alpha", "w_beta", "w_e"):
            w = getattr(self, name)
            if not 1 <= w <= 16:
                raise ValueError(f"{name}={w} outside [1, 16]")

    def sizes(self):
        return {k: 1 << getattr(self, k) for k in ("w_r", "w_d", "w_alpha", "w_beta", "w_e")}


def entry_counts(widths: Widths) -> dict:
    """LUT entries per update for the full (F) and reduced (R) structures."""
    wr, wd, wa, wb = widths.w_r, widths.w_d, widths.w_alpha, widths.w_beta
    return {
        "forward_F": 2 ** (wa + wr + wd),
        "forward_R": 2 ** wa * (2 ** wr + 2 ** wd),
        "backward_F": 2 ** (wb + wr + wd),
        "backward_R": 2 ** wb * (2 ** wr + 2 ** wd),
        "final_F": 2 ** (wa + wr + wb),
        "final_R": 2 ** (wa + wb),
    }


@dataclass
class LutStage:
    """One update: a single multi-input table or a chain of two-input tables."""

    kind: str                 # "full" or "reduced"
    tables: tuple             # full: (T[a, b, c],)  reduced: (T1[a, b], T2[u, c])
    out_size: int

    @property
    def entries(self) -> int:
        return int(sum(t.size for t in self.tables))


# ------------------------------------------------------------ channel side


@dataclass
class ChannelQuantizer:
    thresholds: np.ndarray    # ascending; t_r = number of thresholds <= r
    levels: int
    info: float               # I((S,D); T_r) in bits
    p_tr: np.ndarray          # p(t_r | s, d), shape (S, M, levels)

    def __call__(self, r) -> np.ndarray:
        return np.searchsorted(self.thresholds, np.asarray(r), side="right").astype(np.int64)


def _is_antipodal(spec: ChannelSpec) -> bool:
    a = spec.alphabet
    return len(a) == 2 and a[0] == -a[1]


def design_channel_quantizer(spec: ChannelSpec, w_r: int, grid_points: int = 1000,
                             span_sigma: float = 5.0, trellis: TrellisSpec | None = None,
                             outside_limit: float = 0.01) -> ChannelQuantizer:
    """Information-optimal scalar quantizer of the channel output.

    Relevant variable is the transition ``(s, d_k)``; a fine uniform grid over
    ``[min x - 5 sigma, max x + 5 sigma]`` is partitioned into ``2^w_r``
    contiguous cells by dynamic programming.
    """
    trellis = trellis or build_trellis(spec)
    x = np.real(trellis.output).ravel()          # index s * M + j
    sigma = spec.sigma
    lo, hi = x.min() - span_sigma * sigma, x.max() + span_sigma * sigma
    lo, hi = min(lo, -hi), max(hi, -lo)          # symmetric range
    if grid_points % 2:
        grid_points += 1
    edges = np.linspace(lo, hi, grid_points + 1)
    if sigma > 0:
        cdf = stats.norm.cdf((edges[None, :] - x[:, None]) / sigma)
    else:
        cdf = (edges[None, :] >= x[:, None]).astype(float)
    outside = 1.0 - (cdf[:, -1] - cdf[:, 0])
    if np.mean(outside) >= outside_limit:
        raise DesignError(f"channel grid misses {np.mean(outside):.3%} of the mass")
    cdf[:, 0], cdf[:, -1] = 0.0, 1.0             # outer cells absorb the tails
    if sigma == 0:
        # a point mass on an interior edge is split evenly between its neighbours
        on_edge = np.isclose(edges[None, :], x[:, None], atol=1e-12)
        cdf = np.where(on_edge, 0.5, cdf)
    cond = np.diff(cdf, axis=1)                  # p(bin | s, d)
    p = (cond / len(x)).T                        # p(bin, (s, d))
    p = p / p.sum()
    levels = 1 << w_r
    m = scalar_quantizer_dp(p, levels, symmetric=_is_antipodal(spec))
    thresholds = edges[m.boundaries[1:]]
    joint = compress_joint(p, m).T               # ((s, d), t_r)
    p_tr = (joint / joint.sum(axis=1, keepdims=True)).reshape(trellis.num_states, trellis.num_symbols, levels)
    return ChannelQuantizer(thresholds=thresholds, levels=levels, info=m.info, p_tr=p_tr)


# ----------------------------------------------------------- feedback model


def _gaussian_llr_grid(sigma: float, points: int = 2000):
    """p(bin, d) of a consistent Gaussian LLR ``L ~ N(+-sigma^2/2, sigma^2)``."""
    mu = sigma ** 2 / 2
    span = mu + 6 * sigma
    edges = np.linspace(-span, span, points + 1)
    cdf_p = stats.norm.cdf((edges - mu) / sigma)
    cdf_m = stats.norm.cdf((edges + mu) / sigma)
    cdf_p[0], cdf_p[-1], cdf_m[0], cdf_m[-1] = 0.0, 1.0, 0.0, 1.0
    # relevant order (d=+1, d=-1); bins ascending in LLR
    p = 0.5 * np.stack([np.diff(cdf_p), np.diff(cdf_m)], axis=1)
    # mirror so p[g, x] == p[G-1-g, 1-x] exactly
    p = 0.5 * (p + p[::-1, ::-1])
    return edges, p / p.sum()


@dataclass
class FeedbackModel:
    """Quantizer for decoder extrinsic LLRs and its design-time joint ``p(d, t_d)``."""

    thresholds: np.ndarray    # ascending LLR thresholds; index grows with LLR
    levels: int
    pmf: np.ndarray           # p(d, t_d), rows (d=+1, d=-1)
    info: float
    sigma: float
    target: float

    @property
    def neutral(self) -> int:
        """Level of a zero LLR (lower of the middle pair)."""
        return self.levels // 2 - 1

    @property
    def level_llrs(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            L = np.log(self.pmf[0]) - np.log(self.pmf[1])
        return np.clip(np.nan_to_num(L, nan=0.0), -LLR_CLIP, LLR_CLIP)

    def __call__(self, llr) -> np.ndarray:
        return quantize_feedback(llr, self)


def quantize_feedback(llr, model: FeedbackModel) -> np.ndarray:
    """Threshold LLRs into ``2^w_d`` levels; ties fall to the lower level."""
    return np.searchsorted(model.thresholds, np.asarray(llr, dtype=float), side="left").astype(np.int64)


def _quantized_feedback(sigma: float, levels: int):
    edges, p = _gaussian_llr_grid(sigma)
    m = scalar_quantizer_dp(p, levels, symmetric=True)
    return edges[m.boundaries[1:]], compress_joint(p, m).T, m.info


def j_function(sigma: float) -> float:
    """Mutual information of a consistent Gaussian LLR with variance sigma^2."""
    if sigma <= 0:
        return 0.0
    mu = sigma ** 2 / 2
    z, w = np.polynomial.hermite_e.hermegauss(80)
    L = mu + sigma * z
    return float(1.0 - np.sum(w * np.logaddexp(0.0, -L)) / np.sqrt(2 * np.pi) / np.log(2))


def model_feedback_pmf(i_design: float, w_d: int, tol: float = 1e-4) -> FeedbackModel:
    """Symmetric discrete feedback channel with ``I(D;T_d)`` close to ``i_design``.

    The LLR spread is searched so that the quantized channel itself reaches
    the target; unreachable targets return the closest achievable model.
    """
    if not 0.0 <= i_design <= 1.0:
        raise ValueError("i_design must lie in [0, 1]")
    levels = 1 << w_d
    if i_design <= 0.0:
        pmf = np.zeros((2, levels))
        if levels == 2:
            pmf[:, :] = 0.25
        else:
            pmf[:, levels // 2 - 1:levels // 2 + 1] = 0.25
        thresholds = np.zeros(levels - 1)
        thresholds[: levels // 2 - 1] = -np.inf
        thresholds[levels // 2:] = np.inf
        return FeedbackModel(thresholds, levels, pmf, 0.0, 0.0, 0.0)
    f = lambda s: _quantized_feedback(s, levels)[2] - i_design
    lo, hi = 1e-3, 60.0
    if f(hi) < 0:
        sigma = hi
        log.warning("feedback target I=%.4f unreachable with %d levels", i_design, levels)
    else:
        sigma = optimize.brentq(f, lo, hi, xtol=tol)
    thresholds, pmf, info = _quantized_feedback(sigma, levels)
    return FeedbackModel(thresholds, levels, pmf, info, sigma, i_design)


# ------------------------------------------------------------- design core


def _compress_axes(joint, mapping, sizes_in, out_size):
    """Collapse two leading observed axes of ``joint[x, a, b, ...]`` through ``mapping[a, b]``."""
    X = joint.shape[0]
    rest = joint.shape[3:]
    flat = joint.reshape(X, sizes_in[0] * sizes_in[1], -1)
    out = np.zeros((X, out_size, flat.shape[2]))
    idx = mapping.reshape(-1)
    for x in range(X):
        for c in range(flat.shape[2]):
            out[x, :, c] = np.bincount(idx, weights=flat[x, :, c], minlength=out_size)
    return out.reshape((X, out_size) + rest)


def _cluster(joint_xy, T, symmetric, seed, init, restarts, kl_iters, max_sweeps):
    # joint_xy[x, y...] -> p[y, x]
    X = joint_xy.shape[0]
    p = joint_xy.reshape(X, -1).T
    p = p / p.sum()
    # a warm start keeps the message labels of the previous recursion, which
    # the next table relies on; random restarts would permute them
    m = ib_cluster(p, T, restarts=restarts if init is None else 0, symmetric=symmetric, seed=seed,
                   init=init, kl_iters=kl_iters, max_sweeps=max_sweeps)
    return m


def _natural_init(shape, T):
    """Warm start for ``(u, c) -> u`` tables: keep the first input."""
    u = np.arange(shape[0])[:, None] * np.ones((1, shape[1]), dtype=np.int64)
    return (u * T // shape[0]).reshape(-1)


@dataclass
class DirectionResult:
    stage: LutStage
    trace: list               # I(S';T'_alpha) per recursion, bits
    static_trace: list        # same with the static LUT
    joint: np.ndarray         # steady-state p(state, message) with the static LUT
    inter_joint: np.ndarray | None = None  # p(state, u) of the reduced intermediate
    warnings: list = field(default_factory=list)


@dataclass
class DesignOptions:
    recursions: int = 50
    static_recursions: int = 50
    restarts: int = 1
    kl_iters: int = 30
    max_sweeps: int = 20
    seed: int = 0
    order: str = "rd"          # reduced update absorbs (t_r then t_d) or (t_d then t_r)
    symmetric: bool = True
    converge_tol: float = 1e-3


def _forward_joint(p_sm, p_tr, fb, trellis: TrellisSpec, reverse: bool):
    """Observed joint of one recursion step, shape (X, A, R, D).

    Forward: relevant s', p(s', a, r, d) = sum_{d_{k-L}} p(r|s,d_k) p(d_k,d) p(s,a).
    Backward: relevant s, p(s, b', r, d) = sum_{d_k} p(r|s,d_k) p(d_k,d) p(s',b').
    """
    S, M = trellis.num_states, trellis.num_symbols
    A = p_sm.shape[1]
    out = np.zeros((S, A, p_tr.shape[2], fb.shape[1]))
    for s in range(S):
        for j in range(M):
            ns = trellis.next_state[s, j]
            rd = p_tr[s, j][:, None] * fb[j][None, :]           # (R, D)
            if reverse:
                out[s] += p_sm[ns][:, None, None] * rd[None]
            else:
                out[ns] += p_sm[s][:, None, None] * rd[None]
    return out


def _apply_stage(joint, stage: LutStage, order: str):
    """Push p(x, a, r, d) through a stage; returns (p(x, t'), p(x, u) or None)."""
    if stage.kind == "full":
        T = stage.out_size
        X = joint.shape[0]
        idx = stage.tables[0].reshape(-1)
        flat = joint.reshape(X, -1)
        return np.stack([np.bincount(idx, weights=flat[x], minlength=T) for x in range(X)]), None
    t1, t2 = stage.tables
    if order == "rd":
        j1 = joint
    else:
        j1 = joint.transpose(0, 1, 3, 2)
    inter = _compress_axes(j1, t1, t1.shape, t2.shape[0])      # (X, U, third)
    u_marg = inter.sum(axis=2)
    X = joint.shape[0]
    idx = t2.reshape(-1)
    flat = inter.reshape(X, -1)
    out = np.stack([np.bincount(idx, weights=flat[x], minlength=stage.out_size) for x in range(X)])
    return out, u_marg


def _design_step(joint, T, structure_kind, opts: DesignOptions, prev: LutStage | None, seed):
    X, A, R, D = joint.shape
    sym = opts.symmetric
    if structure_kind == "full":
        init = None if prev is None else prev.tables[0].reshape(-1)
        m = _cluster(joint, T, sym, seed, init, opts.restarts, opts.kl_iters, opts.max_sweeps)
        return LutStage("full", (m.assign.reshape(A, R, D),), T), m.info
    j1 = joint if opts.order == "rd" else joint.transpose(0, 1, 3, 2)
    B, C = j1.shape[2], j1.shape[3]
    first = j1.sum(axis=3)                                      # (X, A, B)
    init1 = None if prev is None else prev.tables[0].reshape(-1)
    m1 = _cluster(first, A, sym, seed, init1, opts.restarts, opts.kl_iters, opts.max_sweeps)
    t1 = m1.assign.reshape(A, B)
    second = _compress_axes(j1, t1, (A, B), A)                  # (X, U, C)
    inits = _natural_init((A, C), T) if prev is None else prev.tables[1].reshape(-1)
    m2 = _cluster(second, T, sym, seed + 1, inits, opts.restarts, opts.kl_iters, opts.max_sweeps)
    return LutStage("reduced", (t1, m2.assign.reshape(A, C)), T), m2.info


def _design_direction(p_tr, fb, trellis, T, kind, opts: DesignOptions, reverse: bool):
    S = trellis.num_states
    p_sm = np.full((S, T), 1.0 / (S * T))
    stage, trace = None, []
    for i in range(opts.recursions):
        joint = _forward_joint(p_sm, p_tr, fb, trellis, reverse)
        stage, info = _design_step(joint, T, kind, opts, stage, opts.seed + 101 * i)
        p_sm, _ = _apply_stage(joint, stage, opts.order)
        p_sm = p_sm / p_sm.sum()
        trace.append(info)
    warnings = []
    if len(trace) >= 2 and abs(trace[-1] - trace[-2]) > opts.converge_tol:
        warnings.append(f"I-trace not converged: last change {trace[-1] - trace[-2]:.2e} bits")
    # static design phase: rerun density evolution with the final LUT only
    p_sm = np.full((S, T), 1.0 / (S * T))
    static_trace = []
    inter = None
    for _ in range(opts.static_recursions):
        joint = _forward_joint(p_sm, p_tr, fb, trellis, reverse)
        p_sm, inter = _apply_stage(joint, stage, opts.order)
        p_sm = p_sm / p_sm.sum()
        static_trace.append(mutual_information(p_sm.T))
    return DirectionResult(stage, trace, static_trace, p_sm, inter, warnings)


def design_forward(p_tr, feedback: np.ndarray, widths: Widths, structure: str = "RRR",
                   opts: DesignOptions | None = None, trellis: TrellisSpec | None = None,
                   spec: ChannelSpec | None = None) -> DirectionResult:
    """Design the forward LUT over ``opts.recursions`` density-evolution steps."""
    opts = opts or DesignOptions()
    trellis = trellis or build_trellis(spec)
    kind = "full" if structure[0] == "F" else "reduced"
    return _design_direction(p_tr, feedback, trellis, 1 << widths.w_alpha, kind, opts, reverse=False)


def design_backward(p_tr, feedback: np.ndarray, widths: Widths, structure: str = "RRR",
                    opts: DesignOptions | None = None, trellis: TrellisSpec | None = None,
                    spec: ChannelSpec | None = None) -> DirectionResult:
    """Mirror of :func:`design_forward` on the time-reversed trellis."""
    opts = opts or DesignOptions()
    trellis = trellis or build_trellis(spec)
    kind = "full" if structure[1] == "F" else "reduced"
    return _design_direction(p_tr, feedback, trellis, 1 << widths.w_beta, kind, opts, reverse=True)


def _llr_table(p_dt):
    with np.errstate(divide="ignore", invalid="ignore"):
        L = np.log(p_dt[0]) - np.log(p_dt[1])
    dead = np.flatnonzero(p_dt.sum(axis=0) <= 0)
    L[dead] = 0.0
    return np.clip(np.nan_to_num(L, nan=0.0, posinf=LLR_CLIP, neginf=-LLR_CLIP), -LLR_CLIP, LLR_CLIP), dead


def design_final(fwd: DirectionResult, p_tr, bwd: DirectionResult, widths: Widths,
                 structure: str = "RRR", trellis: TrellisSpec | None = None,
                 opts: DesignOptions | None = None, feedback: np.ndarray | None = None):
    """Design the output LUT and its LLR table.

    Full: ``(t_alpha, t_r, t'_beta) -> t_e``.  Reduced: ``(u, t'_beta) -> t_e``
    where ``u`` is the reduced forward intermediate that has absorbed ``r_k``
    but not the feedback of ``d_k``, so the output stays extrinsic.  With the
    ``dr`` order the forward output ``t'_alpha`` is used instead.
    Returns ``(stage, llr_table, p(d, t_e), flagged_levels)``.
    """
    opts = opts or DesignOptions()
    S, M = trellis.num_states, trellis.num_symbols
    p_sa = fwd.joint / fwd.joint.sum()                          # p(s, t_alpha) at time k
    p_b = bwd.joint / np.maximum(bwd.joint.sum(axis=1, keepdims=True), 1e-300)  # p(t'_beta | s')
    TE = 1 << widths.w_e
    A, B, R = p_sa.shape[1], p_b.shape[1], p_tr.shape[2]
    pd = 1.0 / M
    if structure[2] == "F":
        joint = np.zeros((M, A, R, B))
        for s in range(S):
            for j in range(M):
                ns = trellis.next_state[s, j]
                joint[j] += pd * (p_sa[s][:, None] * p_tr[s, j][None, :])[:, :, None] * p_b[ns][None, None, :]
        p = joint.reshape(M, -1).T
        m = llr_threshold_cluster(p / p.sum(), TE, symmetric=opts.symmetric)
        stage = LutStage("full", (m.assign.reshape(A, R, B),), TE)
    else:
        if fwd.stage.kind != "reduced":
            raise DesignError("reduced final update needs a reduced forward update")
        t1 = fwd.stage.tables[0]
        U = fwd.stage.tables[1].shape[0]
        q = np.zeros((S, M, U))
        if opts.order == "rd":
            # u = T1[t_alpha, t_r] absorbs r_k only
            idx = t1.reshape(-1)
            for s in range(S):
                for j in range(M):
                    w = (p_sa[s][:, None] * p_tr[s, j][None, :]).reshape(-1)
                    q[s, j] = pd * np.bincount(idx, weights=w, minlength=U)
            joint = np.zeros((M, U, B))
            for s in range(S):
                for j in range(M):
                    joint[j] += q[s, j][:, None] * p_b[trellis.next_state[s, j]][None, :]
        else:
            if feedback is None:
                raise DesignError("dr order needs the feedback pmf for the final design")
            # t'_alpha after both absorptions, relevant d_k via the successor state
            pa_next = fwd.joint / fwd.joint.sum()               # p(s', t'_alpha)
            joint = np.zeros((M, pa_next.shape[1], B))
            for ns in range(S):
                j = trellis.newest_symbol(ns) if trellis.memory else 0
                joint[j] += pa_next[ns][:, None] * p_b[ns][None, :]
        p = joint.reshape(M, -1).T
        m = llr_threshold_cluster(p / p.sum(), TE, symmetric=opts.symmetric)
        stage = LutStage("reduced", (m.assign.reshape(joint.shape[1], B),), TE)
    p_dt = compress_joint(p / p.sum(), m).T
    llr, dead = _llr_table(p_dt)
    return stage, llr, p_dt, dead


# ----------------------------------------------------------------- runtime


@njit(cache=True)
def _fwd_full(T, t_r, t_d, init):
    N = len(t_r)
    a = np.empty(N + 1, dtype=np.int64)
    a[0] = init
    for k in range(N):
        a[k + 1] = T[a[k], t_r[k], t_d[k]]
    return a


@njit(cache=True)
def _fwd_reduced(T1, T2, first, second, init):
    N = len(first)
    a = np.empty(N + 1, dtype=np.int64)
    u = np.empty(N, dtype=np.int64)
    a[0] = init
    for k in range(N):
        u[k] = T1[a[k], first[k]]
        a[k + 1] = T2[u[k], second[k]]
    return a, u


@njit(cache=True)
def _bwd_full(T, t_r, t_d, init):
    N = len(t_r)
    b = np.empty(N + 1, dtype=np.int64)
    b[N] = init
    for k in range(N - 1, -1, -1):
        b[k] = T[b[k + 1], t_r[k], t_d[k]]
    return b


@njit(cache=True)
def _bwd_reduced(T1, T2, first, second, init):
    N = len(first)
    b = np.empty(N + 1, dtype=np.int64)
    b[N] = init
    for k in range(N - 1, -1, -1):
        b[k] = T2[T1[b[k + 1], first[k]], second[k]]
    return b


@njit(cache=True)
def _final_full(T, a, t_r, b):
    N = len(t_r)
    out = np.empty(N, dtype=np.int64)
    for k in range(N):
        out[k] = T[a[k], t_r[k], b[k + 1]]
    return out


@njit(cache=True)
def _final_reduced(T, u, b):
    N = len(u)
    out = np.empty(N, dtype=np.int64)
    for k in range(N):
        out[k] = T[u[k], b[k + 1]]
    return out


@dataclass
class EqualizerDesign:
    widths: Widths
    structure: str
    order: str
    channel_quantizer: ChannelQuantizer
    feedback: FeedbackModel
    forward: LutStage
    backward: LutStage
    final: LutStage
    llr_table: np.ndarray
    p_dte: np.ndarray
    forward_init: int          # message for the known preamble state
    neutral_alpha: int
    neutral_beta: int
    meta: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)

    @property
    def entries(self) -> dict:
        return {"forward": self.forward.entries, "backward": self.backward.entries,
                "final": self.final.entries}


def _neutral_index(joint):
    """Message whose state posterior is closest to uniform (lowest index on ties)."""
    pt = joint.sum(axis=0)
    S = joint.shape[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = joint / pt[None, :]
        kl = np.nansum(np.where(cond > 0, cond * np.log(cond * S), 0.0), axis=0)
    kl = np.where(pt > 0, kl, np.inf)
    return int(np.flatnonzero(kl <= kl.min() + 1e-12)[0])


def _preamble_index(joint):
    pt = joint.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(pt > 0, joint[0] / pt, -1.0)
    return int(np.argmax(cond))


def run_forward(design: EqualizerDesign, t_r, t_d, init):
    st = design.forward
    if st.kind == "full":
        return _fwd_full(st.tables[0], t_r, t_d, init), None
    if design.order == "rd":
        return _fwd_reduced(st.tables[0], st.tables[1], t_r, t_d, init)
    return _fwd_reduced(st.tables[0], st.tables[1], t_d, t_r, init)


def run_backward(design: EqualizerDesign, t_r, t_d, init):
    st = design.backward
    if st.kind == "full":
        return _bwd_full(st.tables[0], t_r, t_d, init)
    if design.order == "rd":
        return _bwd_reduced(st.tables[0], st.tables[1], t_r, t_d, init)
    return _bwd_reduced(st.tables[0], st.tables[1], t_d, t_r, init)


def _final(design, a, u, t_r, b):
    st = design.final
    if st.kind == "full":
        return _final_full(st.tables[0], a, t_r, b)
    if design.order == "rd":
        return _final_reduced(st.tables[0], u, b)
    return _final_reduced(st.tables[0], a[1:], b)


def run_equalizer(design: EqualizerDesign, t_r, t_d=None, forward_init: int | None = None,
                  backward_init: int | None = None):
    """Table-driven forward, backward and final pass; returns ``(t_e, L_e)``."""
    t_r = np.ascontiguousarray(t_r, dtype=np.int64)
    if t_d is None:
        t_d = np.full(len(t_r), design.feedback.neutral, dtype=np.int64)
    t_d = np.ascontiguousarray(t_d, dtype=np.int64)
    if len(t_d) != len(t_r):
        raise ValueError("t_r and t_d lengths differ")
    fi = design.forward_init if forward_init is None else forward_init
    bi = design.neutral_beta if backward_init is None else backward_init
    a, u = run_forward(design, t_r, t_d, fi)
    b = run_backward(design, t_r, t_d, bi)
    t_e = _final(design, a, u, t_r, b)
    return t_e, design.llr_table[t_e]


def run_subblocks(design: EqualizerDesign, t_r, t_d=None, block: int = 64, overlap: int = 10):
    """Sub-block equalization with ``overlap`` warm-up symbols on each side.

    Each block starts its recursions from the neutral message unless the
    warm-up window reaches the frame edge, where the full-frame
    initialization applies.  Only the block's own outputs are kept.
    """
    if block < 1 or overlap < 0:
        raise ValueError("need block >= 1 and overlap >= 0")
    t_r = np.ascontiguousarray(t_r, dtype=np.int64)
    N = len(t_r)
    if t_d is None:
        t_d = np.full(N, design.feedback.neutral, dtype=np.int64)
    t_d = np.ascontiguousarray(t_d, dtype=np.int64)
    t_e = np.empty(N, dtype=np.int64)
    for k0 in range(0, N, block):
        k1 = min(k0 + block, N)
        lo, hi = max(0, k0 - overlap), min(N, k1 + overlap)
        fi = design.forward_init if lo == 0 else design.neutral_alpha
        te, _ = run_equalizer(design, t_r[lo:hi], t_d[lo:hi], forward_init=fi,
                              backward_init=design.neutral_beta)
        t_e[k0:k1] = te[k0 - lo:k1 - lo]
    return t_e, design.llr_table[t_e]


# ------------------------------------------------------------ full design


def design_equalizer(spec: ChannelSpec, widths: Widths, structure: str = "RRR", i_design: float = 0.0,
                     opts: DesignOptions | None = None, grid_points: int = 1000) -> EqualizerDesign:
    """Channel quantizer, forward, backward and final design for one turbo iteration."""
    if structure not in STRUCTURES:
        raise ValueError(f"structure must be one of {STRUCTURES}")
    opts = opts or DesignOptions()
    if opts.symmetric and not _is_antipodal(spec):
        opts = DesignOptions(**{**opts.__dict__, "symmetric": False})
    trellis = build_trellis(spec)
    cq = design_channel_quantizer(spec, widths.w_r, grid_points=grid_points, trellis=trellis)
    fbm = model_feedback_pmf(i_design, widths.w_d)
    fwd = design_forward(cq.p_tr, fbm.pmf, widths, structure, opts, trellis)
    bwd = design_backward(cq.p_tr, fbm.pmf, widths, structure, opts, trellis)
    final, llr, p_dte, dead = design_final(fwd, cq.p_tr, bwd, widths, structure, trellis, opts, fbm.pmf)
    report = {
        "I_channel": cq.info,
        "I_feedback": fbm.info,
        "forward_trace": fwd.trace,
        "backward_trace": bwd.trace,
        "forward_static": fwd.static_trace,
        "backward_static": bwd.static_trace,
        "static_loss_forward": fwd.trace[-1] - fwd.static_trace[-1],
        "static_loss_backward": bwd.trace[-1] - bwd.static_trace[-1],
        "I_output": mutual_information(p_dte.T),
        "dead_output_levels": dead.tolist(),
        "warnings": fwd.warnings + bwd.warnings,
    }
    for w in report["warnings"]:
        log.warning(w)
    meta = {"taps": list(spec.taps), "noise_psd": spec.noise_psd, "i_design": i_design}
    return EqualizerDesign(
        widths=widths, structure=structure, order=opts.order, channel_quantizer=cq, feedback=fbm,
        forward=fwd.stage, backward=bwd.stage, final=final, llr_table=llr, p_dte=p_dte,
        forward_init=_preamble_index(fwd.joint), neutral_alpha=_neutral_index(fwd.joint),
        neutral_beta=_neutral_index(bwd.joint), meta=meta, report=report)


# ------------------------------------------------------------ serialization

MAGIC = b"IBEQ"
VERSION = 1


def _stage_header(stage: LutStage):
    return {"kind": stage.kind, "out_size": stage.out_size, "shapes": [list(t.shape) for t in stage.tables]}


def _stage_arrays(stage: LutStage):
    return [np.ascontiguousarray(t, dtype="<u2") for t in stage.tables]


def save_design(design: EqualizerDesign, path, extra: dict | None = None):
    """Binary bundle: magic, u16 version, u32 header length, JSON header, LUTs, LLR table (f8)."""
    w = design.widths
    header = {
        "widths": {"w_r": w.w_r, "w_d": w.w_d, "w_alpha": w.w_alpha, "w_beta": w.w_beta, "w_e": w.w_e},
        "structure": design.structure,
        "order": design.order,
        "meta": design.meta,
        "forward": _stage_header(design.forward),
        "backward": _stage_header(design.backward),
        "final": _stage_header(design.final),
        "forward_init": design.forward_init,
        "neutral_alpha": design.neutral_alpha,
        "neutral_beta": design.neutral_beta,
        "channel_thresholds": design.channel_quantizer.thresholds.tolist(),
        "channel_info": design.channel_quantizer.info,
        "channel_levels": design.channel_quantizer.levels,
        "p_tr_shape": list(design.channel_quantizer.p_tr.shape),
        "feedback": {"thresholds": [float(x) for x in design.feedback.thresholds],
                     "levels": design.feedback.levels, "pmf": design.feedback.pmf.tolist(),
                     "info": design.feedback.info, "sigma": design.feedback.sigma,
                     "target": design.feedback.target},
        "p_dte": design.p_dte.tolist(),
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    parts = [MAGIC, np.uint16(VERSION).tobytes(), np.uint32(len(blob)).tobytes(), blob]
    for st in (design.forward, design.backward, design.final):
        parts += [a.tobytes() for a in _stage_arrays(st)]
    parts.append(np.ascontiguousarray(design.channel_quantizer.p_tr, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(design.llr_table, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))
    Path(str(path) + ".txt").write_text(manifest(design, extra))


def load_design(path) -> EqualizerDesign:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError("not a design bundle")
    version = int(np.frombuffer(raw[4:6], "<u2")[0])
    if version != VERSION:
        raise ValueError(f"unsupported bundle version {version}")
    n = int(np.frombuffer(raw[6:10], "<u4")[0])
    h = json.loads(raw[10:10 + n])
    pos = 10 + n

    def take(shape, dtype):
        nonlocal pos
        count = int(np.prod(shape))
        a = np.frombuffer(raw, dtype, count=count, offset=pos).reshape(shape)
        pos += count * np.dtype(dtype).itemsize
        return a

    stages = []
    for key in ("forward", "backward", "final"):
        sh = h[key]
        tables = tuple(take(s, "<u2").astype(np.int64) for s in sh["shapes"])
        stages.append(LutStage(sh["kind"], tables, sh["out_size"]))
    p_tr = take(h["p_tr_shape"], "<f8").copy()
    llr = take([1 << h["widths"]["w_e"]], "<f8").copy()
    if pos != len(raw):
        raise ValueError("trailing bytes in design bundle")
    fb = h["feedback"]
    return EqualizerDesign(
        widths=Widths(**h["widths"]), structure=h["structure"], order=h["order"],
        channel_quantizer=ChannelQuantizer(np.array(h["channel_thresholds"]), h["channel_levels"],
                                           h["channel_info"], p_tr),
        feedback=FeedbackModel(np.array(fb["thresholds"], dtype=float), fb["levels"], np.array(fb["pmf"]),
                               fb["info"], fb["sigma"], fb["target"]),
        forward=stages[0], backward=stages[1], final=stages[2], llr_table=llr,
        p_dte=np.array(h["p_dte"]), forward_init=h["forward_init"], neutral_alpha=h["neutral_alpha"],
        neutral_beta=h["neutral_beta"], meta=h["meta"])


def manifest(design: EqualizerDesign, extra: dict | None = None) -> str:
    w = design.widths
    counts = entry_counts(w)
    lines = [
        f"structure = {design.structure}",
        f"order = {design.order}",
        f"widths = w_r={w.w_r} w_d={w.w_d} w_alpha={w.w_alpha} w_beta={w.w_beta} w_e={w.w_e}",
        f"entries.forward = {design.forward.entries}",
        f"entries.backward = {design.backward.entries}",
        f"entries.final = {design.final.entries}",
    ]
    lines += [f"table.{k} = {v}" for k, v in counts.items()]
    for k, v in design.meta.items():
        lines.append(f"meta.{k} = {v}")
    for k, v in (extra or {}).items():
        lines.append(f"extra.{k} = {v}")
    rep = design.report
    for k in ("I_channel", "I_feedback", "I_output", "static_loss_forward", "static_loss_backward"):
        if k in rep:
            lines.append(f"report.{k} = {rep[k]:.6f}")
    for k in ("forward_trace", "backward_trace"):
        if k in rep:
            lines.append(f"report.{k} = " + " ".join(f"{x:.6f}" for x in rep[k]))
    return "\n".join(lines) + "\n"
