"""Conventional log-domain BCJR equalizers and a brute-force posterior oracle."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .channel import (ChannelSpec, TrellisSpec, build_trellis, ungerboeck_front_end,
                      ungerboeck_interference, window_gram)

LN2 = math.log(2.0)


def maxstar(a, b, mode: str = "exact"):
    """Jacobian logarithm ``max(a,b) + log(1 + exp(-|a-b|))``; ``approx`` drops the correction."""
    if mode == "approx":
        return np.maximum(a, b)
    if mode != "exact":
        raise ValueError(f"unknown maxstar mode {mode!r}")
    return np.maximum(a, b) + np.log1p(np.exp(-np.abs(np.subtract(a, b))))


def maxstar_n(values, mode: str = "exact"):
    """Left fold of :func:`maxstar` over the first axis."""
    values = np.asarray(values)
    acc = values[0]
    for v in values[1:]:
        acc = maxstar(acc, v, mode)
    return acc


@njit(cache=True)
def _ms(a, b, exact):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    m = a if a > b else b
    if exact:
        return m + math.log1p(math.exp(-abs(a - b)))
    return m


@njit(cache=True)
def _bcjr_kernel(gamma, logprior, next_state, alpha0, exact):
    # gamma: (N, S, M) scaled branch log-likelihoods; logprior: (N, M)
    N, S, M = gamma.shape
    alpha = np.full((N + 1, S), -np.inf)
    beta = np.full((N + 1, S), -np.inf)
    alpha[0, :] = alpha0
    for k in range(N):
        for s in range(S):
            a = alpha[k, s]
            if a == -np.inf:
                continue
            for j in range(M):
                ns = next_state[s, j]
                alpha[k + 1, ns] = _ms(alpha[k + 1, ns], a + gamma[k, s, j] + logprior[k, j], exact)
        ref = -np.inf
        for s in range(S):
            if alpha[k + 1, s] > ref:
                ref = alpha[k + 1, s]
        for s in range(S):
            alpha[k + 1, s] -= ref
    beta[N, :] = 0.0
    for k in range(N - 1, -1, -1):
        for s in range(S):
            acc = -np.inf
            for j in range(M):
                acc = _ms(acc, gamma[k, s, j] + logprior[k, j] + beta[k + 1, next_state[s, j]], exact)
            beta[k, s] = acc
        ref = -np.inf
        for s in range(S):
            if beta[k, s] > ref:
                ref = beta[k, s]
        for s in range(S):
            beta[k, s] -= ref
    # log posterior of each symbol value, prior excluded
    logapp = np.full((N, M), -np.inf)
    for k in range(N):
        for s in range(S):
            a = alpha[k, s]
            if a == -np.inf:
                continue
            for j in range(M):
                logapp[k, j] = _ms(logapp[k, j], a + gamma[k, s, j] + beta[k + 1, next_state[s, j]], exact)
    return logapp, alpha, beta


def prior_logprob(prior_llr, n: int, num_symbols: int = 2) -> np.ndarray:
    """Per-symbol log priors from binary LLRs ``log p(+1)/p(-1)`` (None -> uniform)."""
    if prior_llr is None:
        return np.full((n, num_symbols), -math.log(num_symbols))
    L = np.asarray(prior_llr, dtype=float)
    if L.ndim == 2:
        return L
    out = np.empty((n, 2))
    out[:, 0] = -np.logaddexp(0.0, -L)
    out[:, 1] = -np.logaddexp(0.0, L)
    return out


def branch_metric(r, spec: ChannelSpec, trellis: TrellisSpec | None = None, model: str = "forney"):
    """Unscaled branch metrics for every time step and transition, shape (N, S, M).

    Forney: ``-|r_k - x_ch|^2``.  Ungerboeck: ``2 Re{conj(d_k) r'_k} - gamma_{s,d_k}``
    with window-corrected correlation terms at the frame end, so both models
    give identical posteriors.
    """
    trellis = trellis or build_trellis(spec)
    r = np.asarray(r)
    if model == "forney":
        return -np.abs(r[:, None, None] - trellis.output[None, :, :]) ** 2
    if model != "ungerboeck":
        raise ValueError(f"unknown observation model {model!r}")
    rp, _ = ungerboeck_front_end(r, spec)
    G = window_gram(spec.taps, len(r))
    alphabet = np.asarray(spec.alphabet)
    data = 2.0 * np.real(np.conj(alphabet)[None, :] * rp[:, None])  # (N, M)
    out = np.empty((len(r), trellis.num_states, trellis.num_symbols))
    cache = {}
    for k in range(len(r)):
        key = tuple(np.round(G[k], 15))
        if key not in cache:
            cache[key] = ungerboeck_interference(trellis, spec, G[k])
        out[k] = data[k][None, :] - cache[key]
    return out


def initial_metric(r, spec: ChannelSpec, trellis: TrellisSpec, model: str, known_start: bool):
    """Log forward metric at k=0.

    A known preamble pins state 0.  For an unknown start every state is
    allowed; the Ungerboeck model then needs the terms that involve only the
    pre-frame symbols, which the Forney model carries inside its first L
    branch metrics.
    """
    S = trellis.num_states
    if known_start:
        a0 = np.full(S, -np.inf)
        a0[0] = 0.0
        return a0
    a0 = np.zeros(S)
    if model != "ungerboeck" or trellis.memory == 0:
        return a0
    h = np.asarray(spec.taps)
    L, n = trellis.memory, len(r)
    alphabet = np.asarray(spec.alphabet)
    # pre-frame positions j = -L..-1 see observations i = 0..n-1 through h_{i-j}
    pos = np.arange(-L, 0)
    H = np.zeros((n, L), dtype=h.dtype)
    for c, j in enumerate(pos):
        for i in range(n):
            if 0 <= i - j <= L:
                H[i, c] = h[i - j]
    corr = np.conj(H).T @ np.asarray(r)
    gram = np.conj(H).T @ H
    for s in range(S):
        d = alphabet[list(trellis.state_symbols(s))]
        a0[s] = np.real(2 * np.conj(d) @ corr - np.conj(d) @ gram @ d)
    return a0 / spec.noise_psd


def _run_bcjr(r, spec, trellis, prior_llr, mode, model, known_start):
    gamma = branch_metric(r, spec, trellis, model) / spec.noise_psd
    logprior = prior_logprob(prior_llr, len(r), trellis.num_symbols)
    alpha0 = initial_metric(r, spec, trellis, model, known_start)
    logapp, _, _ = _bcjr_kernel(np.ascontiguousarray(gamma, dtype=float), logprior,
                                trellis.next_state, alpha0, mode == "exact")
    return logapp, logprior


def bcjr(r, spec: ChannelSpec, prior_llr=None, mode: str = "exact", model: str = "forney",
         known_start: bool = True, extrinsic: bool = True, trellis: TrellisSpec | None = None):
    """Symbol-wise log-MAP (``exact``) or max-log (``approx``) equalization.

    Returns LLRs ``log p(d=+1|.)/p(d=-1|.)`` for binary alphabets.  With
    ``extrinsic`` the prior LLR is excluded from the output.
    """
    trellis = trellis or build_trellis(spec)
    r = np.asarray(r)
    logapp, logprior = _run_bcjr(r, spec, trellis, prior_llr, mode, model, known_start)
    if not extrinsic:
        logapp = logapp + logprior
    if trellis.num_symbols != 2:
        return logapp - maxstar_n(logapp.T, "exact")[:, None]
    return logapp[:, 0] - logapp[:, 1]


def bcjr_log_posteriors(r, spec: ChannelSpec, prior_llr=None, mode: str = "exact",
                        model: str = "forney", known_start: bool = True):
    """Normalized log posteriors ``log p(d_k = a_j | r)``, shape (N, M)."""
    trellis = build_trellis(spec)
    logapp, logprior = _run_bcjr(np.asarray(r), spec, trellis, prior_llr, mode, model, known_start)
    logapp = logapp + logprior
    norm = np.logaddexp.reduce(logapp, axis=1) if mode == "exact" else logapp.max(axis=1)
    return logapp - norm[:, None]


BRUTE_FORCE_LIMIT = 16


def brute_force_posterior(r, spec: ChannelSpec, prior_llr=None, known_start: bool = True):
    """Exact symbol posteriors by enumerating every transmitted sequence.

    Without ``known_start`` the L symbols preceding the frame are enumerated
    too, uniformly weighted.  Returns ``log p(d_k = a_j | r)``, shape (N, M).
    """
    r = np.asarray(r, dtype=float)
    N, L = len(r), spec.memory
    if N > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} symbols, got {N}")
    alphabet = np.asarray(spec.alphabet)
    M = len(alphabet)
    logprior = prior_logprob(prior_llr, N, M)
    head = 0 if known_start else L
    idx = np.array(list(itertools.product(range(M), repeat=N + head)), dtype=np.int64)
    if known_start:
        full = np.concatenate([np.zeros((len(idx), L), dtype=np.int64), idx], axis=1)
    else:
        full = idx
    sym = alphabet[full]
    h = np.asarray(spec.taps)
    x = np.zeros((len(idx), N), dtype=np.result_type(sym.dtype, h.dtype))
    for l in range(L + 1):
        x += h[l] * sym[:, L - l:L - l + N]
    data_idx = full[:, L:]
    loglik = -np.sum(np.abs(r[None, :] - x) ** 2, axis=1) / spec.noise_psd
    loglik = loglik + logprior[np.arange(N)[None, :], data_idx].sum(axis=1)
    out = np.full((N, M), -np.inf)
    for k in range(N):
        for j in range(M):
            sel = data_idx[:, k] == j
            if np.any(sel):
                out[k, j] = np.logaddexp.reduce(loglik[sel])
    return out - np.logaddexp.reduce(out, axis=1)[:, None]


# ---------------------------------------------------------------- fixed point


@dataclass(frozen=True)
class FixedPointFormat:
    """Uniform channel quantizer of spacing ``delta`` and saturating metrics."""

    delta: float
    w_r: int = 7
    w_alpha_bar: int = 11

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    def metric_bits(self, memory: int) -> int:
        """Stored bits per metric vector; one entry is always zero."""
        return (2 ** memory - 1) * self.w_alpha_bar

    @property
    def metric_range(self):
        return -(1 << (self.w_alpha_bar - 1)), (1 << (self.w_alpha_bar - 1)) - 1

    @property
    def channel_range(self):
        return -(1 << (self.w_r - 1)), (1 << (self.w_r - 1)) - 1

    @classmethod
    def for_channel(cls, spec: ChannelSpec, w_r: int = 7, w_alpha_bar: int = 11, span_sigma: float = 3.0):
        """Spacing such that the ``w_r``-bit grid spans ``+-(max|x_ch| + 3 sigma)``."""
        xmax = float(np.max(np.abs(build_trellis(spec).output)))
        delta = 2.0 * (xmax + span_sigma * spec.sigma) / (1 << w_r)
        return cls(delta=delta, w_r=w_r, w_alpha_bar=w_alpha_bar)


def quantize_channel(r, fmt: FixedPointFormat) -> np.ndarray:
    lo, hi = fmt.channel_range
    return np.clip(np.round(np.asarray(r) / fmt.delta), lo, hi).astype(np.int64)


def prior_table(level_llrs, noise_psd: float, unit: float) -> np.ndarray:
    """Additive prior table ``N_0 * pbar(d|t_d)`` in metric units, shape (2^w_d, 2).

    Uses the symmetric form ``+-L/2``; the per-step constant it drops is
    removed by normalization anyway.
    """
    L = np.asarray(level_llrs, dtype=float)
    half = noise_psd * L / 2.0 / unit
    return np.stack([np.round(half), np.round(-half)], axis=1).astype(np.int64)


@njit(cache=True)
def _sat(v, lo, hi):
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


@njit(cache=True)
def _bcjr_fixed_kernel(gamma, prior, next_state, start_state, lo, hi):
    N, S, M = gamma.shape
    NEG = np.int64(-(1 << 62))
    alpha = np.empty((N + 1, S), dtype=np.int64)
    beta = np.empty((N + 1, S), dtype=np.int64)
    for s in range(S):
        alpha[0, s] = 0 if (start_state < 0 or s == start_state) else lo
    tmp = np.empty(S, dtype=np.int64)
    for k in range(N):
        for s in range(S):
            tmp[s] = NEG
        for s in range(S):
            for j in range(M):
                ns = next_state[s, j]
                # d_k is fixed by the successor when L >= 1, so adding the prior
                # inside the max equals adding it after the max
                v = alpha[k, s] + gamma[k, s, j] + prior[k, j]
                if v > tmp[ns]:
                    tmp[ns] = v
        ref = tmp[0]
        for s in range(S):
            alpha[k + 1, s] = _sat(tmp[s] - ref, lo, hi)
    for s in range(S):
        beta[N, s] = 0
    for k in range(N - 1, -1, -1):
        for s in range(S):
            best = NEG
            for j in range(M):
                v = beta[k + 1, next_state[s, j]] + gamma[k, s, j] + prior[k, j]
                if v > best:
                    best = v
            tmp[s] = best
        ref = tmp[0]
        for s in range(S):
            beta[k, s] = _sat(tmp[s] - ref, lo, hi)
    out = np.empty((N, M), dtype=np.int64)
    for k in range(N):
        for j in range(M):
            best = NEG
            for s in range(S):
                v = alpha[k, s] + gamma[k, s, j] + beta[k + 1, next_state[s, j]]
                if v > best:
                    best = v
            out[k, j] = best
    return out, alpha, beta


def fixed_branch_metric(q, spec: ChannelSpec, fmt: FixedPointFormat, trellis: TrellisSpec,
                        model: str = "ungerboeck") -> np.ndarray:
    """Integer branch metrics in units of ``delta`` from quantized observations."""
    r = np.asarray(q, dtype=float) * fmt.delta
    gbar = branch_metric(r, spec, trellis, model)
    return np.round(gbar / fmt.delta).astype(np.int64)


def bcjr_quantized(r, spec: ChannelSpec, fmt: FixedPointFormat, t_d=None, prior_lut=None,
                   model: str = "ungerboeck", known_start: bool = True, return_metrics: bool = False):
    """Fixed-point max-log BCJR with saturating, normalized metrics.

    ``r`` are observations already on the ``delta`` grid (integers).  The
    feedback ``t_d`` indexes ``prior_lut`` (rows: levels, cols: symbols)
    holding ``N_0 pbar(d|t_d)`` in units of ``delta``.  Returns integer
    extrinsic LLRs in units of ``delta``; multiply by ``delta / N_0`` for
    natural-log LLRs.
    """
    q = np.asarray(r)
    if not np.issubdtype(q.dtype, np.integer):
        if not np.allclose(q, np.round(q)):
            raise ValueError("observations must be aligned to the delta grid (pass integers)")
        q = np.round(q).astype(np.int64)
    trellis = build_trellis(spec)
    gamma = fixed_branch_metric(q, spec, fmt, trellis, model)
    N = len(q)
    if t_d is None or prior_lut is None:
        prior = np.zeros((N, trellis.num_symbols), dtype=np.int64)
    else:
        prior = np.asarray(prior_lut, dtype=np.int64)[np.asarray(t_d)]
    lo, hi = fmt.metric_range
    out, alpha, beta = _bcjr_fixed_kernel(gamma, prior, trellis.next_state,
                                          0 if known_start else -1, lo, hi)
    llr = out[:, 0] - out[:, 1]
    if return_metrics:
        return llr, alpha, beta
    return llr
