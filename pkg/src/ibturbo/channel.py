"""ISI channel model, trellis construction and observation front-ends."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

MAX_STATES = 1 << 16

PRESETS = {
    "epr4": (0.5, 0.5, -0.5, -0.5),
    "ftn": (0.8907, 0.4088, -0.1919, 0.0510, -0.0040, 0.0045,
            -0.0076, 0.0039, -0.0014, 0.0019, -0.0020, 0.0014),
}


class CapacityError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelSpec:
    """Tapped-delay-line channel ``r_k = sum_l h_l d_{k-l} + n_k``.

    ``noise_psd`` is N_0; the real noise variance is N_0/2.  Symbols before
    the start of a frame are the known preamble ``alphabet[0]``.
    """

    taps: tuple
    alphabet: tuple = (1.0, -1.0)
    noise_psd: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "taps", tuple(self.taps))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        if len(self.taps) == 0:
            raise ValueError("taps must be nonempty")
        if len(self.alphabet) < 2:
            raise ValueError("alphabet needs at least two symbols")
        if self.noise_psd < 0:
            raise ValueError("noise_psd must be nonnegative")

    @property
    def memory(self) -> int:
        return len(self.taps) - 1

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.noise_psd / 2.0))

    @property
    def symbol_energy(self) -> float:
        # mean received energy per symbol for i.i.d. unit-energy symbols
        return float(np.sum(np.abs(self.taps) ** 2))

    def with_noise(self, noise_psd: float) -> "ChannelSpec":
        return replace(self, noise_psd=float(noise_psd))


def preset(name: str, noise_psd: float = 1.0) -> ChannelSpec:
    try:
        taps = PRESETS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown channel preset {name!r}; choose from {sorted(PRESETS)}") from None
    return ChannelSpec(taps=taps, noise_psd=noise_psd)


@dataclass(frozen=True)
class TrellisSpec:
    """State-transition tables of the channel trellis.

    A state index packs ``(d_{k-L}, .., d_{k-1})`` in base ``|D|`` with
    ``d_{k-1}`` as the least significant digit; digit value = alphabet index.
    ``next_state[s, j]`` and ``output[s, j]`` give the successor and the
    noiseless output when symbol ``alphabet[j]`` is sent from state ``s``.
    """

    num_states: int
    num_symbols: int
    memory: int
    next_state: np.ndarray
    output: np.ndarray
    prev_state: np.ndarray = field(repr=False)
    prev_symbol: np.ndarray = field(repr=False)

    @property
    def num_transitions(self) -> int:
        return self.num_states * self.num_symbols

    def state_symbols(self, s: int) -> tuple:
        """Alphabet indices ``(d_{k-L}, .., d_{k-1})`` of state ``s``."""
        m, digits = self.num_symbols, []
        for _ in range(self.memory):
            digits.append(s % m)
            s //= m
        return tuple(reversed(digits))

    def newest_symbol(self, s: int) -> int:
        """Alphabet index of ``d_{k-1}`` held in state ``s`` (L >= 1)."""
        return s % self.num_symbols

    def oldest_symbol(self, s: int) -> int:
        return s // self.num_symbols ** (self.memory - 1)

    def complement_state(self, s: int) -> int:
        # valid for binary alphabets: flip every symbol in memory
        return self.num_states - 1 - s


def build_trellis(spec: ChannelSpec, max_states: int = MAX_STATES) -> TrellisSpec:
    L, m = spec.memory, len(spec.alphabet)
    if L < 0:
        raise ValueError("memory must be >= 0")
    if m ** L > max_states:
        raise CapacityError(f"{m}^{L} states exceeds limit {max_states}")
    num_states = m ** L
    alphabet = np.asarray(spec.alphabet)
    taps = np.asarray(spec.taps)
    next_state = np.zeros((num_states, m), dtype=np.int64)
    out_dtype = np.result_type(alphabet.dtype, taps.dtype, float)
    output = np.zeros((num_states, m), dtype=out_dtype)
    prev_state = np.zeros((num_states, m), dtype=np.int64)
    prev_symbol = np.zeros((num_states, m), dtype=np.int64)
    fill = np.zeros(num_states, dtype=np.int64)
    modulus = num_states if L > 0 else 1
    for s in range(num_states):
        digits, x = [], s
        for _ in range(L):
            digits.append(x % m)  # digits[l-1] = index of d_{k-l}
            x //= m
        past = sum(taps[l] * alphabet[digits[l - 1]] for l in range(1, L + 1))
        for j in range(m):
            ns = (s * m + j) % modulus
            next_state[s, j] = ns
            output[s, j] = taps[0] * alphabet[j] + past
            prev_state[ns, fill[ns]] = s
            prev_symbol[ns, fill[ns]] = j
            fill[ns] += 1
    return TrellisSpec(num_states, m, L, next_state, output, prev_state, prev_symbol)


def noiseless(d, spec: ChannelSpec) -> np.ndarray:
    """Convolve a symbol sequence with the taps, preamble included."""
    d = np.asarray(d)
    L = spec.memory
    padded = np.concatenate([np.full(L, spec.alphabet[0], dtype=d.dtype), d])
    return np.convolve(padded, np.asarray(spec.taps))[L:L + len(d)]


def transmit(d, spec: ChannelSpec, seed=None, rng: np.random.Generator | None = None) -> np.ndarray:
    """Pass symbols through the channel and add real AWGN of variance N_0/2."""
    d = np.asarray(d)
    if d.size < 1:
        raise ValueError("empty symbol sequence")
    if not np.all(np.isin(d, spec.alphabet)):
        raise ValueError("symbols outside the alphabet")
    x = noiseless(d, spec)
    if rng is None:
        rng = np.random.default_rng(seed)
    if spec.noise_psd > 0:
        x = x + rng.normal(0.0, spec.sigma, size=x.shape)
    return x


@dataclass(frozen=True)
class UngerboeckModel:
    prefilter: np.ndarray  # h'_l = conj(h_{-l}), stored for l = -L..0
    autocorr: np.ndarray   # g_k for k = -L..L

    @property
    def memory(self) -> int:
        return (len(self.autocorr) - 1) // 2

    def g(self, k: int):
        return self.autocorr[k + self.memory]


def autocorrelation(taps) -> np.ndarray:
    h = np.asarray(taps)
    L = len(h) - 1
    g = np.zeros(2 * L + 1, dtype=np.result_type(h.dtype, float))
    for k in range(-L, L + 1):
        g[k + L] = sum(h[i] * np.conj(h[i - k]) for i in range(len(h)) if 0 <= i - k <= L)
    return g


def ungerboeck_front_end(r, spec: ChannelSpec):
    """Matched-filter the observations: ``r'_k = sum_l conj(h_l) r_{k+l}``.

    Samples past the end of ``r`` are taken as zero.
    """
    r = np.asarray(r)
    h = np.asarray(spec.taps)
    L = spec.memory
    padded = np.concatenate([r, np.zeros(L, dtype=r.dtype)])
    rp = np.zeros(len(r), dtype=np.result_type(r.dtype, h.dtype))
    for l in range(L + 1):
        rp = rp + np.conj(h[l]) * padded[l:l + len(r)]
    model = UngerboeckModel(prefilter=np.conj(h[::-1]), autocorr=autocorrelation(h))
    return rp, model


def window_gram(taps, n: int) -> np.ndarray:
    """Per-position correlation terms of the observed window.

    Row k holds ``G[k, l] = sum_m conj(h_m) h_{m+l}`` restricted to taps that
    land inside observations ``0..n-1``; away from the frame end this equals
    ``g_l``.  Shape ``(n, L+1)``.
    """
    h = np.asarray(taps)
    L = len(h) - 1
    G = np.zeros((n, L + 1), dtype=np.result_type(h.dtype, float))
    for k in range(n):
        for l in range(L + 1):
            G[k, l] = sum(np.conj(h[m]) * h[m + l] for m in range(L + 1 - l) if k + m <= n - 1)
    return G


def ungerboeck_interference(trellis: TrellisSpec, spec: ChannelSpec, gram_row) -> np.ndarray:
    """``gamma_{s,d}`` for every transition given one row of the window Gram.

    Returns ``g_0 |d|^2 + 2 Re{conj(d) sum_{l>=1} g_l d_{k-l}}``.
    """
    alphabet = np.asarray(spec.alphabet)
    out = np.zeros((trellis.num_states, trellis.num_symbols))
    for s in range(trellis.num_states):
        past = trellis.state_symbols(s)  # oldest first
        acc = 0.0
        for l in range(1, trellis.memory + 1):
            acc = acc + gram_row[l] * alphabet[past[-l]]
        for j in range(trellis.num_symbols):
            d = alphabet[j]
            out[s, j] = np.real(gram_row[0] * abs(d) ** 2 + 2 * np.conj(d) * acc)
    return out


def truncate_taps(spec: ChannelSpec, new_memory: int) -> ChannelSpec:
    """Keep taps ``h_0..h_{L'}``; energy is not renormalized."""
    if not 0 <= new_memory <= spec.memory:
        raise ValueError(f"truncation memory {new_memory} outside [0, {spec.memory}]")
    return replace(spec, taps=spec.taps[: new_memory + 1])
