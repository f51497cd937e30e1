"""Information-bottleneck machinery for deterministic quantizer design.

Joint distributions are dense arrays ``p[y, x]`` with the observed variable
on the first axis and the relevant variable on the second.  All mutual
information values are in bits.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

PMF_TOL = 1e-9


def check_pmf(p, tol: float = PMF_TOL) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 2:
        raise ValueError("joint pmf must be two-dimensional")
    if np.any(p < 0):
        raise ValueError("joint pmf has negative entries")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"joint pmf sums to {p.sum():.12g}")
    return p


def mutual_information(p) -> float:
    """I(X;Y) in bits of a joint table; ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    py = p.sum(axis=1, keepdims=True)
    px = p.sum(axis=0, keepdims=True)
    nz = p > 0
    return float(np.sum(p[nz] * np.log2(p[nz] / (py @ px)[nz])))


@dataclass
class Mapping:
    """Deterministic quantizer ``y -> assign[y]`` onto ``num_clusters`` labels."""

    assign: np.ndarray
    num_clusters: int
    info: float = float("nan")          # I(X;T) in bits, when known
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    boundaries: np.ndarray | None = None  # cell starts for contiguous quantizers

    def __post_init__(self):
        self.assign = np.asarray(self.assign, dtype=np.int64)
        if self.assign.size and (self.assign.min() < 0 or self.assign.max() >= self.num_clusters):
            raise ValueError("mapping label out of range")

    def __len__(self):
        return len(self.assign)

    def is_symmetric(self) -> bool:
        a = self.assign
        return bool(np.all(a[::-1] == self.num_clusters - 1 - a))


def compress_joint(p, mapping: Mapping | np.ndarray, num_clusters: int | None = None) -> np.ndarray:
    """``p(t, x) = sum_{y: m(y)=t} p(y, x)``."""
    p = np.asarray(p, dtype=float)
    if isinstance(mapping, Mapping):
        assign, T = mapping.assign, mapping.num_clusters
    else:
        assign = np.asarray(mapping, dtype=np.int64)
        T = num_clusters if num_clusters is not None else int(assign.max()) + 1
    if len(assign) != p.shape[0]:
        raise ValueError("mapping and pmf disagree on |Y|")
    return np.stack([np.bincount(assign, weights=p[:, x], minlength=T)
                     for x in range(p.shape[1])], axis=1)


# ------------------------------------------------------------ sequential IB


@njit(cache=True)
def _h(pxt, pt):
    # sum_x p_xt log(p_xt / p_t)
    acc = 0.0
    if pt <= 0.0:
        return 0.0
    for x in range(pxt.shape[0]):
        if pxt[x] > 0.0:
            acc += pxt[x] * np.log(pxt[x] / pt)
    return acc


@njit(cache=True)
def _merged_h(pxt, pt, py_x, py):
    mass = pt + py
    acc = 0.0
    for x in range(py_x.shape[0]):
        v = pxt[x] + py_x[x]
        if v > 0.0:
            acc += v * np.log(v / mass)
    return acc


@njit(cache=True)
def _remove(t, y, p, py, pt, pxt, count, h):
    pt[t] -= py[y]
    count[t] -= 1
    for x in range(p.shape[1]):
        pxt[t, x] -= p[y, x]
        # clamp round-off so an emptied cluster reads as exactly empty
        if pxt[t, x] < 0.0 or count[t] == 0:
            pxt[t, x] = 0.0
    if pt[t] < 0.0 or count[t] == 0:
        pt[t] = 0.0
    h[t] = _h(pxt[t], pt[t])


@njit(cache=True)
def _insert(t, y, p, py, pt, pxt, count, h):
    pt[t] += py[y]
    count[t] += 1
    for x in range(p.shape[1]):
        pxt[t, x] += p[y, x]
    h[t] = _h(pxt[t], pt[t])


@njit(cache=True)
def _sib(p, py, assign, T, symmetric, seed, max_sweeps, eps):
    Y, X = p.shape
    np.random.seed(seed)
    pt = np.zeros(T)
    pxt = np.zeros((T, X))
    h = np.zeros(T)
    count = np.zeros(T, dtype=np.int64)
    active = py > 0.0
    for y in range(Y):
        if active[y]:
            t = assign[y]
            pt[t] += py[y]
            pxt[t] += p[y]
            count[t] += 1
    for t in range(T):
        h[t] = _h(pxt[t], pt[t])
    if symmetric:
        reps = np.array([y for y in range(Y // 2) if active[y]], dtype=np.int64)
    else:
        reps = np.array([y for y in range(Y) if active[y]], dtype=np.int64)
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps += 1
        changed = 0
        order = reps[np.random.permutation(len(reps))]
        for y in order:
            a = assign[y]
            if count[a] <= 1:
                continue
            yb = Y - 1 - y
            _remove(a, y, p, py, pt, pxt, count, h)
            if symmetric:
                _remove(T - 1 - a, yb, p, py, pt, pxt, count, h)
            # gain in sum_t h(t) from inserting y into t; staying put wins
            # ties, otherwise the lowest index wins
            best_t = a
            best = _merged_h(pxt[a], pt[a], p[y], py[y]) - h[a]
            for t in range(T):
                if t == a:
                    continue
                sc = _merged_h(pxt[t], pt[t], p[y], py[y]) - h[t]
                if sc > best + eps:
                    best = sc
                    best_t = t
            if best_t != a:
                changed += 1
            assign[y] = best_t
            _insert(best_t, y, p, py, pt, pxt, count, h)
            if symmetric:
                assign[yb] = T - 1 - best_t
                _insert(T - 1 - best_t, yb, p, py, pt, pxt, count, h)
        if changed == 0:
            break
    return assign, sweeps


def _kl_means(p, py, assign, T, symmetric, max_iter):
    """Batch reassignment to the centroid with the smallest KL divergence."""
    Y = p.shape[0]
    live = py > 0
    cond = np.zeros_like(p)
    cond[live] = p[live] / py[live, None]
    rows = np.flatnonzero(live[: Y // 2]) if symmetric else np.flatnonzero(live)
    assign = assign.copy()
    for _ in range(max_iter):
        pxt = np.stack([np.bincount(assign[live], weights=p[live, x], minlength=T)
                        for x in range(p.shape[1])], axis=1)
        pt = pxt.sum(axis=1)
        occupied = pt > 0
        logc = np.full_like(pxt, -700.0)
        logc[occupied] = np.log(np.maximum(pxt[occupied] / pt[occupied, None], 1e-300))
        score = cond[rows] @ logc.T  # -cross-entropy; the y-entropy term is constant
        score[:, ~occupied] = -np.inf
        new = np.argmax(score, axis=1)
        # keep the current label when it is already optimal
        cur = assign[rows]
        keep = score[np.arange(len(rows)), cur] >= score[np.arange(len(rows)), new] - 1e-15
        new = np.where(keep, cur, new)
        if np.array_equal(new, cur):
            break
        assign[rows] = new
        if symmetric:
            assign[Y - 1 - rows] = T - 1 - new
    return assign


def _initial_assignment(py, T, symmetric, rng):
    Y = len(py)
    assign = np.zeros(Y, dtype=np.int64)
    if symmetric:
        reps = np.flatnonzero(py[: Y // 2] > 0)
        perm = rng.permutation(reps)
        assign[perm] = np.arange(len(perm)) % T
        assign[Y - 1 - np.arange(Y // 2)] = T - 1 - assign[: Y // 2]
    else:
        reps = np.flatnonzero(py > 0)
        perm = rng.permutation(reps)
        assign[perm] = np.arange(len(perm)) % T
    return assign


def _finalize(p, assign, T, symmetric):
    py = p.sum(axis=1)
    dead = np.flatnonzero(py <= 0)
    assign = assign.copy()
    if symmetric:
        Y = len(py)
        low = dead[dead < Y // 2]
        assign[low] = 0
        assign[Y - 1 - low] = T - 1
    else:
        assign[dead] = 0
    return assign, dead


def is_sign_symmetric(p, tol: float = 1e-12) -> bool:
    """True when ``p[y, x] == p[Y-1-y, X-1-x]`` for all entries."""
    p = np.asarray(p)
    return bool(np.allclose(p, p[::-1, ::-1], atol=tol, rtol=0))


def ib_cluster(p, num_clusters: int, restarts: int = 1, symmetric: bool = False, seed: int = 0,
               init=None, max_sweeps: int = 200, eps: float = 1e-15, kl_iters: int = 0) -> Mapping:
    """Deterministic sequential IB: maximize I(X;T) over hard maps ``Y -> T``.

    Every restart starts from a balanced random partition (``init`` adds
    warm-start candidates that are tried first) and reassigns one observed
    symbol at a time to the cluster with the smallest merger cost until no
    symbol moves.  ``kl_iters`` > 0 runs that many batch KL-means passes
    before the sequential sweeps, which cuts the sweep count on large
    alphabets.  The best restart wins; ties keep the earlier candidate.
    With ``symmetric`` the pair ``(y, Y-1-y)`` always lands on
    ``(t, T-1-t)``.
    """
    p = check_pmf(p)
    Y = p.shape[0]
    T = int(num_clusters)
    if not 1 <= T <= Y:
        raise ValueError(f"num_clusters must be in [1, {Y}]")
    if symmetric:
        if Y % 2 or T % 2:
            raise ValueError("symmetric clustering needs even |Y| and |T|")
        if not is_sign_symmetric(p, tol=1e-12 + 1e-9 * p.max()):
            raise ValueError("pmf is not sign-symmetric")
    if restarts < 1 and init is None:
        raise ValueError("need restarts >= 1 or an init")
    py = p.sum(axis=1)
    candidates = []
    if init is not None:
        inits = [init] if np.ndim(init) == 1 else list(init)
        for a in inits:
            a = np.array(a, dtype=np.int64)
            if symmetric:
                a[Y - 1 - np.arange(Y // 2)] = T - 1 - a[: Y // 2]
            candidates.append(a)
    for i in range(restarts):
        rng = np.random.default_rng(seed + i)
        candidates.append(_initial_assignment(py, T, symmetric, rng))
    best, best_info = None, -np.inf
    for i, a in enumerate(candidates):
        if T == 1:
            out = np.zeros(Y, dtype=np.int64)
        elif T == Y and not symmetric:
            out = np.arange(Y, dtype=np.int64)
        else:
            if kl_iters:
                a = _kl_means(p, py, a, T, symmetric, kl_iters)
            out, _ = _sib(p, py, a.copy(), T, symmetric, seed + 7919 * i, max_sweeps, eps)
        info = mutual_information(compress_joint(p, out, T))
        if info > best_info + 1e-15:
            best, best_info = out, info
    assign, dead = _finalize(p, best, T, symmetric)
    return Mapping(assign, T, info=mutual_information(compress_joint(p, assign, T)), degenerate=dead)


# --------------------------------------------------- contiguous quantizers


@njit(cache=True)
def _cell_value(cum, cm, i, j):
    # sum_x P_x log(P_x / P) over the cell [i, j)
    mass = cm[j] - cm[i]
    if mass <= 0.0:
        return 0.0
    acc = 0.0
    for x in range(cum.shape[1]):
        v = cum[j, x] - cum[i, x]
        if v > 0.0:
            acc += v * np.log(v / mass)
    return acc


@njit(cache=True)
def _contiguous_dp(p, levels):
    G, X = p.shape
    cum = np.zeros((G + 1, X))
    for g in range(G):
        cum[g + 1] = cum[g] + p[g]
    cm = cum.sum(axis=1)
    NEG = -np.inf
    best = np.full((levels + 1, G + 1), NEG)
    arg = np.zeros((levels + 1, G + 1), dtype=np.int64)
    best[0, 0] = 0.0
    for c in range(1, levels + 1):
        for j in range(c, G - (levels - c) + 1):
            bv = NEG
            bi = c - 1
            for i in range(c - 1, j):
                if best[c - 1, i] == NEG:
                    continue
                v = best[c - 1, i] + _cell_value(cum, cm, i, j)
                if v > bv + 1e-15:
                    bv = v
                    bi = i
            best[c, j] = bv
            arg[c, j] = bi
    starts = np.zeros(levels, dtype=np.int64)
    j = G
    for c in range(levels, 0, -1):
        i = arg[c, j]
        starts[c - 1] = i
        j = i
    return starts


def _starts_to_assign(starts, G):
    assign = np.zeros(G, dtype=np.int64)
    for c, s in enumerate(starts):
        assign[s:] = c
    return assign


def scalar_quantizer_dp(p, levels: int, symmetric: bool = False) -> Mapping:
    """Information-optimal partition of an ordered grid into contiguous cells.

    ``p[g, x]`` must be ordered by the underlying scalar.  Dynamic programming
    over all contiguous partitions, O(levels * G^2).  With ``symmetric`` the
    grid is split at its midpoint and the right half is quantized into
    ``levels/2`` cells and mirrored.
    """
    p = check_pmf(p, tol=1e-6)
    G = p.shape[0]
    if levels > G:
        raise ValueError(f"levels {levels} exceeds grid size {G}")
    if levels < 1:
        raise ValueError("levels must be positive")
    if symmetric:
        if G % 2 or levels % 2:
            raise ValueError("symmetric quantizer needs an even grid and even levels")
        half = p[G // 2:]
        starts_r = _contiguous_dp(np.ascontiguousarray(half), levels // 2)
        right = _starts_to_assign(starts_r, G // 2)
        assign = np.concatenate([levels // 2 - 1 - right[::-1], levels // 2 + right])
        starts = np.flatnonzero(np.diff(np.concatenate([[-1], assign])) != 0)
    else:
        starts = _contiguous_dp(np.ascontiguousarray(p), levels)
        assign = _starts_to_assign(starts, G)
    return Mapping(assign, levels, info=mutual_information(compress_joint(p, assign, levels)),
                   boundaries=np.asarray(starts))


def llr_threshold_cluster(p, num_clusters: int, symmetric: bool = False, bins: int = 4096) -> Mapping:
    """IB quantizer for a binary relevant variable.

    Observed symbols are ordered by their LLR ``log p(y,x=0)/p(y,x=1)``; the
    optimal deterministic quantizer is a contiguous partition of that order.
    Large alphabets are first merged into ``bins`` uniform LLR bins (the
    only approximation), then partitioned by :func:`scalar_quantizer_dp`.
    """
    p = check_pmf(p)
    if p.shape[1] != 2:
        raise ValueError("llr_threshold_cluster needs a binary relevant variable")
    Y = p.shape[0]
    py = p.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        llr = np.log(p[:, 0]) - np.log(p[:, 1])
    live = py > 0
    finite = llr[live & np.isfinite(llr)]
    span = float(np.max(np.abs(finite))) if finite.size else 1.0
    span = max(span, 1e-12) * (1 + 1e-9)
    llr = np.where(np.isnan(llr), 0.0, np.clip(llr, -span, span))
    if symmetric:
        if Y % 2 or num_clusters % 2 or bins % 2:
            raise ValueError("symmetric clustering needs even sizes")
        # decide only the lower half of each complement pair
        lo = np.arange(Y // 2)
        v = llr[lo]
        edges = np.linspace(-span, span, bins + 1)
        b = np.clip(np.searchsorted(edges, v, side="right") - 1, 0, bins - 1)
        # an exact zero sits on the centre edge; keep the pair on opposite sides
        b = np.where(v == 0.0, bins // 2 - 1, b)
        bin_of = np.empty(Y, dtype=np.int64)
        bin_of[lo] = b
        bin_of[Y - 1 - lo] = bins - 1 - b
    else:
        edges = np.linspace(-span, span, bins + 1)
        bin_of = np.clip(np.searchsorted(edges, llr, side="right") - 1, 0, bins - 1)
    # bins ordered by decreasing LLR of x=0 is equivalent; keep increasing
    hist = np.zeros((bins, 2))
    np.add.at(hist, bin_of, p)
    used = np.flatnonzero(hist.sum(axis=1) > 0) if not symmetric else np.arange(bins)
    q = scalar_quantizer_dp(hist[used] / hist.sum(), min(num_clusters, len(used)), symmetric=symmetric)
    lut = np.zeros(bins, dtype=np.int64)
    lut[used] = q.assign
    assign = lut[bin_of]
    assign, dead = _finalize(p, assign, num_clusters, symmetric)
    return Mapping(assign, num_clusters, info=mutual_information(compress_joint(p, assign, num_clusters)),
                   degenerate=dead)
