"""Regular LDPC codes: PEG construction, alist I/O, systematic encoding, BP decoding."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit


@dataclass
class Code:
    """Binary code given by its parity-check matrix ``H`` (m x n, uint8)."""

    H: np.ndarray
    info_pos: np.ndarray = field(default=None, repr=False)   # systematic positions
    parity_pos: np.ndarray = field(default=None, repr=False)
    P: np.ndarray = field(default=None, repr=False)          # parity = P @ info mod 2

    def __post_init__(self):
        self.H = (np.asarray(self.H) & 1).astype(np.uint8)
        m, n = self.H.shape
        rows, cols = np.nonzero(self.H)
        order = np.lexsort((rows, cols))
        # edges sorted by variable node
        self.edge_var = cols[order].astype(np.int64)
        self.edge_chk = rows[order].astype(np.int64)
        self.var_ptr = np.concatenate([[0], np.cumsum(np.bincount(cols, minlength=n))]).astype(np.int64)
        corder = np.lexsort((self.edge_var, self.edge_chk))
        self.chk_edges = corder.astype(np.int64)                 # edge ids grouped by check
        self.chk_ptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=m))]).astype(np.int64)
        if self.P is None:
            self._systematic()

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def k(self) -> int:
        return len(self.info_pos)

    @property
    def rate(self) -> float:
        return self.k / self.n

    def _systematic(self):
        """Gauss-Jordan over GF(2); pivot columns carry parity."""
        A = self.H.copy()
        m, n = A.shape
        pivots, r = [], 0
        for c in range(n):
            if r == m:
                break
            hit = np.flatnonzero(A[r:, c])
            if len(hit) == 0:
                continue
            p = r + hit[0]
            if p != r:
                A[[r, p]] = A[[p, r]]
            others = np.flatnonzero(A[:, c])
            others = others[others != r]
            A[others] ^= A[r]
            pivots.append(c)
            r += 1
        self.parity_pos = np.array(pivots, dtype=np.int64)
        self.info_pos = np.setdiff1d(np.arange(n), self.parity_pos)
        self.P = A[:r][:, self.info_pos]

    def encode(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.uint8)
        if u.shape[-1] != self.k:
            raise ValueError(f"message length {u.shape[-1]} != k={self.k}")
        c = np.zeros(u.shape[:-1] + (self.n,), dtype=np.uint8)
        c[..., self.info_pos] = u
        c[..., self.parity_pos] = (u.astype(np.int64) @ self.P.T.astype(np.int64)) & 1
        return c

    def syndrome(self, c) -> np.ndarray:
        return (np.asarray(c, dtype=np.int64) @ self.H.T.astype(np.int64)) & 1

    def message(self, c) -> np.ndarray:
        return np.asarray(c)[..., self.info_pos]


def peg_matrix(n: int, m: int, dv: int = 3, dc: int = 6, seed: int = 0) -> np.ndarray:
    """Progressive edge growth with fixed variable degree and check-degree balancing."""
    rng = np.random.default_rng(seed)
    var_nb = [[] for _ in range(n)]
    chk_nb = [[] for _ in range(m)]
    deg = np.zeros(m, dtype=np.int64)
    for v in range(n):
        for e in range(dv):
            if e == 0:
                cand = np.flatnonzero(deg == deg.min())
            else:
                # breadth-first expansion from v until no new checks appear or all are reached
                seen_c = np.zeros(m, bool)
                seen_v = np.zeros(n, bool)
                seen_v[v] = True
                frontier = [v]
                for c in var_nb[v]:
                    seen_c[c] = True
                prev = seen_c.copy()
                while True:
                    nxt_c = []
                    for u in frontier:
                        for c in var_nb[u]:
                            for w in chk_nb[c]:
                                if not seen_v[w]:
                                    seen_v[w] = True
                                    nxt_c.append(w)
                    frontier = nxt_c
                    for u in frontier:
                        for c in var_nb[u]:
                            seen_c[c] = True
                    if seen_c.all() or not frontier or (seen_c == prev).all():
                        break
                    prev = seen_c.copy()
                if seen_c.all():
                    pool = np.flatnonzero(~prev) if not prev.all() else np.arange(m)
                else:
                    pool = np.flatnonzero(~seen_c)
                pool = np.setdiff1d(pool, var_nb[v])
                if len(pool) == 0:
                    pool = np.setdiff1d(np.arange(m), var_nb[v])
                cand = pool[deg[pool] == deg[pool].min()]
            open_ = cand[deg[cand] < dc]
            if len(open_) == 0:
                # every reachable-distance candidate is full: fall back to any open check
                open_ = np.setdiff1d(np.flatnonzero(deg < dc), var_nb[v])
                open_ = open_[deg[open_] == deg[open_].min()] if len(open_) else cand
            cand = open_
            c = int(rng.choice(cand))
            var_nb[v].append(c)
            chk_nb[c].append(v)
            deg[c] += 1
    H = np.zeros((m, n), dtype=np.uint8)
    for v in range(n):
        H[var_nb[v], v] = 1
    return H


def regular_code(n: int = 2048, dv: int = 3, dc: int = 6, seed: int = 0, cache_dir=None) -> Code:
    """Desk-scale regular code; cached as an alist file when ``cache_dir`` is given."""
    m = n * dv // dc
    if cache_dir is not None:
        path = Path(cache_dir) / f"peg_{n}_{dv}_{dc}_{seed}.alist"
        if path.exists():
            return Code(read_alist(path))
        H = peg_matrix(n, m, dv, dc, seed)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_alist(H, path)
        return Code(H)
    return Code(peg_matrix(n, m, dv, dc, seed))


def write_alist(H, path):
    H = np.asarray(H)
    m, n = H.shape
    cols = [np.flatnonzero(H[:, j]) + 1 for j in range(n)]
    rows = [np.flatnonzero(H[i]) + 1 for i in range(m)]
    cw, rw = max(len(c) for c in cols), max(len(r) for r in rows)
    lines = [f"{n} {m}", f"{cw} {rw}",
             " ".join(str(len(c)) for c in cols), " ".join(str(len(r)) for r in rows)]
    lines += [" ".join(map(str, list(c) + [0] * (cw - len(c)))) for c in cols]
    lines += [" ".join(map(str, list(r) + [0] * (rw - len(r)))) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def read_alist(path) -> np.ndarray:
    tok = Path(path).read_text().split()
    it = iter(int(t) for t in tok)
    n, m = next(it), next(it)
    next(it), next(it)
    cdeg = [next(it) for _ in range(n)]
    [next(it) for _ in range(m)]
    H = np.zeros((m, n), dtype=np.uint8)
    rest = list(it)
    # column lists are padded to the max column weight
    cw = max(cdeg)
    for j in range(n):
        for i in rest[j * cw:(j + 1) * cw]:
            if i > 0:
                H[i - 1, j] = 1
    return H


# ----------------------------------------------------------------- decoders


@njit(cache=True)
def _bp(llr, c2v, var_ptr, edge_chk, chk_ptr, chk_edges, H_rows_edges_var, iters, minsum, offset, qmax, qstep):
    n = len(llr)
    E = len(c2v)
    v2c = np.empty(E)
    post = np.empty(n)
    hard = np.zeros(n, dtype=np.uint8)
    m = len(chk_ptr) - 1
    done = 0
    converged = False
    for it in range(iters):
        # variable update
        for v in range(n):
            tot = llr[v]
            for e in range(var_ptr[v], var_ptr[v + 1]):
                tot += c2v[e]
            for e in range(var_ptr[v], var_ptr[v + 1]):
                x = tot - c2v[e]
                if minsum:
                    x = np.round(x / qstep) * qstep
                    if x > qmax:
                        x = qmax
                    elif x < -qmax:
                        x = -qmax
                v2c[e] = x
        # check update
        for c in range(m):
            a, b = chk_ptr[c], chk_ptr[c + 1]
            if minsum:
                sgn = 1.0
                m1 = 1e300
                m2 = 1e300
                imin = -1
                for i in range(a, b):
                    x = v2c[chk_edges[i]]
                    if x < 0:
                        sgn = -sgn
                    ax = abs(x)
                    if ax < m1:
                        m2 = m1
                        m1 = ax
                        imin = i
                    elif ax < m2:
                        m2 = ax
                for i in range(a, b):
                    e = chk_edges[i]
                    x = v2c[e]
                    mag = m2 if i == imin else m1
                    mag = max(mag - offset, 0.0)
                    s = sgn
                    if x < 0:
                        s = -s
                    c2v[e] = s * mag
            else:
                prod = 1.0
                zeros = 0
                for i in range(a, b):
                    t = np.tanh(0.5 * v2c[chk_edges[i]])
                    if t == 0.0:
                        zeros += 1
                    else:
                        prod *= t
                for i in range(a, b):
                    e = chk_edges[i]
                    t = np.tanh(0.5 * v2c[e])
                    if t == 0.0:
                        q = prod if zeros == 1 else 0.0
                    else:
                        q = prod / t if zeros == 0 else 0.0
                    if q > 0.999999999999:
                        q = 0.999999999999
                    elif q < -0.999999999999:
                        q = -0.999999999999
                    c2v[e] = 2.0 * np.arctanh(q)
        # posterior and syndrome
        for v in range(n):
            tot = llr[v]
            for e in range(var_ptr[v], var_ptr[v + 1]):
                tot += c2v[e]
            post[v] = tot
            hard[v] = 1 if tot < 0 else 0
        done = it + 1
        ok = True
        for c in range(m):
            par = 0
            for i in range(chk_ptr[c], chk_ptr[c + 1]):
                par ^= hard[H_rows_edges_var[chk_edges[i]]]
            if par:
                ok = False
                break
        if ok:
            converged = True
            break
    if iters == 0:
        for v in range(n):
            tot = llr[v]
            for e in range(var_ptr[v], var_ptr[v + 1]):
                tot += c2v[e]
            post[v] = tot
            hard[v] = 1 if tot < 0 else 0
    return post, hard, converged, done


@dataclass
class DecoderState:
    c2v: np.ndarray


@dataclass
class Decoder:
    """Flooding decoder; ``kind`` is ``"bp"`` (tanh rule) or ``"minsum"`` (4-bit offset min-sum).

    With ``warm_start`` the check-to-variable messages are kept between
    calls until :meth:`reset`.
    """

    code: Code
    kind: str = "bp"
    warm_start: bool = True
    offset: float = 0.5
    msg_bits: int = 4
    msg_step: float = 1.0
    state: DecoderState | None = None

    def __post_init__(self):
        if self.kind not in ("bp", "minsum"):
            raise ValueError("kind must be 'bp' or 'minsum'")

    def reset(self):
        self.state = None

    def decode(self, llr_in, iters: int):
        """Returns ``(extrinsic LLR, hard bits, converged)``; bit 0 <-> positive LLR."""
        code = self.code
        llr = np.ascontiguousarray(llr_in, dtype=float)
        if len(llr) != code.n:
            raise ValueError(f"expected {code.n} LLRs")
        if self.warm_start and self.state is not None:
            c2v = self.state.c2v.copy()
        else:
            c2v = np.zeros(len(code.edge_var))
        minsum = self.kind == "minsum"
        qmax = (2 ** (self.msg_bits - 1) - 1) * self.msg_step
        if minsum:
            llr = np.clip(llr, -qmax, qmax)
        post, hard, conv, _ = _bp(llr, c2v, code.var_ptr, code.edge_chk, code.chk_ptr, code.chk_edges,
                                  code.edge_var, int(iters), minsum, self.offset, qmax, self.msg_step)
        if self.warm_start:
            self.state = DecoderState(c2v)
        return post - llr, hard, bool(conv)
