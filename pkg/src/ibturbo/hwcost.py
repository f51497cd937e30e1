"""Transistor-count area model for LUT and arithmetic equalizer updates.

Netlists are built from two-input AND/OR/XOR/NAND gates and inverters.
A two-input multiplexer is priced as 2 AND + 1 OR + 1 NOT and realized
that way when a mux tree is turned into a netlist.
"""
from __future__ import annotations

import csv
import heapq
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

D_P = 8


@dataclass(frozen=True)
class GateCostTable:
    AND: int = 6
    OR: int = 6
    NOT: int = 2
    NAND: int = 4
    XOR: int = 10
    DFF: int = 18
    MUX2: int = 20

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not (isinstance(v, int) and v > 0):
                raise ValueError(f"gate cost {k} must be a positive integer")

    def cost(self, op: str) -> int:
        if op in ("IN", "CONST"):
            return 0
        return getattr(self, op)


GATES = GateCostTable()


# -------------------------------------------------------------- mux trees


def mux_tree_cost(w_in: int, w_out: int, symmetric: bool = False, gates: GateCostTable = GATES):
    """``(muxes, transistors, stages)`` of a selection-network LUT."""
    if w_in < 1 or w_out < 1:
        raise ValueError("w_in and w_out must be >= 1")
    if symmetric:
        if w_in < 2:
            raise ValueError("symmetric realization needs w_in >= 2")
        muxes = w_out * (2 ** (w_in - 1) - 1) + (w_in - 1) + w_out
        stages = (w_in - 1) + 2
    else:
        muxes = w_out * (2 ** w_in - 1)
        stages = w_in
    return muxes, muxes * gates.MUX2, stages


# ---------------------------------------------------------------- netlists


@dataclass
class Netlist:
    """Topologically ordered gates; node ``i`` is ``(op, fanin)``.

    ``op`` is one of IN, CONST, NOT, AND, OR, NAND, XOR.  Inputs are the
    first ``num_inputs`` nodes (bit ``i`` of the input word).  ``outputs``
    lists node ids, least significant output bit first.
    """

    num_inputs: int
    nodes: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def __post_init__(self):
        if not self.nodes:
            self.nodes = [("IN", (i,)) for i in range(self.num_inputs)]
        self._memo = {}

    def add(self, op: str, *fanin) -> int:
        key = (op, fanin if op not in ("AND", "OR", "XOR", "NAND") else tuple(sorted(fanin)))
        if op != "IN" and key in self._memo:
            return self._memo[key]
        arity = {"NOT": 1, "CONST": 1}.get(op, 2)
        if len(fanin) != arity:
            raise ValueError(f"{op} takes {arity} operands")
        if op != "CONST" and any(f >= len(self.nodes) for f in fanin):
            raise ValueError("fan-in must refer to earlier nodes")
        self.nodes.append((op, tuple(fanin)))
        self._memo[key] = len(self.nodes) - 1
        return len(self.nodes) - 1

    def const(self, v: int) -> int:
        return self.add("CONST", int(bool(v)))

    def mux(self, sel: int, a: int, b: int) -> int:
        """``sel ? b : a`` as 2 AND + 1 OR + 1 NOT."""
        n = self.add("NOT", sel)
        return self.add("OR", self.add("AND", a, n), self.add("AND", b, sel))

    def gate_counts(self) -> dict:
        counts = defaultdict(int)
        for op, _ in self.nodes:
            counts[op] += 1
        return dict(counts)

    def levels(self) -> np.ndarray:
        lv = np.zeros(len(self.nodes), dtype=np.int64)
        for i, (op, fi) in enumerate(self.nodes):
            if op in ("IN", "CONST"):
                continue
            lv[i] = 1 + max(lv[f] for f in fi)
        return lv

    def depth(self) -> int:
        if not self.outputs:
            return 0
        lv = self.levels()
        return int(max(lv[o] for o in self.outputs))

    def evaluate(self, inputs=None) -> np.ndarray:
        """Output words for the given input words (default: all ``2^n`` inputs)."""
        if inputs is None:
            inputs = np.arange(1 << self.num_inputs, dtype=np.int64)
        inputs = np.asarray(inputs, dtype=np.int64)
        vals = [None] * len(self.nodes)
        ones = np.ones(len(inputs), dtype=bool)
        for i, (op, fi) in enumerate(self.nodes):
            if op == "IN":
                vals[i] = ((inputs >> fi[0]) & 1).astype(bool)
            elif op == "CONST":
                vals[i] = ones if fi[0] else ~ones
            elif op == "NOT":
                vals[i] = ~vals[fi[0]]
            elif op == "AND":
                vals[i] = vals[fi[0]] & vals[fi[1]]
            elif op == "OR":
                vals[i] = vals[fi[0]] | vals[fi[1]]
            elif op == "NAND":
                vals[i] = ~(vals[fi[0]] & vals[fi[1]])
            elif op == "XOR":
                vals[i] = vals[fi[0]] ^ vals[fi[1]]
            else:
                raise ValueError(f"unknown gate {op}")
        out = np.zeros(len(inputs), dtype=np.int64)
        for b, o in enumerate(self.outputs):
            out |= vals[o].astype(np.int64) << b
        return out

    def live(self) -> "Netlist":
        """Copy without gates that no output depends on."""
        keep = np.zeros(len(self.nodes), bool)
        keep[: self.num_inputs] = True
        stack = list(self.outputs)
        while stack:
            i = stack.pop()
            if keep[i]:
                continue
            keep[i] = True
            op, fi = self.nodes[i]
            if op not in ("IN", "CONST"):
                stack.extend(fi)
        remap, out = {}, Netlist(self.num_inputs, flags=list(self.flags))
        for i in range(self.num_inputs):
            remap[i] = i
        for i in range(self.num_inputs, len(self.nodes)):
            if keep[i]:
                op, fi = self.nodes[i]
                fi = fi if op == "CONST" else tuple(remap[f] for f in fi)
                remap[i] = out.add(op, *fi)
        out.outputs = [remap[o] for o in self.outputs]
        return out


def netlist_cost(n: Netlist, gates: GateCostTable = GATES):
    """``(transistors, N_L)`` over the gates that reach an output."""
    n = n.live()
    return int(sum(gates.cost(op) for op, _ in n.nodes)), n.depth()


def table_bits(table, w_out: int | None = None):
    """Flatten a LUT into output words indexed by the concatenated input bits."""
    t = np.asarray(table, dtype=np.int64).reshape(-1)
    n_in = int(round(math.log2(len(t))))
    if 1 << n_in != len(t):
        raise ValueError("LUT size must be a power of two")
    if w_out is None:
        w_out = max(1, int(t.max()).bit_length())
    return t, n_in, w_out


def mux_tree_netlist(table, w_out: int | None = None) -> Netlist:
    """Full selection network; input bit 0 drives the first mux stage."""
    t, n_in, w_out = table_bits(table, w_out)
    net = Netlist(n_in)
    for b in range(w_out):
        level = [net.const((v >> b) & 1) for v in t]
        for i in range(n_in):
            level = [net.mux(i, level[2 * j], level[2 * j + 1]) for j in range(len(level) // 2)]
        net.outputs.append(level[0])
    return net


def symmetric_mux_netlist(table, w_out: int | None = None) -> Netlist:
    """Half table plus conditional inversion by the top input bit.

    Valid when ``table[Y-1-y] == 2^w_out - 1 - table[y]``.
    """
    t, n_in, w_out = table_bits(table, w_out)
    Y, top = len(t), (1 << w_out) - 1
    if not np.array_equal(t[::-1], top - t):
        raise ValueError("table is not complement-symmetric")
    sgn = n_in - 1
    net = Netlist(n_in)
    sel = []
    for i in range(n_in - 1):
        sel.append(net.mux(sgn, i, net.add("NOT", i)))
    half = t[: Y // 2]
    for b in range(w_out):
        level = [net.const((v >> b) & 1) for v in half]
        for i in range(n_in - 1):
            level = [net.mux(sel[i], level[2 * j], level[2 * j + 1]) for j in range(len(level) // 2)]
        net.outputs.append(net.mux(sgn, level[0], net.add("NOT", level[0])))
    return net


# ------------------------------------------------------ two-level logic


@dataclass
class Cover:
    """Sum-of-products per output bit; a cube is ``(value, dc_mask)`` over the inputs."""

    num_inputs: int
    outputs: list
    flagged: list = field(default_factory=list)

    def evaluate(self, inputs=None) -> np.ndarray:
        if inputs is None:
            inputs = np.arange(1 << self.num_inputs, dtype=np.int64)
        inputs = np.asarray(inputs, dtype=np.int64)
        out = np.zeros(len(inputs), dtype=np.int64)
        for b, cubes in enumerate(self.outputs):
            hit = np.zeros(len(inputs), bool)
            for v, m in cubes:
                hit |= (inputs & ~m) == v
            out |= hit.astype(np.int64) << b
        return out

    def literals(self, cube) -> list:
        """``(input, polarity)`` pairs of a cube; polarity 1 = plain input."""
        v, m = cube
        return [(i, (v >> i) & 1) for i in range(self.num_inputs) if not (m >> i) & 1]


def prime_implicants(minterms, n: int, limit: int = 200000):
    """Quine-McCluskey merging on ``(value, mask)`` codes; ``None`` past ``limit``."""
    cur = np.unique(np.asarray(minterms, dtype=np.int64))
    masks = np.zeros(len(cur), dtype=np.int64)
    primes_v, primes_m = [], []
    total = len(cur)
    while len(cur):
        merged = np.zeros(len(cur), bool)
        new_v, new_m = [], []
        key = (masks << n) | cur
        for b in range(n):
            bit = 1 << b
            sel = ((masks & bit) == 0) & ((cur & bit) == 0)
            if not sel.any():
                continue
            partner = key[sel] | bit
            found = np.isin(partner, key)
            if not found.any():
                continue
            idx = np.flatnonzero(sel)[found]
            merged[idx] = True
            merged[np.isin(key, partner[found])] = True
            new_v.append(cur[idx])
            new_m.append(masks[idx] | bit)
        primes_v.append(cur[~merged])
        primes_m.append(masks[~merged])
        if not new_v:
            break
        nv, nm = np.concatenate(new_v), np.concatenate(new_m)
        k = np.unique((nm << n) | nv)
        cur, masks = k & ((1 << n) - 1), k >> n
        total += len(cur)
        if total > limit:
            return None
    return np.concatenate(primes_v), np.concatenate(primes_m)


def _cube_minterms(v, m, n):
    free = [b for b in range(n) if (m >> b) & 1]
    pts = np.zeros(1 << len(free), dtype=np.int64)
    for j, b in enumerate(free):
        pts |= ((np.arange(1 << len(free)) >> j) & 1) << b
    return v | pts


def greedy_cover(minterms, pv, pm, n):
    """Essential primes first, then the prime covering most uncovered minterms."""
    minterms = np.unique(np.asarray(minterms, dtype=np.int64))
    if len(minterms) == 0:
        return []
    pos = {int(x): i for i, x in enumerate(minterms)}
    cover_sets = [np.array([pos[int(x)] for x in _cube_minterms(v, m, n)]) for v, m in zip(pv, pm)]
    covered_by = defaultdict(list)
    for p, cs in enumerate(cover_sets):
        for c in cs:
            covered_by[int(c)].append(p)
    chosen = []
    uncovered = np.ones(len(minterms), bool)
    for c in range(len(minterms)):
        if len(covered_by[c]) == 1 and uncovered[c]:
            p = covered_by[c][0]
            chosen.append(p)
            uncovered[cover_sets[p]] = False
    # lazy greedy: gains only shrink
    heap = [(-int(uncovered[cs].sum()), -int(pm[p]).bit_count(), p) for p, cs in enumerate(cover_sets)]
    heapq.heapify(heap)
    while uncovered.any():
        g, lit, p = heapq.heappop(heap)
        gain = int(uncovered[cover_sets[p]].sum())
        if gain == 0:
            continue
        if gain != -g:
            heapq.heappush(heap, (-gain, lit, p))
            continue
        chosen.append(p)
        uncovered[cover_sets[p]] = False
    return sorted(set(chosen))


def dnf_minimize(table, w_out: int | None = None, implicant_limit: int = 200000) -> Cover:
    """Two-level cover per output bit (prime implicants plus greedy covering)."""
    t, n, w_out = table_bits(table, w_out)
    if n > 16:
        raise ValueError("at most 16 inputs")
    outs, flagged = [], []
    for b in range(w_out):
        ones = np.flatnonzero((t >> b) & 1)
        if len(ones) == 0:
            outs.append([])
            continue
        if len(ones) == len(t):
            outs.append([(0, (1 << n) - 1)])
            continue
        pr = prime_implicants(ones, n, implicant_limit)
        if pr is None:
            flagged.append(b)
            outs.append([(int(v), 0) for v in ones])
            continue
        pv, pm = pr
        sel = greedy_cover(ones, pv, pm, n)
        outs.append([(int(pv[p]), int(pm[p])) for p in sel])
    return Cover(n, outs, flagged)


# ------------------------------------------------------ multi-level logic


def _literal_signals(net: Netlist, cover: Cover):
    inv = {}
    prods = []
    for cubes in cover.outputs:
        for cube in cubes:
            sig = []
            for i, pol in cover.literals(cube):
                if pol:
                    sig.append(i)
                else:
                    if i not in inv:
                        inv[i] = net.add("NOT", i)  # one inverter per complemented input
                    sig.append(inv[i])
            prods.append(tuple(sorted(sig)))
    return prods


def _balanced(net: Netlist, op: str, sigs):
    sigs = list(sigs)
    while len(sigs) > 1:
        nxt = [net.add(op, sigs[i], sigs[i + 1]) for i in range(0, len(sigs) - 1, 2)]
        if len(sigs) % 2:
            nxt.append(sigs[-1])
        sigs = nxt
    return sigs[0]


def _or_plane(net: Netlist, cover: Cover, prod_sig):
    k = 0
    for cubes in cover.outputs:
        if not cubes:
            net.outputs.append(net.const(0))
            continue
        sigs = []
        for _ in cubes:
            sigs.append(prod_sig[k])
            k += 1
        net.outputs.append(_balanced(net, "OR", sigs))


def unshared_multilevel(cover: Cover) -> Netlist:
    """Each product its own balanced AND tree; identical gates are not merged."""
    net = Netlist(cover.num_inputs)
    net._memo = _NoMemo(net)
    prods = _literal_signals(net, cover)
    sig = []
    for p in prods:
        sig.append(net.const(1) if not p else _balanced(net, "AND", p))
    _or_plane(net, cover, sig)
    return net


class _NoMemo(dict):
    """Disables structural hashing except for inverters on inputs."""

    def __init__(self, net):
        super().__init__()
        self.net = net

    def __contains__(self, key):
        return key[0] in ("NOT", "CONST") and dict.__contains__(self, key)


def share_multilevel(cover: Cover) -> Netlist:
    """Greedy pair extraction: repeatedly AND the signal pair used by the most products."""
    net = Netlist(cover.num_inputs)
    prods = [set(p) for p in _literal_signals(net, cover)]
    pair_prods = defaultdict(set)
    for k, p in enumerate(prods):
        s = sorted(p)
        for i in range(len(s)):
            for j in range(i + 1, len(s)):
                pair_prods[(s[i], s[j])].add(k)
    heap = [(-len(v), pair) for pair, v in pair_prods.items() if len(v) > 1]
    heapq.heapify(heap)
    while heap:
        negc, pair = heapq.heappop(heap)
        users = pair_prods.get(pair, set())
        if len(users) != -negc:
            if len(users) > 1:
                heapq.heappush(heap, (-len(users), pair))
            continue
        a, b = pair
        g = net.add("AND", a, b)
        for k in list(users):
            p = prods[k]
            p.discard(a)
            p.discard(b)
            for c in p:
                for x in (a, b):
                    key = (min(x, c), max(x, c))
                    pair_prods[key].discard(k)
                key = (min(g, c), max(g, c))
                pair_prods[key].add(k)
                if len(pair_prods[key]) == 2:
                    heapq.heappush(heap, (-2, key))
                elif len(pair_prods[key]) > 2:
                    heapq.heappush(heap, (-len(pair_prods[key]), key))
            p.add(g)
        del pair_prods[pair]
    sig = [net.const(1) if not p else _balanced(net, "AND", sorted(p)) for p in prods]
    _or_plane(net, cover, sig)
    return net


def two_level_cost(cover: Cover, gates: GateCostTable = GATES) -> int:
    return netlist_cost(unshared_multilevel(cover), gates)[0]


# ------------------------------------------------------------- arithmetic


def full_adder_cost(gates: GateCostTable = GATES) -> int:
    return 2 * gates.XOR + 2 * gates.AND + gates.OR


def prefix_nodes(w: int) -> int:
    """Group (generate, propagate) nodes of a Ladner-Fischer/Sklansky prefix tree."""
    nodes = 0
    for lvl in range(max(0, math.ceil(math.log2(w))) if w > 1 else 0):
        nodes += sum(1 for i in range(w) if (i >> lvl) & 1)
    return nodes


def adder_cost(w: int, gates: GateCostTable = GATES):
    """``(transistors, levels)`` of a ``w``-bit parallel-prefix adder.

    Bitwise generate/propagate (AND + XOR), prefix nodes priced as
    AND + OR, and a sum XOR row.
    """
    if w < 1:
        raise ValueError("adder width must be >= 1")
    depth = math.ceil(math.log2(w)) if w > 1 else 0
    pre = w * (gates.AND + gates.XOR)
    nodes = prefix_nodes(w) * (gates.AND + gates.OR)
    post = (w - 1) * gates.XOR
    return pre + nodes + post, 1 + 2 * depth + 1


@dataclass
class UpdateCost:
    transistors: int
    levels: int
    parts: dict = field(default_factory=dict)


def arithmetic_update_cost(num_states: int, num_symbols: int, memory: int, w_r: int, w_metric: int,
                           model: str = "ungerboeck", gates: GateCostTable = GATES) -> dict:
    """Gate-count model of the conventional fixed-point forward, backward and final updates.

    Per transition: a branch metric adder (the Forney model adds a
    squarer), a prior adder, and the accumulate adder; per state a
    compare/select tree over ``|D|`` candidates; normalization subtracts
    state 0; saturation is a mux row.  The final update adds forward,
    branch and backward metrics per transition and takes a max over states
    per symbol.
    """
    S, M, w = num_states, num_symbols, w_metric
    T = S * M
    add_w, lv_add = adder_cost(w, gates)
    mux_row = w * gates.MUX2
    if model == "forney":
        sq = w_r * w_r * gates.AND + w_r * (w_r - 1) * full_adder_cost(gates)
        branch = T * (sq + add_w)
        lv_branch = 2 * w_r + lv_add
    elif model == "ungerboeck":
        branch = T * add_w
        lv_branch = lv_add
    else:
        raise ValueError("model must be 'forney' or 'ungerboeck'")
    prior = T * add_w
    acc = T * add_w
    csel = S * (M - 1) * (add_w + mux_row)
    lv_csel = math.ceil(math.log2(M)) * (lv_add + 3) if M > 1 else 0
    norm = (S - 1) * add_w
    sat = S * (mux_row + 2 * gates.AND)
    levels = lv_branch + lv_add + lv_add + lv_csel + lv_add + 3
    recursion = UpdateCost(branch + prior + acc + csel + norm + sat, levels,
                           {"branch": branch, "prior": prior, "accumulate": acc,
                            "compare_select": csel, "normalize": norm, "saturate": sat})
    final_add = 2 * T * add_w
    final_max = M * (S - 1) * (add_w + mux_row)
    llr = add_w
    lv_final = lv_branch + 2 * lv_add + math.ceil(math.log2(S)) * (lv_add + 3) + lv_add
    final = UpdateCost(branch + final_add + final_max + llr, lv_final,
                       {"branch": branch, "add": final_add, "max": final_max, "llr": llr})
    return {"forward": recursion, "backward": recursion, "final": final}


# ---------------------------------------------------------------- memory


def series_2k(n_b: int) -> int:
    """Closed form of ``sum_{k=1}^{N_b/2-1} 2k``."""
    h = n_b // 2
    return (h - 1) * h


def x_schedule_delays(n_b: int) -> dict:
    """Register delays of the X-shaped sub-block schedule by explicit simulation.

    The forward unit emits its message after symbol ``k`` at clock ``k``;
    the backward unit emits its message for symbol ``k`` at clock
    ``N_b-1-k``.  A message waits in a shift register until its partner
    arrives; outputs of the first half leave in reverse order and are
    reordered.  Returns total register-cycles per message stream.
    """
    if n_b < 2 or n_b % 2:
        raise ValueError("N_b must be even and >= 2")
    fwd_time = {k: k for k in range(n_b)}
    bwd_time = {k: n_b - 1 - k for k in range(n_b)}
    alpha = beta = 0
    out_time = {}
    for k in range(n_b // 2):
        # first half: forward message (after symbol k) waits for backward message of k+1
        partner = bwd_time[k + 1]
        alpha += partner - fwd_time[k]
        out_time[k] = partner
    for k in range(n_b // 2, n_b):
        partner = fwd_time[k - 1]
        beta += partner - bwd_time[k]
        out_time[k] = partner
    # emit the first half in order starting with k=0
    first = n_b // 2
    reorder = sum((out_time[0] + k) - out_time[k] for k in range(first))
    return {"alpha": alpha, "beta": beta, "output": reorder}


def xi_update(xi_alpha, xi_beta, xi_e, n_b: int, n_o: int) -> Fraction:
    return Fraction((n_b + n_o) * (xi_alpha + xi_beta) + n_b * xi_e, n_b)


def xi_memory(w_alpha, w_beta, w_e, s_p: int, s_pe: int, n_b: int, gates: GateCostTable = GATES) -> Fraction:
    if n_b < 2 or n_b % 2:
        raise ValueError("N_b must be even and >= 2")
    return Fraction((s_p * (w_alpha + w_beta) + s_pe * w_e) * gates.DFF * series_2k(n_b), n_b)


def xi_memory_enumerated(w_alpha, w_beta, w_e, s_p, s_pe, n_b, gates: GateCostTable = GATES) -> Fraction:
    d = x_schedule_delays(n_b)
    bits = s_p * (w_alpha * d["alpha"] + w_beta * d["beta"]) + s_pe * w_e * d["output"]
    return Fraction(bits * gates.DFF, n_b)


def pipeline_stages(levels: int, d_p: int = D_P) -> int:
    return max(1, math.ceil(levels / d_p))


@dataclass
class IterationCost:
    """Per turbo iteration: update costs, logic depths and stored message widths."""

    xi_alpha: int
    xi_beta: int
    xi_e: int
    levels_alpha: int
    levels_beta: int
    levels_e: int
    w_alpha: int
    w_beta: int
    w_e: int

    @property
    def s_p(self) -> int:
        return pipeline_stages(max(self.levels_alpha, self.levels_beta))

    @property
    def s_pe(self) -> int:
        return pipeline_stages(self.levels_e)


@dataclass
class CostReport:
    label: str
    n_b: int
    n_o: int
    xi_update: Fraction
    xi_update_ab: Fraction
    xi_memory: Fraction
    iterations: list

    @property
    def xi_eq(self) -> Fraction:
        return self.xi_update + self.xi_memory


def evaluate(iters, n_b: int, n_o: int = 10, label: str = "", gates: GateCostTable = GATES) -> CostReport:
    upd = ab = mem = Fraction(0)
    for it in iters:
        upd += xi_update(it.xi_alpha, it.xi_beta, it.xi_e, n_b, n_o)
        ab += Fraction((n_b + n_o) * (it.xi_alpha + it.xi_beta), n_b)
        mem += xi_memory(it.w_alpha, it.w_beta, it.w_e, it.s_p, it.s_pe, n_b, gates)
    return CostReport(label, n_b, n_o, upd, ab, mem, list(iters))


def optimize_subblock(iters, n_o: int = 10, lo: int = 2, hi: int = 2048, gates: GateCostTable = GATES,
                      label: str = "") -> CostReport:
    """Exhaustive scan over even ``N_b``; ties go to the smaller block."""
    best = None
    for n_b in range(lo + lo % 2, hi + 1, 2):
        rep = evaluate(iters, n_b, n_o, label, gates)
        if best is None or rep.xi_eq < best.xi_eq:
            best = rep
    return best


# ------------------------------------------------------------- LUT costs


@dataclass
class LutCost:
    transistors: int
    levels: int
    method: str
    flags: list = field(default_factory=list)


def lut_cost(table, w_out: int, method: str = "shared", gates: GateCostTable = GATES,
             max_logic_inputs: int = 14, symmetric: bool = False) -> LutCost:
    """Cost of one LUT; wide tables fall back to a mux tree (flagged)."""
    t, n_in, _ = table_bits(table, w_out)
    if method == "mux" or n_in > max_logic_inputs:
        _, tr, st = mux_tree_cost(n_in, w_out, symmetric=symmetric and n_in >= 2, gates=gates)
        flags = [] if method == "mux" else [f"{n_in} inputs: mux tree used"]
        return LutCost(tr, st * 3, "mux", flags)
    cover = dnf_minimize(t, w_out)
    net = share_multilevel(cover) if method == "shared" else unshared_multilevel(cover)
    tr, lv = netlist_cost(net, gates)
    return LutCost(tr, lv, method, [f"bit {b}: minterm fallback" for b in cover.flagged])


def stage_cost(stage, w_out: int, method: str = "shared", gates: GateCostTable = GATES,
               max_logic_inputs: int = 14) -> LutCost:
    """Chained tables add their logic depths."""
    total, levels, flags = 0, 0, []
    for t in stage.tables:
        c = lut_cost(t, w_out, method, gates, max_logic_inputs)
        total += c.transistors
        levels += c.levels
        flags += c.flags
    return LutCost(total, levels, method, flags)


def ib_iteration_cost(design, method: str = "shared", gates: GateCostTable = GATES,
                      max_logic_inputs: int = 14) -> IterationCost:
    w = design.widths
    fa = stage_cost(design.forward, w.w_alpha, method, gates, max_logic_inputs)
    fb = stage_cost(design.backward, w.w_beta, method, gates, max_logic_inputs)
    fe = stage_cost(design.final, w.w_e, method, gates, max_logic_inputs)
    return IterationCost(fa.transistors, fb.transistors, fe.transistors, fa.levels, fb.levels, fe.levels,
                         w.w_alpha, w.w_beta, w.w_e)


def conventional_iteration_cost(num_states, num_symbols, memory, w_r, w_metric, w_e: int = None,
                                model: str = "ungerboeck", gates: GateCostTable = GATES) -> IterationCost:
    c = arithmetic_update_cost(num_states, num_symbols, memory, w_r, w_metric, model, gates)
    stored = (num_states - 1) * w_metric
    w_e = w_metric if w_e is None else w_e
    return IterationCost(c["forward"].transistors, c["backward"].transistors, c["final"].transistors,
                         c["forward"].levels, c["backward"].levels, c["final"].levels,
                         stored, stored, w_e)


def width_label(w_r: int, ws) -> str:
    ws = list(ws)
    if len(ws) == 1:
        return f"({w_r},{ws[0]})"
    return f"({w_r},(" + ",".join(str(w) for w in ws) + "))"


CSV_FIELDS = ["label", "n_b", "n_o", "xi_update", "xi_update_ab", "xi_memory", "xi_eq"]


def reports_csv(reports) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf)
    wr.writerow(CSV_FIELDS)
    for r in reports:
        wr.writerow([r.label, r.n_b, r.n_o, f"{float(r.xi_update):.4f}", f"{float(r.xi_update_ab):.4f}",
                     f"{float(r.xi_memory):.4f}", f"{float(r.xi_eq):.4f}"])
    return buf.getvalue()


def reports_text(reports) -> str:
    lines = []
    for r in reports:
        lines.append(f"{r.label}: N_b={r.n_b} N_o={r.n_o}")
        lines.append(f"  xi_update     {float(r.xi_update):12.1f}")
        lines.append(f"  xi_update,ab  {float(r.xi_update_ab):12.1f}")
        lines.append(f"  xi_memory     {float(r.xi_memory):12.1f}")
        lines.append(f"  xi_eq         {float(r.xi_eq):12.1f}")
        for i, it in enumerate(r.iterations):
            lines.append(f"  iteration {i}: xi_alpha={it.xi_alpha} xi_beta={it.xi_beta} xi_e={it.xi_e} "
                         f"S_p={it.s_p} S_p,e={it.s_pe}")
    return "\n".join(lines) + "\n"
