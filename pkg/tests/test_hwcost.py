import csv
import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ibturbo import hwcost as hw
from ibturbo.acceptance import random_symmetric_lut


def test_gate_table():
    g = hw.GATES
    assert (g.AND, g.OR, g.NOT, g.NAND, g.XOR, g.DFF, g.MUX2) == (6, 6, 2, 4, 10, 18, 20)
    with pytest.raises(ValueError):
        hw.GateCostTable(AND=0)


def test_mux_tree_examples():
    assert hw.mux_tree_cost(1, 1)[0::2] == (1, 1)
    assert hw.mux_tree_cost(7, 3)[0] == 381
    plain, sym = hw.mux_tree_cost(7, 1)[0], hw.mux_tree_cost(7, 1, symmetric=True)[0]
    # half table saves 2^6 muxes, the inversion muxes cost w_in - 1 + w_out back
    assert plain - sym == 2 ** 6 - (7 - 1) - 1


@given(st.integers(2, 16), st.integers(1, 16))
def test_symmetric_mux_cheaper(w_in, w_out):
    plain = hw.mux_tree_cost(w_in, w_out)[1]
    sym = hw.mux_tree_cost(w_in, w_out, symmetric=True)[1]
    assert sym <= plain
    if (w_in, w_out) != (2, 1):
        assert sym < plain


def test_netlist_cost_examples():
    n = hw.Netlist(2)
    n.outputs = [n.add("AND", 0, 1)]
    assert hw.netlist_cost(n) == (6, 1)
    n = hw.Netlist(4)
    a = n.add("AND", 0, 1)
    b = n.add("AND", a, 2)
    n.outputs = [n.add("AND", b, 3)]
    assert hw.netlist_cost(n) == (18, 3)
    with pytest.raises(ValueError):
        n.add("AND", 0)


def test_dnf_examples():
    zero = hw.dnf_minimize(np.zeros(8, dtype=int), 1)
    assert zero.outputs == [[]]
    xor = hw.dnf_minimize(np.array([0, 1, 1, 0]), 1)
    assert len(xor.outputs[0]) == 2
    assert all(len(xor.literals(c)) == 2 for c in xor.outputs[0])


def test_single_product_and_sharing():
    # f = x0 x1 x2 x3: one product, k-1 ANDs
    t = np.zeros(16, dtype=int)
    t[15] = 1
    net = hw.share_multilevel(hw.dnf_minimize(t, 1))
    assert net.live().gate_counts().get("AND", 0) == 3
    # two products with a common 3-literal prefix
    t = np.zeros(32, dtype=int)
    t[0b01111] = t[0b10111] = 1
    t[0b11111] = 0
    cover = hw.dnf_minimize(t, 1)
    assert hw.netlist_cost(hw.share_multilevel(cover))[0] < hw.two_level_cost(cover)


@given(st.integers(0, 10 ** 6), st.integers(2, 9), st.integers(1, 3))
def test_realizations_equivalent(seed, n_in, w_out):
    rng = np.random.default_rng(seed)
    t = random_symmetric_lut(rng, n_in, w_out)
    cover = hw.dnf_minimize(t, w_out)
    assert np.array_equal(cover.evaluate(), t)
    for net in (hw.share_multilevel(cover), hw.unshared_multilevel(cover), hw.mux_tree_netlist(t, w_out),
                hw.symmetric_mux_netlist(t, w_out)):
        assert np.array_equal(net.evaluate(), t)
        live = net.live()
        assert np.array_equal(live.evaluate(), t)
        assert live.depth() == net.depth()
    assert hw.netlist_cost(hw.share_multilevel(cover))[0] <= hw.two_level_cost(cover)


@given(st.integers(0, 10 ** 6), st.integers(1, 8))
def test_mux_netlist_matches_cost_model(seed, n_in):
    t = np.random.default_rng(seed).integers(0, 4, 1 << n_in)
    net = hw.mux_tree_netlist(t, 2)
    tr, depth = hw.netlist_cost(net)
    muxes, model_tr, stages = hw.mux_tree_cost(n_in, 2)
    assert tr <= model_tr
    assert np.array_equal(net.evaluate(), t)


def test_minterm_fallback_flagged():
    t = np.random.default_rng(0).integers(0, 2, 256)
    cover = hw.dnf_minimize(t, 1, implicant_limit=5)
    assert cover.flagged == [0]
    assert np.array_equal(cover.evaluate(), t)


def test_adder_model():
    assert hw.full_adder_cost() == 38
    for w in (2, 4, 8, 16):
        c, lv = hw.adder_cost(w)
        c2, lv2 = hw.adder_cost(2 * w)
        assert 2 * c < c2 <= 2 * c + hw.prefix_nodes(2 * w) * 12
        assert lv2 == lv + 2


def test_arithmetic_update_structure():
    c4 = hw.arithmetic_update_cost(4, 2, 2, 7, 11)
    add = hw.adder_cost(11)[0]
    assert c4["forward"].parts["branch"] == 8 * add
    assert c4["forward"].transistors == c4["backward"].transistors
    forney = hw.arithmetic_update_cost(4, 2, 2, 7, 11, model="forney")
    assert forney["forward"].transistors > c4["forward"].transistors


def test_series_and_formulas():
    assert hw.series_2k(10) == 20
    for n_b in range(2, 200, 2):
        assert hw.series_2k(n_b) == sum(2 * k for k in range(1, n_b // 2))
    assert hw.xi_update(100, 50, 0, 8, 0) == 150
    with pytest.raises(ValueError):
        hw.xi_memory(8, 8, 4, 1, 1, 7)
    assert hw.xi_memory(8, 8, 0, 2, 1, 20) == 2 * hw.xi_memory(8, 8, 0, 1, 1, 20)


@given(st.integers(1, 30), st.integers(1, 30), st.integers(1, 10), st.integers(1, 4), st.integers(1, 4),
       st.integers(1, 64))
def test_memory_closed_form(wa, wb, we, sp, spe, half):
    n_b = 2 * half
    assert hw.xi_memory(wa, wb, we, sp, spe, n_b) == hw.xi_memory_enumerated(wa, wb, we, sp, spe, n_b)


def iteration(xa=1000, xe=300, w=8):
    return hw.IterationCost(xa, xa, xe, 20, 20, 10, w, w, 4)


def test_report_identities():
    iters = [iteration(), iteration(2000, 100, 7)]
    r = hw.evaluate(iters, 16, 10)
    assert r.xi_eq == r.xi_update + r.xi_memory
    per = [hw.evaluate([it], 16, 10) for it in iters]
    assert r.xi_eq == sum(p.xi_eq for p in per)
    assert isinstance(r.xi_memory, Fraction)


def test_optimize_subblock_limits():
    no_mem = hw.IterationCost(1000, 1000, 0, 1, 1, 1, 0, 0, 0)
    assert hw.optimize_subblock([no_mem]).n_b == 2048
    no_upd = hw.IterationCost(0, 0, 0, 10, 10, 10, 8, 8, 4)
    assert hw.optimize_subblock([no_upd]).n_b == 2
    best = hw.optimize_subblock([iteration()])
    for nb in (best.n_b - 2, best.n_b + 2):
        if 2 <= nb <= 2048:
            assert best.xi_eq <= hw.evaluate([iteration()], nb).xi_eq


def test_labels_and_csv():
    assert hw.width_label(5, [8]) == "(5,8)"
    assert hw.width_label(5, [8, 8, 7]) == "(5,(8,8,7))"
    rep = hw.evaluate([iteration()], 10, label="(5,8)")
    rows = list(csv.reader(io.StringIO(hw.reports_csv([rep]))))
    assert rows[0] == hw.CSV_FIELDS
    f = dict(zip(hw.CSV_FIELDS, rows[1]))
    assert f["label"] == "(5,8)"
    assert float(f["xi_eq"]) == pytest.approx(float(f["xi_update"]) + float(f["xi_memory"]), abs=1e-3)
    assert "xi_memory" in hw.reports_text([rep])


def test_lut_cost_methods(rng):
    t = random_symmetric_lut(rng, 8, 3)
    shared = hw.lut_cost(t, 3, "shared")
    unshared = hw.lut_cost(t, 3, "unshared")
    mux = hw.lut_cost(t, 3, "mux")
    assert shared.transistors <= unshared.transistors
    assert mux.transistors == hw.mux_tree_cost(8, 3)[1]
    wide = hw.lut_cost(np.zeros(1 << 10, dtype=int), 2, max_logic_inputs=8)
    assert wide.method == "mux" and wide.flags
