import numpy as np
import pytest
from hypothesis import given, strategies as st

from ibturbo.channel import build_trellis, preset, transmit
from ibturbo.ib import mutual_information
from ibturbo.reference import bcjr
from ibturbo.lut_equalizer import (DesignError, DesignOptions, Widths, _apply_stage, _design_step,
                                   _forward_joint, design_backward, design_channel_quantizer,
                                   design_equalizer, design_forward,
                                   entry_counts, load_design, model_feedback_pmf, quantize_feedback,
                                   run_equalizer, run_subblocks, save_design)

FAST = DesignOptions(recursions=12, static_recursions=12)
SMALL = Widths(w_r=4, w_d=2, w_alpha=4, w_beta=4, w_e=3)


@pytest.fixture(scope="module")
def epr4():
    return preset("epr4", 0.5)


@pytest.fixture(scope="module", params=["RRR", "FFF"])
def design(request, epr4):
    return design_equalizer(epr4, SMALL, request.param, 0.5, FAST, grid_points=400)


@given(*[st.integers(1, 16)] * 4)
def test_entry_count_identities(wr, wd, wa, wb):
    c = entry_counts(Widths(w_r=wr, w_d=wd, w_alpha=wa, w_beta=wb))
    assert c["forward_F"] == 2 ** (wa + wr + wd)
    assert c["forward_R"] == 2 ** wa * (2 ** wr + 2 ** wd)
    assert c["backward_R"] == 2 ** wb * (2 ** wr + 2 ** wd)
    assert c["final_F"] == 2 ** (wa + wr + wb)
    assert c["final_R"] == 2 ** (wa + wb)


def test_width_range():
    with pytest.raises(ValueError):
        Widths(w_alpha=17)
    with pytest.raises(ValueError):
        Widths(w_r=0)


def test_channel_quantizer_symmetric(epr4):
    cq = design_channel_quantizer(epr4, 5)
    assert cq.levels == 32
    assert np.allclose(cq.thresholds, -cq.thresholds[::-1])
    assert np.allclose(cq.p_tr.sum(axis=2), 1.0)


def test_channel_quantizer_noiseless_limit():
    spec = preset("epr4", 1e-8)
    cq = design_channel_quantizer(spec, 5, grid_points=2000)
    x = build_trellis(spec).output.ravel()
    _, counts = np.unique(np.round(x, 9), return_counts=True)
    p = counts / counts.sum()
    # the quantizer resolves every distinct noiseless output
    assert cq.info == pytest.approx(float(-(p * np.log2(p)).sum()), abs=1e-6)


def test_channel_grid_too_coarse(epr4):
    with pytest.raises(DesignError):
        design_channel_quantizer(epr4, 3, span_sigma=1.0)


def test_feedback_model():
    m0 = model_feedback_pmf(0.0, 3)
    assert np.allclose(m0.pmf, np.outer(m0.pmf.sum(1), m0.pmf.sum(0)))
    m = model_feedback_pmf(0.5, 3)
    assert m.levels == 8
    assert abs(m.info - 0.5) <= 0.01
    hi = model_feedback_pmf(0.999, 3)
    pt = hi.pmf.sum(axis=0)
    assert np.sort(pt)[-2:].sum() > 0.5


@given(st.lists(st.floats(-30, 30, allow_nan=False), min_size=1, max_size=50))
def test_feedback_quantizer_complement(llrs):
    m = model_feedback_pmf(0.5, 3)
    v = np.array(llrs)
    v = v[~np.isin(v, m.thresholds)]
    assert np.array_equal(quantize_feedback(-v, m), m.levels - 1 - quantize_feedback(v, m))
    assert quantize_feedback([0.0], m)[0] == m.neutral


def _complement_ok(table, out_size):
    idx = tuple(np.arange(n)[::-1] for n in table.shape)
    return np.array_equal(table[np.ix_(*idx)], out_size - 1 - table)


def test_design_tables_symmetric(design):
    w = design.widths
    for st_ in (design.forward, design.backward):
        sizes = [1 << w.w_alpha] + [st_.out_size] * (len(st_.tables) - 1)
        for t, out in zip(st_.tables, (st_.tables[0].shape[0] if st_.kind == "reduced" else st_.out_size,
                                       st_.out_size)):
            assert _complement_ok(t, out)
        assert sizes
    assert _complement_ok(design.final.tables[0], design.final.out_size)
    assert np.allclose(design.llr_table, -design.llr_table[::-1])
    assert np.all(np.isfinite(design.llr_table)) and np.abs(design.llr_table).max() <= 20


def test_design_entry_counts_match(design):
    c = entry_counts(design.widths)
    s = design.structure
    assert design.forward.entries == c[f"forward_{s[0]}"]
    assert design.backward.entries == c[f"backward_{s[1]}"]
    assert design.final.entries == c[f"final_{s[2]}"]


def test_trace_monotone(design):
    for key in ("forward_trace", "backward_trace"):
        tr = design.report[key]
        assert tr[-1] >= tr[0] - 1e-6


@pytest.mark.parametrize("structure", ["RRR", "FFF"])
def test_directions_agree_without_feedback(epr4, structure):
    # with feedback the forward state holds the fed-back symbol and the
    # backward state does not, so only the feedback-free designs must match
    trellis = build_trellis(epr4)
    cq = design_channel_quantizer(epr4, 4, grid_points=400, trellis=trellis)
    fb = model_feedback_pmf(0.0, 2).pmf
    f = design_forward(cq.p_tr, fb, SMALL, structure, FAST, trellis)
    b = design_backward(cq.p_tr, fb, SMALL, structure, FAST, trellis)
    assert abs(f.trace[-1] - b.trace[-1]) < 0.02


def test_roundtrip(design, tmp_path):
    p = tmp_path / "d.ibeq"
    save_design(design, p, extra={"turbo_iteration": 1})
    d2 = load_design(p)
    for a, b in zip((design.forward, design.backward, design.final), (d2.forward, d2.backward, d2.final)):
        assert a.kind == b.kind and all(np.array_equal(x, y) for x, y in zip(a.tables, b.tables))
    assert np.array_equal(design.llr_table, d2.llr_table)
    assert np.array_equal(design.channel_quantizer.thresholds, d2.channel_quantizer.thresholds)
    save_design(d2, tmp_path / "e.ibeq", extra={"turbo_iteration": 1})
    assert (tmp_path / "e.ibeq").read_bytes() == p.read_bytes()
    assert "table.final_R = " in (tmp_path / "d.ibeq.txt").read_text()
    bad = tmp_path / "bad.ibeq"
    bad.write_bytes(p.read_bytes() + b"x")
    with pytest.raises(ValueError):
        load_design(bad)


def test_design_deterministic(epr4, design):
    again = design_equalizer(epr4, SMALL, design.structure, 0.5, FAST, grid_points=400)
    assert all(np.array_equal(a, b) for a, b in zip(design.forward.tables, again.forward.tables))


def test_run_complement(design):
    rng = np.random.default_rng(0)
    n = 200
    t_r = rng.integers(0, 1 << design.widths.w_r, n)
    t_d = rng.integers(0, 1 << design.widths.w_d, n)
    A, B = 1 << design.widths.w_alpha, 1 << design.widths.w_beta
    te, le = run_equalizer(design, t_r, t_d, forward_init=design.forward_init, backward_init=3)
    tc, lc = run_equalizer(design, (1 << design.widths.w_r) - 1 - t_r, (1 << design.widths.w_d) - 1 - t_d,
                           forward_init=A - 1 - design.forward_init, backward_init=B - 1 - 3)
    assert np.array_equal(tc, design.final.out_size - 1 - te)
    assert np.allclose(lc, -le)


def test_constant_input_constant_output(design):
    n = 300
    t_r = np.full(n, (1 << design.widths.w_r) // 2)
    te, _ = run_equalizer(design, t_r)
    assert len(set(te[50:-50])) == 1


@pytest.mark.parametrize("structure", ["RRR", "FFF"])
def test_equalizer_close_to_bcjr(epr4, structure):
    design = design_equalizer(epr4, SMALL, structure, 0.0, FAST, grid_points=400)
    rng = np.random.default_rng(2)
    d = rng.choice([1.0, -1.0], 4000)
    r = transmit(d, epr4, rng=rng)
    _, L = run_equalizer(design, design.channel_quantizer(r))
    ber_ib = np.mean(np.where(L >= 0, 1.0, -1.0) != d)
    ber_map = np.mean(np.where(bcjr(r, epr4) >= 0, 1.0, -1.0) != d)
    # 4-bit messages on an 8-state trellis lose a fair amount at this SNR
    assert ber_map <= ber_ib < 2.5 * ber_map


def test_subblocks_full_overlap_identical(design, epr4):
    rng = np.random.default_rng(3)
    r = transmit(rng.choice([1.0, -1.0], 300), epr4, rng=rng)
    t_r = design.channel_quantizer(r)
    full = run_equalizer(design, t_r)[0]
    assert np.array_equal(run_subblocks(design, t_r, block=64, overlap=300)[0], full)


def test_zero_feedback_stage_neutral(epr4):
    trellis = build_trellis(epr4)
    cq = design_channel_quantizer(epr4, 4, grid_points=400, trellis=trellis)
    fb = model_feedback_pmf(0.0, 2).pmf
    T = 16
    p = np.full((8, T), 1 / (8 * T))
    for i in range(6):
        joint = _forward_joint(p, cq.p_tr, fb, trellis, False)
        stage, _ = _design_step(joint, T, "reduced", FAST, None if i == 0 else stage, i)
        p, u = _apply_stage(joint, stage, "rd")
        assert mutual_information(p.T) == pytest.approx(mutual_information(u.T), abs=1e-6)
