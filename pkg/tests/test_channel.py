import numpy as np
import pytest
from hypothesis import given, strategies as st

from ibturbo.channel import (CapacityError, ChannelSpec, autocorrelation, build_trellis, preset,
                             transmit, truncate_taps, ungerboeck_front_end)

taps_st = st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=5).filter(
    lambda t: any(abs(x) > 1e-3 for x in t))


def test_state_counts():
    assert build_trellis(preset("epr4")).num_states == 8
    t0 = build_trellis(ChannelSpec((1.0,)))
    assert (t0.num_states, t0.num_transitions) == (1, 2)
    t2 = build_trellis(ChannelSpec((1.0, 0.5, 0.2)))
    assert (t2.num_states, t2.num_transitions) == (4, 8)


def test_capacity_error():
    with pytest.raises(CapacityError):
        build_trellis(ChannelSpec((1.0,) * 20), max_states=1024)


def test_spec_validation():
    with pytest.raises(ValueError):
        ChannelSpec(())
    with pytest.raises(ValueError):
        ChannelSpec((1.0,), alphabet=(1.0,))


@given(taps_st)
def test_trellis_outputs_match_taps(taps):
    spec = ChannelSpec(tuple(taps))
    tr = build_trellis(spec)
    a = np.asarray(spec.alphabet)
    for s in range(tr.num_states):
        past = tr.state_symbols(s)  # oldest first
        for j in range(tr.num_symbols):
            x = taps[0] * a[j] + sum(taps[l] * a[past[-l]] for l in range(1, len(taps)))
            assert tr.output[s, j] == pytest.approx(x, abs=1e-12)
    # in/out degree
    assert np.all(np.bincount(tr.next_state.ravel(), minlength=tr.num_states) == tr.num_symbols)


def test_epr4_steady_state_and_identity():
    spec = preset("epr4", 0.0)
    r = transmit(np.ones(20), spec)
    assert np.allclose(r[3:], 0.0)
    d = np.array([1, -1, -1, 1, 1.0])
    assert np.array_equal(transmit(d, ChannelSpec((1.0,), noise_psd=0.0)), d)


def test_transmit_reproducible_and_noise_variance():
    spec = preset("epr4", 0.4)
    d = np.random.default_rng(0).choice([1.0, -1.0], 10 ** 6)
    r1, r2 = transmit(d, spec, seed=5), transmit(d, spec, seed=5)
    assert np.array_equal(r1, r2)
    noise = r1 - transmit(d, spec.with_noise(0.0))
    assert abs(noise.var() / 0.2 - 1) < 0.01


def test_transmit_rejects_foreign_symbols():
    with pytest.raises(ValueError):
        transmit([0.5], preset("epr4"))


def test_autocorrelation_epr4():
    g = autocorrelation(preset("epr4").taps)
    assert g[3] == pytest.approx(1.0)
    assert g[6] == pytest.approx(-0.25)


@given(taps_st)
def test_autocorrelation_symmetric(taps):
    g = autocorrelation(taps)
    assert np.allclose(g, g[::-1])
    assert g[len(taps) - 1] > 0


@given(taps_st, st.integers(1, 30), st.integers(0, 2 ** 31))
def test_matched_filter_is_double_convolution(taps, n, seed):
    spec = ChannelSpec(tuple(taps))
    r = np.random.default_rng(seed).normal(size=n)
    rp, _ = ungerboeck_front_end(r, spec)
    # correlate with h: r'_k = sum_l h_l r_{k+l}
    full = np.convolve(r, np.asarray(taps)[::-1])
    ref = full[len(taps) - 1:len(taps) - 1 + n]
    assert np.allclose(rp, ref, atol=1e-12)


def test_truncate():
    ftn = preset("ftn")
    assert truncate_taps(ftn, 2).taps == (0.8907, 0.4088, -0.1919)
    assert truncate_taps(ftn, ftn.memory) == ftn
    assert truncate_taps(preset("epr4"), 0).taps == (0.5,)
    with pytest.raises(ValueError):
        truncate_taps(preset("epr4"), 4)
