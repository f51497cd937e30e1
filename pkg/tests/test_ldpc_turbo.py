import numpy as np
import pytest
from hypothesis import given, strategies as st

from ibturbo.channel import preset, transmit
from ibturbo.ldpc import Code, Decoder, peg_matrix, read_alist, regular_code, write_alist
from ibturbo.lut_equalizer import DesignOptions, Widths, design_equalizer
from ibturbo.sim import DATA_DIR
from ibturbo.turbo import (BCJREqualizer, IBEqualizer, QuantizedBCJREqualizer, TurboSchedule, empirical_mi,
                           interleaver, turbo_run)


@pytest.fixture(scope="module")
def small():
    return Code(peg_matrix(256, 128, seed=3))


@pytest.fixture(scope="module")
def desk():
    return regular_code(2048, 3, 6, 0, cache_dir=DATA_DIR)


def has_4cycle(H):
    o = H.astype(np.int64) @ H.T.astype(np.int64)
    np.fill_diagonal(o, 0)
    return bool((o > 1).any())


def test_desk_code_shape(desk):
    H = desk.H
    assert H.shape == (1024, 2048) and desk.k == 1024 and desk.rate == 0.5
    assert np.all(H.sum(0) == 3) and np.all(H.sum(1) == 6)
    assert not has_4cycle(H)


def test_peg_deterministic():
    assert np.array_equal(peg_matrix(96, 48, seed=1), peg_matrix(96, 48, seed=1))


def test_encode_syndrome_many(small, desk, rng):
    u = rng.integers(0, 2, (10 ** 4, small.k))
    assert not small.syndrome(small.encode(u)).any()
    u = rng.integers(0, 2, (200, desk.k))
    c = desk.encode(u)
    assert not desk.syndrome(c).any()
    assert np.array_equal(desk.message(c), u)


def test_alist_roundtrip(small, tmp_path):
    write_alist(small.H, tmp_path / "c.alist")
    assert np.array_equal(read_alist(tmp_path / "c.alist"), small.H)


@pytest.mark.parametrize("kind", ["bp", "minsum"])
def test_noiseless_codeword(small, rng, kind):
    c = small.encode(rng.integers(0, 2, small.k))
    llr = 6.0 * (1 - 2.0 * c)
    ext, hard, conv = Decoder(small, kind).decode(llr, 1)
    assert conv and np.array_equal(hard, c)
    assert np.all(np.sign(ext + llr) == np.sign(llr))


@pytest.mark.parametrize("kind", ["bp", "minsum"])
def test_converged_means_zero_syndrome(small, kind):
    rng = np.random.default_rng(5)
    for _ in range(30):
        c = small.encode(rng.integers(0, 2, small.k))
        llr = 2 / 0.6 * ((1 - 2.0 * c) + rng.normal(0, np.sqrt(0.6), small.n))
        _, hard, conv = Decoder(small, kind).decode(llr, 20)
        if conv:
            assert not small.syndrome(hard).any()


def test_decode_pure_without_warm_start(small, rng):
    llr = rng.normal(0, 2, small.n)
    dec = Decoder(small, warm_start=False)
    a = dec.decode(llr, 5)
    dec.decode(rng.normal(size=small.n), 5)
    b = dec.decode(llr, 5)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_warm_start_continues(small, rng):
    c = small.encode(rng.integers(0, 2, small.k))
    llr = 2 / 0.8 * ((1 - 2.0 * c) + rng.normal(0, np.sqrt(0.8), small.n))
    warm = Decoder(small)
    warm.decode(llr, 3)
    two = warm.decode(llr, 3)[0]
    cold = Decoder(small, warm_start=False).decode(llr, 3)[0]
    assert not np.array_equal(two, cold)
    warm.reset()
    assert np.array_equal(warm.decode(llr, 3)[0], cold)


def test_minsum_not_better_than_bp(small):
    rng = np.random.default_rng(11)
    err = {"bp": 0, "minsum": 0}
    for _ in range(200):
        c = small.encode(rng.integers(0, 2, small.k))
        llr = 2 / 0.9 * ((1 - 2.0 * c) + rng.normal(0, np.sqrt(0.9), small.n))
        for kind in err:
            err[kind] += int((Decoder(small, kind).decode(llr, 20)[1] != c).sum())
    assert err["minsum"] >= err["bp"]


def test_schedule():
    s = TurboSchedule((5, 5, 10))
    assert s.turbo_iterations == 2 and s.budget == 20
    with pytest.raises(ValueError):
        TurboSchedule(())


@given(st.integers(1, 500), st.integers(0, 10 ** 6))
def test_interleaver_is_permutation(n, seed):
    p = interleaver(n, seed)
    assert np.array_equal(np.sort(p), np.arange(n))
    assert np.array_equal(p, interleaver(n, seed))


def test_empirical_mi_limits(rng):
    bits = rng.integers(0, 2, 5000)
    assert empirical_mi(30 * (1 - 2.0 * bits), bits) == pytest.approx(1.0, abs=1e-9)
    assert empirical_mi(np.zeros(5000), bits) == pytest.approx(0.0, abs=1e-12)


def frame(code, spec, seed):
    rng = np.random.default_rng(seed)
    u = rng.integers(0, 2, code.k)
    c = code.encode(u)
    perm = interleaver(code.n, seed)
    return u, c, perm, transmit(1.0 - 2.0 * c[perm], spec, rng=rng)


def test_turbo_single_iteration_is_plain_decoding(small):
    spec = preset("epr4", 0.3)
    u, c, perm, r = frame(small, spec, 1)
    eq = BCJREqualizer(spec)
    res = turbo_run(r, small, eq, TurboSchedule((20,)), perm, codeword=c)
    L = np.empty(small.n)
    L[perm] = eq.equalize(r, None, 0)[0]
    _, hard, _ = Decoder(small).decode(L, 20)
    assert np.array_equal(res.bits, small.message(hard))
    assert len(res.telemetry) == 1 and 0 < res.telemetry[0]["I_equalizer"] <= 1


def test_turbo_reproducible_and_helps(desk):
    spec = preset("epr4", 0.45)
    errs = {}
    for sched in ((20,), (5, 5, 10)):
        tot = 0
        for f in range(4):
            u, c, perm, r = frame(desk, spec, f)
            a = turbo_run(r, desk, BCJREqualizer(spec), TurboSchedule(sched), perm)
            b = turbo_run(r, desk, BCJREqualizer(spec), TurboSchedule(sched), perm)
            assert np.array_equal(a.bits, b.bits)
            tot += int((a.bits != u).sum())
        errs[sched] = tot
    assert errs[(5, 5, 10)] <= errs[(20,)]


def test_turbo_telemetry_grows(desk):
    spec = preset("epr4", 0.45)
    u, c, perm, r = frame(desk, spec, 9)
    res = turbo_run(r, desk, BCJREqualizer(spec), TurboSchedule((5, 5, 10)), perm, codeword=c)
    ie = [t["I_equalizer"] for t in res.telemetry]
    assert ie[2] > ie[0]


def test_other_equalizers_run(small):
    spec = preset("epr4", 0.3)
    u, c, perm, r = frame(small, spec, 2)
    d = design_equalizer(spec, Widths(4, 2, 4, 4, 3), "RRR", 0.0, DesignOptions(recursions=8, static_recursions=8),
                         grid_points=400)
    for eq in (IBEqualizer([d], block=32), IBEqualizer(d), QuantizedBCJREqualizer(spec)):
        res = turbo_run(r, small, eq, TurboSchedule((5, 5)), perm)
        assert res.bits.shape == (small.k,)
        assert np.mean(res.bits != u) < 0.2
