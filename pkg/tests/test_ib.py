import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ibturbo.ib import (compress_joint, ib_cluster, llr_threshold_cluster, mutual_information,
                        scalar_quantizer_dp)


def random_joint(seed, ny, nx=2):
    p = np.random.default_rng(seed).random((ny, nx)) ** 3
    return p / p.sum()


def symmetrize(p):
    q = p + p[::-1, ::-1]
    return q / q.sum()


def gaussian_grid(n=64, sigma=0.7):
    y = np.linspace(-3, 3, n)
    p = np.stack([np.exp(-(y - 1) ** 2 / (2 * sigma ** 2)), np.exp(-(y + 1) ** 2 / (2 * sigma ** 2))], 1)
    return p / p.sum()


def test_mi_examples():
    assert mutual_information(np.outer([0.3, 0.7], [0.2, 0.8])) == pytest.approx(0.0, abs=1e-15)
    assert mutual_information(np.eye(2) / 2) == pytest.approx(1.0)
    e = 0.11
    bsc = np.array([[1 - e, e], [e, 1 - e]]) / 2
    h2 = -e * np.log2(e) - (1 - e) * np.log2(1 - e)
    assert mutual_information(bsc) == pytest.approx(1 - h2)
    assert abs(mutual_information(bsc) - 0.5) < 0.001


def test_compress_examples():
    p = random_joint(0, 16, 8)
    assert np.allclose(compress_joint(p, np.arange(16), 16), p)
    one = compress_joint(p, np.zeros(16, dtype=int), 1)
    assert np.allclose(one[0], p.sum(0))


@given(st.integers(0, 10 ** 6), st.integers(2, 16), st.integers(1, 8))
def test_data_processing(seed, ny, t):
    p = random_joint(seed, ny, 8)
    a = np.random.default_rng(seed).integers(0, t, ny)
    q = compress_joint(p, a, t)
    assert q.sum() == pytest.approx(1.0)
    assert mutual_information(q) <= mutual_information(p) + 1e-9


def test_cluster_edge_sizes():
    p = random_joint(3, 10)
    assert ib_cluster(p, 10).info == pytest.approx(mutual_information(p))
    assert ib_cluster(p, 1).info == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_cluster_matches_exhaustive_two_partition(seed):
    p = random_joint(seed, 8)
    best = max(mutual_information(compress_joint(p, np.array(a), 2))
               for a in itertools.product([0, 1], repeat=8) if len(set(a)) == 2)
    assert ib_cluster(p, 2, restarts=5, seed=seed).info == pytest.approx(best, abs=1e-12)


@given(st.integers(0, 10 ** 6), st.sampled_from([4, 8, 16]), st.sampled_from([2, 4]))
def test_symmetric_cluster_complement(seed, ny, t):
    p = symmetrize(random_joint(seed, ny))
    m = ib_cluster(p, t, symmetric=True, seed=seed)
    y = np.arange(ny)
    assert np.all(m.assign[ny - 1 - y] == t - 1 - m.assign[y])
    assert m.info <= mutual_information(p) + 1e-9


@given(st.integers(0, 1000))
def test_restarts_monotone(seed):
    p = random_joint(seed, 12, 3)
    infos = [ib_cluster(p, 3, restarts=n, seed=seed).info for n in (1, 2, 4)]
    assert infos[0] <= infos[1] + 1e-12 <= infos[2] + 2e-12


def test_zero_mass_rows_flagged():
    p = random_joint(1, 8)
    p[3] = 0
    p /= p.sum()
    m = ib_cluster(p, 3)
    assert 3 in m.degenerate


def test_dp_midpoint_and_identity():
    p = gaussian_grid()
    m = scalar_quantizer_dp(p, 2)
    assert list(m.boundaries) == [0, 32]
    assert scalar_quantizer_dp(p, 64).info == pytest.approx(mutual_information(p))
    with pytest.raises(ValueError):
        scalar_quantizer_dp(p, 65)


def test_dp_beats_sib_on_grid():
    p = gaussian_grid()
    assert scalar_quantizer_dp(p, 4).info >= ib_cluster(p, 4, restarts=3).info - 1e-12


@given(st.integers(0, 10 ** 6), st.integers(1, 6))
def test_dp_exhaustive_and_relabel_invariant(seed, levels):
    # the DP only sees the grid order, so any strictly monotone relabeling of
    # grid coordinates gives the same pmf and the same cells
    p = random_joint(seed, 12)
    a = scalar_quantizer_dp(p, levels)
    b = scalar_quantizer_dp(p.copy(), levels)
    assert np.array_equal(a.assign, b.assign)
    for cuts in itertools.combinations(range(1, 12), levels - 1):
        assign = np.searchsorted(np.array(cuts), np.arange(12), side="right")
        assert mutual_information(compress_joint(p, assign, levels)) <= a.info + 1e-12


def test_llr_threshold_symmetric():
    p = symmetrize(random_joint(4, 40))
    m = llr_threshold_cluster(p, 8, symmetric=True)
    assert m.is_symmetric()
