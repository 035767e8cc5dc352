import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from starppo.channel import ChannelRealization
from starppo.geometry import Region
from starppo.link import (NoiseModel, effective_channel, effective_channels, rate, sinr,
                          sinr_all, sum_rate, total_power, user_rates)
from starppo.starris import StarElements, build_matrices, select_theta, wrap_phase


def cgauss(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_elements(rng, n):
    tt = wrap_phase(rng.uniform(-np.pi, np.pi, n))
    tr = wrap_phase(tt + np.where(rng.random(n) > 0.5, np.pi / 2, -np.pi / 2))
    return StarElements(rng.random(n), tt, tr)


def naive_sum_rate(ch, regions, e, w, noise):
    """Term-by-term expansion with explicit loops, no matrix products."""
    n, m = ch.h_br.shape
    k_users = w.shape[1]
    r_mat, t_mat = build_matrices(e)
    total = 0.0
    for k in range(k_users):
        theta = r_mat if regions[k] == Region.REFLECTION else t_mat
        eff = []
        for mm in range(m):
            acc = ch.h_bu[mm, k]
            for i in range(n):
                for j in range(n):
                    acc += ch.h_ru[i, k] * theta[i, j] * ch.h_br[j, mm]
            eff.append(acc)
        powers = []
        for u in range(k_users):
            s = 0j
            for mm in range(m):
                s += eff[mm] * w[mm, u]
            powers.append(abs(s) ** 2)
        interference = sum(p for u, p in enumerate(powers) if u != k)
        gamma = powers[k] / (interference + noise.sigma2)
        total += noise.bandwidth * math.log2(1 + gamma)
    return total


def random_instance(rng, m, n, k):
    ch = ChannelRealization(cgauss(rng, n, m), cgauss(rng, m, k), cgauss(rng, n, k))
    regions = [Region(int(b)) for b in rng.integers(0, 2, k)]
    return ch, regions, random_elements(rng, n), cgauss(rng, m, k) * 0.5


def test_effective_channel_ris_off(rng):
    h_b, h_r, h_br = cgauss(rng, 3), cgauss(rng, 4), cgauss(rng, 4, 3)
    np.testing.assert_array_equal(effective_channel(h_b, h_r, np.zeros((4, 4)), h_br), h_b)


def test_effective_channel_identity_cascade(rng):
    h_r = cgauss(rng, 3)
    out = effective_channel(np.zeros(3), h_r, np.eye(3), np.eye(3))
    np.testing.assert_allclose(out, h_r)


def test_effective_channel_triple_product(rng):
    h_b, h_r, h_br = cgauss(rng, 2), cgauss(rng, 3), cgauss(rng, 3, 2)
    theta = np.diag(cgauss(rng, 3))
    expect = [h_b[m] + sum(h_r[i] * theta[i, i] * h_br[i, m] for i in range(3)) for m in range(2)]
    np.testing.assert_allclose(effective_channel(h_b, h_r, theta, h_br), expect, rtol=1e-12)


def test_effective_channel_shape_error(rng):
    with pytest.raises(ValueError):
        effective_channel(cgauss(rng, 2), cgauss(rng, 3), np.eye(3), cgauss(rng, 3, 4))


def test_sinr_single_user():
    noise = NoiseModel(sigma2=0.5, bandwidth=1e6, p_max=2.0)
    eff = np.array([[1.0, 0.0, 0.0]])
    w = np.array([[math.sqrt(2.0)], [0.0], [0.0]])
    assert sinr(0, w, eff, noise) == pytest.approx(2.0 / 0.5)
    assert sinr(0, np.zeros((3, 1)), eff, noise) == 0.0


def test_sinr_two_user_expansion(rng):
    noise = NoiseModel(sigma2=0.3)
    eff, w = cgauss(rng, 2, 3), cgauss(rng, 3, 2)
    for k in range(2):
        u = 1 - k
        s = abs(sum(eff[k, m] * w[m, k] for m in range(3))) ** 2
        i = abs(sum(eff[k, m] * w[m, u] for m in range(3))) ** 2
        assert sinr(k, w, eff, noise) == pytest.approx(s / (i + 0.3), rel=1e-12)
    np.testing.assert_allclose(sinr_all(w, eff, noise), [sinr(0, w, eff, noise),
                                                         sinr(1, w, eff, noise)], rtol=1e-12)


@pytest.mark.parametrize("gamma,expect", [(0, 0), (1, 1e6), (3, 2e6)])
def test_rate(gamma, expect):
    assert rate(gamma, 1e6) == pytest.approx(expect)


def test_sum_rate_zero_beamformer(rng):
    ch, regions, e, w = random_instance(rng, 2, 4, 3)
    assert sum_rate(ch, regions, e, np.zeros_like(w), NoiseModel(1.0)) == 0.0


def test_sum_rate_single_user_direct_only(rng):
    noise = NoiseModel(sigma2=0.7, bandwidth=2e5)
    ch = ChannelRealization(np.zeros((4, 3), complex), cgauss(rng, 3, 1), cgauss(rng, 4, 1))
    w = cgauss(rng, 3, 1)
    expect = 2e5 * math.log2(1 + abs(ch.h_bu[:, 0] @ w[:, 0]) ** 2 / 0.7)
    got = sum_rate(ch, [Region.REFLECTION], random_elements(rng, 4), w, noise)
    assert got == pytest.approx(expect, rel=1e-12)


def test_sum_rate_matches_end_to_end_oracle(rng):
    noise = NoiseModel(sigma2=0.25)
    ch, regions, e, w = random_instance(rng, 2, 4, 3)
    assert sum_rate(ch, regions, e, w, noise) == pytest.approx(
        naive_sum_rate(ch, regions, e, w, noise), rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 2 * math.pi))
def test_sinr_phase_invariance(seed, phi):
    rng = np.random.default_rng(seed)
    eff, w = cgauss(rng, 3, 2), cgauss(rng, 2, 3)
    noise = NoiseModel(0.1)
    rot = eff.copy()
    rot[1] *= complex(math.cos(phi), math.sin(phi))
    # |e^{j phi} x|^2 equals |x|^2 only up to rounding
    np.testing.assert_allclose(sinr_all(w, rot, noise)[1], sinr_all(w, eff, noise)[1], rtol=1e-13)
    rot[1] = -eff[1]
    assert sinr_all(w, rot, noise)[1] == sinr_all(w, eff, noise)[1]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 10), st.floats(1.01, 10))
def test_sinr_monotone_in_noise(seed, s2, factor):
    rng = np.random.default_rng(seed)
    eff, w = cgauss(rng, 3, 2), cgauss(rng, 2, 3)
    lo = sinr_all(w, eff, NoiseModel(s2))
    hi = sinr_all(w, eff, NoiseModel(s2 * factor))
    assert np.all(hi < lo)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sum_rate_nonnegative(seed):
    rng = np.random.default_rng(seed)
    ch, regions, e, w = random_instance(rng, 3, 4, 3)
    assert sum_rate(ch, regions, e, w, NoiseModel(0.2)) >= 0.0


def test_brute_force_equivalence_grid():
    rng = np.random.default_rng(11)
    noise = NoiseModel(sigma2=0.4, bandwidth=1e6)
    for trial in range(100):
        m, n, k = rng.integers(1, 4), rng.integers(1, 5), rng.integers(1, 4)
        ch, regions, e, w = random_instance(rng, m, n, k)
        fast = sum_rate(ch, regions, e, w, noise)
        slow = naive_sum_rate(ch, regions, e, w, noise)
        assert fast == pytest.approx(slow, rel=1e-9), (trial, m, n, k)


def test_user_rates_with_zero_cascade_equals_direct(rng):
    ch, _, _, w = random_instance(rng, 2, 4, 3)
    noise = NoiseModel(0.3)
    coeffs = np.zeros((3, 4), complex)
    np.testing.assert_allclose(effective_channels(ch, coeffs), ch.h_bu.T)
    assert user_rates(ch, coeffs, w, noise).shape == (3,)


def test_noise_budget_default():
    noise = NoiseModel.from_link_budget(1e6, 10.0)
    assert 10 * math.log10(noise.sigma2) + 30 == pytest.approx(-104.0)
    assert total_power(np.array([[1j, 1.0]])) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        NoiseModel(sigma2=0.0)
