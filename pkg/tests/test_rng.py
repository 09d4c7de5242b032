"""The portable draw contract: same seed, same bytes, documented transforms."""

import numpy as np
import pytest
from scipy.special import ndtri

from tlasso.rng import (BITSTREAM_CONTRACT, cauchy, make_rng, normals,
                        student_t, uniforms)


def test_contract_string_present():
    assert BITSTREAM_CONTRACT.endswith(":v1")


def test_same_seed_same_stream():
    a = uniforms(make_rng(123), 1000)
    b = uniforms(make_rng(123), 1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, uniforms(make_rng(124), 1000))


def test_uniforms_clamped_open_interval():
    u = uniforms(make_rng(0), 100000)
    assert u.min() >= 2.0 ** -53
    assert u.max() < 1.0


def test_normals_are_inverse_cdf_of_uniforms():
    assert np.array_equal(normals(make_rng(9), 500),
                          ndtri(uniforms(make_rng(9), 500)))


def test_student_t_draw_order():
    # numerator normals first, then df chi-square blocks
    rng = make_rng(4)
    z = normals(rng, 200)
    chi2 = sum(normals(rng, 200) ** 2 for _ in range(3))
    want = z / np.sqrt(chi2 / 3)
    assert np.array_equal(student_t(make_rng(4), 3, 200), want)


def test_student_t_requires_integer_df():
    with pytest.raises(ValueError):
        student_t(make_rng(0), 2.5, 10)
    with pytest.raises(ValueError):
        student_t(make_rng(0), 0, 10)


def test_cauchy_is_tangent_transform():
    u = uniforms(make_rng(6), 300)
    assert np.array_equal(cauchy(make_rng(6), 300),
                          np.tan(np.pi * (u - 0.5)))


def test_distribution_sanity():
    n = 200000
    assert normals(make_rng(1), n).var() == pytest.approx(1.0, rel=0.02)
    t = student_t(make_rng(2), 3, n)
    assert np.median(np.abs(t)) == pytest.approx(0.765, abs=0.02)
    c = cauchy(make_rng(3), n)
    assert np.median(c) == pytest.approx(0.0, abs=0.02)


def test_shapes():
    assert normals(make_rng(0), (4, 5)).shape == (4, 5)
    assert student_t(make_rng(0), 2, 7).shape == (7,)
