import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfsqueezer.errors import PointOnCurve, RefinementRequired
from cfsqueezer.linsys import (
    ACMatrix,
    ComplexTrace,
    QuadMatrix,
    check_symmetry,
    from_quadrature_basis,
    rotation,
    svd_gain,
    to_quadrature_basis,
    winding_number,
)

finite = st.floats(-5, 5, allow_nan=False)
cplx = st.builds(complex, finite, finite)


def random_ac(rng, n):
    z = lambda: rng.normal(size=n) + 1j * rng.normal(size=n)  # noqa: E731
    return ACMatrix(z(), z(), z(), z(), np.zeros(n))


def test_identity_maps_to_identity():
    q = to_quadrature_basis(ACMatrix.identity())
    assert np.allclose([q.xx, q.xp, q.px, q.pp], [1, 0, 0, 1], atol=1e-15)


def test_squeezer_basis_change():
    r = 0.3
    m = ACMatrix(math.cosh(r), math.sinh(r), math.sinh(r), math.cosh(r))
    q = to_quadrature_basis(m)
    assert q.xx == pytest.approx(1.34986, abs=1e-5)
    assert q.pp == pytest.approx(0.74082, abs=1e-5)
    assert abs(q.xp) < 1e-15 and abs(q.px) < 1e-15


def test_trace_det_preserved_10k():
    rng = np.random.default_rng(1)
    m = random_ac(rng, 10_000)
    q = to_quadrature_basis(m)
    scale = 1 + np.abs(m.det())
    assert np.max(np.abs(q.trace() - m.trace())) < 1e-11
    assert np.max(np.abs(q.det() - m.det()) / scale) < 1e-11


@given(cplx, cplx, cplx, cplx)
def test_basis_round_trip(a, b, c, d):
    m = ACMatrix(a, b, c, d)
    back = from_quadrature_basis(to_quadrature_basis(m))
    assert np.allclose([back.aa, back.ac, back.ca, back.cc], [a, b, c, d], atol=1e-12)


def test_symmetric_response_has_no_cross_terms():
    w = np.linspace(-3, 3, 7)
    ga = lambda x: np.exp(1j * 0.4 * x) * (1.2 + 0.1j * x)  # noqa: E731
    gc = lambda x: np.exp(1j * 0.4 * x) * (0.5 - 0.05j * x)  # noqa: E731
    q = to_quadrature_basis(ACMatrix.from_pair(ga, gc, w))
    assert np.max(np.abs(q.xp)) < 1e-14 and np.max(np.abs(q.px)) < 1e-14


def test_check_symmetry_examples():
    grid = np.linspace(0, 1e12, 9)
    assert check_symmetry(lambda w: np.exp(1j * w * 1e-12), grid)
    assert check_symmetry(lambda w: 0.3 + 0 * w, grid)
    assert not check_symmetry(lambda w: np.exp(1j * w * (1 + 1e-14 * w) * 1e-12), grid)


def test_svd_diagonal():
    th, gx, gp, ph = svd_gain(QuadMatrix.diag(2.0, 0.5))
    assert (th, gx, gp, ph) == pytest.approx((0, 2, 0.5, 0), abs=1e-15)


@given(st.floats(0, 3))
def test_svd_squeezer(r):
    q = to_quadrature_basis(ACMatrix(math.cosh(r), math.sinh(r), math.sinh(r), math.cosh(r)))
    _, gx, gp, _ = svd_gain(q)
    assert gx == pytest.approx(math.exp(r), rel=1e-12)
    assert gp == pytest.approx(math.exp(-r), rel=1e-10)
    assert gx * gp == pytest.approx(1, abs=1e-10)


def test_svd_matches_generic_routine():
    rng = np.random.default_rng(7)
    for _ in range(200):
        m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        q = QuadMatrix(*m.ravel())
        _, gx, gp, _ = svd_gain(q)
        ref = np.linalg.svd(m, compute_uv=False)
        assert gx == pytest.approx(ref[0], rel=1e-12)
        assert gp == pytest.approx(ref[1], rel=1e-9, abs=1e-12)
        assert gx * gp == pytest.approx(abs(np.linalg.det(m)), rel=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 5), st.floats(0.05, 5))
def test_svd_reconstructs_real_positive_det(theta, phi, a, b):
    gx, gp = max(a, b), min(a, b)
    m = rotation(theta) @ np.diag([gx, gp]) @ rotation(phi)
    t, x, p, f = svd_gain(QuadMatrix(*m.ravel()))
    rec = rotation(t) @ np.diag([x, p]) @ rotation(f)
    assert np.allclose(rec, m, atol=1e-9 * gx)


def circle(n=256, r=1.0, c=0j, turns=1):
    th = np.linspace(0, 2 * np.pi * turns, n * turns, endpoint=False)
    return ComplexTrace(th, c + r * np.exp(1j * th))


def test_winding_circle():
    assert winding_number(circle(), 0j) == 1
    assert winding_number(circle(), 3 + 0j) == 0
    assert winding_number(circle(turns=2), 0j) == 2


def test_winding_lemniscate_lobes():
    t = np.linspace(0, 2 * np.pi, 4000, endpoint=False)
    z = np.cos(t) / (1 + np.sin(t) ** 2) * (1 + 1j * np.sin(t))
    tr = ComplexTrace(t, z)
    assert winding_number(tr, 0.6 + 0j) == -winding_number(tr, -0.6 + 0j)
    assert abs(winding_number(tr, 0.6 + 0j)) == 1


def test_winding_errors():
    with pytest.raises(RefinementRequired):
        winding_number(circle(n=4), 0j)
    with pytest.raises(PointOnCurve):
        winding_number(circle(), 1 + 0j)


@settings(max_examples=1000)
@given(st.floats(-math.pi, math.pi), st.integers(1, 3))
def test_winding_invariances(angle, k):
    base = circle(n=64, r=2.0, c=0.5 + 0.2j)
    rot = ComplexTrace(base.omega, 0.5 + 0.2j + (base.values - 0.5 - 0.2j) * np.exp(1j * angle))
    dense = circle(n=64 * (k + 1), r=2.0, c=0.5 + 0.2j)
    assert winding_number(rot, 0.5 + 0.2j) == winding_number(base, 0.5 + 0.2j) == 1
    assert winding_number(dense, 0.5 + 0.2j) == 1


def test_trace_validation():
    with pytest.raises(ValueError):
        ComplexTrace([0, 0], [1, 2])
    with pytest.raises(ValueError):
        ComplexTrace([0, 1], [1, np.nan])
