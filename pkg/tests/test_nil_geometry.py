import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilwillmore import nil_geometry as ng

finite = st.floats(-5, 5, allow_nan=False)


def test_cyl_to_cart_axis_point():
    p = ng.cyl_to_cart(ng.CylPoint(0.0, 1.3, 5.0))
    assert (p.x, p.y, p.z) == (0.0, 0.0, 5.0)


def test_cyl_to_cart_unit_on_x_axis():
    p = ng.cyl_to_cart(ng.CylPoint(1.0, 0.0, 0.0))
    assert (p.x, p.y, p.z) == (1.0, 0.0, 0.0)


def test_cyl_to_cart_diagonal():
    p = ng.cyl_to_cart(ng.CylPoint(1.0, np.pi / 4, 0.0))
    np.testing.assert_allclose(p.as_array(), [np.sqrt(2) / 2, np.sqrt(2) / 2, 0.25], atol=1e-15)


def test_cylpoint_rejects_negative_rho():
    with pytest.raises(ValueError):
        ng.CylPoint(-1.0, 0.0, 0.0)


def test_nilpoint_rejects_nonfinite():
    with pytest.raises(ValueError):
        ng.NilPoint(np.nan, 0.0, 0.0)


def test_framevector_rejects_nonfinite():
    with pytest.raises(ValueError):
        ng.FrameVector(np.inf, 0.0, 0.0)


def test_framevector_norm_is_euclidean():
    v = ng.FrameVector(1.0, 2.0, 2.0)
    assert v.norm() == 3.0
    assert (v - v).norm() == 0.0
    assert (2 * v).dot(v) == 18.0


def test_metric_cyl_examples():
    p2 = ng.CylPoint(2.0, 0.3, 1.0)
    assert ng.metric_cyl(ng.CylPoint(0.7, 0.0, 0.0), [1, 0, 0], [1, 0, 0]) == 1.0
    assert ng.metric_cyl(p2, [0, 1, 0], [0, 1, 0]) == pytest.approx(8.0, abs=1e-15)
    assert ng.metric_cyl(p2, [0, 1, 0], [0, 0, 1]) == pytest.approx(-2.0, abs=1e-15)


def test_levi_civita_examples():
    np.testing.assert_array_equal(ng.levi_civita(1, 3).as_array(), [0, -0.5, 0])
    np.testing.assert_array_equal(ng.levi_civita(3, 3).as_array(), [0, 0, 0])
    np.testing.assert_array_equal(ng.levi_civita(1, 2).as_array(), [0, 0, 0.5])
    np.testing.assert_array_equal(ng.levi_civita(2, 1).as_array(), [0, 0, -0.5])
    np.testing.assert_array_equal(ng.levi_civita(3, 1).as_array(), [0, -0.5, 0])
    np.testing.assert_array_equal(ng.levi_civita(2, 3).as_array(), [0.5, 0, 0])
    np.testing.assert_array_equal(ng.levi_civita(3, 2).as_array(), [0.5, 0, 0])
    for i in (1, 2, 3):
        assert ng.levi_civita(i, i).norm() == 0.0


def test_levi_civita_index_range():
    with pytest.raises(IndexError):
        ng.levi_civita(0, 1)
    with pytest.raises(IndexError):
        ng.levi_civita(1, 4)


def test_connection_is_metric_compatible():
    e = np.eye(3)
    for i in (1, 2, 3):
        for j in (1, 2, 3):
            for k in (1, 2, 3):
                a = ng.levi_civita(i, j).as_array() @ e[k - 1]
                b = e[j - 1] @ ng.levi_civita(i, k).as_array()
                assert a + b == 0.0


def test_connection_is_torsion_free():
    for i in (1, 2, 3):
        for j in (1, 2, 3):
            torsion = ng.levi_civita(i, j) - ng.levi_civita(j, i) - ng.bracket(i, j)
            assert torsion.norm() == 0.0
    assert ng.bracket(1, 2).as_array().tolist() == [0, 0, 1]


def test_tangent_sectional_curvature_examples():
    assert ng.tangent_sectional_curvature(0.0) == 0.25
    assert ng.tangent_sectional_curvature(1.0) == -0.75
    assert ng.tangent_sectional_curvature(-1.0) == -0.75
    assert ng.tangent_sectional_curvature(0.5) == 0.0
    with pytest.raises(ValueError):
        ng.tangent_sectional_curvature(1.5)


def test_volume_density_cyl_examples():
    assert ng.volume_density_cyl(0.0) == 0.0
    assert ng.volume_density_cyl(2.0) == 2.0
    with pytest.raises(ValueError):
        ng.volume_density_cyl(-0.1)


def test_volume_density_is_sqrt_det():
    for rho in (0.3, 1.0, 2.5):
        assert np.sqrt(np.linalg.det(ng.metric_cyl_matrix(rho))) == pytest.approx(ng.volume_density_cyl(rho), rel=1e-14)


def test_volume_density_matches_scaling_construction():
    # solid swept by (t rho(r), h(r)), t in [0, 1], for the meridian (sin r, -cos r):
    # the Jacobian of (t, r) -> (rho, h) is rho h', so d nu = t rho^2 h' dt dr dphi
    from scipy.integrate import quad
    swept = np.pi * quad(lambda r: np.sin(r) ** 2 * np.sin(r), 0, np.pi)[0]
    direct = quad(lambda hh: 2 * np.pi * quad(ng.volume_density_cyl, 0, np.sqrt(1 - hh * hh))[0],
                  -1, 1)[0]
    assert swept == pytest.approx(direct, rel=1e-10)
    assert swept == pytest.approx(4 * np.pi / 3, rel=1e-12)


@given(x=finite, y=finite, z=finite)
def test_frame_is_orthonormal(x, y, z):
    p = ng.NilPoint(x, y, z)
    E = ng.frame_vectors_cart(p)
    G = E @ ng.metric_cart_matrix(p) @ E.T
    np.testing.assert_allclose(G, np.eye(3), atol=1e-12 * (1 + x * x))


@given(x=finite, v=st.lists(finite, min_size=3, max_size=3))
def test_to_frame_preserves_norm(x, v):
    p = ng.NilPoint(x, 0.0, 0.0)
    comp = ng.to_frame(x, v)
    v = np.array(v)
    assert comp @ comp == pytest.approx(v @ ng.metric_cart_matrix(p) @ v, rel=1e-12, abs=1e-12)


@given(rho=st.floats(0, 3), h=finite)
def test_cyl_to_cart_on_phi_zero(rho, h):
    p = ng.cyl_to_cart(ng.CylPoint(rho, 0.0, h))
    assert (p.x, p.y, p.z) == (rho, 0.0, h)


def _complex_step_jacobian(f, x0, step=1e-30):
    # difference quotient along an imaginary step: no subtractive cancellation
    cols = []
    for j in range(x0.size):
        xc = x0.astype(complex)
        xc[j] += 1j * step
        cols.append(np.imag(np.asarray(f(xc))) / step)
    return np.column_stack(cols)


@settings(max_examples=200)
@given(rho=st.floats(0.0, 3.0), phi=st.floats(-7, 7), h=finite)
def test_metric_cyl_is_pullback_of_cartesian(rho, phi, h):
    x0 = np.array([rho, phi, h])
    J = _complex_step_jacobian(lambda q: np.array(ng.cyl_to_cart_arrays(*q)), x0)
    p = ng.cyl_to_cart(ng.CylPoint(rho, phi, h))
    G = J.T @ ng.metric_cart_matrix(p) @ J
    np.testing.assert_allclose(G, ng.metric_cyl_matrix(rho), rtol=0, atol=1e-12 * (1 + rho**4))


def test_metric_cyl_pullback_with_real_stencil_converges():
    from nilwillmore.numerics import finite_difference
    x0 = np.array([2.5, 0.7, 0.3])
    p = ng.cyl_to_cart(ng.CylPoint(*x0))
    errs = []
    for step in (4e-2, 2e-2):
        J = finite_difference(lambda q: np.array(ng.cyl_to_cart_arrays(*q)), x0, order=4, step=step)
        errs.append(np.max(np.abs(J.T @ ng.metric_cart_matrix(p) @ J - ng.metric_cyl_matrix(2.5))))
    assert abs(np.log2(errs[0] / errs[1]) - 4) < 0.3


@given(rho=st.floats(0.0, 3.0), phi=st.floats(-7, 7), h=finite)
def test_cyl_jacobian_is_exact_pullback(rho, phi, h):
    J = np.column_stack(ng.cyl_jacobian(rho, phi, h))
    p = ng.cyl_to_cart(ng.CylPoint(rho, phi, h))
    G = J.T @ ng.metric_cart_matrix(p) @ J
    np.testing.assert_allclose(G, ng.metric_cyl_matrix(rho), atol=1e-12 * (1 + rho**4))
