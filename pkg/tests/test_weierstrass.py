import csv
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilwillmore import cmc_family as cf
from nilwillmore import weierstrass as w

H_values = st.floats(0.2, 5.0)


def _random_spinor(seed, size=200):
    rng = np.random.default_rng(seed)
    psi1 = rng.normal(size=size) + 1j * rng.normal(size=size)
    psi2 = rng.normal(size=size) + 1j * rng.normal(size=size)
    return psi1, psi2


# -- spinor algebra ---------------------------------------------------------

@given(seed=st.integers(0, 2**32 - 1))
def test_Z_from_spinor_is_isotropic(seed):
    Z = w.Z_from_spinor(*_random_spinor(seed))
    scale = np.sum(np.abs(Z) ** 2, axis=0)
    assert np.max(np.abs(np.sum(Z * Z, axis=0)) / scale) < 1e-14


@given(seed=st.integers(0, 2**32 - 1))
def test_spinor_round_trip(seed):
    Z = w.Z_from_spinor(*_random_spinor(seed))
    psi1, psi2, mask = w.spinor_from_Z(Z, continuation=False)
    assert not mask.any()
    np.testing.assert_allclose(w.Z_from_spinor(psi1, psi2), Z, rtol=0,
                               atol=1e-12 * np.max(np.abs(Z)))


def test_spinor_recovered_up_to_common_sign():
    psi1, psi2 = _random_spinor(3, 50)
    r1, r2, _ = w.spinor_from_Z(w.Z_from_spinor(psi1, psi2), continuation=False)
    sign = np.where(np.abs(r1 - psi1) < np.abs(r1 + psi1), 1.0, -1.0)
    np.testing.assert_allclose(sign * r1, psi1, atol=1e-12)
    np.testing.assert_allclose(sign * r2, psi2, atol=1e-12)


def test_spinor_from_Z_rejects_non_isotropic():
    with pytest.raises(ValueError):
        w.spinor_from_Z(np.array([[1.0 + 0j], [0j], [0j]]), continuation=False)


def test_continuation_needs_2d():
    Z = w.Z_from_spinor(*_random_spinor(1, 10))
    with pytest.raises(ValueError):
        w.spinor_from_Z(Z)


def test_frame_components_rejects_non_conformal():
    x, y = np.meshgrid(np.linspace(0, 1, 5), np.linspace(0, 1, 5), indexing="ij")
    zero = np.zeros_like(x)
    f = np.array([x, 2 * y, zero])
    f_x = np.array([np.ones_like(x), zero, zero])
    f_y = np.array([zero, 2 * np.ones_like(x), zero])
    with pytest.raises(ValueError, match="not conformal"):
        w.frame_components(f, f_x, f_y)
    with pytest.raises(ValueError, match="f_z = 0"):
        w.frame_components(f, 0 * f_x, 0 * f_y)


def test_frame_components_of_a_plane():
    # horizontal plane z = 0 at the origin, where the frame is Cartesian
    f = np.array([[0.0], [0.0], [0.0]])
    f_x = np.array([[1.0], [0.0], [0.0]])
    f_y = np.array([[0.0], [1.0], [0.0]])
    Z = w.frame_components(f, f_x, f_y)
    np.testing.assert_allclose(Z[:, 0], [0.5, -0.5j, 0], atol=1e-15)


def test_potential_and_normal_examples():
    assert w.potential(1.0, 1.0, 0.0) == pytest.approx(0.5 - 0.25j)
    n = w.normal_from_spinor(np.array([1.0 + 0j]), np.array([0j]), np.array([0.0]))
    np.testing.assert_allclose(n[:, 0], [0, 0, -1], atol=1e-15)


# -- charts of the cmc spheres ----------------------------------------------

@pytest.fixture(scope="module")
def grid():
    return w.sphere_grid(0.7, 41)


def test_chart_validation():
    with pytest.raises(ValueError):
        w.square_chart(0j, 1.0, 4)
    with pytest.raises(ValueError):
        w.Chart(np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0]))


def test_sphere_immersion_bad_kind():
    with pytest.raises(ValueError):
        w.sphere_immersion(1.0, "torus")


def test_sphere_grid_pointwise_structure(grid):
    ok = ~grid.mask
    assert ok.all()
    ea = np.abs(grid.psi1) ** 2 + np.abs(grid.psi2) ** 2
    np.testing.assert_allclose(np.exp(grid.alpha), ea, rtol=1e-13)
    np.testing.assert_allclose(np.sqrt(np.sum(grid.normal**2, axis=0)), 1.0, atol=1e-13)
    np.testing.assert_allclose(grid.Z3, grid.psi1 * np.conj(grid.psi2), atol=1e-13)
    np.testing.assert_allclose(grid.n3, w.sphere_chart_n3(grid.chart), atol=1e-12)
    np.testing.assert_allclose(grid.V, grid.U)


def test_conformal_factor_matches_closed_form(grid):
    # the planar chart is w = 1/z, so e^{2 alpha_w} = e^{2 alpha_z}(r) r^4
    X, Y = grid.chart.mesh()
    r = 1 / np.hypot(X, Y)
    np.testing.assert_allclose(np.exp(2 * grid.alpha), cf.conformal_factor(0.7, r) * r**4, rtol=1e-12)


def test_equator_has_balanced_spinor():
    g = w.sphere_grid(0.7, 41, center=1 + 0j, half_width=0.5)
    X, Y = g.chart.mesh()
    on_eq = np.abs(X * X + Y * Y - 1) < 1e-12
    assert on_eq.any()
    np.testing.assert_allclose(np.abs(g.psi1[on_eq]), np.abs(g.psi2[on_eq]), rtol=1e-12)


def test_pole_limit_psi2_vanishes():
    # w -> 0 is the pole n3 = -1, where |psi2|^2 e^{-alpha} = (1 + n3)/2 -> 0
    g = w.sphere_grid(0.7, 21, center=0j, half_width=0.05)
    ok = ~g.mask
    assert ok.any() and g.mask.any()
    ratio = np.abs(g.psi2[ok]) ** 2 / np.exp(g.alpha[ok])
    np.testing.assert_allclose(ratio, (1 + g.n3[ok]) / 2, atol=1e-13)
    assert np.all(ratio < 1e-2)


def test_cylinder_chart_poles():
    g = w.sphere_cylinder_grid(1.0, 201, 32)
    ea = np.exp(g.alpha)
    assert np.max(np.abs(g.psi2[0]) ** 2 / ea[0]) < 1e-9
    assert np.max(np.abs(g.psi1[-1]) ** 2 / ea[-1]) < 1e-9
    np.testing.assert_allclose(g.n3, np.tanh(g.chart.mesh()[0]), atol=1e-12)


@pytest.mark.parametrize("H", [0.3, 1.0, 3.0])
def test_atilde_vanishes_at_stencil_order(H):
    def fields(m):
        at = w.sphere_grid(H, m).Atilde
        s = (m - 1) // 20
        keep = np.zeros(at.shape, dtype=bool)
        keep[3 * s:m - 3 * s, 3 * s:m - 3 * s] = True
        return {"Atilde": np.where(keep, at, np.nan)}

    study = w.convergence_study(fields, 21, levels=3)["Atilde"]
    assert all(abs(o - 4) < 0.3 for o in study["orders"]), study
    g = w.sphere_grid(H, 81)
    scale = w.sup_norm(g.Z3**2 / (2 * H + 1j))
    assert study["norms"][-1] < 1e-5 * scale


def test_mean_curvature_recovered_from_dirac():
    g = w.dressing(w.sphere_grid(0.7, 81), H=None)
    assert w.sup_norm(g.H - 0.7) < 1e-6


def test_single_node_perturbation_is_local(grid):
    psi2 = grid.psi2.copy()
    psi2[20, 20] *= 1.01
    pert = w.dressing(replace(grid, psi2=psi2), H=0.7)
    base = w.identity_fields(grid)["dirac_1"]
    diff = np.abs(w.identity_fields(pert)["dirac_1"] - base)
    diff = np.where(np.isfinite(diff), diff, 0.0)
    assert diff[20, 20] > 1e-4
    far = diff.copy()
    far[20 - 2:20 + 3, 20 - 2:20 + 3] = 0
    assert np.max(far) == 0.0


def test_identities_need_dressed_grid_and_stencil_room():
    raw = w.sphere_grid(0.7, 11, dressed=False)
    with pytest.raises(ValueError):
        w.identity_fields(raw)
    coarse = w.sphere_grid(0.7, 5, half_width=0.1)
    with pytest.raises(ValueError):
        w.identity_fields(coarse)
    with pytest.raises(ValueError):
        w.uv_integral(raw)


@pytest.mark.parametrize("order", [2, 4])
@pytest.mark.parametrize("H", [0.5, 1.0, 2.0])
def test_identity_suite_converges_at_stencil_order(H, order):
    study = w.sphere_identity_study(H, n=21, order=order)
    for name in w.RESIDUAL_NAMES:
        if name == "metric":
            assert max(study[name]["norms"]) < 1e-12
            continue
        assert all(abs(o - order) < 0.3 for o in study[name]["orders"]), (name, study[name])


def test_nested_sizes():
    assert w.nested_sizes(21, 3) == [21, 41, 81]


# -- main equation ------------------------------------------------------------

def _planar_n3_derivatives(x, y):
    q = x * x + y * y
    n3 = (q - 1) / (q + 1)
    dq = 2 / (q + 1) ** 2  # d n3 / d q
    ddq = -4 / (q + 1) ** 3
    n3_x, n3_y = dq * 2 * x, dq * 2 * y
    # Delta f(q) = 4 q f''(q) + 4 f'(q)
    lap = 4 * q * ddq + 4 * dq
    return n3, n3_x, n3_y, lap


def test_main_equation_analytic():
    x, y = np.meshgrid(np.linspace(-3, 3, 61), np.linspace(-3, 3, 61), indexing="ij")
    res = w.main_equation_from_derivatives(*_planar_n3_derivatives(x, y))
    assert np.nanmax(np.abs(res)) < 1e-8


def test_main_equation_examples():
    assert w.main_equation_from_derivatives(0.3, 0.0, 0.0, 0.0) == 0.0
    x = np.array([0.0, 0.5, -0.5])
    np.testing.assert_allclose(w.main_equation_from_derivatives(x, 1.0, 0.0, 0.0), 2 * x / (1 - x * x))
    assert np.isnan(w.main_equation_from_derivatives(1.0, 0.0, 0.0, 0.0))


@pytest.mark.parametrize("order", [2, 4])
def test_main_equation_fd_converges(order):
    norms = []
    for k, n in enumerate((21, 41, 81)):
        chart = w.square_chart(1 + 0.5j, 0.5, n)
        res = w.main_equation_residual(w.sphere_chart_n3(chart), chart, order)
        s = 2**k
        norms.append(w.sup_norm(res[::s, ::s][3:-3, 3:-3]))
    orders = np.log2(np.array(norms[:-1]) / np.array(norms[1:]))
    assert np.all(np.abs(orders - order) < 0.3)


@settings(max_examples=30)
@given(H=H_values, scale=st.floats(0.1, 10.0))
def test_metric_from_n3_scales_with_chart(H, scale):
    # rescaling the chart by c multiplies |d n3/dz|^2, and so e^{2 alpha}, by c^2
    n3 = np.array([-0.5, 0.0, 0.7])
    d = np.array([0.3 + 0.1j, 1.0, 0.2j])
    np.testing.assert_allclose(w.metric_from_n3(n3, scale * d, H), scale**2 * w.metric_from_n3(n3, d, H),
                               rtol=1e-12)


def test_metric_from_n3_degenerate():
    out = w.metric_from_n3(np.array([1.0, 0.2]), np.array([1.0, 0.0]), 1.0)
    assert np.all(np.isnan(out))


# -- integrals --------------------------------------------------------------------

def test_chart_integral_examples():
    chart = w.square_chart(0j, 1.0, 21)
    X, Y = chart.mesh()
    assert w.chart_integral(X * X * Y * Y, chart) == pytest.approx(4 / 9, abs=1e-14)
    cyl = w.cylinder_chart(0.0, 1.0, 11, 16)
    T, TH = cyl.mesh()
    assert w.chart_integral(np.cos(TH) ** 2, cyl) == pytest.approx(np.pi, abs=1e-13)
    with pytest.raises(ValueError):
        w.chart_integral(np.full(X.shape, np.nan), chart)


def test_uv_imaginary_part_vanishes_under_refinement():
    imags = [abs(w.uv_integral(w.sphere_cylinder_grid(1.0, nt, nth)).imag)
             for nt, nth in ((101, 16), (201, 32), (401, 64))]
    assert imags[0] > imags[1]
    assert imags[-1] < 1e-6


def test_uv_real_part_is_the_energy():
    val = w.uv_integral(w.sphere_cylinder_grid(0.5, 401, 64))
    assert val.real == pytest.approx(np.pi, abs=1e-8)


# -- export -------------------------------------------------------------------------

def test_grid_csv(tmp_path, grid):
    path = tmp_path / "grid.csv"
    w.write_grid_csv(grid, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == w.CSV_COLUMNS
    assert len(rows) == 1 + grid.psi1.size
    table = np.array(rows[1:], dtype=float)
    np.testing.assert_allclose(table[:, w.CSV_COLUMNS.index("H")], 0.7)
    with pytest.raises(ValueError):
        w.write_grid_csv(w.sphere_grid(0.7, 11, dressed=False), tmp_path / "x.csv")
