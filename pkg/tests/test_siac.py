import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad as sciquad

from hybridfilter.dg import build_mesh, eval_grid, project
from hybridfilter.siac import (SIACKernel, bspline, global_kernel, moving_average_filter,
                               moving_average_kernel, siac_filter, siac_values,
                               solve_coefficients)


def test_bspline_values():
    assert bspline(1, 0.0) == 1.0
    assert bspline(1, 0.5) == 0.0  # half-open on the right
    assert bspline(2, 0.0) == pytest.approx(1.0)
    assert bspline(3, 0.0) == pytest.approx(0.75)
    assert bspline(4, 0.0) == pytest.approx(2 / 3)


@pytest.mark.parametrize("order", [1, 2, 3, 4, 5])
def test_bspline_partition_of_unity_and_mass(order):
    x = np.linspace(-0.37, 0.63, 9)
    shifts = np.arange(-order, order + 1)
    total = sum(bspline(order, x - s) for s in shifts)
    assert np.allclose(total, 1.0, atol=1e-13)
    mass = sciquad(lambda t: bspline(order, t), -order / 2, order / 2, limit=200,
                   points=list(np.arange(-order / 2, order / 2 + 1)))[0]
    assert mass == pytest.approx(1.0, abs=1e-10)


def test_three_spline_linear_kernel_coefficients():
    k = solve_coefficients(2, 1)
    assert np.allclose(k.coeffs, [-1 / 12, 7 / 6, -1 / 12], atol=1e-13)


@pytest.mark.parametrize("r,k", [(0, 0), (2, 1), (4, 2), (6, 3), (8, 4), (3, 2)])
def test_kernel_moments_by_scipy(r, k):
    K = solve_coefficients(r, k)
    rad = K.support_radius
    brk = list(K.breakpoints())
    for m in range(r + 1):
        val = sciquad(lambda x: K(np.array([x]))[0] * x ** m, -rad, rad, points=brk,
                      limit=400, epsabs=1e-11)[0]
        assert val == pytest.approx(1.0 if m == 0 else 0.0, abs=1e-9)


def test_moving_average_is_unit_box():
    K = moving_average_kernel()
    assert K.r == 0 and K.k == 0
    assert np.allclose(K.coeffs, [1.0])
    assert K.support_radius == 0.5


def test_kernel_json_round_trip():
    K = global_kernel(2)
    back, H = SIACKernel.from_json(K.to_json(0.25))
    assert H == 0.25
    assert back.r == 4 and back.k == 2
    assert np.array_equal(back.coeffs, K.coeffs)


def test_ill_conditioned_system_raises():
    with pytest.raises(np.linalg.LinAlgError):
        solve_coefficients(40, 0)


@pytest.mark.parametrize("r,k", [(2, 1), (4, 2), (6, 3)])
def test_polynomial_reproduction(r, k):
    K = solve_coefficients(r, k)
    m = build_mesh(-1, 1, 20)
    x = np.linspace(-0.5, 0.5, 50)
    for deg in range(r + 1):
        u = project(lambda s: s ** deg, m, max(deg, 1))
        vals, ok = siac_values(u, K, x)
        assert ok.all()
        assert np.max(np.abs(vals - x ** deg)) < 1e-9


def test_convolution_against_brute_force():
    m = build_mesh(0, 1, 10)
    u = project(lambda s: np.where(s < 0.43, np.sin(5 * s), 2 + s * s), m, 2)
    K = global_kernel(1)
    h = m.h
    for x0 in (0.31, 0.5, 0.62):
        brk = sorted(set(list(m.faces) + list(x0 - h * K.breakpoints())))
        R = K.support_radius * h
        brk = [b for b in brk if x0 - R - 1e-12 <= b <= x0 + R + 1e-12]
        ref = sciquad(lambda y: K(np.array([(x0 - y) / h]))[0] * u.evaluate(np.array([y]))[0],
                      brk[0], brk[-1], points=brk[1:-1], limit=400, epsabs=1e-11)[0] / h
        val, _ = siac_values(u, K, [x0])
        assert val[0] == pytest.approx(ref, abs=1e-11)


def test_boundary_points_keep_unfiltered_value():
    m = build_mesh(0, 1, 16)
    u = project(np.exp, m, 2)
    g = siac_filter(u, global_kernel(2))
    raw = eval_grid(u)
    K = global_kernel(2)
    inside = (g.x - K.support_radius * m.h >= 0) & (g.x + K.support_radius * m.h <= 1)
    assert np.array_equal(g.values[~inside], raw.values[~inside])
    assert not np.array_equal(g.values[inside], raw.values[inside])


def test_periodic_wrap_matches_shifted_interior():
    m = build_mesh(0, 1, 16)
    f = lambda s: np.sin(2 * np.pi * s)
    u = project(f, m, 2)
    per = siac_filter(u, global_kernel(2), periodic=True)
    err = np.abs(per.values - f(per.x))
    assert err.max() < 1e-4


def test_moving_average_of_step_is_local():
    m = build_mesh(-1, 1, 16)
    u = project(lambda s: (s >= 0).astype(float), m, 1)
    g = moving_average_filter(u)
    far = np.abs(g.x) > m.h
    assert np.allclose(g.values[far], (g.x[far] >= 0).astype(float), atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 3), st.floats(-10, 10), st.integers(0, 2**31 - 1))
def test_constants_pass_through(p, c, seed):
    m = build_mesh(-2, 3, 12)
    u = project(lambda s: c + 0 * s, m, p)
    for K in (moving_average_kernel(), global_kernel(max(p, 1))):
        g = siac_filter(u, K, periodic=bool(seed % 2))
        assert np.allclose(g.values, c, atol=1e-12 * max(1, abs(c)))
