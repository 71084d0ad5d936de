import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridfilter.detect import DiscontinuityWindow
from hybridfilter.dg import build_mesh, gauss_legendre, grid_points, project
from hybridfilter.hybrid import (HERMITE, LABELS, NN, SIAC_GLOBAL, HybridConfig,
                                 _element_x, hermite_patch, hybrid_filter_euler,
                                 hybrid_filter_field, lagrange_eval)
from hybridfilter.nn_filter import ArchitectureConfig, init_params
from hybridfilter.siac import global_kernel, siac_filter
from hybridfilter.solvers import project_initial
from hybridfilter.solvers.euler import EulerFields

MODEL = init_params(ArchitectureConfig(n_hidden_layers=1, hidden_channels=4), seed=0)


def _step_field(p=2, N=64, x0=0.31):
    m = build_mesh(-5, 5, N)
    return project(lambda x: np.where(x < x0, 1.0, 0.3) + 0.05 * np.sin(x), m, p,
                   gauss_legendre(12))


def test_no_windows_is_global_siac():
    u = project(lambda x: np.sin(0.6 * x), build_mesh(-5, 5, 32), 2)
    res = hybrid_filter_field(u, HybridConfig(2, model=MODEL), windows=[])
    ref = siac_filter(u, global_kernel(2))
    assert np.array_equal(res.grid.values, ref.values)
    assert set(res.labels) <= {0, SIAC_GLOBAL}


def test_smooth_data_detects_nothing_in_periodic_mode():
    u = project(lambda x: 0.5 + 0 * x, build_mesh(-5, 5, 32), 2)
    res = hybrid_filter_field(u, HybridConfig(2, model=MODEL, periodic=True))
    assert res.windows == []


def test_constant_data_with_forced_window():
    u = project(lambda x: 0.7 + 0 * x, build_mesh(-5, 5, 32), 3)
    w = [DiscontinuityWindow(14, 16, 4, 10, 20, 15)]
    res = hybrid_filter_field(u, HybridConfig(3, model=MODEL), windows=w)
    assert np.max(np.abs(res.grid.values - 0.7)) < 1e-12
    assert np.sum(res.labels == NN) == 4


def test_labels_partition_and_locality():
    u = _step_field()
    cfg = HybridConfig(2, model=MODEL)
    res = hybrid_filter_field(u, cfg)
    assert len(res.windows) == 1
    w = res.windows[0]
    assert res.labels.shape == res.grid.values.shape
    assert np.sum(res.labels == NN) == 4
    assert np.sum(res.labels == HERMITE) == 8
    nn_cells = np.unique(np.flatnonzero(res.labels == NN) // 4)
    assert list(nn_cells) == [w.j_dagger]
    glob = siac_filter(u, cfg.kernel)
    inside = np.zeros(u.mesh.n_elements, bool)
    inside[w.elements(u.mesh.n_elements)] = True
    outside = ~np.repeat(inside, 4)
    assert np.array_equal(res.grid.values[outside], glob.values[outside])
    assert np.all(res.labels[~outside] != SIAC_GLOBAL)
    assert res.label_names[0] in LABELS


def test_rerun_identical():
    u = _step_field()
    a = hybrid_filter_field(u, HybridConfig(2, model=MODEL))
    b = hybrid_filter_field(u, HybridConfig(2, model=MODEL))
    assert np.array_equal(a.grid.values, b.grid.values)


def test_boundary_policy_skips_with_warning(caplog):
    u = _step_field(N=32, x0=-4.8)
    w = [DiscontinuityWindow(0, 1, 4, 0, 5, 1)]
    with caplog.at_level(logging.WARNING):
        res = hybrid_filter_field(u, HybridConfig(2, model=MODEL), windows=w)
    assert np.sum(res.labels == NN) == 0
    assert np.sum(res.labels == HERMITE) == 0
    assert "skipped" in caplog.text


def test_hermite_reproduces_lines_and_quadratics():
    m = build_mesh(0, 1, 10)
    q = gauss_legendre(4)
    x = grid_points(m, q)
    xe = _element_x(m, q)
    for deg, p_h in ((1, 1), (1, 2), (2, 2)):
        f = lambda s: 2.0 - 3.0 * s + (s * s if deg == 2 else 0.0)
        vals = f(x)
        out = hermite_patch(vals, vals, xe, 5, p_h, 4, 10)
        for e, (idx, v) in out.items():
            assert np.allclose(v, f(x[idx]), atol=1e-12)


def test_hermite_p1_is_line_through_two_points():
    m = build_mesh(0, 1, 10)
    q = gauss_legendre(4)
    x = grid_points(m, q)
    vals = np.random.default_rng(0).normal(size=40)
    out = hermite_patch(vals, vals, _element_x(m, q), 5, 1, 4, 10)
    idx, v = out[6]
    x0, y0 = x[23], vals[23]
    x1, y1 = x[28], vals[28]
    assert np.allclose(v, y0 + (y1 - y0) * (x[idx] - x0) / (x1 - x0))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([-1, 1]))
def test_hermite_p1_monotone_bounds(seed, sign):
    rng = np.random.default_rng(seed)
    m = build_mesh(0, 1, 10)
    q = gauss_legendre(4)
    vals = np.cumsum(rng.random(40)) * sign
    out = hermite_patch(vals, vals, _element_x(m, q), 5, 1, 4, 10)
    for e, (idx, v) in out.items():
        anchors = vals[[20, 15]] if e == 4 else vals[[23, 28]]
        assert np.all(v >= anchors.min() - 1e-12) and np.all(v <= anchors.max() + 1e-12)


def test_hermite_p2_can_overshoot_monotone_anchors():
    # a quadratic through monotone data need not stay within it
    px = np.array([0.0, 1.0, 1.1])
    py = np.array([0.0, 0.001, 1.0])
    v = lagrange_eval(px, py, np.linspace(0.1, 0.9, 5))
    assert v.min() < 0.0
    with pytest.raises(ValueError):
        lagrange_eval(np.array([0.0, 0.0]), np.array([1.0, 2.0]), np.zeros(1))


def _constant_euler(N=32, p=2, state=(1.3, 0.4, 2.2)):
    from hybridfilter.solvers import to_conservative
    m = build_mesh(-5, 5, N)
    cons = to_conservative(*state)
    fields = [project(lambda x, c=c: c + 0 * x, m, p) for c in cons]
    g = np.array(cons)
    return EulerFields(*fields, ghosts=(g, g))


def test_euler_constant_state_end_to_end():
    f = _constant_euler()
    cfg = HybridConfig(2, model=MODEL)
    res = hybrid_filter_euler(f, cfg)
    assert res["rho"].windows == []
    forced = hybrid_filter_euler(f, cfg, windows=[DiscontinuityWindow(14, 16, 4, 10, 20, 15)])
    for name, want in (("rho", 1.3), ("u", 0.4), ("p", 2.2), ("S", 2.2 / 1.3 ** 1.4)):
        assert np.max(np.abs(forced[name].grid.values - want)) < 1e-9


def test_euler_windows_shared_and_positivity_guard():
    f = project_initial("sod", build_mesh(-5, 5, 64), 1)
    res = hybrid_filter_euler(f, HybridConfig(1, model=MODEL))
    assert len(res["rho"].windows) >= 1
    assert res["mom"].windows == res["rho"].windows == res["p"].windows
    bad = EulerFields(f.rho.with_coeffs(-f.rho.coeffs), f.mom, f.energy, ghosts=f.ghosts)
    with pytest.raises(ValueError, match="non-positive"):
        hybrid_filter_euler(bad, HybridConfig(1), windows=[])


def test_csv_labels(tmp_path):
    res = hybrid_filter_field(_step_field(), HybridConfig(2, model=MODEL))
    res.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "x,value,label"
    assert sum(line.endswith(",nn") for line in lines) == 4
