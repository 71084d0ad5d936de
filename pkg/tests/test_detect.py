import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import legendre as npleg

from hybridfilter.detect import (DiscontinuityWindow, detect_windows, element_details,
                                 group_windows, locate_discontinuity_cell, multiwavelet_detect,
                                 pair_details, windows_from_json, windows_to_json)
from hybridfilter.dg import DGField, build_mesh, eval_grid, gauss_legendre, project


def _oracle_details(u: DGField) -> np.ndarray:
    """Left-child mean minus the left-half mean of the degree-p L2 fit over each pair."""
    p = u.degree
    x, w = npleg.leggauss(20)
    basis = np.eye(p + 1)
    out = []
    for j in range(u.mesh.n_elements - 1):
        a, mid = u.mesh.faces[j], u.mesh.faces[j + 1]
        h = mid - a
        # coarse L2 projection onto Legendre polynomials of the pair, one rule per child
        c = np.zeros(p + 1)
        for child, s in ((j, -0.5), (j + 1, 0.5)):
            xi = s + 0.5 * x  # pair reference coordinate
            y = u.mesh.faces[child] + 0.5 * h * (1 + x)
            vals = u.evaluate(np.clip(y, u.mesh.faces[child], u.mesh.faces[child + 1] - 1e-15))
            for k in range(p + 1):
                c[k] += (2 * k + 1) / 2 * 0.5 * np.sum(w * vals * npleg.legval(xi, basis[k]))
        coarse_left = 0.5 * np.sum(w * npleg.legval(-0.5 + 0.5 * x, c))
        out.append(abs(u.means[j] - coarse_left))
    return np.array(out)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_pair_details_match_oracle(p):
    rng = np.random.default_rng(p)
    m = build_mesh(0, 1, 16)
    u = DGField(m, rng.normal(size=(16, p + 1)))
    c = u.coeffs
    got = pair_details(np.stack([c[:-1], c[1:]], axis=1))
    assert np.allclose(got, _oracle_details(u), atol=1e-12)


def test_constant_field_not_flagged():
    m = build_mesh(0, 1, 16)
    u = project(lambda x: 2.5 + 0 * x, m, 2)
    assert multiwavelet_detect(u).size == 0
    assert multiwavelet_detect(u, periodic=True).size == 0


@pytest.mark.parametrize("m_if", [3, 8, 11])
def test_step_at_interface(m_if):
    mesh = build_mesh(0, 1, 16)
    u = project(lambda x: np.where(x >= m_if / 16, 1.0, 0.2), mesh, 2)
    flags = multiwavelet_detect(u)
    assert flags.size > 0 and set(flags) <= {m_if - 1, m_if}
    d = _oracle_details(u)
    per_elem = np.zeros(16)
    per_elem[:-1] = d
    per_elem[1:] = np.maximum(per_elem[1:], d)
    assert list(flags) == list(np.flatnonzero(per_elem > 0.4 * per_elem.max()))


def test_every_tophat_edge_is_flagged():
    m = build_mesh(-5, 5, 128)
    u = project(lambda x: np.where(np.abs(x - 0.37) <= 2.5, 0.9, 0.1), m, 3, gauss_legendre(12))
    flags = multiwavelet_detect(u, periodic=True)
    for edge in (0.37 - 2.5, 0.37 + 2.5):
        j = m.element_of(edge)
        assert np.any(np.abs(flags - j) <= 1)


def test_element_details_periodic_wrap():
    m = build_mesh(0, 1, 8)
    u = project(lambda x: np.where(x < 0.5, 1.0, 0.0), m, 1)
    d = element_details(u, periodic=True)
    # the wrap interface between elements 7 and 0 is a jump too
    assert d[0] > 0 and d[7] > 0
    assert element_details(u)[0] < 1e-14


def test_threshold_validation():
    u = project(np.sin, build_mesh(0, 1, 4), 1)
    with pytest.raises(ValueError):
        multiwavelet_detect(u, C=0.0)
    with pytest.raises(ValueError):
        pair_details(np.zeros((1, 2, 2)), norm="bogus")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-100, 100).filter(lambda a: abs(a) > 1e-3),
       st.sampled_from(["mode0", "l2"]))
def test_detection_scale_covariant(seed, a, norm):
    rng = np.random.default_rng(seed)
    m = build_mesh(0, 1, 12)
    u = DGField(m, rng.normal(size=(12, 3)))
    base = multiwavelet_detect(u, norm=norm)
    assert np.array_equal(multiwavelet_detect(u.with_coeffs(a * u.coeffs), norm=norm), base)


def test_group_examples():
    w = group_windows({10, 12, 30}, n=4, d=4, N=128)
    assert [(x.s_lo, x.s_hi, x.lo, x.hi) for x in w] == [(10, 12, 6, 16), (30, 30, 26, 34)]
    assert len(group_windows({10, 15}, n=4, d=4, N=128)) == 2
    assert len(group_windows({10, 14}, n=4, d=4, N=128)) == 1
    assert group_windows([], 4, 4, 128) == []


def test_group_clip_and_wrap():
    w = group_windows({1, 126}, n=4, d=4, N=128)
    assert [(x.lo, x.hi) for x in w] == [(0, 5), (122, 127)]
    w = group_windows({1, 126}, n=4, d=4, N=128, periodic=True)
    assert len(w) == 1
    assert (w[0].s_lo, w[0].s_hi, w[0].lo, w[0].hi) == (-2, 1, -6, 5)
    assert list(w[0].elements(128)) == [122, 123, 124, 125, 126, 127, 0, 1, 2, 3, 4, 5]
    with pytest.raises(ValueError):
        group_windows({1}, n=0, d=4, N=128)


@settings(max_examples=80, deadline=None)
@given(st.sets(st.integers(0, 63), max_size=20), st.integers(1, 6), st.integers(0, 5))
def test_groups_disjoint_sorted_and_covering(cells, n, d):
    w = group_windows(cells, n, d, 64)
    spans = [(x.s_lo, x.s_hi) for x in w]
    assert spans == sorted(spans)
    assert all(a[1] < b[0] for a, b in zip(spans, spans[1:]))
    covered = set()
    for x in w:
        covered |= set(range(x.s_lo, x.s_hi + 1))
        assert 0 <= x.lo <= x.s_lo and x.s_hi <= x.hi <= 63
    assert set(cells) <= covered


def test_locate_step_between_elements():
    m = build_mesh(0, 1, 16)
    u = project(lambda x: np.where(x >= 9 / 16, 1.0, 0.0), m, 2)
    g = eval_grid(u)
    vals = g.by_element()[4:14].ravel()
    j = locate_discontinuity_cell(vals, 4, 4)
    diffs = np.abs(np.diff(vals))
    brute = 4 + min(i for i in range(len(diffs)) if diffs[i] == diffs.max()) // 4
    assert j == brute == 8


def test_locate_ties_go_left():
    vals = np.arange(20, dtype=float) * 0.5
    assert locate_discontinuity_cell(vals, 7, 4) == 7
    with pytest.raises(ValueError):
        locate_discontinuity_cell([1.0], 0, 4)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=8, max_size=40))
def test_locate_deterministic(vals):
    a = locate_discontinuity_cell(np.array(vals), 3, 4)
    assert a == locate_discontinuity_cell(np.array(vals), 3, 4)
    assert 3 <= a <= 3 + (len(vals) - 1) // 4


def test_detect_windows_end_to_end():
    m = build_mesh(-5, 5, 128)
    u = project(lambda x: np.where(x >= 0.6, 0.2, 1.0), m, 2, gauss_legendre(12))
    w = detect_windows(eval_grid(u))
    assert len(w) == 1
    assert w[0].s_lo <= w[0].j_dagger <= w[0].s_hi
    assert w[0].j_dagger == m.element_of(0.6) or w[0].j_dagger == m.element_of(0.6) - 1


def test_window_json_round_trip():
    w = [DiscontinuityWindow(10, 12, 4, 6, 16, 11), DiscontinuityWindow(30, 30, 4, 26, 34)]
    assert windows_from_json(windows_to_json(w)) == w
