import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridfilter import datagen
from hybridfilter.datagen import (Transform, WindowSample, corpus_digest, denormalize,
                                  draw_params, jump_positions, make_window_samples,
                                  normalize_window, read_corpus, recompute_input, window_points,
                                  write_corpus)
from hybridfilter.dg import build_mesh, eval_grid, project
from hybridfilter.solvers import SOD, star_state


def test_draw_counts_and_stratification():
    ps = draw_params(90, seed=1)
    assert len(ps) == 90
    speeds, counts = np.unique([p.a for p in ps], return_counts=True)
    assert np.allclose(speeds, np.arange(1, 5.01, 0.5)) and np.all(counts == 10)
    assert len(draw_params(900, seed=0)) == 900
    for p in ps:
        assert 0.1 <= p.alpha <= 0.5 and 0.1 <= p.delta <= 1.0 and 1 <= p.p <= 4
        assert 1.1 <= p.t_final * p.a / 10 < 1.3


def test_draws_deterministic():
    assert draw_params(20, seed=5) == draw_params(20, seed=5)
    assert draw_params(20, seed=5) != draw_params(20, seed=6)
    with pytest.raises(ValueError):
        draw_params(0)


def test_normalize_examples():
    inp = np.linspace(0.2, 0.9, 36)
    tgt = np.linspace(0.0, 1.2, 36)
    a, b, tr = normalize_window(inp, tgt)
    assert a.min() == 0.0 and a.max() == pytest.approx(1.0)
    assert b.min() < 0 and b.max() > 1  # no clipping
    assert np.allclose(b, (tgt - 0.2) / 0.7)
    flat = np.full(36, 0.3)
    a, _, tr = normalize_window(flat, tgt)
    assert tr == Transform(0.0, 1.0) and np.array_equal(a, flat)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=36, max_size=36))
def test_normalize_round_trip(vals):
    x = np.array(vals)
    a, _, tr = normalize_window(x, x)
    assert np.allclose(denormalize(a, tr), x, atol=1e-14 * max(1.0, np.abs(x).max()))


def test_window_points_wrap():
    g = eval_grid(project(np.sin, build_mesh(0, 1, 16), 1))
    idx = window_points(g, 1, half=2)
    assert list(idx[:4]) == [60, 61, 62, 63] and len(idx) == 20
    with pytest.raises(IndexError):
        window_points(g, 1, half=2, periodic=False)


def test_tophat_sample_windows():
    params = draw_params(9, seed=3)[4]
    samples = make_window_samples(params)
    assert 1 <= len(samples) <= 2
    jumps = params.problem().jump_locations()
    h = 10 / 128
    for s in samples:
        assert s.input.shape == (36,) and s.target.shape == (36,)
        assert s.input.min() == 0.0 and s.input.max() == pytest.approx(1.0)
        tc = s.provenance["tc"]
        cells = np.floor((jumps + 5) / h).astype(int)
        d = np.abs(cells - tc)
        assert np.min(np.minimum(d, 128 - d)) <= 2
        # target is the exact top-hat on the same map
        raw = s.transform.invert(s.target)
        assert set(np.round(raw, 12)) <= {round(params.alpha, 12),
                                          round(params.alpha + params.delta, 12)}


def test_smooth_window_dropped():
    g = eval_grid(project(lambda x: np.where(x > 0.3, 1.0, 0.0), build_mesh(-5, 5, 128), 2))
    exact = np.where(g.x > 0.3, 1.0, 0.0)
    kept = datagen._windows_from_grid(g, exact, np.array([0.3]), 0.4, False, {})
    assert len(kept) == 1
    moved = datagen._windows_from_grid(g, exact, np.array([3.3]), 0.4, False, {})
    assert moved == []


def test_recompute_input_bit_identical():
    params = draw_params(9, seed=3)[2]
    for s in make_window_samples(params):
        raw = recompute_input(s)
        assert np.array_equal(s.transform.apply(raw), s.input)


def test_corpus_round_trip_and_digest(tmp_path):
    rng = np.random.default_rng(0)
    samples = [WindowSample(rng.random(36), rng.random(36), Transform(0.1, 2.0), {"i": i})
               for i in range(5)]
    d1 = write_corpus(tmp_path / "a.bin", samples, tmp_path / "a.json")
    d2 = write_corpus(tmp_path / "b.bin", samples)
    assert d1 == d2 == corpus_digest(tmp_path / "a.bin")
    back = read_corpus(tmp_path / "a.bin", tmp_path / "a.json")
    assert all(np.array_equal(a.input, b.input) and np.array_equal(a.target, b.target)
               and a.transform == b.transform and a.provenance == b.provenance
               for a, b in zip(samples, back))
    data = (tmp_path / "a.bin").read_bytes()
    (tmp_path / "t.bin").write_bytes(data[:-8])
    with pytest.raises(ValueError):
        read_corpus(tmp_path / "t.bin")


def test_sod_jump_positions():
    p_star, u_star = star_state(*SOD)
    pos = jump_positions("sod", 2.0)
    assert pos[0] == pytest.approx(2 * u_star)
    assert len(pos) == 2 and pos[1] > pos[0]
