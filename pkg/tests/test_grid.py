import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from collbreak.grid import (
    Grid, GridError, anchor_top_pivot, bisect, build_family, build_geometric,
    build_geometric_ratio, build_locally_uniform, build_oscillatory, build_random,
    build_uniform, default_segments,
)


def test_uniform_four_cells():
    g = build_uniform(0, 1, 4)
    np.testing.assert_array_equal(g.boundaries, [0, 0.25, 0.5, 0.75, 1])
    np.testing.assert_array_equal(g.pivots, [0.125, 0.375, 0.625, 0.875])


def test_single_cell_uniform():
    g = build_uniform(0, 1, 1)
    assert g.cells == 1 and g.pivots[0] == 0.5


def test_uniform_standard_domain():
    g = build_uniform(1e-9, 1, 30)
    np.testing.assert_allclose(g.widths, (1 - 1e-9) / 30, rtol=1e-12)
    assert g.ratio == pytest.approx(1.0, abs=1e-9)


def test_geometric_progression():
    g = build_geometric(1e-9, 1, 30)
    r = 10 ** (9 / 30)
    assert r == pytest.approx(1.9953, abs=1e-4)
    np.testing.assert_allclose(g.boundaries[1:] / g.boundaries[:-1], r, rtol=1e-12)
    assert g.x_min == 1e-9 and g.x_max == 1.0


@pytest.mark.parametrize("args, bounds, pivots", [
    ((1, 2, 1), [1, 2], [1.5]),
    ((1, 4, 2), [1, 2, 4], [1.5, 3]),
])
def test_geometric_small(args, bounds, pivots):
    g = build_geometric(*args)
    np.testing.assert_allclose(g.boundaries, bounds, rtol=1e-15)
    np.testing.assert_allclose(g.pivots, pivots, rtol=1e-15)


def test_geometric_ratio_variant_derives_cells():
    g = build_geometric_ratio(1e-9, 1, 1.4)
    assert g.cells == 62
    assert g.x_max >= 1.0
    with pytest.raises(GridError):
        build_geometric_ratio(1e-9, 1, 1.0)


@pytest.mark.parametrize("segments, widths", [
    ([(0.5, 2), (0.5, 4)], [0.25, 0.25, 0.125, 0.125, 0.125, 0.125]),
    ([(0.25, 1), (0.75, 3)], [0.25] * 4),
])
def test_locally_uniform_widths(segments, widths):
    np.testing.assert_allclose(build_locally_uniform(0, 1, segments).widths, widths, atol=1e-15)


def test_locally_uniform_single_segment_is_uniform():
    np.testing.assert_array_equal(build_locally_uniform(0, 1, [(1.0, 3)]).boundaries,
                                  build_uniform(0, 1, 3).boundaries)


def test_locally_uniform_rejects_bad_fractions():
    with pytest.raises(GridError):
        build_locally_uniform(0, 1, [(0.5, 2), (0.4, 2)])
    with pytest.raises(GridError):
        build_locally_uniform(0, 1, [(1.0, 0)])


def test_random_single_cell_ignores_seed():
    for seed in (0, 1, 99):
        np.testing.assert_array_equal(build_random(0, 1, 1, seed, 2).boundaries, [0, 1])


def test_random_is_reproducible_and_bounded():
    a, b = build_random(0, 1, 30, 42, 4), build_random(0, 1, 30, 42, 4)
    np.testing.assert_array_equal(a.boundaries, b.boundaries)
    assert a.ratio <= 4
    assert a.seed == 42


def test_random_seeds_differ():
    a, b = build_random(0, 1, 30, 42, 4), build_random(0, 1, 30, 43, 4)
    assert np.any(a.boundaries != b.boundaries)


@settings(max_examples=60, deadline=None)
@given(cells=st.integers(2, 2000), seed=st.integers(0, 2**31), r=st.floats(1.01, 10))
def test_random_ratio_never_exceeds_cap(cells, seed, r):
    assert build_random(0, 1, cells, seed, r).ratio <= r * (1 + 1e-9)


@pytest.mark.parametrize("x_max, cells, widths", [
    (3, 2, [1, 2]),
    (1, 1, [1]),
    (9, 4, [1.5, 3, 1.5, 3]),
])
def test_oscillatory(x_max, cells, widths):
    np.testing.assert_allclose(build_oscillatory(0, x_max, cells).widths, widths, rtol=1e-14)


def test_bisect_examples():
    np.testing.assert_array_equal(bisect(build_uniform(0, 1, 2)).boundaries,
                                  build_uniform(0, 1, 4).boundaries)
    g = build_geometric(1e-9, 1, 30)
    assert set(g.boundaries) <= set(bisect(g).boundaries)
    np.testing.assert_allclose(bisect(build_oscillatory(0, 3, 2)).widths, [0.5, 0.5, 1, 1])


@pytest.mark.parametrize("cells", [1, 3, 30, 64])
def test_double_bisect_matches_uniform(cells):
    # midpoints of k/I and (2k+1)/(4I) agree up to one rounding of each
    np.testing.assert_allclose(bisect(bisect(build_uniform(0, 1, cells))).boundaries,
                               build_uniform(0, 1, 4 * cells).boundaries, rtol=0, atol=2.3e-16)


grid_args = st.tuples(
    st.sampled_from(["uniform", "geometric", "locally_uniform", "random", "oscillatory"]),
    st.floats(1e-9, 0.5), st.floats(1.0, 100.0), st.integers(3, 300), st.integers(0, 10**6))


@settings(max_examples=200, deadline=None)
@given(grid_args)
def test_builder_invariants(args):
    kind, lo, hi, cells, seed = args
    g = build_family(kind, lo, hi, cells, seed=seed)
    b = g.boundaries
    assert np.all(np.diff(b) > 0)
    assert b[0] == lo and b[-1] == hi
    np.testing.assert_array_equal(g.pivots, (b[:-1] + b[1:]) / 2)
    assert abs(g.widths.sum() - (hi - lo)) <= 8 * np.finfo(float).eps * hi
    assert np.isfinite(g.ratio)


def test_domain_errors():
    with pytest.raises(GridError):
        build_uniform(1, 0, 3)
    with pytest.raises(GridError):
        build_uniform(0, 1, 0)
    with pytest.raises(GridError):
        build_geometric(0, 1, 3)
    with pytest.raises(GridError):
        build_family("random", 0, 1, 3)
    with pytest.raises(GridError):
        build_family("spiral", 0, 1, 3)
    with pytest.raises(GridError):
        Grid(np.array([0.0, 0.5, 0.5, 1.0]))


def test_grid_is_immutable_and_round_trips():
    g = build_random(1e-9, 1, 10, 7)
    with pytest.raises(ValueError):
        g.boundaries[0] = 3.0
    assert Grid.from_dict(g.to_dict()) == g


def test_default_segments_cover_cells():
    assert sum(c for _, c in default_segments(31)) == 31
    with pytest.raises(GridError):
        default_segments(2)


@pytest.mark.parametrize("kind", ["uniform", "geometric", "locally_uniform", "random", "oscillatory"])
def test_anchor_puts_top_pivot_on_target(kind):
    g = anchor_top_pivot(lambda xm: build_family(kind, 1e-9, xm, 30, seed=5), 1.0)
    assert g.pivots[-1] == pytest.approx(1.0, abs=8 * np.finfo(float).eps)
    assert g.x_max > 1.0


def test_anchor_unbracketed():
    with pytest.raises(GridError):
        anchor_top_pivot(lambda xm: build_uniform(0, xm, 2), 1.0, bracket=(5.0, 6.0))
