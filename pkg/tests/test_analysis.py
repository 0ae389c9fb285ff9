import csv
import math

import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from collbreak import analysis
from collbreak.analysis import (
    EOCReport, eoc, eoc_markdown, eoc_study, family_grid, grid_sequence, l1_error, moments,
    project_reference, reference, reference_density, reference_kind, relative_moment_error,
    transfer, write_eoc_csv,
)
from collbreak.grid import GridError, build_geometric, build_uniform
from collbreak.kernels import builtin
from collbreak.reference import (
    ReferenceError, SpectralReference, closed_form_solution, example_5_1_regular,
    spectral_reference,
)
from collbreak.scheme2d import Grid2D


# -- moments and error measures -----------------------------------------------

def test_moment_examples():
    g = build_geometric(1e-9, 1, 30)
    e = np.zeros(30)
    e[7] = 1
    m = moments(g, e)
    assert m["M0"] == 1 and m["M1"] == g.pivots[7]
    assert all(v == 0 for v in moments(g, np.zeros(30)).values())
    assert moments(build_uniform(0, 1, 4), np.ones(4))["M1"] == 2.0
    with pytest.raises(ValueError):
        moments(g, np.ones(3))


def test_moments_2d_keys():
    ax = build_uniform(0, 1, 2)
    m = moments(Grid2D(ax, ax), np.ones((2, 2)))
    assert list(m) == ["M00", "M10", "M01", "M11"]
    assert m["M00"] == 4 and m["M11"] == pytest.approx(1.0)


def test_relative_error_examples():
    assert relative_moment_error(2, 2) == (0.0, True)
    assert relative_moment_error(2, 1.9).value == pytest.approx(0.05)
    assert relative_moment_error(0, 0.3) == (0.3, False)


def test_eoc_and_l1():
    assert eoc(0.4, 0.2) == pytest.approx(1.0)
    assert l1_error([1, 2], [1.5, 1]) == 1.5
    with pytest.raises(ValueError):
        l1_error([1], [1, 2])


# -- references ---------------------------------------------------------------

@pytest.mark.parametrize("t", [0.3, 1.0, 4.0])
def test_example_5_1_density_solves_reduced_equation(t):
    # with M1 = 1 the model is linear breakage: n_t = 2 int_x^1 n dy - x n, point mass e^{-t} at 1
    h = 1e-5
    for x in (0.05, 0.3, 0.77, 0.99):
        dn_dt = (example_5_1_regular(x, t + h) - example_5_1_regular(x, t - h)) / (2 * h)
        tail = quad(lambda y: float(example_5_1_regular(y, t)), x, 1, epsabs=1e-14)[0] + math.exp(-t)
        rhs = 2 * tail - x * example_5_1_regular(x, t)
        assert dn_dt == pytest.approx(rhs, rel=1e-8, abs=1e-9)


@pytest.mark.parametrize("t", [0.0, 0.5, 2.0, 10.0])
def test_example_5_1_moments_from_density(t):
    m0 = quad(lambda y: float(example_5_1_regular(y, t)), 0, 1, epsabs=1e-14)[0] + math.exp(-t)
    m1 = quad(lambda y: y * float(example_5_1_regular(y, t)), 0, 1, epsabs=1e-14)[0] + math.exp(-t)
    assert m0 == pytest.approx(1 + t, rel=1e-12)
    assert m1 == pytest.approx(1.0, rel=1e-12)
    ref = reference("example_5_1", t)
    assert ref["M0"] == 1 + t and ref["M1"] == 1
    d, w = reference_density("example_5_1", 0.5, t)
    assert w == math.exp(-t) and d == example_5_1_regular(0.5, t)


def test_zeroth_moment_odes():
    # dM0/dt = (zeta - 1) M0^2 with M1 = 1: zeta = 2 for 5.1, 4/3 for 5.2
    for zeta, ref_id, t_end in ((2.0, "example_5_1", 5.0), (4 / 3, "example_5_2", 2.5)):
        sol = solve_ivp(lambda t, m: (zeta - 1) * m**2 if ref_id == "example_5_2" else [1.0],
                        (0, t_end), [1.0], rtol=1e-12, atol=1e-14, dense_output=True)
        for t in np.linspace(0, t_end, 6):
            assert reference(ref_id, t, orders=(0,))["M0"] == pytest.approx(sol.sol(t)[0], rel=1e-9)


def test_reference_values_and_errors():
    r52 = reference("example_5_2", 1.5)
    assert r52["M0"] == pytest.approx(2.0) and r52["M3"] < r52["M2"] < 1
    r = reference("example_2d_i", 1.0)
    assert r["M00"] == 4 and r["M11"] == 1
    with pytest.raises(ReferenceError):
        reference("example_5_2", 3.0)
    with pytest.raises(ReferenceError):
        reference("example_9", 1.0)
    with pytest.raises(ReferenceError):
        reference_density("example_5_2", 0.5, 1.0)


def test_spectral_solver_reproduces_closed_form():
    sol = SpectralReference(builtin("example_5_1"), degree=96, quad_points=136).solve([1.0, 3.0])
    for s in sol:
        exact = closed_form_solution(s.t)
        x = np.linspace(0, 1, 101)
        np.testing.assert_allclose(s.density(x), exact.density(x), atol=1e-9)
        assert s.point_mass == pytest.approx(math.exp(-s.t), rel=1e-10)
        assert s.moment(0) == pytest.approx(1 + s.t, rel=1e-10)
        assert s.moment(1) == pytest.approx(1.0, rel=1e-10)


def test_spectral_quartic_keeps_moment_laws():
    s = spectral_reference("constant_one:quartic_4x2_over_y3", 1.5)
    # degree-128 collocation is good to about 1e-8 here
    assert s.moment(0) == pytest.approx(2.0, rel=2e-8)
    assert s.moment(1) == pytest.approx(1.0, rel=2e-8)


def test_projection_examples():
    g = family_grid("geometric", 30)
    e = np.zeros(30)
    e[-1] = 1
    np.testing.assert_array_equal(project_reference(g, "example_5_1", 0.0), e)
    for t in (0.5, 1.0, 3.0):
        p = project_reference(g, "example_5_1", t)
        assert p.sum() == pytest.approx(1 + t, abs=1e-9)
        np.testing.assert_allclose(project_reference(g, "example_5_1", t, method="series"), p, atol=1e-12)
    u = build_uniform(0, 1, 10)
    assert project_reference(u, "example_5_1", 1.0)[-1] > math.exp(-1)


# -- grids, transfer, EOC -----------------------------------------------------

def test_transfer_conserves_counts():
    fine = family_grid("random", 120, seed=4)
    coarse = family_grid("random", 30, seed=4)
    counts = np.random.default_rng(0).random(120)
    inside = transfer(fine, counts, coarse)
    assert inside.sum() <= counts.sum() + 1e-12


def test_grid_sequences():
    seq = grid_sequence("random", 30, 2, seed=42)
    assert [g.cells for g in seq] == [30, 60, 120]
    assert all(g.pivots[-1] == pytest.approx(1.0, abs=1e-14) for g in seq)
    nested = grid_sequence("random", 30, 2, seed=42, refinement="bisect", anchor=False)
    assert set(nested[0].boundaries) <= set(nested[1].boundaries) <= set(nested[2].boundaries)
    with pytest.raises(ValueError):
        grid_sequence("uniform", 30, 0)
    with pytest.raises(ValueError):
        grid_sequence("uniform", 30, 1, refinement="shuffle")


def test_report_rows_double():
    r = EOCReport("uniform", "vam", "k", 1.0)
    r.add(30, 0.4)
    r.add(60, 0.2)
    assert r.rows == [(30, 0.4, 0.0), (60, 0.2, pytest.approx(1.0))]
    with pytest.raises(ValueError):
        r.add(100, 0.1)


def test_reference_kind():
    assert reference_kind(builtin("example_5_1")) == "closed_form"
    assert reference_kind(builtin("example_5_2")) == "spectral"


def test_small_eoc_study_and_exports(tmp_path):
    r = eoc_study("example_5_1", "uniform", base_cells=30, doublings=1)
    assert r.cells == [30, 60] and r.eoc[0] == 0.0
    assert 0.85 < r.eoc[1] < 1.25
    assert r.reference == "closed_form" and not r.surrogate
    write_eoc_csv(tmp_path / "e.csv", [r])
    rows = list(csv.DictReader(open(tmp_path / "e.csv")))
    assert [int(x["cells"]) for x in rows] == [30, 60]
    md = eoc_markdown([r])
    assert md.splitlines()[0] == "| Grids | uniform L1 error | uniform EOC |"


def test_surrogate_reference_is_flagged():
    r = eoc_study("example_5_1", "geometric", base_cells=10, doublings=1, reference_mode="surrogate")
    assert r.surrogate and r.eoc[1] > 0.5
    assert "surrogate" in eoc_markdown([r])


def test_random_study_needs_seed():
    with pytest.raises(GridError):
        eoc_study("example_5_1", "random", doublings=1)
