import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import smooth_random
from fracsemi.errors import ConfigurationError, DomainError, InvalidFieldError
from fracsemi.grid import TorusGrid
from fracsemi.potentials import (
    _ball_weights,
    approximability_profile,
    ball_criterion,
    ball_integrals,
    bump_array,
    constant,
    cube_integrals,
    custom,
    local_ball_integral,
    make_counterexample,
    potential_from_config,
    truncate,
    uniform_norm,
    well,
)

CE_GRID = TorusGrid(1, 24.0, 4096)


@pytest.fixture(scope="module")
def counterexample():
    return make_counterexample(CE_GRID, p0=1.0, n_max=8)


def test_constant_and_validation(grid1d):
    V = constant(grid1d, 2.0)
    assert V.sup == 2.0 and V.family == "constant"
    with pytest.raises(InvalidFieldError):
        custom(grid1d, -np.ones(grid1d.shape))
    with pytest.raises(DomainError):
        constant(grid1d, 1.0, p0=0.5)


def test_well_shape(grid1d):
    V = well(grid1d, depth=3.0, width=2.0, center=1.0)
    assert V.sup == pytest.approx(3.0)
    assert np.all(V.array[grid1d.periodic_distance(1.0) >= 2.0] == 0)
    with pytest.raises(ConfigurationError):
        well(grid1d, width=9.0)


def test_bump_array_is_periodic(grid1d):
    V = bump_array(grid1d, amplitude=1.0, spacing=2.0, width=0.8)
    np.testing.assert_allclose(V.array, np.roll(V.array, 32), atol=1e-15)
    with pytest.raises(ConfigurationError):
        bump_array(grid1d, spacing=3.0)
    with pytest.raises(ConfigurationError):
        bump_array(grid1d, spacing=2.0, width=1.5)


@pytest.mark.parametrize("r_cells", [1, 7, 16, 40])
def test_ball_measure_is_exact(grid1d, r_cells):
    r = r_cells * grid1d.spacing
    w = _ball_weights(grid1d, 0.0, r)
    assert grid1d.cell_volume * w.sum() == pytest.approx(2 * r, rel=1e-14)


def test_ball_radius_domain(grid1d):
    with pytest.raises(ConfigurationError):
        ball_integrals(constant(grid1d, 1.0), 8.0)


@given(st.integers(0, 10_000), st.floats(0.2, 3.0), st.integers(0, 255))
def test_ball_integrals_match_brute_force_1d(seed, r, idx):
    g = TorusGrid(1, 16.0, 256)
    V = custom(g, smooth_random(g, seed))
    all_balls = ball_integrals(V, r)
    assert all_balls[idx] == pytest.approx(local_ball_integral(V, g.axis[idx], r), rel=1e-12, abs=1e-14)


@given(st.integers(0, 10_000), st.floats(0.5, 3.0), st.integers(0, 31), st.integers(0, 31))
def test_ball_integrals_match_brute_force_2d(seed, r, i, j):
    g = TorusGrid(2, 8.0, 32)
    V = custom(g, smooth_random(g, seed))
    center = (g.axis[i], g.axis[j])
    assert ball_integrals(V, r)[i, j] == pytest.approx(local_ball_integral(V, center, r), rel=1e-10, abs=1e-12)


def test_uniform_norm_of_constant():
    g = TorusGrid(1, 8.0, 256)
    # ||3||_{L^2(B(x,1))} = 3 sqrt(2)
    assert uniform_norm(constant(g, 3.0), p0=2.0) == pytest.approx(3 * np.sqrt(2), rel=1e-12)
    with pytest.raises(DomainError):
        uniform_norm(constant(g, 1.0), p0=np.inf)


def test_ball_criterion_of_constant():
    g = TorusGrid(1, 8.0, 256)
    inf, _ = ball_criterion(constant(g, 1.0), 1.0)
    assert inf == pytest.approx(2.0, rel=1e-12)


def test_ball_criterion_finds_gap(grid1d):
    V = well(grid1d, 1.0, 1.0)
    inf, center = ball_criterion(V, 2.0)
    assert inf == 0.0
    assert abs(center[0]) >= 3.0


def test_truncation(grid1d):
    V = well(grid1d, 4.0, 2.0)
    VM = truncate(V, 1.5)
    assert VM.sup == 1.5 and VM.p0 == V.p0 and VM.grid is grid1d
    assert np.all(VM.array <= V.array)
    with pytest.raises(DomainError):
        truncate(V, 0.0)


def test_truncation_above_sup_is_inactive(grid1d):
    V = well(grid1d, 1.0, 2.0)
    assert approximability_profile(V, 1.0, [1.0, 2.0]) == [(1.0, 0.0), (2.0, 0.0)]
    with pytest.raises(DomainError):
        approximability_profile(V, 1.0, [2.0, 1.0])


def test_counterexample_cube_integrals(counterexample):
    assert counterexample.family == "counterexample"
    assert len(cube_integrals(counterexample)) == 8
    np.testing.assert_allclose(cube_integrals(counterexample), 1.0, atol=1e-10)


def test_counterexample_radii_shrink(counterexample):
    radii = np.array(counterexample.params["radii"])
    assert np.all(np.diff(radii) < 0)
    np.testing.assert_allclose(radii * 3 * np.arange(1, 9), 1.0)


def test_counterexample_criterion_holds(counterexample):
    inf, _ = ball_criterion(counterexample, counterexample.params["r_star"])
    assert inf >= 1 - 1e-10


def test_counterexample_truncation_loses_far_bumps(counterexample):
    VM = truncate(counterexample, 2.0)
    r = counterexample.params["r_star"]
    centers = counterexample.params["centers"]
    local = [local_ball_integral(VM, c, r) for c in centers]
    assert np.all(np.diff(local) <= 1e-12)
    assert local[0] / local[-1] >= 5


def test_counterexample_defect_stays_positive(counterexample):
    defects = [d for _, d in approximability_profile(counterexample, 1.0, [1, 2, 4, 8])]
    assert min(defects) > 0
    assert all(b < a for a, b in zip(defects, defects[1:]))


def test_counterexample_preconditions():
    with pytest.raises(ConfigurationError, match="resolve"):
        make_counterexample(TorusGrid(1, 24.0, 256), n_max=8)
    with pytest.raises(ConfigurationError, match="fit"):
        make_counterexample(TorusGrid(1, 12.0, 4096), n_max=8)
    with pytest.raises(ConfigurationError):
        make_counterexample(CE_GRID, spacing=2.0)


def test_potential_from_config(grid1d):
    V = potential_from_config(grid1d, {"family": "well", "depth": 2.0, "p0": 2})
    assert V.family == "well" and V.p0 == 2.0 and V.sup == pytest.approx(2.0)
    assert potential_from_config(grid1d, {"family": "constant", "c": 0.5}).sup == 0.5
    with pytest.raises(ConfigurationError, match="family"):
        potential_from_config(grid1d, {"family": "spiky"})
    with pytest.raises(ConfigurationError, match="well"):
        potential_from_config(grid1d, {"family": "well", "bogus": 1})


def test_table(grid1d):
    tab = well(grid1d).table()
    assert list(tab) == ["x", "V"]
