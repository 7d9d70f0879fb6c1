import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma

from fracsemi import subordinator
from fracsemi.errors import AccuracyError, DegenerateDensityError, DomainError
from fracsemi.grid import Field, TorusGrid, free_semigroup_apply
from fracsemi.potentials import _smooth_bump
from fracsemi.subordinator import build_density, left_tail_cutoff, stable_density, subordinate


def kanter_density(mu, x):
    """One-sided stable density from Kanter's integral representation (independent of any contour)."""

    def a(phi):
        return (np.sin(mu * phi) / np.sin(phi)) ** (1 / (1 - mu)) * np.sin((1 - mu) * phi) / np.sin(mu * phi)

    scale = x ** (-mu / (1 - mu))
    val, _ = quad(lambda p: a(p) * np.exp(-a(p) * scale), 0.0, np.pi, epsabs=1e-14, epsrel=1e-12, limit=200)
    return mu / (1 - mu) * x ** (-1 / (1 - mu)) * val / np.pi


@pytest.fixture(scope="module", params=[0.25, 0.5, 0.75])
def density(request):
    return build_density(request.param)


@pytest.mark.parametrize("mu", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("s", [0.05, 0.3, 1.0, 3.0, 20.0, 500.0])
def test_contour_matches_kanter(mu, s):
    ref = kanter_density(mu, s)
    assert stable_density(mu, s)[0] == pytest.approx(ref, rel=1e-8, abs=1e-12)


def test_half_order_closed_form():
    s = np.geomspace(0.02, 1e4, 40)
    exact = s**-1.5 * np.exp(-1 / (4 * s)) / (2 * np.sqrt(np.pi))
    np.testing.assert_allclose(stable_density(0.5, s), exact, rtol=1e-9)


@pytest.mark.parametrize("mu", [0.0, 1.2, -1.0])
def test_density_domain(mu):
    with pytest.raises(DomainError):
        stable_density(mu, 1.0)


def test_density_requires_positive_argument():
    with pytest.raises(DomainError):
        stable_density(0.5, [1.0, 0.0])


def test_unit_order_is_degenerate():
    with pytest.raises(DegenerateDensityError):
        build_density(1.0)
    # the degenerate case is still a domain error for callers catching broadly
    with pytest.raises(DomainError):
        stable_density(1.0, 1.0)


def test_node_count_floor():
    with pytest.raises(DomainError):
        build_density(0.5, node_count=32)


def test_accuracy_gate_reports_diagnostics(monkeypatch):
    # even a 64-node table is good to ~1e-6, so tighten the gate to trip it
    monkeypatch.setattr(subordinator, "MASS_TOL", 1e-12)
    with pytest.raises(AccuracyError) as info:
        build_density(0.75, node_count=64)
    assert info.value.diagnostics["mass_defect"] > 1e-12
    assert info.value.diagnostics["mu"] == 0.75


def test_left_tail_cutoff_is_negligible():
    for mu in (0.25, 0.5, 0.75):
        s0 = left_tail_cutoff(mu)
        # mass below s0 is bounded by s0 f(s0) since f increases there
        assert s0 * stable_density(mu, s0)[0] < 1e-15


def test_density_mass(density):
    assert abs(density.mass() - 1.0) <= 1e-6
    assert abs(density.mass(t=2.5) - 1.0) <= 1e-6
    assert density.mass_defect <= 1e-6
    assert density.clamped_mass <= 1e-8


def test_laplace_identity(density):
    lam = np.array([0.0, 0.1, 1.0, 10.0])
    for t in (0.5, 1.0, 2.0):
        np.testing.assert_allclose(density.laplace(lam, t), np.exp(-t * lam**density.mu), atol=1e-5)


def test_tail_coefficient_matches_asymptotics(density):
    mu = density.mu
    assert density.tail_coeff == pytest.approx(mu / gamma(1 - mu), rel=1e-3)


def test_interpolant_between_nodes(density):
    mid = np.sqrt(density.s_nodes[100:2000:97] * density.s_nodes[101:2001:97])
    np.testing.assert_allclose(density(mid), stable_density(density.mu, mid), rtol=5e-6)
    assert density(np.array([density.s_min / 2]))[0] == 0.0


def test_rescaled_density_scaling(density):
    s = np.array([0.7, 2.0, 9.0])
    t = 1.7
    scale = t ** (1 / density.mu)
    np.testing.assert_allclose(density.rescaled(t, s), stable_density(density.mu, s / scale) / scale, rtol=1e-6)


@pytest.mark.parametrize("form", ["rescaled", "direct"])
def test_subordination_reproduces_spectral_flow(density, form):
    g = TorusGrid(1, 16.0, 256)
    bump = Field(g, _smooth_bump(g.radius, 2.0))
    for t in (0.5, 2.0):
        sub = subordinate(bump, density, t, form=form).values
        ref = free_semigroup_apply(bump, density.mu, t).values
        assert np.max(np.abs(sub - ref)) <= 1e-4


def test_subordination_rejects_bad_time(density):
    g = TorusGrid(1, 8.0, 64)
    with pytest.raises(DomainError):
        subordinate(Field.constant(g, 1.0), density, 0.0)
    with pytest.raises(ValueError):
        subordinate(Field.constant(g, 1.0), density, 1.0, form="other")


def test_subordination_of_constant_is_mass(density):
    g = TorusGrid(1, 8.0, 64)
    out = subordinate(Field.constant(g, 1.0), density, 1.0).values
    np.testing.assert_allclose(out, 1.0, atol=1e-6)
