import numpy as np
import pytest
from scipy.special import erfc

from fracsemi.errors import ConfigurationError, DomainError
from fracsemi.grid import TorusGrid
from fracsemi.kernels import (
    H_profile,
    I_profile,
    build_profile,
    certified,
    certify_bounds,
    fractional_constant,
    kernel_infimum,
    tail_mass_estimate,
    time_kernel,
)

WIDE = TorusGrid(1, 80.0, 2048)


def _sup_rel(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def test_fractional_constant_closed_forms():
    assert fractional_constant(1, 0.5) == pytest.approx(1 / np.pi, rel=1e-14)
    assert fractional_constant(2, 0.5) == pytest.approx(1 / (2 * np.pi), rel=1e-14)
    # N = 3, mu = 1/2: Gamma(2) 2 (1/2) / (pi^{3/2} Gamma(1/2)) = 1 / pi^2
    assert fractional_constant(3, 0.5) == pytest.approx(1 / np.pi**2, rel=1e-14)


@pytest.mark.parametrize("mu", [0.0, 1.0, 1.5])
def test_fractional_constant_domain(mu):
    with pytest.raises(DomainError):
        fractional_constant(1, mu)


def test_profiles():
    z = np.array([0.0, 0.5, 1.0, 2.0])
    np.testing.assert_allclose(H_profile(z, 1, 0.5), [1, 1, 1, 0.25])
    np.testing.assert_allclose(I_profile(z, 1, 0.5), (1 + z**2) ** -1)


@pytest.mark.parametrize("mu", [0.25, 0.5, 0.75, 1.0])
def test_kernel_mass(mu):
    prof = build_profile(mu, WIDE, None, None)
    assert abs(prof.mass - 1.0) <= 1e-12


def test_gaussian_profile():
    prof = build_profile(1.0, WIDE)
    x = WIDE.axis
    window = np.abs(x) <= 20
    exact = (4 * np.pi) ** -0.5 * np.exp(-(x**2) / 4)
    assert _sup_rel(prof.values.values[window], exact[window]) <= 1e-12


def test_poisson_profile_1d():
    prof = build_profile(0.5, WIDE, None, None)
    x = WIDE.axis
    window = np.abs(x) <= 20
    exact = 1 / (np.pi * (1 + x**2))
    assert _sup_rel(prof.values.values[window], exact[window]) <= 1e-3


def test_poisson_profile_2d():
    g = TorusGrid(2, 40.0, 512)
    k = time_kernel(g, 0.5, 1.0)
    r = g.radius
    window = r <= 5
    exact = (1 + r**2) ** -1.5 / (2 * np.pi)
    assert _sup_rel(k[window], exact[window]) <= 1e-3


def test_self_similarity_against_poisson_at_later_time():
    prof = build_profile(0.5, TorusGrid(1, 40.0, 1024), None, None)
    t = 2.0
    later = prof.at_time(t)
    x = later.grid.axis
    window = np.abs(x) <= 10
    exact = t / (np.pi * (t**2 + x**2))
    assert later.grid.length == pytest.approx(80.0)
    # periodic images add ~ 2t/(pi L^2) * pi^2/6 ~ 3e-4 against a peak of 1/(2 pi)
    assert _sup_rel(later.values[window], exact[window]) <= 5e-3


def test_preconditions_raise():
    with pytest.raises(ConfigurationError, match="resolution"):
        build_profile(0.25, TorusGrid(1, 80.0, 256))
    with pytest.raises(ConfigurationError, match="tail"):
        build_profile(0.5, WIDE, resolution_tol=None)
    # the Gaussian tail is far below the default bound on this box
    assert build_profile(1.0, WIDE).tail_mass < 1e-8


def test_tail_estimates():
    assert tail_mass_estimate(1, 1.0, 10.0) == pytest.approx(erfc(5.0))
    assert tail_mass_estimate(2, 1.0, 4.0) == pytest.approx(np.exp(-4.0))
    # Cauchy tail: (2/pi) / R
    assert tail_mass_estimate(1, 0.5, 40.0) == pytest.approx(2 / (np.pi * 40.0), rel=1e-12)


@pytest.mark.parametrize("mu", [0.25, 0.5, 0.75])
def test_certified_bounds_stable_under_refinement(mu):
    coarse = certify_bounds(build_profile(mu, TorusGrid(1, 80.0, 1024), None, None))
    fine = certified(build_profile(mu, WIDE, None, None))
    assert 0 < fine.lower_c <= fine.upper_c < np.inf
    assert fine.lower_c == pytest.approx(coarse[0], rel=0.1)
    assert fine.upper_c == pytest.approx(coarse[1], rel=0.1)


def test_certify_rejects_gaussian_and_underresolved():
    with pytest.raises(DomainError):
        certify_bounds(build_profile(1.0, WIDE))
    # too few points: the discrete kernel rings negative
    with pytest.raises(ConfigurationError, match="positivity"):
        certify_bounds(build_profile(0.75, TorusGrid(1, 80.0, 32), None, None))


def test_table_columns():
    prof = build_profile(0.5, TorusGrid(1, 40.0, 256), None, None)
    tab = prof.table()
    assert list(tab) == ["z", "k", "H", "I", "k_over_H"]
    assert np.all(np.diff(tab["z"]) >= 0)
    np.testing.assert_allclose(tab["k_over_H"] * tab["H"], tab["k"])


def test_kernel_infimum_gaussian():
    t, r = 0.3, 25 * WIDE.spacing
    inf = kernel_infimum(WIDE, 1.0, t, r)
    assert inf == pytest.approx((4 * np.pi * t) ** -0.5 * np.exp(-(r**2) / (4 * t)), rel=1e-10)
