import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import smooth_random
from fracsemi import decay
from fracsemi.engine import EvolutionConfig
from fracsemi.errors import DomainError, FitQualityError
from fracsemi.grid import TorusGrid
from fracsemi.potentials import ball_criterion, bump_array, constant, custom, truncate, well

G = TorusGrid(1, 16.0, 256)
WELL = well(G, 1.0, 2.0)
DENSE = EvolutionConfig("dense_oracle")


def test_fit_rate_exact_exponential():
    t = np.linspace(0.1, 10, 40)
    fit = decay.fit_rate(t, 3.0 * np.exp(-0.7 * t))
    assert fit.rate == pytest.approx(0.7, rel=1e-12) and fit.r_squared == pytest.approx(1.0)


def test_fit_rate_flat_trace_is_zero():
    fit = decay.fit_rate(np.linspace(0, 1, 10), np.full(10, 1.0 - 1e-4))
    assert fit.rate == 0.0 and fit.flat
    # dropped early, then unresolved: the tail carries no measurable rate
    t = np.linspace(0.1, 5, 20)
    settled = decay.fit_rate(t, 0.6 + 0.4 * np.exp(-20 * t))
    assert settled.rate == 0.0 and settled.flat


def test_fit_rate_rejects_bad_traces():
    t = np.linspace(0.1, 5, 20)
    with pytest.raises(FitQualityError, match="monotone"):
        decay.fit_rate(t, np.exp(-0.1 * t) * (1 + 0.3 * np.sin(5 * t)))
    with pytest.raises(FitQualityError) as info:
        decay.fit_rate(t, np.exp(-(t**3)))
    assert info.value.r_squared < 0.999
    with pytest.raises(FitQualityError):
        decay.fit_rate(t[:3], np.exp(-t[:3]))


def test_estimate_omega_zero_potential():
    t = np.linspace(0.5, 5, 10)
    zero = constant(G, 0.0)
    for p in (1, 2, np.inf):
        assert decay.estimate_omega(zero, 0.5, p, t) == 0.0
    with pytest.raises(DomainError):
        decay.estimate_omega(zero, 0.5, 3, t)


@pytest.mark.parametrize("c", [0.2, 1.0, 3.0])
def test_estimate_omega_constant(c):
    V = constant(G, c)
    t = np.linspace(0.1, 5.0 / c, 40)
    for p in (1, 2, np.inf):
        assert decay.estimate_omega(V, 0.5, p, t) == pytest.approx(c, rel=0.02)
    assert decay.estimate_omega(V, 0.5, 2, t, method="trace") == pytest.approx(c, rel=0.02)


def test_estimate_omega_well_matches_eigensolve():
    a = decay.a_star(WELL, 0.5)
    t = decay.default_t_grid(WELL, 61)
    assert decay.estimate_omega(WELL, 0.5, np.inf, t, DENSE) == pytest.approx(a, rel=0.02)
    assert decay.estimate_omega(WELL, 0.5, 2, t, EvolutionConfig("splitting", dt=1e-2), method="trace") == pytest.approx(a, rel=0.02)


def test_a_star_trivial_cases():
    assert decay.a_star(constant(G, 0.0), 0.5) == 0.0
    assert decay.a_star(constant(G, 0.0), 0.5, method="inverse") == 0.0
    assert decay.a_star(constant(G, 1.3), 0.75) == pytest.approx(1.3, abs=1e-12)


def test_a_star_harmonic_oscillator():
    # -u'' + x^2 u has ground energy 1
    g = TorusGrid(1, 20.0, 512)
    assert decay.a_star(custom(g, g.axis**2), 1.0) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("mu", [0.25, 0.5, 1.0])
def test_inverse_iteration_matches_dense(mu):
    assert decay.a_star(WELL, mu, method="inverse") == pytest.approx(decay.a_star(WELL, mu, method="dense"), abs=1e-10)


def test_inverse_iteration_2d():
    g = TorusGrid(2, 16.0, 64)
    V = well(g, 1.0, 3.0)
    assert decay.a_star(V, 0.5, method="inverse") == pytest.approx(decay.a_star(V, 0.5, method="dense"), abs=1e-10)


@given(st.sampled_from([0.25, 0.5, 1.0]), st.integers(0, 10_000), st.floats(0.0, 2.0))
def test_a_star_monotone_and_shift(mu, seed, c):
    v = smooth_random(G, seed)
    extra = smooth_random(G, seed + 7)
    a = decay.a_star(custom(G, v), mu)
    assert decay.a_star(custom(G, v + extra), mu) >= a - 1e-10
    assert decay.a_star(custom(G, v + c), mu) == pytest.approx(a + c, abs=1e-10)


def test_omega_inf_nondecreasing_in_potential():
    t = decay.default_t_grid(WELL, 41)
    weak = decay.estimate_omega(WELL, 0.5, np.inf, t, DENSE)
    strong = decay.estimate_omega(well(G, 2.0, 2.0), 0.5, np.inf, t, DENSE)
    assert strong >= weak - 1e-10


def test_chain_factor_and_tolerance():
    v = decay.omega_chain(0.3, 0.25, 1, 0.5)
    assert v["lower_factor"] == pytest.approx(2 / 3)
    assert v["tol"] == pytest.approx(0.015)
    assert v["ok"] and "equal_ok" not in v
    assert decay.omega_chain(0.005, 0.0, 1, 0.5)["tol"] == 1e-3


def test_chain_zero_potential_and_failures():
    assert decay.omega_chain(0.0, 0.0, 1, 1.0)["ok"]
    assert not decay.omega_chain(0.3, 0.1, 1, 0.5)["lower_ok"]
    assert not decay.omega_chain(0.3, 0.4, 1, 0.5)["upper_ok"]
    heat = decay.omega_chain(0.3, 0.26, 1, 1.0)
    assert heat["lower_ok"] and not heat["equal_ok"] and not heat["ok"]


def test_certificate_constant_potential():
    V = truncate(constant(G, 1.0), 1.0)
    c, _ = ball_criterion(V, 1.0)
    cert = decay.decay_certificate(V, 0.5, 0.5, 1.0, c)
    assert cert.ok
    assert cert.simulated_value == pytest.approx(np.exp(-0.5), rel=1e-12)
    assert cert.simulated_value <= cert.bound_value < 1


def test_certificate_gaussian_matches_closed_form():
    V = truncate(bump_array(G, 1.0, 2.0, 0.8), 0.5)
    c, _ = ball_criterion(V, 1.0)
    cert = decay.decay_certificate(V, 1.0, 1.0, 1.0, c)
    # for mu = 1 the discrete kernel infimum on the ball is the Gaussian at |z| = r
    assert cert.G_value == pytest.approx(cert.G_reference, rel=1e-8)


def test_certificate_preconditions():
    V = truncate(bump_array(G, 1.0, 2.0, 0.8), 0.5)
    with pytest.raises(DomainError, match="1/\\|\\|V"):
        decay.decay_certificate(V, 0.5, 2.0, 1.0, 0.1)
    with pytest.raises(DomainError, match="c > 0"):
        decay.decay_certificate(truncate(constant(G, 0.0) , 1.0), 0.5, 0.5, 1.0, 0.0)
    with pytest.raises(DomainError, match="ball criterion"):
        decay.decay_certificate(V, 0.5, 1.0, 1.0, 5.0)


@pytest.mark.parametrize("path", ["eigen", "trace"])
def test_omega_equals_astar_constant_and_zero(path):
    t = np.linspace(0.5, 6, 30)
    omega, a, gap = decay.omega_equals_astar(constant(G, 1.0), 0.5, path, t)
    assert a == pytest.approx(1.0) and omega == pytest.approx(1.0, rel=1e-4)
    omega, a, gap = decay.omega_equals_astar(constant(G, 0.0), 0.5, path, t)
    assert omega == a == gap == 0.0


def test_omega_equals_astar_well():
    _, _, gap = decay.omega_equals_astar(WELL, 0.5, "eigen")
    assert gap <= 1e-6
    _, _, gap = decay.omega_equals_astar(WELL, 0.5, "trace", None, EvolutionConfig("splitting", dt=1e-2))
    assert gap <= 0.02
    with pytest.raises(DomainError):
        decay.omega_equals_astar(well(TorusGrid(2, 16.0, 128), 1.0, 2.0), 0.5)


def test_contraction_or_decay():
    t = np.linspace(0.1, 5, 30)
    assert decay.contraction_or_decay(t, np.ones(30))["alternative"] == "contraction"
    assert decay.contraction_or_decay(t, np.exp(-0.5 * t))["alternative"] == "decay"
    slow = decay.contraction_or_decay(t, np.exp(-1e-5 * t) * (1 - 0.01))
    assert slow["alternative"] == "inconclusive" and slow["hint"]


def test_report_verdicts_and_schema():
    rep = decay.assemble_report(omega_2=1.0, a_star_value=1.0, chain={"ok": True}, ball_table=[(1.0, 2.0)])
    assert rep.verdict == "decay"
    doc = json.loads(rep.to_json())
    assert doc["schema"] == 1 and doc["threshold"] == 1e-4
    none = decay.assemble_report(a_star_value=1e-6, ball_table=[(1.0, 0.0), (2.0, 0.0)])
    assert none.verdict == "no_decay"
    unclear = decay.assemble_report(a_star_value=1e-6, ball_table=[(1.0, 0.5)])
    assert unclear.verdict == "inconclusive" and unclear.hints
    chain_broken = decay.assemble_report(a_star_value=0.5, chain={"ok": False})
    assert chain_broken.verdict == "inconclusive"
    alt = decay.assemble_report(a_star_value=0.5, alternative={"alternative": "inconclusive", "hint": "refine"})
    assert alt.verdict == "inconclusive" and "refine" in alt.hints


def test_report_invariants():
    with pytest.raises(DomainError):
        decay.assemble_report()
    with pytest.raises(DomainError):
        decay.DecayReport(omega_2=-0.1)
    with pytest.raises(DomainError):
        decay.DecayReport(a_star=0.1, certificate={"bound_value": 1.5})


def test_no_decay_trend_for_compact_well():
    a = [decay.a_star(well(TorusGrid(1, L, n), 1.0, 1.0), 1.0) for L, n in ((20, 256), (40, 512), (80, 1024))]
    assert a[0] > a[1] > a[2] and a[2] < a[0] / 4
