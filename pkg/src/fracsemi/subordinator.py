"""One-sided stable densities and the subordination formula.

``f_{1,mu}`` is the density whose Laplace transform is ``exp(-lam^mu)``.  It is
recovered by inverting that transform along a hyperbolic (Talbot-type)
contour ``z(u) = sigma (1 + sin(i u - alpha))``.  The contour keeps
``|arg z| < pi / (2 mu)`` so that ``Re z^mu > 0`` on it (principal branch), and
its apex sits at the saddle point of ``z s - z^mu``, which keeps the integrand
free of cancellation in the far left tail.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma

from .errors import AccuracyError, DegenerateDensityError, DomainError
from .grid import Field, free_semigroup_apply

# exp(-2 pi d / h) with h = d / 6 is below double precision
_STEPS_PER_STRIP = 6.0
_CONTOUR_DECAY = 40.0
MASS_TOL = 1e-6
CLAMP_TOL = 1e-8


def _check_mu(mu) -> float:
    mu = float(mu)
    if mu == 1.0:
        raise DegenerateDensityError("mu = 1 has no subordinator density; use the heat semigroup directly")
    if not (0.0 < mu < 1.0):
        raise DomainError(f"mu must lie in (0, 1), got {mu!r}")
    return mu


def stable_density(mu: float, s) -> np.ndarray:
    """Evaluate ``f_{1,mu}(s)`` for ``s > 0`` by contour inversion."""
    mu = _check_mu(mu)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s <= 0):
        raise DomainError("stable density is evaluated at s > 0 only")
    sector = min(np.pi / 2, np.pi / (2 * mu) - np.pi / 2) * 0.9
    # Weideman-Trefethen hyperbola proportions, scaled to the admissible sector
    alpha = sector * 0.74621
    strip = sector * 0.25379
    h = strip / _STEPS_PER_STRIP
    saddle = (mu / s) ** (1.0 / (1.0 - mu))
    sigma = np.maximum(saddle, 1.0 / s) / (1.0 - np.sin(alpha))
    cosh_u = (1.0 + _CONTOUR_DECAY / np.min(sigma * s)) / np.sin(alpha)
    k = int(np.ceil(np.arccosh(cosh_u) / h))
    u = h * np.arange(-k, k + 1)
    w = 1j * u - alpha
    z = sigma[:, None] * (1.0 + np.sin(w))
    dz = 1j * sigma[:, None] * np.cos(w)
    integrand = np.exp(z * s[:, None] - z**mu) * dz
    return (h / (2j * np.pi) * integrand.sum(axis=1)).real


def left_tail_cutoff(mu: float, exponent: float = 40.0) -> float:
    """``s`` below which ``f_{1,mu}`` is smaller than ``exp(-exponent)``.

    Uses the leading behaviour ``exp(-(1-mu) mu^{mu/(1-mu)} s^{-mu/(1-mu)})``.
    """
    a = (1.0 - mu) * mu ** (mu / (1.0 - mu))
    return (a / exponent) ** ((1.0 - mu) / mu)


@dataclass(frozen=True, eq=False)
class SubordinatorDensity:
    """Tabulated ``f_{1,mu}`` on log-spaced nodes with an algebraic right tail.

    ``weights`` are trapezoid weights in ``log s``.  Mass beyond ``s_nodes[-1]``
    is ``tail_coeff * s_max^{-mu} / mu`` from the fit ``f ~ tail_coeff s^{-1-mu}``.
    """

    mu: float
    s_nodes: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    tail_coeff: float
    tail_mass: float
    mass_defect: float
    clamped_count: int = 0
    clamped_mass: float = 0.0

    @property
    def s_max(self) -> float:
        return float(self.s_nodes[-1])

    @property
    def s_min(self) -> float:
        return float(self.s_nodes[0])

    def __call__(self, s) -> np.ndarray:
        """Monotone cubic interpolation of ``log f_{1,mu}`` in ``log s`` (tail formula beyond the table)."""
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        interp = self._interpolant()
        inside = (s >= self.s_min) & (s <= self.s_max)
        out[inside] = np.exp(interp(np.log(s[inside])))
        right = s > self.s_max
        out[right] = self.tail_coeff * s[right] ** (-1.0 - self.mu)
        return np.maximum(out, 0.0)

    def _interpolant(self):
        cached = self.__dict__.get("_pchip")
        if cached is None:
            # log-log is nearly linear in both tails, which keeps pchip accurate
            logf = np.log(np.maximum(self.values, 1e-300))
            cached = PchipInterpolator(np.log(self.s_nodes), logf, extrapolate=False)
            object.__setattr__(self, "_pchip", cached)
        return cached

    def rescaled(self, t: float, s) -> np.ndarray:
        """``f_{t,mu}(s) = t^{-1/mu} f_{1,mu}(s t^{-1/mu})``."""
        scale = float(t) ** (1.0 / self.mu)
        return self(np.asarray(s, dtype=float) / scale) / scale

    def mass(self, t: float = 1.0, points_per_decade: int = 40) -> float:
        """Integral of ``f_{t,mu}`` on a log grid independent of the table nodes."""
        scale = float(t) ** (1.0 / self.mu)
        lo, hi = np.log(self.s_min * scale), np.log(self.s_max * scale)
        count = int(np.ceil((hi - lo) / np.log(10) * points_per_decade)) + 1
        logs = np.linspace(lo, hi, count)
        s = np.exp(logs)
        g = self.rescaled(t, s) * s
        body = np.trapezoid(g, logs)
        return float(body + self.tail_mass)

    def laplace(self, lam, t: float = 1.0) -> np.ndarray:
        """Quadrature of ``int f_{t,mu}(s) e^{-lam s} ds``; should equal ``exp(-t lam^mu)``.

        The tail mass is lumped at ``s_max``; it is exact at ``lam = 0`` and its
        contribution vanishes once ``lam s_max t^{1/mu} >> 1``.
        """
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        scale = float(t) ** (1.0 / self.mu)
        s = self.s_nodes * scale
        body = (self.weights * self.values)[None, :] * np.exp(-lam[:, None] * s[None, :])
        return body.sum(axis=1) + self.tail_mass * np.exp(-lam * self.s_max * scale)

    def table(self) -> dict:
        return {"s": self.s_nodes, "f": self.values}


def build_density(mu: float, node_count: int = 2048) -> SubordinatorDensity:
    """Tabulate ``f_{1,mu}`` on ``node_count`` log-spaced nodes.

    The range runs from the point where the left tail drops below ``e^{-40}``
    to ``s_max = 10^{4/mu}``, where ``s_max^{-mu} = 1e-4`` so the leading
    algebraic tail term dominates its correction by four orders.
    """
    mu = _check_mu(mu)
    node_count = int(node_count)
    if node_count < 64:
        raise DomainError(f"node_count must be >= 64, got {node_count}")
    s_min = left_tail_cutoff(mu)
    s_max = 10.0 ** (4.0 / mu)
    logs = np.linspace(np.log(s_min), np.log(s_max), node_count)
    s = np.exp(logs)
    raw = stable_density(mu, s)
    step = logs[1] - logs[0]
    weights = step * s
    weights[0] *= 0.5
    weights[-1] *= 0.5

    negative = raw < 0
    clamped_mass = float(np.sum(weights[negative] * -raw[negative]))
    clamped_count = int(np.count_nonzero(raw < -1e-10))
    values = np.maximum(raw, 0.0)

    last = slice(-8, None)
    tail_coeff = float(np.exp(np.mean(np.log(values[last]) + (1.0 + mu) * logs[last])))
    tail_mass = tail_coeff * s_max ** (-mu) / mu
    total = float(np.sum(weights * values) + tail_mass)
    defect = abs(1.0 - total)
    diagnostics = {
        "mu": mu,
        "mass": total,
        "mass_defect": defect,
        "clamped_mass": clamped_mass,
        "clamped_count": clamped_count,
        "tail_coeff": tail_coeff,
        "tail_coeff_asymptotic": mu / gamma(1.0 - mu),
    }
    if clamped_mass > CLAMP_TOL:
        raise AccuracyError(f"negative ripple mass {clamped_mass:.3e} exceeds {CLAMP_TOL}", diagnostics)
    if not defect <= MASS_TOL:
        raise AccuracyError(f"mass defect {defect:.3e} exceeds {MASS_TOL}", diagnostics)
    for arr in (s, values, weights):
        arr.setflags(write=False)
    return SubordinatorDensity(
        mu=mu,
        s_nodes=s,
        values=values,
        weights=weights,
        tail_coeff=tail_coeff,
        tail_mass=tail_mass,
        mass_defect=defect,
        clamped_count=clamped_count,
        clamped_mass=clamped_mass,
    )


def _heat(f: Field, s: float) -> Field:
    return free_semigroup_apply(f, 1.0, s)


def subordinate(f: Field, density: SubordinatorDensity, t: float, heat=_heat, form: str = "rescaled") -> Field:
    """Fractional flow as an average of heat flows.

    ``form="rescaled"`` evaluates ``sum_j w_j f_{1,mu}(s_j) heat(f, s_j t^{1/mu})``
    on the table nodes.  ``form="direct"`` integrates ``f_{t,mu}(s) heat(f, s)``
    on its own log grid through the interpolant, which exercises the scaling
    rule independently.
    """
    t = float(t)
    if not (np.isfinite(t) and t > 0):
        raise DomainError(f"subordination needs t > 0, got {t!r}")
    scale = t ** (1.0 / density.mu)
    if form == "rescaled":
        times = density.s_nodes * scale
        coeffs = density.weights * density.values
    elif form == "direct":
        lo, hi = np.log(density.s_min * scale), np.log(density.s_max * scale)
        logs = np.linspace(lo, hi, 2 * len(density.s_nodes))
        times = np.exp(logs)
        coeffs = density.rescaled(t, times) * times * (logs[1] - logs[0])
        coeffs[0] *= 0.5
        coeffs[-1] *= 0.5
    else:
        raise ValueError(f"unknown form {form!r}")
    acc = np.zeros(f.grid.shape)
    for s, c in zip(times, coeffs):
        if c > 1e-300:
            acc += c * heat(f, s).values
    acc += density.tail_mass * heat(f, density.s_max * scale).values
    return f.with_values(acc)
