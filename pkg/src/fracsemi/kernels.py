"""Fractional heat kernels on the torus and their two-sided profile bounds."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erfc, gamma

from .errors import ConfigurationError, DomainError
from .grid import Field, TorusGrid, as_mu, free_multiplier


def fractional_constant(N: int, mu: float) -> float:
    """Normalizing constant of the singular-integral form of ``(-Delta)^mu``."""
    mu = float(mu)
    if not (0.0 < mu < 1.0):
        raise DomainError(f"C_(N,mu) needs mu in (0, 1), got {mu!r} (Gamma(1 - mu) has a pole at mu = 1)")
    return 2.0 ** (2 * mu) * mu * gamma(N / 2 + mu) / (np.pi ** (N / 2) * gamma(1.0 - mu))


def H_profile(z, N: int, mu: float) -> np.ndarray:
    r = np.abs(np.asarray(z, dtype=float))
    with np.errstate(divide="ignore"):
        return np.minimum(1.0, r ** (-(N + 2 * mu)))


def I_profile(z, N: int, mu: float) -> np.ndarray:
    r = np.asarray(z, dtype=float)
    return (1.0 + r**2) ** (-(N + 2 * mu) / 2)


def _sphere_area(N: int) -> float:
    return 2.0 * np.pi ** (N / 2) / gamma(N / 2)


def tail_mass_estimate(N: int, mu: float, radius: float) -> float:
    """Mass of the R^N kernel at t = 1 outside the ball of given radius.

    Gaussian tail for mu = 1; for mu < 1 the kernel behaves like the jump
    density ``C_(N,mu) |z|^{-N-2mu}`` far out, which integrates in closed form.
    """
    if mu == 1.0:
        if N == 1:
            return float(erfc(radius / 2.0))
        return float(np.exp(-(radius**2) / 4.0))
    c = fractional_constant(N, mu)
    return float(c * _sphere_area(N) * radius ** (-2 * mu) / (2 * mu))


def time_kernel(grid: TorusGrid, order, t: float) -> np.ndarray:
    """Discrete kernel of ``S_mu(t)`` centred at the origin (index n/2 per axis).

    ``(S_mu(t) f)_i = h^N sum_j K[x_i - x_j] f_j``; the values approximate the
    periodization of ``k_mu(t, .)``.
    """
    mu = as_mu(order)
    raw = grid.inverse(free_multiplier(grid, mu, t)) / grid.cell_volume
    return np.fft.fftshift(raw)


@dataclass(frozen=True, eq=False)
class KernelProfile:
    mu: float
    grid: TorusGrid
    values: Field = field(repr=False)
    lower_c: float | None = None
    upper_c: float | None = None
    resolution_residual: float = 0.0
    tail_mass: float = 0.0

    @property
    def mass(self) -> float:
        return float(self.grid.cell_volume * np.sum(self.values.values))

    def at_time(self, t: float) -> Field:
        """Self-similar rescaling ``t^{-N/2mu} k0(z / t^{1/2mu})``.

        The result lives on the torus of length ``L t^{1/(2 mu)}`` with the same
        point count, so every grid point maps to a grid point.
        """
        scale = float(t) ** (1.0 / (2 * self.mu))
        g = TorusGrid(self.grid.dim, self.grid.length * scale, self.grid.n)
        return Field(g, self.values.values * scale ** (-self.grid.dim))

    def table(self) -> dict:
        """Columns z, k, H, I, k_over_H (z is the distance from the origin)."""
        N = self.grid.dim
        z = self.grid.radius.ravel()
        order = np.argsort(z, kind="stable")
        z = z[order]
        k = self.values.flat[order]
        H = H_profile(z, N, self.mu)
        return {"z": z, "k": k, "H": H, "I": I_profile(z, N, self.mu), "k_over_H": k / H}


def build_profile(mu, grid: TorusGrid, resolution_tol: float | None = 1e-14, tail_tol: float | None = 1e-8) -> KernelProfile:
    """Profile ``k_{0,mu}`` (the t = 1 kernel) sampled on ``grid``.

    Raises ConfigurationError when ``exp(-xi_max^{2mu})`` exceeds
    ``resolution_tol`` or the R^N tail mass beyond the half box exceeds
    ``tail_tol``.  Passing ``None`` skips a check; both measured values are
    kept on the profile either way.  For mu < 1 the tail is algebraic, so the
    default ``tail_tol`` needs an astronomically large box.
    """
    mu = as_mu(mu)
    residual = float(np.exp(-(grid.xi_max ** (2 * mu))))
    tail = tail_mass_estimate(grid.dim, mu, grid.length / 2)
    if resolution_tol is not None and residual > resolution_tol:
        raise ConfigurationError(
            f"resolution bound failed: exp(-xi_max^(2mu)) = {residual:.3e} > {resolution_tol:.1e}; increase n or shrink L"
        )
    if tail_tol is not None and tail > tail_tol:
        raise ConfigurationError(
            f"domain bound failed: kernel tail mass beyond L/2 = {tail:.3e} > {tail_tol:.1e}; increase L"
        )
    values = Field(grid, time_kernel(grid, mu, 1.0))
    return KernelProfile(mu=mu, grid=grid, values=values, resolution_residual=residual, tail_mass=tail)


def certify_bounds(profile: KernelProfile) -> tuple[float, float]:
    """Empirical ``c1 <= k / H_mu <= c2`` on ``|z| <= L/4``."""
    if profile.mu >= 1.0:
        raise DomainError("the H_mu bound family applies to mu < 1 only; the Gaussian case is handled separately")
    g = profile.grid
    mask = g.radius <= g.length / 4
    ratio = profile.values.values[mask] / H_profile(g.radius[mask], g.dim, profile.mu)
    c1, c2 = float(ratio.min()), float(ratio.max())
    if not c1 > 0:
        raise ConfigurationError(f"kernel positivity failure: min k/H = {c1:.3e}; grid under-resolved")
    return c1, c2


def certified(profile: KernelProfile) -> KernelProfile:
    c1, c2 = certify_bounds(profile)
    return replace(profile, lower_c=c1, upper_c=c2)


def kernel_infimum(grid: TorusGrid, order, t: float, radius: float) -> float:
    """``min_{|z| <= radius}`` of the discrete kernel at time ``t`` (may be < 0 if under-resolved)."""
    k = time_kernel(grid, order, t)
    return float(k[grid.radius <= radius].min())
