"""Nonnegative potentials: families, uniform local norms, truncation and ball tests.

Balls are sets of grid points within periodic Euclidean distance ``r`` of a
centre, and every integral is an ``h^N``-weighted sum, consistent with
``lp_norm``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, InvalidFieldError
from .grid import Field, TorusGrid

FAMILIES = ("constant", "well", "bump_array", "counterexample", "custom")


@dataclass(frozen=True, eq=False)
class Potential:
    grid: TorusGrid
    values: Field = field(repr=False)
    p0: float = 1.0
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.values, Field):
            object.__setattr__(self, "values", Field(self.grid, self.values))
        if self.values.grid != self.grid:
            raise InvalidFieldError("potential values live on a different grid")
        if np.any(self.values.values < 0):
            raise InvalidFieldError("potentials must be nonnegative")
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown potential family {self.family!r}; expected one of {FAMILIES}")
        if not float(self.p0) >= 1.0:
            raise DomainError(f"p0 must be >= 1, got {self.p0!r}")

    @property
    def array(self) -> np.ndarray:
        return self.values.values

    @property
    def sup(self) -> float:
        return float(self.array.max())

    def table(self) -> dict:
        cols = {f"x{i}": c.ravel() for i, c in enumerate(self.grid.coords)}
        if self.grid.dim == 1:
            cols = {"x": self.grid.axis}
        cols["V"] = self.values.flat
        return cols


@dataclass(frozen=True, eq=False)
class TruncatedPotential:
    base: Potential
    M: float
    values: Field = field(repr=False)

    @property
    def grid(self) -> TorusGrid:
        return self.base.grid

    @property
    def array(self) -> np.ndarray:
        return self.values.values

    @property
    def sup(self) -> float:
        return float(self.array.max())

    @property
    def p0(self) -> float:
        return self.base.p0


def potential_values(V) -> np.ndarray:
    """Raw array behind a Potential, TruncatedPotential, Field or array."""
    if isinstance(V, (Potential, TruncatedPotential)):
        return V.array
    if isinstance(V, Field):
        return V.values
    return np.asarray(V, dtype=float)


def constant(grid: TorusGrid, c: float, p0: float = 1.0) -> Potential:
    return Potential(grid, Field.constant(grid, c), p0, "constant", {"c": float(c)})


def _smooth_bump(r: np.ndarray, width: float) -> np.ndarray:
    """C^infinity bump equal to 1 at r = 0 and supported on r < width."""
    out = np.zeros_like(r)
    inside = r < width
    q = (r[inside] / width) ** 2
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - q))
    return out


def well(grid: TorusGrid, depth: float = 1.0, width: float = 2.0, center=0.0, p0: float = 1.0) -> Potential:
    """Compactly supported smooth bump of height ``depth`` and radius ``width``."""
    if width >= grid.length / 2:
        raise ConfigurationError("well width must be below L/2")
    vals = depth * _smooth_bump(grid.periodic_distance(center), width)
    params = {"depth": float(depth), "width": float(width), "center": np.atleast_1d(center).tolist()}
    return Potential(grid, Field(grid, vals), p0, "well", params)


def bump_array(grid: TorusGrid, amplitude: float = 1.0, spacing: float = 2.0, width: float = 0.8, p0: float = 1.0) -> Potential:
    """Periodic lattice of smooth bumps; ``L / spacing`` must be an integer."""
    count = grid.length / spacing
    if abs(count - round(count)) > 1e-9 or round(count) < 1:
        raise ConfigurationError(f"bump spacing {spacing} must divide the box length {grid.length}")
    if width > spacing / 2:
        raise ConfigurationError("bump width must not exceed half the spacing")
    vals = np.zeros(grid.shape)
    centers = -grid.length / 2 + spacing * (np.arange(round(count)) + 0.5)
    for c in np.stack(np.meshgrid(*([centers] * grid.dim), indexing="ij"), axis=-1).reshape(-1, grid.dim):
        vals += _smooth_bump(grid.periodic_distance(c), width)
    params = {"amplitude": float(amplitude), "spacing": float(spacing), "width": float(width)}
    return Potential(grid, Field(grid, amplitude * vals), p0, "bump_array", params)


def custom(grid: TorusGrid, values, p0: float = 1.0) -> Potential:
    return Potential(grid, Field(grid, values), p0, "custom", {})


def make_counterexample(grid: TorusGrid, p0: float = 1.0, n_max: int = 8, spacing: float = 3.0) -> Potential:
    """Finite torus version of the concentrating-bump potential.

    Bump ``n = 1..n_max`` sits at ``x_n = -L/2 + (n - 1/2) spacing`` on the
    first axis, plays the role of a cube at distance ``d_n = n * spacing``
    from the origin and is the indicator of the ball of radius ``1/d_n``.
    Its amplitude (nominally ``d_n^{N/p0}``) is rescaled so that the discrete
    integral over the unit cube around ``x_n`` is exactly 1.  With
    ``L = n_max * spacing`` the bumps tile the torus evenly.
    """
    n_max = int(n_max)
    if n_max < 1:
        raise ConfigurationError("n_max must be >= 1")
    if spacing <= 2.0:
        raise ConfigurationError("bump spacing must exceed 2 so unit cubes are disjoint")
    if n_max * spacing > grid.length + 1e-9:
        raise ConfigurationError(f"{n_max} bumps at spacing {spacing} do not fit in L = {grid.length}")
    radii = 1.0 / (spacing * np.arange(1, n_max + 1))
    if grid.spacing > radii[-1] / 4:
        raise ConfigurationError(
            f"grid spacing {grid.spacing:.4g} does not resolve the smallest bump radius {radii[-1]:.4g} (need h <= radius/4)"
        )
    h_vol = grid.cell_volume
    vals = np.zeros(grid.shape)
    centers = []
    for n, rho in enumerate(radii, start=1):
        c = np.zeros(grid.dim)
        c[0] = -grid.length / 2 + (n - 0.5) * spacing
        centers.append(c)
        support = grid.periodic_distance(c) <= rho * (1 + 1e-12)
        vals[support] = 1.0 / (h_vol * np.count_nonzero(support))
    params = {
        "n_max": n_max,
        "spacing": float(spacing),
        "centers": [c.tolist() for c in centers],
        "radii": radii.tolist(),
        # any ball of this radius contains a full bump when the bumps tile the torus
        "r_star": float(spacing / 2 + radii[0] + grid.spacing),
    }
    return Potential(grid, Field(grid, vals), float(p0), "counterexample", params)


def cube_integrals(V: Potential) -> list:
    """Discrete integral of V over the unit cube around each counterexample bump."""
    g = V.grid
    out = []
    for c in V.params["centers"]:
        mask = np.ones(g.shape, dtype=bool)
        for axis_coords, x0 in zip(g.coords, c):
            d = np.abs(axis_coords - x0) % g.length
            d = np.minimum(d, g.length - d)
            mask &= d < 0.5
        out.append(float(g.cell_volume * V.array[mask].sum()))
    return out


def _ball_weights(grid: TorusGrid, center, r: float) -> np.ndarray:
    """Quadrature weights of the ball: 1 inside, 1/2 on points at distance exactly r.

    The half weight makes the 1D ball measure exactly ``2r`` whenever ``r/h``
    is an integer, matching the trapezoid rule.
    """
    if not (0 < r < grid.length / 2):
        raise ConfigurationError(f"ball radius must lie in (0, L/2) = (0, {grid.length / 2}), got {r!r}")
    d = grid.periodic_distance(center)
    eps = 1e-9 * grid.spacing
    return np.where(d < r - eps, 1.0, np.where(d <= r + eps, 0.5, 0.0))


def ball_integrals(V, r: float, grid: TorusGrid | None = None) -> np.ndarray:
    """``int_{B(x, r)} V`` for every grid centre x."""
    vals = potential_values(V)
    grid = grid or V.grid
    weights = _ball_weights(grid, np.zeros(grid.dim), r)
    n = grid.n
    if grid.dim == 1:
        # direct sliding sums keep exact cancellation-free totals
        m = int(np.ceil(r / grid.spacing)) + 1
        m = min(m, n // 2 - 1)
        stencil = np.roll(weights, -(n // 2))  # centred at index 0
        w = np.concatenate([stencil[-m:], stencil[: m + 1]])
        padded = np.concatenate([vals[-m:], vals, vals[:m]])
        windows = np.lib.stride_tricks.sliding_window_view(padded, 2 * m + 1)
        return grid.cell_volume * (windows @ w)
    conv = grid.inverse(grid.forward(vals) * grid.forward(weights))
    # the stencil is centred at the grid origin x = 0, i.e. index n/2 on each axis
    conv = np.roll(conv, shift=(-(n // 2),) * grid.dim, axis=tuple(range(grid.dim)))
    return grid.cell_volume * np.maximum(conv, 0.0)


def local_ball_integral(V, center, r: float) -> float:
    g = V.grid
    return float(g.cell_volume * np.sum(potential_values(V) * _ball_weights(g, center, r)))


def uniform_norm(V, p0: float | None = None, ball_radius: float = 1.0, grid: TorusGrid | None = None) -> float:
    """``max_{x0} ||V||_{L^p0(B(x0, r))}`` over grid centres."""
    if p0 is None:
        p0 = V.p0
    p0 = float(p0)
    if not (1.0 <= p0 < np.inf):
        raise DomainError(f"p0 must lie in [1, inf), got {p0!r}")
    vals = np.abs(potential_values(V))
    grid = grid or V.grid
    local = ball_integrals(vals**p0, ball_radius, grid)
    return float(local.max() ** (1.0 / p0))


def truncate(V: Potential, M: float) -> TruncatedPotential:
    M = float(M)
    if not M > 0:
        raise DomainError(f"truncation level must be positive, got {M!r}")
    return TruncatedPotential(V, M, Field(V.grid, np.minimum(V.array, M)))


def approximability_profile(V: Potential, p0: float | None, M_ladder, ball_radius: float = 1.0) -> list:
    """``[(M, ||V - V_M||_{L^p0_U})]`` along an increasing ladder."""
    ladder = [float(m) for m in M_ladder]
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise DomainError("M_ladder must be strictly increasing")
    out = []
    for M in ladder:
        defect = V.array - truncate(V, M).array
        out.append((M, uniform_norm(defect, p0 if p0 is not None else V.p0, ball_radius, V.grid)))
    return out


def ball_criterion(V, r: float) -> tuple[float, tuple]:
    """Infimum over centres of ``int_{B(x, r)} V`` and the minimizing centre."""
    local = ball_integrals(V, r)
    idx = np.unravel_index(int(np.argmin(local)), local.shape)
    center = tuple(float(c[idx]) for c in V.grid.coords)
    return float(local[idx]), center


def potential_from_config(grid: TorusGrid, config: dict) -> Potential:
    """Build a potential from a config mapping ``{"family": ..., **params}``."""
    params = dict(config)
    family = params.pop("family", None)
    p0 = float(params.pop("p0", 1.0))
    try:
        if family == "constant":
            return constant(grid, params.get("c", 1.0), p0)
        if family == "well":
            return well(grid, p0=p0, **params)
        if family == "bump_array":
            return bump_array(grid, p0=p0, **params)
        if family == "counterexample":
            return make_counterexample(grid, p0, **params)
        if family == "custom":
            return custom(grid, np.asarray(params["values"], dtype=float), p0)
    except TypeError as exc:
        raise ConfigurationError(f"potential.{family}: {exc}") from None
    raise ConfigurationError(f"potential.family must be one of {FAMILIES}, got {family!r}")
