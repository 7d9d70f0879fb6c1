"""Evolution of u_t + (-Delta)^mu u + V u = 0 on the torus.

Three engines share one interface:

* ``picard``: fixed point of the variation-of-constants formula on windows of
  length ``T0`` with ``T0 ||V||_inf <= 1/2``; the Duhamel integral uses
  product integration in time (``V u`` linear between nodes, the free flow
  integrated exactly per Fourier mode).  Window end values are Richardson-extrapolated from
  ``quad_nodes`` and ``2 quad_nodes - 1`` nodes.
* ``splitting``: Strang splitting, half potential step, full free step, half
  potential step.
* ``dense_oracle``: ``exp(-t A)`` with ``A = A0 + diag(V)`` by symmetric
  eigendecomposition (grids up to 4096 points).

Unbounded families are always evolved through a truncation chosen by the
caller; on the grid every potential is bounded anyway.
"""
from __future__ import annotations

import hashlib
from collections import OrderedDict, namedtuple
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import CapabilityError, ConfigurationError, ConvergenceError, DomainError
from .grid import Field, TorusGrid, as_mu, boundary_mass, free_multiplier, laplacian_matrix, lp_norm
from .potentials import potential_values

ENGINES = ("picard", "splitting", "dense_oracle")
DENSE_CAP = 4096


@dataclass(frozen=True)
class EvolutionConfig:
    engine: str = "splitting"
    dt: float = 1e-3
    window: float | None = None
    picard_tol: float = 1e-12
    quad_nodes: int = 129
    max_picard_iters: int = 200
    richardson: bool = True

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ConfigurationError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt!r}")
        if self.window is not None and not self.window > 0:
            raise ConfigurationError(f"window must be positive, got {self.window!r}")
        if not self.picard_tol > 0:
            raise ConfigurationError(f"picard_tol must be positive, got {self.picard_tol!r}")
        if int(self.quad_nodes) < 3:
            raise ConfigurationError("quad_nodes must be >= 3")
        if int(self.max_picard_iters) < 1:
            raise ConfigurationError("max_picard_iters must be >= 1")


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    final: Field
    trace: list = field(repr=False)
    engine_diagnostics: dict = field(default_factory=dict)
    boundary_mass: float = 0.0

    def trace_table(self) -> dict:
        arr = np.array(self.trace, dtype=float).reshape(-1, 4)
        return {"t": arr[:, 0], "l1": arr[:, 1], "l2": arr[:, 2], "linf": arr[:, 3]}


def _norms(grid: TorusGrid, values: np.ndarray) -> tuple:
    f = Field(grid, values)
    return lp_norm(f, 1), lp_norm(f, 2), lp_norm(f, np.inf)


# ---------------------------------------------------------------- dense oracle


class DenseOperator:
    """Eigendecomposition of the symmetric matrix ``A0 + diag(V)``."""

    def __init__(self, grid: TorusGrid, mu: float, v: np.ndarray):
        if grid.size > DENSE_CAP:
            raise CapabilityError(f"dense oracle is capped at {DENSE_CAP} points, grid has {grid.size}")
        self.grid = grid
        self.mu = mu
        a = laplacian_matrix(grid, mu)
        a[np.diag_indices_from(a)] += v.ravel()
        self.matrix = a
        self.eigenvalues, self.eigenvectors = scipy.linalg.eigh(a)

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    def propagate(self, values: np.ndarray, t: float) -> np.ndarray:
        q = self.eigenvectors
        coeffs = q.T @ values.ravel()
        return (q @ (np.exp(-t * self.eigenvalues) * coeffs)).reshape(self.grid.shape)

    def propagator(self, t: float) -> np.ndarray:
        q = self.eigenvectors
        return (q * np.exp(-t * self.eigenvalues)) @ q.T


_DENSE_CACHE: OrderedDict = OrderedDict()


def dense_operator(grid: TorusGrid, order, V) -> DenseOperator:
    mu = as_mu(order)
    v = np.ascontiguousarray(np.broadcast_to(potential_values(V), grid.shape), dtype=float)
    key = (grid, mu, hashlib.sha1(v.tobytes()).hexdigest())
    op = _DENSE_CACHE.get(key)
    if op is None:
        op = DenseOperator(grid, mu, v)
        _DENSE_CACHE[key] = op
        while len(_DENSE_CACHE) > 8:
            _DENSE_CACHE.popitem(last=False)
    else:
        _DENSE_CACHE.move_to_end(key)
    return op


# ---------------------------------------------------------------- picard


def _phi_weights(x: np.ndarray) -> tuple:
    """``phi1 = (1 - e^-x)/x`` and ``phi2 = (x - 1 + e^-x)/x^2``, series near 0."""
    small = x < 1e-4
    xs = np.where(small, 1.0, x)
    em1 = np.expm1(-xs)
    phi1 = np.where(small, 1 - x / 2 + x**2 / 6 - x**3 / 24, -em1 / xs)
    phi2 = np.where(small, 0.5 - x / 6 + x**2 / 24 - x**3 / 120, (xs + em1) / xs**2)
    return phi1, phi2


def picard_window(grid: TorusGrid, mu: float, u0: np.ndarray, v: np.ndarray, T: float, nodes: int, tol: float, max_iters: int):
    """Solve the Duhamel fixed point on ``[0, T]`` at ``nodes`` equispaced times.

    ``V u`` is interpolated linearly between nodes and the free flow is
    integrated exactly per Fourier mode, so stiff high modes carry no extra
    quadrature error and the scheme is second order in the node spacing.
    Returns the node values (shape ``(nodes,) + grid.shape``) and the number of
    Picard sweeps.
    """
    lam = grid.symbol(mu)
    delta = T / (nodes - 1)
    step = np.exp(-delta * lam)
    phi1, phi2 = _phi_weights(delta * lam)
    w_prev, w_next = delta * (phi1 - phi2), delta * phi2
    u0_hat = grid.forward(u0)
    free = np.exp(-(np.arange(nodes) * delta)[:, None] * lam.ravel()[None, :]).reshape((nodes,) + lam.shape) * u0_hat
    u = grid.inverse(free)
    for it in range(1, max_iters + 1):
        g_hat = grid.forward(v * u)
        duhamel = np.zeros_like(free)
        for i in range(1, nodes):
            duhamel[i] = step * duhamel[i - 1] + w_prev * g_hat[i - 1] + w_next * g_hat[i]
        new = grid.inverse(free - duhamel)
        change = float(np.max(np.abs(new - u)))
        u = new
        if change < tol:
            return u, it
    raise ConvergenceError(f"Picard iteration did not reach {tol:.1e} in {max_iters} sweeps", residual=change)


def _picard(grid, mu, u0, v, t_final, cfg, times):
    vmax = float(np.max(v))
    if cfg.window is not None:
        window = float(cfg.window)
        if window * vmax > 0.5 + 1e-12:
            raise ConfigurationError(
                f"Picard window {window} violates window * ||V||_inf <= 1/2 (||V||_inf = {vmax:.4g})"
            )
    else:
        window = 0.5 / vmax if vmax > 0 else t_final
    q = int(cfg.quad_nodes)
    u = u0
    t = 0.0
    iters = []
    snapshots = []
    trace = [(0.0, *_norms(grid, u0))]
    for target in times:
        while t < target - 1e-14 * max(1.0, target):
            T = min(window, target - t)
            coarse, k1 = picard_window(grid, mu, u, v, T, q, cfg.picard_tol, cfg.max_picard_iters)
            if cfg.richardson:
                fine, k2 = picard_window(grid, mu, u, v, T, 2 * q - 1, cfg.picard_tol, cfg.max_picard_iters)
                u = (4.0 * fine[-1] - coarse[-1]) / 3.0
                iters.append((k1, k2))
            else:
                u = coarse[-1]
                iters.append((k1,))
            t += T
            trace.append((t, *_norms(grid, u)))
        snapshots.append(u)
    diag = {"engine": "picard", "window": window, "windows": len(iters), "iterations": iters}
    return snapshots, trace, diag


# ---------------------------------------------------------------- splitting


def _splitting(grid, mu, u0, v, t_final, cfg, times):
    u = u0
    t = 0.0
    total_steps = 0
    snapshots = []
    trace = [(0.0, *_norms(grid, u0))]
    for target in times:
        span = target - t
        if span > 0:
            steps = max(1, int(np.ceil(span / cfg.dt - 1e-9)))
            dt = span / steps
            half = np.exp(-0.5 * dt * v)
            mult = free_multiplier(grid, mu, dt)
            record_every = max(1, steps // 200)
            for k in range(steps):
                u = half * grid.apply_multiplier(half * u, mult)
                if (k + 1) % record_every == 0 or k + 1 == steps:
                    trace.append((t + (k + 1) * dt, *_norms(grid, u)))
            total_steps += steps
            t = target
        snapshots.append(u)
    return snapshots, trace, {"engine": "splitting", "steps": total_steps, "dt": cfg.dt}


def _dense(grid, mu, u0, v, t_final, cfg, times):
    op = dense_operator(grid, mu, v)
    snapshots = [u0 if t == 0 else op.propagate(u0, t) for t in times]
    trace = [(0.0, *_norms(grid, u0))] + [(t, *_norms(grid, s)) for t, s in zip(times, snapshots) if t > 0]
    return snapshots, trace, {"engine": "dense_oracle", "lambda_min": op.lambda_min}


_ENGINES = {"picard": _picard, "splitting": _splitting, "dense_oracle": _dense}


def _prepare(u0: Field, V, order):
    mu = as_mu(order)
    grid = u0.grid
    v = np.broadcast_to(potential_values(V), grid.shape).astype(float)
    if np.any(v < 0):
        raise DomainError("potential must be nonnegative")
    return grid, mu, v


def evolve_many(u0: Field, V, order, times, cfg: EvolutionConfig | None = None):
    """``[S_{mu,V}(t) u0 for t in times]`` for increasing ``times``, plus trace and diagnostics."""
    cfg = cfg or EvolutionConfig()
    grid, mu, v = _prepare(u0, V, order)
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise DomainError("times must be nonnegative and nondecreasing")
    snaps, trace, diag = _ENGINES[cfg.engine](grid, mu, u0.values, v, times[-1], cfg, times)
    return [Field(grid, s) for s in snaps], trace, diag


def evolve(u0: Field, V, order, t_final: float, cfg: EvolutionConfig | None = None) -> EvolutionResult:
    """``u(t_final) = S_{mu,V}(t_final) u0`` by the engine named in ``cfg``."""
    t_final = float(t_final)
    if not (np.isfinite(t_final) and t_final >= 0):
        raise DomainError(f"t_final must be nonnegative, got {t_final!r}")
    (final,), trace, diag = evolve_many(u0, V, order, [t_final], cfg)
    return EvolutionResult(final, trace, diag, boundary_mass(final))


def _grid_of(V) -> TorusGrid:
    grid = getattr(V, "grid", None)
    if grid is None:
        raise DomainError("potential must carry its grid (Potential, TruncatedPotential or Field)")
    return grid


def operator_norm_inf(V, order, t: float, cfg: EvolutionConfig | None = None) -> float:
    """``||S_{mu,V}(t)||_{inf->inf} = ||S_{mu,V}(t) 1||_inf`` (order preservation)."""
    return norm_trace_inf(V, order, [t], cfg)[0]


def norm_trace_inf(V, order, times, cfg: EvolutionConfig | None = None) -> np.ndarray:
    grid = _grid_of(V)
    snaps, _, _ = evolve_many(Field.constant(grid, 1.0), V, order, times, cfg)
    return np.array([float(np.max(np.abs(s.values))) for s in snaps])


def operator_norm_2(V, order, t: float) -> float:
    """``exp(-t lambda_min(A))`` from the dense eigensolve."""
    op = dense_operator(_grid_of(V), order, V)
    return float(np.exp(-float(t) * op.lambda_min))


def operator_norm_1_dense(V, order, t: float) -> float:
    """Maximum column mass of the dense propagator, ``||S(t)||_{1->1}``."""
    op = dense_operator(_grid_of(V), order, V)
    return float(np.max(np.sum(np.abs(op.propagator(t)), axis=0)))


# ---------------------------------------------------------------- comparison


@dataclass(frozen=True)
class ComparisonReport:
    max_violation: float
    tolerance: float
    violations: dict
    ok: bool


def comparison_check(u0: Field, V1, V2, order, t: float, cfg: EvolutionConfig | None = None, rtol: float = 1e-8) -> ComparisonReport:
    """Check ``0 <= S_{V1}(t) u0 <= S_{V2}(t) u0 <= S_mu(t) u0`` pointwise.

    Violations are reported, never raised.
    """
    v1, v2 = potential_values(V1), potential_values(V2)
    if np.any(u0.values < 0):
        raise DomainError("comparison needs u0 >= 0")
    if np.any(v2 < 0) or np.any(v1 < v2):
        raise DomainError("comparison needs V1 >= V2 >= 0 pointwise")
    u1 = evolve(u0, v1, order, t, cfg).final.values
    u2 = evolve(u0, v2, order, t, cfg).final.values
    free = evolve(u0, np.zeros(u0.grid.shape), order, t, cfg).final.values
    violations = {
        "u_V1 >= 0": float(max(0.0, -u1.min())),
        "u_V1 <= u_V2": float(max(0.0, (u1 - u2).max())),
        "u_V2 <= free": float(max(0.0, (u2 - free).max())),
    }
    tol = rtol * float(np.max(np.abs(u0.values)))
    worst = max(violations.values())
    return ComparisonReport(worst, tol, violations, worst <= tol)


TruncationStep = namedtuple("TruncationStep", "M delta_1 delta_2 delta_inf")


def truncation_convergence(u0: Field, V, order, t: float, M_ladder, cfg: EvolutionConfig | None = None) -> list:
    """Distances ``||u_{V_M}(t) - u_V(t)||_p`` for p in {1, 2, inf} along ``M_ladder``."""
    ladder = [float(m) for m in M_ladder]
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise DomainError("M_ladder must be strictly increasing")
    if np.any(u0.values < 0):
        raise DomainError("truncation study needs u0 >= 0")
    v = potential_values(V)
    target = evolve(u0, v, order, t, cfg).final
    out = []
    for M in ladder:
        uM = evolve(u0, np.minimum(v, M), order, t, cfg).final
        diff = uM - target
        out.append(TruncationStep(M, lp_norm(diff, 1), lp_norm(diff, 2), lp_norm(diff, np.inf)))
    return out


def truncation_family(u0: Field, V, order, t: float, M_ladder, cfg: EvolutionConfig | None = None) -> list:
    """``[S_{mu,V_M}(t) u0 for M in M_ladder]`` (pointwise nonincreasing in M)."""
    v = potential_values(V)
    return [evolve(u0, np.minimum(v, float(M)), order, t, cfg).final for M in M_ladder]
