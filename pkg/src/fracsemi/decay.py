"""Exponential types, the spectral bound a_*, decay certificates and reports."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.sparse.linalg

from .engine import DENSE_CAP, EvolutionConfig, _grid_of, dense_operator, evolve_many, norm_trace_inf
from .errors import DomainError, FitQualityError, NumericalError
from .grid import Field, TorusGrid, as_mu, lp_norm
from .io import dumps
from .kernels import time_kernel
from .potentials import ball_criterion, potential_values

SCHEMA_VERSION = 1
DECAY_THRESHOLD = 1e-4
FLAT_TOL = 1e-3
MIN_R2 = 0.999


@dataclass(frozen=True)
class RateFit:
    rate: float
    intercept: float
    r_squared: float
    flat: bool


def fit_rate(times, norms, flat_tol: float = FLAT_TOL, min_r2: float = MIN_R2, monotone_tol: float = 1e-9) -> RateFit:
    """Least-squares slope of ``-log norm`` against t over the tail half.

    A trace staying within ``flat_tol`` of 1, or whose tail half varies by
    less than ``flat_tol`` relative to its start, is reported as rate 0: the
    decay is not resolved on this time grid.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    if t.size < 4:
        raise FitQualityError("need at least 4 samples to fit a rate")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise FitQualityError("norm trace must be positive and finite")
    if np.any(np.diff(y) > monotone_tol * y[:-1]):
        raise FitQualityError("norm trace is not monotone; refine the grid or the time step")
    if np.max(np.abs(y - 1.0)) <= flat_tol:
        return RateFit(0.0, 0.0, 1.0, True)
    tail = slice(t.size // 2, None)
    if np.max(np.abs(y[tail] / y[tail][0] - 1.0)) <= flat_tol:
        return RateFit(0.0, float(-np.log(y[tail][0])), 1.0, True)
    tt, ly = t[tail], -np.log(y[tail])
    slope, intercept = np.polyfit(tt, ly, 1)
    resid = ly - (slope * tt + intercept)
    spread = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / spread if spread > 0 else 1.0
    if r2 < min_r2:
        raise FitQualityError(f"tail fit R^2 = {r2:.5f} < {min_r2}", r_squared=r2)
    return RateFit(float(slope), float(intercept), float(r2), False)


def _random_positive(grid: TorusGrid, seed: int) -> Field:
    rng = np.random.default_rng(seed)
    raw = rng.uniform(0.5, 1.5, size=grid.shape)
    f = Field(grid, raw)
    return f.with_values(raw / lp_norm(f, 2))


def l2_trace(V, order, t_grid, cfg: EvolutionConfig | None = None, seed: int = 0) -> np.ndarray:
    """``||S_{mu,V}(t) u0||_2`` for a normalized random positive ``u0``."""
    grid = _grid_of(V)
    u0 = _random_positive(grid, seed)
    snaps, _, _ = evolve_many(u0, V, order, t_grid, cfg)
    return np.array([lp_norm(s, 2) for s in snaps])


def estimate_omega(V, order, p, t_grid, cfg: EvolutionConfig | None = None, method: str = "auto", seed: int = 0) -> float:
    """Exponential type of the semigroup on L^p for p in {1, 2, inf}.

    p = inf fits the decay of ``||S(t) 1||_inf``; p = 1 reuses it through
    duality (the discrete operator is symmetric).  p = 2 returns
    ``lambda_min(A)`` when the dense eigensolve is feasible (``method="auto"``
    or ``"eigen"``), otherwise fits the L^2 trace of a random positive field.
    """
    p = float(p)
    if p not in (1.0, 2.0, np.inf):
        raise DomainError(f"p must be 1, 2 or inf, got {p!r}")
    t_grid = np.asarray(t_grid, dtype=float)
    if p == 2.0:
        grid = _grid_of(V)
        if method == "eigen" or (method == "auto" and grid.size <= DENSE_CAP):
            return max(0.0, dense_operator(grid, order, V).lambda_min)
        return max(0.0, fit_rate(t_grid, l2_trace(V, order, t_grid, cfg, seed)).rate)
    trace = norm_trace_inf(V, order, t_grid, cfg)
    return max(0.0, fit_rate(t_grid, trace).rate)


def _apply_A(grid: TorusGrid, mu: float, v: np.ndarray, x: np.ndarray) -> np.ndarray:
    u = x.reshape(grid.shape)
    return (grid.apply_multiplier(u, grid.symbol(mu)) + v * u).ravel()


def a_star(V, order, method: str = "auto", tol: float = 1e-10, max_iters: int = 500) -> float:
    """Smallest eigenvalue of ``A = A0 + diag(V)``, clipped at 0.

    Dense eigensolve under the size cap; otherwise (or with ``method="inverse"``)
    inverse power iteration with shift 0, each solve by conjugate gradients
    preconditioned with ``(|xi|^{2mu} + mean V)^{-1}`` in Fourier space.
    """
    grid = _grid_of(V)
    mu = as_mu(order)
    v = np.broadcast_to(potential_values(V), grid.shape).astype(float)
    if method == "dense" or (method == "auto" and grid.size <= DENSE_CAP):
        return max(0.0, dense_operator(grid, mu, v).lambda_min)
    if v.max() == 0.0:
        return 0.0
    size = grid.size
    A = scipy.sparse.linalg.LinearOperator((size, size), matvec=lambda x: _apply_A(grid, mu, v, x), dtype=float)
    precond_symbol = grid.symbol(mu) + v.mean()
    M = scipy.sparse.linalg.LinearOperator(
        (size, size),
        matvec=lambda x: grid.apply_multiplier(x.reshape(grid.shape), 1.0 / precond_symbol).ravel(),
        dtype=float,
    )
    x = np.ones(size) / np.sqrt(size)
    rq_old = np.inf
    rq = float(x @ A.matvec(x))
    for _ in range(max_iters):
        y, info = scipy.sparse.linalg.cg(A, x, rtol=1e-13, atol=0.0, maxiter=10 * size, M=M)
        if info < 0:
            raise NumericalError("conjugate gradient breakdown in inverse iteration")
        x = y / np.linalg.norm(y)
        rq_old, rq = rq, float(x @ A.matvec(x))
        if abs(rq - rq_old) <= tol * max(1.0, abs(rq)):
            return max(0.0, rq)
    residual = float(np.linalg.norm(A.matvec(x) - rq * x))
    raise NumericalError(f"inverse iteration did not converge in {max_iters} steps", residual=residual)


def omega_chain(omega_2: float, omega_inf: float, N: int, mu: float) -> dict:
    """Check ``omega_2 >= omega_inf >= omega_2 / (1 + N/(4 mu))`` with 5 % slack."""
    mu = as_mu(mu)
    tol = 0.05 * omega_2 if omega_2 >= 1e-2 else 1e-3
    factor = 1.0 / (1.0 + N / (4.0 * mu))
    verdict = {
        "omega_2": float(omega_2),
        "omega_inf": float(omega_inf),
        "tol": float(tol),
        "lower_factor": factor,
        "upper_ok": bool(omega_2 >= omega_inf - tol),
        "lower_ok": bool(omega_inf >= factor * omega_2 - tol),
    }
    if mu == 1.0:
        verdict["equal_ok"] = bool(abs(omega_2 - omega_inf) <= tol)
    verdict["ok"] = all(v for k, v in verdict.items() if k.endswith("_ok"))
    return verdict


def g_mu_reference(s, N: int, mu: float, r: float, c: float) -> np.ndarray:
    """Closed-form lower profile of ``S_mu(s) V`` with unit generic constant."""
    s = np.asarray(s, dtype=float)
    if mu == 1.0:
        return c * (4 * np.pi * s) ** (-N / 2) * np.exp(-(r**2) / (4 * s))
    return c * s / (s ** (1 / mu) + r**2) ** ((N + 2 * mu) / 2)


@dataclass(frozen=True)
class Certificate:
    t: float
    r: float
    c: float
    G_value: float
    G_reference: float
    bound_value: float
    simulated_value: float
    ok: bool


def decay_certificate(V, order, t: float, r: float, c: float, cfg: EvolutionConfig | None = None) -> Certificate:
    """Explicit sup-norm bound ``1 - (1 - t ||V||_inf) G(t)`` against the simulated norm.

    ``G(t) = int_0^t c inf_{|z| <= r} k_mu(s, z) ds`` with the infimum taken
    from the discrete kernel on the grid (negative ripples clipped to 0), so
    the bound uses certified rather than generic constants.
    """
    grid = _grid_of(V)
    mu = as_mu(order)
    vmax = float(np.max(potential_values(V)))
    t, r, c = float(t), float(r), float(c)
    if vmax == 0.0 or not c > 0:
        raise DomainError("certificate needs a ball criterion constant c > 0 (V = 0 never qualifies)")
    if not (0 < t < 1.0 / vmax):
        raise DomainError(f"certificate needs 0 < t < 1/||V||_inf = {1.0 / vmax:.6g}, got {t!r}")
    inf_ball, _ = ball_criterion(V, r)
    if inf_ball < c * (1 - 1e-12):
        raise DomainError(f"ball criterion gives {inf_ball:.6g} < c = {c:.6g} at r = {r}")

    mask = grid.radius <= r

    def g(s):
        if s <= 0:
            return 0.0
        return c * max(0.0, float(time_kernel(grid, mu, s)[mask].min()))

    G, _ = scipy.integrate.quad(g, 0.0, t, limit=200, epsabs=1e-12, epsrel=1e-9)
    G_ref, _ = scipy.integrate.quad(lambda s: float(g_mu_reference(s, grid.dim, mu, r, c)), 0.0, t, limit=200)
    bound = 1.0 - (1.0 - t * vmax) * G
    cfg = cfg or EvolutionConfig("dense_oracle" if grid.size <= DENSE_CAP else "splitting")
    simulated = float(norm_trace_inf(V, mu, [t], cfg)[0])
    ok = simulated <= bound + 1e-6 and bound < 1.0
    return Certificate(t, r, c, float(G), float(G_ref), float(bound), simulated, bool(ok))


def _expm_norm_rate(V, order, t: float) -> float:
    """``-log ||exp(-t A)||_2 / t`` through Pade ``expm`` and an SVD norm."""
    grid = _grid_of(V)
    A = dense_operator(grid, order, V).matrix
    P = scipy.linalg.expm(-float(t) * A)
    return -float(np.log(np.linalg.norm(P, 2))) / float(t)


def default_t_grid(V, count: int = 41) -> np.ndarray:
    """Times up to ``8 / mean(V)``; ``mean(V)`` bounds a_* from above (constant test function)."""
    mean = float(np.mean(potential_values(V)))
    t_max = 8.0 / mean if mean > 0 else 10.0
    return np.linspace(0.0, t_max, count)[1:]


def omega_equals_astar(V, order, path: str = "trace", t_grid=None, cfg: EvolutionConfig | None = None, seed: int = 0) -> tuple:
    """``(omega_2, a_star, rel_gap)`` from two independent routines.

    ``path="trace"`` fits the L^2 decay of a random positive field evolved by
    ``cfg``; ``path="eigen"`` takes ``-log ||expm(-tA)||_2 / t``.  ``a_star``
    always comes from the symmetric eigensolve.
    """
    grid = _grid_of(V)
    if grid.size > DENSE_CAP:
        raise DomainError("omega_equals_astar needs a dense-feasible grid")
    a = a_star(V, order)
    if path == "eigen":
        t = 1.0 if t_grid is None else float(np.asarray(t_grid)[-1])
        omega = _expm_norm_rate(V, order, t)
        # ||expm(-tA)||_2 equals 1 only up to roundoff when a_* = 0
        omega = 0.0 if omega < 1e-10 else omega
    elif path == "trace":
        t_grid = default_t_grid(V) if t_grid is None else np.asarray(t_grid, dtype=float)
        omega = max(0.0, fit_rate(t_grid, l2_trace(V, order, t_grid, cfg, seed)).rate)
    else:
        raise ValueError(f"unknown path {path!r}")
    scale = max(abs(a), abs(omega))
    gap = abs(omega - a) / scale if scale > 0 else 0.0
    return float(omega), float(a), float(gap)


def contraction_or_decay(times, norms, threshold: float = DECAY_THRESHOLD) -> dict:
    """Classify a ``||S(t) 1||_inf`` trace: stays near 1, decays, or neither."""
    norms = np.asarray(norms, dtype=float)
    if np.max(np.abs(norms - 1.0)) <= FLAT_TOL:
        return {"alternative": "contraction", "rate": 0.0, "hint": None}
    try:
        fit = fit_rate(times, norms)
    except FitQualityError as exc:
        return {"alternative": "inconclusive", "rate": None, "hint": f"refine grid or extend t_grid ({exc})"}
    if fit.rate > threshold:
        return {"alternative": "decay", "rate": fit.rate, "hint": None}
    return {"alternative": "inconclusive", "rate": fit.rate, "hint": "rate below threshold; extend t_grid or enlarge L"}


@dataclass
class DecayReport:
    omega_1: float | None = None
    omega_2: float | None = None
    omega_inf: float | None = None
    a_star: float | None = None
    chain_ok: dict = field(default_factory=dict)
    certificate: dict | None = None
    ball_criterion_table: list = field(default_factory=list)
    verdict: str = "inconclusive"
    threshold: float = DECAY_THRESHOLD
    hints: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    schema: int = SCHEMA_VERSION

    def __post_init__(self):
        for name in ("omega_1", "omega_2", "omega_inf", "a_star"):
            val = getattr(self, name)
            if val is not None and val < -1e-9:
                raise DomainError(f"{name} = {val} is negative; contraction semigroups have nonnegative types")
        if self.certificate and not (0.0 <= self.certificate["bound_value"] <= 1.0):
            raise DomainError("certificate bound must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return dumps(self.to_dict())


def assemble_report(
    omega_1=None,
    omega_2=None,
    omega_inf=None,
    a_star_value=None,
    chain=None,
    certificate: Certificate | None = None,
    ball_table=None,
    alternative: dict | None = None,
    threshold: float = DECAY_THRESHOLD,
    config: dict | None = None,
) -> DecayReport:
    """Collect measurements and derive the verdict.

    decay: ``a_* > threshold`` and the chain holds.  no_decay: the ball
    criterion infimum vanishes at every probed radius and ``a_* < threshold``.
    Anything else is inconclusive.
    """
    if omega_2 is None and a_star_value is None:
        raise DomainError("report needs at least omega_2 or a_star")
    a = a_star_value if a_star_value is not None else omega_2
    chain = dict(chain or {})
    table = [(float(r), float(v)) for r, v in (ball_table or [])]
    hints = []
    chain_holds = chain.get("ok", True)
    if a > threshold and chain_holds:
        verdict = "decay"
    elif table and all(v <= 1e-12 for _, v in table) and a < threshold:
        verdict = "no_decay"
    else:
        verdict = "inconclusive"
        hints.append("refine the grid or enlarge the torus; a_* near threshold or chain failed")
    if alternative is not None:
        if alternative.get("alternative") == "inconclusive":
            verdict = "inconclusive"
        if alternative.get("hint"):
            hints.append(alternative["hint"])
    return DecayReport(
        omega_1=omega_1,
        omega_2=omega_2,
        omega_inf=omega_inf,
        a_star=a_star_value,
        chain_ok=chain,
        certificate=asdict(certificate) if certificate is not None else None,
        ball_criterion_table=table,
        verdict=verdict,
        threshold=threshold,
        hints=hints,
        config=dict(config or {}),
    )
