"""The acceptance battery: twelve numbered checks shared by the CLI and the tests.

Each check returns a :class:`CheckResult` carrying the measured quantities,
so a failing criterion reports what it saw rather than just ``False``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import decay
from .engine import ENGINES, EvolutionConfig, comparison_check, evolve, norm_trace_inf
from .grid import Field, TorusGrid, fractional_laplacian_apply, free_semigroup_apply, inner, lp_norm
from .kernels import build_profile
from .potentials import (
    _smooth_bump,
    approximability_profile,
    ball_criterion,
    bump_array,
    constant,
    cube_integrals,
    local_ball_integral,
    make_counterexample,
    truncate,
    well,
)
from .subordinator import build_density, subordinate


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d}: {self.name} ({self.seconds:.1f} s)"


def _sup_rel(approx, exact) -> float:
    return float(np.max(np.abs(approx - exact)) / np.max(np.abs(exact)))


def check_kernel_closed_forms() -> dict:
    grid = TorusGrid(1, 80.0, 2048)
    x = grid.axis
    window = np.abs(x) <= 20
    out = {"mass_error": {}}
    ok = True
    for mu in (0.25, 0.5, 0.75, 1.0):
        prof = build_profile(mu, grid, resolution_tol=None, tail_tol=None)
        err = abs(prof.mass - 1.0)
        out["mass_error"][mu] = err
        ok &= err <= 1e-6
        k = prof.values.values
        if mu == 1.0:
            exact = (4 * np.pi) ** -0.5 * np.exp(-(x**2) / 4)
            out["gauss_sup_rel"] = _sup_rel(k[window], exact[window])
            ok &= out["gauss_sup_rel"] <= 1e-6
        if mu == 0.5:
            exact = 1.0 / (np.pi * (1 + x**2))
            out["poisson_sup_rel"] = _sup_rel(k[window], exact[window])
            ok &= out["poisson_sup_rel"] <= 1e-3
    out["ok"] = bool(ok)
    return out


def check_subordination() -> dict:
    grid = TorusGrid(1, 16.0, 256)
    bump = Field(grid, _smooth_bump(grid.radius, 2.0))
    out = {"mass_error": {}, "laplace_error": {}, "flow_error": {}}
    ok = True
    for mu in (0.25, 0.5, 0.75):
        dens = build_density(mu)
        out["mass_error"][mu] = abs(dens.mass() - 1.0)
        lam = np.array([0.1, 1.0, 10.0])
        out["laplace_error"][mu] = float(np.max(np.abs(dens.laplace(lam) - np.exp(-(lam**mu)))))
        flow = 0.0
        for t in (0.5, 1.0, 2.0):
            sub = subordinate(bump, dens, t).values
            spectral = free_semigroup_apply(bump, mu, t).values
            flow = max(flow, float(np.max(np.abs(sub - spectral))))
        out["flow_error"][mu] = flow
        ok &= out["mass_error"][mu] <= 1e-6 and out["laplace_error"][mu] <= 1e-5 and flow <= 1e-4
    out["ok"] = bool(ok)
    return out


def random_bumps(grid: TorusGrid, rng: np.random.Generator, amplitude: float) -> np.ndarray:
    """Sum of 1-5 smooth compact bumps with random centres, widths and heights."""
    v = np.zeros(grid.shape)
    for _ in range(rng.integers(1, 6)):
        center = rng.uniform(-grid.length / 2, grid.length / 2, size=grid.dim)
        v += rng.uniform(0, amplitude) * _smooth_bump(grid.periodic_distance(center), rng.uniform(0.5, 3.0))
    return v


def check_battery(seeds: int = 50, seed0: int = 0) -> dict:
    grid = TorusGrid(1, 16.0, 256)
    worst = {e: {"contraction": -np.inf, "positivity": 0.0, "chain": 0.0} for e in ENGINES}
    for seed in range(seed0, seed0 + seeds):
        rng = np.random.default_rng(seed)
        mu = (0.25, 0.5, 0.75, 1.0)[seed % 4]
        u0 = Field(grid, random_bumps(grid, rng, 1.0))
        v = random_bumps(grid, rng, 2.0)
        vM = np.minimum(v, rng.uniform(0.2, 0.8) * v.max())
        for engine in ENGINES:
            cfg = EvolutionConfig(engine)
            u = evolve(u0, v, mu, 1.0, cfg).final
            w = worst[engine]
            w["contraction"] = max(w["contraction"], max(lp_norm(u, p) - lp_norm(u0, p) for p in (1, 2, np.inf)))
            w["positivity"] = max(w["positivity"], max(0.0, -float(u.values.min())) / float(u0.values.max()))
            chain = comparison_check(u0, v, vM, mu, 1.0, cfg)
            w["chain"] = max(w["chain"], chain.max_violation / float(u0.values.max()))
    ok = all(w["contraction"] <= 1e-8 and w["positivity"] <= 1e-10 and w["chain"] <= 1e-8 for w in worst.values())
    return {"seeds": seeds, "worst": worst, "ok": bool(ok)}


def check_engine_agreement() -> dict:
    grid = TorusGrid(1, 16.0, 256)
    V = well(grid, 1.0, 2.0)
    u0 = Field(grid, _smooth_bump(grid.periodic_distance(1.0), 3.0))
    out = {}
    ok = True
    for mu in (0.5, 1.0):
        runs = {
            "picard": EvolutionConfig("picard"),
            "dense_oracle": EvolutionConfig("dense_oracle"),
            "splitting_dt": EvolutionConfig("splitting", dt=1e-3),
            "splitting_dt/2": EvolutionConfig("splitting", dt=5e-4),
        }
        finals = {k: evolve(u0, V, mu, 1.0, cfg).final.values for k, cfg in runs.items()}
        names = list(finals)
        worst = max(
            float(np.max(np.abs(finals[a] - finals[b]))) for i, a in enumerate(names) for b in names[i + 1 :]
        )
        out[mu] = worst
        ok &= worst <= 1e-5
    out["ok"] = bool(ok)
    return out


def check_smoothing() -> dict:
    grid = TorusGrid(1, 8.0, 4096)
    spike = np.zeros(grid.shape)
    spike[grid.n // 2] = 1.0 / grid.spacing
    spike = Field(grid, spike)
    ts = np.geomspace(1e-2, 1e-1, 11)
    out = {}
    ok = True
    for mu in (0.5, 1.0):
        norms = [lp_norm(free_semigroup_apply(spike, mu, t), np.inf) / lp_norm(spike, 1) for t in ts]
        slope = float(np.polyfit(np.log(ts), np.log(norms), 1)[0])
        expected = -grid.dim / (2 * mu)
        out[mu] = {"slope": slope, "expected": expected}
        ok &= abs(slope - expected) <= 0.05 * abs(expected)
    out["ok"] = bool(ok)
    return out


def check_constant_potential() -> dict:
    grid = TorusGrid(1, 16.0, 256)
    V = constant(grid, 1.0)
    mu = 0.5
    times = np.array([0.5, 1.0, 2.0])
    out = {"norm_error": {}, "omega": {}}
    ok = True
    for engine in ENGINES:
        err = float(np.max(np.abs(norm_trace_inf(V, mu, times, EvolutionConfig(engine)) - np.exp(-times))))
        out["norm_error"][engine] = err
        ok &= err <= 1e-8
    t_grid = np.linspace(0.1, 5.0, 50)
    for p, method in ((1, "auto"), (2, "auto"), (2, "trace"), (np.inf, "auto")):
        w = decay.estimate_omega(V, mu, p, t_grid, method=method)
        out["omega"][f"p={p},{method}"] = w
        ok &= abs(w - 1.0) <= 0.02
    out["a_star"] = decay.a_star(V, mu)
    ok &= abs(out["a_star"] - 1.0) <= 1e-8
    out["ok"] = bool(ok)
    return out


def _chain_setups():
    grid = TorusGrid(1, 16.0, 256)
    return {"well": well(grid, 1.0, 2.0), "bump_array": bump_array(grid, 1.0, 2.0, 0.8)}


def check_chain() -> dict:
    out = {}
    ok = True
    dense = EvolutionConfig("dense_oracle")
    for name, V in _chain_setups().items():
        t_grid = decay.default_t_grid(V, 61)
        for mu in (0.5, 1.0):
            w2 = decay.estimate_omega(V, mu, 2, t_grid)
            winf = decay.estimate_omega(V, mu, np.inf, t_grid, dense)
            verdict = decay.omega_chain(w2, winf, V.grid.dim, mu)
            out[f"{name},mu={mu}"] = verdict
            ok &= verdict["ok"]
    out["ok"] = bool(ok)
    return out


def _astar_setups():
    g1 = TorusGrid(1, 16.0, 256)
    g2 = TorusGrid(2, 16.0, 64)
    g3 = TorusGrid(1, 32.0, 1024)
    return [
        ("well mu=0.25", well(g1, 1.0, 2.0), 0.25),
        ("well mu=1", well(g1, 1.0, 2.0), 1.0),
        ("bump_array mu=0.75", bump_array(g1, 1.0, 2.0, 0.8), 0.75),
        ("2D well mu=0.5", well(g2, 1.0, 3.0), 0.5),
        ("n=1024 well mu=0.5", well(g3, 2.0, 1.5), 0.5),
    ]


def check_omega_astar() -> dict:
    out = {}
    ok = True
    cfg = EvolutionConfig("splitting", dt=1e-2)
    for name, V, mu in _astar_setups():
        omega, a, gap = decay.omega_equals_astar(V, mu, "trace", decay.default_t_grid(V, 61), cfg)
        out[name] = {"omega_2": omega, "a_star": a, "rel_gap": gap}
        ok &= gap <= 0.02
    out["ok"] = bool(ok)
    return out


def check_certificate() -> dict:
    grid = TorusGrid(1, 16.0, 256)
    VM = truncate(bump_array(grid, 1.0, 2.0, 0.8), 0.5)
    r = 1.0
    c, _ = ball_criterion(VM, r)
    t = 0.5 / VM.sup
    out = {"c": c, "r": r, "t": t}
    ok = c > 0
    for mu in (0.5, 1.0):
        cert = decay.decay_certificate(VM, mu, t, r, c)
        out[mu] = {"bound": cert.bound_value, "simulated": cert.simulated_value, "G": cert.G_value}
        ok &= cert.ok
    out["ok"] = bool(ok)
    return out


def check_counterexample() -> dict:
    grid = TorusGrid(1, 24.0, 4096)
    V = make_counterexample(grid, p0=1.0, n_max=8)
    cubes = cube_integrals(V)
    r_star = V.params["r_star"]
    crit_V, _ = ball_criterion(V, r_star)
    VM = truncate(V, 2.0)
    centers = V.params["centers"]
    near = local_ball_integral(VM, centers[0], r_star)
    far = local_ball_integral(VM, centers[-1], r_star)
    defects = [d for _, d in approximability_profile(V, 1.0, [1, 2, 4, 8])]
    cube_err = max(abs(q - 1.0) for q in cubes)
    out = {
        "cube_error": cube_err,
        "criterion_V": crit_V,
        "near": near,
        "far": far,
        "ratio": near / far,
        "defects": defects,
    }
    # the discrete ball sum reaches 1 only up to summation roundoff
    out["ok"] = bool(cube_err <= 1e-10 and crit_V >= 1 - 1e-10 and near / far >= 5 and min(defects) > 0)
    return out


def check_no_decay_trend() -> dict:
    out = {}
    ok = True
    for mu in (0.5, 1.0):
        # fixed spacing h = 20/256 on every box
        a = [decay.a_star(well(TorusGrid(1, L, n), 1.0, 1.0), mu) for L, n in ((20, 256), (40, 512), (80, 1024))]
        out[mu] = a
        ok &= a[0] > a[1] > a[2] and a[2] < a[0] / 4
    out["ok"] = bool(ok)
    return out


def check_stroock_varopoulos(seeds: int = 100, seed0: int = 0) -> dict:
    grid = TorusGrid(1, 16.0, 256)
    worst = np.inf
    for seed in range(seed0, seed0 + seeds):
        rng = np.random.default_rng(seed)
        mu = (0.25, 0.5, 0.75)[seed % 3]
        if seed % 2:
            # smooth, sign-changing: the gap concentrates near the zero crossings
            signed = random_bumps(grid, rng, 1.0) - random_bumps(grid, rng, 1.0)
            f = Field(grid, signed if np.any(signed) else rng.standard_normal(grid.shape))
        else:
            f = Field(grid, rng.standard_normal(grid.shape))
        af = abs(f)
        gap = inner(f, fractional_laplacian_apply(f, mu)) - inner(af, fractional_laplacian_apply(af, mu))
        worst = min(worst, gap / lp_norm(f, 2) ** 2)
    return {"seeds": seeds, "min_normalized_gap": float(worst), "ok": bool(worst >= -1e-9)}


_SEEDED = (3, 12)

CRITERIA = {
    1: ("kernel mass and closed forms", check_kernel_closed_forms),
    2: ("subordination", check_subordination),
    3: ("contraction/positivity/comparison battery", check_battery),
    4: ("engine agreement", check_engine_agreement),
    5: ("smoothing rate", check_smoothing),
    6: ("constant potential exactness", check_constant_potential),
    7: ("exponential-type chain", check_chain),
    8: ("omega_2 = a_*", check_omega_astar),
    9: ("decay certificate", check_certificate),
    10: ("counterexample reproduction", check_counterexample),
    11: ("no-decay trend", check_no_decay_trend),
    12: ("discrete Stroock-Varopoulos", check_stroock_varopoulos),
}


def run_criterion(number: int, seed: int = 0) -> CheckResult:
    name, fn = CRITERIA[number]
    kwargs = {"seed0": seed} if number in _SEEDED else {}
    t0 = time.perf_counter()
    details = fn(**kwargs)
    return CheckResult(number, name, bool(details.get("ok")), details, time.perf_counter() - t0)


def run_suite(numbers=None, seed: int = 0) -> list:
    return [run_criterion(k, seed) for k in (numbers or sorted(CRITERIA))]
