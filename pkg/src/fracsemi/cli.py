"""Batch front end: ``fracsemi <command> --config <path> [--output <dir>]``.

Every run writes ``report.json``, one CSV per curve and ``manifest.json``
into the output directory.  Exit status: 0 success, 2 when the computation
ran but a checked property failed, 1 on configuration or runtime errors.
"""
from __future__ import annotations

import argparse
import json
import platform
import sys
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__, decay, io, suite
from .engine import DENSE_CAP, EvolutionConfig, evolve_many, truncation_convergence
from .errors import ConfigurationError, FracSemiError
from .grid import Field, TorusGrid, as_mu, boundary_mass, lp_norm
from .kernels import build_profile, certify_bounds
from .potentials import (
    Potential,
    _smooth_bump,
    approximability_profile,
    ball_criterion,
    cube_integrals,
    potential_from_config,
    truncate,
    uniform_norm,
)
from .subordinator import build_density

COMMANDS = ("kernel", "evolve", "decay", "audit", "verify-suite")
INITIAL_KINDS = ("constant", "bump", "spike", "random")
EXIT_OK, EXIT_ERROR, EXIT_PROPERTY = 0, 1, 2


@dataclass
class ExperimentConfig:
    command: str
    grid: dict = field(default_factory=lambda: {"N": 1, "L": 16.0, "n": 256})
    mu: float = 0.5
    potential: dict = field(default_factory=lambda: {"family": "constant", "c": 1.0})
    engine: dict = field(default_factory=dict)
    t_grid: object = None
    t_final: float | None = None
    output_dir: str = "fracsemi_out"
    seed: int = 0
    initial: dict = field(default_factory=lambda: {"kind": "bump", "width": 2.0})
    M_ladder: list = field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0])
    radii: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    certificate: dict | None = None
    kernel: dict = field(default_factory=lambda: {"resolution_tol": 1e-14, "tail_tol": 1e-8})
    criteria: list | None = None

    @classmethod
    def from_dict(cls, raw: dict, command: str | None = None) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigurationError("config: expected a JSON object at the top level")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigurationError(f"config: unknown field(s) {unknown}; expected a subset of {sorted(known)}")
        data = dict(raw)
        if command is not None:
            data["command"] = command
        if "command" not in data:
            raise ConfigurationError(f"command: missing; expected one of {COMMANDS}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    # -- validation: build every downstream object once so errors surface here

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigurationError(f"command: expected one of {COMMANDS}, got {self.command!r}")
        if self.command == "verify-suite":
            self._validate_criteria()
            self.seed = _as_int("seed", self.seed)
            return
        self.make_grid()
        try:
            self.mu = as_mu(self.mu)
        except (FracSemiError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"mu: {exc}") from None
        self.make_potential()
        ecfg = self.make_engine()
        if ecfg.engine == "dense_oracle" and self.make_grid().size > DENSE_CAP:
            raise ConfigurationError(f"engine.engine: dense_oracle is capped at {DENSE_CAP} grid points")
        times = self.times(required=self.command == "evolve")
        if times is not None and ecfg.engine == "picard" and ecfg.window is not None:
            vmax = self.make_potential().sup
            if ecfg.window * vmax > 0.5:
                raise ConfigurationError(f"engine.window: need window * ||V||_inf <= 1/2, ||V||_inf = {vmax:.4g}")
        self.seed = _as_int("seed", self.seed)
        if self.initial.get("kind", "bump") not in INITIAL_KINDS:
            raise ConfigurationError(f"initial.kind: expected one of {INITIAL_KINDS}, got {self.initial.get('kind')!r}")
        ladder = [float(m) for m in self.M_ladder]
        if not ladder or any(m <= 0 for m in ladder) or any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigurationError("M_ladder: expected a nonempty strictly increasing list of positive levels")
        L = float(self.grid["L"])
        if any(not (0 < float(r) < L / 2) for r in self.radii):
            raise ConfigurationError(f"radii: every ball radius must lie in (0, L/2) = (0, {L / 2})")
        if self.certificate is not None and not isinstance(self.certificate, dict):
            raise ConfigurationError("certificate: expected an object with optional keys M, r, t")

    def _validate_criteria(self) -> None:
        if self.criteria is None:
            return
        bad = [k for k in self.criteria if k not in suite.CRITERIA]
        if bad:
            raise ConfigurationError(f"criteria: unknown criterion number(s) {bad}; expected integers 1-{len(suite.CRITERIA)}")

    def make_grid(self) -> TorusGrid:
        g = self.grid
        try:
            return TorusGrid(int(g.get("N", 1)), float(g["L"]), int(g["n"]))
        except KeyError as exc:
            raise ConfigurationError(f"grid.{exc.args[0]}: missing; expected grid = {{N, L, n}}") from None
        except FracSemiError as exc:
            raise ConfigurationError(f"grid: {exc}") from None

    def make_potential(self) -> Potential:
        try:
            return potential_from_config(self.make_grid(), self.potential)
        except FracSemiError as exc:
            raise ConfigurationError(f"potential: {exc}") from None

    def make_engine(self) -> EvolutionConfig:
        try:
            return EvolutionConfig(**self.engine)
        except TypeError as exc:
            raise ConfigurationError(f"engine: {exc}") from None
        except FracSemiError as exc:
            raise ConfigurationError(f"engine.{exc}") from None

    def times(self, required: bool = False):
        """Sample times from ``t_grid`` (list or {start, stop, count}) or ``t_final``."""
        tg = self.t_grid
        if tg is None and self.t_final is not None:
            tg = [self.t_final]
        if tg is None:
            if required:
                raise ConfigurationError("t_grid: evolve needs t_grid or t_final")
            return None
        if isinstance(tg, dict):
            try:
                tg = np.linspace(float(tg["start"]), float(tg["stop"]), int(tg["count"]))
            except KeyError as exc:
                raise ConfigurationError(f"t_grid.{exc.args[0]}: missing; expected {{start, stop, count}}") from None
        arr = np.asarray(tg, dtype=float).ravel()
        if arr.size == 0 or np.any(arr <= 0) or np.any(np.diff(arr) <= 0) or not np.all(np.isfinite(arr)):
            raise ConfigurationError("t_grid: expected positive, strictly increasing, finite times")
        return arr

    def initial_field(self, grid: TorusGrid) -> Field:
        opts = dict(self.initial)
        kind = opts.get("kind", "bump")
        if kind == "constant":
            return Field.constant(grid, float(opts.get("value", 1.0)))
        if kind == "bump":
            return Field(grid, _smooth_bump(grid.periodic_distance(opts.get("center", 0.0)), float(opts.get("width", 2.0))))
        if kind == "spike":
            vals = np.zeros(grid.shape)
            vals[(grid.n // 2,) * grid.dim] = 1.0 / grid.cell_volume
            return Field(grid, vals)
        rng = np.random.default_rng(self.seed)
        return Field(grid, suite.random_bumps(grid, rng, float(opts.get("amplitude", 1.0))))


def _as_int(name, value) -> int:
    try:
        out = int(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name}: expected an integer, got {value!r}") from None
    if out != value:
        raise ConfigurationError(f"{name}: expected an integer, got {value!r}")
    return out


# ---------------------------------------------------------------- commands


def _norm_table(times, snaps) -> dict:
    return {
        "t": np.asarray(times, dtype=float),
        "l1": [lp_norm(s, 1) for s in snaps],
        "l2": [lp_norm(s, 2) for s in snaps],
        "linf": [lp_norm(s, np.inf) for s in snaps],
    }


def run_kernel(cfg: ExperimentConfig, out: Path) -> tuple:
    grid = cfg.make_grid()
    prof = build_profile(cfg.mu, grid, cfg.kernel.get("resolution_tol"), cfg.kernel.get("tail_tol"))
    files = [io.emit_plot_data(prof.table(), "kernel_profile", out / "profile.csv")]
    report = {
        "kind": "kernel",
        "mu": cfg.mu,
        "mass": prof.mass,
        "resolution_residual": prof.resolution_residual,
        "tail_mass": prof.tail_mass,
    }
    status = EXIT_OK
    if cfg.mu < 1.0:
        try:
            c1, c2 = certify_bounds(prof)
            report.update(lower_c=c1, upper_c=c2)
        except ConfigurationError as exc:
            report["bounds_error"] = str(exc)
            status = EXIT_PROPERTY
        dens = build_density(cfg.mu)
        report["density_mass_defect"] = dens.mass_defect
        files.append(io.write_csv(out / "density.csv", dens.table()))
    report["mass_ok"] = bool(abs(prof.mass - 1.0) <= 1e-6)
    if not report["mass_ok"]:
        status = EXIT_PROPERTY
    return report, files, status


def run_evolve(cfg: ExperimentConfig, out: Path) -> tuple:
    grid = cfg.make_grid()
    V = cfg.make_potential()
    u0 = cfg.initial_field(grid)
    times = cfg.times(required=True)
    snaps, trace, diag = evolve_many(u0, V, cfg.mu, times, cfg.make_engine())
    arr = np.asarray(trace, dtype=float)
    files = [
        io.emit_plot_data({"t": arr[:, 0], "l1": arr[:, 1], "l2": arr[:, 2], "linf": arr[:, 3]}, "norm_trace", out / "norm_trace.csv"),
        io.emit_plot_data(_norm_table(times, snaps), "norm_trace", out / "snapshots.csv"),
    ]
    final = snaps[-1]
    growth = {p: lp_norm(final, p) - lp_norm(u0, p) for p in (1, 2, np.inf)}
    contraction_ok = all(g <= 1e-8 for g in growth.values())
    positivity_ok = True
    if np.all(u0.values >= 0):
        positivity_ok = bool(final.values.min() >= -1e-10 * float(u0.values.max()))
    report = {
        "kind": "evolution",
        "mu": cfg.mu,
        "t_final": float(times[-1]),
        "final_norms": {"l1": lp_norm(final, 1), "l2": lp_norm(final, 2), "linf": lp_norm(final, np.inf)},
        "boundary_mass": boundary_mass(final),
        "contraction_ok": bool(contraction_ok),
        "positivity_ok": positivity_ok,
        "engine_diagnostics": {k: v for k, v in diag.items() if k != "iterations"},
    }
    status = EXIT_OK if contraction_ok and positivity_ok else EXIT_PROPERTY
    return report, files, status


def run_decay(cfg: ExperimentConfig, out: Path) -> tuple:
    grid = cfg.make_grid()
    V = cfg.make_potential()
    ecfg = cfg.make_engine()
    times = cfg.times()
    if times is None:
        times = decay.default_t_grid(V, 61)
    a = decay.a_star(V, cfg.mu)
    omega_inf = decay.estimate_omega(V, cfg.mu, np.inf, times, ecfg)
    omega_2 = decay.estimate_omega(V, cfg.mu, 2, times, ecfg, seed=cfg.seed)
    omega_1 = omega_inf  # duality: the discrete operator is symmetric
    chain = decay.omega_chain(omega_2, omega_inf, grid.dim, cfg.mu)
    snaps, _, _ = evolve_many(Field.constant(grid, 1.0), V, cfg.mu, times, ecfg)
    trace = _norm_table(times, snaps)
    alternative = decay.contraction_or_decay(times, trace["linf"])
    table = [(float(r), ball_criterion(V, float(r))[0]) for r in cfg.radii]
    cert = None
    status = EXIT_OK if chain["ok"] else EXIT_PROPERTY
    hints = []
    if cfg.certificate is not None:
        cert, hint = _certificate(V, cfg)
        if hint:
            hints.append(hint)
        elif not cert.ok:
            status = EXIT_PROPERTY
    report = decay.assemble_report(
        omega_1=omega_1,
        omega_2=omega_2,
        omega_inf=omega_inf,
        a_star_value=a,
        chain=chain,
        certificate=cert,
        ball_table=table,
        alternative=alternative,
        config={"N": grid.dim, "L": grid.length, "n": grid.n, "mu": cfg.mu, "engine": asdict(ecfg)},
    )
    report.hints.extend(hints)
    files = [
        io.emit_plot_data(trace, "norm_trace", out / "norm_trace.csv"),
        io.emit_plot_data({"r": [r for r, _ in table], "inf_value": [v for _, v in table]}, "criterion", out / "criterion.csv"),
        io.emit_plot_data({"p": [1.0, 2.0, np.inf], "omega": [omega_1, omega_2, omega_inf]}, "omega", out / "omega.csv"),
    ]
    return report.to_dict(), files, status


def _certificate(V: Potential, cfg: ExperimentConfig):
    opts = cfg.certificate
    VM = truncate(V, float(opts.get("M") or V.sup))
    r = float(opts.get("r", 1.0))
    c, _ = ball_criterion(VM, r)
    if not c > 0:
        return None, f"certificate skipped: ball criterion vanishes at r = {r}"
    t = float(opts.get("t") or 0.5 / VM.sup)
    return decay.decay_certificate(VM, cfg.mu, t, r, c), None


def run_audit(cfg: ExperimentConfig, out: Path) -> tuple:
    grid = cfg.make_grid()
    V = cfg.make_potential()
    ecfg = cfg.make_engine()
    ladder = [float(m) for m in cfg.M_ladder]
    t = float(cfg.times()[-1]) if cfg.times() is not None else 1.0
    profile = approximability_profile(V, V.p0, ladder)
    u0 = cfg.initial_field(grid)
    deltas = truncation_convergence(u0, V, cfg.mu, t, ladder, ecfg)
    files = [
        io.emit_plot_data(
            {
                "M": ladder,
                "defect": [d for _, d in profile],
                "delta_p1": [d.delta_1 for d in deltas],
                "delta_p2": [d.delta_2 for d in deltas],
                "delta_pinf": [d.delta_inf for d in deltas],
            },
            "m_ladder",
            out / "m_ladder.csv",
        )
    ]
    radii = [float(r) for r in cfg.radii]
    criteria = {"V": [ball_criterion(V, r)[0] for r in radii]}
    files.append(io.emit_plot_data({"r": radii, "inf_value": criteria["V"]}, "criterion", out / "criterion.csv"))
    for M in ladder:
        vals = [ball_criterion(truncate(V, M), r)[0] for r in radii]
        criteria[f"V_M={M:g}"] = vals
        files.append(io.emit_plot_data({"r": radii, "inf_value": vals}, "criterion", out / f"criterion_M{M:g}.csv"))
    monotone = all(
        getattr(b, k) <= getattr(a, k) + 1e-10 for a, b in zip(deltas, deltas[1:]) for k in ("delta_1", "delta_2", "delta_inf")
    )
    report = {
        "kind": "audit",
        "family": V.family,
        "p0": V.p0,
        "uniform_norm": uniform_norm(V),
        "approximability": [{"M": M, "defect": d} for M, d in profile],
        "truncation_deltas": [d._asdict() for d in deltas],
        "deltas_monotone": bool(monotone),
        "ball_criterion": {"r": radii, **criteria},
    }
    if V.family == "counterexample":
        report["cube_integrals"] = cube_integrals(V)
        report["r_star"] = V.params["r_star"]
    return report, files, EXIT_OK if monotone else EXIT_PROPERTY


def run_verify_suite(cfg: ExperimentConfig, out: Path) -> tuple:
    results = []
    for number in cfg.criteria or sorted(suite.CRITERIA):
        res = suite.run_criterion(number, cfg.seed)
        print(res.line(), flush=True)
        results.append(res)
    report = {
        "kind": "verify-suite",
        "seed": cfg.seed,
        "criteria": [{"number": r.number, "name": r.name, "passed": r.passed, "details": r.details} for r in results],
        "all_passed": all(r.passed for r in results),
    }
    files = [
        io.write_csv(
            out / "suite.csv",
            {"criterion": [r.number for r in results], "passed": [float(r.passed) for r in results]},
        )
    ]
    return report, files, EXIT_OK if report["all_passed"] else EXIT_PROPERTY


RUNNERS = {
    "kernel": run_kernel,
    "evolve": run_evolve,
    "decay": run_decay,
    "audit": run_audit,
    "verify-suite": run_verify_suite,
}


def _tolerances(cfg: ExperimentConfig) -> dict:
    from .subordinator import CLAMP_TOL, MASS_TOL

    return {
        "decay_threshold": decay.DECAY_THRESHOLD,
        "flat_tol": decay.FLAT_TOL,
        "fit_min_r2": decay.MIN_R2,
        "chain_relative_slack": 0.05,
        "density_mass_tol": MASS_TOL,
        "density_clamp_tol": CLAMP_TOL,
        "dense_cap": DENSE_CAP,
        "kernel": cfg.kernel,
        "contraction_tol": 1e-8,
        "positivity_tol": 1e-10,
    }


def run(config_path, command: str | None = None, output: str | None = None) -> int:
    """Execute one configured run and write its artifacts; returns the exit status."""
    if config_path is None:
        raw = {}
    else:
        try:
            raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config: not valid JSON ({exc})") from None
    cfg = ExperimentConfig.from_dict(raw, command)
    out = Path(output or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    report, files, status = RUNNERS[cfg.command](cfg, out)
    report = {**report, "schema": decay.SCHEMA_VERSION, "command": cfg.command, "timestamp": stamp}
    files.append(io.write_json(out / "report.json", report))
    manifest = {
        "schema": decay.SCHEMA_VERSION,
        "command": cfg.command,
        "config_path": str(config_path) if config_path else None,
        "config": asdict(cfg),
        "code_version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "tolerances": _tolerances(cfg),
        "files": sorted(p.name for p in files) + ["manifest.json"],
        "exit_status": status,
        "timestamp": stamp,
    }
    io.write_json(out / "manifest.json", manifest)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracsemi", description="Fractional Schroedinger semigroups on the torus.")
    parser.add_argument("command", nargs="?", choices=COMMANDS, help="run type (overrides the config's 'command')")
    parser.add_argument("--config", type=Path, default=None, help="JSON experiment config (optional for verify-suite)")
    parser.add_argument("--output", type=Path, default=None, help="output directory (overrides 'output_dir')")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.config is None and args.command != "verify-suite":
        print("error: --config is required unless the command is verify-suite", file=sys.stderr)
        return EXIT_ERROR
    try:
        status = run(args.config, args.command, args.output)
    except (FracSemiError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if status == EXIT_PROPERTY:
        print("property check failed; see report.json", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
