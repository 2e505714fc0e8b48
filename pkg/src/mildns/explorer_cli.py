"""Configuration, ensemble orchestration, invariant verification, and the CLI.

The ensemble driver estimates the norm-growth envelope F_hat(A): for each
amplitude A it draws seeded random divergence-free data of H^1 size A, runs
them to the horizon, and records the largest H^1 norm seen (the supremum
includes t = 0, so F_hat(A) >= A).  Runs that blow past the norm ceiling are
censored: excluded from the maximum but counted and reported.
"""

import argparse
import csv
import hashlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .spectral_field import (
    FLOW_NAMES,
    GridSpec,
    SpectralField,
    _wavenumbers,
    divergence_linf,
    hermitian_residual,
    hs_norm,
    leray_project,
    named_flow,
    nonlinear_term,
    random_divfree,
    sample_on_grid,
    save_nsf1,
    single_mode_field,
)
from .semigroup_flow import (
    BlowupError,
    StepConfig,
    heat_propagate,
    norms_to_csv,
    pair_distance,
    simulate,
    smoothing_ratio,
)
from .picard_wellposedness import picard_solve, report_to_json
from .apriori_diagnostics import (
    compactness_experiment,
    energy_identity_residual,
    poincare_violation,
    unit_time_contraction,
)

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "EnsembleSummary",
    "estimate_F",
    "monotone_envelope",
    "lipschitz_probe",
    "run_verify",
    "write_manifest",
    "cli_main",
    "main",
]


class ConfigError(ValueError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"config key '{key}': {message}")
        self.key = key


def _parse_a_list(text: str):
    return tuple(float(v) for v in text.split(","))


@dataclass(frozen=True)
class ExperimentConfig:
    """Ensemble and solver settings, loadable from flat key=value files.

    ``method`` picks how each sample is advanced: plain time stepping
    ("simulate") or a fixed-point solve on the short local horizon chained
    into time stepping for the remainder ("hybrid").
    """

    grid_n: int = 16
    grid_k: int | None = None
    dt: float = 0.01
    horizon: float = 1.0
    c: float = 0.01
    picard_tol: float = 1e-10
    a_list: tuple = (0.1, 0.2, 0.3)
    samples_per_a: int = 8
    base_seed: int = 12345
    slope: float = 2.0
    ceiling: float = 1e6
    mode: str = "short"
    method: str = "simulate"
    store_every: int = 10**9
    out_dir: str = "."

    def __post_init__(self):
        for key in ("dt", "horizon", "c", "picard_tol", "slope", "ceiling"):
            if getattr(self, key) <= 0:
                raise ConfigError(key, "must be positive")
        for key in ("grid_n", "samples_per_a", "store_every"):
            if getattr(self, key) < 1:
                raise ConfigError(key, "must be a positive integer")
        if self.mode not in ("short", "long"):
            raise ConfigError("mode", "must be 'short' or 'long'")
        if self.method not in ("simulate", "hybrid"):
            raise ConfigError("method", "must be 'simulate' or 'hybrid'")
        if self.mode == "short" and self.horizon > 1.0:
            raise ConfigError("horizon", "short-term mode requires horizon <= 1")
        if len(self.a_list) == 0:
            raise ConfigError("a_list", "must not be empty")
        if any(a <= 0 for a in self.a_list):
            raise ConfigError("a_list", "amplitudes must be positive")
        if any(b <= a for a, b in zip(self.a_list, self.a_list[1:])):
            raise ConfigError("a_list", "amplitudes must be strictly increasing")
        try:
            self.grid()
        except ValueError as exc:
            raise ConfigError("grid_n", str(exc)) from exc

    def grid(self) -> GridSpec:
        return GridSpec(self.grid_n, self.grid_k)

    def config_hash(self) -> str:
        """Stable hash over the scientific settings, sorted by key.

        ``out_dir`` is excluded so relocation does not change the hash.
        """
        items = []
        for f in sorted(fields(self), key=lambda f: f.name):
            if f.name == "out_dir":
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                canon = ",".join(repr(float(x)) for x in v)
            elif isinstance(v, float):
                canon = repr(v)
            else:
                canon = repr(v)
            items.append(f"{f.name}={canon}")
        return hashlib.sha256("\n".join(items).encode()).hexdigest()

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        """Parse a flat key=value file with # comments."""
        converters = {
            "grid_n": int, "grid_k": int, "dt": float, "horizon": float,
            "c": float, "picard_tol": float, "a_list": _parse_a_list,
            "samples_per_a": int, "base_seed": int, "slope": float,
            "ceiling": float, "mode": str, "method": str, "store_every": int,
            "out_dir": str,
        }
        values = {}
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(line, f"line {lineno} is not key=value")
                key, _, text = line.partition("=")
                key, text = key.strip(), text.strip()
                if key not in converters:
                    raise ConfigError(key, "unknown key")
                try:
                    values[key] = converters[key](text)
                except ValueError as exc:
                    raise ConfigError(key, f"cannot parse {text!r}: {exc}") from exc
        return cls(**values)


@dataclass
class SampleRecord:
    a_index: int
    amplitude: float
    sample: int
    seed: int
    sup_h1: float
    argmax_time: float
    censored: bool
    unit_ratio_max: float | None = None


@dataclass
class EnsembleSummary:
    """Per-amplitude envelope of observed H^1 growth with provenance."""

    a_values: list[float]
    f_hat: list[float]
    envelope: list[float]
    censored: list[int]
    argmax_seed: list
    argmax_time: list
    samples: list = field(default_factory=list)
    config_hash: str = ""

    def to_json(self, path=None) -> str:
        def marker(x):
            return None if x is None or (isinstance(x, float) and math.isinf(x)) else x

        obj = {
            "A": self.a_values,
            "F_hat": [marker(v) for v in self.f_hat],
            "envelope": [marker(v) for v in self.envelope],
            "censored": self.censored,
            "argmax_seed": self.argmax_seed,
            "argmax_time": self.argmax_time,
            "config_hash": self.config_hash,
        }
        text = json.dumps(obj, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def monotone_envelope(values) -> np.ndarray:
    """Running maximum over an increasing amplitude grid; idempotent."""
    return np.maximum.accumulate(np.asarray(values, dtype=np.float64))


def sample_seed(base_seed: int, a_index: int, sample: int) -> int:
    """Seed layout base + j*10^6 + i keeps ensembles extensible per amplitude."""
    return base_seed + a_index * 10**6 + sample


def _run_sample(cfg: ExperimentConfig, grid: GridSpec, j: int, i: int, generator):
    a = cfg.a_list[j]
    seed = sample_seed(cfg.base_seed, j, i)
    u0 = generator(a, seed, grid)
    step_cfg = StepConfig(dt=cfg.dt, store_every=cfg.store_every, ceiling=cfg.ceiling)
    sup, t_at = -math.inf, 0.0
    t_offset = 0.0
    if cfg.method == "hybrid":
        fixed, rep = picard_solve(u0, c=cfg.c, tol=cfg.picard_tol, auto_shrink=True)
        if not rep.converged:
            raise RuntimeError(
                f"hybrid sample (A={a}, seed={seed}) has no fixed point even "
                f"after shrinking c to {rep.c_used}"
            )
        for t, f in zip(fixed.tgrid.nodes, fixed.fields):
            h = hs_norm(f, 1.0)
            if h > sup:
                sup, t_at = h, float(t)
        u0 = fixed.fields[-1]
        t_offset = rep.T_used
    remaining = cfg.horizon - t_offset
    s = None
    if remaining > 1e-12:
        try:
            traj = simulate(u0, remaining, step_cfg)
        except BlowupError:
            return SampleRecord(j, a, i, seed, math.nan, math.nan, True)
        s = traj.norm_series
        idx = int(np.argmax(s.h1))
        if s.h1[idx] > sup:
            sup, t_at = float(s.h1[idx]), t_offset + float(s.times[idx])
    unit_max = None
    if cfg.mode == "long" and s is not None and s.times[-1] >= 2.0:
        _, ratios = unit_time_contraction(s)
        unit_max = float(np.max(ratios))
    return SampleRecord(j, a, i, seed, sup, t_at, False, unit_max)


def estimate_F(cfg: ExperimentConfig, threads: int = 1, generator=None) -> EnsembleSummary:
    """Empirical norm-growth envelope over a seeded random ensemble.

    Deterministic in the configuration: per-sample seeds are fixed up front
    and results are merged by an associative max keyed on (amplitude,
    sample), so thread count does not affect the output.
    """
    grid = cfg.grid()
    _wavenumbers(grid)  # warm shared read-only caches before going parallel
    if generator is None:
        def generator(a, seed, g):
            return random_divfree(a, seed, cfg.slope, g)
    tasks = [(j, i) for j in range(len(cfg.a_list)) for i in range(cfg.samples_per_a)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {t: pool.submit(_run_sample, cfg, grid, t[0], t[1], generator)
                       for t in tasks}
            records = {t: f.result() for t, f in futures.items()}
    else:
        records = {t: _run_sample(cfg, grid, t[0], t[1], generator) for t in tasks}

    a_values, f_hat, censored, argmax_seed, argmax_time, rows = [], [], [], [], [], []
    for j, a in enumerate(cfg.a_list):
        best, best_seed, best_time, ncens = -math.inf, None, None, 0
        for i in range(cfg.samples_per_a):
            rec = records[(j, i)]
            rows.append(rec)
            if rec.censored:
                ncens += 1
                continue
            if rec.sup_h1 > best:
                best, best_seed, best_time = rec.sup_h1, rec.seed, rec.argmax_time
        a_values.append(a)
        f_hat.append(best if best > -math.inf else math.inf)
        censored.append(ncens)
        argmax_seed.append(best_seed)
        argmax_time.append(best_time)
    env = monotone_envelope(f_hat)
    return EnsembleSummary(
        a_values=a_values,
        f_hat=f_hat,
        envelope=[float(v) for v in env],
        censored=censored,
        argmax_seed=argmax_seed,
        argmax_time=argmax_time,
        samples=rows,
        config_hash=cfg.config_hash(),
    )


def lipschitz_probe(u0: SpectralField, deltas, cfg: ExperimentConfig,
                    direction: SpectralField | None = None) -> list[float]:
    """Measured data-to-solution Lipschitz quotients sup_t |u' - u|_H1 / delta.

    Perturbs u0 along a fixed divergence-free direction at each size delta
    and runs both solutions in lockstep over the horizon.  Stable quotients
    under halving delta indicate the linear response regime.
    """
    if direction is None:
        direction = single_mode_field(u0.grid, (1, 0, 0), (0.0, 0.0, 1.0), 1.0)
    step_cfg = StepConfig(dt=cfg.dt, ceiling=cfg.ceiling)
    ratios = []
    for d in deltas:
        if d <= 0:
            raise ValueError("perturbation sizes must be positive")
        sup, _ = pair_distance(u0 + float(d) * direction, u0, cfg.horizon, step_cfg)
        ratios.append(sup / d)
    return ratios


def write_manifest(out_dir, cfg_hash: str, seeds, file_names) -> Path:
    """Record provenance for one run: config hash, code version, seeds, files.

    Paths are stored relative to the manifest so runs relocate cleanly.
    """
    out = Path(out_dir)
    obj = {
        "config_hash": cfg_hash,
        "code_version": __version__,
        "seeds": list(seeds),
        "files": sorted(str(f) for f in file_names),
    }
    path = out / "manifest.json"
    with open(path, "w") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# invariant verification suite


def _report(checks, name, ok, detail):
    checks.append((name, bool(ok), detail))


def run_verify(n: int = 16, seed: int = 7) -> list[tuple[str, bool, str]]:
    """Run the invariant suite; returns (name, passed, detail) per check."""
    checks: list[tuple[str, bool, str]] = []
    grid = GridSpec(n)
    u = random_divfree(1.0, seed, 2.0, grid)

    p1 = leray_project(u)
    p2 = leray_project(p1)
    d = float(np.max(np.abs(p2.coef - p1.coef)))
    _report(checks, "leray_idempotent", d <= 1e-15, f"max coef change {d:.3e} <= 1e-15")

    dv = divergence_linf(p1)
    _report(checks, "divergence_after_projection", dv <= 1e-12,
            f"div_linf {dv:.3e} <= 1e-12")

    vals = sample_on_grid(u)
    rms = float(np.sqrt(np.mean(np.sum(vals**2, axis=0))))
    l2 = hs_norm(u, 0.0)
    rel = abs(rms - l2) / l2
    _report(checks, "parseval_rms", rel <= 1e-10, f"rel err {rel:.3e} <= 1e-10")

    nl = nonlinear_term(u)
    herm = hermitian_residual(nl)
    _report(checks, "hermitian_symmetry_nonlinear", herm <= 1e-12,
            f"residual {herm:.3e} <= 1e-12")

    inner = float(np.real(np.sum(nl.coef * np.conj(u.coef))))
    bound = 1e-10 * hs_norm(u, 1.0) ** 3
    _report(checks, "nonlinear_energy_orthogonality", abs(inner) <= bound,
            f"|<D(uxu),u>| {abs(inner):.3e} <= {bound:.3e}")

    worst = 0.0
    for name in ("shear", "taylor_green"):
        f = named_flow(name, 1.0, grid)
        worst = max(worst, float(np.max(np.abs(nonlinear_term(f).coef))))
    _report(checks, "nonlinearity_annihilated_on_reference_flows", worst <= 1e-12,
            f"max coef {worst:.3e} <= 1e-12")

    two_hops = heat_propagate(heat_propagate(u, 0.3), 0.7)
    one_hop = heat_propagate(u, 1.0)
    d = float(np.max(np.abs(two_hops.coef - one_hop.coef)))
    _report(checks, "semigroup_law", d <= 1e-14, f"max coef diff {d:.3e} <= 1e-14")

    ok = True
    detail = []
    for t in (0.1, 1.0, 3.0):
        lhs = hs_norm(heat_propagate(u, t), 0.0)
        rhs = math.exp(-t) * hs_norm(u, 0.0)
        ok &= lhs <= rhs * (1 + 1e-12)
    pair = single_mode_field(grid, (1, 0, 0), (0.0, 1.0, 0.0), 1.0)
    eq = abs(hs_norm(heat_propagate(pair, 1.0), 0.0) - math.exp(-1) * hs_norm(pair, 0.0))
    ok &= eq <= 1e-12 * hs_norm(pair, 0.0)
    _report(checks, "heat_decay", ok, f"spectral-gap decay holds; |k|=1 defect {eq:.3e}")

    sup_bound = math.sqrt(0.5) * math.exp(-0.5)
    worst = max(smoothing_ratio(u, 1.0, 1.0, t)
                for t in np.geomspace(1e-4, 1.0, 60))
    _report(checks, "smoothing_bound", worst <= sup_bound + 1e-6,
            f"max ratio {worst:.6f} <= {sup_bound + 1e-6:.6f}")

    cfg = StepConfig(dt=1e-3)
    traj = simulate(named_flow("shear", 1.0, grid), 1.0, cfg)
    s = traj.norm_series
    exact = (1.0 / math.sqrt(2.0)) * np.exp(-s.times)
    rel = float(np.max(np.abs(s.h1 - exact) / exact))
    _report(checks, "shear_regression", rel <= 1e-10, f"max rel err {rel:.3e} <= 1e-10")

    tg = named_flow("taylor_green", 1.0, grid)
    traj_tg = simulate(tg, 1.0, cfg)
    err = hs_norm(traj_tg.fields[-1] - math.exp(-2.0) * tg, 1.0) / (math.exp(-2.0) * hs_norm(tg, 1.0))
    _report(checks, "taylor_green_regression", err <= 1e-8,
            f"rel H1 err {err:.3e} <= 1e-8")

    traj_r = simulate(u, 0.25, cfg)
    res = energy_identity_residual(traj_r).max_residual
    tol = 1e-6 * max(1.0, traj_r.norm_series.l2[0] ** 2)
    _report(checks, "energy_identity", res <= tol, f"max residual {res:.3e} <= {tol:.3e}")

    v = poincare_violation(traj_r)
    _report(checks, "poincare_series", v <= 1e-12, f"max l2-h1 {v:.3e} <= 1e-12")

    K = grid.cutoff
    mom = max(float(np.max(np.abs(t.coef[:, K, K, K]))) for t in traj_r.fields)
    _report(checks, "momentum_conservation", mom == 0.0, f"|k=0 coef| = {mom:.3e}")

    inc = float(np.max(np.diff(traj_r.norm_series.l2)))
    _report(checks, "l2_monotonicity", inc <= 1e-10 * cfg.dt,
            f"max per-step increase {inc:.3e} <= {1e-10 * cfg.dt:.1e}")

    dvmax = float(np.max(traj_r.norm_series.div_linf))
    _report(checks, "divergence_along_trajectory", dvmax <= 1e-10,
            f"max div_linf {dvmax:.3e} <= 1e-10")

    small_grid = GridSpec(8)
    u_small = random_divfree(0.5, seed, 2.0, small_grid)
    fixed, rep = picard_solve(u_small, c=0.01, tol=1e-10, max_iter=40)
    worst = 0.0
    if rep.converged:
        sim = simulate(u_small, rep.T_used, StepConfig(dt=rep.T_used / 256, store_every=4))
        for target, f_pic in zip(fixed.tgrid.nodes, fixed.fields):
            for ft, f_sim in zip(sim.field_times, sim.fields):
                if abs(ft - target) <= 1e-12:
                    worst = max(worst, hs_norm(f_pic - f_sim, 1.0))
                    break
    _report(checks, "mild_solution_consistency", rep.converged and worst <= 1e-4,
            f"converged={rep.converged}, max node H1 gap {worst:.3e} <= 1e-4")
    return checks


# ---------------------------------------------------------------------------
# command-line interface


def _common_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value experiment config file")
    p.add_argument("--seed", type=int, help="seed override for random data")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--threads", type=int, default=1, help="parallel sample workers")


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    if getattr(args, "out_dir", None):
        cfg = replace(cfg, out_dir=args.out_dir)
    return cfg


def _initial_field(args, cfg: ExperimentConfig, grid: GridSpec):
    seed = args.seed if args.seed is not None else cfg.base_seed
    if args.flow == "random":
        u0 = random_divfree(args.A, seed, cfg.slope, grid)
    else:
        u0 = named_flow(args.flow, args.amplitude, grid)
    return u0, seed


def _add_field_flags(p: argparse.ArgumentParser):
    p.add_argument("--flow", choices=FLOW_NAMES + ("random",), default="random")
    p.add_argument("--amplitude", type=float, default=1.0,
                   help="amplitude for named flows")
    p.add_argument("--A", type=float, default=1.0,
                   help="target H1 norm for random data")
    p.add_argument("--N", type=int, help="grid resolution override")
    p.add_argument("--K", type=int, help="dealias cutoff override")


def _grid_from(args, cfg: ExperimentConfig) -> GridSpec:
    n = args.N if args.N is not None else cfg.grid_n
    k = args.K if args.K is not None else (cfg.grid_k if args.N is None else None)
    return GridSpec(n, k)


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    grid = _grid_from(args, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    u0, seed = _initial_field(args, cfg, grid)
    dt = args.dt if args.dt is not None else cfg.dt
    horizon = args.T if args.T is not None else cfg.horizon
    store = args.store_every if args.store_every is not None else cfg.store_every
    step_cfg = StepConfig(dt=dt, store_every=store, ceiling=cfg.ceiling)
    files = ["u_initial.nsf1", "norms.csv"]
    save_nsf1(u0, out / "u_initial.nsf1")
    status = 0
    try:
        traj = simulate(u0, horizon, step_cfg)
    except BlowupError as exc:
        print(f"blowup: {exc}", file=sys.stderr)
        traj = exc.trajectory
        status = 3
    norms_to_csv(traj.norm_series, out / "norms.csv")
    if args.store_every is not None:
        for ft, f in zip(traj.field_times[1:-1], traj.fields[1:-1]):
            name = f"snapshot_t{ft:.6f}.nsf1"
            save_nsf1(f, out / name)
            files.append(name)
    save_nsf1(traj.fields[-1], out / "u_final.nsf1")
    files.append("u_final.nsf1")
    write_manifest(out, cfg.config_hash(), [seed], files + ["manifest.json"])
    print(f"simulated to t={traj.norm_series.times[-1]:.6g}; "
          f"final H1 {traj.norm_series.h1[-1]:.6g}")
    return status


def _cmd_picard(args) -> int:
    cfg = _load_config(args)
    grid = _grid_from(args, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    u0, seed = _initial_field(args, cfg, grid)
    c = args.c if args.c is not None else cfg.c
    tol = args.tol if args.tol is not None else cfg.picard_tol
    _, report = picard_solve(u0, c=c, tol=tol, max_iter=args.max_iter,
                             auto_shrink=args.auto_shrink)
    report_to_json(report, out / "picard.json")
    write_manifest(out, cfg.config_hash(), [seed], ["picard.json", "manifest.json"])
    print(f"picard: converged={report.converged} iterates={report.iterate_count} "
          f"T={report.T_used:.6g} c={report.c_used:.6g}")
    return 0


def _cmd_verify(args) -> int:
    checks = run_verify(n=args.N if args.N is not None else 16)
    failed = 0
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed += 0 if ok else 1
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 1


def _cmd_ensemble(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = estimate_F(cfg, threads=max(1, args.threads))
    files = ["summary.json"]
    summary.to_json(out / "summary.json")
    for j, a in enumerate(summary.a_values):
        name = f"ensemble_A{a:g}.csv"
        with open(out / name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("sample", "seed", "sup_h1", "argmax_time", "censored"))
            for rec in summary.samples:
                if rec.a_index != j:
                    continue
                writer.writerow((
                    rec.sample, rec.seed,
                    f"{rec.sup_h1:.17g}", f"{rec.argmax_time:.17g}",
                    int(rec.censored),
                ))
        files.append(name)
    seeds = [rec.seed for rec in summary.samples]
    write_manifest(out, cfg.config_hash(), seeds, files + ["manifest.json"])
    shown = ", ".join(
        "inf" if math.isinf(v) else f"{v:.6g}" for v in summary.f_hat
    )
    print(f"F_hat over A={list(summary.a_values)}: [{shown}] "
          f"(censored {sum(summary.censored)})")
    return 0


def _cmd_compactness(args) -> int:
    cfg = _load_config(args)
    grid = _grid_from(args, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    u0, seed = _initial_field(args, cfg, grid)
    freqs = [int(v) for v in args.freqs.split(",")]
    try:
        report = compactness_experiment(
            u0, freqs, args.eps_window,
            args.c if args.c is not None else cfg.c,
            dt=args.dt if args.dt is not None else cfg.dt,
        )
    except BlowupError as exc:
        print(f"blowup: {exc}", file=sys.stderr)
        return 3
    report.to_json(out / "compactness.json")
    write_manifest(out, cfg.config_hash(), [seed], ["compactness.json", "manifest.json"])
    print("distances:", " ".join(f"{d:.6g}" for d in report.distances))
    return 0


def cli_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mildns",
        description="Pseudo-spectral Navier-Stokes on the periodic 3-torus: "
                    "simulation, fixed-point solves, invariant verification, "
                    "and norm-growth ensembles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one trajectory; write NSF1 + CSV")
    _common_flags(p_sim)
    _add_field_flags(p_sim)
    p_sim.add_argument("--T", type=float, help="horizon")
    p_sim.add_argument("--dt", type=float, help="time step")
    p_sim.add_argument("--store-every", type=int, dest="store_every",
                       help="also write intermediate snapshots every this many steps")
    p_sim.set_defaults(func=_cmd_simulate)

    p_pic = sub.add_parser("picard", help="fixed-point solve; write JSON report")
    _common_flags(p_pic)
    _add_field_flags(p_pic)
    p_pic.add_argument("--c", type=float, help="local horizon constant")
    p_pic.add_argument("--tol", type=float, help="stopping tolerance")
    p_pic.add_argument("--max-iter", type=int, default=40, dest="max_iter")
    p_pic.add_argument("--auto-shrink", action="store_true", dest="auto_shrink",
                       help="halve c and retry on non-convergence")
    p_pic.set_defaults(func=_cmd_picard)

    p_ver = sub.add_parser("verify", help="run the invariant suite")
    _common_flags(p_ver)
    p_ver.add_argument("--N", type=int, help="grid resolution for the suite")
    p_ver.set_defaults(func=_cmd_verify)

    p_ens = sub.add_parser("ensemble", help="estimate the growth envelope F_hat(A)")
    _common_flags(p_ens)
    p_ens.set_defaults(func=_cmd_ensemble)

    p_cmp = sub.add_parser("compactness", help="perturbation-convergence experiment")
    _common_flags(p_cmp)
    _add_field_flags(p_cmp)
    p_cmp.add_argument("--freqs", default="2,4,8", help="comma list of frequencies")
    p_cmp.add_argument("--eps-window", type=float, default=0.1, dest="eps_window")
    p_cmp.add_argument("--c", type=float, help="local horizon constant")
    p_cmp.add_argument("--dt", type=float, help="time step")
    p_cmp.set_defaults(func=_cmd_compactness)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BlowupError as exc:
        print(f"blowup: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
