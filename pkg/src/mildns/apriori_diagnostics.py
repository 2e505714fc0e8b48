"""Energy, decay, and compactness diagnostics over completed trajectories.

Everything here is read-only: diagnostics consume norm series or stored
fields and never feed back into the dynamics.
"""

import csv
import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .spectral_field import SpectralField, hs_norm, single_mode_field
from .semigroup_flow import NormSeries, StepConfig, Trajectory, pair_distance
from .picard_wellposedness import local_time

__all__ = [
    "EnergyResiduals",
    "PigeonholeResult",
    "CompactnessReport",
    "ExplosionScan",
    "energy_identity_residual",
    "energy_budget",
    "pigeonhole_time",
    "decay_envelope",
    "unit_time_contraction",
    "compactness_experiment",
    "norm_explosion_scan",
    "poincare_violation",
    "residuals_to_csv",
]


def _series_of(obj) -> NormSeries:
    if isinstance(obj, NormSeries):
        return obj
    if isinstance(obj, Trajectory):
        return obj.norm_series
    raise TypeError("expected a Trajectory or NormSeries")


@dataclass
class EnergyResiduals:
    """Per-interval defect of the energy identity d/dt |u|^2 = -2 int |grad u|^2.

    ``times`` holds the right endpoint of each interval; ``residuals`` the
    absolute defect |delta(l2^2) + 2 * trapz(enstrophy)| over that interval.
    """

    times: np.ndarray
    residuals: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0


def energy_identity_residual(traj) -> EnergyResiduals:
    """Check the discrete energy balance interval by interval."""
    s = _series_of(traj)
    dt = np.diff(s.times)
    d_l2sq = np.diff(s.l2**2)
    dissip = 0.5 * (s.enstrophy[:-1] + s.enstrophy[1:]) * dt
    res = np.abs(d_l2sq + 2.0 * dissip)
    return EnergyResiduals(s.times[1:].copy(), res)


def energy_budget(traj) -> tuple[float, float]:
    """Return (sup_t L^2 norm, sqrt(2 * int enstrophy dt)).

    For dissipative runs the supremum is the initial L^2 norm and the total
    dissipation never exceeds it.
    """
    s = _series_of(traj)
    sup_l2 = float(np.max(s.l2)) if s.l2.size else 0.0
    total = float(np.sqrt(2.0 * np.trapezoid(s.enstrophy, s.times))) if s.times.size > 1 else 0.0
    return sup_l2, total


@dataclass
class PigeonholeResult:
    """A low-dissipation time inside the pigeonhole window [0, 1/eps^2]."""

    T_prime: float
    gradient_l2_at_T_prime: float
    epsilon_used: float
    budget_bound: float
    h1_at_T_prime: float
    partial: bool = False

    def to_json(self, path=None) -> str:
        obj = {
            "T_prime": self.T_prime,
            "gradient_l2_at_T_prime": self.gradient_l2_at_T_prime,
            "epsilon_used": self.epsilon_used,
            "budget_bound": self.budget_bound,
            "h1_at_T_prime": self.h1_at_T_prime,
            "partial": self.partial,
        }
        text = json.dumps(obj, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def pigeonhole_time(series: NormSeries, eps: float) -> PigeonholeResult:
    """Earliest sampled time minimizing enstrophy over [0, 1/eps^2].

    The dissipation budget forces the minimizer below its window average:
    enstrophy(T') * window <= int enstrophy dt holds exactly on the discrete
    series.  A series shorter than the window is searched in full and the
    result flagged partial.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    window = 1.0 / eps**2
    in_window = series.times <= window * (1.0 + 1e-12)
    if not np.any(in_window):
        raise ValueError("series does not cover any of the pigeonhole window")
    partial = bool(series.times[-1] < window * (1.0 - 1e-12))
    ens = series.enstrophy[in_window]
    t_in = series.times[in_window]
    idx = int(np.argmin(ens))  # argmin returns the earliest minimizer
    budget = float(np.trapezoid(ens, t_in)) if t_in.size > 1 else 0.0
    h1_here = float(series.h1[in_window][idx])
    l2_here = float(series.l2[in_window][idx])
    if h1_here**2 > 2.0 * (l2_here**2 + ens[idx]) * (1.0 + 1e-9) + 1e-300:
        raise ValueError("stored H1 series inconsistent with enstrophy/L2")
    return PigeonholeResult(
        T_prime=float(t_in[idx]),
        gradient_l2_at_T_prime=float(np.sqrt(ens[idx])),
        epsilon_used=eps,
        budget_bound=budget,
        h1_at_T_prime=h1_here,
        partial=partial,
    )


def decay_envelope(series: NormSeries, t_start: float) -> float:
    """Least-squares slope of log H^1 on [t_start, end] (the decay rate).

    Pure heat flows reproduce minus the least active |k|^2; small-data runs
    decay at least like e^-t up to quadratic corrections.
    """
    mask = series.times >= t_start
    t = series.times[mask]
    h1 = series.h1[mask]
    if t.size < 4:
        raise ValueError("need at least 4 samples beyond t_start for a rate fit")
    if np.any(h1 <= 0):
        raise ValueError("H1 norm hits zero inside the fit window")
    slope = np.polyfit(t, np.log(h1), 1)[0]
    return float(slope)


def unit_time_contraction(series: NormSeries) -> tuple[np.ndarray, np.ndarray]:
    """Ratios h1(t+1)/h1(t) at integer offsets t = 0, 1, ...

    Values are linearly interpolated between samples; a zero numerator and
    denominator reports 0 by convention.  Requires a horizon of at least 2.
    """
    horizon = series.times[-1]
    if horizon < 2.0:
        raise ValueError("unit-time contraction needs a horizon >= 2")
    offsets = np.arange(0.0, np.floor(horizon))
    h_at = np.interp(offsets, series.times, series.h1)
    h_next = np.interp(offsets + 1.0, series.times, series.h1)
    ratios = np.divide(h_next, h_at, out=np.zeros_like(h_at), where=h_at > 0)
    return offsets, ratios


@dataclass
class CompactnessReport:
    """Distance-to-base decay under increasingly oscillatory perturbations.

    Perturbations of fixed H^1 size 1 at frequencies (n, 0, 0) converge
    weakly to zero as n grows; the recorded sup-H^1 distances over
    [eps_window, T] shrink accordingly.
    """

    frequencies: list[int]
    distances: list[float]
    epsilon_window: float
    T_used: float
    c_used: float

    def to_json(self, path=None) -> str:
        obj = {
            "frequencies": list(self.frequencies),
            "distances": list(self.distances),
            "epsilon_window": self.epsilon_window,
            "T_used": self.T_used,
            "c_used": self.c_used,
        }
        text = json.dumps(obj, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def compactness_experiment(
    u0: SpectralField,
    freqs,
    eps_window: float,
    c: float,
    dt: float = 1e-3,
    perturbation_h1: float = 1.0,
) -> CompactnessReport:
    """Measure sup-H^1 distances between perturbed and base solutions.

    For each frequency n the datum is u0 plus a divergence-free pair at
    wavevector (n, 0, 0) with y-polarization and H^1 size ``perturbation_h1``.
    Both runs share the horizon T = local_time(A + 1, c) and every step time
    in [eps_window, T] enters the supremum, so the result does not depend on
    any storage thinning.
    """
    freqs = [int(n) for n in freqs]
    if any(b <= a for a, b in zip(freqs, freqs[1:])):
        raise ValueError("frequencies must be strictly increasing")
    K = u0.grid.cutoff
    for n in freqs:
        if n < 1 or n > K:
            raise ValueError(f"perturbation frequency {n} outside the cutoff (1..{K})")
    A = hs_norm(u0, 1.0)
    T = local_time(A + 1.0, c)
    if eps_window < 0 or eps_window >= T:
        raise ValueError(f"eps_window must lie in [0, T) with T={T:.6g}")
    cfg = StepConfig(dt=dt)
    distances = []
    for n in freqs:
        w = single_mode_field(u0.grid, (n, 0, 0), (0.0, 1.0, 0.0), perturbation_h1)
        d, _ = pair_distance(u0 + w, u0, T, cfg, t_min=eps_window, s=1.0)
        distances.append(d)
    return CompactnessReport(freqs, distances, eps_window, T, c)


class ExplosionScan(NamedTuple):
    crossed: bool
    time: float | None


def norm_explosion_scan(traj, ceiling: float) -> ExplosionScan:
    """First time the H^1 series exceeds the ceiling, if any."""
    s = _series_of(traj)
    above = np.nonzero(s.h1 > ceiling)[0]
    if above.size == 0:
        return ExplosionScan(False, None)
    return ExplosionScan(True, float(s.times[above[0]]))


def poincare_violation(traj) -> float:
    """Largest violation of l2 <= h1 over the series (<= 0 when it holds).

    On mean-zero fields every active mode has |k| >= 1, so the inequality is
    exact up to roundoff.
    """
    s = _series_of(traj)
    if s.times.size == 0:
        return 0.0
    return float(np.max(s.l2 - s.h1))


def residuals_to_csv(res: EnergyResiduals, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("t", "residual"))
        for t, r in zip(res.times, res.residuals):
            writer.writerow([f"{t:.17g}", f"{r:.17g}"])
