"""Heat semigroup, integrating-factor RK4 time stepping, and flow reductions.

The evolution integrated here is the mean-zero, unit-viscosity system
du/dt = Laplace(u) + D(u (x) u) in Fourier space, where the linear part is
diagonal (-|k|^2 per mode) and handled exactly by the integrating factor.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .spectral_field import (
    GridSpec,
    SpectralField,
    _wavenumbers,
    divergence_linf,
    hs_norm,
    nonlinear_term,
)

__all__ = [
    "NormSeries",
    "StepConfig",
    "Trajectory",
    "BlowupError",
    "heat_propagate",
    "smoothing_ratio",
    "step",
    "simulate",
    "pair_distance",
    "viscosity_normalize",
    "galilean_reduce",
    "galilean_restore",
    "norms_to_csv",
    "norms_from_csv",
]

CSV_COLUMNS = ("t", "l2", "h1", "enstrophy", "div_linf")


@dataclass
class NormSeries:
    """Sampled norm history of one solution: L^2, H^1, enstrophy, divergence."""

    times: np.ndarray
    l2: np.ndarray
    h1: np.ndarray
    enstrophy: np.ndarray
    div_linf: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(a, dtype=np.float64) for a in
                  (self.times, self.l2, self.h1, self.enstrophy, self.div_linf)]
        self.times, self.l2, self.h1, self.enstrophy, self.div_linf = arrays
        n = self.times.size
        if any(a.size != n for a in arrays):
            raise ValueError("norm series arrays must have equal length")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("sample times must be strictly increasing")
        if any(np.any(a < 0) for a in arrays[1:]):
            raise ValueError("norm values must be nonnegative")


@dataclass(frozen=True)
class StepConfig:
    """Time stepper settings.  ``ceiling`` aborts the run (as a blowup signal)
    once the H^1 norm exceeds it.

    The step size is taken as given and never adapted (reproducibility of
    seeded ensembles).  Guidance, not enforced: with cutoff K the stiffest
    retained modes relax on the 1/(3K^2) scale, so dt <= 1/(2K^2) keeps the
    nonlinear stages accurate at desk resolutions.
    """

    dt: float
    scheme: str = "if_rk4"
    store_every: int = 1
    ceiling: float = 1e6

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme != "if_rk4":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.store_every < 1:
            raise ValueError("store_every must be >= 1")
        if self.ceiling <= 0:
            raise ValueError("ceiling must be positive")


@dataclass
class Trajectory:
    """One simulated solution: norm series every step, fields thinned."""

    grid: GridSpec
    norm_series: NormSeries
    field_times: np.ndarray
    fields: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return self.norm_series.times


class BlowupError(RuntimeError):
    """Raised when a run leaves the resolvable regime (non-finite coefficients
    or H^1 above the configured ceiling).  Carries the last finite state and,
    when raised from :func:`simulate`, the partial trajectory."""

    def __init__(self, message, time=None, last_field=None, trajectory=None):
        super().__init__(message)
        self.time = time
        self.last_field = last_field
        self.trajectory = trajectory


def heat_propagate(f: SpectralField, t: float) -> SpectralField:
    """Exact heat flow: multiply mode k by exp(-|k|^2 t).  Requires t >= 0."""
    if t < 0:
        raise ValueError("heat flow runs forward in time only (t >= 0)")
    _, k2, _ = _wavenumbers(f.grid)
    return SpectralField(f.grid, f.coef * np.exp(-k2 * t))


def smoothing_ratio(f: SpectralField, s: float, delta: float, t: float) -> float:
    """Parabolic smoothing quotient t^(d/2) |e^(tL) f|_{s+d} / |f|_s.

    Bounded by sup_{x>=0} x^(d/2) e^(-x) for any mean-zero f; undefined for
    the zero field.
    """
    if t <= 0:
        raise ValueError("smoothing ratio needs t > 0")
    if delta <= 0:
        raise ValueError("smoothing ratio needs delta > 0")
    denom = hs_norm(f, s)
    if denom == 0.0:
        raise ValueError("smoothing ratio undefined for the zero field")
    return t ** (delta / 2.0) * hs_norm(heat_propagate(f, t), s + delta) / denom


def _decay_factors(grid: GridSpec, h: float):
    _, k2, _ = _wavenumbers(grid)
    return np.exp(-k2 * (0.5 * h)), np.exp(-k2 * h)


def _check_finite(coef, t, origin: SpectralField):
    if not np.all(np.isfinite(coef)):
        where = "" if t is None else f" at t={t:.6g}"
        raise BlowupError(f"non-finite coefficients{where}", time=t, last_field=origin)


def _if_rk4_step(u: SpectralField, h: float, e_half, e_full) -> SpectralField:
    """One integrating-factor RK4 step.

    The substitution v = exp(|k|^2 t) u makes the stiff linear part exact;
    classical RK4 is applied to the transformed nonlinearity.  With a zero
    nonlinearity the step reduces to the exact heat propagator.
    """
    grid = u.grid
    # overflow surfaces as an explicit blowup signal, not a warning
    with np.errstate(over="ignore", invalid="ignore"):
        n1 = nonlinear_term(u).coef
        u2 = SpectralField(grid, e_half * (u.coef + (0.5 * h) * n1))
        _check_finite(u2.coef, None, u)
        n2 = nonlinear_term(u2).coef
        u3 = SpectralField(grid, e_half * u.coef + (0.5 * h) * n2)
        n3 = nonlinear_term(u3).coef
        u4 = SpectralField(grid, e_full * u.coef + h * (e_half * n3))
        _check_finite(u4.coef, None, u)
        n4 = nonlinear_term(u4).coef
        out = e_full * u.coef + (h / 6.0) * (e_full * n1 + 2.0 * e_half * (n2 + n3) + n4)
    return SpectralField(grid, out)


def step(u: SpectralField, cfg: StepConfig) -> SpectralField:
    """Advance one time step of size cfg.dt; raises BlowupError on overflow."""
    e_half, e_full = _decay_factors(u.grid, cfg.dt)
    out = _if_rk4_step(u, cfg.dt, e_half, e_full)
    _check_finite(out.coef, cfg.dt, u)
    return out


def _plan_steps(T: float, dt: float):
    """Number of steps with the final one shortened to land exactly on T."""
    n = max(1, int(np.ceil(T / dt - 1e-9)))
    return n


def simulate(u0: SpectralField, T: float, cfg: StepConfig) -> Trajectory:
    """March the mild evolution from 0 to T, recording norms every step.

    Fields are stored every ``cfg.store_every`` steps plus the final state.
    Raises :class:`BlowupError` with the partial trajectory attached if
    coefficients go non-finite or H^1 crosses ``cfg.ceiling``.
    """
    if T <= 0:
        raise ValueError("horizon T must be positive")
    grid = u0.grid
    n = _plan_steps(T, cfg.dt)
    e_half, e_full = _decay_factors(grid, cfg.dt)

    times = [0.0]
    l2s = [hs_norm(u0, 0.0)]
    h1s = [hs_norm(u0, 1.0)]
    divs = [divergence_linf(u0)]
    fields = [u0.copy()]
    field_times = [0.0]

    def partial() -> Trajectory:
        series = NormSeries(
            np.asarray(times), np.asarray(l2s), np.asarray(h1s),
            np.asarray(h1s) ** 2, np.asarray(divs),
        )
        return Trajectory(grid, series, np.asarray(field_times), fields)

    u = u0
    for i in range(n):
        last = i == n - 1
        if last:
            h = T - i * cfg.dt
            eh, ef = _decay_factors(grid, h)
        else:
            h, eh, ef = cfg.dt, e_half, e_full
        t_next = T if last else (i + 1) * cfg.dt
        try:
            u = _if_rk4_step(u, h, eh, ef)
            _check_finite(u.coef, t_next, u)
        except BlowupError as exc:
            exc.trajectory = partial()
            exc.time = t_next
            raise
        times.append(t_next)
        l2s.append(hs_norm(u, 0.0))
        h1s.append(hs_norm(u, 1.0))
        divs.append(divergence_linf(u))
        if (i + 1) % cfg.store_every == 0 or last:
            fields.append(u.copy())
            field_times.append(t_next)
        if h1s[-1] > cfg.ceiling:
            raise BlowupError(
                f"H1 norm {h1s[-1]:.6g} exceeded ceiling {cfg.ceiling:.6g} at t={t_next:.6g}",
                time=t_next, last_field=u, trajectory=partial(),
            )
    return partial()


def pair_distance(
    u0_a: SpectralField,
    u0_b: SpectralField,
    T: float,
    cfg: StepConfig,
    t_min: float = 0.0,
    s: float = 1.0,
) -> tuple[float, float]:
    """Largest H^s distance between two lockstep runs over step times >= t_min.

    Both states advance with the same stepper and step sequence, so the
    result is independent of any field-storage thinning.  Returns the
    supremum and the time where it is attained.
    """
    if u0_a.grid != u0_b.grid:
        raise ValueError("grid mismatch between the two initial data")
    grid = u0_a.grid
    n = _plan_steps(T, cfg.dt)
    e_half, e_full = _decay_factors(grid, cfg.dt)
    best, best_t = -1.0, 0.0
    ua, ub = u0_a, u0_b
    t = 0.0
    eps = 1e-12
    if t >= t_min - eps:
        best, best_t = hs_norm(ua - ub, s), 0.0
    for i in range(n):
        last = i == n - 1
        if last:
            h = T - i * cfg.dt
            eh, ef = _decay_factors(grid, h)
        else:
            h, eh, ef = cfg.dt, e_half, e_full
        t = T if last else (i + 1) * cfg.dt
        ua = _if_rk4_step(ua, h, eh, ef)
        ub = _if_rk4_step(ub, h, eh, ef)
        _check_finite(ua.coef, t, ua)
        _check_finite(ub.coef, t, ub)
        if t >= t_min - eps:
            d = hs_norm(ua - ub, s)
            if d > best:
                best, best_t = d, t
    if best < 0.0:
        raise ValueError("no step times fall inside the comparison window")
    return best, best_t


def viscosity_normalize(u0: SpectralField, nu: float) -> SpectralField:
    """Initial data for the unit-viscosity twin of a viscosity-nu problem.

    Returns nu * u0.  The change of variables is exact: if u(t) is the
    unit-viscosity evolution of u0, then v(t) := nu * u(nu t) is the
    viscosity-nu evolution of the returned data nu * u0.  Norms scale
    linearly in nu; nu = 1 is the identity.
    """
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    return SpectralField(u0.grid, u0.coef * float(nu))


def galilean_reduce(f: SpectralField) -> tuple[SpectralField, np.ndarray]:
    """Split off the conserved mean velocity: returns (mean-zero part, drift)."""
    K = f.grid.cutoff
    drift = f.coef[:, K, K, K].real.copy()
    out = f.coef.copy()
    out[:, K, K, K] = 0.0
    return SpectralField(f.grid, out), drift


def galilean_restore(f: SpectralField, drift: np.ndarray, t: float) -> SpectralField:
    """Undo the mean reduction at output time t.

    Translates by the accumulated drift (phase exp(-i k . drift t) per mode)
    and restores the mean as the k=0 coefficient.
    """
    kv, _, _ = _wavenumbers(f.grid)
    d = np.asarray(drift, dtype=np.float64)
    phase = np.exp(-1j * t * np.einsum("cxyz,c->xyz", kv, d))
    out = f.coef * phase
    K = f.grid.cutoff
    out[:, K, K, K] = d.astype(np.complex128)
    return SpectralField(f.grid, out)


def norms_to_csv(series: NormSeries, path) -> None:
    """Write the norm series as CSV with 17-significant-digit floats."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in zip(series.times, series.l2, series.h1,
                       series.enstrophy, series.div_linf):
            writer.writerow([f"{v:.17g}" for v in row])


def norms_from_csv(path) -> NormSeries:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        cols = [[] for _ in CSV_COLUMNS]
        for row in reader:
            for c, v in zip(cols, row):
                c.append(float(v))
    arrays = [np.asarray(c) for c in cols]
    return NormSeries(arrays[0], arrays[1], arrays[2], arrays[3], arrays[4])
