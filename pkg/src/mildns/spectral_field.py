"""Fourier representation of mean-zero vector fields on the periodic 3-torus.

Conventions used throughout the package:

* the torus is [0, 2pi)^3 with characters exp(i k.x), k an integer 3-vector,
  so -Laplace has eigenvalue |k|^2 on mode k and its least non-trivial
  eigenvalue is 1;
* the measure is normalized to unit total mass, so Parseval reads
  mean(|f|^2) = sum_k |f_hat(k)|^2 with plain counting measure on modes;
* a field keeps only the cube of modes |k_i| <= K (the dealias cutoff) in a
  dense complex array of shape (3, 2K+1, 2K+1, 2K+1), axis index i mapping
  to wavenumber k = i - K, component axis first;
* the k = 0 slot is stored but pinned to zero (mean-zero reduction).
"""

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as _fft

__all__ = [
    "GridSpec",
    "SpectralField",
    "hs_norm",
    "leray_project",
    "divergence_linf",
    "nonlinear_term",
    "tensor_product_coef",
    "random_divfree",
    "named_flow",
    "single_mode_field",
    "sample_on_grid",
    "hermitian_residual",
    "save_nsf1",
    "load_nsf1",
]

FLOW_NAMES = ("shear", "taylor_green", "abc")


@dataclass(frozen=True)
class GridSpec:
    """Resolution and dealias cutoff of a spectral grid.

    ``n`` is the nominal number of collocation points per axis, ``cutoff``
    the largest retained integer frequency per axis.  ``cutoff=None`` picks
    the two-thirds rule floor(n/3).
    """

    n: int
    cutoff: int | None = None

    def __post_init__(self):
        if self.n < 4 or self.n % 2 != 0:
            raise ValueError(f"resolution must be an even integer >= 4, got {self.n}")
        if self.cutoff is None:
            object.__setattr__(self, "cutoff", self.n // 3)
        if not (1 <= self.cutoff <= self.n // 2 - 1):
            raise ValueError(
                f"cutoff must satisfy 1 <= K <= n/2 - 1, got K={self.cutoff} for n={self.n}"
            )

    @property
    def modes_per_axis(self) -> int:
        return 2 * self.cutoff + 1

    @property
    def pad_size(self) -> int:
        """Collocation points per axis making quadratic products alias-free.

        Products of two fields with modes in [-K, K] live in [-2K, 2K]; on a
        grid of P points their alias images shift by P, so P >= 3K + 1 keeps
        every image outside the retained cube.  Rounded up to even.
        """
        p = 3 * self.cutoff + 1
        return p if p % 2 == 0 else p + 1


@lru_cache(maxsize=None)
def _wavenumbers(grid: GridSpec):
    """Per-mode wavevector array (3,M,M,M), |k|^2, and 1/|k|^2 (0 at k=0)."""
    k1d = np.arange(-grid.cutoff, grid.cutoff + 1, dtype=np.float64)
    kv = np.stack(np.meshgrid(k1d, k1d, k1d, indexing="ij"))
    k2 = np.einsum("cxyz,cxyz->xyz", kv, kv)
    inv_k2 = np.zeros_like(k2)
    nz = k2 > 0
    inv_k2[nz] = 1.0 / k2[nz]
    for a in (kv, k2, inv_k2):
        a.setflags(write=False)
    return kv, k2, inv_k2


@lru_cache(maxsize=None)
def _norm_weights(grid: GridSpec, s: float):
    """|k|^(2s) with the k=0 slot zeroed (mean-zero norms skip it)."""
    _, k2, _ = _wavenumbers(grid)
    w = np.zeros_like(k2)
    nz = k2 > 0
    w[nz] = k2[nz] ** s
    w.setflags(write=False)
    return w


@lru_cache(maxsize=None)
def _embed_indices(grid: GridSpec):
    """Index maps between the mode cube and the padded rFFT layout."""
    K, P = grid.cutoff, grid.pad_size
    i = np.arange(2 * K + 1)
    pos = (i - K) % P          # cube index -> fft index of +k
    neg = (K - i) % P          # cube index -> fft index of -k
    for a in (pos, neg):
        a.setflags(write=False)
    return pos, neg


@dataclass
class SpectralField:
    """Truncated Fourier coefficients of a real vector field on the torus.

    ``coef`` has shape (3, M, M, M) with M = 2K+1; Hermitian symmetry
    coef(-k) = conj(coef(k)) makes the field real-valued.  Instances are
    value-like: every operation in this package returns a new field and
    never mutates its inputs, so fields are safe to share across threads.
    """

    grid: GridSpec
    coef: np.ndarray

    def __post_init__(self):
        m = self.grid.modes_per_axis
        if self.coef.shape != (3, m, m, m):
            raise ValueError(
                f"coefficient array must have shape (3,{m},{m},{m}), got {self.coef.shape}"
            )
        if self.coef.dtype != np.complex128:
            self.coef = self.coef.astype(np.complex128)

    @classmethod
    def zero(cls, grid: GridSpec) -> "SpectralField":
        m = grid.modes_per_axis
        return cls(grid, np.zeros((3, m, m, m), dtype=np.complex128))

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coef.copy())

    def mean_vector(self) -> np.ndarray:
        """Value of the k=0 coefficient (the spatial mean), as a real 3-vector."""
        K = self.grid.cutoff
        return self.coef[:, K, K, K].real.copy()

    def _binary_check(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.grid != self.grid:
            raise ValueError("grid mismatch between spectral fields")
        return other

    def __add__(self, other):
        other = self._binary_check(other)
        if other is NotImplemented:
            return NotImplemented
        return SpectralField(self.grid, self.coef + other.coef)

    def __sub__(self, other):
        other = self._binary_check(other)
        if other is NotImplemented:
            return NotImplemented
        return SpectralField(self.grid, self.coef - other.coef)

    def __mul__(self, a):
        if not isinstance(a, (int, float)):
            return NotImplemented
        return SpectralField(self.grid, self.coef * float(a))

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.coef)


def hermitize(coef: np.ndarray) -> np.ndarray:
    """Project onto exactly Hermitian-symmetric coefficients (real field)."""
    return 0.5 * (coef + np.conj(coef[:, ::-1, ::-1, ::-1]))


def hermitian_residual(f: SpectralField) -> float:
    """Max deviation from coef(-k) = conj(coef(k)); zero for real fields."""
    return float(np.max(np.abs(f.coef - np.conj(f.coef[:, ::-1, ::-1, ::-1]))))


def hs_norm(f: SpectralField, s: float) -> float:
    """Sobolev norm (sum over k != 0 of |k|^(2s) |coef(k)|^2)^(1/2).

    The squared Euclidean length of the complex coefficient 3-vector is
    summed per mode; ``s`` may be negative or fractional.  The zero field
    returns 0 for any ``s``.
    """
    w = _norm_weights(f.grid, float(s))
    mag2 = f.coef.real**2 + f.coef.imag**2
    return float(np.sqrt(np.einsum("cxyz,xyz->", mag2, w)))


def leray_project(f: SpectralField) -> SpectralField:
    """Apply the divergence-free projector (I - k k^T / |k|^2) per mode.

    Idempotent; annihilates gradient fields; leaves the k=0 slot untouched.
    """
    kv, _, inv_k2 = _wavenumbers(f.grid)
    kdotv = np.einsum("cxyz,cxyz->xyz", kv, f.coef)
    return SpectralField(f.grid, f.coef - kv * (kdotv * inv_k2))


def divergence_linf(f: SpectralField) -> float:
    """max_k |k . coef(k)|, the spectral divergence magnitude."""
    kv, _, _ = _wavenumbers(f.grid)
    kdotv = np.einsum("cxyz,cxyz->xyz", kv, f.coef)
    return float(np.max(np.abs(kdotv)))


def _to_padded_physical(coef: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Evaluate components on the alias-safe collocation grid (real values)."""
    K, P = grid.cutoff, grid.pad_size
    pos, _ = _embed_indices(grid)
    nb = coef.shape[0]
    half = np.zeros((nb, P, P, P // 2 + 1), dtype=np.complex128)
    half[np.ix_(range(nb), pos, pos, range(K + 1))] = coef[:, :, :, K:]
    return _fft.irfftn(half, s=(P, P, P), axes=(1, 2, 3), norm="forward")


def _from_padded_physical(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Fourier coefficients of real collocation data, cut to the mode cube.

    The returned cube is exactly Hermitian: negative-k3 modes are taken as
    conjugates of their positive partners, and the k3=0 plane is symmetrized.
    """
    K, P = grid.cutoff, grid.pad_size
    pos, neg = _embed_indices(grid)
    nb = values.shape[0]
    half = _fft.rfftn(values, axes=(1, 2, 3), norm="forward")
    m = 2 * K + 1
    cube = np.empty((nb, m, m, m), dtype=np.complex128)
    cube[:, :, :, K:] = half[np.ix_(range(nb), pos, pos, range(K + 1))]
    cube[:, :, :, :K] = np.conj(half[np.ix_(range(nb), neg, neg, range(K, 0, -1))])
    plane = cube[:, :, :, K]
    cube[:, :, :, K] = 0.5 * (plane + np.conj(plane[:, ::-1, ::-1]))
    return cube


def sample_on_grid(f: SpectralField, points: int | None = None) -> np.ndarray:
    """Sample the field on a uniform collocation grid.

    Returns a real array (3, points, points, points) over x_j = 2 pi j / points.
    ``points`` must be at least 2K+1 so that the trigonometric polynomial is
    represented without aliasing; defaults to the grid resolution.
    """
    p = f.grid.n if points is None else int(points)
    if p < f.grid.modes_per_axis:
        raise ValueError(f"need at least {f.grid.modes_per_axis} points per axis, got {p}")
    K = f.grid.cutoff
    idx = (np.arange(-K, K + 1)) % p
    full = np.zeros((3, p, p, p), dtype=np.complex128)
    full[np.ix_(range(3), idx, idx, idx)] = f.coef
    out = _fft.ifftn(full, axes=(1, 2, 3), norm="forward")
    return out.real.copy()


def tensor_product_coef(u: SpectralField) -> np.ndarray:
    """Dealiased Fourier coefficients of u (x) u, shape (3, 3, M, M, M).

    Computed pseudo-spectrally on the alias-safe padded grid, then truncated
    to the retained cube, so it equals the exact convolution of the retained
    modes.  The result is Hermitian per entry and symmetric in (l, m).
    """
    phys = _to_padded_physical(u.coef, u.grid)
    pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
    prods = np.empty((6,) + phys.shape[1:], dtype=np.float64)
    for c, (l, m) in enumerate(pairs):
        np.multiply(phys[l], phys[m], out=prods[c])
    cubes = _from_padded_physical(prods, u.grid)
    m = u.grid.modes_per_axis
    out = np.empty((3, 3, m, m, m), dtype=np.complex128)
    for c, (l, mm) in enumerate(pairs):
        out[l, mm] = cubes[c]
        out[mm, l] = cubes[c]
    return out


def nonlinear_term(u: SpectralField) -> SpectralField:
    """Projected divergence of the quadratic flux: -P(k) (i k_m (u u_m)^(k)).

    The input must be divergence-free and mean zero (a non-projected input
    signals a caller bug and is rejected).  Output is mean zero,
    divergence-free, and exactly dealiased against the cutoff cube.
    """
    div = divergence_linf(u)
    scale = max(1.0, hs_norm(u, 1.0))
    if not np.isfinite(div):
        raise ValueError("field has non-finite coefficients")
    if div > 1e-8 * scale:
        raise ValueError(
            f"nonlinear_term requires a divergence-free field (div_linf={div:.3e})"
        )
    kv, _, inv_k2 = _wavenumbers(u.grid)
    w = tensor_product_coef(u)
    flux = 1j * np.einsum("mxyz,lmxyz->lxyz", kv, w)
    kdotf = np.einsum("cxyz,cxyz->xyz", kv, flux)
    out = -(flux - kv * (kdotf * inv_k2))
    K = u.grid.cutoff
    out[:, K, K, K] = 0.0
    return SpectralField(u.grid, out)


def random_divfree(A: float, seed: int, slope: float, grid: GridSpec) -> SpectralField:
    """Random divergence-free field with H^1 norm A, reproducible in all inputs.

    Coefficients are independent complex Gaussians with standard deviation
    |k|^(-slope), Hermitian-symmetrized, projected divergence-free, and
    rescaled so hs_norm(., 1) == A.  A = 0 returns the zero field.
    """
    if A < 0:
        raise ValueError("amplitude A must be nonnegative")
    if A == 0.0:
        return SpectralField.zero(grid)
    m = grid.modes_per_axis
    _, k2, _ = _wavenumbers(grid)
    sigma = np.zeros_like(k2)
    nz = k2 > 0
    sigma[nz] = k2[nz] ** (-slope / 2.0)
    for attempt_seed in range(seed, seed + 100):
        rng = np.random.default_rng(attempt_seed)
        draw = rng.standard_normal((3, m, m, m)) + 1j * rng.standard_normal((3, m, m, m))
        coef = hermitize(draw * sigma)
        K = grid.cutoff
        coef[:, K, K, K] = 0.0
        f = leray_project(SpectralField(grid, coef))
        h1 = hs_norm(f, 1.0)
        if h1 > 0.0:
            return SpectralField(grid, f.coef * (A / h1))
    raise RuntimeError("random field generation degenerated to zero repeatedly")


def _set_pair(coef, K, k, component, value):
    """Write value at mode k and its conjugate at -k for one component."""
    i, j, l = (c + K for c in k)
    ni, nj, nl = (K - c for c in k)
    coef[component, i, j, l] += value
    coef[component, ni, nj, nl] += np.conj(value)


def named_flow(name: str, amplitude: float, grid: GridSpec) -> SpectralField:
    """Classical divergence-free reference flows with exact coefficients.

    shear:        a (sin x2, 0, 0)
    taylor_green: a (sin x1 cos x2, -cos x1 sin x2, 0)
    abc:          a (sin x3 + cos x2, sin x1 + cos x3, sin x2 + cos x1)
    """
    if name not in FLOW_NAMES:
        raise ValueError(f"unknown flow {name!r}; expected one of {FLOW_NAMES}")
    a = float(amplitude)
    f = SpectralField.zero(grid)
    K = grid.cutoff
    c = f.coef
    sin_c = -0.5j * a   # coefficient of sin at +k
    cos_c = 0.5 * a     # coefficient of cos at +k
    if name == "shear":
        _set_pair(c, K, (0, 1, 0), 0, sin_c)
    elif name == "taylor_green":
        # sin x1 cos x2 = (sin(x1+x2) + sin(x1-x2)) / 2
        _set_pair(c, K, (1, 1, 0), 0, 0.5 * sin_c)
        _set_pair(c, K, (1, -1, 0), 0, 0.5 * sin_c)
        # -cos x1 sin x2 = (-sin(x1+x2) + sin(x1-x2)) / 2
        _set_pair(c, K, (1, 1, 0), 1, -0.5 * sin_c)
        _set_pair(c, K, (1, -1, 0), 1, 0.5 * sin_c)
    else:
        _set_pair(c, K, (0, 0, 1), 0, sin_c)
        _set_pair(c, K, (0, 1, 0), 0, cos_c)
        _set_pair(c, K, (1, 0, 0), 1, sin_c)
        _set_pair(c, K, (0, 0, 1), 1, cos_c)
        _set_pair(c, K, (0, 1, 0), 2, sin_c)
        _set_pair(c, K, (1, 0, 0), 2, cos_c)
    return f


def single_mode_field(
    grid: GridSpec,
    k: tuple[int, int, int],
    polarization: tuple[float, float, float],
    h1_norm: float = 1.0,
) -> SpectralField:
    """One conjugate pair amp * p * sin(k.x) scaled to a given H^1 norm.

    The polarization is projected orthogonal to k so the field is
    divergence-free.  Frequencies beyond the dealias cutoff are rejected.
    """
    K = grid.cutoff
    karr = np.asarray(k, dtype=np.int64)
    if np.all(karr == 0):
        raise ValueError("mode k must be nonzero")
    if np.max(np.abs(karr)) > K:
        raise ValueError(f"mode {k} exceeds the dealias cutoff K={K}")
    p = np.asarray(polarization, dtype=np.float64)
    kf = karr.astype(np.float64)
    p = p - kf * (p @ kf) / (kf @ kf)
    pnorm = np.linalg.norm(p)
    if pnorm < 1e-14:
        raise ValueError("polarization is parallel to k")
    p /= pnorm
    # amp * sin(k.x): |coef| = amp/2 at +-k, h1^2 = |k|^2 * amp^2 / 2
    amp = h1_norm * np.sqrt(2.0) / np.linalg.norm(kf)
    f = SpectralField.zero(grid)
    for comp in range(3):
        if p[comp] != 0.0:
            _set_pair(f.coef, K, tuple(karr), comp, -0.5j * amp * p[comp])
    return f


_NSF1_MAGIC = b"NSF1"


def save_nsf1(f: SpectralField, path) -> None:
    """Write the binary snapshot: magic "NSF1", u32le N, K, component count 3,
    then complex128 coefficients (re, im doubles) in row-major k-order with
    k1 slowest and the 3 components interleaved per mode."""
    data = np.ascontiguousarray(np.moveaxis(f.coef, 0, -1)).astype("<c16", copy=False)
    with open(path, "wb") as fh:
        fh.write(_NSF1_MAGIC)
        fh.write(struct.pack("<III", f.grid.n, f.grid.cutoff, 3))
        data.tofile(fh)


def load_nsf1(path) -> SpectralField:
    """Read a snapshot written by :func:`save_nsf1` (bit-exact round trip)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _NSF1_MAGIC:
            raise ValueError(f"bad snapshot magic {magic!r}")
        n, cutoff, ncomp = struct.unpack("<III", fh.read(12))
        if ncomp != 3:
            raise ValueError(f"snapshot declares {ncomp} components, expected 3")
        grid = GridSpec(int(n), int(cutoff))
        m = grid.modes_per_axis
        data = np.fromfile(fh, dtype="<c16", count=3 * m**3)
    if data.size != 3 * m**3:
        raise ValueError("snapshot truncated")
    coef = np.moveaxis(data.reshape(m, m, m, 3), -1, 0).astype(np.complex128)
    return SpectralField(grid, np.ascontiguousarray(coef))
