"""
Periodic spectral grids, Fourier fields and space-time norms.

The whole space is replaced by the periodic cube [-L, L)^3 sampled with n
points per axis.  Fourier coefficients live on the lattice

    xi in (pi/L) * {-n/2, ..., n/2 - 1}^3

stored in ascending ("centered") order along every axis.  The transform
pair is the unitary one,

    g(x) = (2 pi)^{-3/2} sum_xi  ghat(xi) exp(i x.xi) dxi^3,

so that the coefficient l2 norm weighted by the frequency cell volume equals
the physical L2 norm weighted by the spatial cell volume (Parseval holds
exactly on the lattice).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Iterable, Iterator

import numpy as np
import scipy.fft

__all__ = [
    "GridSpec",
    "SpectralField",
    "TimeWindow",
    "MixedNormSpec",
    "TIME_OUTER",
    "SPACE_OUTER",
    "to_physical",
    "from_physical",
    "apply_multiplier",
    "sobolev_norm",
    "lebesgue_norm",
    "mixed_norm",
    "stream_mixed_norm",
    "random_test_field",
    "dilate_field",
    "write_field",
    "read_field",
    "set_fft_workers",
]

_FFT_WORKERS = 1


def set_fft_workers(workers: int) -> None:
    """Set the number of threads handed to scipy.fft."""
    global _FFT_WORKERS
    if workers < 1:
        raise ValueError("workers must be >= 1")
    _FFT_WORKERS = int(workers)


@dataclass(frozen=True)
class GridSpec:
    """Periodic cube [-L, L)^3 with ``points_per_axis`` samples per axis."""

    box_half_length: float
    points_per_axis: int

    def __post_init__(self):
        if not self.box_half_length > 0:
            raise ValueError("box_half_length must be positive")
        n = self.points_per_axis
        if int(n) != n or n < 4 or n % 2:
            raise ValueError("points_per_axis must be an even integer >= 4")

    @property
    def n(self) -> int:
        return int(self.points_per_axis)

    @property
    def spacing(self) -> float:
        return 2.0 * self.box_half_length / self.n

    @property
    def frequency_spacing(self) -> float:
        return math.pi / self.box_half_length

    @property
    def cell_volume(self) -> float:
        """Frequency-space cell volume dxi^3."""
        return self.frequency_spacing ** 3

    @property
    def physical_cell_volume(self) -> float:
        return self.spacing ** 3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    def indices_1d(self) -> np.ndarray:
        return np.arange(self.n) - self.n // 2

    def frequencies_1d(self) -> np.ndarray:
        return self.indices_1d() * self.frequency_spacing

    def coordinates_1d(self) -> np.ndarray:
        return -self.box_half_length + np.arange(self.n) * self.spacing

    @cached_property
    def wavevectors(self) -> np.ndarray:
        """Array of shape (3, n, n, n) holding the lattice frequencies."""
        k = self.frequencies_1d()
        out = np.stack(np.meshgrid(k, k, k, indexing="ij"))
        out.setflags(write=False)
        return out

    @cached_property
    def wavenumber(self) -> np.ndarray:
        """|xi| on the lattice, shape (n, n, n)."""
        out = np.sqrt(np.sum(self.wavevectors ** 2, axis=0))
        out.setflags(write=False)
        return out

    @property
    def zero_index(self) -> tuple[int, int, int]:
        h = self.n // 2
        return (h, h, h)

    @cached_property
    def nonzero_mask(self) -> np.ndarray:
        m = np.ones(self.shape, dtype=bool)
        m[self.zero_index] = False
        m.setflags(write=False)
        return m

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on lattice points having some index equal to -n/2."""
        idx = self.indices_1d() == -(self.n // 2)
        m = idx[:, None, None] | idx[None, :, None] | idx[None, None, :]
        m.setflags(write=False)
        return m

    @cached_property
    def _alternating_sign(self) -> np.ndarray:
        # exp(i xi_k x_0) with x_0 = -L is (-1)^k
        s = np.where(self.indices_1d() % 2 == 0, 1.0, -1.0)
        out = s[:, None, None] * s[None, :, None] * s[None, None, :]
        out.setflags(write=False)
        return out

    @property
    def _synthesis_scale(self) -> float:
        return self.cell_volume * (2.0 * math.pi) ** -1.5 * self.n ** 3

    def to_dict(self) -> dict:
        return {"box_half_length": float(self.box_half_length), "points_per_axis": self.n}


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a scalar or vector field on a ``GridSpec``.

    ``coefficients`` has shape (components, n, n, n) and is made read-only.
    ``real_valued`` records that the field is real in physical space, which
    on the lattice means Hermitian symmetry away from the Nyquist planes.
    """

    grid: GridSpec
    coefficients: np.ndarray
    real_valued: bool = False

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.ndim == 3:
            c = c[None]
        if c.ndim != 4 or c.shape[1:] != self.grid.shape:
            raise ValueError(
                f"coefficient shape {np.shape(self.coefficients)} does not match grid {self.grid.shape}"
            )
        if c.shape[0] not in (1, 3, 4):
            raise ValueError("fields carry 1, 3 or 4 components")
        if c is self.coefficients or c.base is self.coefficients:
            c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def components(self) -> int:
        return self.coefficients.shape[0]

    def with_coefficients(self, coefficients: np.ndarray, real_valued: bool | None = None) -> "SpectralField":
        rv = self.real_valued if real_valued is None else real_valued
        return SpectralField(self.grid, coefficients, rv)

    def hermitian_defect(self) -> float:
        """max |c(-xi) - conj c(xi)| over pairs inside the lattice."""
        c = self.coefficients[:, 1:, 1:, 1:]
        flipped = c[:, ::-1, ::-1, ::-1]
        return float(np.max(np.abs(c - np.conj(flipped)), initial=0.0))


@dataclass(frozen=True)
class TimeWindow:
    """Uniform samples of [-T, T]."""

    half_width: float
    samples: int

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if int(self.samples) != self.samples or self.samples < 2:
            raise ValueError("samples must be an integer >= 2")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, int(self.samples))

    @property
    def step(self) -> float:
        return 2.0 * self.half_width / (self.samples - 1)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights on the sample times."""
        w = np.full(int(self.samples), self.step)
        w[0] = w[-1] = 0.5 * self.step
        return w

    def scaled(self, factor: float) -> "TimeWindow":
        return TimeWindow(self.half_width * factor, self.samples)


TIME_OUTER = "time-outer"
SPACE_OUTER = "space-outer"


def _check_exponent(name: str, value: float) -> float:
    value = float(value)
    if math.isnan(value) or value < 1:
        raise ValueError(f"exponent {name} must be >= 1 or inf, got {value}")
    return value


@dataclass(frozen=True)
class MixedNormSpec:
    """L^p_t L^q_x (time-outer) or L^q_x L^p_t (space-outer)."""

    p: float
    q: float
    order: str = TIME_OUTER

    def __post_init__(self):
        object.__setattr__(self, "p", _check_exponent("p", self.p))
        object.__setattr__(self, "q", _check_exponent("q", self.q))
        if self.order not in (TIME_OUTER, SPACE_OUTER):
            raise ValueError(f"order must be {TIME_OUTER!r} or {SPACE_OUTER!r}")


# ---------------------------------------------------------------------------
# transforms


def _check_field_grid(coefficients: np.ndarray, grid: GridSpec) -> np.ndarray:
    c = np.asarray(coefficients)
    if c.shape[-3:] != grid.shape:
        raise ValueError(f"array shape {c.shape} does not end with grid shape {grid.shape}")
    return c


def synthesize(coefficients: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Physical samples of raw coefficient arrays (..., n, n, n)."""
    c = _check_field_grid(coefficients, grid)
    shifted = scipy.fft.ifftshift(c * grid._alternating_sign, axes=(-3, -2, -1))
    u = scipy.fft.ifftn(shifted, axes=(-3, -2, -1), workers=_FFT_WORKERS)
    u *= grid._synthesis_scale
    return u


def analyze(samples: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Inverse of :func:`synthesize`."""
    u = _check_field_grid(samples, grid)
    c = scipy.fft.fftn(u, axes=(-3, -2, -1), workers=_FFT_WORKERS)
    c = scipy.fft.fftshift(c, axes=(-3, -2, -1))
    c *= grid._alternating_sign / grid._synthesis_scale
    return c


def to_physical(field: SpectralField) -> np.ndarray:
    """Physical samples, shape (components, n, n, n)."""
    return synthesize(field.coefficients, field.grid)


def from_physical(samples: np.ndarray, grid: GridSpec, real_valued: bool = False) -> SpectralField:
    samples = np.asarray(samples)
    if samples.ndim == 3:
        samples = samples[None]
    if samples.ndim != 4:
        raise ValueError("samples must have shape (n, n, n) or (components, n, n, n)")
    return SpectralField(grid, analyze(samples, grid), real_valued)


# ---------------------------------------------------------------------------
# multipliers and norms


def apply_multiplier(
    field: SpectralField,
    symbol: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    at_zero: complex = 1.0,
) -> SpectralField:
    """Multiply every component by ``symbol(xi1, xi2, xi3)``.

    The symbol is only evaluated at nonzero lattice points; ``at_zero`` is the
    value used at xi = 0.  Hermitian symmetry (and hence real-valuedness) is
    kept only if the caller says so through a real symbol; we conservatively
    drop the flag otherwise.
    """
    grid = field.grid
    mask = grid.nonzero_mask
    k = grid.wavevectors[:, mask]
    values = np.asarray(symbol(k[0], k[1], k[2]), dtype=complex)
    values = np.broadcast_to(values, k.shape[1:])
    if not np.all(np.isfinite(values)):
        raise ValueError("symbol is not finite at some nonzero lattice point")
    m = np.empty(grid.shape, dtype=complex)
    m[mask] = values
    m[grid.zero_index] = at_zero
    out = field.coefficients * m
    real = field.real_valued and bool(np.all(np.imag(values) == 0)) and np.imag(at_zero) == 0
    return SpectralField(grid, out, real)


def sobolev_norm(field: SpectralField, s: float) -> float:
    """Homogeneous Sobolev norm; the zero mode never contributes."""
    grid = field.grid
    c0 = field.coefficients[(slice(None),) + grid.zero_index]
    if s < 0 and np.any(np.abs(c0) > 0):
        raise ValueError("negative-order homogeneous norm needs a zero-mean field")
    mask = grid.nonzero_mask
    weight = grid.wavenumber[mask] ** (2.0 * s)
    power = np.sum(np.abs(field.coefficients[:, mask]) ** 2, axis=0)
    return math.sqrt(float(np.sum(weight * power)) * grid.cell_volume)


def _pointwise_modulus(samples: np.ndarray, has_components: bool) -> np.ndarray:
    if has_components:
        return np.sqrt(np.sum(np.abs(samples) ** 2, axis=0))
    return np.abs(samples)


def lebesgue_norm(values: np.ndarray, q: float, cell: float) -> float:
    """Riemann-sum L^q norm of nonnegative ``values`` with cell volume ``cell``."""
    a = np.abs(values)
    if math.isinf(q):
        return float(np.max(a, initial=0.0))
    if q == 2:
        return math.sqrt(float(np.vdot(a, a).real) * cell)
    return float(np.sum(a ** q) * cell) ** (1.0 / q)


def stream_mixed_norm(
    samples: Iterable[np.ndarray],
    spec: MixedNormSpec,
    window: TimeWindow,
    cell: float,
    has_components: bool = False,
) -> float:
    """Mixed norm of a trajectory produced one time sample at a time.

    Each element of ``samples`` holds the physical field at the matching
    window time; with ``has_components`` the leading axis is the component
    axis and the pointwise modulus is Euclidean.
    """
    weights = window.weights
    p, q = spec.p, spec.q
    count = 0
    if spec.order == TIME_OUTER:
        acc = 0.0
        for w, u in zip(weights, samples):
            a = lebesgue_norm(_pointwise_modulus(u, has_components), q, cell)
            acc = max(acc, a) if math.isinf(p) else acc + w * a ** p
            count += 1
        _check_count(count, window)
        return acc if math.isinf(p) else acc ** (1.0 / p)
    acc_x = None
    for w, u in zip(weights, samples):
        a = _pointwise_modulus(u, has_components)
        if acc_x is None:
            acc_x = np.zeros(a.shape)
        if math.isinf(p):
            np.maximum(acc_x, a, out=acc_x)
        else:
            acc_x += w * a ** p
        count += 1
    _check_count(count, window)
    per_point = acc_x if math.isinf(p) else acc_x ** (1.0 / p)
    return lebesgue_norm(per_point, q, cell)


def _check_count(count: int, window: TimeWindow) -> None:
    if count == 0:
        raise ValueError("empty trajectory")
    if count != window.samples:
        raise ValueError(f"trajectory has {count} samples, window has {window.samples}")


def mixed_norm(
    trajectory: np.ndarray,
    spec: MixedNormSpec,
    window: TimeWindow,
    grid: GridSpec,
    has_components: bool = False,
) -> float:
    """Mixed space-time norm of physical samples of shape (n_t, [c,] n, n, n).

    Trapezoid weights in time, Riemann cell sums in space, inf as a max.
    """
    trajectory = np.asarray(trajectory)
    if trajectory.size == 0 or len(trajectory) == 0:
        raise ValueError("empty trajectory")
    return stream_mixed_norm(iter(trajectory), spec, window, grid.physical_cell_volume, has_components)


# ---------------------------------------------------------------------------
# test data


@lru_cache(maxsize=16)
def _shell_order(n: int) -> np.ndarray:
    """Flat indices of the lattice points with max|k| < n/2, sorted so that
    the ordering restricted to any smaller cube is that cube's own ordering."""
    k = np.arange(n) - n // 2
    K1, K2, K3 = np.meshgrid(k, k, k, indexing="ij")
    shell = np.maximum(np.maximum(np.abs(K1), np.abs(K2)), np.abs(K3))
    inside = (shell < n // 2).ravel()
    flat = np.flatnonzero(inside)
    keys = (shell.ravel()[flat], K1.ravel()[flat], K2.ravel()[flat], K3.ravel()[flat])
    order = np.lexsort(keys[::-1])
    return flat[order]


def random_test_field(
    seed: int,
    spectral_decay: float,
    grid: GridSpec,
    components: int = 1,
) -> SpectralField:
    """Real-valued, zero-mean random field with envelope (1+|xi|^2)^(-decay/2).

    Random numbers are drawn shell by shell (max |index| = 0, 1, 2, ...), so
    two grids with the same box share their common low modes: the field on a
    finer grid refines the one on a coarser grid.  The Nyquist planes and the
    zero mode are set to zero.
    """
    if not spectral_decay > 0:
        raise ValueError("spectral_decay must be positive")
    n = grid.n
    order = _shell_order(n)
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((components, order.size, 2))
    z = np.zeros((components, n ** 3), dtype=complex)
    z[:, order] = draws[..., 0] + 1j * draws[..., 1]
    z = z.reshape((components,) + grid.shape)
    # Hermitian symmetrization on the interior cube (indices 1..n-1)
    inner = z[:, 1:, 1:, 1:]
    z[:, 1:, 1:, 1:] = 0.5 * (inner + np.conj(inner[:, ::-1, ::-1, ::-1]))
    z[:, grid.nyquist_mask] = 0.0
    z[(slice(None),) + grid.zero_index] = 0.0
    envelope = (1.0 + grid.wavenumber ** 2) ** (-0.5 * spectral_decay)
    return SpectralField(grid, z * envelope, real_valued=True)


def dilate_field(field: SpectralField, factor: int, target: GridSpec | None = None) -> SpectralField:
    """Move the coefficient at xi to factor * xi.

    The target grid defaults to the same frequency spacing with ``factor``
    times as many points per axis, so the coefficient l2 norm is preserved.
    """
    factor = int(factor)
    if factor < 1:
        raise ValueError("dilation factor must be a positive integer")
    grid = field.grid
    if target is None:
        target = GridSpec(grid.box_half_length, grid.n * factor)
    if not math.isclose(target.frequency_spacing, grid.frequency_spacing, rel_tol=1e-12):
        raise ValueError("target grid must share the frequency spacing")
    src = grid.indices_1d()
    dst = src * factor + target.n // 2
    c = field.coefficients
    support = np.any(c != 0, axis=0)
    used = np.nonzero(np.any(support, axis=(1, 2)) | np.any(support, axis=(0, 2)) | np.any(support, axis=(0, 1)))[0]
    idx = src[used] * factor
    if used.size and (idx.min() < -(target.n // 2) or idx.max() > target.n // 2 - 1):
        raise ValueError("dilated frequencies fall outside the target lattice")
    out = np.zeros((field.components,) + target.shape, dtype=complex)
    ok = (dst >= 0) & (dst < target.n)
    s = np.nonzero(ok)[0]
    out[np.ix_(range(field.components), dst[s], dst[s], dst[s])] = c[np.ix_(range(field.components), s, s, s)]
    return SpectralField(target, out, field.real_valued)


# ---------------------------------------------------------------------------
# binary dump


def write_field(path, field: SpectralField) -> None:
    """One JSON header line then little-endian float64 (re, im) pairs,
    component-major, then row-major in centered frequency order."""
    header = {
        "grid": field.grid.to_dict(),
        "components": field.components,
        "endianness": "little",
        "dtype": "float64-pairs",
        "real_valued": field.real_valued,
    }
    data = np.ascontiguousarray(field.coefficients).view(np.float64).astype("<f8", copy=False)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(data.tobytes())


def read_field(path) -> SpectralField:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        raw = fh.read()
    if header.get("endianness") != "little":
        raise ValueError("only little-endian dumps are supported")
    grid = GridSpec(**header["grid"])
    comps = int(header["components"])
    values = np.frombuffer(raw, dtype="<f8")
    expected = 2 * comps * grid.n ** 3
    if values.size != expected:
        raise ValueError(f"payload has {values.size} floats, expected {expected}")
    c = values.astype(np.float64).view(np.complex128).reshape((comps,) + grid.shape)
    return SpectralField(grid, c, bool(header.get("real_valued", False)))
