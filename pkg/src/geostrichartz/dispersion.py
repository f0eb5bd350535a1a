"""
Linear geophysical operators in Fourier space.

Three systems are covered, each written as ``dU/dt = time_scale * G(D) U``
for a 4-component state U = (u1, u2, u3, theta) with divergence-free
velocity:

* primitive equations (stratification and rotation, Froude number F),
* stably stratified Boussinesq (Brunt-Vaisala frequency N),
* rotating Euler (Rossby number eps; temperature is passive).

On the divergence-free subspace the generator ``G(xi)`` is skew-Hermitian
with eigenvalues {0, +i p(xi), -i p(xi)}, where p is the zero-homogeneous
phase of the system.  The eigenvectors a0, a+, a- are computed per mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .spectral import GridSpec, SpectralField, TimeWindow

__all__ = [
    "DispersionKind",
    "SymbolMatrix",
    "EigenFrame",
    "SemigroupParts",
    "ModePropagator",
    "phase_value",
    "leray_project",
    "divergence_defect",
    "symbol_matrix",
    "generator_matrix",
    "eigen_decompose",
    "rotating_explicit_eigenvectors",
    "apply_phase_semigroup",
    "apply_full_semigroup",
    "duhamel",
    "duhamel_residual",
]

PRIMITIVE = "primitive"
BOUSSINESQ = "boussinesq"
ROTATING = "rotating"
VARIANTS = (PRIMITIVE, BOUSSINESQ, ROTATING)

_DIV_TOL = 1e-8


@dataclass(frozen=True)
class DispersionKind:
    """One of the three systems together with its physical parameter.

    Use the ``primitive``, ``boussinesq`` and ``rotating`` constructors.
    """

    variant: str
    froude: float | None = None
    brunt: float | None = None
    epsilon: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == PRIMITIVE:
            if self.froude is None or not self.froude > 1:
                raise ValueError(f"Froude number F must be > 1, got {self.froude}")
        if self.variant == BOUSSINESQ:
            if self.brunt is None or not self.brunt > 0:
                raise ValueError(f"Brunt-Vaisala frequency N must be > 0, got {self.brunt}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")

    @classmethod
    def primitive(cls, F: float, eps: float = 1.0) -> "DispersionKind":
        return cls(PRIMITIVE, froude=float(F), epsilon=float(eps))

    @classmethod
    def boussinesq(cls, N: float) -> "DispersionKind":
        return cls(BOUSSINESQ, brunt=float(N))

    @classmethod
    def rotating(cls, eps: float = 1.0) -> "DispersionKind":
        return cls(ROTATING, epsilon=float(eps))

    @property
    def time_scale(self) -> float:
        if self.variant == BOUSSINESQ:
            return float(self.brunt)
        return 1.0 / self.epsilon

    @property
    def phase_range(self) -> tuple[float, float]:
        if self.variant == PRIMITIVE:
            return (1.0 / self.froude, 1.0)
        if self.variant == BOUSSINESQ:
            return (0.0, 1.0)
        return (-1.0, 1.0)

    def phase(self, k1, k2, k3) -> np.ndarray:
        """Phase p(xi) at nonzero frequencies (broadcasting)."""
        k1, k2, k3 = np.broadcast_arrays(*(np.asarray(k, dtype=float) for k in (k1, k2, k3)))
        horiz2 = k1 * k1 + k2 * k2
        mod = np.sqrt(horiz2 + k3 * k3)
        if np.any(mod == 0):
            raise ValueError("phase is undefined at xi = 0")
        if self.variant == PRIMITIVE:
            F = self.froude
            return np.sqrt(horiz2 + (F * k3) ** 2) / (F * mod)
        if self.variant == BOUSSINESQ:
            return np.sqrt(horiz2) / mod
        return k3 / mod

    def to_dict(self) -> dict:
        d = {"variant": self.variant, "epsilon": self.epsilon}
        if self.froude is not None:
            d["froude"] = self.froude
        if self.brunt is not None:
            d["brunt"] = self.brunt
        return d


def phase_value(kind: DispersionKind, xi: Sequence[float]) -> float:
    """Phase of ``kind`` at a single nonzero frequency vector."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (3,):
        raise ValueError("xi must be a 3-vector")
    return float(kind.phase(*xi))


# ---------------------------------------------------------------------------
# Leray projection


def _projector_apply(k: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Project velocity coefficients u (3, ...) orthogonally to k (3, ...)."""
    k2 = np.sum(k * k, axis=0)
    safe = np.where(k2 == 0, 1.0, k2)
    dot = np.sum(k * u, axis=0) / safe
    return u - k * dot


def leray_project(field: SpectralField) -> SpectralField:
    """Remove the gradient part of the velocity; theta passes through."""
    if field.components not in (3, 4):
        raise ValueError(f"Leray projection needs 3 or 4 components, got {field.components}")
    k = field.grid.wavevectors
    out = np.array(field.coefficients)
    out[:3] = _projector_apply(k, out[:3])
    return SpectralField(field.grid, out, field.real_valued)


def divergence_defect(field: SpectralField) -> float:
    """Relative size of xi . u_hat, normalized by |xi| |u_hat| (l2 over modes)."""
    k = field.grid.wavevectors
    kmod = field.grid.wavenumber
    safe = np.where(kmod == 0, 1.0, kmod)
    dot = np.sum(k * field.coefficients[:3], axis=0) / safe
    ref = math.sqrt(float(np.sum(np.abs(field.coefficients[:3]) ** 2)))
    if ref == 0:
        return 0.0
    return math.sqrt(float(np.sum(np.abs(dot) ** 2))) / ref


# ---------------------------------------------------------------------------
# symbol matrices


@dataclass(frozen=True)
class SymbolMatrix:
    entries: np.ndarray
    system: str


def _as_frequency(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.shape[0] != 3:
        raise ValueError("frequency vectors have 3 leading components")
    if np.any(np.sum(xi * xi, axis=0) == 0):
        raise ValueError("symbol matrix is undefined at xi = 0")
    return xi


def _base_operator(kind: DispersionKind) -> np.ndarray:
    """Skew matrix B with dU/dt = -time_scale * P B P U."""
    B = np.zeros((4, 4))
    if kind.variant == PRIMITIVE:
        F = kind.froude
        B[0, 1], B[1, 0] = -1.0, 1.0
        B[2, 3], B[3, 2] = 1.0 / F, -1.0 / F
    elif kind.variant == BOUSSINESQ:
        B[2, 3], B[3, 2] = -1.0, 1.0
    else:
        # e3 x u = (-u2, u1, 0)
        B[0, 1], B[1, 0] = -1.0, 1.0
    return B


def _projector4(xi: np.ndarray) -> np.ndarray:
    """4x4 Leray projectors stacked along the trailing axes, shape (..., 4, 4)."""
    k = np.moveaxis(xi, 0, -1)
    k2 = np.sum(k * k, axis=-1)[..., None, None]
    P = np.zeros(k.shape[:-1] + (4, 4))
    P[..., :3, :3] = np.eye(3) - k[..., :, None] * k[..., None, :] / k2
    P[..., 3, 3] = 1.0
    return P


def generator_matrix(kind: DispersionKind, xi) -> np.ndarray:
    """G(xi) = -P B P, shape (..., 4, 4) for xi of shape (3, ...)."""
    xi = _as_frequency(xi)
    P = _projector4(xi)
    return -(P @ _base_operator(kind) @ P)


def symbol_matrix(kind: DispersionKind, xi) -> SymbolMatrix:
    """Closed-form symbol of each system at one frequency.

    primitive: the projected 4x4 matrix acting on divergence-free data
    (dU/dt = time_scale * matrix U there);
    boussinesq: the coupling matrix J before projection;
    rotating: A(xi) X = xi3 (xi x X) / |xi|^2 in the velocity block.
    """
    xi = _as_frequency(xi)
    if xi.shape != (3,):
        raise ValueError("symbol_matrix takes a single 3-vector")
    x1, x2, x3 = xi
    r2 = float(xi @ xi)
    M = np.zeros((4, 4))
    if kind.variant == PRIMITIVE:
        F = kind.froude
        M[0] = [x1 * x2 / r2, (x2 ** 2 + x3 ** 2) / r2, 0.0, x1 * x3 / (F * r2)]
        M[1] = [-(x1 ** 2 + x3 ** 2) / r2, -x1 * x2 / r2, 0.0, x2 * x3 / (F * r2)]
        M[2] = [x2 * x3 / r2, -x1 * x3 / r2, 0.0, -(x1 ** 2 + x2 ** 2) / (F * r2)]
        M[3] = [0.0, 0.0, 1.0 / F, 0.0]
    elif kind.variant == BOUSSINESQ:
        M[2, 3], M[3, 2] = -1.0, 1.0
    else:
        cross = np.array([[0.0, -x3, x2], [x3, 0.0, -x1], [-x2, x1, 0.0]])
        M[:3, :3] = x3 * cross / r2
    return SymbolMatrix(M, kind.variant)


# ---------------------------------------------------------------------------
# eigenframes


@dataclass(frozen=True)
class EigenFrame:
    """Eigen-elements of G(xi) on the divergence-free subspace.

    ``eigenvalues`` lists the values for (a0, a_plus, a_minus).
    """

    eigenvalues: np.ndarray
    a0: np.ndarray
    a_plus: np.ndarray
    a_minus: np.ndarray

    @property
    def vectors(self) -> np.ndarray:
        return np.stack([self.a0, self.a_plus, self.a_minus], axis=-1)


def _orthonormal_complement(xi: np.ndarray) -> np.ndarray:
    """Orthonormal basis (..., 4, 3) of vectors orthogonal to (xi, 0)."""
    k = np.moveaxis(xi, 0, -1)
    kmod = np.linalg.norm(k, axis=-1)
    kh = np.hypot(k[..., 0], k[..., 1])
    pole = kh == 0
    khs = np.where(pole, 1.0, kh)
    v1 = np.stack([-k[..., 1] / khs, k[..., 0] / khs, np.zeros_like(kh)], axis=-1)
    v1[pole] = [1.0, 0.0, 0.0]
    v2 = np.cross(k, v1) / kmod[..., None]
    v2[pole] = [0.0, 1.0, 0.0]
    Q = np.zeros(k.shape[:-1] + (4, 3))
    Q[..., :3, 0] = v1
    Q[..., :3, 1] = v2
    Q[..., 3, 2] = 1.0
    return Q


def _fix_phase(vectors: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Rotate each column so that its first non-negligible entry is real positive."""
    mags = np.abs(vectors)
    first = np.argmax(mags > tol, axis=-2)
    lead = np.take_along_axis(vectors, first[..., None, :], axis=-2)
    return vectors * (np.abs(lead) / np.where(lead == 0, 1.0, lead))


def _frames(kind: DispersionKind, xi: np.ndarray):
    """Batched eigenvectors (..., 4, 3) ordered (a_plus, a0, a_minus)."""
    G = generator_matrix(kind, xi)
    Q = _orthonormal_complement(xi)
    H = 1j * np.swapaxes(Q, -1, -2) @ G @ Q
    H = 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))
    # iG a = -omega a, so ascending eigenvalues are (-p, 0, p) <-> (a+, a0, a-)
    w, V = np.linalg.eigh(H)
    omega = -w
    vecs = Q.astype(complex) @ V
    # a negative phase (rotating, xi3 < 0) reverses the order
    flip = kind.phase(*xi) < 0
    if np.any(flip):
        omega = np.where(flip[..., None], omega[..., ::-1], omega)
        vecs = np.where(flip[..., None, None], vecs[..., ::-1], vecs)
    return omega, _fix_phase(vecs)


def eigen_decompose(kind: DispersionKind, xi) -> EigenFrame:
    """Numeric eigen-decomposition of G(xi) restricted to divergence-free vectors."""
    xi = _as_frequency(xi)
    if xi.shape != (3,):
        raise ValueError("eigen_decompose takes a single 3-vector")
    omega, vecs = _frames(kind, xi)
    ev = 1j * np.array([omega[1], omega[0], omega[2]])
    return EigenFrame(ev, vecs[:, 1], vecs[:, 0], vecs[:, 2])


def rotating_explicit_eigenvectors(xi) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form e1, e2 of A(xi) X = xi3 (xi x X)/|xi|^2 (3-vectors).

    A(xi) e1 = -i xi3/|xi| e1 and A(xi) e2 = +i xi3/|xi| e2.  Requires
    xi_h != 0.
    """
    x1, x2, x3 = np.asarray(xi, dtype=float)
    r = math.sqrt(x1 * x1 + x2 * x2 + x3 * x3)
    h2 = x1 * x1 + x2 * x2
    if h2 == 0:
        raise ValueError("explicit eigenvectors are singular when xi_h = 0")
    scale = 1.0 / (math.sqrt(2.0) * r * math.sqrt(h2))
    e1 = scale * np.array([x1 * x3 - 1j * x2 * r, x2 * x3 + 1j * x1 * r, -h2])
    e2 = scale * np.array([x1 * x3 + 1j * x2 * r, x2 * x3 - 1j * x1 * r, -h2])
    return e1, e2


# ---------------------------------------------------------------------------
# semigroups


def apply_phase_semigroup(g: SpectralField, kind: DispersionKind, t: float, sign: int = 1) -> SpectralField:
    """Multiply every coefficient by exp(sign i time_scale t p(xi)); xi = 0 untouched."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    grid = g.grid
    mask = grid.nonzero_mask
    k = grid.wavevectors[:, mask]
    m = np.ones(grid.shape, dtype=complex)
    m[mask] = np.exp(1j * (sign * kind.time_scale * t) * kind.phase(k[0], k[1], k[2]))
    return SpectralField(grid, g.coefficients * m, g.real_valued and kind.variant == ROTATING)


@dataclass(frozen=True)
class SemigroupParts:
    """S(t)U0 split into the oscillatory and quasigeostrophic components."""

    total: SpectralField
    plus: SpectralField
    minus: SpectralField
    quasigeostrophic: SpectralField


class ModePropagator:
    """Per-mode eigenframes of a system on a grid, reused across times.

    The frame at each nonzero mode is completed by the gradient direction
    (xi/|xi|, 0) so that it is a unitary 4x4 basis; the gradient part is
    carried unchanged.
    """

    def __init__(self, kind: DispersionKind, grid: GridSpec):
        self.kind = kind
        self.grid = grid
        mask = grid.nonzero_mask
        k = grid.wavevectors[:, mask]
        _, vecs = _frames(kind, k)
        kmod = np.linalg.norm(k, axis=0)
        grad = np.zeros((k.shape[1], 4, 1), dtype=complex)
        grad[:, :3, 0] = (k / kmod).T
        # columns: a_plus, a0, a_minus, gradient
        self._basis = np.concatenate([vecs, grad], axis=-1)
        p = kind.phase(k[0], k[1], k[2])
        self._omega = np.stack([p, np.zeros_like(p), -p, np.zeros_like(p)], axis=-1)
        self._mask = mask

    def coordinates(self, coefficients: np.ndarray) -> np.ndarray:
        """Eigen-coordinates (..., modes, 4) of 4-component coefficients (..., 4, n, n, n)."""
        c = np.asarray(coefficients)[..., self._mask]
        c = np.moveaxis(c, -2, -1)
        return np.einsum("mij,...mi->...mj", np.conj(self._basis), c)

    def reconstruct(self, coords: np.ndarray, columns=slice(None)) -> np.ndarray:
        """Coefficient array from eigen-coordinates, using selected basis columns."""
        B = self._basis[:, :, columns]
        c = coords[..., columns]
        vals = np.einsum("mij,...mj->...mi", B, c)
        out = np.zeros(coords.shape[:-2] + (4,) + self.grid.shape, dtype=complex)
        out[..., self._mask] = np.moveaxis(vals, -1, -2)
        return out

    def rotation(self, t) -> np.ndarray:
        """exp(i time_scale t omega) per mode and eigen-direction; t may be an array."""
        t = np.asarray(t, dtype=float)
        return np.exp(1j * self.kind.time_scale * t[..., None, None] * self._omega)

    def generator_apply(self, coefficients: np.ndarray) -> np.ndarray:
        """time_scale * G(D) applied to coefficient arrays (..., 4, n, n, n)."""
        c = self.coordinates(coefficients)
        return self.reconstruct(1j * self.kind.time_scale * self._omega * c)

    def evolve(self, U0: SpectralField, t: float) -> SemigroupParts:
        coeffs = _as_four_components(U0)
        zero = coeffs[(slice(None),) + self.grid.zero_index]
        c = self.coordinates(coeffs) * self.rotation(t)
        plus = self.reconstruct(c, [0])
        minus = self.reconstruct(c, [2])
        qg = self.reconstruct(c, [1, 3])
        qg[(slice(None),) + self.grid.zero_index] = zero
        total = plus + minus + qg
        k = U0.components
        wrap = lambda a: SpectralField(self.grid, a[:k], False)
        return SemigroupParts(wrap(total), wrap(plus), wrap(minus), wrap(qg))


def _as_four_components(U: SpectralField) -> np.ndarray:
    if U.components == 4:
        return U.coefficients
    if U.components == 3:
        pad = np.zeros((1,) + U.grid.shape, dtype=complex)
        return np.concatenate([U.coefficients, pad])
    raise ValueError(f"full semigroup needs 3 or 4 components, got {U.components}")


def apply_full_semigroup(
    U0: SpectralField,
    kind: DispersionKind,
    t: float,
    propagator: ModePropagator | None = None,
) -> SemigroupParts:
    """Evolve divergence-free data by the full linear system.

    Returns the total and its plus, minus and quasigeostrophic parts.
    Three-component data are treated as velocity with zero temperature.
    """
    defect = divergence_defect(U0)
    if defect > _DIV_TOL:
        raise ValueError(f"initial data is not divergence-free (relative defect {defect:.3e})")
    if propagator is None:
        propagator = ModePropagator(kind, U0.grid)
    elif propagator.kind != kind or propagator.grid != U0.grid:
        raise ValueError("propagator was built for a different system or grid")
    return propagator.evolve(U0, t)


# ---------------------------------------------------------------------------
# Duhamel


def _forcing_array(forcing, window: TimeWindow, grid: GridSpec | None) -> tuple[np.ndarray, GridSpec]:
    if isinstance(forcing, (list, tuple)):
        if len(forcing) != window.samples:
            raise ValueError(f"forcing has {len(forcing)} samples, window has {window.samples}")
        grid = forcing[0].grid
        arr = np.stack([_as_four_components(f) for f in forcing])
    else:
        arr = np.asarray(forcing)
        if arr.ndim != 5 or arr.shape[1] != 4:
            raise ValueError("forcing array must have shape (n_t, 4, n, n, n)")
        if arr.shape[0] != window.samples:
            raise ValueError(f"forcing has {arr.shape[0]} samples, window has {window.samples}")
        if grid is None:
            raise ValueError("grid is required with a raw forcing array")
    return arr, grid


def duhamel(
    forcing,
    kind: DispersionKind,
    window: TimeWindow,
    grid: GridSpec | None = None,
    propagator: ModePropagator | None = None,
) -> np.ndarray:
    """v(t) = int_0^t S(t - t') phi(t') dt' on the window samples.

    ``forcing`` is a list of 4-component fields or an array of shape
    (n_t, 4, n, n, n).  Integration uses the trapezoid rule from t = 0 in
    both time directions, so the window must contain t = 0 (odd n_t).
    Returns the coefficient trajectory with the same shape.
    """
    arr, grid = _forcing_array(forcing, window, grid)
    if window.samples % 2 == 0:
        raise ValueError("Duhamel integration needs an odd number of samples (t = 0 on the grid)")
    if propagator is None:
        propagator = ModePropagator(kind, grid)
    times = window.times
    mid = window.samples // 2
    c = propagator.coordinates(arr)
    w = c * propagator.rotation(-times)
    dt = window.step
    cum = np.zeros_like(w)
    inc = 0.5 * dt * (w[1:] + w[:-1])
    cum[mid + 1 :] = np.cumsum(inc[mid:], axis=0)
    cum[:mid] = -np.cumsum(inc[:mid][::-1], axis=0)[::-1]
    v = propagator.reconstruct(cum * propagator.rotation(times))
    return v


def duhamel_residual(
    trajectory: np.ndarray,
    forcing: np.ndarray,
    kind: DispersionKind,
    window: TimeWindow,
    grid: GridSpec,
    propagator: ModePropagator | None = None,
) -> float:
    """Relative l2 size of (v(t+dt) - v(t-dt))/(2 dt) - time_scale G v(t) - phi(t)
    over interior samples."""
    if propagator is None:
        propagator = ModePropagator(kind, grid)
    v = np.asarray(trajectory)
    phi = np.asarray(forcing)
    dt = window.step
    dv = (v[2:] - v[:-2]) / (2.0 * dt)
    res = dv - propagator.generator_apply(v[1:-1]) - phi[1:-1]
    ref = np.linalg.norm(phi[1:-1])
    if ref == 0:
        return float(np.linalg.norm(res))
    return float(np.linalg.norm(res) / ref)
