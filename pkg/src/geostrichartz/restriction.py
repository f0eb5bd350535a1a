"""
Fourier restriction on cones, spheres and the three dispersion surfaces.

Each 4D surface is the graph {(xi, phi(xi)) : xi in R^3} of a
zero-homogeneous phase with measure dxi/|xi|^2.  Restriction norms

    || fhat |_S ||_{L^2(S)}

are evaluated with tensor quadrature in spherical coordinates, where the
weight dxi/|xi|^2 becomes dr dcos(theta) dphi and no node ever sits on the
singular point xi = 0.  Slice coordinates (the level mu or alpha of the
phase) turn the same integral into an iterated one over cones, which gives
an independent second quadrature of every surface integral.

Test functions are either sums of Gaussian wave packets (closed-form
transforms) or samples on a periodic box whose lattice transform is
interpolated linearly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.fft
from scipy import integrate, ndimage, optimize

from .normlab import ScalingReport, fit_power_law

__all__ = [
    "SurfaceSpec",
    "QuadratureGrid",
    "BoxGrid",
    "LatticeFunction",
    "PacketSum",
    "SliceCheck",
    "WeightBoundResult",
    "EmbeddingReport",
    "partial_fourier_last",
    "box_lebesgue_norm",
    "surface_nodes",
    "surface_restrict_norm",
    "restriction_quotient",
    "cone_scaling_check",
    "sphere_scaling_check",
    "slicing_identity_check",
    "jacobian_residuals",
    "weight_bound_check",
    "WEIGHT_FAMILIES",
    "sobolev_embedding_check",
    "gaussian_derivative",
    "seed_packet",
    "SEED_BOX",
    "weight_at",
    "SeedStudy",
    "restriction_seed_study",
    "primitive_froude_study",
]


# ---------------------------------------------------------------------------
# surfaces


SURFACE_KINDS = ("sphere", "cone", "primitive", "boussinesq", "rotation")


@dataclass(frozen=True)
class SurfaceSpec:
    """A restriction surface with its measure.

    sphere: radius R in R^d with Hausdorff measure (total mass ~ R^(d-1));
    cone: (xi, rho |xi|) in R^3 with dxi/|xi|;
    primitive, boussinesq, rotation: (xi, phi(xi)) in R^4 with dxi/|xi|^2.
    """

    kind: str
    dimension: int = 4
    radius: float = 1.0
    rho: float = 1.0
    froude: float | None = None

    def __post_init__(self):
        if self.kind not in SURFACE_KINDS:
            raise ValueError(f"unknown surface kind {self.kind!r}")
        if self.kind == "primitive" and (self.froude is None or not self.froude > 1):
            raise ValueError(f"primitive surface needs F > 1, got {self.froude}")
        if self.kind == "cone" and not self.rho > 0:
            raise ValueError("cone opening rho must be positive")
        if self.kind == "sphere" and (self.dimension not in (2, 3) or not self.radius > 0):
            raise ValueError("sphere needs dimension 2 or 3 and a positive radius")

    @classmethod
    def sphere(cls, d: int = 2, R: float = 1.0) -> "SurfaceSpec":
        return cls("sphere", dimension=d, radius=float(R))

    @classmethod
    def cone(cls, rho: float = 1.0) -> "SurfaceSpec":
        return cls("cone", dimension=3, rho=float(rho))

    @classmethod
    def primitive(cls, F: float) -> "SurfaceSpec":
        return cls("primitive", froude=float(F))

    @classmethod
    def boussinesq(cls) -> "SurfaceSpec":
        return cls("boussinesq")

    @classmethod
    def rotation(cls) -> "SurfaceSpec":
        return cls("rotation")

    @property
    def is_graph4(self) -> bool:
        return self.kind in ("primitive", "boussinesq", "rotation")

    def graph(self, xi: np.ndarray) -> np.ndarray:
        """Last coordinate over xi of shape (N, 3) (or (N, 2) for the cone)."""
        xi = np.asarray(xi, dtype=float)
        if self.kind == "cone":
            return self.rho * np.linalg.norm(xi, axis=-1)
        h2 = xi[..., 0] ** 2 + xi[..., 1] ** 2
        r = np.sqrt(h2 + xi[..., 2] ** 2)
        if self.kind == "primitive":
            F = self.froude
            return np.sqrt(h2 + (F * xi[..., 2]) ** 2) / (F * r)
        if self.kind == "boussinesq":
            return np.sqrt(h2) / r
        if self.kind == "rotation":
            return xi[..., 2] / r
        raise ValueError("spheres are not graphs")

    # slice coordinates for the half xi3 > 0 -------------------------------

    @property
    def level_range(self) -> tuple[float, float]:
        if self.kind == "primitive":
            return (1.0 / self.froude, 1.0)
        if self.kind == "boussinesq":
            return (0.0, 1.0)
        if self.kind == "rotation":
            return (0.0, 1.0)
        raise ValueError("slice coordinates exist for the 4D surfaces only")

    def slice_height(self, r_h, level) -> np.ndarray:
        """xi3 > 0 on the level set through |xi_h| = r_h."""
        r_h, m = np.asarray(r_h, float), np.asarray(level, float)
        if self.kind == "primitive":
            e = self.froude ** -2
            return np.sqrt((m * m - e) / (1.0 - m * m)) * r_h
        if self.kind == "boussinesq":
            return np.sqrt(1.0 - m * m) / m * r_h
        if self.kind == "rotation":
            return m / np.sqrt(1.0 - m * m) * r_h
        raise ValueError("slice coordinates exist for the 4D surfaces only")

    def slice_jacobian(self, r_h, level) -> np.ndarray:
        """d xi3 / d level at fixed |xi_h|, closed form."""
        r_h, m = np.asarray(r_h, float), np.asarray(level, float)
        if self.kind == "primitive":
            e = self.froude ** -2
            return m * (1.0 - e) / ((1.0 - m * m) ** 1.5 * np.sqrt(m * m - e)) * r_h
        if self.kind == "boussinesq":
            return -r_h / (m ** 3 * (np.sqrt(1.0 - m * m) / m))
        if self.kind == "rotation":
            return r_h * (1.0 - m * m) ** -1.5
        raise ValueError("slice coordinates exist for the 4D surfaces only")

    def slice_modulus_sq(self, r_h, level) -> np.ndarray:
        """|xi|^2 on the level set, closed form."""
        r_h, m = np.asarray(r_h, float), np.asarray(level, float)
        if self.kind == "primitive":
            e = self.froude ** -2
            return r_h * r_h * (1.0 - e) / (1.0 - m * m)
        if self.kind == "boussinesq":
            return r_h * r_h / (m * m)
        if self.kind == "rotation":
            return r_h * r_h / (1.0 - m * m)
        raise ValueError("slice coordinates exist for the 4D surfaces only")


@dataclass(frozen=True)
class QuadratureGrid:
    """Node counts for graph quadrature.

    4D surfaces: Gauss-Legendre in r on (r_min, r_max) and in cos(theta)
    per half, uniform in the azimuth.  Cone: Gauss-Legendre in r, uniform
    azimuth.  Sphere: uniform azimuth (and Gauss-Legendre cos(theta) in 3D).
    Gauss nodes are interior, so ``margin`` (the smallest distance from a
    node to the singular point) is always positive.
    """

    r_max: float = 10.0
    n_radial: int = 48
    n_polar: int = 48
    n_azimuth: int = 64
    r_min: float = 0.0

    def __post_init__(self):
        if not self.r_max > self.r_min >= 0:
            raise ValueError("need 0 <= r_min < r_max")
        for name in ("n_radial", "n_polar", "n_azimuth"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def refined(self) -> "QuadratureGrid":
        return replace(
            self, n_radial=2 * self.n_radial, n_polar=2 * self.n_polar, n_azimuth=2 * self.n_azimuth
        )

    @property
    def margin(self) -> float:
        x, _ = _gauss(self.r_min, self.r_max, self.n_radial)
        return float(x.min())


def _gauss(a: float, b: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def _azimuth(m: int) -> tuple[np.ndarray, np.ndarray]:
    phi = (np.arange(m) + 0.5) * (2 * math.pi / m)
    return phi, np.full(m, 2 * math.pi / m)


def surface_nodes(surface: SurfaceSpec, quad: QuadratureGrid, half: str | None = None):
    """Points on the surface and quadrature weights of its measure.

    ``half`` restricts 4D surfaces and the 3D sphere to xi3 > 0 ('upper')
    or xi3 < 0 ('lower').  The two halves use mirrored nodes.
    """
    if surface.kind == "sphere":
        R = surface.radius
        phi, wp = _azimuth(quad.n_azimuth)
        if surface.dimension == 2:
            pts = R * np.stack([np.cos(phi), np.sin(phi)], axis=1)
            return pts, R * wp
        c, wc = _polar_rule(quad.n_polar, half)
        s = np.sqrt(1.0 - c * c)
        C, P = np.meshgrid(c, phi, indexing="ij")
        S = np.sqrt(1.0 - C * C)
        pts = R * np.stack([S * np.cos(P), S * np.sin(P), C], axis=-1).reshape(-1, 3)
        return pts, (R * R * np.outer(wc, wp)).ravel()
    r, wr = _gauss(quad.r_min, quad.r_max, quad.n_radial)
    phi, wp = _azimuth(quad.n_azimuth)
    if surface.kind == "cone":
        Rr, P = np.meshgrid(r, phi, indexing="ij")
        xi = np.stack([Rr * np.cos(P), Rr * np.sin(P)], axis=-1).reshape(-1, 2)
        # dxi/|xi| = dr dphi
        w = np.outer(wr, wp).ravel()
        return np.concatenate([xi, surface.graph(xi)[:, None]], axis=1), w
    c, wc = _polar_rule(quad.n_polar, half)
    Rr, C, P = np.meshgrid(r, c, phi, indexing="ij")
    S = np.sqrt(1.0 - C * C)
    xi = np.stack([Rr * S * np.cos(P), Rr * S * np.sin(P), Rr * C], axis=-1).reshape(-1, 3)
    # dxi/|xi|^2 = dr dcos(theta) dphi
    w = (wr[:, None, None] * wc[None, :, None] * wp[None, None, :]).ravel()
    return np.concatenate([xi, surface.graph(xi)[:, None]], axis=1), w


def _polar_rule(m: int, half: str | None):
    up, wu = _gauss(0.0, 1.0, m)
    if half == "upper":
        return up, wu
    if half == "lower":
        return -up, wu
    if half is None:
        return np.concatenate([-up[::-1], up]), np.concatenate([wu[::-1], wu])
    raise ValueError("half must be 'upper', 'lower' or None")


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class BoxGrid:
    """Periodic box prod_i [-L_i, L_i) with n_i points per axis (n_i even)."""

    half_lengths: tuple
    points: tuple

    def __post_init__(self):
        hl = tuple(float(x) for x in self.half_lengths)
        pts = tuple(int(n) for n in self.points)
        if len(hl) != len(pts):
            raise ValueError("half_lengths and points need the same length")
        if any(h <= 0 for h in hl) or any(n < 2 or n % 2 for n in pts):
            raise ValueError("half lengths must be positive and point counts even")
        object.__setattr__(self, "half_lengths", hl)
        object.__setattr__(self, "points", pts)

    @classmethod
    def cube(cls, d: int, L: float, n: int) -> "BoxGrid":
        return cls((L,) * d, (n,) * d)

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def spacings(self) -> np.ndarray:
        return np.array([2 * L / n for L, n in zip(self.half_lengths, self.points)])

    @property
    def frequency_spacings(self) -> np.ndarray:
        return np.array([math.pi / L for L in self.half_lengths])

    @property
    def cell(self) -> float:
        return float(np.prod(self.spacings))

    def axis(self, i: int) -> np.ndarray:
        return -self.half_lengths[i] + np.arange(self.points[i]) * self.spacings[i]

    def frequency_axis(self, i: int) -> np.ndarray:
        n = self.points[i]
        return (np.arange(n) - n // 2) * self.frequency_spacings[i]

    def mesh(self) -> np.ndarray:
        """Coordinates of shape (*points, d)."""
        return np.stack(np.meshgrid(*[self.axis(i) for i in range(self.dim)], indexing="ij"), axis=-1)


def _transform_axes(samples: np.ndarray, box: BoxGrid, axes: Sequence[int]) -> np.ndarray:
    """Unitary transform along ``axes`` with centered frequency order."""
    out = np.asarray(samples, dtype=complex)
    for ax in axes:
        n = box.points[ax]
        k = np.arange(n) - n // 2
        sign = np.where(k % 2 == 0, 1.0, -1.0)
        shape = [1] * out.ndim
        shape[ax] = n
        out = scipy.fft.fftshift(scipy.fft.fft(out, axis=ax), axes=ax) * sign.reshape(shape)
        out *= box.spacings[ax] / math.sqrt(2 * math.pi)
    return out


def partial_fourier_last(samples: np.ndarray, box: BoxGrid) -> np.ndarray:
    """Unitary transform in the last coordinate only.

    Returns values at (x_1, ..., x_{d-1}, rho_k) with rho_k on the
    frequency lattice of the last axis.  When the box satisfies
    dx * drho = (2 pi)/n with dx = drho (L^2 = pi n / 2) the two lattices
    coincide and applying the map twice reflects the last coordinate.
    """
    samples = np.asarray(samples)
    if samples.shape != box.points:
        raise ValueError(f"sample shape {samples.shape} does not match box {box.points}")
    return _transform_axes(samples, box, [box.dim - 1])


class LatticeFunction:
    """A function given by samples on a periodic box, with its lattice
    transform interpolated linearly between frequency nodes.

    ``abs2(points)`` returns the interpolated |fhat|^2, which is zero
    outside the frequency lattice.  Linear interpolation has nonnegative
    weights, so pointwise domination of |fhat| on the lattice carries over
    to every surface point.
    """

    interpolation_order = 1

    def __init__(self, box: BoxGrid, samples: np.ndarray | None = None, coefficients: np.ndarray | None = None):
        self.box = box
        if (samples is None) == (coefficients is None):
            raise ValueError("give exactly one of samples or coefficients")
        if samples is not None:
            samples = np.asarray(samples, dtype=complex)
            if samples.shape != box.points:
                raise ValueError("sample shape does not match the box")
            self.samples = samples
            self.coefficients = _transform_axes(samples, box, range(box.dim))
        else:
            coefficients = np.asarray(coefficients, dtype=complex)
            if coefficients.shape != box.points:
                raise ValueError("coefficient shape does not match the box")
            self.coefficients = coefficients
            self.samples = None
        self._power = np.abs(self.coefficients) ** 2

    @classmethod
    def from_callable(cls, f: Callable, box: BoxGrid) -> "LatticeFunction":
        return cls(box, samples=f(box.mesh()))

    def abs2(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.shape[-1] != self.box.dim:
            raise ValueError("point dimension does not match the box")
        idx = points / self.box.frequency_spacings + np.array(self.box.points) // 2
        return ndimage.map_coordinates(self._power, idx.T, order=1, mode="constant", cval=0.0)

    def lebesgue_norm(self, p: float) -> float:
        if self.samples is None:
            raise ValueError("physical samples are unavailable")
        return float(np.sum(np.abs(self.samples) ** p) * self.box.cell) ** (1.0 / p)

    def translated(self, shifts: Sequence[int]) -> "LatticeFunction":
        """Translate by whole grid steps (periodic)."""
        if self.samples is None:
            raise ValueError("physical samples are unavailable")
        return LatticeFunction(self.box, samples=np.roll(self.samples, tuple(shifts), axis=tuple(range(self.box.dim))))


@dataclass(frozen=True)
class PacketSum:
    """f(x) = sum_k a_k exp(-sum_i (x_i - y_ki)^2 / (2 s_ki^2)) exp(i eta_k . x).

    Its unitary transform is known in closed form.
    """

    amplitudes: np.ndarray
    centers: np.ndarray
    widths: np.ndarray
    modulations: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.amplitudes, dtype=complex))
        y = np.atleast_2d(np.asarray(self.centers, dtype=float))
        s = np.atleast_2d(np.asarray(self.widths, dtype=float))
        e = np.atleast_2d(np.asarray(self.modulations, dtype=float))
        if not (y.shape == s.shape == e.shape and y.shape[0] == a.size):
            raise ValueError("packet arrays have inconsistent shapes")
        if np.any(s <= 0):
            raise ValueError("packet widths must be positive")
        for name, v in zip(("amplitudes", "centers", "widths", "modulations"), (a, y, s, e)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def random(
        cls,
        seed: int,
        dim: int,
        count: int = 6,
        spread=2.0,
        width: float = 1.0,
        modulation=0.5,
        random_phases: bool = True,
    ) -> "PacketSum":
        """Unit-modulus amplitudes, centers in prod [-spread_i, spread_i] and
        modulations in prod [-modulation_i, modulation_i]; ``spread`` and
        ``modulation`` are scalars or per-axis sequences.  Without
        ``random_phases`` every amplitude is 1."""
        rng = np.random.default_rng(seed)
        spread = np.broadcast_to(np.asarray(spread, dtype=float), (dim,))
        modulation = np.broadcast_to(np.asarray(modulation, dtype=float), (dim,))
        a = np.exp(2j * math.pi * rng.random(count))
        if not random_phases:
            a = np.ones(count, dtype=complex)
        y = rng.uniform(-1.0, 1.0, (count, dim)) * spread
        e = rng.uniform(-1.0, 1.0, (count, dim)) * modulation
        return cls(a, y, np.full((count, dim), float(width)), e)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1], dtype=complex)
        for a, y, s, e in zip(self.amplitudes, self.centers, self.widths, self.modulations):
            arg = -0.5 * np.sum(((x - y) / s) ** 2, axis=-1) + 1j * (x @ e)
            out += a * np.exp(arg)
        return out

    def fhat(self, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape[:-1], dtype=complex)
        for a, y, s, e in zip(self.amplitudes, self.centers, self.widths, self.modulations):
            d = xi - e
            arg = -0.5 * np.sum((s * d) ** 2, axis=-1) - 1j * (d @ y)
            out += a * np.prod(s) * np.exp(arg)
        return out

    def abs2(self, xi: np.ndarray) -> np.ndarray:
        return np.abs(self.fhat(xi)) ** 2

    def translated(self, shift: Sequence[float]) -> "PacketSum":
        shift = np.asarray(shift, dtype=float)
        # f(x - a): centers move by a, modulation contributes exp(-i eta.a)
        a = self.amplitudes * np.exp(-1j * (self.modulations @ shift))
        return PacketSum(a, self.centers + shift, self.widths, self.modulations)

    def rescaled_axis(self, axis: int, factor: float) -> "PacketSum":
        """x -> f(..., factor * x_axis, ...)."""
        y, s, e = (np.array(v) for v in (self.centers, self.widths, self.modulations))
        y[:, axis] /= factor
        s[:, axis] /= factor
        e[:, axis] *= factor
        return PacketSum(self.amplitudes, y, s, e)

    def dilated(self, factor: float) -> "PacketSum":
        """x -> f(factor * x)."""
        return PacketSum(self.amplitudes, self.centers / factor, self.widths / factor, self.modulations * factor)

    def frequency_radius(self, tail: float = 9.0) -> float:
        """Radius outside which every packet transform is below exp(-tail^2/2)."""
        return float(np.max(np.linalg.norm(self.modulations, axis=1) + tail / np.min(self.widths, axis=1)))

    def spatial_radius(self, tail: float = 8.0) -> float:
        return float(np.max(np.abs(self.centers) + tail * self.widths))


def box_lebesgue_norm(f: Callable, box: BoxGrid, p: float, inner_p: float | None = None) -> float:
    """Riemann-sum L^p norm over the box.

    With ``inner_p`` the last coordinate is integrated first in L^inner_p,
    then the rest in L^p.
    """
    mesh_axes = [box.axis(i) for i in range(box.dim)]
    dx = box.spacings
    # evaluate slab by slab along the first axis to bound memory
    rest = np.stack(np.meshgrid(*mesh_axes[1:], indexing="ij"), axis=-1)
    total = 0.0
    for x0 in mesh_axes[0]:
        pts = np.concatenate([np.full(rest.shape[:-1] + (1,), x0), rest], axis=-1)
        a = np.abs(f(pts))
        if inner_p is None:
            total += float(np.sum(a ** p))
        else:
            inner = (np.sum(a ** inner_p, axis=-1) * dx[-1]) ** (1.0 / inner_p)
            total += float(np.sum(inner ** p))
    cell = float(np.prod(dx)) if inner_p is None else float(np.prod(dx[:-1]))
    return (total * cell) ** (1.0 / p)


def _abs2(f, points: np.ndarray) -> np.ndarray:
    if hasattr(f, "abs2"):
        return f.abs2(points)
    return np.abs(np.asarray(f(points))) ** 2


# ---------------------------------------------------------------------------
# restriction norms


def surface_restrict_norm(fhat, surface: SurfaceSpec, quad: QuadratureGrid, half: str | None = None) -> float:
    """L^2 norm of fhat on the surface by graph quadrature.

    ``fhat`` is a LatticeFunction, a PacketSum, or any callable returning
    transform values at points of shape (N, dim).
    """
    pts, w = surface_nodes(surface, quad, half)
    vals = _abs2(fhat, pts)
    return math.sqrt(float(np.sum(vals * w)))


def _default_box(f: PacketSum, n: int) -> BoxGrid:
    return BoxGrid.cube(f.dim, f.spatial_radius(), n)


def restriction_quotient(
    f,
    surface: SurfaceSpec,
    quad: QuadratureGrid | None = None,
    p: float = 6.0 / 5.0,
    box: BoxGrid | None = None,
    box_points: int = 40,
    mixed: bool = False,
) -> float:
    """Restriction norm divided by ||f||_{L^p}.

    With ``mixed`` the denominator is L^p in (x1, x2, x3) of the L^{3/2}
    norm in x4.  ``f`` is a PacketSum (norm on a Riemann grid over ``box``)
    or a LatticeFunction (norm over its own box).
    """
    if isinstance(f, LatticeFunction):
        if mixed:
            raise ValueError("mixed denominators need a PacketSum")
        den = f.lebesgue_norm(p)
        if quad is None:
            quad = QuadratureGrid(r_max=float(np.min(f.box.frequency_spacings * np.array(f.box.points) / 2)))
    else:
        if box is None:
            box = _default_box(f, box_points)
        den = box_lebesgue_norm(f, box, p, inner_p=1.5 if mixed else None)
        if quad is None:
            quad = QuadratureGrid(r_max=f.frequency_radius())
    if den == 0:
        raise ValueError("test function has zero norm")
    return surface_restrict_norm(f, surface, quad) / den


def cone_scaling_check(
    f_base: PacketSum,
    rho_list: Sequence[float],
    box: BoxGrid | None = None,
    quad: QuadratureGrid | None = None,
    tolerance: float = 0.02,
) -> ScalingReport:
    """Quotient on the cone C_rho of f_rho(x) = f(x1, x2, rho x3)."""
    rho_list = [float(r) for r in rho_list]
    if any(r <= 0 for r in rho_list):
        raise ValueError("cone openings must be positive")
    if f_base.dim != 3:
        raise ValueError("cone check needs a 3D test function")
    if box is None:
        box = BoxGrid.cube(3, 12.0, 128)
    if quad is None:
        quad = QuadratureGrid(r_max=f_base.frequency_radius(), n_radial=64, n_azimuth=64)
    q = []
    for rho in rho_list:
        f = f_base.rescaled_axis(2, rho)
        num = surface_restrict_norm(f, SurfaceSpec.cone(rho), quad)
        q.append(num / box_lebesgue_norm(f, box, 6.0 / 5.0))
    rep = ScalingReport("rho", rho_list, q, reference_slope=-1.0 / 6.0, tolerance=tolerance)
    if len(rho_list) >= 3:
        rep.fit()
    return rep


def sphere_scaling_check(
    f_base: PacketSum,
    radii: Sequence[float],
    box: BoxGrid | None = None,
    n_azimuth: int = 256,
    tolerance: float = 0.02,
) -> ScalingReport:
    """Quotient on the circle of radius R of f_R(x) = f(R x) in two dimensions."""
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii):
        raise ValueError("radii must be positive")
    if f_base.dim != 2:
        raise ValueError("sphere check uses a 2D test function")
    if box is None:
        box = BoxGrid.cube(2, 32.0, 1024)
    quad = QuadratureGrid(n_azimuth=n_azimuth)
    q = []
    for R in radii:
        f = f_base.dilated(R)
        num = surface_restrict_norm(f, SurfaceSpec.sphere(2, R), quad)
        q.append(num / box_lebesgue_norm(f, box, 6.0 / 5.0))
    rep = ScalingReport("radius", radii, q, reference_slope=1.0 / 6.0, tolerance=tolerance)
    if len(radii) >= 3:
        rep.fit()
    return rep


def seed_packet(seed: int, count: int = 8, spread: float = 4.0) -> PacketSum:
    """Unit-amplitude Gaussian packets in R^4 centered in the x4 = 0 hyperplane.

    Equal amplitudes without modulation keep the coherent low-frequency mass
    comparable across seeds, so the quotient measures the surface and not the
    draw.
    """
    return PacketSum.random(
        seed, 4, count=count, spread=(spread, spread, spread, 0.0), width=1.0, modulation=0.0, random_phases=False
    )


SEED_BOX = BoxGrid((12.0, 12.0, 12.0, 8.0), (40, 40, 40, 24))


@dataclass
class SeedStudy:
    surface: str
    seeds: list[int]
    quotients: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.quotients))

    @property
    def deviation(self) -> float:
        """Largest relative distance of a quotient from the mean."""
        m = self.mean
        return float(max(abs(q - m) for q in self.quotients) / m)


def restriction_seed_study(
    surface: SurfaceSpec, seeds: Sequence[int], box: BoxGrid | None = None, mixed: bool = False
) -> SeedStudy:
    """Restriction quotients of ``seed_packet`` over several seeds."""
    box = SEED_BOX if box is None else box
    q = [restriction_quotient(seed_packet(s), surface, box=box, mixed=mixed) for s in seeds]
    return SeedStudy(surface.kind, [int(s) for s in seeds], q)


def primitive_froude_study(F_list: Sequence[float], seed: int = 0, box: BoxGrid | None = None) -> ScalingReport:
    """Primitive-surface quotient against F with normalization (F-1)^(1/6)/F^(1/2)."""
    F_list = sorted(float(F) for F in F_list)
    if any(F <= 1 for F in F_list):
        raise ValueError("every Froude number must be > 1")
    box = SEED_BOX if box is None else box
    f = seed_packet(seed)
    q = [restriction_quotient(f, SurfaceSpec.primitive(F), box=box) for F in F_list]
    norm = [qi * (F - 1.0) ** (1.0 / 6.0) / math.sqrt(F) for qi, F in zip(q, F_list)]
    rep = ScalingReport("froude", F_list, q, normalized=norm)
    rep.extra["normalized_spread"] = rep.normalized_spread
    return rep


# ---------------------------------------------------------------------------
# slicing identities


def _default_integrand(points: np.ndarray) -> np.ndarray:
    """Smooth off-center Gaussian in R^4."""
    c = np.array([0.7, -0.4, 0.9])
    xi = points[..., :3]
    return np.exp(-0.5 * np.sum((xi - c) ** 2, axis=-1)) * (1.0 + 0.5 * np.cos(2.0 * points[..., 3]))


@dataclass(frozen=True)
class SliceCheck:
    surface: str
    level: int
    direct: float
    iterated: float
    residual: float


def _level_rule(surface: SurfaceSpec, m: int):
    """Nodes in the slice coordinate and weights including the slice
    density (the factor multiplying dxi_h/|xi_h| d level)."""
    if surface.kind == "primitive":
        a, b = surface.level_range
        th, wt = _gauss(0.0, math.pi, m)
        mu = a + (b - a) * (1.0 - np.cos(th)) / 2.0
        dmu = (b - a) * np.sin(th) / 2.0
        e = surface.froude ** -2
        dens = mu / np.sqrt((1.0 - mu * mu) * (mu * mu - e))
        return mu, wt * dmu * dens
    if surface.kind == "boussinesq":
        psi, wp = _gauss(0.0, math.pi / 2, m)
        return np.sin(psi), wp  # d alpha / sqrt(1 - alpha^2) = d psi
    if surface.kind == "rotation":
        th, wt = _gauss(0.0, math.pi / 2, m)
        return np.cos(th), wt  # d mu / sqrt(1 - mu^2) = d theta
    raise ValueError("slicing applies to the 4D surfaces")


def _max_horizontal(surface: SurfaceSpec, level: np.ndarray, R: float) -> np.ndarray:
    """Largest |xi_h| on the level set inside the ball |xi| < R."""
    if surface.kind == "primitive":
        e = surface.froude ** -2
        return R * np.sqrt((1.0 - level ** 2) / (1.0 - e))
    if surface.kind == "boussinesq":
        return level * R
    return np.sqrt(1.0 - level ** 2) * R


def _iterated_integral(surface: SurfaceSpec, h: Callable, R: float, m_level: int, m_r: int, m_phi: int) -> float:
    lev, wl = _level_rule(surface, m_level)
    phi, wp = _azimuth(m_phi)
    x, wx = _gauss(0.0, 1.0, m_r)
    total = 0.0
    for mu, w_mu in zip(lev, wl):
        rmax = float(_max_horizontal(surface, mu, R))
        r = rmax * x
        wr = rmax * wx
        Rr, P = np.meshgrid(r, phi, indexing="ij")
        z = surface.slice_height(Rr, mu)
        pts = np.stack([Rr * np.cos(P), Rr * np.sin(P), z, np.full_like(Rr, mu)], axis=-1)
        # dxi_h/|xi_h| = dr dphi
        total += w_mu * float(np.sum(h(pts) * np.outer(wr, wp)))
    return total


def slicing_identity_check(
    surface: SurfaceSpec,
    quad: QuadratureGrid | None = None,
    integrand: Callable = _default_integrand,
    level: int = 0,
) -> SliceCheck:
    """Compare the direct graph integral over xi3 > 0 with the iterated
    slice-then-cone integral of the same integrand, truncated to |xi| < r_max.

    ``level`` counts refinements of ``quad`` (each doubles every node count).
    """
    if not surface.is_graph4:
        raise ValueError("slicing applies to the 4D surfaces")
    if quad is None:
        quad = QuadratureGrid(r_max=8.0, n_radial=8, n_polar=8, n_azimuth=8)
    for _ in range(level):
        quad = quad.refined()
    pts, w = surface_nodes(surface, quad, half="upper")
    direct = float(np.sum(integrand(pts) * w))
    iterated = _iterated_integral(surface, integrand, quad.r_max, quad.n_polar, quad.n_radial, quad.n_azimuth)
    return SliceCheck(surface.kind, level, direct, iterated, abs(direct - iterated) / abs(direct))


def jacobian_residuals(surface: SurfaceSpec, samples: int = 50, seed: int = 0, step: float = 1e-3) -> dict:
    """Closed-form slice identities against the coordinate map.

    Returns the largest relative residual of the Jacobian against a centered
    five-point finite difference, of the |xi|^2 identity, and of the level itself
    (phi evaluated at the reconstructed point).
    """
    rng = np.random.default_rng(seed)
    a, b = surface.level_range
    pad = 0.02 * (b - a)
    lev = rng.uniform(a + pad, b - pad, samples)
    ang = rng.uniform(0, 2 * math.pi, samples)
    rh = rng.uniform(0.2, 3.0, samples)
    z = surface.slice_height(rh, lev)
    # step proportional to the distance to the nearest endpoint
    h = step * np.minimum(lev - a, b - lev)
    zf = lambda d: surface.slice_height(rh, lev + d)
    fd = (8 * (zf(h) - zf(-h)) - (zf(2 * h) - zf(-2 * h))) / (12 * h)
    jac = surface.slice_jacobian(rh, lev)
    xi = np.stack([rh * np.cos(ang), rh * np.sin(ang), z], axis=1)
    mod = np.sum(xi * xi, axis=1)
    return {
        "jacobian": float(np.max(np.abs(fd - jac) / np.abs(jac))),
        "modulus": float(np.max(np.abs(mod - surface.slice_modulus_sq(rh, lev)) / mod)),
        "level": float(np.max(np.abs(surface.graph(xi) - lev))),
    }


# ---------------------------------------------------------------------------
# weight inequalities


def _prim(F):
    return lambda m: m * (1 - m * m) ** (-1 / 3) * (m * m - F ** -2) ** (-2 / 3)


WEIGHT_FAMILIES = {
    # name: (needs F, interval(F), lhs(F), rhs(F), claimed constant(F) or None)
    "primitive-first": (
        True,
        lambda F: (1 / F, (1 / F + 1) / 2),
        _prim,
        lambda F: (lambda m: F / (F - 1) ** (1 / 3) * (m - 1 / F) ** (-2 / 3)),
        None,
    ),
    "primitive-second-raw": (
        True,
        lambda F: ((1 / F + 1) / 2, 1.0),
        lambda F: (lambda m: (m - 1 / F) ** (-2 / 3)),
        lambda F: (lambda m: (F / (F - 1)) ** (1 / 3) * (1 - m) ** (-1 / 3)),
        lambda F: 1.0,
    ),
    "primitive-second": (
        True,
        lambda F: ((1 / F + 1) / 2, 1.0),
        _prim,
        lambda F: (lambda m: (F / (F - 1)) ** (1 / 3) * (1 - m) ** (-2 / 3)),
        None,
    ),
    "boussinesq-blunt": (
        False,
        lambda F: (0.0, 0.5),
        lambda F: (lambda a: a ** (1 / 3)),
        lambda F: (lambda a: a ** (-2 / 3)),
        lambda F: 1.0,
    ),
    "boussinesq-second": (
        False,
        lambda F: (0.5, 1.0),
        lambda F: (lambda a: a ** (1 / 3) * (1 - a * a) ** (-2 / 3)),
        lambda F: (lambda a: (1 - a) ** (-2 / 3)),
        None,
    ),
    "rotation-end": (
        False,
        lambda F: (0.5, 1.0),
        lambda F: (lambda m: np.abs(m) ** (-1 / 3) * (1 - m) ** (-1 / 3) * (1 + m) ** (-1 / 3)),
        lambda F: (lambda m: (1 - m) ** (-1 / 3)),
        None,
    ),
    "rotation-middle": (
        False,
        lambda F: (-0.5, 0.5),
        lambda F: (lambda m: np.abs(m) ** (-1 / 3) * (1 - m * m) ** (-1 / 3)),
        lambda F: (lambda m: np.abs(m) ** (-1 / 3)),
        None,
    ),
    "rotation-blunt": (
        False,
        lambda F: (0.0, 1.0),
        lambda F: (lambda v: v ** (-1 / 3)),
        lambda F: (lambda v: v ** (-2 / 3)),
        lambda F: 1.0,
    ),
}


@dataclass(frozen=True)
class WeightBoundResult:
    family: str
    froude: float | None
    points: int
    constant: float
    refined_constant: float
    claimed_constant: float | None
    violation_at_claimed: float | None
    max_violation: float

    @property
    def stable(self) -> bool:
        return abs(self.refined_constant - self.constant) <= 1e-2 * self.constant

    @property
    def holds_with_claimed(self) -> bool | None:
        if self.violation_at_claimed is None:
            return None
        return self.violation_at_claimed <= 1.0 + 1e-9


def _midpoints(a: float, b: float, n: int) -> np.ndarray:
    return a + (np.arange(n) + 0.5) * (b - a) / n


def weight_bound_check(family: str, F: float | None = None, points: int = 10_000) -> WeightBoundResult:
    """Smallest constant C with LHS <= C RHS on an open midpoint grid.

    The grid never touches the excluded endpoints.  ``max_violation`` is
    max LHS / (C RHS), which is 1 by construction; ``violation_at_claimed``
    uses the constant written in the inequality, when there is one.
    """
    if family not in WEIGHT_FAMILIES:
        raise ValueError(f"unknown weight family {family!r}")
    needs_F, interval, lhs, rhs, claimed = WEIGHT_FAMILIES[family]
    if needs_F and (F is None or not F > 1):
        raise ValueError("this family needs F > 1")
    a, b = interval(F)
    L, Rf = lhs(F), rhs(F)

    def ratio(n):
        x = _midpoints(a, b, n)
        if family == "rotation-middle":
            x = x[x != 0]
        return L(x) / Rf(x)

    r = ratio(points)
    C = float(np.max(r))
    C2 = float(np.max(ratio(2 * points)))
    cl = claimed(F) if claimed is not None else None
    return WeightBoundResult(
        family,
        F if needs_F else None,
        points,
        C,
        C2,
        cl,
        float(np.max(r / cl)) if cl is not None else None,
        float(np.max(r / C)),
    )


def weight_at(family: str, x: float, F: float | None = None) -> tuple[float, float]:
    """(LHS, RHS) of a weight family at one point of its interval."""
    needs_F, interval, lhs, rhs, _ = WEIGHT_FAMILIES[family]
    a, b = interval(F)
    if not a < x < b and not (family.endswith("first") and a < x <= b):
        raise ValueError(f"{x} lies outside the open interval ({a}, {b})")
    return float(lhs(F)(x)), float(rhs(F)(x))


# ---------------------------------------------------------------------------
# dual Sobolev embedding in one dimension


def gaussian_derivative(k: int, scale: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """x -> d^k/dy^k exp(-y^2/2) at y = scale * x."""
    if k < 0:
        raise ValueError("derivative order must be >= 0")
    He = np.polynomial.hermite_e.HermiteE.basis(k)
    sgn = (-1) ** k
    return lambda x: sgn * He(scale * np.asarray(x, float)) * np.exp(-0.5 * (scale * np.asarray(x, float)) ** 2)


@dataclass
class EmbeddingReport:
    quotients: list[float]
    lebesgue: list[float]
    sobolev: list[float]

    @property
    def max_quotient(self) -> float:
        return max(self.quotients)


def _zeros(h: Callable, X: float, samples: int = 4001) -> list[float]:
    x = np.linspace(-X, X, samples)
    y = h(x)
    out = []
    for i in range(samples - 1):
        if y[i] == 0:
            out.append(float(x[i]))
        elif y[i] * y[i + 1] < 0:
            out.append(optimize.brentq(h, x[i], x[i + 1], xtol=1e-14))
    return out


def _lp_1d(h: Callable, X: float, p: float, tol: float) -> float:
    pts = [-X] + _zeros(h, X) + [X]
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a:
            total += integrate.quad(lambda x: abs(h(x)) ** p, a, b, epsabs=0, epsrel=tol, limit=200)[0]
    return total ** (1.0 / p)


def _fourier_1d(h: Callable, X: float, xi: float, tol: float) -> complex:
    """Unitary transform at one frequency by weighted (cos/sin) quadrature."""
    if xi == 0:
        re = integrate.quad(h, -X, X, epsabs=0, epsrel=tol, limit=200)[0]
        return re / math.sqrt(2 * math.pi)
    kw = dict(wvar=xi, epsabs=1e-15, epsrel=tol, limit=400)
    re = integrate.quad(h, -X, X, weight="cos", **kw)[0]
    im = -integrate.quad(h, -X, X, weight="sin", **kw)[0]
    return complex(re, im) / math.sqrt(2 * math.pi)


def _sobolev_1d(h: Callable, X: float, s: float, cutoff: float, tol: float) -> float:
    """||h||_{H^s-dot} for real h: 2 int_0^cutoff |hhat|^2 xi^(2s) dxi."""
    f = lambda xi: abs(_fourier_1d(h, X, xi, tol)) ** 2
    val = integrate.quad(f, 0.0, cutoff, weight="alg", wvar=(2 * s, 0.0), epsabs=0, epsrel=tol, limit=200)[0]
    return math.sqrt(2.0 * val)


def sobolev_embedding_check(
    functions: Sequence[tuple[Callable, float]],
    s: float = -1.0 / 3.0,
    p: float = 6.0 / 5.0,
    tol: float = 1e-10,
) -> EmbeddingReport:
    """||h||_{H^s-dot} / ||h||_{L^p} for real, rapidly decaying h.

    Each entry is (h, X): h is negligible outside [-X, X].  The transform
    is computed with oscillatory quadrature and the frequency integral is
    cut where |hhat| has decayed below 1e-12 of its peak.
    """
    if not s < 0:
        raise ValueError("this check is for negative Sobolev orders")
    with warnings.catch_warnings():
        # QUADPACK flags roundoff on integrands that cancel to ~0 (zero mean)
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return _embedding(functions, s, p, tol)


def _embedding(functions, s: float, p: float, tol: float) -> EmbeddingReport:
    q, lp, hs = [], [], []
    for h, X in functions:
        norm = _lp_1d(h, X, p, tol)
        if norm == 0:
            raise ValueError("zero test function")
        mass = integrate.quad(h, -X, X, epsabs=0, epsrel=tol, limit=200)[0]
        l1 = _lp_1d(h, X, 1.0, tol)
        if abs(mass) > 1e-8 * l1:
            raise ValueError("test function has nonzero mean; the homogeneous norm is undefined")
        cutoff = _frequency_cutoff(h, X, tol)
        sob = _sobolev_1d(h, X, s, cutoff, tol)
        lp.append(norm)
        hs.append(sob)
        q.append(sob / norm)
    return EmbeddingReport(q, lp, hs)


def _frequency_cutoff(h: Callable, X: float, tol: float, rel: float = 1e-12) -> float:
    grid = np.linspace(0.0, 200.0 / X * 8, 801)[1:]
    mags = np.array([abs(_fourier_1d(h, X, xi, 1e-8)) for xi in grid])
    peak = mags.max()
    if peak == 0:
        raise ValueError("test function has a vanishing transform")
    above = np.nonzero(mags > rel * peak)[0]
    return float(grid[min(above[-1] + 1, grid.size - 1)])
