"""
Strichartz quotients, parameter sweeps and the small-xi3 sharpness family.

A quotient experiment evolves data ``g`` with a scalar phase semigroup,
measures the evolution in a mixed space-time norm over a finite window and
divides by a homogeneous Sobolev norm of ``g``.  Only power laws and
boundedness of normalized quotients are meaningful; absolute constants are
never estimated.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .dispersion import DispersionKind, ModePropagator, duhamel, duhamel_residual, leray_project
from .spectral import (
    SPACE_OUTER,
    TIME_OUTER,
    GridSpec,
    MixedNormSpec,
    SpectralField,
    TimeWindow,
    random_test_field,
    lebesgue_norm,
    sobolev_norm,
    stream_mixed_norm,
    synthesize,
)

__all__ = [
    "StrichartzSpec",
    "QuotientResult",
    "ScalingReport",
    "SharpnessFamily",
    "admissibility_check",
    "phase_trajectory",
    "strichartz_quotient",
    "strichartz_quotient_details",
    "fit_power_law",
    "epsilon_scaling_sweep",
    "brunt_scaling_sweep",
    "froude_dependence_sweep",
    "counterexample_modes",
    "build_counterexample",
    "counterexample_norm_ratio",
    "phase_expansion_ratio",
    "sharpness_lower_bound",
    "sharpness_quotient",
    "forcing_profile",
    "duhamel_quotient",
    "duhamel_convergence",
]


@dataclass(frozen=True)
class StrichartzSpec:
    """Exponents (p, q), Sobolev order s, semigroup sign and norm order."""

    p: float
    q: float
    s: float
    sign: int = 1
    order: str = TIME_OUTER

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        MixedNormSpec(self.p, self.q, self.order)

    @property
    def norm(self) -> MixedNormSpec:
        return MixedNormSpec(self.p, self.q, self.order)

    def with_sign(self, sign: int) -> "StrichartzSpec":
        return StrichartzSpec(self.p, self.q, self.s, sign, self.order)


def _recip(x: float) -> float:
    return 0.0 if math.isinf(x) else 1.0 / x


def admissibility_check(spec: StrichartzSpec) -> tuple[bool, bool]:
    """(scaling_ok, sobolev_ok): 2/p + 1/q <= 1/2 and s = 3(1/2 - 1/q)."""
    if spec.p < 2 or spec.q < 2:
        raise ValueError("admissibility is defined for p, q >= 2")
    scaling_ok = 2.0 * _recip(spec.p) + _recip(spec.q) <= 0.5 + 1e-15
    sobolev_ok = abs(spec.s - 3.0 * (0.5 - _recip(spec.q))) <= 1e-12
    return bool(scaling_ok), bool(sobolev_ok)


# ---------------------------------------------------------------------------
# quotients


def phase_trajectory(
    g: SpectralField, kind: DispersionKind, window: TimeWindow, sign: int = 1
) -> Iterator[np.ndarray]:
    """Yield physical samples of exp(sign i t p(D)) g at each window time."""
    grid = g.grid
    mask = grid.nonzero_mask
    k = grid.wavevectors[:, mask]
    rate = sign * kind.time_scale * kind.phase(k[0], k[1], k[2])
    coeffs = g.coefficients
    buf = np.empty_like(coeffs)
    for t in window.times:
        buf[...] = coeffs
        buf[:, mask] *= np.exp(1j * t * rate)
        yield synthesize(buf, grid)


@dataclass(frozen=True)
class QuotientResult:
    quotient: float
    numerator: float
    denominator: float
    tail: float

    def as_dict(self) -> dict:
        return {
            "quotient": self.quotient,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "tail": self.tail,
        }


def strichartz_quotient_details(
    g: SpectralField, kind: DispersionKind, spec: StrichartzSpec, window: TimeWindow
) -> QuotientResult:
    """Quotient plus the window-tail indicator.

    ``tail`` is the largest spatial L^q norm at t = +-T relative to the
    largest one over the window; values near 1 mean the window has not
    captured the decay.
    """
    zero = g.coefficients[(slice(None),) + g.grid.zero_index]
    if np.any(np.abs(zero) > 0):
        raise ValueError("Strichartz data must have zero mean")
    den = sobolev_norm(g, spec.s)
    if den == 0:
        raise ValueError("Sobolev norm of the data vanishes")
    cell = g.grid.physical_cell_volume
    comps = g.components > 1
    spatial: list[float] = []

    def tracked():
        for u in phase_trajectory(g, kind, window, spec.sign):
            a = np.sqrt(np.sum(np.abs(u) ** 2, axis=0)) if comps else np.abs(u[0])
            spatial.append(lebesgue_norm(a, spec.q, cell))
            yield a

    num = stream_mixed_norm(tracked(), spec.norm, window, cell, has_components=False)
    peak = max(spatial)
    tail = max(spatial[0], spatial[-1]) / peak if peak > 0 else 0.0
    return QuotientResult(num / den, num, den, tail)


def strichartz_quotient(
    g: SpectralField, kind: DispersionKind, spec: StrichartzSpec, window: TimeWindow
) -> float:
    """Mixed space-time norm of the evolution divided by the Sobolev norm of g."""
    return strichartz_quotient_details(g, kind, spec, window).quotient


# ---------------------------------------------------------------------------
# fitting and sweeps


def fit_power_law(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line through (log x, log y).

    Returns (slope, intercept, rms residual).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    if x.size < 3:
        raise ValueError("a power-law fit needs at least 3 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid ** 2)))


@dataclass
class ScalingReport:
    """Sweep values with a fitted log-log slope."""

    parameter: str
    values: list[float]
    quotients: list[float]
    reference_slope: float | None = None
    tolerance: float | None = None
    slope: float | None = None
    intercept: float | None = None
    residual: float | None = None
    normalized: list[float] | None = None
    tails: list[float] | None = None
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool | None:
        if self.reference_slope is None or self.tolerance is None or self.slope is None:
            return None
        return abs(self.slope - self.reference_slope) <= self.tolerance

    @property
    def normalized_spread(self) -> float | None:
        """max/min of the normalized values."""
        if not self.normalized:
            return None
        return max(self.normalized) / min(self.normalized)

    def fit(self) -> "ScalingReport":
        self.slope, self.intercept, self.residual = fit_power_law(self.values, self.quotients)
        return self

    def rows(self) -> list[dict]:
        out = []
        for i, (v, q) in enumerate(zip(self.values, self.quotients)):
            row = {"parameter": v, "quotient": q}
            row["normalized_quotient"] = self.normalized[i] if self.normalized else q
            out.append(row)
        return out

    def summary(self) -> dict:
        return {
            "parameter": self.parameter,
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "reference_slope": self.reference_slope,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "normalized_spread": self.normalized_spread,
            "max_tail": max(self.tails) if self.tails else None,
            **self.extra,
        }


def _parallel_map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


_DEFAULT_SPEC = StrichartzSpec(6, 6, 1.0)


def epsilon_scaling_sweep(
    g: SpectralField,
    eps_list: Sequence[float],
    window_ref: TimeWindow,
    F: float | None = 2.0,
    spec: StrichartzSpec = _DEFAULT_SPEC,
    system: str = "primitive",
    workers: int = 1,
    tolerance: float = 0.02,
) -> ScalingReport:
    """Quotient against eps with windows of half-width eps * T_ref.

    ``system`` is "primitive" (uses F) or "rotating".
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise ValueError("an epsilon sweep needs at least 3 values")
    if any(e <= 0 for e in eps_list):
        raise ValueError("epsilon values must be positive")

    def kind_for(e):
        if system == "primitive":
            return DispersionKind.primitive(F, e)
        if system == "rotating":
            return DispersionKind.rotating(e)
        raise ValueError(f"epsilon sweep supports primitive or rotating, not {system!r}")

    def job(e):
        return strichartz_quotient_details(g, kind_for(e), spec, window_ref.scaled(e))

    res = _parallel_map(job, eps_list, workers)
    rep = ScalingReport(
        "epsilon",
        eps_list,
        [r.quotient for r in res],
        reference_slope=1.0 / 6.0,
        tolerance=tolerance,
        tails=[r.tail for r in res],
        extra={"system": system},
    )
    return rep.fit()


def brunt_scaling_sweep(
    g: SpectralField,
    N_list: Sequence[float],
    window_ref: TimeWindow,
    spec: StrichartzSpec = _DEFAULT_SPEC,
    workers: int = 1,
    tolerance: float = 0.02,
) -> ScalingReport:
    """Boussinesq quotient against N with windows of half-width T_ref / N."""
    N_list = [float(n) for n in N_list]
    if len(N_list) < 3:
        raise ValueError("a Brunt-Vaisala sweep needs at least 3 values")

    def job(N):
        return strichartz_quotient_details(g, DispersionKind.boussinesq(N), spec, window_ref.scaled(1.0 / N))

    res = _parallel_map(job, N_list, workers)
    rep = ScalingReport(
        "brunt",
        N_list,
        [r.quotient for r in res],
        reference_slope=-1.0 / 6.0,
        tolerance=tolerance,
        tails=[r.tail for r in res],
        extra={"system": "boussinesq"},
    )
    return rep.fit()


def froude_dependence_sweep(
    g: SpectralField,
    F_list: Sequence[float],
    window: TimeWindow,
    spec: StrichartzSpec = _DEFAULT_SPEC,
    eps: float = 1.0,
    workers: int = 1,
) -> ScalingReport:
    """Quotient against F with the normalization (F-1)^(1/6) / F^(1/2).

    ``extra`` records the max/min spread of the normalized values and
    whether the raw quotient increases as F decreases.
    """
    F_list = sorted(float(f) for f in F_list)
    if not F_list:
        raise ValueError("empty Froude sweep")
    if any(f <= 1 for f in F_list):
        raise ValueError("every Froude number must be > 1")

    def job(F):
        return strichartz_quotient_details(g, DispersionKind.primitive(F, eps), spec, window)

    res = _parallel_map(job, F_list, workers)
    q = [r.quotient for r in res]
    norm = [qi * (F - 1.0) ** (1.0 / 6.0) / math.sqrt(F) for qi, F in zip(q, F_list)]
    monotone = all(a > b for a, b in zip(q, q[1:]))
    rep = ScalingReport(
        "froude",
        F_list,
        q,
        normalized=norm,
        tails=[r.tail for r in res],
        extra={"raw_increases_toward_one": monotone},
    )
    if len(F_list) >= 3:
        rep.fit()
    rep.extra["normalized_spread"] = rep.normalized_spread
    return rep


# ---------------------------------------------------------------------------
# sharpness family


@dataclass(frozen=True)
class SharpnessFamily:
    """Frequencies with |xi1|, |xi2| in (R/2, R), |xi3| in (delta R/2, delta R)
    and the space-time box where the centered evolution stays coherent."""

    delta: float
    R: float = 1.0
    N_phase: int = 10

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if not self.R > 0:
            raise ValueError("R must be positive")
        if int(self.N_phase) != self.N_phase or self.N_phase < 1:
            raise ValueError("N_phase must be a positive integer")

    @property
    def frequency_bounds(self) -> tuple[tuple[float, float], ...]:
        R, d = self.R, self.delta
        return ((R / 2, R), (R / 2, R), (d * R / 2, d * R))

    @property
    def space_time_bounds(self) -> tuple[tuple[float, float], ...]:
        """|x1|, |x2|, |x3|, |t| ranges."""
        N, R, d = self.N_phase, self.R, self.delta
        return (
            (1 / (2 * N * R), 1 / (N * R)),
            (1 / (2 * N * R), 1 / (N * R)),
            (1 / (2 * N * d * R), 1 / (N * d * R)),
            (1 / (2 * N * d * d), 1 / (N * d * d)),
        )

    def contains(self, xi) -> np.ndarray:
        """Membership of frequency vectors (3, ...) in the family's set."""
        xi = np.abs(np.asarray(xi, dtype=float))
        ok = np.ones(xi.shape[1:], dtype=bool)
        for a, (lo, hi) in zip(xi, self.frequency_bounds):
            ok &= (a > lo) & (a < hi)
        return ok

    @property
    def measure(self) -> float:
        """Lebesgue measure of the frequency set (8 octants)."""
        out = 8.0
        for lo, hi in self.frequency_bounds:
            out *= hi - lo
        return out


def _axis_points(lo: float, hi: float, spacing: float) -> np.ndarray:
    """Lattice points k * spacing with lo < |k spacing| < hi, both signs."""
    kmin = math.floor(lo / spacing) + 1
    kmax = math.ceil(hi / spacing) - 1
    pos = np.arange(kmin, kmax + 1) * spacing
    pos = pos[(pos > lo) & (pos < hi)]
    return np.concatenate([-pos[::-1], pos])


def counterexample_modes(family: SharpnessFamily, spacing: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """1D lattice coordinates (xi1, xi2, xi3) whose product is the family's set
    intersected with the lattice of the given spacing."""
    axes = tuple(_axis_points(lo, hi, spacing) for lo, hi in family.frequency_bounds)
    for name, a in zip(("xi1", "xi2", "xi3"), axes):
        if a.size < 4:
            raise ValueError(f"lattice spacing {spacing:g} leaves fewer than 2 points in the {name} range")
    return axes


def build_counterexample(family: SharpnessFamily, grid) -> SpectralField:
    """Indicator coefficients of the family's set on a grid.

    The set is symmetric under xi -> -xi so the field is Hermitian.
    """
    counterexample_modes(family, grid.frequency_spacing)
    mask = family.contains(grid.wavevectors)
    mask &= ~grid.nyquist_mask
    return SpectralField(grid, mask.astype(complex)[None], real_valued=True)


def counterexample_norm_ratio(family: SharpnessFamily, s: float, spacing: float) -> float:
    """||g||^2 in H^s-dot divided by R^(3+2s) delta, by a direct lattice sum."""
    k1, k2, k3 = counterexample_modes(family, spacing)
    h2 = (k1[:, None] ** 2 + k2[None, :] ** 2).ravel()
    total = 0.0
    for z in k3:
        total += float(np.sum((h2 + z * z) ** s))
    total *= spacing ** 3
    return total / (family.R ** (3 + 2 * s) * family.delta)


def phase_expansion_ratio(family: SharpnessFamily, F: float, spacing: float) -> tuple[float, float]:
    """min and max over the lattice set of (p_F - 1/F) / ((F^2-1) xi3^2 / (F |xi|^2))."""
    if not F > 1:
        raise ValueError("F must be > 1")
    k1, k2, k3 = counterexample_modes(family, spacing)
    K1, K2, K3 = np.meshgrid(k1, k2, k3, indexing="ij")
    kind = DispersionKind.primitive(F)
    r2 = K1 ** 2 + K2 ** 2 + K3 ** 2
    ratio = (kind.phase(K1, K2, K3) - 1.0 / F) / ((F * F - 1.0) * K3 ** 2 / (F * r2))
    return float(ratio.min()), float(ratio.max())


def _gauss_symmetric(lo: float, hi: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on (-hi, -lo) U (lo, hi)."""
    x, w = np.polynomial.legendre.leggauss(m)
    x = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    w = 0.5 * (hi - lo) * w
    return np.concatenate([-x[::-1], x]), np.concatenate([w[::-1], w])


def _tensor(*rules):
    nodes = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    weights = rules[0][1]
    for r in rules[1:]:
        weights = np.multiply.outer(weights, r[1])
    return [n.ravel() for n in nodes], weights.ravel()


def sharpness_lower_bound(
    family: SharpnessFamily,
    kind: DispersionKind,
    spec: StrichartzSpec,
    nodes: int = 6,
    return_phase: bool = False,
):
    """Mixed norm of the centered evolution of the indicator data over the
    space-time box of the family.

    The data is the inverse transform of the indicator of the frequency set;
    the evolution is rotated by exp(-i t/F) so that the phase nearly vanishes
    on the box.  Integrals over the frequency set and over the box use
    Gauss-Legendre rules with ``nodes`` points per half-interval.  Raises if
    the phase bound on the box is not below pi/2.
    """
    if kind.variant != "primitive":
        raise ValueError("the sharpness family is defined for the primitive system")
    F = kind.froude
    ts = kind.time_scale
    fb = family.frequency_bounds
    (k1, k2, k3), wk = _tensor(*(_gauss_symmetric(lo, hi, nodes) for lo, hi in fb))
    sb = family.space_time_bounds
    (x1, x2, x3), wx = _tensor(*(_gauss_symmetric(lo, hi, nodes) for lo, hi in sb[:3]))
    tt, wt = _gauss_symmetric(sb[3][0], sb[3][1], nodes)

    rate = spec.sign * ts * (kind.phase(k1, k2, k3) - 1.0 / F)
    # analytic bound of |x.xi + t (p_F - 1/F)| on the box
    bound = sum(b[1] * f[1] for b, f in zip(sb[:3], fb)) + sb[3][1] * ts * (F * F - 1) / F * family.delta ** 2
    if bound >= math.pi / 2:
        raise ValueError(
            f"N_phase={family.N_phase} too small: phase bound {bound:.3f} is not below pi/2"
        )
    X = np.stack([x1, x2, x3], axis=1)
    K = np.stack([k1, k2, k3], axis=0)
    xk = X @ K
    inner = np.empty(tt.size)
    q = spec.q
    norm = (2 * math.pi) ** -1.5
    for i, t in enumerate(tt):
        u = norm * (np.exp(1j * (xk + t * rate[None, :])) @ wk)
        a = np.abs(u)
        inner[i] = np.max(a) if math.isinf(q) else float(np.sum(wx * a ** q)) ** (1.0 / q)
    p = spec.p
    if math.isinf(p):
        value = float(np.max(inner))
    else:
        value = float(np.sum(wt * inner ** p)) ** (1.0 / p)
    if return_phase:
        return value, bound
    return value


def sharpness_quotient(
    family: SharpnessFamily, kind: DispersionKind, spec: StrichartzSpec, nodes: int = 6
) -> float:
    """sharpness_lower_bound divided by the H^s-dot norm of the indicator data."""
    fb = family.frequency_bounds
    (k1, k2, k3), wk = _tensor(*(_gauss_symmetric(lo, hi, nodes) for lo, hi in fb))
    hs = math.sqrt(float(np.sum(wk * (k1 ** 2 + k2 ** 2 + k3 ** 2) ** spec.s)))
    return sharpness_lower_bound(family, kind, spec, nodes) / hs


# ---------------------------------------------------------------------------
# inhomogeneous estimate


def forcing_profile(seed: int, grid: GridSpec, window: TimeWindow, decay: float = 4.0) -> np.ndarray:
    """Divergence-free forcing phi(t) = exp(-t^2/2) cos(t) P g + t exp(-t^2/2) P h.

    g and h are independent random 4-component fields; the result has shape
    (n_t, 4, n, n, n).
    """
    g = leray_project(random_test_field(seed, decay, grid, components=4)).coefficients
    h = leray_project(random_test_field(seed + 7919, decay, grid, components=4)).coefficients
    t = window.times[:, None, None, None, None]
    env = np.exp(-0.5 * t * t)
    return env * np.cos(t) * g[None] + t * env * h[None]


def duhamel_quotient(
    forcing: np.ndarray,
    kind: DispersionKind,
    window: TimeWindow,
    grid: GridSpec,
    spec: StrichartzSpec = StrichartzSpec(6, 6, 1.0),
    propagator: ModePropagator | None = None,
) -> QuotientResult:
    """||v||_{L^p_t L^q_x} / ||phi||_{L^1_t H^s-dot} for the Duhamel trajectory v."""
    v = duhamel(forcing, kind, window, grid, propagator)
    cell = grid.physical_cell_volume
    samples = (synthesize(c, grid) for c in v)
    num = stream_mixed_norm(samples, spec.norm, window, cell, has_components=True)
    per_t = np.array([
        math.sqrt(sum(sobolev_norm(SpectralField(grid, c[i:i + 1]), spec.s) ** 2 for i in range(4)))
        for c in forcing
    ])
    den = float(np.sum(window.weights * per_t))
    if den == 0:
        raise ValueError("forcing has zero norm")
    last = max(lebesgue_norm(np.sqrt(np.sum(np.abs(synthesize(v[i], grid)) ** 2, axis=0)), spec.q, cell)
               for i in (0, -1))
    return QuotientResult(num / den, num, den, last / num if num > 0 else 0.0)


def duhamel_convergence(
    seed: int,
    kind: DispersionKind,
    grid: GridSpec,
    half_width: float = 2.0,
    samples: Sequence[int] = (33, 65, 129),
    decay: float = 4.0,
) -> tuple[list[float], list[float], float]:
    """Finite-difference PDE residual of the Duhamel trajectory as dt is halved.

    Returns (steps, residuals, observed order) with the order fitted on
    log residual against log dt.
    """
    propagator = ModePropagator(kind, grid)
    steps, res = [], []
    for n_t in samples:
        w = TimeWindow(half_width, n_t)
        phi = forcing_profile(seed, grid, w, decay)
        v = duhamel(phi, kind, w, grid, propagator)
        steps.append(w.step)
        res.append(duhamel_residual(v, phi, kind, w, grid, propagator))
    order = fit_power_law(steps, res)[0] if len(steps) >= 3 else math.log(res[0] / res[-1]) / math.log(steps[0] / steps[-1])
    return steps, res, order
