import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from geostrichartz.dispersion import DispersionKind
from geostrichartz.normlab import (
    ScalingReport,
    SharpnessFamily,
    StrichartzSpec,
    admissibility_check,
    brunt_scaling_sweep,
    build_counterexample,
    counterexample_norm_ratio,
    duhamel_convergence,
    duhamel_quotient,
    epsilon_scaling_sweep,
    fit_power_law,
    forcing_profile,
    froude_dependence_sweep,
    phase_expansion_ratio,
    sharpness_lower_bound,
    sharpness_quotient,
    strichartz_quotient,
    strichartz_quotient_details,
)
from geostrichartz.spectral import SPACE_OUTER, GridSpec, SpectralField, TimeWindow, random_test_field

from conftest import single_mode


# ---------------------------------------------------------------- admissibility


@pytest.mark.parametrize(
    "p, q, s, expected",
    [
        (6, 6, 1.0, (True, True)),
        (4, 4, 0.75, (False, True)),
        (math.inf, 2, 0.0, (True, True)),
        (8, 4, 0.75, (True, True)),
        (6, 6, 0.9, (True, False)),
    ],
)
def test_admissibility_examples(p, q, s, expected):
    assert admissibility_check(StrichartzSpec(p, q, s)) == expected


def test_admissibility_rejects_small_exponents():
    with pytest.raises(ValueError):
        admissibility_check(StrichartzSpec(1.5, 6, 1.0))


def test_spec_rejects_bad_sign():
    with pytest.raises(ValueError):
        StrichartzSpec(6, 6, 1.0, sign=0)


# ---------------------------------------------------------------- quotients


@pytest.mark.parametrize("kind", [DispersionKind.primitive(2.0), DispersionKind.boussinesq(1.0), DispersionKind.rotating()])
def test_energy_endpoint_quotient_is_one(grid8, kind):
    g = single_mode(grid8, (1, 2, -1), 0.7 - 0.2j)
    q = strichartz_quotient(g, kind, StrichartzSpec(math.inf, 2, 0.0), TimeWindow(3.0, 9))
    assert q == pytest.approx(1.0, abs=1e-12)


def test_quotient_rejects_mean_and_zero(grid8):
    spec, w = StrichartzSpec(6, 6, 1.0), TimeWindow(1.0, 5)
    with pytest.raises(ValueError):
        strichartz_quotient(single_mode(grid8, (0, 0, 0)), DispersionKind.rotating(), spec, w)
    zero = SpectralField(grid8, np.zeros(grid8.shape))
    with pytest.raises(ValueError):
        strichartz_quotient(zero, DispersionKind.rotating(), spec, w)


@given(
    re=st.floats(-5, 5).filter(lambda x: abs(x) > 1e-3),
    im=st.floats(-5, 5),
    seed=st.integers(0, 50),
)
def test_quotient_scalar_invariance(re, im, seed):
    grid = GridSpec(math.pi, 8)
    g = random_test_field(seed, 2.0, grid)
    w = TimeWindow(2.0, 9)
    kind = DispersionKind.primitive(2.0)
    spec = StrichartzSpec(6, 6, 1.0)
    base = strichartz_quotient(g, kind, spec, w)
    scaled = SpectralField(grid, (re + 1j * im) * g.coefficients)
    assert strichartz_quotient(scaled, kind, spec, w) == pytest.approx(base, rel=1e-12)


@pytest.mark.parametrize("kind", [DispersionKind.primitive(3.0), DispersionKind.boussinesq(2.0)])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_quotient_sign_symmetry_for_real_data(grid16, kind, seed):
    # phases of even symbols: conjugation maps one sign onto the other
    g = random_test_field(seed, 3.0, grid16)
    spec = StrichartzSpec(6, 6, 1.0)
    w = TimeWindow(4.0, 17)
    plus = strichartz_quotient(g, kind, spec, w)
    minus = strichartz_quotient(g, kind, spec.with_sign(-1), w)
    assert minus == pytest.approx(plus, rel=1e-12)


def test_rotating_sign_symmetry_needs_even_data(grid16):
    # the rotating phase is odd in xi3, so the symmetry holds for data even in x3
    g = random_test_field(4, 3.0, grid16)
    c = np.array(g.coefficients)
    inner = c[:, :, :, 1:]
    c[:, :, :, 1:] = 0.5 * (inner + inner[:, :, :, ::-1])
    even = SpectralField(grid16, c, real_valued=True)
    spec = StrichartzSpec(6, 6, 1.0)
    w = TimeWindow(4.0, 17)
    kind = DispersionKind.rotating()
    plus = strichartz_quotient(even, kind, spec, w)
    minus = strichartz_quotient(even, kind, spec.with_sign(-1), w)
    assert minus == pytest.approx(plus, rel=1e-12)


@pytest.mark.slow
def test_quotient_stable_under_refinement():
    w = TimeWindow(10.0, 65)
    kind = DispersionKind.primitive(2.0)
    spec = StrichartzSpec(6, 6, 1.0)
    q = [strichartz_quotient(random_test_field(3, 4.0, GridSpec(2 * math.pi, n)), kind, spec, w) for n in (32, 48)]
    assert np.isfinite(q).all()
    assert abs(q[1] / q[0] - 1.0) <= 0.05


def test_space_outer_differs_from_time_outer(grid16):
    g = random_test_field(1, 3.0, grid16)
    kind = DispersionKind.boussinesq(1.0)
    w = TimeWindow(5.0, 17)
    a = strichartz_quotient(g, kind, StrichartzSpec(4, 8, 0.75), w)
    b = strichartz_quotient(g, kind, StrichartzSpec(4, 8, 0.75, order=SPACE_OUTER), w)
    assert np.isfinite([a, b]).all()
    assert abs(a - b) > 1e-6 * a


def test_tail_flag_reports_window_edges(grid16):
    g = random_test_field(0, 3.0, grid16)
    r = strichartz_quotient_details(g, DispersionKind.rotating(), StrichartzSpec(6, 6, 1.0), TimeWindow(2.0, 9))
    assert 0 < r.tail <= 1.0
    assert r.quotient == pytest.approx(r.numerator / r.denominator)


# ---------------------------------------------------------------- fitting


@given(
    slope=st.floats(-3, 3),
    scale=st.floats(0.1, 10),
    n=st.integers(3, 8),
)
def test_fit_power_law_recovers_exact_laws(slope, scale, n):
    x = np.geomspace(0.1, 10, n)
    s, c, r = fit_power_law(x, scale * x ** slope)
    assert s == pytest.approx(slope, abs=1e-10)
    assert c == pytest.approx(math.log(scale), abs=1e-10)
    assert r < 1e-10


def test_fit_residual_is_rms_of_log_errors():
    x = np.array([1.0, 2.0, 4.0])
    y = np.exp(np.array([0.0, 1.0, 0.0]))
    lx, ly = np.log(x), np.log(y)
    coef = np.polyfit(lx, ly, 1)
    rms = np.sqrt(np.mean((ly - np.polyval(coef, lx)) ** 2))
    s, c, r = fit_power_law(x, y)
    assert (s, c) == pytest.approx(tuple(coef))
    assert r == pytest.approx(rms)


@pytest.mark.parametrize("x, y", [([1, 2], [1, 2]), ([1, 2, 3], [1, 0, 2]), ([1, 2, 3], [1, 2])])
def test_fit_power_law_errors(x, y):
    with pytest.raises(ValueError):
        fit_power_law(x, y)


# ---------------------------------------------------------------- sweeps


def test_epsilon_sweep_needs_three_points(grid8):
    g = random_test_field(0, 3.0, grid8)
    with pytest.raises(ValueError):
        epsilon_scaling_sweep(g, [1.0], TimeWindow(2.0, 9))
    with pytest.raises(ValueError):
        epsilon_scaling_sweep(g, [0.5, 0.0, 2.0], TimeWindow(2.0, 9))


@pytest.mark.parametrize("system", ["primitive", "rotating"])
def test_epsilon_sweep_slope(grid16, system):
    g = random_test_field(2, 3.0, grid16)
    rep = epsilon_scaling_sweep(g, [0.5, 1.0, 2.0], TimeWindow(5.0, 33), system=system)
    assert rep.passed
    assert rep.slope == pytest.approx(1 / 6, abs=0.02)


def test_epsilon_sweep_is_exact_rescaling(grid16):
    # with windows eps*T the quotient is eps^(1/6) times the eps = 1 value
    g = random_test_field(5, 3.0, grid16)
    rep = epsilon_scaling_sweep(g, [0.25, 1.0, 4.0], TimeWindow(5.0, 33))
    q1 = rep.quotients[1]
    for e, q in zip(rep.values, rep.quotients):
        assert q == pytest.approx(e ** (1 / 6) * q1, rel=1e-10)


def test_brunt_sweep_slope(grid16):
    g = random_test_field(2, 3.0, grid16)
    rep = brunt_scaling_sweep(g, [0.5, 1.0, 2.0], TimeWindow(5.0, 33))
    assert rep.slope == pytest.approx(-1 / 6, abs=0.02)
    assert rep.passed


def test_sweep_threads_do_not_change_results(grid16):
    g = random_test_field(1, 3.0, grid16)
    a = epsilon_scaling_sweep(g, [0.5, 1.0, 2.0], TimeWindow(3.0, 17), workers=1)
    b = epsilon_scaling_sweep(g, [0.5, 1.0, 2.0], TimeWindow(3.0, 17), workers=3)
    assert a.quotients == b.quotients


def test_froude_sweep_rejects_subcritical(grid8):
    g = random_test_field(0, 3.0, grid8)
    with pytest.raises(ValueError):
        froude_dependence_sweep(g, [1.0, 2.0, 4.0], TimeWindow(2.0, 9))
    with pytest.raises(ValueError):
        froude_dependence_sweep(g, [], TimeWindow(2.0, 9))


def test_froude_single_value_is_trivially_bounded(grid8):
    g = random_test_field(0, 3.0, grid8)
    rep = froude_dependence_sweep(g, [2.0], TimeWindow(2.0, 9))
    assert rep.normalized_spread == 1.0
    assert rep.slope is None


def test_froude_normalization(grid16):
    g = random_test_field(0, 3.0, grid16)
    rep = froude_dependence_sweep(g, [8.0, 1.5, 2.0], TimeWindow(5.0, 33))
    assert rep.values == [1.5, 2.0, 8.0]
    for F, q, nq in zip(rep.values, rep.quotients, rep.normalized):
        assert nq == pytest.approx(q * (F - 1) ** (1 / 6) / math.sqrt(F))
    assert rep.extra["normalized_spread"] == pytest.approx(max(rep.normalized) / min(rep.normalized))


def test_scaling_report_verdict():
    rep = ScalingReport("x", [1.0, 2.0, 4.0], [1.0, 2.0 ** (1 / 6), 4.0 ** (1 / 6)], 1 / 6, 0.02).fit()
    assert rep.passed
    assert ScalingReport("x", [1.0], [1.0]).passed is None
    rows = rep.rows()
    assert [set(r) for r in rows] == [{"parameter", "quotient", "normalized_quotient"}] * 3


# ---------------------------------------------------------------- sharpness family


def test_family_bounds_and_membership():
    fam = SharpnessFamily(0.25, R=2.0, N_phase=10)
    assert fam.frequency_bounds == ((1.0, 2.0), (1.0, 2.0), (0.25, 0.5))
    (x1, x2, x3, t) = fam.space_time_bounds
    assert x1 == pytest.approx((1 / 40, 1 / 20))
    assert x3 == pytest.approx((1 / 10, 1 / 5))
    assert t == pytest.approx((1 / (20 * 0.0625), 1 / (10 * 0.0625)))
    xi = np.array([[1.5, -1.5, 1.5, 0.5], [-1.2, 1.9, 1.2, 1.5], [0.3, -0.4, 0.6, 0.3]])
    assert fam.contains(xi).tolist() == [True, True, False, False]


@pytest.mark.parametrize("kwargs", [dict(delta=0.0), dict(delta=1.5), dict(delta=0.5, R=0.0), dict(delta=0.5, N_phase=0)])
def test_family_rejects_bad_parameters(kwargs):
    with pytest.raises(ValueError):
        SharpnessFamily(**kwargs)


def test_counterexample_count_matches_measure():
    fam = SharpnessFamily(0.5, 1.0)
    grid = GridSpec(25 * math.pi, 64)
    g = build_counterexample(fam, grid)
    count = int(np.count_nonzero(g.coefficients))
    volume = count * grid.frequency_spacing ** 3
    assert volume == pytest.approx(fam.measure, rel=0.2)
    assert g.hermitian_defect() == 0.0


def test_counterexample_needs_resolution():
    with pytest.raises(ValueError):
        build_counterexample(SharpnessFamily(0.1, 1.0), GridSpec(2 * math.pi, 16))


def test_norm_ratio_bounded_over_delta_and_R():
    ratios = [
        counterexample_norm_ratio(SharpnessFamily(d, R), 1.0, d * R / 32)
        for d in (0.5, 0.25, 0.125)
        for R in (1.0, 2.0, 4.0)
    ]
    assert max(ratios) / min(ratios) <= 2.0


def test_norm_ratio_full_box_at_delta_one():
    # s = 0: the squared norm is the volume of the dyadic box, exactly R^3
    r = counterexample_norm_ratio(SharpnessFamily(1.0, 2.0), 0.0, 2.0 / 200)
    assert r == pytest.approx(1.0, rel=0.05)


@pytest.mark.parametrize("delta", [0.5, 0.125, 0.03125])
def test_phase_expansion_ratio_bounded(delta):
    lo, hi = phase_expansion_ratio(SharpnessFamily(delta), 2.0, delta / 16)
    assert 0.25 <= lo <= hi <= 4.0


def test_phase_expansion_rejects_subcritical():
    with pytest.raises(ValueError):
        phase_expansion_ratio(SharpnessFamily(0.5), 1.0, 0.05)


@pytest.mark.parametrize(
    "spec, expected",
    [(StrichartzSpec(6, 6, 1.0), 0.0), (StrichartzSpec(4, 4, 0.75), -0.25)],
)
def test_sharpness_slope(spec, expected):
    deltas = [1 / 4, 1 / 8, 1 / 16, 1 / 32]
    kind = DispersionKind.primitive(2.0)
    q = [sharpness_quotient(SharpnessFamily(d), kind, spec) for d in deltas]
    slope = fit_power_law(deltas, q)[0]
    assert slope == pytest.approx(expected, abs=0.05)


def test_sharpness_bound_monotone_in_n_phase():
    kind = DispersionKind.primitive(2.0)
    spec = StrichartzSpec(6, 6, 1.0)
    vals = [sharpness_lower_bound(SharpnessFamily(0.125, 1.0, n), kind, spec) for n in (5, 10, 20, 40)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_sharpness_rejects_large_phase():
    with pytest.raises(ValueError, match="N_phase"):
        sharpness_lower_bound(SharpnessFamily(0.5, 1.0, 1), DispersionKind.primitive(2.0), StrichartzSpec(6, 6, 1.0))


def test_sharpness_primitive_only():
    with pytest.raises(ValueError):
        sharpness_lower_bound(SharpnessFamily(0.5), DispersionKind.rotating(), StrichartzSpec(6, 6, 1.0))


# ---------------------------------------------------------------- inhomogeneous


def test_forcing_profile_shape_and_divergence(grid8):
    w = TimeWindow(2.0, 9)
    phi = forcing_profile(0, grid8, w)
    assert phi.shape == (9, 4) + grid8.shape
    k = grid8.wavevectors
    div = np.einsum("i...,ti...->t...", k, phi[:, :3])
    assert np.abs(div).max() < 1e-12 * np.abs(phi).max()


@pytest.mark.parametrize("kind", [DispersionKind.primitive(2.0), DispersionKind.boussinesq(1.0), DispersionKind.rotating()])
def test_duhamel_quotient_finite(grid8, kind):
    w = TimeWindow(2.0, 17)
    r = duhamel_quotient(forcing_profile(1, grid8, w), kind, w, grid8)
    assert np.isfinite(r.quotient) and r.quotient > 0


def test_duhamel_convergence_is_second_order(grid8):
    steps, res, order = duhamel_convergence(0, DispersionKind.boussinesq(1.0), grid8, samples=(17, 33, 65))
    assert steps[0] > steps[1] > steps[2]
    assert res[0] > res[1] > res[2]
    assert order > 1.9
