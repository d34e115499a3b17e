import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conedet.errors import (DensityNotIntegrable, DivisorsIntersect, EvaluationAtConePoint,
                            IndexOutOfRange)
from conedet.specialfn import Modulus, dedekind_eta, theta1
from conedet.spectral import assemble, rescaling_exponent
from conedet.surface import build_flat_torus, initial_mesh, refine
from conedet.torusmetrics import (ConicalTorusMetric, DivisorPoint, area, density,
                                  distinguished_scale, log_h, metric_from_json, mt_predictor,
                                  polyakov_ratio, three_polyhedra_product)
from conedet.verify import metric_grid, random_torus_metric

SIGMA = 0.3 + 1.1j
M3 = ConicalTorusMetric(Modulus(SIGMA), (DivisorPoint(0.0, 0.0, 1.0), DivisorPoint(0.25, 0.5, -0.5),
                                         DivisorPoint(0.5, 0.25, -0.5)), 1.3)
M2 = ConicalTorusMetric(Modulus(SIGMA), (DivisorPoint(0.125, 0.75, 0.5),
                                         DivisorPoint(0.75, 0.125, -0.5)))
M_ALT = ConicalTorusMetric(Modulus(SIGMA), (DivisorPoint(0.625, 0.625, -0.3),
                                            DivisorPoint(0.875, 0.375, 0.3)), 0.7)


def direct_density(metric, z):
    """The defining product, evaluated with the raw theta series."""
    s = metric.sigma
    out = metric.scale
    for p, b in zip(metric.points, metric.orders):
        out *= abs(theta1(z - p, s)) ** (2 * b)
    lin = sum(b * p.imag for p, b in zip(metric.points, metric.orders))
    return out * math.exp(4 * math.pi * z.imag * lin / s.imag)


def regular_points(rng, metric, n, gap=0.1):
    out = []
    while len(out) < n:
        z = rng.uniform(0, 1) + rng.uniform(0, 1) * metric.sigma
        if all(abs(z - p) > gap for p in metric.points) and \
                all(abs(z - p - 1) > gap and abs(z - p + 1) > gap for p in metric.points):
            out.append(z)
    return np.array(out)


def test_density_matches_defining_product(rng):
    for z in regular_points(rng, M3, 20):
        assert density(M3, z) == pytest.approx(direct_density(M3, z), rel=1e-11)


def test_empty_divisor_is_constant():
    m = ConicalTorusMetric(Modulus(SIGMA), (), 2.5)
    z = np.array([0.1 + 0.2j, 0.7 + 0.9j, 3.3 - 1.0j])
    assert np.all(density(m, z) == 2.5)


@pytest.mark.parametrize("metric", [M3, M2, M_ALT])
def test_density_is_doubly_periodic(metric, rng):
    z = regular_points(rng, metric, 50)
    base = density(metric, z)
    for shift in (1, metric.sigma, -2 + 3 * metric.sigma):
        assert np.max(np.abs(density(metric, z + shift) / base - 1)) < 1e-10


@pytest.mark.parametrize("metric", [M3, M2])
def test_log_density_is_harmonic_at_rate_h2(metric, rng):
    z = regular_points(rng, metric, 30, gap=0.15)

    def lap(h):
        f = metric.log_density
        return np.max(np.abs(f(z + h) + f(z - h) + f(z + 1j * h) + f(z - 1j * h) - 4 * f(z)) / h ** 2)

    errs = np.array([lap(h) for h in (0.04, 0.02, 0.01)])
    rates = np.log2(errs[:-1] / errs[1:])
    assert np.all(np.abs(rates - 2) < 0.2)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_local_power_law_gives_cone_angle(k):
    p, b = M3.points[k], M3.orders[k]
    r = np.geomspace(1e-6, 1e-4, 9)
    for phi in (0.3, 2.0, 4.4):
        vals = density(M3, p + r * np.exp(1j * phi))
        slope = np.polyfit(np.log(r), np.log(vals), 1)[0]
        assert slope == pytest.approx(2 * b, abs=1e-3)
    assert M3.cone_angles()[k] == pytest.approx(2 * math.pi * (b + 1))


def test_evaluation_at_cone_point():
    with pytest.raises(EvaluationAtConePoint):
        density(M3, M3.points[1])
    with pytest.raises(EvaluationAtConePoint):
        density(M3, M3.points[1] + 1 + M3.sigma)


def test_construction_errors():
    with pytest.raises(DensityNotIntegrable):
        ConicalTorusMetric(Modulus(1j), (DivisorPoint(0, 0, -1.0), DivisorPoint(0.5, 0.5, 1.0)))
    with pytest.raises(ValueError):
        ConicalTorusMetric(Modulus(1j), (DivisorPoint(0, 0, 0.5),))
    with pytest.raises(DivisorsIntersect):
        ConicalTorusMetric(Modulus(1j), (DivisorPoint(0, 0, 0.5), DivisorPoint(1.0, 0, -0.5)))
    with pytest.raises(ValueError):
        ConicalTorusMetric(Modulus(1j), (), 0.0)


def test_json_round_trip():
    assert metric_from_json(M3.to_json()) == M3


# --- area -------------------------------------------------------------------

def test_area_empty_divisor():
    m = ConicalTorusMetric(Modulus(SIGMA))
    assert area(m).value == pytest.approx(SIGMA.imag, rel=1e-15)
    assert area(m.scaled(3.0)).value == pytest.approx(3 * SIGMA.imag, rel=1e-15)


def test_area_scales_linearly():
    assert area(M3.scaled(2.0)).value == pytest.approx(2 * area(M3).value, rel=1e-9)


def test_area_self_convergence():
    ref = area(M3, rtol=1e-13).value
    errs, reported = [], []
    # the base rule alone already reaches ~1e-11, so only tight tolerances refine
    for rtol in (1e-10, 1e-11, 1e-12):
        res = area(M3, rtol=rtol)
        errs.append(abs(res.value - ref) / ref)
        reported.append(res.error / ref)
        assert errs[-1] <= rtol + 1e-12  # rounding floor of the reference
    assert reported[0] > reported[1] > reported[2]


def test_area_matches_finite_element_mass():
    n = metric_grid(M3)
    mesh = refine(refine(initial_mesh(build_flat_torus(M3.sigma, n))))
    fem = assemble(mesh, M3).area
    assert fem == pytest.approx(area(M3).value, rel=1e-6)


def shifted(metric, du, dv):
    return ConicalTorusMetric(metric.modulus, tuple(DivisorPoint(d.u + du, d.v + dv, d.b)
                                                    for d in metric.divisor), metric.scale)


def test_area_invariant_under_real_translation():
    a = area(M3).value
    assert area(shifted(M3, 0.1, 0.0)).value == pytest.approx(a, rel=1e-8)


def test_area_under_general_translation():
    # the representatives stay inside [0, 1) so the shift w = 0.05 sigma is literal
    w = 0.05 * M3.sigma
    m = shifted(M3, 0.0, 0.05)
    lin = float(np.sum(M3.orders * M3.points.imag))
    factor = math.exp(4 * math.pi * w.imag * lin / M3.sigma.imag)
    assert area(m).value == pytest.approx(area(M3).value * factor, rel=1e-8)


# --- distinguished parameters -----------------------------------------------

@pytest.mark.parametrize("k", [0, 1, 2])
def test_h_is_the_limit_ratio(k):
    p, b = M3.points[k], M3.orders[k]
    r = 1e-7
    for lattice in (0, 1, M3.sigma, -1 + 2 * M3.sigma):
        lim = density(M3, p + lattice + r * np.exp(0.7j)) / r ** (2 * b)
        assert lim == pytest.approx(math.exp(log_h(M3, k)), rel=1e-5)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_distinguished_scale_scaling(k):
    g, f = distinguished_scale(M3, k)
    g2, f2 = distinguished_scale(M3.scaled(2.0), k)
    b = M3.orders[k]
    assert g2 ** 2 == pytest.approx(2 * g ** 2, rel=1e-13)
    assert f2 == pytest.approx(f * 2 ** (-1 / (2 * (b + 1))), rel=1e-13)


def test_distinguished_scale_zero_order():
    m = ConicalTorusMetric(Modulus(1j), (DivisorPoint(0, 0, 0.5), DivisorPoint(0.5, 0.5, -0.5),
                                         DivisorPoint(0.3, 0.7, 0.0)))
    g, f = distinguished_scale(m, 2)
    rho = density(m, m.points[2])
    assert g == pytest.approx(math.sqrt(rho), rel=1e-12)
    assert f == pytest.approx(rho ** -0.5, rel=1e-12)


def test_index_out_of_range():
    with pytest.raises(IndexOutOfRange):
        distinguished_scale(M3, 3)
    with pytest.raises(IndexOutOfRange):
        log_h(M3, -1)


# --- Polyakov ratio ---------------------------------------------------------

def test_polyakov_identity_and_swap():
    assert polyakov_ratio(M2, M2) == 1.0
    a = polyakov_ratio(M3, M2)
    b = polyakov_ratio(M2, M3)
    assert a * b == pytest.approx(1.0, abs=1e-12)


def test_polyakov_scaling_matches_rescaling_exponent():
    kappa = 3.0
    cones = [a for a, b in zip(M3.cone_angles(), M3.orders) if b != 0]
    e = rescaling_exponent(cones, 1)
    ratio = polyakov_ratio(M3.scaled(kappa), M2) / polyakov_ratio(M3, M2)
    assert ratio == pytest.approx(kappa ** e, rel=1e-8)


def test_polyakov_cocycle():
    r = polyakov_ratio(M3, M2) * polyakov_ratio(M2, M_ALT) * polyakov_ratio(M_ALT, M3)
    assert r == pytest.approx(1.0, abs=1e-8)


def test_polyakov_rejects_intersecting_divisors():
    other = ConicalTorusMetric(Modulus(SIGMA), (DivisorPoint(0.0, 0.0, -0.2),
                                                DivisorPoint(0.6, 0.6, 0.2)))
    with pytest.raises(DivisorsIntersect):
        polyakov_ratio(M3, other)
    with pytest.raises(ValueError):
        polyakov_ratio(M3, ConicalTorusMetric(Modulus(1j), ()))


# --- three polyhedra --------------------------------------------------------

def test_three_polyhedra_random_triples(rng):
    for _ in range(10):
        sigma = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.8, 1.6))
        taken = []
        l, m, n = (random_torus_metric(rng, sigma, taken, int(rng.integers(2, 5))) for _ in range(3))
        assert three_polyhedra_product(l, m, n) == pytest.approx(1.0, abs=1e-8)
        # rescaling any one metric leaves the product unchanged
        assert three_polyhedra_product(l.scaled(5.0), m, n) == pytest.approx(1.0, abs=1e-8)


@given(st.integers(0, 2 ** 32 - 1))
def test_three_polyhedra_property(seed):
    rng = np.random.default_rng(seed)
    taken = []
    l, m, n = (random_torus_metric(rng, 0.2 + 1.0j, taken, 3) for _ in range(3))
    assert abs(three_polyhedra_product(l, m, n) - 1) < 1e-8


def test_three_polyhedra_rejects_shared_points():
    with pytest.raises(DivisorsIntersect):
        three_polyhedra_product(M3, M3, M2)


# --- determinant predictor --------------------------------------------------

@pytest.mark.parametrize("sigma", [1j, 2j, 0.5 + 1j, -0.2 + 0.7j])
def test_mt_predictor_flat(sigma):
    m = ConicalTorusMetric(Modulus(sigma))
    assert mt_predictor(m) == pytest.approx(sigma.imag ** 2 * abs(dedekind_eta(sigma)) ** 4, rel=1e-13)


def test_mt_predictor_scaling_law():
    kappa = 2.5
    cones = [a for a, b in zip(M3.cone_angles(), M3.orders) if b != 0]
    e = rescaling_exponent(cones, 1)
    A = area(M3).value
    ratio = mt_predictor(M3.scaled(kappa), kappa * A) / mt_predictor(M3, A)
    assert ratio == pytest.approx(kappa ** e, rel=1e-12)
    # the exponent written out: 1 + sum b_k / (12 (b_k + 1))
    alt = 1 + sum(b / (12 * (b + 1)) for b in M3.orders)
    assert e == pytest.approx(alt, abs=1e-14)


def test_mt_predictor_lattice_translation():
    A = area(M3).value
    m = shifted(M3, 1.0, -2.0)
    assert mt_predictor(m, A) == pytest.approx(mt_predictor(M3, A), rel=1e-10)
