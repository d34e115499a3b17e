import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conedet import _kernels_py, kernels
from conedet.conekernel import (ConeParams, cone_harmonic, diagonal_excess, heat_kernel_cone,
                                heat_kernel_plane, trace_defect_closed, trace_defect_numeric)
from conedet.errors import BoundaryPole, NonpositiveAngle, NonpositiveTime, TimeTooLarge

TWO_PI = 2.0 * math.pi
ANGLES = [math.pi / 2, math.pi, 1.5 * math.pi, TWO_PI, 3 * math.pi, 4 * math.pi, 6 * math.pi]


def planar(r, theta):
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def image_sum(n, r, theta, rho, psi, t):
    """Kernel of the plane quotient by rotations of order ``n`` (cone angle 2 pi / n)."""
    x = planar(r, theta)
    total = 0.0
    for j in range(n):
        total = total + heat_kernel_plane(x, planar(rho, psi + TWO_PI * j / n), t)
    return total


def test_plane_kernel_values():
    assert heat_kernel_plane([0.3, 0.2], [0.3, 0.2], 1.0) == pytest.approx(1 / (4 * math.pi), rel=1e-15)
    assert heat_kernel_plane([0.0, 0.0], [2.0, 0.0], 1.0) == pytest.approx(math.exp(-1) / (4 * math.pi),
                                                                           rel=1e-15)


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(0.01, 5))
def test_plane_kernel_symmetric(p, t):
    x, y = p[:2], p[2:]
    assert heat_kernel_plane(x, y, t) == heat_kernel_plane(y, x, t)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_rational_angles_reduce_to_images(n, rng):
    beta = TWO_PI / n
    r, rho = rng.uniform(0.05, 2, 100), rng.uniform(0.05, 2, 100)
    th, ps = rng.uniform(0, beta, 100), rng.uniform(0, beta, 100)
    t = rng.uniform(0.05, 1.0, 100)
    got = heat_kernel_cone(ConeParams(beta), r, th, rho, ps, t)
    ref = image_sum(n, r, th, rho, ps, t)
    assert np.max(np.abs(got - ref)) < 1e-10
    # the line integrals vanish identically at these angles
    phi = np.mod(th - ps, beta)
    phi = np.where(phi > beta / 2, phi - beta, phi)
    ok = np.abs(np.abs(phi) - math.pi) > 1e-6
    lines = _kernels_py.cone_line_integral_many(r[ok], rho[ok], phi[ok], t[ok], beta, principal=True)
    assert np.max(np.abs(lines)) < 1e-12


@pytest.mark.parametrize("beta", ANGLES)
def test_symmetry_positivity_periodicity(beta, rng):
    p = ConeParams(beta)
    r, rho = rng.uniform(0.0, 2, 40), rng.uniform(0.05, 2, 40)
    th, ps = rng.uniform(0, beta, 40), rng.uniform(0, beta, 40)
    t = rng.uniform(0.02, 1.0, 40)
    h = heat_kernel_cone(p, r, th, rho, ps, t)
    scale = 1.0 / (4 * math.pi * t)
    assert np.all(h > 0)
    assert np.max(np.abs(h - heat_kernel_cone(p, rho, ps, r, th, t)) / scale) < 1e-12
    assert np.max(np.abs(h - heat_kernel_cone(p, r, th + beta, rho, ps, t)) / scale) < 1e-12
    assert np.max(np.abs(h - heat_kernel_cone(p, r, th - 2 * beta, rho, ps, t)) / scale) < 1e-12


def test_semigroup_composition():
    beta, t1, t2 = 3 * math.pi, 0.05, 0.07
    p = ConeParams(beta)
    x, y = (0.5, 0.3), (0.4, 2.0)
    gx, gw = np.polynomial.legendre.leggauss(20)
    edges = [0.0, 0.01, 0.1, 0.5, 1.5, 3.5]
    s = np.concatenate([(a + b) / 2 + (b - a) / 2 * gx for a, b in zip(edges[:-1], edges[1:])])
    ws = np.concatenate([(b - a) / 2 * gw for a, b in zip(edges[:-1], edges[1:])])
    nphi = 128
    phi = (np.arange(nphi) + 0.5) * beta / nphi
    S, PHI = np.meshgrid(s, phi, indexing="ij")
    a = heat_kernel_cone(p, x[0], x[1], S, PHI, t1)
    b = heat_kernel_cone(p, S, PHI, y[0], y[1], t2)
    comp = float(np.sum((a * b) * (S * ws[:, None])) * beta / nphi)
    direct = heat_kernel_cone(p, x[0], x[1], y[0], y[1], t1 + t2)
    assert comp == pytest.approx(direct, abs=1e-4)


def test_heat_equation_by_finite_differences():
    # away from the tip the cone is locally the plane, so H solves dH/dt = Laplacian H
    beta, t = 3 * math.pi, 0.2
    p = ConeParams(beta)
    y = (0.7, 1.0)
    w0 = 1.1 * np.exp(2.2j)
    h, dt = 1e-3, 1e-4

    def H(w, tt):
        w = np.asarray(w)
        # continuous branch of the angle near w0
        theta = 2.2 + np.angle(w / w0)
        return heat_kernel_cone(p, np.abs(w), theta, y[0], y[1], tt)

    lap = (H(w0 + h, t) + H(w0 - h, t) + H(w0 + 1j * h, t) + H(w0 - 1j * h, t) - 4 * H(w0, t)) / h ** 2
    dtH = (H(w0, t + dt) - H(w0, t - dt)) / (2 * dt)
    assert lap == pytest.approx(dtH, rel=1e-4, abs=1e-6)


def test_boundary_pole_and_argument_errors():
    p = ConeParams(3 * math.pi)
    with pytest.raises(BoundaryPole):
        heat_kernel_cone(p, 1.0, math.pi, 1.0, 0.0, 0.1)
    with pytest.raises(NonpositiveTime):
        heat_kernel_cone(p, 1.0, 0.2, 1.0, 0.0, 0.0)
    with pytest.raises(NonpositiveAngle):
        ConeParams(0.0)
    with pytest.raises(NonpositiveAngle):
        trace_defect_closed(-1.0)
    with pytest.raises(TimeTooLarge):
        trace_defect_numeric(p, 1.0, 0.06)
    with pytest.raises(ValueError):
        heat_kernel_cone(p, -1.0, 0.2, 1.0, 0.0, 0.1)


def test_kernel_continuous_at_tip():
    p = ConeParams(3 * math.pi)
    at_tip = heat_kernel_cone(p, 0.0, 0.0, 0.8, 1.0, 0.1)
    # the kernel is Hoelder at the tip: H(r) - H(0) ~ r^(2 pi / beta)
    near = heat_kernel_cone(p, 1e-12, 2.0, 0.8, 1.0, 0.1)
    assert near == pytest.approx(at_tip, rel=1e-6)
    # from the tip only the radial Gaussian survives, scaled by 2 pi / beta
    assert at_tip == pytest.approx(math.exp(-0.64 / 0.4) / (4 * math.pi * 0.1) * TWO_PI / p.beta,
                                   rel=1e-10)


@pytest.mark.parametrize("beta,expected", [(TWO_PI, 0.0), (1.5 * math.pi, 7 / 144),
                                           (6 * math.pi, -2 / 9), (4 * math.pi, -1 / 8),
                                           (math.pi, 1 / 8)])
def test_trace_defect_closed_values(beta, expected):
    assert trace_defect_closed(beta) == pytest.approx(expected, abs=1e-15)


@given(st.floats(1.2, 8 * math.pi))
def test_trace_defect_numeric_matches_closed_form(beta):
    # for small beta the images decay like exp(-sin^2(beta/2) R^2 / t), so
    # t = 0.01 is only small enough above beta ~ 1
    num = trace_defect_numeric(ConeParams(beta), 1.0, 0.01)
    assert num == pytest.approx(trace_defect_closed(beta), abs=1e-8)


@pytest.mark.parametrize("beta", [0.9, 1.1])
def test_trace_defect_converges_exponentially_in_one_over_t(beta):
    inv_t = np.array([25.0, 50.0, 100.0])
    errs = np.array([abs(trace_defect_numeric(ConeParams(beta), 1.0, 1 / x) - trace_defect_closed(beta))
                     for x in inv_t])
    slopes = np.diff(np.log(errs)) / np.diff(inv_t)
    # log|error| falls at least linearly in 1/t, with a consistent rate
    assert np.all(slopes < -0.05)
    assert slopes[1] < 0.5 * slopes[0]


@pytest.mark.parametrize("beta", [math.pi, 4 * math.pi, 6 * math.pi])
def test_trace_defect_at_rounding_level_for_wide_cones(beta):
    errs = [abs(trace_defect_numeric(ConeParams(beta), 1.0, t) - trace_defect_closed(beta))
            for t in (0.04, 0.02, 0.01)]
    # exp(-R^2 / t) bounds the truncation at R for these angles
    assert errs[0] < 2 * math.exp(-25.0)
    assert max(errs[1:]) < 1e-14


def test_diagonal_excess_plane_is_zero():
    assert np.all(diagonal_excess(ConeParams(TWO_PI), np.linspace(0.1, 2, 10), 0.1) == 0)


def test_line_integral_backends_agree(rng):
    r, rho = rng.uniform(0.01, 1.5, 60), rng.uniform(0.01, 1.5, 60)
    phi, t = rng.uniform(-1, 1, 60), rng.uniform(0.01, 0.5, 60)
    before = kernels.BACKEND
    try:
        for beta in (3 * math.pi, 0.7, 4 * math.pi):
            ref = _kernels_py.cone_line_integral_many(r, rho, phi, t, beta)
            try:
                kernels.use_backend("cython")
            except ImportError:
                pytest.skip("compiled extension not built")
            got = kernels.cone_line_integral_many(r, rho, phi, t, beta)
            assert np.max(np.abs(got - ref)) < 1e-14
    finally:
        kernels.use_backend(before)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


def test_harmonics_values():
    assert cone_harmonic(3 * math.pi, 0, 1, 0.7, 1.0) == 1
    assert cone_harmonic(3 * math.pi, 0, -1, math.e, 1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        cone_harmonic(3 * math.pi, 1, -1, 0.0, 1.0)


@pytest.mark.parametrize("k,sign", [(1, 1), (2, 1), (1, -1), (0, -1)])
def test_harmonics_by_finite_differences(k, sign):
    beta = 3 * math.pi
    w0 = 0.9 * np.exp(1.3j)

    def V(w):
        return cone_harmonic(beta, k, sign, np.abs(w), 1.3 + np.angle(w / w0)).real

    def lap(h):
        return (V(w0 + h) + V(w0 - h) + V(w0 + 1j * h) + V(w0 - 1j * h) - 4 * V(w0)) / h ** 2

    coarse, fine = abs(lap(0.02)), abs(lap(0.01))
    assert fine < 1e-3
    assert fine < coarse / 3.0
