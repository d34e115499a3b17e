import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from mpmath import mp, zeta as mp_zeta

from conedet import spectral
from conedet.errors import (DensityNotIntegrable, GaussBonnetViolation, InconsistentCoefficients,
                            NonpositiveTime, TruncationUncertified)
from conedet.specialfn import dedekind_eta
from conedet.spectral import (HeatCoefficients, Spectrum, assemble, counting_function, eigenvalues,
                              fit_heat_coefficients, heat_trace, log_det, log_det_from_powers,
                              rescaling_exponent, richardson, surface_spectrum, weyl_slope,
                              zeta_zero, zeta_zero_euler)
from conedet.surface import (FIXTURES, build_flat_torus, cone_points, fixture, initial_mesh,
                             mesh_hierarchy, pillowcase_surface)

FOUR_PI2 = 4 * math.pi ** 2


def lattice_spectrum(sigma: complex, lam_max: float) -> Spectrum:
    """Exact Laplace spectrum of C / (Z + sigma Z): 4 pi^2 |n + m sigma|^2 / (Im sigma)^2."""
    y = sigma.imag
    N = int(math.sqrt(lam_max) * max(1.0, abs(sigma)) / (2 * math.pi * min(1.0, y)) * 1.5) + 2
    m, n = np.meshgrid(np.arange(-N, N + 1), np.arange(-N, N + 1), indexing="ij")
    lam = FOUR_PI2 * np.abs(n + m * sigma).ravel() ** 2 / y ** 2
    lam = np.sort(lam[lam <= lam_max])
    lam[0] = 0.0
    return Spectrum(lam, np.zeros_like(lam), area=y)


def pillowcase_spectrum(lam_max: float) -> Spectrum:
    """Unit pillowcase = 2 x 2 square torus modulo z -> -z: pi^2 (m^2 + n^2), (m, n) up to sign."""
    N = int(math.sqrt(lam_max) / math.pi) + 2
    m, n = np.meshgrid(np.arange(-N, N + 1), np.arange(-N, N + 1), indexing="ij")
    keep = (m > 0) | ((m == 0) & (n >= 0))
    lam = math.pi ** 2 * (m[keep] ** 2 + n[keep] ** 2).astype(float)
    lam = np.sort(lam[lam <= lam_max])
    return Spectrum(lam, np.zeros_like(lam), area=2.0)


def pillowcase_trace(t: float) -> float:
    k = np.arange(1, 200)
    theta = 1 + 2 * np.sum(np.exp(-math.pi ** 2 * k ** 2 * t))
    return (theta ** 2 + 1) / 2


# --- assembly ---------------------------------------------------------------

@pytest.mark.parametrize("name", FIXTURES)
def test_assembly_invariants(name):
    m = mesh_hierarchy(fixture(name), 1)[-1]
    pair = assemble(m)
    K, M = pair.stiffness.toarray(), pair.mass.toarray()
    assert np.max(np.abs(K - K.T)) <= 1e-14 * np.linalg.norm(K)
    assert np.max(np.abs(K @ np.ones(pair.n))) < 1e-12
    assert M.sum() == pytest.approx(m.surface.area, abs=1e-12)
    assert np.linalg.eigvalsh(M)[0] > 0


def test_two_triangle_torus():
    pair = assemble(initial_mesh(build_flat_torus(1j)))
    assert pair.n == 1
    assert pair.stiffness.toarray()[0, 0] == pytest.approx(0.0, abs=1e-15)
    assert pair.mass.toarray().sum() == pytest.approx(1.0, abs=1e-15)


def test_constant_density_scales_mass():
    m = mesh_hierarchy(pillowcase_surface(), 2)[-1]
    base, heavy = assemble(m), assemble(m, 3.0)
    assert (heavy.stiffness != base.stiffness).nnz == 0
    assert np.max(np.abs(heavy.mass.toarray() - 3.0 * base.mass.toarray())) < 1e-15
    with pytest.raises(ValueError):
        assemble(m, -1.0)


def test_non_integrable_density():
    class Density:
        def vertex_orders(self, surface):
            return {0: -1.0}

        def evaluate(self, pts):
            return np.ones(np.shape(pts)[:-1])

    with pytest.raises(DensityNotIntegrable):
        assemble(mesh_hierarchy(pillowcase_surface(), 1)[-1], Density())


# --- eigenvalues ------------------------------------------------------------

def test_unit_torus_first_eigenvalue():
    spec = eigenvalues(assemble(initial_mesh(build_flat_torus(1j, 32))), 6)
    assert spec.eigenvalues[0] <= 1e-10
    assert np.all(np.diff(spec.eigenvalues) >= 0)
    for lam in spec.eigenvalues[1:5]:
        assert lam == pytest.approx(FOUR_PI2, rel=5e-3)


def test_mass_scaling_divides_eigenvalues():
    pair = assemble(mesh_hierarchy(fixture("cube"), 2)[-1])
    a = eigenvalues(pair, 20).eigenvalues
    b = eigenvalues(pair.scaled_mass(2.0), 20).eigenvalues
    assert np.allclose(b[1:], a[1:] / 2, rtol=1e-12, atol=0)


def test_eigenvalues_deterministic():
    pair = assemble(mesh_hierarchy(fixture("l_surface"), 2)[-1])
    assert np.array_equal(eigenvalues(pair, 15).eigenvalues, eigenvalues(pair, 15).eigenvalues)


def test_sparse_path_matches_dense(monkeypatch):
    pair = assemble(mesh_hierarchy(pillowcase_surface(), 4)[-1])
    dense = eigenvalues(pair, 12).eigenvalues
    monkeypatch.setattr(spectral, "DENSE_LIMIT", 10)
    sparse = eigenvalues(pair, 12).eigenvalues
    assert np.allclose(sparse[1:], dense[1:], rtol=1e-10, atol=0)


def test_count_out_of_range():
    pair = assemble(initial_mesh(build_flat_torus(1j, 2)))
    with pytest.raises(ValueError):
        eigenvalues(pair, pair.n + 1)


@pytest.mark.parametrize("name", FIXTURES)
def test_nested_refinement_monotone(name):
    ms = mesh_hierarchy(fixture(name), 5)
    ms = [m for m in ms if m.n_vertices > 12][:3]
    count = 12
    specs = [eigenvalues(assemble(m), count).eigenvalues for m in ms]
    for coarse, fine in zip(specs[:-1], specs[1:]):
        assert np.all(fine[1:] <= coarse[1:] * (1 + 1e-10))


def test_richardson_on_torus_improves_accuracy():
    exact = lattice_spectrum(1j, 200).eigenvalues[:10]
    s = build_flat_torus(1j, 6)
    ms = mesh_hierarchy(s, 1)
    coarse = eigenvalues(assemble(ms[0]), 10)
    fine = eigenvalues(assemble(ms[1]), 10)
    ext = richardson(fine, coarse)
    assert ext.extrapolated
    assert np.all(np.diff(ext.eigenvalues) >= 0)
    err_fine = np.max(np.abs(fine.eigenvalues - exact))
    err_ext = np.max(np.abs(ext.eigenvalues - exact))
    assert err_ext < err_fine / 4


def test_richardson_drops_modes_outside_the_asymptotic_regime():
    fine = Spectrum(np.array([0.0, 1.0, 2.0, 3.0]), np.zeros(4))
    coarse = Spectrum(np.array([0.0, 1.1, 2.2, 100.0]), np.zeros(4))
    ext = richardson(fine, coarse)
    assert len(ext) == 3 and ext.meta["dropped"] == 1
    assert ext.eigenvalues[1:] == pytest.approx([1.0 - 0.1 / 3, 2.0 - 0.2 / 3])
    with pytest.raises(spectral.SolverBreakdown):
        richardson(fine, Spectrum(np.array([0.0, 50.0, 60.0, 70.0]), np.zeros(4)))


def test_richardson_with_small_coarse_mesh_keeps_only_resolved_modes():
    # the coarse level has fewer dofs than requested, so its top modes are unresolved
    ms = mesh_hierarchy(pillowcase_surface(), 4)
    spec = surface_spectrum(ms[-2], ms[-1], 200)
    exact = pillowcase_spectrum(4000).eigenvalues
    assert 0 < len(spec) <= ms[-2].n_vertices < 200
    err = np.abs(spec.eigenvalues - exact[:len(spec)])[1:]
    assert np.all(spec.eigenvalues[1:] > 0)
    assert np.all(err < 0.25 * exact[1:len(spec)])
    # the Richardson correction is a usable error estimate for the kept modes
    assert np.all(err <= 2.0 * spec.errors[1:])


# --- heat trace -------------------------------------------------------------

def test_heat_trace_large_time_is_one():
    spec = lattice_spectrum(1j, 400)
    assert heat_trace(spec, 5.0) == pytest.approx(1.0, abs=1e-60)


def test_heat_trace_truncation_checked():
    spec = lattice_spectrum(1j, 400)
    with pytest.raises(TruncationUncertified):
        heat_trace(spec, 0.01)
    with pytest.raises(NonpositiveTime):
        heat_trace(spec, 0.0)


def test_square_torus_heat_trace_against_lattice_sum():
    t = 0.05
    k = np.arange(-40, 41)
    one_d = np.sum(np.exp(-FOUR_PI2 * k ** 2 * t))
    oracle = one_d ** 2
    assert heat_trace(lattice_spectrum(1j, 4000), t) == pytest.approx(oracle, rel=1e-13)
    # the finite element spectrum converges to it
    ms = mesh_hierarchy(build_flat_torus(1j, 16), 1)
    fem = surface_spectrum(ms[0], ms[1], 150)
    assert fem.eigenvalues[-1] * t >= 30
    assert heat_trace(fem, t) == pytest.approx(oracle, rel=1e-3)


def test_pillowcase_oracle_spectrum():
    spec = pillowcase_spectrum(4000)
    for t in (0.02, 0.05, 0.2):
        assert heat_trace(spec, t) == pytest.approx(pillowcase_trace(t), rel=1e-13)


def test_pillowcase_heat_trace_two_term_expansion():
    a = HeatCoefficients.from_surface(pillowcase_surface())
    assert a.a_minus1 == pytest.approx(2 / (4 * math.pi), rel=1e-15)
    assert a.a_0 == pytest.approx(0.5, abs=1e-15)
    ms = mesh_hierarchy(pillowcase_surface(), 5)
    fem = surface_spectrum(ms[-2], ms[-1], 200)
    for t in (0.03, 0.05):
        got = heat_trace(fem, t)
        assert got == pytest.approx(a.a_minus1 / t + a.a_0, abs=1e-2)
        assert got == pytest.approx(pillowcase_trace(t), abs=1e-2)


def test_residual_shrinks_as_time_decreases():
    spec = pillowcase_spectrum(30000)
    times = [1.0, 0.3, 0.1, 0.03, 0.01]
    resid = [abs(heat_trace(spec, t) - (2 / (4 * math.pi * t) + 0.5)) for t in times]
    assert all(b < a for a, b in zip(resid, resid[1:]))
    assert resid[-1] < 1e-30
    a_m1, a0, r = fit_heat_coefficients(spec, [0.01, 0.012, 0.015])
    assert a_m1 == pytest.approx(2 / (4 * math.pi), rel=1e-12)
    assert a0 == pytest.approx(0.5, abs=1e-12)


# --- zeta(0) and rescaling --------------------------------------------------

def test_zeta_zero_examples():
    assert zeta_zero([], 1) == pytest.approx(-1.0, abs=1e-15)
    assert zeta_zero([math.pi] * 4, 0) == pytest.approx(-0.5, abs=1e-15)
    assert zeta_zero([6 * math.pi], 2) == pytest.approx(-11 / 9, abs=1e-15)
    assert rescaling_exponent([], 1) == pytest.approx(1.0, abs=1e-15)
    assert rescaling_exponent(cone_points(pillowcase_surface()), 0) == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("name", FIXTURES)
def test_exponent_plus_zeta_zero_vanishes(name):
    s = fixture(name)
    cones = cone_points(s)
    assert rescaling_exponent(cones, s.genus) + zeta_zero(cones, s.genus) == pytest.approx(0, abs=1e-14)
    assert HeatCoefficients.from_surface(s).a_0 == pytest.approx(zeta_zero(cones, s.genus) + 1, abs=1e-14)


def _random_configuration(rng):
    genus = int(rng.integers(0, 4))
    target = 2 * genus - 2
    while True:
        n = int(rng.integers(1, 9))
        orders = rng.uniform(-0.95, 3.0, n)
        orders[-1] = target - orders[:-1].sum()
        if orders[-1] > -0.99:
            return [2 * math.pi * (1 + b) for b in orders], genus


def test_zeta_zero_forms_agree_on_random_configurations(rng):
    for _ in range(1000):
        angles, genus = _random_configuration(rng)
        a = zeta_zero(angles, genus)
        b = zeta_zero_euler(angles, genus)
        assert abs(a - b) <= 1e-14 * max(1.0, len(angles), abs(a))


@given(st.lists(st.floats(-0.9, 4.0), min_size=1, max_size=6), st.integers(0, 3))
def test_zeta_zero_forms_agree_property(orders, genus):
    last = 2 * genus - 2 - sum(orders)
    if last <= -0.99:
        return
    angles = [2 * math.pi * (1 + b) for b in orders + [last]]
    assert abs(zeta_zero(angles, genus) - zeta_zero_euler(angles, genus)) <= 1e-14 * len(angles) * 10


def test_gauss_bonnet_violation():
    with pytest.raises(GaussBonnetViolation):
        zeta_zero([math.pi] * 3, 0)
    with pytest.raises(GaussBonnetViolation):
        rescaling_exponent([4 * math.pi], 2)
    with pytest.raises(ValueError):
        zeta_zero([-1.0], 0)


# --- determinant ------------------------------------------------------------

def test_log_det_of_squares_is_log_two_pi():
    # lambda_k = k^2 gives zeta(s) = zeta_R(2 s), so -zeta'(0) = -2 zeta_R'(0) = log 2 pi
    with mp.workdps(30):
        oracle = float(-2 * mp_zeta(0, derivative=1))
    assert oracle == pytest.approx(math.log(2 * math.pi), rel=1e-15)
    k = np.arange(1, 200, dtype=float)
    powers = {-0.5: math.sqrt(math.pi) / 2, 0.0: 0.5}
    for T in (0.1, 0.2, 0.5):
        value, z0 = log_det_from_powers(k ** 2, powers, T)
        assert value == pytest.approx(oracle, abs=1e-6)
        assert z0 == pytest.approx(-0.5, abs=1e-15)


def test_log_det_of_squares_with_fitted_coefficients():
    k = np.arange(1, 400, dtype=float)
    ts = np.array([0.004, 0.006, 0.008, 0.01])
    trace = np.array([1 + np.sum(np.exp(-k ** 2 * t)) for t in ts])
    A = np.stack([ts ** -0.5, np.ones_like(ts)], axis=1)
    (c_half, c0), *_ = np.linalg.lstsq(A, trace, rcond=None)
    value, _ = log_det_from_powers(k ** 2, {-0.5: c_half, 0.0: c0}, 0.1)
    assert value == pytest.approx(math.log(2 * math.pi), abs=1e-6)


def flat_log_det(sigma):
    spec = lattice_spectrum(sigma, 20000)
    return log_det(spec, HeatCoefficients(sigma.imag / (4 * math.pi), 0.0))


@pytest.mark.parametrize("sigma", [1j, 2j, 0.5 + 1j, 0.3 + 0.8j])
def test_flat_torus_log_det_matches_eta(sigma):
    res = flat_log_det(sigma)
    oracle = math.log(sigma.imag ** 2 * abs(dedekind_eta(sigma)) ** 4)
    assert res.log_det == pytest.approx(oracle, abs=1e-6)
    assert res.zeta0_closed == -1.0
    assert res.tail_bound < 1e-6
    assert res.lambda_max_T >= 30


def test_det_ratio_two_i_over_i():
    ratio = math.exp(flat_log_det(2j).log_det - flat_log_det(1j).log_det)
    assert ratio == pytest.approx(math.sqrt(2), rel=1e-6)
    eta_ratio = 4 * abs(dedekind_eta(2j)) ** 4 / abs(dedekind_eta(1j)) ** 4
    assert eta_ratio == pytest.approx(math.sqrt(2), rel=1e-14)


def test_rescaled_spectrum_adds_log_two():
    base = lattice_spectrum(1j, 20000)
    a = log_det(base, HeatCoefficients(1 / (4 * math.pi), 0.0))
    half = base.scaled(0.5)
    b = log_det(half, HeatCoefficients(2 / (4 * math.pi), 0.0))
    assert b.log_det - a.log_det == pytest.approx(math.log(2), abs=1e-9)


def test_log_det_errors():
    spec = lattice_spectrum(1j, 2000)
    coeffs = HeatCoefficients(1 / (4 * math.pi), 0.0)
    with pytest.raises(TruncationUncertified):
        log_det(spec, coeffs, T=0.001)
    with pytest.raises(InconsistentCoefficients):
        log_det(spec, HeatCoefficients(1 / (4 * math.pi), 0.5))
    with pytest.raises(InconsistentCoefficients):
        log_det(spec, HeatCoefficients(-1.0, 0.0))


def test_log_det_split_time_independent():
    spec = lattice_spectrum(1j, 20000)
    coeffs = HeatCoefficients(1 / (4 * math.pi), 0.0)
    vals = [log_det(spec, coeffs, T=T).log_det for T in (0.002, 0.003, 0.005)]
    assert max(vals) - min(vals) < 1e-9


@pytest.mark.parametrize("name", ["pillowcase", "cube", "torus_i"])
def test_fem_log_det_self_consistent(name):
    s = fixture(name)
    ms = mesh_hierarchy(s, 5)
    spec = surface_spectrum(ms[-2], ms[-1], 200)
    res = log_det(spec, HeatCoefficients.from_surface(s))
    assert abs(res.zeta0_numeric - res.zeta0_closed) <= max(0.05, 3 * res.error_estimate)
    assert res.zeta0_closed == pytest.approx(zeta_zero(cone_points(s), s.genus), abs=1e-14)
    assert math.isfinite(res.log_det)


def test_fem_torus_log_det_close_to_eta():
    ms = mesh_hierarchy(build_flat_torus(1j, 16), 2)
    spec = surface_spectrum(ms[-2], ms[-1], 200)
    res = log_det(spec, HeatCoefficients(1 / (4 * math.pi), 0.0))
    oracle = math.log(abs(dedekind_eta(1j)) ** 4)
    assert res.log_det == pytest.approx(oracle, abs=1e-3)


# --- counting ---------------------------------------------------------------

def test_counting_function():
    spec = lattice_spectrum(1j, 2000)
    assert counting_function(spec, 30.0) == (0, 0.0)
    # 4 pi^2 carries the four modes exp(+-2 pi i x), exp(+-2 pi i y)
    n, ratio = counting_function(spec, 50.0)
    assert n == 4 and ratio == pytest.approx(4 / 50)
    with pytest.raises(TruncationUncertified):
        counting_function(spec, 5000.0)


def test_weyl_slope_on_unit_torus():
    spec = lattice_spectrum(1j, 2000)
    assert weyl_slope(spec, 200, 800) == pytest.approx(1 / (4 * math.pi), rel=0.05)
    with pytest.raises(ValueError):
        weyl_slope(spec, 800, 200)
