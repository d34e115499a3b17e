"""Verification suites with machine-readable reports.

Each ``suite_*`` function runs one family of checks and returns a
:class:`VerificationReport`. The CLI is a thin layer over these functions,
and the acceptance tests call them directly.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from conedet.conekernel import (ConeParams, heat_kernel_cone, heat_kernel_plane,
                                trace_defect_closed, trace_defect_numeric)
from conedet.specialfn import Modulus, dedekind_eta, theta1_prime0
from conedet.spectral import (HeatCoefficients, Spectrum, assemble, eigenvalues, fit_a0,
                              log_det, rescaling_exponent, surface_spectrum, weyl_slope,
                              zeta_zero)
from conedet.surface import (FIXTURES, PolyhedralSurface, build_flat_torus, cone_points, fixture,
                             gauss_bonnet_residual, initial_mesh, mesh_hierarchy)
from conedet.torusmetrics import (ConicalTorusMetric, DivisorPoint, _lattice_distance, area,
                                  mt_predictor, three_polyhedra_product)
from conedet.errors import QuadratureFailure, UsageError

TWO_PI = 2.0 * math.pi

# (sigma, first point, second point) in lattice coordinates, orders +1/2 and -1/2
MT_CONFIGURATIONS = (
    (1j, (0.0, 0.0), (0.5, 0.5)),
    (1.5j, (0.0, 0.0), (0.25, 0.5)),
    (0.3 + 1.1j, (0.125, 0.25), (0.75, 0.5)),
    (1j, (0.25, 0.25), (0.5, 0.375)),
    (0.5 + 0.9j, (0.0, 0.0), (0.5, 0.0)),
)
MT_ORDERS = (0.5, -0.5)
RAY_SINGER_SIGMAS = (1j, 1.5j, 2j, 0.5 + 1j)


# --- reports ----------------------------------------------------------------

def inputs_digest(inputs: dict) -> str:
    text = json.dumps(inputs, sort_keys=True, default=repr)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class CheckRecord:
    """One comparison ``|computed - expected| <= tolerance`` (absolute or relative)."""

    name: str
    inputs: dict
    expected: float
    computed: float
    tolerance: float
    mode: str = "abs"
    runtime: float | None = None

    @property
    def error(self) -> float:
        err = abs(self.computed - self.expected)
        if self.mode == "rel":
            err /= max(abs(self.expected), 1e-300)
        return err

    @property
    def passed(self) -> bool:
        return bool(math.isfinite(self.computed) and self.error <= self.tolerance)

    def to_json(self) -> dict:
        return {"name": self.name, "inputs": self.inputs, "inputs_digest": inputs_digest(self.inputs),
                "expected": self.expected, "computed": self.computed, "error": self.error,
                "tolerance": self.tolerance, "mode": self.mode, "passed": self.passed,
                "runtime": self.runtime}

    @classmethod
    def from_json(cls, doc: dict) -> "CheckRecord":
        rec = cls(doc["name"], doc["inputs"], doc["expected"], doc["computed"], doc["tolerance"],
                  doc.get("mode", "abs"), doc.get("runtime"))
        if rec.passed != doc.get("passed", rec.passed):
            raise ValueError(f"check {rec.name!r}: stored pass flag disagrees with its numbers")
        return rec


@dataclass(frozen=True)
class VerificationReport:
    suite: str
    checks: tuple[CheckRecord, ...]
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {"suite": self.suite, "passed": self.passed,
                "checks": [c.to_json() for c in self.checks], "details": self.details}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, doc) -> "VerificationReport":
        if isinstance(doc, (str, bytes)):
            doc = json.loads(doc)
        rep = cls(doc["suite"], tuple(CheckRecord.from_json(c) for c in doc["checks"]),
                  doc.get("details", {}))
        if rep.passed != doc.get("passed", rep.passed):
            raise ValueError("stored overall pass flag disagrees with the checks")
        return rep

    def summary(self) -> str:
        lines = [f"{self.suite}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            lines.append(f"  [{'ok' if c.passed else 'FAIL'}] {c.name}: computed={c.computed:.10g} "
                         f"expected={c.expected:.10g} error={c.error:.3g} tol={c.tolerance:g}")
        return "\n".join(lines)


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Clock:
    """Per-check wall time, recorded only when requested (reports stay deterministic)."""

    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.start = time.perf_counter()

    def lap(self) -> float | None:
        now = time.perf_counter()
        dt, self.start = now - self.start, now
        return round(dt, 6) if self.enabled else None


# --- shared computations ----------------------------------------------------

def fem_spectrum(surface: PolyhedralSurface, levels: int, count: int, density=None,
                 extrapolate: bool = True) -> Spectrum:
    """Eigenvalues on the ``levels``-times refined mesh, Richardson-extrapolated
    against the previous level when ``extrapolate`` is set."""
    if levels < 0:
        raise UsageError("levels must be non-negative")
    meshes = mesh_hierarchy(surface, levels)
    if extrapolate and levels >= 1:
        return surface_spectrum(meshes[-2], meshes[-1], count, density)
    fine = meshes[-1]
    return eigenvalues(assemble(fine, density), min(count, fine.n_vertices))


def metric_grid(metric: ConicalTorusMetric, start: int = 8, largest: int = 128) -> int:
    """Smallest ``n >= start`` (doubling) putting every cone point on the ``n x n`` torus grid."""
    n = start
    while n <= largest:
        if all(abs(d.u * n - round(d.u * n)) < 1e-9 and abs(d.v * n - round(d.v * n)) < 1e-9
               for d in metric.divisor if d.b != 0.0):
            return n
        n *= 2
    raise QuadratureFailure("cone points are not on any grid up to "
                            f"{largest} x {largest}; pass a surface with them as vertices")


def metric_coefficients(metric: ConicalTorusMetric, area_value: float | None = None
                        ) -> HeatCoefficients:
    A = area(metric).value if area_value is None else area_value
    angles = [a for a, b in zip(metric.cone_angles(), metric.orders) if b != 0.0]
    return HeatCoefficients.from_cones(A, angles, genus=1)


def metric_log_det(metric: ConicalTorusMetric, levels: int = 4, count: int = 200,
                   surface: PolyhedralSurface | None = None, tol: float = 1e-6,
                   consistency: float = 0.05):
    """FEM ``log det'`` of the Laplacian of a conical torus metric.

    The mesh is the flat torus of the same modulus (or ``surface``) refined
    ``levels`` times, with Richardson extrapolation over the last two levels.
    Returns ``(ZetaDetResult, area)``.
    """
    if surface is None:
        surface = build_flat_torus(metric.sigma, metric_grid(metric))
    A = area(metric).value
    spec = fem_spectrum(surface, levels, count, density=metric)
    return log_det(spec, metric_coefficients(metric, A), tol=tol, consistency=consistency), A


def flat_torus_log_det(sigma: complex, n: int = 64, count: int | None = None):
    """``log det'`` of the flat torus ``C / (Z + sigma Z)`` from ``n`` and ``2n`` grids."""
    sigma = Modulus(sigma).sigma
    if count is None:
        count = int(150 * sigma.imag) + 1
    coarse = initial_mesh(build_flat_torus(sigma, n))
    fine = initial_mesh(build_flat_torus(sigma, 2 * n))
    spec = surface_spectrum(coarse, fine, count)
    return log_det(spec, HeatCoefficients(sigma.imag / (4.0 * math.pi), 0.0))


def ray_singer_closed(sigma: complex) -> float:
    """``log((Im sigma)^2 |eta(sigma)|^4)``, the flat-torus ``log det'`` up to a constant."""
    sigma = complex(sigma)
    return 2.0 * math.log(sigma.imag) + 4.0 * math.log(abs(dedekind_eta(sigma)))


def mt_metric(sigma: complex, p1, p2, orders=MT_ORDERS) -> ConicalTorusMetric:
    return ConicalTorusMetric(Modulus(sigma), (DivisorPoint(*p1, orders[0]), DivisorPoint(*p2, orders[1])))


# --- suites -----------------------------------------------------------------

def suite_cone_defect(betas: Sequence[float] = (math.pi, 1.5 * math.pi, 4 * math.pi, 6 * math.pi),
                      t: float = 0.01, radius: float = 1.0, tol: float = 1e-6,
                      timings: bool = False) -> VerificationReport:
    clock = _Clock(timings)
    checks = []
    for beta in betas:
        num = trace_defect_numeric(ConeParams(float(beta)), radius, t)
        checks.append(CheckRecord(f"trace defect beta={beta:.6g}",
                                  {"beta": float(beta), "t": t, "radius": radius},
                                  trace_defect_closed(beta), num, tol, "abs", clock.lap()))
    return VerificationReport("cone-defect", tuple(checks))


def suite_carslaw(n_points: int = 100, seed: int = 0, tol: float = 1e-10,
                  timings: bool = False) -> VerificationReport:
    """Cone kernel against the plane (angle 2 pi) and the two-image kernel (angle pi)."""
    rng = np.random.default_rng(seed)
    clock = _Clock(timings)
    r = rng.uniform(0.05, 2.0, n_points)
    rho = rng.uniform(0.05, 2.0, n_points)
    t = rng.uniform(0.1, 1.0, n_points)
    checks = []
    for beta in (TWO_PI, math.pi):
        theta = rng.uniform(0.0, beta, n_points)
        psi = rng.uniform(0.0, beta, n_points)
        got = heat_kernel_cone(ConeParams(beta), r, theta, rho, psi, t)
        x = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
        y = np.stack([rho * np.cos(psi), rho * np.sin(psi)], axis=-1)
        ref = heat_kernel_plane(x, y, t)
        if beta == math.pi:
            ref = ref + heat_kernel_plane(x, -y, t)
        name = "plane kernel, beta=2pi" if beta == TWO_PI else "two-image kernel, beta=pi"
        checks.append(CheckRecord(name, {"beta": beta, "points": n_points, "seed": seed},
                                  0.0, float(np.max(np.abs(got - ref))), tol, "abs", clock.lap()))
    return VerificationReport("carslaw", tuple(checks))


def suite_zeta_zero(surface: PolyhedralSurface, levels: int = 5, count: int = 200,
                    times: Sequence[float] | None = None, tol: float = 1e-2, name: str = "surface",
                    timings: bool = False) -> VerificationReport:
    """``a_0 - 1`` fitted from the FEM heat trace against the closed-form ``zeta(0)``.

    ``times`` defaults to three times just above the certification limit
    ``35 / lambda_max``.
    """
    clock = _Clock(timings)
    spec = fem_spectrum(surface, levels, count)
    coeffs = HeatCoefficients.from_surface(surface)
    if times is None:
        t0 = 35.0 / spec.eigenvalues[-1]
        times = (1.05 * t0, 1.3 * t0, 1.6 * t0)
    a0, spread = fit_a0(spec, times, coeffs.a_minus1)
    expected = zeta_zero(cone_points(surface), surface.genus)
    check = CheckRecord(f"zeta(0) on {name}",
                        {"surface": name, "levels": levels, "count": count,
                         "times": [float(x) for x in times]},
                        expected, a0 - 1.0, tol, "abs", clock.lap())
    return VerificationReport("zeta-zero", (check,),
                              {"a0_spread": spread, "lambda_max": float(spec.eigenvalues[-1]),
                               "dofs": spec.n_dofs})


def suite_rescaling(surface: PolyhedralSurface, kappa: float = 2.0, levels: int = 5,
                    count: int = 200, tol: float = 1e-3, name: str = "surface",
                    timings: bool = False) -> VerificationReport:
    """Change of the FEM ``log det'`` under ``g -> kappa g`` against ``e log kappa``.

    The rescaled surface is meshed and solved from scratch. A second check
    multiplies the operator by ``kappa`` instead (eigenvalues times
    ``kappa``), for which the change is ``-e log kappa``.
    """
    clock = _Clock(timings)
    cones = cone_points(surface)
    e = rescaling_exponent(cones, surface.genus)
    base_spec = fem_spectrum(surface, levels, count)
    base = log_det(base_spec, HeatCoefficients.from_surface(surface))
    big = surface.scaled(math.sqrt(kappa))
    scaled = log_det(fem_spectrum(big, levels, count), HeatCoefficients.from_surface(big))
    inputs = {"surface": name, "kappa": kappa, "levels": levels, "count": count}
    checks = [CheckRecord("metric scaled by kappa", dict(inputs, convention="metric"),
                          e * math.log(kappa), scaled.log_det - base.log_det, tol, "abs", clock.lap())]
    coeffs = HeatCoefficients.from_surface(surface)
    op = log_det(base_spec.scaled(kappa), HeatCoefficients(coeffs.a_minus1 / kappa, coeffs.a_0))
    checks.append(CheckRecord("operator scaled by kappa", dict(inputs, convention="operator"),
                              -e * math.log(kappa), op.log_det - base.log_det, tol, "abs", clock.lap()))
    return VerificationReport("rescaling", tuple(checks), {"exponent": e, "log_det": base.log_det})


def certified_top(spec: Spectrum, rtol: float = 1e-2) -> float:
    """Largest eigenvalue below the first one whose error estimate exceeds ``rtol`` relative."""
    lam = spec.eigenvalues
    rel = spec.errors[1:] / lam[1:]
    bad = np.flatnonzero(~(rel < rtol))
    return float(lam[bad[0]] if len(bad) else lam[-1])


def suite_weyl(surface: PolyhedralSurface | None = None, levels: int = 6, count: int = 200,
               tol: float = 0.05, cert_rtol: float = 0.05, name: str = "torus_i",
               timings: bool = False) -> VerificationReport:
    """Slope of the counting function ``N(lambda)`` against ``Area / 4 pi``.

    The fit runs over the certified range: eigenvalues up to the first one
    whose Richardson correction exceeds ``cert_rtol`` relative.
    """
    clock = _Clock(timings)
    surface = fixture("torus_i") if surface is None else surface
    spec = fem_spectrum(surface, levels, count)
    hi = certified_top(spec, cert_rtol)
    if not hi > 0:
        raise QuadratureFailure("no eigenvalue is resolved to the requested accuracy")
    slope = weyl_slope(spec, 0.0, hi)
    check = CheckRecord(f"Weyl slope on {name}",
                        {"surface": name, "levels": levels, "count": count, "cert_rtol": cert_rtol},
                        surface.area / (4.0 * math.pi), slope, tol, "rel", clock.lap())
    return VerificationReport("weyl", (check,), {"certified_top": hi,
                                                 "lambda_max": float(spec.eigenvalues[-1])})


def suite_ray_singer(sigmas: Sequence[complex] = RAY_SINGER_SIGMAS, n: int = 64, tol: float = 0.02,
                     timings: bool = False) -> VerificationReport:
    """Differences of flat-torus ``log det'`` across moduli against the eta formula."""
    if len(sigmas) < 2:
        raise UsageError("need at least two moduli")
    clock = _Clock(timings)
    values = [flat_torus_log_det(complex(s), n).log_det for s in sigmas]
    closed = [ray_singer_closed(s) for s in sigmas]
    clock.lap()
    checks = []
    for k in range(1, len(sigmas)):
        s0, s = complex(sigmas[0]), complex(sigmas[k])
        checks.append(CheckRecord(
            f"log det difference {s} vs {s0}",
            {"sigma": [s.real, s.imag], "reference": [s0.real, s0.imag], "n": n},
            closed[k] - closed[0], values[k] - values[0], tol, "rel", clock.lap()))
    details = {"offsets": [v - c for v, c in zip(values, closed)]}
    return VerificationReport("ray-singer", tuple(checks), details)


def suite_mt(metrics: Sequence[ConicalTorusMetric] | None = None,
             log_dets: Sequence[float | None] | None = None, levels: int = 4, count: int = 200,
             tol: float = 0.02, timings: bool = False) -> VerificationReport:
    """Constancy of ``det' / mt_predictor`` across conical tori with the same orders.

    Missing entries of ``log_dets`` are computed with :func:`metric_log_det`.
    """
    if metrics is None:
        metrics = [mt_metric(*cfg) for cfg in MT_CONFIGURATIONS]
    metrics = list(metrics)
    if len(metrics) < 2:
        raise UsageError("constancy needs at least two metrics")
    if log_dets is None:
        log_dets = [None] * len(metrics)
    if len(log_dets) != len(metrics):
        raise UsageError("give one determinant per metric")
    key = sorted(metrics[0].orders.tolist())
    for m in metrics[1:]:
        if sorted(m.orders.tolist()) != key:
            raise UsageError("all metrics must carry the same cone orders")
    clock = _Clock(timings)
    logs = []
    for m, ld in zip(metrics, log_dets):
        A = area(m).value
        if ld is None:
            ld = metric_log_det(m, levels, count)[0].log_det
        logs.append(ld - math.log(mt_predictor(m, A)))
    spread = math.exp(max(logs) - min(logs)) - 1.0
    check = CheckRecord("relative spread of det / predictor",
                        {"metrics": [m.to_json() for m in metrics], "levels": levels, "count": count},
                        0.0, spread, tol, "abs", clock.lap())
    return VerificationReport("mt", (check,), {"log_ratio": logs, "configurations": len(metrics)})


def random_torus_metric(rng: np.random.Generator, sigma: complex, taken: list[complex],
                        n_points: int, min_gap: float = 0.05) -> ConicalTorusMetric:
    """Random divisor of ``n_points`` cones (orders in (-0.8, 0.8), summing to zero)
    kept ``min_gap`` away from the points in ``taken``."""
    while True:
        b = rng.uniform(-0.8, 0.8, n_points)
        b -= b.mean()
        if np.all(b > -0.95) and np.all(np.abs(b) > 1e-3):
            break
    pts = []
    while len(pts) < n_points:
        u, v = rng.uniform(0.0, 1.0, 2)
        z = u + v * sigma
        if all(_lattice_distance(z - w, sigma) > min_gap for w in taken):
            taken.append(z)
            pts.append((u, v))
    # the last order absorbs rounding so the sum is exactly zero
    b[-1] = -math.fsum(b[:-1])
    div = tuple(DivisorPoint(u, v, float(bk)) for (u, v), bk in zip(pts, b))
    return ConicalTorusMetric(Modulus(sigma), div, float(rng.uniform(0.5, 2.0)))


def suite_three_polyhedra(triples: Sequence[tuple] | None = None, n_random: int = 50, seed: int = 0,
                          tol: float = 1e-8, timings: bool = False) -> VerificationReport:
    """Product of the three cyclic density ratios, which must equal 1."""
    clock = _Clock(timings)
    if triples is None:
        rng = np.random.default_rng(seed)
        triples = []
        for _ in range(n_random):
            sigma = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.6, 2.0))
            taken: list[complex] = []
            triples.append(tuple(random_torus_metric(rng, sigma, taken, int(rng.integers(2, 4)))
                                 for _ in range(3)))
    checks = []
    for k, (l, m, n) in enumerate(triples):
        value = three_polyhedra_product(l, m, n)
        checks.append(CheckRecord(f"triple {k}", {"l": l.to_json(), "m": m.to_json(), "n": n.to_json()},
                                  1.0, value, tol, "abs", clock.lap()))
    return VerificationReport("three-polyhedra", tuple(checks))


def _five_point_laplacian(f, z: complex, h: float) -> float:
    vals = f(np.array([z + h, z - h, z + 1j * h, z - 1j * h, z]))
    return float((vals[0] + vals[1] + vals[2] + vals[3] - 4.0 * vals[4]) / (h * h))


def suite_properties(seed: int = 0, timings: bool = False) -> VerificationReport:
    """Structural properties: Gauss-Bonnet, nested monotonicity, kernel symmetry and
    periodicity, the eta identity for theta-1 and flatness of the conformal factor."""
    clock = _Clock(timings)
    rng = np.random.default_rng(seed)
    checks = []
    for name in FIXTURES:
        checks.append(CheckRecord(f"Gauss-Bonnet residual {name}", {"fixture": name}, 0.0,
                                  abs(gauss_bonnet_residual(fixture(name))), 1e-10, "abs", clock.lap()))

    for name, levels in (("pillowcase", 4), ("l_surface", 3)):
        meshes = mesh_hierarchy(fixture(name), levels)
        specs = [eigenvalues(assemble(m), min(20, m.n_vertices)) for m in meshes[1:]]
        worst = 0.0
        for coarse, fine in zip(specs[:-1], specs[1:]):
            k = min(len(coarse), len(fine))
            rise = (fine.eigenvalues[1:k] - coarse.eigenvalues[1:k]) / coarse.eigenvalues[1:k]
            worst = max(worst, float(np.max(rise)))
        checks.append(CheckRecord(f"eigenvalues decrease under refinement on {name}",
                                  {"fixture": name, "levels": levels}, 0.0, max(worst, 0.0), 1e-9,
                                  "abs", clock.lap()))

    beta, t = 3.0 * math.pi, 0.3
    params = ConeParams(beta)
    r, rho = rng.uniform(0.1, 1.5, 20), rng.uniform(0.1, 1.5, 20)
    th, ps = rng.uniform(0, beta, 20), rng.uniform(0, beta, 20)
    h_xy = heat_kernel_cone(params, r, th, rho, ps, t)
    h_yx = heat_kernel_cone(params, rho, ps, r, th, t)
    h_per = heat_kernel_cone(params, r, th + beta, rho, ps, t)
    scale = 1.0 / (4.0 * math.pi * t)
    checks.append(CheckRecord("cone kernel symmetry", {"beta": beta, "t": t, "seed": seed}, 0.0,
                              float(np.max(np.abs(h_xy - h_yx))) / scale, 1e-12, "abs", clock.lap()))
    checks.append(CheckRecord("cone kernel angular periodicity", {"beta": beta, "t": t, "seed": seed},
                              0.0, float(np.max(np.abs(h_xy - h_per))) / scale, 1e-12, "abs",
                              clock.lap()))

    worst = 0.0
    for sigma in (1j, 0.5 + 0.8j, -0.3 + 1.7j, 0.1 + 0.35j):
        ref = TWO_PI * dedekind_eta(sigma) ** 3
        worst = max(worst, abs(theta1_prime0(sigma) - ref) / abs(ref))
    checks.append(CheckRecord("theta1'(0) = 2 pi eta^3, relative", {"sigmas": 4}, 0.0, worst, 1e-12, "abs",
                              clock.lap()))

    metric = ConicalTorusMetric(Modulus(0.2 + 1.1j), (DivisorPoint(0.0, 0.0, 1.0),
                                                     DivisorPoint(0.5, 0.25, -0.5),
                                                     DivisorPoint(0.25, 0.5, -0.5)))
    z = 0.8 + 0.7j
    lap = [abs(_five_point_laplacian(metric.log_density, z, h)) for h in (0.04, 0.02, 0.01)]
    order = math.log2(lap[1] / lap[2])
    checks.append(CheckRecord("log density flatness order in h", {"z": [z.real, z.imag]}, 2.0, order,
                              0.2, "abs", clock.lap()))
    return VerificationReport("properties", tuple(checks), {"flatness_residuals": lap})
