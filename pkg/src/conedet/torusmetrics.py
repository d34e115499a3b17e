"""Flat conical metrics on the torus ``C / (Z + sigma Z)``.

For a divisor ``sum b_k p_k`` with ``sum b_k = 0`` and ``b_k > -1`` the metric
``rho |dz|^2`` with

    rho(z) = c prod_k |theta1(z - p_k)|^(2 b_k) exp(4 pi Im z sum_k b_k Im p_k / Im sigma)

is flat away from the ``p_k`` and has a cone of angle ``2 pi (b_k + 1)`` at
``p_k``. Writing ``G(w) = log|theta1(w)| - pi (Im w)^2 / Im sigma`` (even and
lattice invariant) this is

    log rho(z) = log c + sum_k 2 b_k G(z - p_k) + (2 pi / Im sigma) sum_k b_k (Im p_k)^2,

which is how it is evaluated. The last constant depends on the lattice
representative of the ``p_k``; points are therefore stored with lattice
coordinates in ``[0, 1)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

from conedet.errors import (DensityNotIntegrable, DivisorsIntersect, EvaluationAtConePoint,
                            IndexOutOfRange, QuadratureFailure)
from conedet.specialfn import Modulus, dedekind_eta, log_theta_invariant, theta1_prime0
from conedet.spectral import _collapsed_rule

MIN_SEPARATION = 1e-3
ORDER_SUM_TOL = 1e-12


@dataclass(frozen=True)
class DivisorPoint:
    """Point ``u + v sigma`` of the torus carrying a cone of order ``b``."""

    u: float
    v: float
    b: float


def _lattice_distance(dz: complex, sigma: complex) -> float:
    """Distance from ``dz`` to the nearest lattice point."""
    s = sigma.imag
    n0 = math.floor(dz.imag / s)
    best = math.inf
    for n in (n0 - 1, n0, n0 + 1, n0 + 2):
        x = dz - n * sigma
        m0 = math.floor(x.real)
        for m in (m0 - 1, m0, m0 + 1, m0 + 2):
            best = min(best, abs(x - m))
    return best


@dataclass(frozen=True)
class ConicalTorusMetric:
    """Genus-one flat conical metric from a modulus, a divisor and a scale."""

    modulus: Modulus
    divisor: tuple[DivisorPoint, ...] = field(default=())
    scale: float = 1.0

    def __post_init__(self):
        mod = self.modulus if isinstance(self.modulus, Modulus) else Modulus(complex(self.modulus))
        object.__setattr__(self, "modulus", mod)
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        pts = []
        for d in self.divisor:
            if not isinstance(d, DivisorPoint):
                d = DivisorPoint(*d)
            if not d.b > -1.0:
                raise DensityNotIntegrable(f"cone order {d.b} must exceed -1")
            u, v = float(d.u) % 1.0, float(d.v) % 1.0
            # values like 1 - 1e-17 round to 1.0 under %
            pts.append(DivisorPoint(u if u < 1.0 else 0.0, v if v < 1.0 else 0.0, float(d.b)))
        object.__setattr__(self, "divisor", tuple(pts))
        total = math.fsum(d.b for d in pts)
        if abs(total) > ORDER_SUM_TOL:
            raise ValueError(f"cone orders must sum to zero on a torus, got {total!r}")
        P = self.points
        for i in range(len(P)):
            for j in range(i + 1, len(P)):
                if _lattice_distance(P[i] - P[j], self.sigma) < MIN_SEPARATION:
                    raise DivisorsIntersect(f"divisor points {i} and {j} are closer than {MIN_SEPARATION}")

    @property
    def sigma(self) -> complex:
        return self.modulus.sigma

    @property
    def points(self) -> np.ndarray:
        return np.array([d.u + d.v * self.sigma for d in self.divisor], dtype=complex)

    @property
    def orders(self) -> np.ndarray:
        return np.array([d.b for d in self.divisor], dtype=float)

    def cone_angles(self) -> np.ndarray:
        return 2.0 * math.pi * (self.orders + 1.0)

    def scaled(self, kappa: float) -> "ConicalTorusMetric":
        return ConicalTorusMetric(self.modulus, self.divisor, self.scale * kappa)

    def _log_constant(self) -> float:
        s = self.sigma.imag
        y = self.points.imag
        return math.log(self.scale) + 2.0 * math.pi / s * float(np.sum(self.orders * y * y))

    def log_density(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.full(z.shape, self._log_constant())
        for p, b in zip(self.points, self.orders):
            if b != 0.0:
                out = out + 2.0 * b * log_theta_invariant(z - p, self.sigma)
        return out

    # density protocol used by spectral.assemble
    def evaluate(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        return np.exp(self.log_density(xy[..., 0] + 1j * xy[..., 1]))

    def vertex_orders(self, surface) -> dict[int, float]:
        """Surface vertex classes sitting on divisor points, with their orders.

        Every point of nonzero order must be a vertex of ``surface`` (a
        triangulated fundamental domain whose charts are ``z`` coordinates).
        """
        corners = surface.triangles.reshape(-1, 2)
        classes = surface.corner_class.ravel()
        out = {}
        for p, b in zip(self.points, self.orders):
            if b == 0.0:
                continue
            d = np.array([_lattice_distance(complex(x, y) - p, self.sigma) for x, y in corners])
            hit = np.flatnonzero(d < 1e-9)
            if not len(hit):
                raise QuadratureFailure(f"divisor point {p} is not a vertex of the mesh")
            out[int(classes[hit[0]])] = float(b)
        return out

    def to_json(self) -> dict:
        return {"sigma": [self.sigma.real, self.sigma.imag], "scale": self.scale,
                "divisor": [{"u": d.u, "v": d.v, "b": d.b} for d in self.divisor]}


def metric_from_json(doc) -> ConicalTorusMetric:
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    sigma = complex(*doc["sigma"])
    divisor = tuple(DivisorPoint(float(d["u"]), float(d["v"]), float(d["b"]))
                    for d in doc.get("divisor", []))
    return ConicalTorusMetric(Modulus(sigma), divisor, float(doc.get("scale", 1.0)))


def read_metric(path) -> ConicalTorusMetric:
    with open(path, encoding="utf-8") as fh:
        return metric_from_json(json.load(fh))


def density(metric: ConicalTorusMetric, z):
    """``rho(z)``; raises :class:`EvaluationAtConePoint` on a divisor point."""
    zz = np.asarray(z, dtype=complex)
    for p, b in zip(metric.points, metric.orders):
        if b == 0.0:
            continue
        for w in np.atleast_1d(zz).ravel():
            if _lattice_distance(complex(w) - p, metric.sigma) < 1e-14:
                raise EvaluationAtConePoint(f"density is singular at {complex(w)}")
    out = np.exp(metric.log_density(zz))
    return float(out) if out.ndim == 0 else out


# --- area -------------------------------------------------------------------

@dataclass(frozen=True)
class AreaResult:
    value: float
    error: float
    triangles: int


def _base_triangulation(metric: ConicalTorusMetric, grid: int):
    """Triangles covering the fundamental parallelogram with divisor points as vertices."""
    sigma = metric.sigma
    uv = [(i / grid, j / grid) for i in range(grid + 1) for j in range(grid + 1)]
    sing = []
    for d in metric.divisor:
        if d.b == 0.0:
            continue
        for du in (0.0, 1.0):
            for dv in (0.0, 1.0):
                u, v = d.u + du, d.v + dv
                if u <= 1.0 and v <= 1.0:
                    sing.append(((u, v), d.b))
    grid_pts = np.array(uv)
    # drop interior grid points that would make slivers next to a singular point;
    # the boundary stays so the triangles still tile the whole cell
    keep = np.ones(len(grid_pts), dtype=bool)
    on_border = np.any(np.isclose(grid_pts, 0.0) | np.isclose(grid_pts, 1.0), axis=1)
    for (u, v), _ in sing:
        d = np.hypot(grid_pts[:, 0] - u, grid_pts[:, 1] - v)
        keep &= ~((d < 0.25 / grid) & ~on_border) & ~(d < 1e-12)
    pts = np.concatenate([grid_pts[keep], np.array([p for p, _ in sing]).reshape(-1, 2)])
    z = pts[:, 0] + pts[:, 1] * sigma
    xy = np.stack([z.real, z.imag], axis=1)
    tri = Delaunay(xy)
    corners = xy[tri.simplices]
    orders = np.zeros(tri.simplices.shape)
    for (u, v), b in sing:
        zs = u + v * sigma
        hit = np.isclose(corners[..., 0], zs.real, atol=1e-13) & np.isclose(corners[..., 1], zs.imag, atol=1e-13)
        orders[hit] = b
    return corners, orders


def _rule_values(metric, corners: np.ndarray, orders: np.ndarray, rule) -> np.ndarray:
    """Integral of ``rho`` over each triangle with the given collapsed rule.

    The apex of the rule is put on the singular corner (if any).
    """
    out = np.empty(len(corners))
    apex = np.where(orders != 0.0, np.arange(3)[None, :], -1).max(axis=1)
    apex = np.where(apex < 0, 0, apex)
    multiple = np.count_nonzero(orders, axis=1) > 1
    for a in range(3):
        sel = np.flatnonzero(apex == a)
        if not len(sel):
            continue
        perm = [(a + i) % 3 for i in range(3)]
        local = corners[sel][:, perm]
        b = orders[sel, a]
        area2 = np.abs((local[:, 1, 0] - local[:, 0, 0]) * (local[:, 2, 1] - local[:, 0, 1])
                       - (local[:, 1, 1] - local[:, 0, 1]) * (local[:, 2, 0] - local[:, 0, 0]))
        for bval in np.unique(b):
            idx = np.flatnonzero(b == bval)
            bary, weights, S = rule(bval)
            pts = np.einsum("qk,tkd->tqd", bary, local[idx])
            vals = metric.evaluate(pts) * (S ** (-2.0 * bval) * weights)[None, :]
            out[sel[idx]] = vals.sum(axis=1) * area2[idx]
    # two singular corners: no single rule applies, force a split
    out[multiple] = np.nan
    return out


def _children(corners: np.ndarray, orders: np.ndarray):
    c0, c1, c2 = corners[:, 0], corners[:, 1], corners[:, 2]
    m01, m12, m20 = 0.5 * (c0 + c1), 0.5 * (c1 + c2), 0.5 * (c2 + c0)
    z = np.zeros(len(corners))
    o0, o1, o2 = orders[:, 0], orders[:, 1], orders[:, 2]
    kids = [((c0, m01, m20), (o0, z, z)), ((m01, c1, m12), (z, o1, z)),
            ((m20, m12, c2), (z, z, o2)), ((m01, m12, m20), (z, z, z))]
    cs = np.concatenate([np.stack(k, axis=1) for k, _ in kids])
    os_ = np.concatenate([np.stack(o, axis=1) for _, o in kids])
    return cs, os_


def area(metric: ConicalTorusMetric, rtol: float = 1e-10, order: int = 8,
         max_depth: int = 40) -> AreaResult:
    """``int rho`` over a fundamental domain with adaptive singular quadrature.

    Each triangle is accepted when its rule value agrees with the sum over
    its four children within its share of ``rtol``. Raises
    :class:`QuadratureFailure` if that does not happen within ``max_depth``.
    """
    if all(d.b == 0.0 for d in metric.divisor):
        return AreaResult(metric.scale * metric.sigma.imag, 0.0, 0)
    cache = {}

    def rule(b):
        if b not in cache:
            cache[b] = _collapsed_rule(order, 2.0 * b + 1.0, order if b == 0.0 else 3 * order)
        return cache[b]

    corners, orders = _base_triangulation(metric, 4)
    coarse = _rule_values(metric, corners, orders, rule)
    estimate = np.nansum(coarse)
    total = 0.0
    err = 0.0
    count = 0
    depth = 0
    while len(corners):
        if depth > max_depth:
            raise QuadratureFailure("area quadrature did not converge")
        kc, ko = _children(corners, orders)
        kv = _rule_values(metric, kc, ko, rule)
        n = len(corners)
        fine = kv.reshape(4, n).sum(axis=0)
        diff = np.abs(fine - coarse)
        share = rtol * abs(estimate) * (0.75 ** depth) / 8.0
        ok = diff <= share
        total += fine[ok].sum()
        err += diff[ok].sum()
        count += int(ok.sum())
        keep = np.flatnonzero(~ok)
        sel = (np.arange(4)[:, None] * n + keep[None, :]).ravel()
        corners, orders, coarse = kc[sel], ko[sel], kv[sel]
        depth += 1
    return AreaResult(float(total), float(err), count)


# --- distinguished parameters -----------------------------------------------

def log_h(metric: ConicalTorusMetric, k: int) -> float:
    """``log lim rho(z) / |z - p_k|^(2 b_k)`` at the ``k``-th divisor point."""
    if not 0 <= k < len(metric.divisor):
        raise IndexOutOfRange(f"divisor index {k} out of range 0..{len(metric.divisor) - 1}")
    P, B = metric.points, metric.orders
    out = metric._log_constant() + 2.0 * B[k] * math.log(abs(theta1_prime0(metric.sigma)))
    for j in range(len(P)):
        if j != k and B[j] != 0.0:
            out += 2.0 * B[j] * float(log_theta_invariant(P[k] - P[j], metric.sigma))
    return out


def distinguished_scale(metric: ConicalTorusMetric, k: int) -> tuple[float, float]:
    """``(|g_k|, |f_k|)`` at the ``k``-th divisor point.

    ``|g_k| = sqrt(h_k)`` is the metric coefficient in the ``z`` chart and
    ``|f_k| = h_k^(-1 / (2 (b_k + 1)))`` the modulus of ``dz / dx`` in the
    parameter ``x`` where the metric is exactly ``|x|^(2 b_k) |dx|^2``.
    """
    lh = log_h(metric, k)
    b = metric.orders[k]
    return math.exp(0.5 * lh), math.exp(-lh / (2.0 * (b + 1.0)))


def mt_predictor(metric: ConicalTorusMetric, area_value: float | None = None) -> float:
    """``Im sigma * Area * |eta(sigma)|^4 * prod |f_k|^(-b_k / 6)``."""
    A = area(metric).value if area_value is None else area_value
    log_val = math.log(metric.sigma.imag) + math.log(A) + 4.0 * math.log(abs(dedekind_eta(metric.sigma)))
    for k, b in enumerate(metric.orders):
        if b != 0.0:
            lh = log_h(metric, k)
            log_val += (-b / 6.0) * (-lh / (2.0 * (b + 1.0)))
    return math.exp(log_val)


def _same_metric(m1: ConicalTorusMetric, m2: ConicalTorusMetric) -> bool:
    return m1.sigma == m2.sigma and m1.scale == m2.scale and m1.divisor == m2.divisor


def _check_disjoint(*metrics: ConicalTorusMetric) -> None:
    sigma = metrics[0].sigma
    for m in metrics[1:]:
        if m.sigma != sigma:
            raise ValueError("metrics must live on the same torus")
    for i in range(len(metrics)):
        for j in range(i + 1, len(metrics)):
            for p, a in zip(metrics[i].points, metrics[i].orders):
                for q, b in zip(metrics[j].points, metrics[j].orders):
                    if a != 0.0 and b != 0.0 and _lattice_distance(p - q, sigma) < MIN_SEPARATION:
                        raise DivisorsIntersect(f"cone points {p} and {q} coincide")


def polyakov_ratio(m1: ConicalTorusMetric, m2: ConicalTorusMetric,
                   areas: tuple[float, float] | None = None) -> float:
    """``(Area_1 / Area_2) prod_l |g_l|^(b_l/6) / prod_k |f_k|^(a_k/6)``.

    ``f_k`` is the coefficient of ``m2`` in the distinguished parameter of
    ``m1`` at its cone ``P_k`` (orders ``a_k``), and ``g_l`` that of ``m1`` in
    the distinguished parameter of ``m2`` at ``Q_l`` (orders ``b_l``).
    """
    if _same_metric(m1, m2):
        return 1.0
    _check_disjoint(m1, m2)
    A1, A2 = areas if areas is not None else (area(m1).value, area(m2).value)
    out = math.log(A1) - math.log(A2)
    for k, (p, a) in enumerate(zip(m1.points, m1.orders)):
        if a != 0.0:
            log_f = 0.5 * float(m2.log_density(p)) - log_h(m1, k) / (2.0 * (a + 1.0))
            out -= a / 6.0 * log_f
    for l, (q, b) in enumerate(zip(m2.points, m2.orders)):
        if b != 0.0:
            log_g = 0.5 * float(m1.log_density(q)) - log_h(m2, l) / (2.0 * (b + 1.0))
            out += b / 6.0 * log_g
    return math.exp(out)


def three_polyhedra_product(l: ConicalTorusMetric, m: ConicalTorusMetric,
                            n: ConicalTorusMetric) -> float:
    """``prod [l/m(R_i)]^c_i prod [m/n(P_j)]^a_j prod [n/l(Q_k)]^b_k``.

    ``P, Q, R`` are the cones of ``l, m, n`` with orders ``a, b, c``; each
    ratio is a ratio of densities at the point.
    """
    _check_disjoint(l, m, n)
    total = 0.0
    for first, second, owner in ((l, m, n), (m, n, l), (n, l, m)):
        for p, c in zip(owner.points, owner.orders):
            if c != 0.0:
                total += c * float(first.log_density(p) - second.log_density(p))
    return math.exp(total)
