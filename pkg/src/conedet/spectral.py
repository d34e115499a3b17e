"""Finite element spectra, heat traces and zeta-regularized determinants.

Conforming P1 elements on a :class:`~conedet.surface.MeshLevel` approximate the
Friedrichs Laplacian: the discrete space consists of continuous functions
that are bounded at the cone points. A conformal factor ``rho`` enters only
through the mass matrix, because the Dirichlet form is conformally invariant
in two dimensions.

The determinant uses the split of the Mellin integral at a time ``T``:

    zeta'(0) = (a_0 - 1)(gamma + log T) - a_{-1}/T + sum_{lambda > 0} E_1(lambda T)
               + int_0^T R(t) dt / t,

where ``a_{-1}/t + a_0 + R(t)`` is the heat trace (zero mode included) and
``R`` is exponentially small for small ``T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import exp1, roots_jacobi, roots_legendre

from conedet.errors import (DensityNotIntegrable, GaussBonnetViolation, InconsistentCoefficients,
                            NonpositiveTime, QuadratureFailure, SolverBreakdown,
                            TruncationUncertified)
from conedet.surface import ConePoint, MeshLevel, cone_points, signed_areas

TWO_PI = 2.0 * math.pi
DENSE_LIMIT = 3000
CERTIFY_EXPONENT = 30.0
DEFAULT_SPLIT = 35.0
REGULAR_ORDER = 5
SINGULAR_ORDER = 12


@dataclass(frozen=True)
class DiscreteOperatorPair:
    """P1 stiffness ``K`` and (density weighted) mass ``M`` on a mesh."""

    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    n: int
    area: float
    h: float
    level: int = 0

    def scaled_mass(self, kappa: float) -> "DiscreteOperatorPair":
        return DiscreteOperatorPair(self.stiffness, (kappa * self.mass).tocsr(), self.n,
                                    kappa * self.area, self.h, self.level)


# --- quadrature -------------------------------------------------------------

def _collapsed_rule(order: int, gamma: float = 1.0, order_w: int | None = None):
    """Rule on the reference triangle with apex ``(0, 0)`` and base ``(1,0)-(0,1)``.

    Points are ``s * ((1 - w), w)``; the weights integrate ``s**gamma * f``
    against ``ds dw`` and still need the factor ``s**(1 - gamma)`` supplied by
    the caller (the area Jacobian is ``s``). Returned as barycentric
    coordinates ``(l0, l1, l2)`` with the apex at corner 0. ``order_w`` is the
    number of angular nodes (default ``order``).
    """
    xs, ws = roots_jacobi(order, 0.0, gamma)
    s = 0.5 * (xs + 1.0)
    ws = ws * 0.5 ** (gamma + 1.0)
    xw, ww = roots_legendre(order if order_w is None else order_w)
    w = 0.5 * (xw + 1.0)
    ww = 0.5 * ww
    S, W = np.meshgrid(s, w, indexing="ij")
    weights = np.outer(ws, ww).ravel()
    S, W = S.ravel(), W.ravel()
    bary = np.stack([1.0 - S, S * (1.0 - W), S * W], axis=1)
    return bary, weights, S


_REGULAR = _collapsed_rule(REGULAR_ORDER, 1.0)


def _mass_entries(coords: np.ndarray, rho) -> np.ndarray:
    """Weighted local mass matrices ``int rho phi_i phi_j`` for regular triangles."""
    bary, weights, _ = _REGULAR
    area2 = 2.0 * np.abs(signed_areas(coords))
    pts = np.einsum("qk,tkd->tqd", bary, coords)
    vals = rho(pts) * weights[None, :]
    return np.einsum("tq,qi,qj,t->tij", vals, bary, bary, area2)


def _singular_mass(corners: np.ndarray, apex: int, order: float, rho) -> np.ndarray:
    """Local mass matrix of a triangle with ``rho ~ |z - corners[apex]|**(2 order)``."""
    gamma = 2.0 * order + 1.0
    bary, weights, S = _collapsed_rule(SINGULAR_ORDER, gamma, 2 * SINGULAR_ORDER)
    perm = [(apex + i) % 3 for i in range(3)]
    local = corners[perm]
    pts = bary @ local
    area2 = 2.0 * abs(signed_areas(corners[None])[0])
    vals = rho(pts) * S ** (-2.0 * order) * weights
    m = np.einsum("q,qi,qj->ij", vals, bary, bary) * area2
    out = np.empty((3, 3))
    out[np.ix_(perm, perm)] = m
    return out


def _split_triangle(corners: np.ndarray):
    m01 = 0.5 * (corners[0] + corners[1])
    m12 = 0.5 * (corners[1] + corners[2])
    m20 = 0.5 * (corners[2] + corners[0])
    return [np.array(c) for c in ((corners[0], m01, m20), (m01, corners[1], m12),
                                  (m20, m12, corners[2]), (m01, m12, m20))]


def _element_mass(corners: np.ndarray, orders: Sequence[float], rho, depth: int = 0) -> np.ndarray:
    """Local mass with several singular corners, by splitting until each piece has one."""
    sing = [i for i in range(3) if orders[i] != 0.0]
    if len(sing) == 1:
        return _singular_mass(corners, sing[0], orders[sing[0]], rho)
    if not sing:
        return _mass_entries(corners[None], rho)[0]
    if depth > 6:
        raise QuadratureFailure("could not separate singular corners")
    out = np.zeros((3, 3))
    # barycentric map from each child back to the parent
    full = np.linalg.inv(np.vstack([corners.T, np.ones(3)]))
    for child in _split_triangle(corners):
        child_orders = []
        for p in child:
            hit = [orders[i] for i in range(3) if np.allclose(p, corners[i], atol=0.0, rtol=0.0)]
            child_orders.append(hit[0] if hit else 0.0)
        mc = _element_mass(child, child_orders, rho, depth + 1)
        B = full @ np.vstack([child.T, np.ones(3)])  # parent barycentrics of child corners
        out += B @ mc @ B.T
    return out


# --- assembly ---------------------------------------------------------------

def _local_stiffness(coords: np.ndarray) -> np.ndarray:
    """``K_ij = (e_i . e_j) / (4 A)`` with ``e_i`` the edge opposite corner ``i``."""
    e = np.stack([coords[:, 2] - coords[:, 1], coords[:, 0] - coords[:, 2],
                  coords[:, 1] - coords[:, 0]], axis=1)
    area = np.abs(signed_areas(coords))
    return np.einsum("tid,tjd->tij", e, e) / (4.0 * area[:, None, None])


_P1_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


def _scatter(vertices: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    rows = np.repeat(vertices, 3, axis=1).ravel()
    cols = np.tile(vertices, (1, 3)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    return mat


def assemble(mesh: MeshLevel, density=None) -> DiscreteOperatorPair:
    """Assemble P1 stiffness and mass matrices on ``mesh``.

    ``density`` is ``None`` (flat metric), a positive constant, or an object
    with ``evaluate(points)`` on chart coordinates of shape ``(..., 2)`` and
    ``vertex_orders(surface)`` mapping surface vertex classes to the power
    ``b`` in ``rho ~ |z - p|**(2 b)``. Triangles touching such a vertex are
    integrated with a Gauss-Jacobi rule exact in the radial power.
    """
    coords = mesh.coords
    n = mesh.n_vertices
    K = _scatter(mesh.vertices, _local_stiffness(coords), n)
    area = np.abs(signed_areas(coords))
    if density is None or np.isscalar(density):
        kappa = 1.0 if density is None else float(density)
        if not kappa > 0:
            raise ValueError("constant density must be positive")
        local = kappa * area[:, None, None] * _P1_MASS[None]
    else:
        orders = dict(density.vertex_orders(mesh.surface))
        for k, b in orders.items():
            if not b > -1.0:
                raise DensityNotIntegrable(f"order {b} at vertex class {k} is not > -1")
        corner_order = np.zeros(mesh.vertices.shape)
        for k, b in orders.items():
            ids = np.flatnonzero(mesh.vertex_class == k)
            corner_order[np.isin(mesh.vertices, ids)] = b
        rho = density.evaluate
        singular = np.flatnonzero(np.any(corner_order != 0.0, axis=1))
        regular = np.setdiff1d(np.arange(len(coords)), singular)
        local = np.empty((len(coords), 3, 3))
        if len(regular):
            local[regular] = _mass_entries(coords[regular], rho)
        for t in singular:
            local[t] = _element_mass(coords[t], corner_order[t], rho)
        if not np.all(np.isfinite(local)):
            raise QuadratureFailure("non-finite mass entries")
    M = _scatter(mesh.vertices, local, n)
    return DiscreteOperatorPair(K, M, n, float(local.sum()), mesh.h, mesh.level)


# --- eigenvalues ------------------------------------------------------------

@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues with a per-eigenvalue error estimate.

    ``errors`` is the Richardson correction for extrapolated spectra and the
    relative solver residual otherwise.
    """

    eigenvalues: np.ndarray
    errors: np.ndarray
    n_dofs: int = 0
    h: float = float("nan")
    level: int = 0
    area: float = float("nan")
    extrapolated: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.eigenvalues)

    def scaled(self, factor: float) -> "Spectrum":
        """Spectrum of the operator multiplied by ``factor``."""
        return Spectrum(self.eigenvalues * factor, self.errors * factor, self.n_dofs, self.h,
                        self.level, self.area / factor, self.extrapolated, dict(self.meta))


def _start_vector(n: int) -> np.ndarray:
    return 1.0 + 0.5 * np.cos(0.7 * np.arange(n)) + 0.25 * np.sin(1.3 * np.arange(n) ** 1.1)


def eigenvalues(pair: DiscreteOperatorPair, count: int) -> Spectrum:
    """Smallest ``count`` generalized eigenvalues of ``K x = lambda M x``.

    Dense LAPACK for ``n <= 3000``, shift-invert Lanczos about ``-1`` (in units
    of the smallest nonzero scale) otherwise, with a fixed start vector.
    """
    n = pair.n
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}], got {count}")
    K, M = pair.stiffness, pair.mass
    try:
        if n <= DENSE_LIMIT or count >= n - 1:
            vals, vecs = scipy.linalg.eigh(K.toarray(), M.toarray(), subset_by_index=[0, count - 1])
        else:
            shift = -1.0 / max(pair.area, 1e-300)
            ncv = min(n, max(2 * count + 1, count + 40))
            vals, vecs = spla.eigsh(K, k=count, M=M, sigma=shift, which="LM", ncv=ncv,
                                    v0=_start_vector(n), tol=1e-13, maxiter=20 * n)
    except (np.linalg.LinAlgError, spla.ArpackError, spla.ArpackNoConvergence, ValueError) as exc:
        raise SolverBreakdown(str(exc)) from exc
    order = np.argsort(vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    if not np.all(np.isfinite(vals)):
        raise SolverBreakdown("non-finite eigenvalues")
    Kx = K @ vecs
    Mx = M @ vecs
    resid = np.linalg.norm(Kx - Mx * vals[None, :], axis=0)
    scale = np.linalg.norm(Kx, axis=0) + np.abs(vals) * np.linalg.norm(Mx, axis=0)
    rel = resid / np.where(scale > 0, scale, 1.0)
    ref = vals[1] if count > 1 else 1.0
    if abs(vals[0]) > 1e-8 * max(abs(ref), 1.0):
        raise SolverBreakdown(f"lowest eigenvalue {vals[0]!r} is not the constant mode")
    vals = vals.copy()
    vals[0] = 0.0
    return Spectrum(vals, rel * np.abs(vals), n, pair.h, pair.level, pair.area)


def richardson(fine: Spectrum, coarse: Spectrum, order: float = 2.0,
               max_correction: float = 0.25) -> Spectrum:
    """Extrapolate eigenvalues of two nested meshes with error ``O(h**order)``.

    Only the indices present in both spectra are kept, and only up to the
    first mode outside the asymptotic regime: the extrapolated value must be
    positive with a correction of at most ``max_correction`` relative. Modes
    near the top of the coarse space fail this and are dropped.
    """
    k = requested = min(len(fine), len(coarse))
    f = fine.eigenvalues[:k]
    c = coarse.eigenvalues[:k]
    r = 2.0 ** order
    corr = (f - c) / (r - 1.0)
    vals = f + corr
    vals[0] = 0.0
    bad = np.flatnonzero(~((vals[1:] > 0) & (np.abs(corr[1:]) <= max_correction * vals[1:])))
    if len(bad):
        k = int(bad[0]) + 1
        if k < 2:
            raise SolverBreakdown("no eigenvalue is in the extrapolation regime; refine further")
        vals, corr = vals[:k], corr[:k]
    # extrapolation can swap nearly degenerate modes; keep the spectrum ascending
    order = np.argsort(vals, kind="stable")
    vals, corr = vals[order], corr[order]
    meta = dict(fine.meta)
    meta.update(coarse_dofs=coarse.n_dofs, coarse_level=coarse.level, dropped=requested - k)
    return Spectrum(vals, np.abs(corr), fine.n_dofs, fine.h, fine.level, fine.area, True, meta)


def surface_spectrum(mesh_coarse: MeshLevel, mesh_fine: MeshLevel | None, count: int,
                     density=None) -> Spectrum:
    """Eigenvalues on ``mesh_fine`` extrapolated with ``mesh_coarse`` (or just one level)."""
    coarse = eigenvalues(assemble(mesh_coarse, density), min(count, mesh_coarse.n_vertices))
    if mesh_fine is None:
        return coarse
    fine = eigenvalues(assemble(mesh_fine, density), count)
    return richardson(fine, coarse)


# --- heat trace -------------------------------------------------------------

def _check_t(t: float) -> float:
    t = float(t)
    if not t > 0:
        raise NonpositiveTime(f"t must be positive, got {t}")
    return t


def weyl_bound_slope(spectrum: Spectrum) -> float:
    """Upper slope ``dN / d lambda`` used for tail bounds (twice the larger estimate)."""
    lam = spectrum.eigenvalues
    top = lam[-1]
    fitted = (len(lam) - 1) / top if top > 0 else 0.0
    weyl = spectrum.area / (4.0 * math.pi) if math.isfinite(spectrum.area) else 0.0
    return 2.0 * max(fitted, weyl)


def heat_trace_tail(spectrum: Spectrum, t: float) -> float:
    """Bound on ``sum exp(-lambda t)`` over eigenvalues beyond the computed ones."""
    t = _check_t(t)
    lam_max = spectrum.eigenvalues[-1]
    return weyl_bound_slope(spectrum) * math.exp(-lam_max * t) / t


def heat_trace(spectrum: Spectrum, t: float, certify: bool = True) -> float:
    """``sum_k exp(-lambda_k t)`` including the zero mode."""
    t = _check_t(t)
    lam = spectrum.eigenvalues
    if certify and lam[-1] * t < CERTIFY_EXPONENT:
        raise TruncationUncertified(
            f"lambda_max * t = {lam[-1] * t:.3g} < {CERTIFY_EXPONENT}; compute more eigenvalues")
    return float(np.sum(np.exp(-lam * t)))


@dataclass(frozen=True)
class HeatCoefficients:
    """Small-time heat trace ``a_minus1 / t + a_0`` of a flat conical surface."""

    a_minus1: float
    a_0: float

    @classmethod
    def from_cones(cls, area: float, cones: Sequence, genus: int | None = None) -> "HeatCoefficients":
        angles = _angles(cones)
        a0 = sum((TWO_PI / b - b / TWO_PI) for b in angles) / 12.0
        if genus is not None:
            a0_alt = zeta_zero(cones, genus) + 1.0
            if abs(a0 - a0_alt) > 1e-12:
                raise InconsistentCoefficients("a_0 does not match zeta(0) + 1")
        return cls(area / (4.0 * math.pi), a0)

    @classmethod
    def from_surface(cls, surface) -> "HeatCoefficients":
        return cls.from_cones(surface.area, cone_points(surface), surface.genus)

    def powers(self) -> dict[float, float]:
        return {-1.0: self.a_minus1, 0.0: self.a_0}


def fit_heat_coefficients(spectrum: Spectrum, times: Sequence[float]):
    """Least-squares fit of ``a_{-1}/t + a_0`` to the heat trace at ``times``.

    Returns ``(a_minus1, a_0, residuals)``.
    """
    ts = np.array([_check_t(t) for t in times])
    vals = np.array([heat_trace(spectrum, t) for t in ts])
    A = np.stack([1.0 / ts, np.ones_like(ts)], axis=1)
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    return float(coef[0]), float(coef[1]), vals - A @ coef


def fit_a0(spectrum: Spectrum, times: Sequence[float], a_minus1: float):
    """``a_0`` from the heat trace with the area term removed, averaged over ``times``.

    Returns ``(mean, spread)``.
    """
    vals = np.array([heat_trace(spectrum, t) - a_minus1 / t for t in times])
    return float(np.mean(vals)), float(np.ptp(vals))


# --- zeta(0) and rescaling --------------------------------------------------

def _angles(cones) -> list[float]:
    out = []
    for c in cones:
        beta = c.angle if isinstance(c, ConePoint) else float(c)
        if not beta > 0:
            raise ValueError(f"cone angle must be positive, got {beta}")
        out.append(beta)
    return out


def _check_gauss_bonnet(angles, genus: int) -> None:
    total = sum(b / TWO_PI - 1.0 for b in angles)
    if abs(total - (2 * genus - 2)) > 1e-9:
        raise GaussBonnetViolation(
            f"sum of cone orders {total!r} differs from 2g - 2 = {2 * genus - 2}")


def zeta_zero(cones, genus: int) -> float:
    """``zeta(0) = (1/12) sum (2 pi / beta - beta / 2 pi) - 1``.

    ``cones`` holds :class:`ConePoint` values or bare angles. The second form
    ``chi/6 - 1 + (1/12) sum (2 pi/beta + beta/2 pi - 2)`` is evaluated too and
    must agree.
    """
    angles = _angles(cones)
    _check_gauss_bonnet(angles, genus)
    first = math.fsum((TWO_PI / b - b / TWO_PI) for b in angles) / 12.0 - 1.0
    chi = 2 - 2 * genus
    second = chi / 6.0 - 1.0 + math.fsum((TWO_PI / b + b / TWO_PI - 2.0) for b in angles) / 12.0
    if abs(first - second) > 1e-12 * max(1.0, len(angles)):
        raise GaussBonnetViolation(f"closed forms disagree: {first!r} vs {second!r}")
    return first


def zeta_zero_euler(cones, genus: int) -> float:
    """The Euler-characteristic form of ``zeta(0)``."""
    angles = _angles(cones)
    _check_gauss_bonnet(angles, genus)
    chi = 2 - 2 * genus
    return chi / 6.0 - 1.0 + math.fsum((TWO_PI / b + b / TWO_PI - 2.0) for b in angles) / 12.0


def rescaling_exponent(cones, genus: int) -> float:
    """Exponent ``e`` in ``det(kappa m) = kappa**e det(m)``; equals ``-zeta(0)``."""
    angles = _angles(cones)
    _check_gauss_bonnet(angles, genus)
    chi = 2 - 2 * genus
    e = -(chi / 6.0 - 1.0) - math.fsum((TWO_PI / b + b / TWO_PI - 2.0) for b in angles) / 12.0
    z = zeta_zero(cones, genus)
    if abs(e + z) > 1e-12 * max(1.0, len(angles)):
        raise GaussBonnetViolation("rescaling exponent is not -zeta(0)")
    return e


# --- determinant ------------------------------------------------------------

@dataclass(frozen=True)
class ZetaDetResult:
    """``log det = -zeta'(0)`` with the diagnostics of the split at ``T``."""

    log_det: float
    zeta0_numeric: float
    zeta0_closed: float
    split_time: float
    lambda_max_T: float
    tail_bound: float
    error_estimate: float
    n_eigenvalues: int

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def log_det_from_powers(eigs: np.ndarray, powers: Mapping[float, float], T: float):
    """``-zeta'(0)`` for a heat trace ``sum_alpha c_alpha t**alpha`` plus eigenvalue sum.

    ``eigs`` are the nonzero eigenvalues; ``powers`` the small-time expansion
    of the full trace including the zero mode (so the ``t**0`` coefficient
    is ``zeta(0) + 1``). Returns ``(log_det, zeta0)``.
    """
    T = _check_t(T)
    eigs = np.asarray(eigs, dtype=float)
    if np.any(eigs <= 0):
        raise ValueError("eigenvalues passed to the eigenvalue sum must be positive")
    zp = math.fsum(exp1(eigs * T))
    c0 = 0.0
    for alpha, c in powers.items():
        if alpha == 0.0:
            c0 = c
        else:
            zp += c * T ** alpha / alpha
    zp += (c0 - 1.0) * (np.euler_gamma + math.log(T))
    return -zp, c0 - 1.0


def log_det(spectrum: Spectrum, coeffs: HeatCoefficients, T: float | None = None,
            tol: float = 1e-6, consistency: float = 0.05) -> ZetaDetResult:
    """Zeta-regularized ``log det'`` from a truncated spectrum.

    ``T`` defaults to ``35 / lambda_max``. Raises :class:`TruncationUncertified`
    if ``lambda_max T < 30`` or the Weyl tail bound exceeds ``tol``, and
    :class:`InconsistentCoefficients` if ``zeta(0)`` recovered from the
    spectrum at ``T`` differs from ``a_0 - 1`` by more than ``consistency``.
    """
    lam = np.asarray(spectrum.eigenvalues, dtype=float)
    if coeffs.a_minus1 <= 0:
        raise InconsistentCoefficients("a_minus1 must be positive")
    lam_max = lam[-1]
    if T is None:
        T = DEFAULT_SPLIT / lam_max
    T = _check_t(T)
    if lam_max * T < CERTIFY_EXPONENT:
        raise TruncationUncertified(
            f"lambda_max * T = {lam_max * T:.3g} < {CERTIFY_EXPONENT}")
    slope = weyl_bound_slope(spectrum)
    tail = slope * math.exp(-lam_max * T) / (lam_max * T * T)
    if tail > tol:
        raise TruncationUncertified(f"eigenvalue tail bound {tail:.3g} exceeds {tol:.3g}")
    positive = lam[lam > 0]
    value, _ = log_det_from_powers(positive, coeffs.powers(), T)
    zeta_closed = coeffs.a_0 - 1.0
    zeta_num = float(np.sum(np.exp(-lam * T)) - coeffs.a_minus1 / T - 1.0)
    errs = np.asarray(spectrum.errors, dtype=float)
    errs = np.where(np.isfinite(errs), errs, 0.0)
    # d E_1(lambda T) / d lambda = -exp(-lambda T) / lambda
    pos = lam > 0
    det_err = float(np.sum(errs[pos] * np.exp(-lam[pos] * T) / lam[pos])) + tail
    zeta_err = float(np.sum(errs * T * np.exp(-lam * T))) + slope * math.exp(-lam_max * T) / T
    if abs(zeta_num - zeta_closed) > max(consistency, 3.0 * zeta_err):
        raise InconsistentCoefficients(
            f"zeta(0) from the spectrum ({zeta_num:.6g}) disagrees with a_0 - 1 ({zeta_closed:.6g})")
    return ZetaDetResult(float(value), zeta_num, zeta_closed, T, float(lam_max * T), tail,
                         det_err, int(len(lam)))


# --- counting ---------------------------------------------------------------

def counting_function(spectrum: Spectrum, lam: float) -> tuple[int, float]:
    """``N(lam) = #{0 < lambda_k <= lam}`` and the ratio ``N(lam) / lam``."""
    ev = spectrum.eigenvalues
    if lam > ev[-1]:
        raise TruncationUncertified(f"threshold {lam} exceeds the computed range {ev[-1]}")
    n = int(np.count_nonzero((ev > 0) & (ev <= lam)))
    return n, (n / lam if lam > 0 else 0.0)


def weyl_slope(spectrum: Spectrum, lo: float, hi: float, samples: int = 200) -> float:
    """Least-squares slope of ``N(lambda)`` against ``lambda`` on ``[lo, hi]``."""
    if not 0 <= lo < hi:
        raise ValueError("need 0 <= lo < hi")
    grid = np.linspace(lo, hi, samples)
    N = np.array([counting_function(spectrum, x)[0] for x in grid], dtype=float)
    A = np.stack([grid, np.ones_like(grid)], axis=1)
    coef, *_ = np.linalg.lstsq(A, N, rcond=None)
    return float(coef[0])
