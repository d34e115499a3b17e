"""Heat kernel of the infinite cone and the trace defect at its tip.

The kernel on the cone of angle ``beta`` is evaluated from its contour
representation with the contour pushed onto the vertical lines
``Re(alpha - theta) = -pi, +pi``. Poles of ``cot(pi (alpha - psi) / beta)``
crossed on the way come out as Gaussian images

    (1 / 4 pi t) exp(-(r^2 + rho^2 - 2 r rho cos(theta - psi + k beta)) / 4t),
    |theta - psi + k beta| < pi,

and what is left on the lines is a real integral in ``v = Im alpha`` that
decays like ``exp(-r rho cosh v / 2t)`` (see ``_kernels_py.cone_line_integral``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from conedet import kernels
from conedet._kernels_py import BOUNDARY_SIN, GL_ORDER, GL_W, GL_X, _panel_breaks
from conedet.errors import BoundaryPole, NonpositiveAngle, NonpositiveTime, TimeTooLarge

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ConeParams:
    """Cone angle and quadrature controls.

    ``tol`` is the absolute tolerance of the line integral in units of the
    diagonal heat kernel scale ``1/(4 pi t)``.
    """

    beta: float
    nodes: int = GL_ORDER
    image_tol: float = 1e-9
    tol: float = 1e-12

    def __post_init__(self):
        if not self.beta > 0:
            raise NonpositiveAngle(f"cone angle must be positive, got {self.beta}")
        if self.nodes < 16:
            raise ValueError("quadrature needs at least 16 nodes per panel")
        if self.nodes != GL_ORDER:
            raise ValueError(f"only {GL_ORDER}-point panels are implemented")


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise NonpositiveTime("heat kernel needs t > 0")
    return t


def heat_kernel_plane(x, y, t):
    """Euclidean heat kernel ``exp(-|x - y|^2 / 4t) / (4 pi t)`` on R^2."""
    t = _check_time(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d2 = np.sum((x - y) ** 2, axis=-1)
    out = np.exp(-d2 / (4.0 * t)) / (4.0 * math.pi * t)
    return float(out) if np.ndim(out) == 0 else out


def _image_range(phi: np.ndarray, beta: float):
    kmin = int(np.floor(np.min((-math.pi - phi) / beta))) - 1
    kmax = int(np.ceil(np.max((math.pi - phi) / beta))) + 1
    return range(kmin, kmax + 1)


def heat_kernel_cone(params: ConeParams, r, theta, rho, psi, t):
    """Heat kernel of the Friedrichs Laplacian on the cone ``C_beta``.

    All coordinate arguments broadcast against each other. Raises
    :class:`BoundaryPole` when some image lies at angular distance exactly
    ``pi`` (within ``params.image_tol``); perturb the points in that case.
    """
    beta = params.beta
    t = _check_time(t)
    r, theta, rho, psi, t = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (r, theta, rho, psi, t)))
    if np.any(r < 0) or np.any(rho < 0):
        raise ValueError("radii must be non-negative")
    phi = np.mod(theta - psi, beta)
    phi = np.where(phi > beta / 2, phi - beta, phi)

    images = np.zeros(r.shape)
    for k in _image_range(phi, beta):
        ang = phi + k * beta
        if np.any(np.abs(np.abs(ang) - math.pi) < params.image_tol):
            raise BoundaryPole(
                f"image k={k} sits on |theta - psi + k beta| = pi; perturb the points")
        inside = np.abs(ang) < math.pi
        if np.any(inside):
            d2 = r * r + rho * rho - 2.0 * r * rho * np.cos(ang)
            images += np.where(inside, np.exp(-np.maximum(d2, 0.0) / (4.0 * t)), 0.0)
    images /= 4.0 * math.pi * t

    if _lines_vanish(beta):
        lines = np.zeros(r.shape)
    else:
        lines = kernels.cone_line_integral_many(r, rho, phi, t, beta, params.tol)
    out = images + lines
    return float(out) if out.ndim == 0 else out


def _lines_vanish(beta: float) -> bool:
    """True for beta = 2 pi / n, where the cotangent difference is identically zero."""
    n = TWO_PI / beta
    return abs(n - round(n)) < 1e-14 and round(n) >= 1


def diagonal_excess(params: ConeParams, r, t):
    """``H_beta(x, x; t) - 1/(4 pi t)`` at distance ``r`` from the tip.

    On the diagonal the image boundary ``|k beta| = pi`` is a property of
    ``beta`` alone (it happens for ``beta = pi / m``). There the kernel is
    continuous, and the representation is taken with half residues on the
    boundary and principal-value line integrals.
    """
    beta = params.beta
    t = float(_check_time(t))
    r = np.asarray(r, dtype=float)
    out = np.zeros(r.shape)
    kmax = int(math.floor(math.pi / beta + 1e-9))
    for k in range(1, kmax + 1):
        ang = k * beta
        s2 = math.sin(ang / 2.0) ** 2
        weight = 0.5 if abs(ang - math.pi) < 1e-12 else 1.0
        # k and -k give the same Gaussian
        out += 2.0 * weight * np.exp(-r * r * s2 / t)
    out /= 4.0 * math.pi * t
    if not _lines_vanish(beta):
        out = out + kernels.cone_line_integral_many(r, r, 0.0, t, beta, params.tol, True)
    return out


def trace_defect_numeric(params: ConeParams, R: float, t: float) -> float:
    """``int_{C_beta(R)} (H_beta(x, x; t) - 1/(4 pi t)) dx`` by radial quadrature.

    The angular integral is exact (the integrand is rotation invariant), so
    the area element reduces to ``beta r dr``.
    """
    if not t > 0:
        raise NonpositiveTime("t must be positive")
    if t > R * R / 20.0:
        raise TimeTooLarge(f"need t <= R^2/20 = {R * R / 20.0}, got t={t}")
    beta = params.beta
    # slowest Gaussian decay rate in r^2/t among images and lines
    rate = 1.0
    kmax = int(math.floor(math.pi / beta + 1e-9))
    for k in range(1, kmax + 1):
        rate = min(rate, math.sin(k * beta / 2.0) ** 2)
    r_max = min(R, math.sqrt(60.0 * t / rate))

    # D(r) carries a power-law term r^(4 pi / beta - 2) at the tip, so the
    # panels are graded geometrically towards r = 0.
    breaks = r_max * _panel_breaks(40)

    def integrate(split: int) -> float:
        frac = np.arange(split + 1) / split
        edges = breaks[:-1, None] + np.diff(breaks)[:, None] * frac[None, :]
        a, b = edges[:, :-1].ravel(), edges[:, 1:].ravel()
        nodes = (a[:, None] + (b - a)[:, None] * GL_X[None, :]).ravel()
        vals = diagonal_excess(params, nodes, t) * nodes * beta
        return float(np.sum(vals.reshape(len(a), GL_ORDER) @ GL_W * (b - a)))

    split = 1
    coarse = integrate(split)
    fine = integrate(2 * split)
    while abs(fine - coarse) > 1e-12 and split < 64:
        split *= 2
        coarse, fine = fine, integrate(2 * split)
    return fine


def trace_defect_closed(beta: float) -> float:
    """Closed form ``(1/12)(2 pi / beta - beta / 2 pi)`` of the tip contribution."""
    if not beta > 0:
        raise NonpositiveAngle(f"cone angle must be positive, got {beta}")
    return (TWO_PI / beta - beta / TWO_PI) / 12.0


def cone_harmonic(beta: float, k: int, sign: int, r, theta):
    """Formal harmonic ``V_{+/-}^k`` on the cone ``C_beta``.

    ``V_pm^k = r^(pm 2 pi k / beta) exp(2 pi i k theta / beta)`` for ``k > 0``,
    ``V_+^0 = 1`` and ``V_-^0 = log r``.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if sign == -1 and np.any(r <= 0):
        raise ValueError("V_- needs r > 0")
    if k == 0:
        out = np.ones(np.broadcast(r, theta).shape, dtype=complex) if sign == 1 \
            else np.log(r) + 0j * theta
    else:
        nu = TWO_PI * k / beta
        out = r ** (sign * nu) * np.exp(1j * nu * theta)
    return complex(out) if np.ndim(out) == 0 else out


__all__ = [
    "BOUNDARY_SIN",
    "ConeParams",
    "cone_harmonic",
    "diagonal_excess",
    "heat_kernel_cone",
    "heat_kernel_plane",
    "trace_defect_closed",
    "trace_defect_numeric",
]
