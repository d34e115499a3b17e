"""NumPy implementations of the hot kernels.

These are the reference versions; ``_speedups.pyx`` mirrors them loop for
loop. Both must agree to rounding (see tests/test_kernels.py).
"""
from __future__ import annotations

import math

import numpy as np

from conedet.errors import QuadratureFailure

GL_ORDER = 16
GEOMETRIC_LEVELS = 48
MAX_THETA_TERMS = 64

_gl_x, _gl_w = np.polynomial.legendre.leggauss(GL_ORDER)
# nodes/weights mapped to [0, 1]
GL_X = 0.5 * (_gl_x + 1.0)
GL_W = 0.5 * _gl_w


def _panel_breaks(levels: int) -> np.ndarray:
    """Breakpoints on [0, 1]: geometric towards 0, then uniform."""
    geo = 2.0 ** -np.arange(levels, 0, -1, dtype=float)
    uni = np.linspace(0.5, 1.0, 5)[1:]
    return np.concatenate(([0.0], geo[geo < 0.5], [0.5], uni))


def _bracket(v, a1, a2, beta, use1=True, use2=True):
    """Re[cot(a1 + i b) - cot(a2 + i b)] with b = pi v / beta.

    Uses ``cosh 2b - cos 2a = 2 (sinh^2 b + sin^2 a)`` to avoid cancellation.
    A term flagged off sits on an image boundary, where its real part
    vanishes for b > 0 (principal value).
    """
    b = math.pi * v / beta
    sh2 = np.sinh(b) ** 2
    out = np.zeros_like(sh2)
    if use1:
        s1 = math.sin(a1)
        out += s1 * math.cos(a1) / (sh2 + s1 * s1)
    if use2:
        s2 = math.sin(a2)
        out -= s2 * math.cos(a2) / (sh2 + s2 * s2)
    return out


BOUNDARY_SIN = 1e-12


def line_cutoff(r, rho, t, beta):
    """Truncation height for the vertical-line integrals."""
    rr = r * rho
    bracket_cut = 45.0 * beta / (2.0 * math.pi)
    if rr > 0.0:
        gauss_cut = math.acosh(1.0 + 90.0 * t / rr) + 1.0
        return min(gauss_cut, bracket_cut)
    return bracket_cut


def _composite(f, vmax, breaks, split):
    """Composite GL over ``vmax * breaks`` with each panel split ``split`` times."""
    a = breaks[:-1]
    b = breaks[1:]
    if split > 1:
        frac = np.arange(split + 1) / split
        edges = a[:, None] + (b - a)[:, None] * frac[None, :]
        a = edges[:, :-1].ravel()
        b = edges[:, 1:].ravel()
    width = (b - a) * vmax
    nodes = (a[:, None] * vmax + width[:, None] * GL_X[None, :]).ravel()
    vals = f(nodes).reshape(len(a), GL_ORDER)
    return float(np.sum(vals @ GL_W * width))


def cone_line_integral(r, rho, phi, t, beta, tol=1e-12, principal=False):
    """Vertical-line part of the cone heat kernel (scalar arguments).

    Returns ``(1 / (4 pi beta t)) * int_0^inf exp(-(r^2 + rho^2 + 2 r rho cosh v) / 4t)
    Re[cot(pi(phi - pi + iv)/beta) - cot(pi(phi + pi + iv)/beta)] dv``.

    With ``principal=True`` a cotangent whose pole sits on the contour
    (``|sin a| < BOUNDARY_SIN``) is dropped; the caller then owes half residues.
    """
    a1 = math.pi * (phi - math.pi) / beta
    a2 = math.pi * (phi + math.pi) / beta
    use1 = abs(math.sin(a1)) >= BOUNDARY_SIN
    use2 = abs(math.sin(a2)) >= BOUNDARY_SIN
    if not (use1 and use2) and not principal:
        raise QuadratureFailure("line integral evaluated on an image boundary")
    if not (use1 or use2):
        return 0.0
    base = (r - rho) ** 2 / (4.0 * t)
    rr = r * rho / (2.0 * t)

    def f(v):
        # (r^2 + rho^2 + 2 r rho cosh v) split as (r - rho)^2 + 2 r rho (cosh v + 1)
        expo = np.exp(-base - rr * (np.cosh(v) + 1.0))
        return expo * _bracket(v, a1, a2, beta, use1, use2)

    vmax = line_cutoff(r, rho, t, beta)
    breaks = _panel_breaks(GEOMETRIC_LEVELS)
    coarse = _composite(f, vmax, breaks, 1)
    fine = _composite(f, vmax, breaks, 2)
    split = 2
    while abs(fine - coarse) > tol * beta:
        if split >= 64:
            raise QuadratureFailure(
                f"line integral did not converge (r={r}, rho={rho}, phi={phi}, t={t}, beta={beta})")
        split *= 2
        coarse, fine = fine, _composite(f, vmax, breaks, split)
    return fine / (4.0 * math.pi * beta * t)


def cone_line_integral_many(r, rho, phi, t, beta, tol=1e-12, principal=False):
    r, rho, phi, t = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (r, rho, phi, t)))
    out = np.empty(r.shape)
    it = np.nditer([r, rho, phi, t], flags=["multi_index"])
    for rv, pv, fv, tv in it:
        out[it.multi_index] = cone_line_integral(float(rv), float(pv), float(fv), float(tv), beta, tol, principal)
    return out


def theta1_log_modulus(w, tau):
    """log|theta1(w | tau)| for ``w`` already reduced to the centred cell."""
    w = np.asarray(w, dtype=complex)
    total = np.zeros(w.shape, dtype=complex)
    for n in range(MAX_THETA_TERMS):
        k = n + 0.5
        coeff = 2.0 * (-1.0) ** n * np.exp(1j * math.pi * tau * k * k)
        term = coeff * np.sin((2 * n + 1) * math.pi * w)
        total += term
        bound = np.abs(coeff) * np.cosh((2 * n + 1) * math.pi * np.abs(w.imag))
        if n >= 2 and np.all(bound <= 1e-17 * np.abs(total)):
            break
    with np.errstate(divide="ignore"):
        return np.log(np.abs(total))
