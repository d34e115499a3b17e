"""Dedekind eta and Jacobi theta-1 in double precision.

Conventions
-----------
``q = exp(2 pi i sigma)`` is the modular nome used by eta,
``eta(sigma) = q**(1/24) * prod_{n>=1} (1 - q**n)``.

Theta-1 uses the half nome ``exp(i pi sigma)`` and the argument scaled by pi,

    theta1(z | sigma) = 2 sum_{n>=0} (-1)**n exp(i pi sigma (n + 1/2)**2) sin((2n + 1) pi z),

so that ``theta1(z + 1) = -theta1(z)``, ``theta1(z + sigma) = -exp(-i pi sigma - 2 pi i z) theta1(z)``
and ``theta1'(0) = 2 pi eta**3``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from conedet import kernels
from conedet.errors import LowerHalfPlane

MAX_THETA_TERMS = 64
_MAX_REDUCTION_STEPS = 200


@dataclass(frozen=True)
class Modulus:
    """A point of the upper half plane: the torus ``C / (Z + sigma Z)``."""

    sigma: complex

    def __post_init__(self):
        sigma = complex(self.sigma)
        if not sigma.imag > 0 or not math.isfinite(sigma.real):
            raise LowerHalfPlane(f"modulus must satisfy Im sigma > 0, got {sigma!r}")
        object.__setattr__(self, "sigma", sigma)

    @property
    def q(self) -> complex:
        return cmath.exp(2j * math.pi * self.sigma)

    def lattice_point(self, u: float, v: float) -> complex:
        return u + v * self.sigma


def _as_sigma(sigma) -> complex:
    if isinstance(sigma, Modulus):
        return sigma.sigma
    return Modulus(complex(sigma)).sigma


def _eta_product(sigma: complex) -> complex:
    """q**(1/24) prod(1 - q**n), summed in log space with compensation."""
    q = cmath.exp(2j * math.pi * sigma)
    # Kahan-compensated sum of log(1 - q**n)
    total = 0j
    comp = 0j
    qn = q
    for _ in range(400):
        if abs(qn) < 1e-18:
            break
        term = cmath.log(1.0 - qn) - comp
        t = total + term
        comp = (t - total) - term
        total = t
        qn *= q
    return cmath.exp(2j * math.pi * sigma / 24.0 + total)


def dedekind_eta(sigma) -> complex:
    """Dedekind eta function.

    ``sigma`` is first carried into the standard fundamental domain with
    ``eta(s + 1) = e^{i pi/12} eta(s)`` and ``eta(-1/s) = sqrt(-i s) eta(s)``,
    which keeps ``|q| <= exp(-pi sqrt(3))`` for the product.
    """
    s = _as_sigma(sigma)
    mult = 1.0 + 0j
    for _ in range(_MAX_REDUCTION_STEPS):
        n = round(s.real)
        if n:
            s -= n
            mult *= cmath.exp(1j * math.pi * n / 12.0)
        if abs(s) < 1.0 - 1e-15:
            tau = -1.0 / s
            mult *= cmath.sqrt(-1j * tau)
            s = tau
        else:
            break
    return mult * _eta_product(s)


def eta_pentagonal(sigma, nmax: int = 60) -> complex:
    """Eta from Euler's pentagonal series, no modular reduction.

    Independent of :func:`dedekind_eta`; kept as a cross-check.
    """
    s = _as_sigma(sigma)
    q = cmath.exp(2j * math.pi * s)
    total = 1.0 + 0j
    for k in range(1, nmax):
        sign = -1.0 if k % 2 else 1.0
        total += sign * (q ** (k * (3 * k - 1) // 2) + q ** (k * (3 * k + 1) // 2))
    return cmath.exp(2j * math.pi * s / 24.0) * total


def reduce_to_cell(z, sigma):
    """Split ``z = w + m + n sigma`` with ``w`` in the centred fundamental cell.

    Returns ``(w, m, n)``; ``m`` and ``n`` are integer arrays and ``w``
    satisfies ``-Im sigma / 2 <= Im w < Im sigma / 2`` and ``-1/2 <= Re w < 1/2``.
    """
    s = _as_sigma(sigma)
    z = np.asarray(z, dtype=complex)
    n = np.floor(z.imag / s.imag + 0.5)
    x = z - n * s
    m = np.floor(x.real + 0.5)
    return x - m, m.astype(np.int64), n.astype(np.int64)


def _theta1_series(w: np.ndarray, tau: complex) -> np.ndarray:
    """Raw theta-1 series; assumes ``|Im w| <= Im tau / 2`` roughly."""
    w = np.asarray(w, dtype=complex)
    out = np.zeros(w.shape, dtype=complex)
    scale = np.zeros(w.shape, dtype=float)
    for n in range(MAX_THETA_TERMS):
        k = n + 0.5
        coeff = cmath.exp(1j * math.pi * tau * k * k)
        term = (2.0 * (-1.0) ** n) * coeff * np.sin((2 * n + 1) * math.pi * w)
        out += term
        scale = np.maximum(scale, np.abs(out))
        # bound the term by its modulus envelope: a single term can vanish
        # (sin hits a zero) while later ones still matter
        bound = 2.0 * abs(coeff) * np.cosh((2 * n + 1) * math.pi * np.abs(w.imag))
        if n >= 2 and np.all(bound <= 1e-17 * np.maximum(scale, 1e-300)):
            break
    return out


def _reduce_modulus(tau: complex):
    """Word in T, S carrying tau to the fundamental domain."""
    steps = []
    for _ in range(_MAX_REDUCTION_STEPS):
        n = round(tau.real)
        if n:
            tau -= n
            steps.append(("T", n))
        if abs(tau) < 1.0 - 1e-15:
            steps.append(("S", tau))
            tau = -1.0 / tau
        else:
            break
    return tau, steps


def theta1(z, sigma):
    """Jacobi theta-1 ``theta1(z | sigma)`` for scalar or array ``z``."""
    tau = _as_sigma(sigma)
    scalar = np.ndim(z) == 0
    z = np.array(z, dtype=complex)
    mult = np.ones(z.shape, dtype=complex)
    tau_r, steps = _reduce_modulus(tau)
    for kind, val in steps:
        if kind == "T":
            mult = mult * cmath.exp(1j * math.pi * val / 4.0)
        else:
            t = val
            # theta1(z|t) = i e^{-i pi z^2 / t} / sqrt(-i t) * theta1(z/t | -1/t)
            mult = mult * (1j * np.exp(-1j * math.pi * z * z / t) / cmath.sqrt(-1j * t))
            z = z / t
    w, m, n = reduce_to_cell(z, tau_r)
    sign = np.where((m + n) % 2 == 0, 1.0, -1.0)
    factor = sign * np.exp(-1j * math.pi * n * n * tau_r - 2j * math.pi * n * w)
    val = mult * factor * _theta1_series(w, tau_r)
    return complex(val) if scalar else val


def theta1_prime0(sigma) -> complex:
    """``d/dz theta1(z | sigma)`` at ``z = 0``, checked against ``2 pi eta**3``."""
    tau = _as_sigma(sigma)
    tau_r, steps = _reduce_modulus(tau)
    total = 0j
    for n in range(MAX_THETA_TERMS):
        k = n + 0.5
        term = 2.0 * (-1.0) ** n * cmath.exp(1j * math.pi * tau_r * k * k) * (2 * n + 1) * math.pi
        total += term
        if abs(term) < 1e-18 * abs(total):
            break
    mult = 1.0 + 0j
    for kind, val in steps:
        if kind == "T":
            mult *= cmath.exp(1j * math.pi * val / 4.0)
        else:
            # derivative at 0 of theta1(z/t | -1/t) picks up 1/t
            mult *= 1j / cmath.sqrt(-1j * val) / val
    value = mult * total
    check = 2.0 * math.pi * dedekind_eta(tau) ** 3
    if abs(value - check) > 1e-12 * max(1.0, abs(check)):
        raise ArithmeticError(f"theta1'(0) = {value} disagrees with 2 pi eta^3 = {check}")
    return value


def log_theta_invariant(z, sigma) -> np.ndarray:
    """``log|theta1(z | sigma)| - pi (Im z)**2 / Im sigma``.

    This combination is invariant under ``z -> z + 1`` and ``z -> z + sigma``;
    ``z`` is reduced to the centred cell before the series is summed.
    """
    tau = _as_sigma(sigma)
    w, _, _ = reduce_to_cell(z, tau)
    if tau.imag < 0.5:
        vals = np.log(np.abs(theta1(w, tau)))
    else:
        vals = kernels.theta1_log_modulus(np.ascontiguousarray(w).ravel(), tau).reshape(w.shape)
    out = vals - math.pi * w.imag**2 / tau.imag
    return float(out) if out.ndim == 0 else out
