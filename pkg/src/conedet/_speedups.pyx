# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels in ``_kernels_py``.

Same panels, nodes, stopping rules and error conditions as the NumPy code;
results agree to rounding.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport acosh, cos, cosh, exp, fabs, log, sin, sinh, sqrt, M_PI

from conedet._kernels_py import GEOMETRIC_LEVELS, GL_ORDER, GL_W, GL_X, MAX_THETA_TERMS, _panel_breaks
from conedet._kernels_py import BOUNDARY_SIN
from conedet.errors import QuadratureFailure

cnp.import_array()

cdef double[::1] _X = np.ascontiguousarray(GL_X)
cdef double[::1] _W = np.ascontiguousarray(GL_W)
cdef double[::1] _BREAKS = np.ascontiguousarray(_panel_breaks(GEOMETRIC_LEVELS))
cdef int _NQ = GL_ORDER
cdef double _BSIN = BOUNDARY_SIN


cdef inline double _integrand(double v, double base, double rr, double sc1, double ss1,
                              double sc2, double ss2, double beta) nogil:
    # sc = sin a cos a, ss = sin^2 a; a flagged-off term has sc = 0
    cdef double b = M_PI * v / beta
    cdef double sh = sinh(b)
    cdef double sh2 = sh * sh
    cdef double br = 0.0
    if sc1 != 0.0:
        br += sc1 / (sh2 + ss1)
    if sc2 != 0.0:
        br -= sc2 / (sh2 + ss2)
    return exp(-base - rr * (cosh(v) + 1.0)) * br


cdef double _composite(double vmax, int split, double base, double rr, double sc1, double ss1,
                       double sc2, double ss2, double beta) nogil:
    cdef Py_ssize_t p, j, q
    cdef Py_ssize_t npan = _BREAKS.shape[0] - 1
    cdef double a, b, lo, width, panel, total = 0.0
    for p in range(npan):
        a = _BREAKS[p]
        b = _BREAKS[p + 1]
        # the Gaussian factor grows in v; once it underflows every later node is exactly 0
        if base + rr * (cosh(a * vmax) + 1.0) > 760.0:
            break
        for j in range(split):
            lo = a + (b - a) * j / split
            width = ((b - a) / split) * vmax
            panel = 0.0
            for q in range(_NQ):
                panel += _W[q] * _integrand(lo * vmax + width * _X[q], base, rr, sc1, ss1, sc2, ss2, beta)
            total += panel * width
    return total


cpdef double cone_line_integral(double r, double rho, double phi, double t, double beta,
                                double tol=1e-12, bint principal=False) except? -1e300:
    cdef double a1 = M_PI * (phi - M_PI) / beta
    cdef double a2 = M_PI * (phi + M_PI) / beta
    cdef bint use1 = fabs(sin(a1)) >= _BSIN
    cdef bint use2 = fabs(sin(a2)) >= _BSIN
    if not (use1 and use2) and not principal:
        raise QuadratureFailure("line integral evaluated on an image boundary")
    if not (use1 or use2):
        return 0.0
    cdef double s1 = sin(a1), s2 = sin(a2)
    cdef double sc1 = s1 * cos(a1) if use1 else 0.0
    cdef double sc2 = s2 * cos(a2) if use2 else 0.0
    cdef double base = (r - rho) * (r - rho) / (4.0 * t)
    cdef double rr = r * rho / (2.0 * t)
    cdef double prod = r * rho
    cdef double vmax = 45.0 * beta / (2.0 * M_PI)
    cdef double gauss_cut
    if prod > 0.0:
        gauss_cut = acosh(1.0 + 90.0 * t / prod) + 1.0
        if gauss_cut < vmax:
            vmax = gauss_cut
    cdef double coarse = _composite(vmax, 1, base, rr, sc1, s1 * s1, sc2, s2 * s2, beta)
    cdef double fine = _composite(vmax, 2, base, rr, sc1, s1 * s1, sc2, s2 * s2, beta)
    cdef int split = 2
    while fabs(fine - coarse) > tol * beta:
        if split >= 64:
            raise QuadratureFailure(
                f"line integral did not converge (r={r}, rho={rho}, phi={phi}, t={t}, beta={beta})")
        split *= 2
        coarse = fine
        fine = _composite(vmax, split, base, rr, sc1, s1 * s1, sc2, s2 * s2, beta)
    return fine / (4.0 * M_PI * beta * t)


def cone_line_integral_many(r, rho, phi, t, double beta, double tol=1e-12, bint principal=False):
    r, rho, phi, t = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (r, rho, phi, t)))
    shape = r.shape
    cdef double[::1] rv = np.ascontiguousarray(r).ravel()
    cdef double[::1] pv = np.ascontiguousarray(rho).ravel()
    cdef double[::1] fv = np.ascontiguousarray(phi).ravel()
    cdef double[::1] tv = np.ascontiguousarray(t).ravel()
    out = np.empty(rv.shape[0])
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(rv.shape[0]):
        ov[i] = cone_line_integral(rv[i], pv[i], fv[i], tv[i], beta, tol, principal)
    return out.reshape(shape)


def theta1_log_modulus(w, tau):
    """log|theta1(w | tau)| for ``w`` already reduced to the centred cell.

    ``sin((2k + 1) pi w)`` is advanced with the three-term recurrence
    ``s_{k+1} = 2 cos(2 pi w) s_k - s_{k-1}``, so each term costs two complex
    multiplications instead of a complex sine.
    """
    arr = np.asarray(w, dtype=complex)
    shape = arr.shape
    cdef double complex[::1] wv = np.ascontiguousarray(arr).ravel()
    cdef Py_ssize_t n = wv.shape[0], i, k
    cdef double complex[::1] coeff = np.empty(MAX_THETA_TERMS, dtype=complex)
    cdef double kk
    for k in range(MAX_THETA_TERMS):
        kk = k + 0.5
        coeff[k] = 2.0 * (-1.0 if k % 2 else 1.0) * np.exp(1j * M_PI * tau * kk * kk)
    out = np.empty(n)
    cdef double[::1] ov = out
    cdef double complex total, term, s_prev, s_cur, s_next, c2
    cdef double x, y, mag2, tot2
    for i in range(n):
        x = M_PI * wv[i].real
        y = M_PI * wv[i].imag
        s_cur = sin(x) * cosh(y) + 1j * cos(x) * sinh(y)
        s_prev = -s_cur
        # 2 cos(2 pi w) = 2 (cos 2x cosh 2y - i sin 2x sinh 2y)
        c2 = 2.0 * (cos(2.0 * x) * cosh(2.0 * y) - 1j * sin(2.0 * x) * sinh(2.0 * y))
        total = 0.0
        for k in range(MAX_THETA_TERMS):
            term = coeff[k] * s_cur
            total = total + term
            # modulus envelope of the term, since s_cur itself can vanish
            mag2 = coeff[k].real * coeff[k].real + coeff[k].imag * coeff[k].imag
            mag2 = mag2 * cosh((2 * k + 1) * fabs(y)) ** 2
            tot2 = total.real * total.real + total.imag * total.imag
            if k >= 2 and mag2 <= 1e-34 * tot2:
                break
            s_next = c2 * s_cur - s_prev
            s_prev = s_cur
            s_cur = s_next
        tot2 = total.real * total.real + total.imag * total.imag
        ov[i] = 0.5 * log(tot2) if tot2 > 0.0 else -np.inf
    return out.reshape(shape)
