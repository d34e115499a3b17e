"""Backend selection for the hot kernels.

The compiled ``conedet._speedups`` module is used when it was built; otherwise
the NumPy versions in ``conedet._kernels_py`` are used. Set
``CONEDET_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import os

from conedet import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("CONEDET_BACKEND", "").lower() != "python":
    try:
        from conedet import _speedups as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py


def cone_line_integral_many(r, rho, phi, t, beta, tol=1e-12, principal=False):
    return _impl.cone_line_integral_many(r, rho, phi, t, beta, tol, principal)


def theta1_log_modulus(w, tau):
    return _impl.theta1_log_modulus(w, complex(tau))


def use_backend(name: str) -> None:
    """Switch backends at runtime (benchmarks and tests)."""
    global _impl, BACKEND
    if name == "python":
        _impl, BACKEND = _kernels_py, "python"
    elif name == "cython":
        from conedet import _speedups

        _impl, BACKEND = _speedups, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")
