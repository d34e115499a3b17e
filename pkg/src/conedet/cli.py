"""Command-line interface: ``conedet <command> [options]``.

All machine output is JSON (CSV for spectra). Reports are written
atomically with ``--out``. Exit status is 0 on success or a passing suite,
1 on a failing suite or a computation error and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

from threadpoolctl import threadpool_limits

from conedet import __version__
from conedet.conekernel import ConeParams, heat_kernel_cone
from conedet.errors import ConedetError, UsageError
from conedet.specialfn import dedekind_eta, theta1
from conedet.spectral import HeatCoefficients, heat_trace, log_det
from conedet.surface import build_flat_torus, cone_points, gauss_bonnet_residual, load_surface
from conedet.torusmetrics import area, metric_from_json
from conedet import verify

THREADS_ENV = "CONEDET_THREADS"


# --- argument helpers -------------------------------------------------------

def _complex_arg(text: str) -> complex:
    try:
        re_, im_ = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 're,im', got {text!r}") from None
    return complex(re_, im_)


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        verify.write_atomic(out, text)
    sys.stdout.write(text)


def _thread_count(flag: int | None) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    elif flag is not None:
        n = flag
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise UsageError("thread count must be at least 1")
    return n


def _surface_and_density(args):
    """The mesh surface and optional metric density named by ``--surface``/``--metric``."""
    metric = metric_from_json(_read_json(args.metric)) if getattr(args, "metric", None) else None
    if args.surface:
        surface = load_surface(_read_json(args.surface))
    elif metric is not None:
        surface = build_flat_torus(metric.sigma, verify.metric_grid(metric))
    else:
        raise UsageError("--surface is required (or --metric for a conical torus)")
    return surface, metric


def _levels(args, metric) -> int:
    if args.levels is not None:
        return args.levels
    return 4 if metric is not None else 5


def _coefficients(surface, metric):
    if metric is None:
        return HeatCoefficients.from_surface(surface), surface.area
    A = area(metric).value
    return verify.metric_coefficients(metric, A), A


# --- commands ---------------------------------------------------------------

def cmd_surface_info(args) -> int:
    s = load_surface(_read_json(args.surface))
    doc = {"genus": s.genus, "euler_characteristic": s.euler_characteristic, "area": s.area,
           "faces": s.n_faces, "edges": s.n_edges, "vertices": s.n_vertices,
           "cones": [{"vertex_class": c.vertex_class, "angle": c.angle, "order": c.order}
                     for c in cone_points(s)],
           "gauss_bonnet_residual": gauss_bonnet_residual(s)}
    _emit(_dump(doc), args.out)
    return 0


def cmd_spectrum(args) -> int:
    surface, metric = _surface_and_density(args)
    spec = verify.fem_spectrum(surface, _levels(args, metric), args.count, density=metric,
                               extrapolate=not args.no_extrapolate)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "eigenvalue", "error_estimate"])
    for k, (lam, err) in enumerate(zip(spec.eigenvalues, spec.errors)):
        w.writerow([k, repr(float(lam)), repr(float(err))])
    if args.out:
        verify.write_atomic(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_heat_trace(args) -> int:
    surface, metric = _surface_and_density(args)
    spec = verify.fem_spectrum(surface, _levels(args, metric), args.count, density=metric)
    coeffs, _ = _coefficients(surface, metric)
    rows = [{"t": t, "trace": heat_trace(spec, t),
             "small_time": coeffs.a_minus1 / t + coeffs.a_0} for t in args.t]
    _emit(_dump({"a_minus1": coeffs.a_minus1, "a_0": coeffs.a_0, "values": rows}), args.out)
    return 0


def cmd_det(args) -> int:
    surface, metric = _surface_and_density(args)
    spec = verify.fem_spectrum(surface, _levels(args, metric), args.count, density=metric)
    coeffs, _ = _coefficients(surface, metric)
    res = log_det(spec, coeffs, tol=args.tol, consistency=args.consistency)
    _emit(_dump(res.to_json()), args.out)
    return 0


def cmd_eta(args) -> int:
    e = dedekind_eta(args.sigma)
    _emit(_dump({"sigma": [args.sigma.real, args.sigma.imag], "re": e.real, "im": e.imag,
                 "abs": abs(e)}), args.out)
    return 0


def cmd_theta1(args) -> int:
    v = complex(theta1(args.z, args.sigma))
    _emit(_dump({"z": [args.z.real, args.z.imag], "sigma": [args.sigma.real, args.sigma.imag],
                 "re": v.real, "im": v.imag, "abs": abs(v)}), args.out)
    return 0


def cmd_cone_kernel(args) -> int:
    v = heat_kernel_cone(ConeParams(args.beta), args.r, args.theta, args.rho, args.psi, args.t)
    _emit(_dump({"beta": args.beta, "r": args.r, "theta": args.theta, "rho": args.rho,
                 "psi": args.psi, "t": args.t, "value": float(v)}), args.out)
    return 0


def _report(rep: verify.VerificationReport, args) -> int:
    _emit(rep.dumps(), args.out)
    sys.stderr.write(rep.summary() + "\n")
    return 0 if rep.passed else 1


def cmd_verify_cone_defect(args) -> int:
    betas = args.beta or [math.pi, 1.5 * math.pi, 4 * math.pi, 6 * math.pi]
    return _report(verify.suite_cone_defect(betas, args.t, args.radius, args.tol, args.timings), args)


def cmd_verify_carslaw(args) -> int:
    return _report(verify.suite_carslaw(args.points, args.seed, args.tol, args.timings), args)


def cmd_verify_zeta_zero(args) -> int:
    s = load_surface(_read_json(args.surface))
    name = os.path.splitext(os.path.basename(args.surface))[0]
    return _report(verify.suite_zeta_zero(s, args.levels, args.count, args.times, args.tol, name,
                                          args.timings), args)


def cmd_verify_rescaling(args) -> int:
    s = load_surface(_read_json(args.surface))
    name = os.path.splitext(os.path.basename(args.surface))[0]
    return _report(verify.suite_rescaling(s, args.kappa, args.levels, args.count, args.tol, name,
                                          args.timings), args)


def cmd_verify_weyl(args) -> int:
    if args.surface:
        s = load_surface(_read_json(args.surface))
        name = os.path.splitext(os.path.basename(args.surface))[0]
    else:
        s, name = None, "torus_i"
    return _report(verify.suite_weyl(s, args.levels, args.count, args.tol, args.cert_rtol, name,
                                     args.timings), args)


def cmd_verify_ray_singer(args) -> int:
    sigmas = args.sigma or list(verify.RAY_SINGER_SIGMAS)
    return _report(verify.suite_ray_singer(sigmas, args.grid, args.tol, args.timings), args)


def cmd_verify_mt(args) -> int:
    metrics = [metric_from_json(_read_json(p)) for p in args.metric] if args.metric else None
    dets = None
    if args.fem_det:
        if metrics is None or len(args.fem_det) != len(metrics):
            raise UsageError("give one --fem-det per --metric")
        dets = [float(_read_json(p)["log_det"]) for p in args.fem_det]
    return _report(verify.suite_mt(metrics, dets, args.levels, args.count, args.tol, args.timings), args)


def cmd_verify_three_polyhedra(args) -> int:
    given = [args.l, args.m, args.n]
    if any(given):
        if not all(given):
            raise UsageError("--l, --m and --n go together")
        triples = [tuple(metric_from_json(_read_json(p)) for p in given)]
    else:
        triples = None
    return _report(verify.suite_three_polyhedra(triples, args.random, args.seed, args.tol,
                                                args.timings), args)


def cmd_verify_properties(args) -> int:
    return _report(verify.suite_properties(args.seed, args.timings), args)


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help=f"BLAS/LAPACK threads (the {THREADS_ENV} environment variable "
                             "takes precedence; default: all cores)")
    common.add_argument("--timings", action="store_true",
                        help="record wall time per check (reports are then not reproducible)")
    common.add_argument("--out", default=None, help="also write the result to this file")

    p = argparse.ArgumentParser(prog="conedet", description=__doc__.splitlines()[0],
                                epilog="Complex numbers are written re,im; use --flag=-0.5,1 for a "
                                       "negative real part.")
    p.add_argument("--version", action="version", version=f"conedet {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    surf = sub.add_parser("surface", help="inspect a surface")
    ssub = surf.add_subparsers(dest="action", required=True, metavar="action")
    info = ssub.add_parser("info", parents=[common], help="genus, area and cone data as JSON")
    info.add_argument("--surface", required=True, help="surface JSON file")
    info.set_defaults(func=cmd_surface_info)

    def fem_options(sp, count):
        sp.add_argument("--surface", help="surface JSON file (triangles or parallelograms)")
        sp.add_argument("--metric", help="conical torus metric JSON; the density on the mesh")
        sp.add_argument("--levels", type=int, default=None,
                        help="refinement levels (default 5, or 4 with --metric)")
        sp.add_argument("--count", type=int, default=count, help="number of eigenvalues")

    spec = sub.add_parser("spectrum", parents=[common], help="FEM eigenvalues as CSV")
    fem_options(spec, 50)
    spec.add_argument("--no-extrapolate", action="store_true",
                      help="report the finest level instead of the Richardson extrapolation")
    spec.set_defaults(func=cmd_spectrum)

    ht = sub.add_parser("heat-trace", parents=[common], help="heat trace at given times")
    fem_options(ht, 200)
    ht.add_argument("--t", type=float, nargs="+", required=True, help="times")
    ht.set_defaults(func=cmd_heat_trace)

    det = sub.add_parser("det", parents=[common], help="zeta-regularized log det'")
    fem_options(det, 200)
    det.add_argument("--tol", type=float, default=1e-6, help="bound on the eigenvalue tail")
    det.add_argument("--consistency", type=float, default=0.05,
                     help="allowed gap between spectral and closed-form zeta(0)")
    det.set_defaults(func=cmd_det)

    eta = sub.add_parser("eta", parents=[common], help="Dedekind eta")
    eta.add_argument("--sigma", type=_complex_arg, required=True, help="modulus re,im")
    eta.set_defaults(func=cmd_eta)

    th = sub.add_parser("theta1", parents=[common], help="Jacobi theta-1")
    th.add_argument("--z", type=_complex_arg, required=True, help="argument re,im")
    th.add_argument("--sigma", type=_complex_arg, required=True, help="modulus re,im")
    th.set_defaults(func=cmd_theta1)

    ck = sub.add_parser("cone-kernel", parents=[common], help="heat kernel of the infinite cone")
    for name in ("beta", "r", "theta", "rho", "psi", "t"):
        ck.add_argument(f"--{name}", type=float, required=True)
    ck.set_defaults(func=cmd_cone_kernel)

    ver = sub.add_parser("verify", help="verification suites (exit 0 iff the suite passes)")
    vsub = ver.add_subparsers(dest="suite", required=True, metavar="suite")

    v = vsub.add_parser("cone-defect", parents=[common], help="tip contribution to the heat trace")
    v.add_argument("--beta", type=float, action="append", help="cone angle (repeatable)")
    v.add_argument("--t", type=float, default=0.01)
    v.add_argument("--radius", type=float, default=1.0)
    v.add_argument("--tol", type=float, default=1e-6)
    v.set_defaults(func=cmd_verify_cone_defect)

    v = vsub.add_parser("carslaw", parents=[common], help="cone kernel at angles 2 pi and pi")
    v.add_argument("--points", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=float, default=1e-10)
    v.set_defaults(func=cmd_verify_carslaw)

    v = vsub.add_parser("zeta-zero", parents=[common], help="heat-trace constant against zeta(0)")
    v.add_argument("--surface", required=True)
    v.add_argument("--levels", type=int, default=5)
    v.add_argument("--count", type=int, default=200)
    v.add_argument("--times", type=float, nargs="+", default=None,
                   help="fit times (default: just above 35 / lambda_max)")
    v.add_argument("--tol", type=float, default=1e-2)
    v.set_defaults(func=cmd_verify_zeta_zero)

    v = vsub.add_parser("rescaling", parents=[common], help="log det' under g -> kappa g")
    v.add_argument("--surface", required=True)
    v.add_argument("--kappa", type=float, default=2.0)
    v.add_argument("--levels", type=int, default=5)
    v.add_argument("--count", type=int, default=200)
    v.add_argument("--tol", type=float, default=1e-3)
    v.set_defaults(func=cmd_verify_rescaling)

    v = vsub.add_parser("weyl", parents=[common], help="slope of the counting function")
    v.add_argument("--surface", default=None, help="default: the unit square torus")
    v.add_argument("--levels", type=int, default=6)
    v.add_argument("--count", type=int, default=200)
    v.add_argument("--tol", type=float, default=0.05)
    v.add_argument("--cert-rtol", type=float, default=0.05,
                   help="largest relative error estimate inside the fitted range")
    v.set_defaults(func=cmd_verify_weyl)

    v = vsub.add_parser("ray-singer", parents=[common], help="flat torus log det' across moduli")
    v.add_argument("--sigma", type=_complex_arg, action="append",
                   help="modulus re,im (repeatable; the first is the reference)")
    v.add_argument("--grid", type=int, default=64, help="coarse grid size n (fine is 2n)")
    v.add_argument("--tol", type=float, default=0.02)
    v.set_defaults(func=cmd_verify_ray_singer)

    v = vsub.add_parser("mt", parents=[common], help="det' / predictor constancy on conical tori")
    v.add_argument("--metric", action="append", help="metric JSON (repeatable)")
    v.add_argument("--fem-det", action="append",
                   help="det JSON for the matching --metric (computed when omitted)")
    v.add_argument("--levels", type=int, default=4)
    v.add_argument("--count", type=int, default=200)
    v.add_argument("--tol", type=float, default=0.02)
    v.set_defaults(func=cmd_verify_mt)

    v = vsub.add_parser("three-polyhedra", parents=[common], help="cyclic product of density ratios")
    v.add_argument("--l")
    v.add_argument("--m")
    v.add_argument("--n")
    v.add_argument("--random", type=int, default=50, help="random triples when no files are given")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=float, default=1e-8)
    v.set_defaults(func=cmd_verify_three_polyhedra)

    v = vsub.add_parser("properties", parents=[common], help="structural property checks")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify_properties)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with threadpool_limits(limits=_thread_count(args.threads)):
            return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"conedet: UsageError: {exc}\n")
        return 2
    except ConedetError as exc:
        sys.stderr.write(f"conedet: {type(exc).__name__}: {exc}\n")
        return 1
    except (ValueError, KeyError) as exc:
        sys.stderr.write(f"conedet: invalid input: {type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
