"""Translation surfaces glued from parallelograms along slits.

Each parallelogram ``{u A + v B : 0 <= u, v <= 1}`` is a torus by itself
(opposite sides identified by translation). A slit shared by parallelograms
``i`` and ``j`` is cut open in both, and the left bank in one is glued to the
right bank in the other. Slit endpoints become cone points of angle ``4 pi``
(more if several slits meet there).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

from conedet.errors import CutOutsideParallelogram, CutOverlap, DanglingEdge
from conedet.surface import PolyhedralSurface


@dataclass(frozen=True)
class Cut:
    start: complex
    end: complex
    on: tuple[int, int]


@dataclass(frozen=True)
class TranslationSurfaceSpec:
    """Periods ``(A, B)`` of each parallelogram and the slits joining them.

    Cut endpoints are given relative to the lower-left corner of each
    parallelogram they lie on. ``B`` must point counter-clockwise from ``A``.
    """

    periods: tuple[tuple[complex, complex], ...]
    cuts: tuple[Cut, ...] = field(default=())

    def __post_init__(self):
        for k, (A, B) in enumerate(self.periods):
            if not (np.conj(A) * B).imag > 0:
                raise ValueError(f"parallelogram {k} has non-positive area")
        for c in self.cuts:
            i, j = c.on
            if i == j or not (0 <= i < len(self.periods) and 0 <= j < len(self.periods)):
                raise ValueError(f"cut {c} must join two distinct parallelograms")

    @property
    def genus(self) -> int:
        return len(self.periods)

    @property
    def area(self) -> float:
        return float(sum((np.conj(A) * B).imag for A, B in self.periods))


def spec_from_json(doc: dict) -> TranslationSurfaceSpec:
    periods = tuple((complex(*p["A"]), complex(*p["B"])) for p in doc["parallelograms"])
    cuts = tuple(Cut(complex(*c["from"]), complex(*c["to"]), tuple(int(x) for x in c["on"]))
                 for c in doc.get("cuts", []))
    return TranslationSurfaceSpec(periods, cuts)


def spec_to_json(spec: TranslationSurfaceSpec) -> dict:
    return {
        "parallelograms": [{"A": [A.real, A.imag], "B": [B.real, B.imag]} for A, B in spec.periods],
        "cuts": [{"from": [c.start.real, c.start.imag], "to": [c.end.real, c.end.imag],
                  "on": list(c.on)} for c in spec.cuts],
    }


def _lattice_coords(z: complex, A: complex, B: complex) -> tuple[float, float]:
    M = np.array([[A.real, B.real], [A.imag, B.imag]])
    u, v = np.linalg.solve(M, [z.real, z.imag])
    return float(u), float(v)


def _segments_touch(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b - a).real * (c - a).imag - (b - a).imag * (c - a).real

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True

    def on_segment(a, b, c):
        return abs(orient(a, b, c)) < 1e-14 and min(a.real, b.real) - 1e-14 <= c.real <= max(a.real, b.real) + 1e-14 \
            and min(a.imag, b.imag) - 1e-14 <= c.imag <= max(a.imag, b.imag) + 1e-14

    return on_segment(q1, q2, p1) or on_segment(q1, q2, p2) or on_segment(p1, p2, q1) \
        or on_segment(p1, p2, q2)


def _validate_cuts(spec: TranslationSurfaceSpec) -> list[list[int]]:
    per_face: list[list[int]] = [[] for _ in spec.periods]
    for idx, c in enumerate(spec.cuts):
        if abs(c.end - c.start) == 0:
            raise CutOverlap(f"cut {idx} has zero length")
        for face in c.on:
            A, B = spec.periods[face]
            for z in (c.start, c.end):
                u, v = _lattice_coords(z, A, B)
                if not (1e-9 < u < 1 - 1e-9 and 1e-9 < v < 1 - 1e-9):
                    raise CutOutsideParallelogram(
                        f"cut {idx} endpoint {z} is not strictly inside parallelogram {face}")
            per_face[face].append(idx)
    for face, ids in enumerate(per_face):
        for a in range(len(ids)):
            for b in range(a + 1, len(ids)):
                ca, cb = spec.cuts[ids[a]], spec.cuts[ids[b]]
                if _segments_touch(ca.start, ca.end, cb.start, cb.end):
                    raise CutOverlap(f"cuts {ids[a]} and {ids[b]} meet in parallelogram {face}")
    return per_face


def _face_points(A, B, cuts, m, h):
    """Point set of one parallelogram, in lattice coordinates, with its slit samples.

    Slits are sampled at spacing ``h`` so both parallelograms sharing a slit
    place identical points on it.
    """
    pts = []
    side = np.arange(m) / m
    pts += [(s, 0.0) for s in side] + [(1.0, s) for s in side]
    pts += [(1.0 - s, 1.0) for s in side] + [(0.0, 1.0 - s) for s in side]
    cut_pts = []
    for c in cuts:
        k = max(2, int(math.ceil(abs(c.end - c.start) / h - 1e-9)))
        zs = [c.start + (c.end - c.start) * s for s in np.linspace(0, 1, k + 1)]
        cut_pts.append([_lattice_coords(z, A, B) for z in zs])
    interior = []
    grid = (np.arange(1, m) / m)
    for u in grid:
        for v in grid:
            interior.append((u, v))
    return np.array(pts), cut_pts, np.array(interior) if interior else np.zeros((0, 2))


def _triangulate_face(A, B, cuts, m, h):
    """Delaunay triangulation that contains every slit sample segment as an edge."""
    boundary, cut_pts, interior = _face_points(A, B, cuts, m, h)
    M = np.array([[A.real, B.real], [A.imag, B.imag]])
    all_cut = [p for cp in cut_pts for p in cp]
    lattice = [tuple(p) for p in boundary] + [tuple(p) for p in all_cut]
    # drop interior grid points crowding the slits
    for p in interior:
        z = M @ p
        far = True
        for cp in cut_pts:
            a, b = M @ np.array(cp[0]), M @ np.array(cp[-1])
            d = b - a
            s = np.clip(np.dot(z - a, d) / np.dot(d, d), 0.0, 1.0)
            if np.linalg.norm(z - (a + s * d)) < 0.6 * h:
                far = False
                break
        if far:
            lattice.append(tuple(p))
    lattice = np.array(lattice)
    xy = lattice @ M.T
    tri = Delaunay(xy)
    simplices = tri.simplices.copy()
    # counter-clockwise in the chart
    a = xy[simplices]
    cross = (a[:, 1, 0] - a[:, 0, 0]) * (a[:, 2, 1] - a[:, 0, 1]) - \
            (a[:, 1, 1] - a[:, 0, 1]) * (a[:, 2, 0] - a[:, 0, 0])
    flip = cross < 0
    simplices[flip] = simplices[flip][:, [0, 2, 1]]
    nb = len(boundary)
    cut_index = []
    offset = nb
    for cp in cut_pts:
        cut_index.append(list(range(offset, offset + len(cp))))
        offset += len(cp)
    edges = {}
    for t, s in enumerate(simplices):
        for e in range(3):
            edges[(int(s[e]), int(s[(e + 1) % 3]))] = (t, e)
    for ids in cut_index:
        for p, q in zip(ids[:-1], ids[1:]):
            if (p, q) not in edges or (q, p) not in edges:
                return None
    return lattice, xy, simplices, edges, cut_index


def build_translation_surface(spec: TranslationSurfaceSpec, resolution: int = 4) -> PolyhedralSurface:
    """Glue the parallelograms of ``spec`` into a single polyhedral surface.

    ``resolution`` is the number of boundary segments per parallelogram side;
    it is raised automatically until every slit is a union of mesh edges.
    """
    per_face = _validate_cuts(spec)
    m = max(1, int(resolution))
    for _ in range(8):
        h = min(min(abs(A), abs(B)) for A, B in spec.periods) / m
        faces = [_triangulate_face(A, B, [spec.cuts[i] for i in per_face[f]], m, h)
                 for f, (A, B) in enumerate(spec.periods)]
        if all(f is not None for f in faces):
            break
        m *= 2
    else:
        raise CutOverlap("could not resolve the slits in a triangulation")

    triangles = []
    offsets = []
    for lattice, xy, simplices, _, _ in faces:
        offsets.append(len(triangles))
        triangles.extend(xy[simplices])
    gluings = []
    keys: dict = {}

    def side_key(p, q):
        """Boundary segment key shared by opposite sides (translation gluing)."""
        (u1, v1), (u2, v2) = p, q
        if abs(v1) < 1e-12 and abs(v2) < 1e-12:
            return ("h", round(min(u1, u2) * 2**20))
        if abs(v1 - 1) < 1e-12 and abs(v2 - 1) < 1e-12:
            return ("h", round(min(u1, u2) * 2**20))
        if abs(u1) < 1e-12 and abs(u2) < 1e-12:
            return ("v", round(min(v1, v2) * 2**20))
        if abs(u1 - 1) < 1e-12 and abs(u2 - 1) < 1e-12:
            return ("v", round(min(v1, v2) * 2**20))
        return None

    # slit banks: bank[(cut, segment, side)] = global (t, e)
    banks = {}
    for f, (lattice, xy, simplices, edges, cut_index) in enumerate(faces):
        cut_ids = per_face[f]
        slit_edges = {}
        for local, ids in zip(cut_ids, cut_index):
            for s, (p, q) in enumerate(zip(ids[:-1], ids[1:])):
                slit_edges[(p, q)] = (local, s, "left")
                slit_edges[(q, p)] = (local, s, "right")
        for (p, q), (t, e) in edges.items():
            g = (offsets[f] + t, e)
            if (p, q) in slit_edges:
                banks[(f,) + slit_edges[(p, q)]] = g
                continue
            if (q, p) in edges:
                if p < q:
                    gluings.append((g, (offsets[f] + edges[(q, p)][0], edges[(q, p)][1])))
                continue
            key = side_key(lattice[p], lattice[q])
            if key is None:
                raise DanglingEdge(f"unmatched boundary edge in parallelogram {f}")
            key = (f,) + key
            if key in keys:
                gluings.append((keys.pop(key), g))
            else:
                keys[key] = g
    if keys:
        raise DanglingEdge(f"{len(keys)} parallelogram sides left unmatched")
    for idx, c in enumerate(spec.cuts):
        i, j = c.on
        segs = {k[2] for k in banks if k[1] == idx and k[0] == i}
        for s in segs:
            gluings.append((banks[(i, idx, s, "left")], banks[(j, idx, s, "right")]))
            gluings.append((banks[(i, idx, s, "right")], banks[(j, idx, s, "left")]))
    return PolyhedralSurface(np.array(triangles), gluings)
