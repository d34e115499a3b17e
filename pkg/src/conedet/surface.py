"""Compact polyhedral surfaces glued from Euclidean triangles.

A surface is a list of planar triangles, each in its own chart, together with
a perfect matching of their edges. Edge ``e`` of a triangle runs from corner
``e`` to corner ``(e + 1) % 3``; two matched edges are identified with
opposite directions, which is the orientation-compatible gluing for
counter-clockwise charts.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from conedet.errors import (DanglingEdge, DegenerateTriangle, LengthMismatch, MinAngleViolation,
                            NonOrientable)

TWO_PI = 2.0 * math.pi
FLAT_ANGLE_TOL = 1e-9
LENGTH_RTOL = 1e-12


@dataclass(frozen=True)
class ConePoint:
    """A vertex class whose total angle differs from ``2 pi``."""

    vertex_class: int
    angle: float

    @property
    def order(self) -> float:
        return self.angle / TWO_PI - 1.0


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


def signed_areas(tris: np.ndarray) -> np.ndarray:
    p0, p1, p2 = tris[:, 0], tris[:, 1], tris[:, 2]
    u = p1 - p0
    w = p2 - p0
    return 0.5 * (u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0])


def corner_angles(tris: np.ndarray) -> np.ndarray:
    """Interior angle at each corner, shape ``(F, 3)``."""
    out = np.empty(tris.shape[:2])
    for i in range(3):
        u = tris[:, (i + 1) % 3] - tris[:, i]
        w = tris[:, (i + 2) % 3] - tris[:, i]
        cross = u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0]
        dot = np.sum(u * w, axis=1)
        out[:, i] = np.arctan2(np.abs(cross), dot)
    return out


def edge_lengths(tris: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.roll(tris, -1, axis=1) - tris, axis=2)


class PolyhedralSurface:
    """Validated triangle gluing with derived topology and cone data.

    Parameters
    ----------
    triangles : array_like, shape (F, 3, 2)
        Corner coordinates of every triangle in its own chart.
    gluings : iterable of ((t, e), (t', e'))
        Each edge of each triangle must appear in exactly one pair.
    """

    def __init__(self, triangles, gluings: Iterable[Sequence[Sequence[int]]]):
        tris = np.array(triangles, dtype=float)
        if tris.ndim != 3 or tris.shape[1:] != (3, 2) or len(tris) == 0:
            raise ValueError("triangles must have shape (F, 3, 2)")
        if not np.all(np.isfinite(tris)):
            raise DegenerateTriangle("non-finite triangle coordinates")
        F = len(tris)
        areas = signed_areas(tris)
        lengths = edge_lengths(tris)
        scale = np.max(lengths, axis=1) ** 2
        bad = np.flatnonzero(np.abs(areas) <= 1e-14 * scale)
        if len(bad):
            raise DegenerateTriangle(f"triangle {int(bad[0])} has zero area")

        partner = np.full((F, 3, 2), -1, dtype=np.int64)
        pairs = []
        for pair in gluings:
            (t1, e1), (t2, e2) = (tuple(int(x) for x in side) for side in pair)
            for t, e in ((t1, e1), (t2, e2)):
                if not (0 <= t < F and 0 <= e < 3):
                    raise ValueError(f"gluing refers to missing edge ({t}, {e})")
                if partner[t, e, 0] >= 0:
                    raise DanglingEdge(f"edge ({t}, {e}) is glued more than once")
            if (t1, e1) == (t2, e2):
                raise DanglingEdge(f"edge ({t1}, {e1}) glued to itself")
            partner[t1, e1] = (t2, e2)
            partner[t2, e2] = (t1, e1)
            l1, l2 = lengths[t1, e1], lengths[t2, e2]
            if abs(l1 - l2) > LENGTH_RTOL * max(l1, l2):
                raise LengthMismatch(
                    f"edges ({t1}, {e1}) and ({t2}, {e2}) have lengths {l1!r} and {l2!r}")
            pairs.append(((t1, e1), (t2, e2)))
        missing = np.argwhere(partner[:, :, 0] < 0)
        if len(missing):
            t, e = missing[0]
            raise DanglingEdge(f"edge ({int(t)}, {int(e)}) has no partner")

        _check_orientation(areas, partner)

        uf = _UnionFind(3 * F)
        for (t1, e1), (t2, e2) in pairs:
            uf.union(3 * t1 + e1, 3 * t2 + (e2 + 1) % 3)
            uf.union(3 * t1 + (e1 + 1) % 3, 3 * t2 + e2)
        roots = np.array([uf.find(i) for i in range(3 * F)])
        _, corner_class = np.unique(roots, return_inverse=True)
        corner_class = corner_class.reshape(F, 3)

        self.triangles = tris
        self.gluings = tuple(pairs)
        self.partner = partner
        self.corner_class = corner_class
        self.orientation = 1 if areas[0] > 0 else -1
        self.n_faces = F
        self.n_edges = len(pairs)
        self.n_vertices = int(corner_class.max()) + 1
        chi = self.n_vertices - self.n_edges + self.n_faces
        if chi % 2:
            raise NonOrientable(f"odd Euler characteristic {chi}")
        self.euler_characteristic = chi
        self.genus = (2 - chi) // 2
        self.area = float(np.sum(np.abs(areas)))
        angles = corner_angles(tris)
        self.vertex_angles = np.bincount(corner_class.ravel(), weights=angles.ravel(),
                                         minlength=self.n_vertices)
        for arr in (self.triangles, self.partner, self.corner_class, self.vertex_angles):
            arr.setflags(write=False)

    def __repr__(self):
        return (f"PolyhedralSurface(faces={self.n_faces}, genus={self.genus}, "
                f"area={self.area:.6g}, cones={len(cone_points(self))})")

    def to_json(self) -> dict:
        return {
            "triangles": self.triangles.tolist(),
            "gluings": [[list(a), list(b)] for a, b in self.gluings],
        }

    def scaled(self, factor: float) -> "PolyhedralSurface":
        """Same gluing with every length multiplied by ``factor``."""
        return PolyhedralSurface(self.triangles * factor, self.gluings)


def _check_orientation(areas: np.ndarray, partner: np.ndarray) -> None:
    """Two-colour the dual graph by chart orientation.

    With reversed edge identification, glued triangles must carry the same
    chart orientation; a conflict means some gluing map is a reflection.
    """
    F = len(areas)
    colour = np.zeros(F, dtype=int)
    sign = np.sign(areas).astype(int)
    for start in range(F):
        if colour[start]:
            continue
        colour[start] = sign[start]
        stack = [start]
        while stack:
            t = stack.pop()
            for e in range(3):
                u = int(partner[t, e, 0])
                if colour[u] == 0:
                    colour[u] = colour[t]
                    stack.append(u)
                if colour[u] != sign[u]:
                    raise NonOrientable(
                        f"triangles {t} and {u} are glued with incompatible orientations")
        if start == 0 and np.any(colour == 0):
            raise ValueError("surface is not connected")


def load_surface(document) -> PolyhedralSurface:
    """Build a surface from the JSON schema (a string, bytes, path-free dict)."""
    if isinstance(document, (str, bytes)):
        document = json.loads(document)
    if "parallelograms" in document:
        from conedet.translation import build_translation_surface, spec_from_json

        return build_translation_surface(spec_from_json(document))
    try:
        triangles = document["triangles"]
        gluings = document["gluings"]
    except KeyError as exc:
        raise ValueError(f"surface document lacks {exc.args[0]!r}") from None
    return PolyhedralSurface(triangles, gluings)


def read_surface(path) -> PolyhedralSurface:
    with open(path, encoding="utf-8") as fh:
        return load_surface(json.load(fh))


def cone_points(surface: PolyhedralSurface) -> list[ConePoint]:
    return [ConePoint(int(k), float(a)) for k, a in enumerate(surface.vertex_angles)
            if abs(a - TWO_PI) > FLAT_ANGLE_TOL]


def gauss_bonnet_residual(surface: PolyhedralSurface) -> float:
    """``sum_k b_k - (2g - 2)``; zero for a consistent flat conical surface."""
    return float(sum(c.order for c in cone_points(surface)) - (2 * surface.genus - 2))


def build_flat_torus(sigma: complex, n=1) -> PolyhedralSurface:
    """Triangulated fundamental parallelogram of ``C / (Z + sigma Z)``.

    ``n`` is the number of subdivisions per side, or a pair ``(n1, n2)``
    along ``1`` and ``sigma``. Each cell is split along its shorter diagonal.
    """
    sigma = complex(sigma)
    if not sigma.imag > 0:
        raise ValueError(f"flat torus needs Im sigma > 0, got {sigma}")
    n1, n2 = (n, n) if np.isscalar(n) else (int(n[0]), int(n[1]))
    if n1 < 1 or n2 < 1:
        raise ValueError("subdivision counts must be positive")
    ii, jj = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()

    def z(i, j):
        w = i / n1 + (j / n2) * sigma
        return np.stack([w.real, w.imag], axis=-1)

    a, b, c, d = z(ii, jj), z(ii + 1, jj), z(ii + 1, jj + 1), z(ii, jj + 1)
    short_ac = abs(1 / n1 + sigma / n2) <= abs(1 / n1 - sigma / n2)
    cells = len(ii)
    tris = np.empty((2 * cells, 3, 2))
    # edge keys: ("h", i, j) bottom of cell, ("v", i, j) left of cell, ("d", i, j) diagonal
    keys = []
    if short_ac:
        tris[0::2] = np.stack([a, b, c], axis=1)
        tris[1::2] = np.stack([a, c, d], axis=1)
        for i, j in zip(ii, jj):
            keys.append((("h", i, j), ("v", (i + 1) % n1, j), ("d", i, j)))
            keys.append((("d", i, j), ("h", i, (j + 1) % n2), ("v", i, j)))
    else:
        tris[0::2] = np.stack([a, b, d], axis=1)
        tris[1::2] = np.stack([b, c, d], axis=1)
        for i, j in zip(ii, jj):
            keys.append((("h", i, j), ("d", i, j), ("v", i, j)))
            keys.append((("v", (i + 1) % n1, j), ("h", i, (j + 1) % n2), ("d", i, j)))
    return PolyhedralSurface(tris, _match_keys(keys))


def _match_keys(keys) -> list:
    seen = {}
    gluings = []
    for t, tri_keys in enumerate(keys):
        for e, key in enumerate(tri_keys):
            if key in seen:
                gluings.append((seen.pop(key), (t, e)))
            else:
                seen[key] = (t, e)
    if seen:
        raise DanglingEdge(f"{len(seen)} edges left unmatched")
    return gluings


def square_tiled_surface(right: Sequence[int], top: Sequence[int], size: float = 1.0
                         ) -> PolyhedralSurface:
    """Translation surface tiled by unit squares (an origami).

    ``right[s]`` is the square glued to the right side of square ``s`` and
    ``top[s]`` the one glued on top. Both must be permutations.
    """
    n = len(right)
    if sorted(right) != list(range(n)) or sorted(top) != list(range(n)):
        raise ValueError("right and top must be permutations of the squares")
    tris = np.empty((2 * n, 3, 2))
    keys = []
    left = {r: s for s, r in enumerate(right)}
    below = {u: s for s, u in enumerate(top)}
    for s in range(n):
        x0 = float(s)  # lay squares side by side; charts are independent
        a, b, c, d = (x0, 0.0), (x0 + 1, 0.0), (x0 + 1, 1.0), (x0, 1.0)
        tris[2 * s] = (a, b, c)
        tris[2 * s + 1] = (a, c, d)
        keys.append((("h", s), ("v", right[s]), ("d", s)))
        keys.append((("d", s), ("h", top[s]), ("v", s)))
        assert left[right[s]] == s and below[top[s]] == s
    return PolyhedralSurface(tris * size, _match_keys(keys))


def surface_from_3d(vertices, faces) -> PolyhedralSurface:
    """Intrinsic flat surface of a closed, consistently oriented 3D triangle mesh."""
    P = np.asarray(vertices, dtype=float)
    faces = np.asarray(faces, dtype=int)
    tris = np.empty((len(faces), 3, 2))
    for k, (i, j, l) in enumerate(faces):
        u = P[j] - P[i]
        w = P[l] - P[i]
        e1 = u / np.linalg.norm(u)
        nrm = np.cross(u, w)
        e2 = np.cross(nrm / np.linalg.norm(nrm), e1)
        tris[k] = [(0.0, 0.0), (np.linalg.norm(u), 0.0), (w @ e1, w @ e2)]
    keys = [tuple(frozenset((int(f[e]), int(f[(e + 1) % 3]))) for e in range(3)) for f in faces]
    return PolyhedralSurface(tris, _match_keys(keys))


def cube_surface(side: float = 1.0) -> PolyhedralSurface:
    corners = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], float) * side
    idx = {tuple(int(c) for c in (v / side).round()): k for k, v in enumerate(corners)}
    quads = [
        [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)],  # z = 0, normal -z
        [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],  # z = 1
        [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)],  # y = 0
        [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)],  # y = 1
        [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)],  # x = 0
        [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)],  # x = 1
    ]
    faces = []
    for q in quads:
        a, b, c, d = (idx[v] for v in q)
        faces += [(a, b, c), (a, c, d)]
    return surface_from_3d(corners, faces)


def pillowcase_surface(width: float = 1.0, height: float = 1.0) -> PolyhedralSurface:
    """Two rectangles glued along their whole boundary."""
    a, b, c, d = (0.0, 0.0), (width, 0.0), (width, height), (0.0, height)
    tris = [(a, b, c), (a, c, d),  # front
            (a, b, c), (a, c, d)]  # back, seen mirrored
    # front bottom <-> back bottom, front right <-> back left, etc.
    gluings = [((0, 0), (2, 0)),  # bottom
               ((0, 1), (3, 2)),  # front right <-> back left
               ((1, 1), (3, 1)),  # top
               ((1, 2), (2, 1)),  # front left <-> back right
               ((0, 2), (1, 0)),  # front diagonal
               ((2, 2), (3, 0))]  # back diagonal
    return PolyhedralSurface(tris, gluings)


def l_shaped_surface() -> PolyhedralSurface:
    """Three unit squares in an L: genus 2 with a single cone of angle 6 pi."""
    return square_tiled_surface(right=[1, 0, 2], top=[2, 1, 0])


FIXTURES = ("torus_i", "pillowcase", "cube", "l_surface", "two_tori_slit")


def fixture_documents() -> dict[str, dict]:
    """JSON documents of the golden surfaces, regenerated from the builders."""
    two_tori = {
        "parallelograms": [{"A": [1.0, 0.0], "B": [0.0, 1.0]}, {"A": [1.0, 0.0], "B": [0.0, 2.0]}],
        "cuts": [{"from": [0.25, 0.5], "to": [0.75, 0.5], "on": [0, 1]}],
    }
    return {
        "torus_i": build_flat_torus(1j).to_json(),
        "pillowcase": pillowcase_surface().to_json(),
        "cube": cube_surface().to_json(),
        "l_surface": l_shaped_surface().to_json(),
        "two_tori_slit": two_tori,
    }


def fixture(name: str) -> PolyhedralSurface:
    """Load one of the golden surfaces shipped in ``conedet/data``."""
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    text = resources.files("conedet.data").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return load_surface(text)


def fixture_path(name: str) -> str:
    return str(resources.files("conedet.data").joinpath(f"{name}.json"))


def default_grading(surface: PolyhedralSurface) -> dict[int, float]:
    """Grading exponent ``mu = max(1, beta / 2 pi + 1/2)`` for every cone class."""
    out = {}
    for c in cone_points(surface):
        mu = max(1.0, c.angle / TWO_PI + 0.5)
        if mu > 1.0:
            out[c.vertex_class] = mu
    return out


@dataclass(frozen=True)
class MeshLevel:
    """One level of a nested triangulation of a polyhedral surface.

    Child triangles keep the chart of their root triangle, so ``coords`` can
    be compared with ``surface.triangles[root]`` directly. ``vertex_class``
    holds the surface vertex class of every original vertex and ``-1`` for
    vertices created by refinement.
    """

    surface: PolyhedralSurface
    level: int
    coords: np.ndarray
    vertices: np.ndarray
    neighbors: np.ndarray
    root: np.ndarray
    parent: np.ndarray
    vertex_class: np.ndarray
    grading: dict
    min_angle: float = math.radians(1.0)

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_class)

    @property
    def n_triangles(self) -> int:
        return len(self.vertices)

    @property
    def h(self) -> float:
        return float(np.max(edge_lengths(self.coords)))

    def diameters(self) -> np.ndarray:
        return np.max(edge_lengths(self.coords), axis=1)

    def areas(self) -> np.ndarray:
        return np.abs(signed_areas(self.coords))

    def smallest_angle(self) -> float:
        return float(np.min(corner_angles(self.coords)))

    def euler_characteristic(self) -> int:
        edges = 3 * self.n_triangles // 2
        return self.n_vertices - edges + self.n_triangles


def initial_mesh(surface: PolyhedralSurface, grading: dict | None = None,
                 min_angle: float = math.radians(1.0)) -> MeshLevel:
    """Level-0 mesh: the surface's own triangles."""
    grading = default_grading(surface) if grading is None else dict(grading)
    for k, mu in grading.items():
        if not mu >= 1.0:
            raise ValueError(f"grading exponent for class {k} must be >= 1, got {mu}")
    F = surface.n_faces
    return MeshLevel(
        surface=surface, level=0,
        coords=surface.triangles.copy(),
        vertices=surface.corner_class.copy(),
        neighbors=surface.partner.copy(),
        root=np.arange(F), parent=np.arange(F),
        vertex_class=np.arange(surface.n_vertices),
        grading=grading, min_angle=min_angle)


# child c of a red refinement and the edge of that child carrying the
# first / second half of parent edge e
_FIRST_HALF = np.array([[0, 0], [1, 1], [2, 2]])
_SECOND_HALF = np.array([[1, 0], [2, 1], [0, 2]])


def refine(mesh: MeshLevel, grading: dict | None = None) -> MeshLevel:
    """Split every triangle into four, pulling new points towards graded cones.

    An edge with exactly one endpoint at a cone class of exponent ``mu > 1``
    is split at fraction ``2**-mu`` from that cone, every other edge at its
    midpoint. The result is nested in ``mesh``. Raises
    :class:`MinAngleViolation` if some child angle falls below ``mesh.min_angle``.
    """
    grading = mesh.grading if grading is None else dict(grading)
    for k, mu in grading.items():
        if not mu >= 1.0:
            raise ValueError(f"grading exponent for class {k} must be >= 1, got {mu}")
    T = mesh.n_triangles
    nV = mesh.n_vertices
    verts = mesh.vertices
    nb = mesh.neighbors

    mu_v = np.ones(nV)
    for k, mu in grading.items():
        mu_v[mesh.vertex_class == k] = mu

    # one new vertex per undirected edge, numbered by its smaller half-edge
    half = np.arange(3 * T).reshape(T, 3)
    other = 3 * nb[:, :, 0] + nb[:, :, 1]
    owner = np.minimum(half, other)
    uniq, edge_id = np.unique(owner, return_inverse=True)
    mid_id = nV + edge_id.reshape(T, 3)

    va = verts
    vb = np.roll(verts, -1, axis=1)
    ga, gb = mu_v[va], mu_v[vb]
    frac = np.full((T, 3), 0.5)
    only_a = (ga > 1.0) & ~(gb > 1.0)
    only_b = (gb > 1.0) & ~(ga > 1.0)
    frac[only_a] = 2.0 ** -ga[only_a]
    frac[only_b] = 1.0 - 2.0 ** -gb[only_b]
    pa = mesh.coords
    pb = np.roll(mesh.coords, -1, axis=1)
    mid = pa + frac[:, :, None] * (pb - pa)

    v0, v1, v2 = verts[:, 0], verts[:, 1], verts[:, 2]
    m0, m1, m2 = mid_id[:, 0], mid_id[:, 1], mid_id[:, 2]
    p0, p1, p2 = pa[:, 0], pa[:, 1], pa[:, 2]
    q0, q1, q2 = mid[:, 0], mid[:, 1], mid[:, 2]
    new_v = np.stack([
        np.stack([v0, m0, m2], 1), np.stack([m0, v1, m1], 1),
        np.stack([m2, m1, v2], 1), np.stack([m0, m1, m2], 1)], axis=1).reshape(4 * T, 3)
    new_c = np.stack([
        np.stack([p0, q0, q2], 1), np.stack([q0, p1, q1], 1),
        np.stack([q2, q1, p2], 1), np.stack([q0, q1, q2], 1)], axis=1).reshape(4 * T, 3, 2)

    new_nb = np.empty((4 * T, 3, 2), dtype=np.int64)
    base = 4 * np.arange(T)
    # interior edges
    inner = [((0, 1), (3, 2)), ((1, 2), (3, 0)), ((2, 0), (3, 1))]
    for (ca, ea), (cb, eb) in inner:
        new_nb[base + ca, ea] = np.stack([base + cb, np.full(T, eb)], 1)
        new_nb[base + cb, eb] = np.stack([base + ca, np.full(T, ea)], 1)
    # halves of parent edges: first half of (t, e) meets second half of its partner
    for e in range(3):
        pt, pe = nb[:, e, 0], nb[:, e, 1]
        fc, fe = _FIRST_HALF[e]
        sc, se = _SECOND_HALF[e]
        new_nb[base + fc, fe, 0] = 4 * pt + _SECOND_HALF[pe, 0]
        new_nb[base + fc, fe, 1] = _SECOND_HALF[pe, 1]
        new_nb[base + sc, se, 0] = 4 * pt + _FIRST_HALF[pe, 0]
        new_nb[base + sc, se, 1] = _FIRST_HALF[pe, 1]

    vertex_class = np.concatenate([mesh.vertex_class, np.full(len(uniq), -1)])
    out = MeshLevel(
        surface=mesh.surface, level=mesh.level + 1, coords=new_c, vertices=new_v,
        neighbors=new_nb, root=np.repeat(mesh.root, 4), parent=np.repeat(np.arange(T), 4),
        vertex_class=vertex_class, grading=grading, min_angle=mesh.min_angle)
    smallest = out.smallest_angle()
    if smallest < mesh.min_angle:
        raise MinAngleViolation(
            f"refinement produced angle {math.degrees(smallest):.3g} deg "
            f"below floor {math.degrees(mesh.min_angle):.3g} deg")
    return out


def mesh_hierarchy(surface: PolyhedralSurface, levels: int, grading: dict | None = None
                   ) -> list[MeshLevel]:
    """Meshes ``0 .. levels`` obtained by repeated refinement."""
    meshes = [initial_mesh(surface, grading)]
    for _ in range(levels):
        meshes.append(refine(meshes[-1]))
    return meshes
