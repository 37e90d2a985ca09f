"""Oriented simplicial complexes carrying a simplicial involution.

A complex is stored through its top simplices (positively oriented vertex
tuples); lower simplices are generated with a canonical orientation
(sorted vertex ids for everything below the top dimension).  The
involution is given on vertices and induced on all simplices together
with the orientation sign relating the image of a stored tuple to the
stored tuple of the image simplex.

The orbifold quotient is kept implicit: each non-fixed orbit ``{s, inv(s)}``
has exactly one *selected* lift.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import InputError

TWO_PI = 2.0 * np.pi


def perm_parity(seq: Iterable[int]) -> int:
    """Sign (+1/-1) of the permutation sorting ``seq`` (distinct entries)."""
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def tuple_sign(tup: Iterable[int], ref: Iterable[int]) -> int:
    """Orientation sign of vertex tuple ``tup`` relative to ``ref`` (same vertex set)."""
    pos = {v: k for k, v in enumerate(ref)}
    return perm_parity(pos[v] for v in tup)


class InvolutiveComplex:
    """Oriented 2- or 3-complex with a simplicial involution and lift selection.

    Parameters
    ----------
    coords : (V, d) array
        Vertex coordinates (momenta in ``[-pi, pi)``), used only for
        refinement and serialization.
    top : (T, d+1) int array
        Top simplices as positively oriented vertex tuples.
    vinv : (V,) int array
        Involution on vertex ids.
    preserving : bool
        Whether the involution is expected to preserve orientation.
    selection : optional list of bool arrays per dimension
        Explicit lift flags; a canonical choice is made otherwise.

    Notes
    -----
    The constructor never raises on a broken involution; use
    :func:`validate` to list violations.
    """

    def __init__(self, coords, top, vinv, preserving: bool = True,
                 selection: list | None = None, period: float = TWO_PI):
        self.coords = np.asarray(coords, dtype=float)
        top = np.asarray(top, dtype=np.int64)
        self.dim = top.shape[1] - 1
        if self.dim not in (2, 3):
            raise InputError("only 2- and 3-complexes are supported")
        self.n_vertices = len(self.coords)
        self.vinv = np.asarray(vinv, dtype=np.int64)
        self.preserving = preserving
        self.period = period

        simp: list[np.ndarray] = [np.arange(self.n_vertices)[:, None]]
        for p in range(1, self.dim):
            faces = {tuple(sorted(s)) for t in top for s in itertools.combinations(t, p + 1)}
            simp.append(np.array(sorted(faces), dtype=np.int64).reshape(-1, p + 1))
        simp.append(top)
        self.simplices = simp
        self.index = [{tuple(sorted(s)): k for k, s in enumerate(arr)} for arr in simp]

        self.bnd: list[np.ndarray | None] = [None]
        self.bsign: list[np.ndarray | None] = [None]
        for p in range(1, self.dim + 1):
            arr = simp[p]
            b = np.empty((len(arr), p + 1), dtype=np.int64)
            s = np.empty((len(arr), p + 1), dtype=np.int64)
            for k, tup in enumerate(arr):
                for j in range(p + 1):
                    face = tuple(np.delete(tup, j))
                    fk = self.index[p - 1][tuple(sorted(face))]
                    b[k, j] = fk
                    s[k, j] = (-1) ** j * tuple_sign(face, simp[p - 1][fk])
            self.bnd.append(b)
            self.bsign.append(s)

        self.inv = []
        self.inv_sign = []
        for p, arr in enumerate(simp):
            im = np.full(len(arr), -1, dtype=np.int64)
            sg = np.zeros(len(arr), dtype=np.int64)
            for k, tup in enumerate(arr):
                img = tuple(int(self.vinv[v]) if 0 <= self.vinv[v] < self.n_vertices else -1
                            for v in tup)
                j = self.index[p].get(tuple(sorted(img)))
                if j is not None and len(set(img)) == len(img):
                    im[k] = j
                    sg[k] = tuple_sign(img, arr[j])
            self.inv.append(im)
            self.inv_sign.append(sg)

        self.fixed = [self.inv[p] == np.arange(len(a)) for p, a in enumerate(simp)]
        if selection is None:
            selection = []
            for p, arr in enumerate(simp):
                idx = np.arange(len(arr))
                selection.append(self.fixed[p] | (idx < np.where(self.inv[p] >= 0, self.inv[p], idx + 1)))
        self.selected = [np.asarray(s, dtype=bool) for s in selection]

    # ------------------------------------------------------------------
    @property
    def vertices(self) -> np.ndarray:
        return self.simplices[0][:, 0]

    @property
    def edges(self) -> np.ndarray:
        return self.simplices[1]

    @property
    def faces(self) -> np.ndarray:
        return self.simplices[2]

    @property
    def tets(self) -> np.ndarray:
        return self.simplices[3] if self.dim == 3 else np.empty((0, 4), dtype=np.int64)

    def count(self, p: int) -> int:
        return len(self.simplices[p])

    def euler(self) -> int:
        return sum((-1) ** p * self.count(p) for p in range(self.dim + 1))

    def fixed_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.fixed[0])

    def orbit_count(self, p: int) -> int:
        return int(self.selected[p].sum())

    def lift_of(self, p: int, k: int) -> int:
        """Selected representative of the orbit of simplex ``k``."""
        return k if self.selected[p][k] else int(self.inv[p][k])

    def cofaces(self, p: int) -> list[list[int]]:
        """For each p-simplex, the (p+1)-simplices containing it."""
        out: list[list[int]] = [[] for _ in range(self.count(p))]
        for k, row in enumerate(self.bnd[p + 1]):
            for j in row:
                out[j].append(k)
        return out

    def with_selection(self, selection: list) -> "InvolutiveComplex":
        c = InvolutiveComplex.__new__(InvolutiveComplex)
        c.__dict__.update(self.__dict__)
        c.selected = [np.asarray(s, dtype=bool) for s in selection]
        return c

    def swap_lift(self, p: int, k: int) -> "InvolutiveComplex":
        """Copy with the lift of the orbit of ``k`` swapped to its image."""
        if self.fixed[p][k]:
            raise InputError("cannot swap the lift of a fixed simplex")
        sel = [s.copy() for s in self.selected]
        j = int(self.inv[p][k])
        sel[p][k], sel[p][j] = sel[p][j], sel[p][k]
        return self.with_selection(sel)

    # ------------------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "format": "complex-v1",
            "dimension": self.dim,
            "preserving": self.preserving,
            "coords": self.coords.tolist(),
            "top": self.simplices[-1].tolist(),
            "involution": self.vinv.tolist(),
            "selected": [s.astype(int).tolist() for s in self.selected],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "InvolutiveComplex":
        if doc.get("format") != "complex-v1":
            raise InputError("not a complex-v1 document")
        return cls(doc["coords"], doc["top"], doc["involution"], doc["preserving"],
                   selection=[np.array(s, dtype=bool) for s in doc["selected"]])

    def dumps(self) -> str:
        return json.dumps(self.to_json())


# ----------------------------------------------------------------------
# builders

def _grid_coord(i: int, n: int) -> float:
    return -np.pi + TWO_PI * i / n


def build_torus2(n: int, pattern: str = "diagonal") -> InvolutiveComplex:
    """Triangulated 2-torus on an ``n x n`` grid with involution ``k -> -k``.

    ``pattern='diagonal'`` splits every square along ``(i, j) -- (i+1, j+1)``
    (``2 n^2`` triangles); the point reflection maps this pattern to itself,
    so the involution is simplicial.  ``pattern='crossed'`` adds a centre
    vertex to every square (``4 n^2`` triangles); that pattern is also
    invariant under the quarter turn ``(k1, k2) -> (-k2, k1)``.  Grid index
    ``i`` maps to ``(n - i) mod n``; square centres are never fixed.
    """
    if n % 2 or n < 4:
        raise InputError(f"torus grid size must be even and >= 4, got {n}")
    if pattern not in ("diagonal", "crossed"):
        raise InputError(f"unknown pattern {pattern!r}")
    vid = lambda i, j: (i % n) + n * (j % n)
    coords = [(_grid_coord(i, n), _grid_coord(j, n)) for j in range(n) for i in range(n)]
    vinv = [vid(-i, -j) for j in range(n) for i in range(n)]
    top = []
    if pattern == "diagonal":
        for j in range(n):
            for i in range(n):
                top.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
                top.append((vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)))
        return InvolutiveComplex(coords, top, vinv, preserving=True)
    cid = lambda i, j: n * n + (i % n) + n * (j % n)
    h = np.pi / n
    coords += [(_grid_coord(i, n) + h, _grid_coord(j, n) + h) for j in range(n) for i in range(n)]
    # centre of square (i, j) maps to centre of square (-i-1, -j-1)
    vinv += [cid(-i - 1, -j - 1) for j in range(n) for i in range(n)]
    for j in range(n):
        for i in range(n):
            c = cid(i, j)
            ring = [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
            for a in range(4):
                top.append((ring[a], ring[(a + 1) % 4], c))
    return InvolutiveComplex(coords, top, vinv, preserving=True)


def grid_automorphism(c: InvolutiveComplex, kind: str) -> np.ndarray:
    """Vertex permutation of a torus grid complex commuting with ``k -> -k``.

    ``kind`` is one of ``'half-shift'`` (``k1 -> k1 + pi``), ``'swap'``
    (``(k1, k2) -> (k2, k1)``, orientation reversing) or ``'quarter-turn'``
    (``(k1, k2) -> (-k2, k1)``, simplicial only on the crossed pattern).
    The image of vertex ``v`` is found by matching coordinates.
    """
    x = c.coords
    if kind == "half-shift":
        y = np.stack([x[:, 0] + np.pi, x[:, 1]], axis=1)
    elif kind == "swap":
        y = x[:, ::-1]
    elif kind == "quarter-turn":
        y = np.stack([-x[:, 1], x[:, 0]], axis=1)
    else:
        raise InputError(f"unknown automorphism {kind!r}")
    y = (y + np.pi) % TWO_PI - np.pi
    key = lambda z: tuple(np.rint((z + np.pi) * 1e6).astype(np.int64) % int(round(TWO_PI * 1e6)))
    table = {key(z): k for k, z in enumerate(x)}
    perm = np.array([table.get(key(z), -1) for z in y], dtype=np.int64)
    if np.any(perm < 0):
        raise InputError(f"{kind} does not map the vertex grid to itself")
    return perm


@dataclass
class BoundarySurface:
    """Closed surface on the boundary of a 3d domain.

    ``face_parent[k]``/``face_sign[k]`` give the parent triangle of face
    ``k`` and the sign of the boundary orientation relative to the
    parent's stored orientation; the same for edges.  Vertex ids map
    through ``vertex_parent``.
    """

    surface: InvolutiveComplex
    vertex_parent: np.ndarray
    edge_parent: np.ndarray
    edge_sign: np.ndarray
    face_parent: np.ndarray
    face_sign: np.ndarray
    level: float


@dataclass
class DomainDecomposition3:
    parent: InvolutiveComplex
    axis: int
    in_F: np.ndarray
    boundary: list[BoundarySurface] = field(default_factory=list)


def build_torus3(n: int, selection_axis: int = 3) -> InvolutiveComplex:
    """Freudenthal-triangulated 3-torus with involution ``k -> -k``.

    Every cube is cut into six tetrahedra along its main diagonal; the
    point reflection reverses that diagonal, so the pattern is preserved
    and the involution (orientation reversing) is simplicial.  Selected
    tetrahedra are those with ``k_axis`` in ``[0, pi]``.
    """
    if n % 2 or n < 4:
        raise InputError(f"torus grid size must be even and >= 4, got {n}")
    vid = lambda i, j, k: (i % n) + n * (j % n) + n * n * (k % n)
    coords = [(_grid_coord(i, n), _grid_coord(j, n), _grid_coord(k, n))
              for k in range(n) for j in range(n) for i in range(n)]
    eye = np.eye(3, dtype=int)
    top = []
    in_half = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                x = np.array([i, j, k])
                for perm in itertools.permutations(range(3)):
                    pts = [x, x + eye[perm[0]], x + eye[perm[0]] + eye[perm[1]], x + 1]
                    tup = [vid(*p) for p in pts]
                    if perm_parity(perm) < 0:
                        tup[2], tup[3] = tup[3], tup[2]
                    top.append(tuple(tup))
                    in_half.append(x[selection_axis - 1] >= n // 2)
    vinv = [vid(-i, -j, -k) for k in range(n) for j in range(n) for i in range(n)]
    cx = InvolutiveComplex(coords, top, vinv, preserving=False)
    sel = [s.copy() for s in cx.selected]
    sel[3] = np.array(in_half, dtype=bool)
    return cx.with_selection(sel)


def _boundary_surface(parent: InvolutiveComplex, in_F: np.ndarray, plane_vertices: set,
                      level: float) -> BoundarySurface:
    faces, signs = [], []
    for t in np.flatnonzero(in_F):
        for j, fk in enumerate(parent.bnd[3][t]):
            if set(parent.faces[fk]) <= plane_vertices:
                faces.append(int(fk))
                signs.append(int(parent.bsign[3][t, j]))
    verts = sorted({int(v) for fk in faces for v in parent.faces[fk]})
    local = {v: a for a, v in enumerate(verts)}
    top = []
    for fk, s in zip(faces, signs):
        tup = [local[int(v)] for v in parent.faces[fk]]
        if s < 0:
            tup[1], tup[2] = tup[2], tup[1]
        top.append(tup)
    coords = parent.coords[verts]
    vinv = [local[int(parent.vinv[v])] for v in verts]
    surf = InvolutiveComplex(coords, top, vinv, preserving=True)
    vparent = np.array(verts, dtype=np.int64)
    # map surface simplices to parent ids + orientation signs
    eparent = np.empty(surf.count(1), dtype=np.int64)
    esign = np.empty(surf.count(1), dtype=np.int64)
    for k, e in enumerate(surf.edges):
        pe = tuple(int(vparent[v]) for v in e)
        j = parent.index[1][tuple(sorted(pe))]
        eparent[k] = j
        esign[k] = tuple_sign(pe, parent.edges[j])
    fparent = np.empty(surf.count(2), dtype=np.int64)
    fsign = np.empty(surf.count(2), dtype=np.int64)
    for k, f in enumerate(surf.faces):
        pf = tuple(int(vparent[v]) for v in f)
        j = parent.index[2][tuple(sorted(pf))]
        fparent[k] = j
        fsign[k] = tuple_sign(pf, parent.faces[j])
    return BoundarySurface(surf, vparent, eparent, esign, fparent, fsign, level)


def build_torus3_with_domain(n: int, cut_axis: int = 3) -> DomainDecomposition3:
    """3-torus with the fundamental domain ``F = {k_axis in [0, pi]}``.

    ``boundary`` holds the two involutive 2-tori of ``dF`` (``k_axis = pi``
    first, then ``k_axis = 0``) with the boundary orientation induced from
    ``F`` (outward normal first).
    """
    if cut_axis not in (1, 2, 3):
        raise InputError("cut_axis must be 1, 2 or 3")
    parent = build_torus3(n, cut_axis)
    in_F = parent.selected[3].copy()
    a = cut_axis - 1
    grid = np.rint((parent.coords[:, a] + np.pi) * n / TWO_PI).astype(int) % n
    dd = DomainDecomposition3(parent, cut_axis, in_F)
    for idx, level in ((0, np.pi), (n // 2, 0.0)):
        verts = set(np.flatnonzero(grid == idx).tolist())
        dd.boundary.append(_boundary_surface(parent, in_F, verts, level))
    return dd


# ----------------------------------------------------------------------
# validation

def validate(c: InvolutiveComplex) -> list[str]:
    """List every violated invariant; empty for a consistent complex."""
    out: list[str] = []
    nv = c.n_vertices
    if c.vinv.shape != (nv,) or np.any(c.vinv < 0) or np.any(c.vinv >= nv):
        out.append("involution: vertex map is not a map of the vertex set")
        return out
    if np.any(c.vinv[c.vinv] != np.arange(nv)):
        bad = np.flatnonzero(c.vinv[c.vinv] != np.arange(nv))
        out.append(f"involution: not an involution at vertices {bad[:8].tolist()}")
    for p in range(1, c.dim + 1):
        miss = np.flatnonzero(c.inv[p] < 0)
        if len(miss):
            out.append(f"involution: not simplicial, {p}-simplices {miss[:8].tolist()} have no image")
    top = c.dim
    if np.all(c.inv[top] >= 0):
        want = 1 if c.preserving else -1
        bad = np.flatnonzero(c.inv_sign[top] != want)
        if len(bad):
            out.append(f"orientation: involution {'reverses' if want > 0 else 'preserves'} "
                       f"orientation on {len(bad)} top simplices")
    for p in range(1, c.dim + 1):
        if np.any(c.fixed[p]):
            out.append(f"fixed set: {int(c.fixed[p].sum())} fixed {p}-simplices")
    nfix = int(c.fixed[0].sum())
    if c.dim == 2 and nfix % 2:
        out.append(f"fixed set: odd number ({nfix}) of fixed vertices")
    # closure: every codimension-1 simplex borders exactly two top simplices
    cof = c.cofaces(top - 1)
    bad = [k for k, l in enumerate(cof) if len(l) != 2]
    if bad:
        out.append(f"closure: {len(bad)} {top - 1}-simplices do not border exactly two "
                   f"{top}-simplices (e.g. {bad[:5]})")
    else:
        # coherent orientation: opposite induced orientations on shared faces
        acc = np.zeros(c.count(top - 1), dtype=np.int64)
        np.add.at(acc, c.bnd[top].ravel(), c.bsign[top].ravel())
        if np.any(acc != 0):
            out.append("orientation: top simplices are not coherently oriented")
    # lift selection
    for p in range(c.dim + 1):
        if np.any(c.inv[p] < 0):
            continue
        sel = c.selected[p]
        nf = ~c.fixed[p]
        pair = sel[nf].astype(int) + sel[c.inv[p]][nf].astype(int)
        if np.any(pair != 1):
            out.append(f"lifts: {p}-simplex orbits without exactly one selected lift")
    return out


# ----------------------------------------------------------------------
# refinement

@dataclass
class Refinement:
    complex: InvolutiveComplex
    top_children: dict          # old top simplex -> new top simplices
    new_vertices: list          # (new vertex id, old simplex dim, old simplex id)


def _unwrap_mean(coords: np.ndarray, period: float) -> np.ndarray:
    ref = coords[0]
    d = coords - ref
    d -= period * np.rint(d / period)
    m = ref + d.mean(axis=0)
    return (m + np.pi) % period - np.pi


def _split(top: list, coords: list, kind: str, verts: tuple, x: int) -> dict:
    """Split the simplex with vertex set ``verts`` (face or edge) by new vertex ``x``."""
    children = {}
    new_top = []
    vs = set(verts)
    for k, t in enumerate(top):
        if kind == "face" and set(t) == vs:
            a, b, c = t
            kids = [(a, b, x), (b, c, x), (c, a, x)]
        elif kind == "edge" and vs <= set(t):
            u, w = verts
            kids = [tuple(x if v == w else v for v in t), tuple(x if v == u else v for v in t)]
        else:
            new_top.append(t)
            children.setdefault(k, []).append(len(new_top) - 1)
            continue
        children[k] = []
        for kid in kids:
            new_top.append(kid)
            children[k].append(len(new_top) - 1)
    top[:] = new_top
    return children


def pachner_refine(c: InvolutiveComplex, move: str, target: int) -> Refinement:
    """Equivariant face-split or edge-split of a simplex orbit of a surface.

    The move is applied to ``target`` (a face id for ``'face-split'``, an
    edge id for ``'edge-split'``) and to its image under the involution;
    the two new vertices are exchanged by the new involution.

    Returns
    -------
    Refinement
        The refined complex, a map from old top simplices to their
        children, and the new vertices with their parent simplices.
    """
    if c.dim != 2:
        raise InputError("pachner_refine is implemented for surfaces only")
    if move == "face-split":
        p, kind = 2, "face"
    elif move == "edge-split":
        p, kind = 1, "edge"
    else:
        raise InputError(f"unknown move {move!r}")
    if not 0 <= target < c.count(p):
        raise InputError(f"no {kind} with id {target}")
    if c.fixed[p][target]:
        raise InputError("move would create a fixed vertex")
    image = int(c.inv[p][target])
    top = [tuple(int(v) for v in t) for t in c.faces]
    coords = [tuple(x) for x in c.coords]
    vinv = c.vinv.tolist()
    x0, x1 = len(coords), len(coords) + 1
    for s in (target, image):
        verts = c.simplices[p][s]
        coords.append(tuple(_unwrap_mean(c.coords[verts], c.period)))
    vinv += [x1, x0]
    ch0 = _split(top, coords, kind, tuple(int(v) for v in c.simplices[p][target]), x0)
    ch1 = _split(top, coords, kind, tuple(int(v) for v in c.simplices[p][image]), x1)
    children = {k: sorted({m for j in v for m in ch1[j]}) for k, v in ch0.items()}
    new = InvolutiveComplex(np.array(coords), np.array(top), np.array(vinv), preserving=True)
    return Refinement(new, children, [(x0, p, target), (x1, p, image)])
