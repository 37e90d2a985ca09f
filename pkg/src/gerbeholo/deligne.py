"""Exact combinatorial engine for pulled-back gerbe local data.

All fields are *integrated* quantities attached to (simplex, label)
incidences, so every cocycle identity is a finite identity that holds to
rounding error:

* ``B[c][i]``       integral of the 2-form potential over face ``c``;
* ``A[b][i, j]``    integral of the connection 1-forms over edge ``b``;
* ``g[v][i, j, k]`` unit-complex transition functions at vertex ``v``;
* ``glift[b][i, j, k]`` real increment of ``arg g`` along ``b`` (start to
  end in the stored edge orientation).

Conventions (fixed once, used by every evaluator and checker):

* ``B[c, j] - B[c, i] = sum_{b in dc} A[b, i, j]`` (Stokes);
* ``A[b,j,k] - A[b,i,k] + A[b,i,j] = -glift[b,i,j,k]`` and
  ``exp(1j*glift) = g(end)/g(start)``;
* in the holonomy product ``g[v, i_c, i_b, i_v]`` enters with exponent +1
  when ``v`` is the final point of ``b`` for the orientation induced by
  ``c`` and -1 when it is the initial point.

The equivariant refinement adds ``Pi`` (edges), ``chi`` and ``f``
(vertices, with edge lifts) and the boundary data at fixed vertices.
Labels live in a :class:`Cover`; arrays attached to a simplex are indexed
by the *local* position of a label in that simplex's admissible set.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InadmissibleAssignment, InputError, NotQuantized
from .simplicial import InvolutiveComplex, Refinement, build_torus2, pachner_refine

TWO_PI = 2.0 * np.pi
EXACT = 1e-12


def _wrap(x):
    """Reduce angles to ``(-pi, pi]``."""
    return np.angle(np.exp(1j * np.asarray(x)))


# ----------------------------------------------------------------------
# covers

class Cover:
    """Label set with involution and admissible labels per simplex.

    Admissible labels of a simplex are the intersection of the label sets
    of its vertices, which makes admissibility monotone under taking
    faces.  Involution compatibility ``A(inv s) = -A(s)`` is checked by
    :meth:`check`.
    """

    def __init__(self, cx: InvolutiveComplex, neg, vertex_sets):
        self.complex = cx
        self.neg = np.asarray(neg, dtype=np.int64)
        self.n_labels = len(self.neg)
        self.vertex_sets = [np.unique(np.asarray(s, dtype=np.int64)) for s in vertex_sets]
        self.adm: list[list[np.ndarray]] = []
        self.loc: list[np.ndarray] = []
        for p in range(cx.dim + 1):
            adm_p = []
            loc = np.full((cx.count(p), self.n_labels), -1, dtype=np.int64)
            for k, tup in enumerate(cx.simplices[p]):
                s = self.vertex_sets[tup[0]]
                for v in tup[1:]:
                    s = np.intersect1d(s, self.vertex_sets[v])
                adm_p.append(s)
                loc[k, s] = np.arange(len(s))
            self.adm.append(adm_p)
            self.loc.append(loc)

    def check(self) -> list[str]:
        cx = self.complex
        out = []
        if np.any(self.neg[self.neg] != np.arange(self.n_labels)):
            out.append("cover: label map is not an involution")
        for p in range(cx.dim + 1):
            for k, s in enumerate(self.adm[p]):
                if len(s) == 0:
                    out.append(f"cover: {p}-simplex {k} has no admissible label")
                j = cx.inv[p][k]
                if j >= 0 and not np.array_equal(np.sort(self.neg[s]), self.adm[p][j]):
                    out.append(f"cover: admissible set of {p}-simplex {k} not mapped to its image")
        return out

    def refine(self, ref: Refinement) -> "Cover":
        """Cover of a refined complex: new vertices inherit their parent's labels."""
        new = ref.complex
        sets = list(self.vertex_sets)
        for x, p, s in ref.new_vertices:
            sets.append(self.adm[p][s])
        return Cover(new, self.neg, sets)

    def to_json(self) -> dict:
        return {"neg": self.neg.tolist(), "vertex_sets": [s.tolist() for s in self.vertex_sets]}


def star_cover(cx: InvolutiveComplex, doubled: bool = False) -> Cover:
    """Cover labelled by vertices: vertex ``w`` is admissible on simplices of its closed star.

    With ``doubled=True`` every vertex carries two labels ``(w, s)``, and
    ``-(w, s) = (inv w, 1 - s)``, so the label involution is free.
    """
    nv = cx.n_vertices
    nbr = [set([v]) for v in range(nv)]
    for e in cx.edges:
        nbr[e[0]].add(int(e[1]))
        nbr[e[1]].add(int(e[0]))
    if not doubled:
        return Cover(cx, cx.vinv, [sorted(s) for s in nbr])
    neg = np.concatenate([cx.vinv + nv, cx.vinv])
    sets = [sorted(s) + [w + nv for w in sorted(s)] for s in nbr]
    return Cover(cx, neg, sets)


# ----------------------------------------------------------------------
# samples

@dataclass
class DeligneSample:
    """Integrated Deligne local data on a complex (see module notes)."""

    cover: Cover
    B: list
    A: list
    g: list
    glift: list
    oracle: dict = field(default_factory=dict)
    potentials: dict | None = None

    @property
    def complex(self) -> InvolutiveComplex:
        return self.cover.complex


@dataclass
class EquivariantSample(DeligneSample):
    """Deligne data plus an equivariant structure ``(Pi, chi, f)``.

    ``hprime``, ``lprime`` and ``sqrt_lprime`` are dicts keyed by fixed
    vertex id, each holding arrays over that vertex's admissible labels
    (``hprime`` is square).  ``component`` maps fixed vertex id to the id
    of its connected component of the fixed locus.
    """

    Pi: list = field(default_factory=list)
    chi: list = field(default_factory=list)
    chilift: list = field(default_factory=list)
    f: list = field(default_factory=list)
    flift: list = field(default_factory=list)
    hprime: dict = field(default_factory=dict)
    lprime: dict = field(default_factory=dict)
    sqrt_lprime: dict = field(default_factory=dict)


def generate_exact(cx: InvolutiveComplex, cover: Cover | None = None, seed: int = 0,
                   scale: float = 1.0, equivariant: bool = True) -> DeligneSample:
    """Random local data that satisfy every identity exactly.

    The data are a Deligne coboundary (gauge potentials ``lam`` on edges,
    angles ``theta`` of the transition functions at vertices) added to a
    random face field ``beta``; for equivariant samples ``beta`` is
    invariant, and an extra vertex potential ``kappa`` generates
    ``(Pi, chi, f)`` from the trivial structure.

    The closed-form oracle values are ``exp(1j*sum(beta))`` for the
    holonomy and ``exp(1j*sum(beta over selected faces))`` for its square
    root, stored in ``sample.oracle``.  ``scale=0`` gives trivial data.
    """
    rng = np.random.default_rng(seed)
    cover = cover or star_cover(cx)
    nF = cx.count(2)
    beta = rng.uniform(-np.pi, np.pi, nF) * scale
    if equivariant:
        for c in range(nF):
            j = cx.inv[2][c]
            if cx.selected[2][c]:
                beta[j] = cx.inv_sign[2][c] * beta[c]
    lam = [rng.uniform(-np.pi, np.pi, len(s)) * scale for s in cover.adm[1]]
    theta = []
    for s in cover.adm[0]:
        t = rng.uniform(-4 * np.pi, 4 * np.pi, (len(s), len(s))) * scale
        theta.append(t - t.T)
    kappa = [rng.uniform(-4 * np.pi, 4 * np.pi, len(s)) * scale for s in cover.adm[0]]
    pot = {"beta": beta, "lam": lam, "theta": theta, "kappa": kappa,
           "equivariant": equivariant, "seed": seed}
    return sample_from_potentials(cover, pot)


def sample_from_potentials(cover: Cover, pot: dict) -> DeligneSample:
    cx = cover.complex
    beta, lam, theta, kappa = pot["beta"], pot["lam"], pot["theta"], pot["kappa"]
    loc, adm = cover.loc, cover.adm
    neg = cover.neg

    def th(v, labs1, labs2):
        return theta[v][np.ix_(loc[0][v, labs1], loc[0][v, labs2])]

    B = []
    for c in range(cx.count(2)):
        labs = adm[2][c]
        val = np.full(len(labs), beta[c])
        for b, s in zip(cx.bnd[2][c], cx.bsign[2][c]):
            val += s * lam[b][loc[1][b, labs]]
        B.append(val)
    A, glift = [], []
    for b in range(cx.count(1)):
        labs = adm[1][b]
        s, e = cx.edges[b]
        lb = lam[b]
        dth = th(e, labs, labs) - th(s, labs, labs)
        A.append(lb[None, :] - lb[:, None] - dth)
        glift.append(dth[:, :, None] + dth[None, :, :] - dth[:, None, :])
    g = []
    for v in range(cx.n_vertices):
        t = theta[v]
        g.append(np.exp(1j * (t[:, :, None] + t[None, :, :] - t[:, None, :])))
    hol = np.exp(1j * beta.sum())
    oracle = {"holonomy": complex(hol)}
    if not pot["equivariant"]:
        return DeligneSample(cover, B, A, g, glift, oracle, pot)

    inv0 = cx.inv[0]

    def chi_arg(v, labs):
        w = inv0[v]
        kv = kappa[v][loc[0][v, labs]]
        return (th(v, labs, labs) - kv[:, None] + kv[None, :]
                - th(w, neg[labs], neg[labs]))

    def f_arg(v, labs):
        w = inv0[v]
        return kappa[v][loc[0][v, labs]] + kappa[w][loc[0][w, neg[labs]]]

    Pi, chilift, flift = [], [], []
    for b in range(cx.count(1)):
        labs = adm[1][b]
        s, e = cx.edges[b]
        ib = cx.inv[1][b]
        dk = kappa[e][loc[0][e, labs]] - kappa[s][loc[0][s, labs]]
        Pi.append(cx.inv_sign[1][b] * lam[ib][loc[1][ib, neg[labs]]] - lam[b] - dk)
        chilift.append(chi_arg(e, labs) - chi_arg(s, labs))
        flift.append(f_arg(e, labs) - f_arg(s, labs))
    chi = [np.exp(1j * chi_arg(v, adm[0][v])) for v in range(cx.n_vertices)]
    f = [np.exp(1j * f_arg(v, adm[0][v])) for v in range(cx.n_vertices)]
    sel = cx.selected[2]
    oracle["sqrt_holonomy"] = complex(np.exp(1j * beta[sel].sum()))
    e = EquivariantSample(cover, B, A, g, glift, oracle, pot, Pi, chi, chilift, f, flift)
    for v in cx.fixed_vertices():
        labs = adm[0][v]
        kneg = kappa[v][loc[0][v, neg[labs]]]
        tmix = theta[v][loc[0][v, labs], loc[0][v, neg[labs]]]
        e.sqrt_lprime[int(v)] = np.exp(1j * (kneg + tmix))
    fill_boundary_data(e)
    return e


# ----------------------------------------------------------------------
# checkers

def _sym_residual(g):
    """Deviation of a (L, L, L) array from cyclic invariance / transposition inversion."""
    r1 = np.abs(g - np.transpose(g, (1, 2, 0))).max(initial=0.0)
    r2 = np.abs(g * np.transpose(g, (1, 0, 2)) - 1).max(initial=0.0)
    return max(r1, r2)


def check_cocycle(d: DeligneSample, tol: float = EXACT) -> list[dict]:
    """Every violated Deligne identity with its location and residual."""
    cx = d.complex
    loc, adm = d.cover.loc, d.cover.adm
    out = []

    def flag(kind, where, res):
        if res > tol:
            out.append({"relation": kind, "at": where, "residual": float(res)})

    for b, a in enumerate(d.A):
        flag("A-antisymmetry", ("edge", b), np.abs(a + a.T).max(initial=0.0))
    for v, g in enumerate(d.g):
        flag("g-unit", ("vertex", v), np.abs(np.abs(g) - 1).max(initial=0.0))
        flag("g-symmetry", ("vertex", v), _sym_residual(g))
        # g_ijk g_ijl^-1 g_ikl g_jkl^-1 = 1
        q = (g[:, :, :, None] * np.conj(g[:, :, None, :]) * g[:, None, :, :]
             * np.conj(g[None, :, :, :]))
        res = np.abs(q - 1)
        if res.max(initial=0.0) > tol:
            for idx in zip(*np.nonzero(res > tol)):
                labs = tuple(int(adm[0][v][i]) for i in idx)
                out.append({"relation": "g-cocycle", "at": ("vertex", v, labs),
                            "residual": float(res[idx])})
    for c in range(cx.count(2)):
        labs = adm[2][c]
        rhs = np.zeros((len(labs), len(labs)))
        for b, s in zip(cx.bnd[2][c], cx.bsign[2][c]):
            li = loc[1][b, labs]
            rhs += s * d.A[b][np.ix_(li, li)]
        lhs = d.B[c][None, :] - d.B[c][:, None]
        flag("stokes", ("face", c), np.abs(lhs - rhs).max(initial=0.0))
    for b in range(cx.count(1)):
        a = d.A[b]
        comb = a[None, :, :] - a[:, None, :] + a[:, :, None]
        flag("edge-lift", ("edge", b), np.abs(comb + d.glift[b]).max(initial=0.0))
        s, e = cx.edges[b]
        labs = adm[1][b]
        ie, is_ = np.ix_(*(loc[0][e, labs],) * 3), np.ix_(*(loc[0][s, labs],) * 3)
        ratio = d.g[e][ie] * np.conj(d.g[s][is_])
        flag("edge-endpoints", ("edge", b), np.abs(ratio - np.exp(1j * d.glift[b])).max(initial=0.0))
    return out


def _theta_star(cx, p, k, arr):
    """Orientation factor for pulling back a p-simplex field along the involution."""
    return cx.inv_sign[p][k] * arr if p > 0 else arr


def check_equivariant(e: EquivariantSample, tol: float = EXACT) -> list[dict]:
    """Integrated identities relating the data to their involution pull-back."""
    cx = e.complex
    loc, adm, neg = e.cover.loc, e.cover.adm, e.cover.neg
    inv = cx.inv
    out = []

    def flag(kind, where, res):
        if res > tol:
            out.append({"relation": kind, "at": where, "residual": float(res)})

    for c in range(cx.count(2)):
        labs = adm[2][c]
        j = inv[2][c]
        lhs = cx.inv_sign[2][c] * e.B[j][loc[2][j, neg[labs]]]
        rhs = e.B[c].copy()
        for b, s in zip(cx.bnd[2][c], cx.bsign[2][c]):
            rhs += s * e.Pi[b][loc[1][b, labs]]
        flag("B-Pi", ("face", c), np.abs(lhs - rhs).max(initial=0.0))
    for b in range(cx.count(1)):
        labs = adm[1][b]
        j = inv[1][b]
        lj = loc[1][j, neg[labs]]
        lhs = cx.inv_sign[1][b] * e.A[j][np.ix_(lj, lj)]
        pi = e.Pi[b]
        rhs = e.A[b] + pi[None, :] - pi[:, None] + e.chilift[b]
        flag("A-Pi-chi", ("edge", b), np.abs(lhs - rhs).max(initial=0.0))
        res = cx.inv_sign[1][b] * e.Pi[j][lj] + pi + e.flift[b]
        flag("Pi-Pi-f", ("edge", b), np.abs(res).max(initial=0.0))
        flag("chi-antisymmetry-lift", ("edge", b), np.abs(e.chilift[b] + e.chilift[b].T).max(initial=0.0))
        s_, en = cx.edges[b]
        for name, arr, lift in (("chi-lift", e.chi, e.chilift[b]), ("f-lift", e.f, e.flift[b])):
            if arr[0].ndim == 2:
                ie, is_ = np.ix_(loc[0][en, labs], loc[0][en, labs]), np.ix_(loc[0][s_, labs], loc[0][s_, labs])
            else:
                ie, is_ = loc[0][en, labs], loc[0][s_, labs]
            ratio = arr[en][ie] * np.conj(arr[s_][is_])
            flag(name, ("edge", b), np.abs(ratio - np.exp(1j * lift)).max(initial=0.0))
    for v in range(cx.n_vertices):
        labs = adm[0][v]
        w = inv[0][v]
        lw = loc[0][w, neg[labs]]
        chi, f = e.chi[v], e.f[v]
        flag("chi-antisymmetry", ("vertex", v), np.abs(chi * chi.T - 1).max(initial=0.0))
        gw = e.g[w][np.ix_(lw, lw, lw)]
        rhs = (e.g[v] * np.conj(chi)[:, :, None] * chi[:, None, :] * np.conj(chi)[None, :, :])
        flag("g-chi", ("vertex", v), np.abs(gw - rhs).max(initial=0.0))
        chiw = e.chi[w][np.ix_(lw, lw)]
        flag("chi-chi-f", ("vertex", v),
             np.abs(chiw * chi - np.conj(f)[:, None] * f[None, :]).max(initial=0.0))
        flag("f-f", ("vertex", v), np.abs(e.f[w][lw] - f).max(initial=0.0))
    for v in cx.fixed_vertices():
        v = int(v)
        if v not in e.sqrt_lprime:
            out.append({"relation": "sqrt-lprime-missing", "at": ("vertex", v), "residual": np.inf})
            continue
        labs = adm[0][v]
        lv = loc[0][v, neg[labs]]
        lp = e.chi[v][np.arange(len(labs)), lv] * e.f[v]
        flag("lprime", ("vertex", v), np.abs(e.lprime.get(v, lp) - lp).max(initial=0.0))
        sq = e.sqrt_lprime[v]
        flag("sqrt-lprime-square", ("vertex", v), np.abs(sq * sq - lp).max(initial=0.0))
        hp = hprime_at(e, v)
        flag("hprime", ("vertex", v), np.abs(e.hprime.get(v, hp) - hp).max(initial=0.0))
        flag("lprime-hprime", ("vertex", v),
             np.abs(np.conj(lp)[:, None] * lp[None, :] - hp * hp).max(initial=0.0))
        flag("sqrt-lprime-hprime", ("vertex", v),
             np.abs(np.conj(sq)[:, None] * sq[None, :] - hp).max(initial=0.0))
    return out


def hprime_at(e: EquivariantSample, v: int) -> np.ndarray:
    """Transition functions ``h'_{ij}`` of the line over a fixed vertex."""
    loc, adm, neg = e.cover.loc, e.cover.adm, e.cover.neg
    labs = adm[0][v]
    n = np.arange(len(labs))
    m = loc[0][v, neg[labs]]
    g = e.g[v]
    chi = e.chi[v]
    # h'_{i j} = g_{i j (-j)} chi_{(-i)(-j)} / g_{i (-i) (-j)}
    return g[n[:, None], n[None, :], m[None, :]] * chi[np.ix_(m, m)] * np.conj(
        g[n[:, None], m[:, None], m[None, :]])


def fill_boundary_data(e: EquivariantSample) -> None:
    """Compute ``l'`` and ``h'`` at every fixed vertex from the sample."""
    loc, adm, neg = e.cover.loc, e.cover.adm, e.cover.neg
    for v in e.complex.fixed_vertices():
        v = int(v)
        labs = adm[0][v]
        lv = loc[0][v, neg[labs]]
        e.lprime[v] = e.chi[v][np.arange(len(labs)), lv] * e.f[v]
        e.hprime[v] = hprime_at(e, v)


# ----------------------------------------------------------------------
# assignments and holonomy

@dataclass
class Assignment:
    """Chosen label per vertex, edge and face (global label ids)."""

    vertex: np.ndarray
    edge: np.ndarray
    face: np.ndarray

    def copy(self) -> "Assignment":
        return Assignment(self.vertex.copy(), self.edge.copy(), self.face.copy())

    def per_dim(self):
        return (self.vertex, self.edge, self.face)


def default_assignment(cover: Cover, seed: int | None = None, equivariant: bool = False) -> Assignment:
    """Admissible assignment; random when ``seed`` is given.

    With ``equivariant=True`` vertex labels satisfy ``i(inv v) = -i(v)``
    off the fixed set and selected lifts determine the labels of their
    images (``i(inv s) = -i(s)``).
    """
    cx = cover.complex
    rng = np.random.default_rng(seed)
    labs = []
    for p in range(3):
        arr = np.empty(cx.count(p), dtype=np.int64)
        for k, s in enumerate(cover.adm[p]):
            arr[k] = s[0] if seed is None else rng.choice(s)
        if equivariant:
            for k in range(cx.count(p)):
                if cx.selected[p][k] and not cx.fixed[p][k]:
                    arr[cx.inv[p][k]] = cover.neg[arr[k]]
        labs.append(arr)
    return Assignment(*labs)


def _local(cover, p, k, label):
    j = cover.loc[p][k, label]
    if j < 0:
        raise InadmissibleAssignment(f"label {label} not admissible on {p}-simplex {k}",
                                     dim=p, simplex=int(k), label=int(label))
    return j


def _flags(cx):
    """Per face: (edge, orientation sign, vertex, exponent) for its six flags."""
    out = []
    for c in range(cx.count(2)):
        fl = []
        for b, o in zip(cx.bnd[2][c], cx.bsign[2][c]):
            s, e = cx.edges[b]
            fl.append((int(b), int(o), int(e), int(o)))
            fl.append((int(b), int(o), int(s), -int(o)))
        out.append(fl)
    return out


def holonomy_phase(d: DeligneSample, a: Assignment) -> float:
    """Real phase ``S`` with holonomy ``exp(1j*S)`` (defined modulo 2pi)."""
    cx, cov = d.complex, d.cover
    if cx.dim != 2:
        raise InputError("holonomy needs a closed surface complex")
    total = 0.0
    for c, fl in enumerate(_flags(cx)):
        ic = a.face[c]
        total += d.B[c][_local(cov, 2, c, ic)]
        for b, o, v, ex in fl:
            ib = a.edge[b]
            if ex == o:  # visit each edge once per face
                total += o * d.A[b][_local(cov, 1, b, ic), _local(cov, 1, b, ib)]
            iv = a.vertex[v]
            gv = d.g[v][_local(cov, 0, v, ic), _local(cov, 0, v, ib), _local(cov, 0, v, iv)]
            total += ex * np.angle(gv)
    return float(total)


def holonomy(d: DeligneSample, a: Assignment) -> complex:
    """Holonomy of the local data along the carrier surface.

    ``exp(i sum B + i sum A) * prod g^{+-1}`` over all flags ``v in b in c``.
    """
    return complex(np.exp(1j * holonomy_phase(d, a)))


# ----------------------------------------------------------------------
# Z2-graded extension data

@dataclass
class GradedTable:
    """Extension data on the doubled label set ``J x {+1, -1}``.

    Extended label ``(i, z)`` has id ``i`` for ``z = +1`` and ``i + L``
    for ``z = -1``; ``sample`` is an ordinary :class:`DeligneSample` over
    the doubled cover, so all Deligne checks apply to it verbatim.
    ``action[v]`` holds the phases ``F_xy(v)`` by which the involution
    fails to fix the graded data at ``v`` (see :func:`_action_phase`).
    """

    sample: DeligneSample
    n_base: int
    action: list = field(default_factory=list)

    def ext(self, label: int, z: int) -> int:
        return int(label) + (0 if z > 0 else self.n_base)


def graded_cover(cover: Cover) -> Cover:
    L = cover.n_labels
    neg = np.concatenate([cover.neg + L, cover.neg])
    sets = [np.concatenate([s, s + L]) for s in cover.vertex_sets]
    return Cover(cover.complex, neg, sets)


def extension_from_structure(e: EquivariantSample, check: bool = True) -> GradedTable:
    """Graded extension data rebuilt from ``(B, A, g, Pi, chi, f)``.

    ``B~(i,+) = B_i``, ``B~(i,-) = pullback of B_{-i}``;
    ``A~(++)=A``, ``A~(+-)_{ij} = A_ij + Pi_j``, ``A~(-+)_{ij} = A_ij - Pi_i``,
    ``A~(--)`` the pull-back of ``A_{(-i)(-j)}``;
    ``g~`` equals ``g`` when at most one sign is negative,
    ``g~(+--)_{abc} = g_abc chi_bc^-1`` and its cyclic versions, and
    ``g~(---)`` the pull-back of ``g_{(-a)(-b)(-c)}``.
    """
    if check:
        bad = check_equivariant(e)
        if bad:
            raise InputError(f"equivariant sample fails {len(bad)} checks",
                             first=bad[0])
    cx = e.complex
    cov = e.cover
    gcov = graded_cover(cov)
    loc, adm, neg = cov.loc, cov.adm, cov.neg
    inv, isg = cx.inv, cx.inv_sign

    B = []
    for c in range(cx.count(2)):
        labs = adm[2][c]
        j = inv[2][c]
        B.append(np.concatenate([e.B[c], isg[2][c] * e.B[j][loc[2][j, neg[labs]]]]))
    A, glift = [], []
    for b in range(cx.count(1)):
        labs = adm[1][b]
        j = inv[1][b]
        lj = loc[1][j, neg[labs]]
        a, pi = e.A[b], e.Pi[b]
        amm = isg[1][b] * e.A[j][np.ix_(lj, lj)]
        A.append(np.block([[a, a + pi[None, :]], [a - pi[:, None], amm]]))
        gl, cl = e.glift[b], e.chilift[b]
        gmm = isg[1][b] * e.glift[j][np.ix_(lj, lj, lj)]
        n = len(labs)
        t = np.empty((2 * n,) * 3)
        P, M = slice(0, n), slice(n, 2 * n)
        t[P, P, P] = gl
        t[P, P, M] = gl
        t[P, M, P] = gl
        t[M, P, P] = gl
        t[P, M, M] = gl - cl[None, :, :]
        t[M, M, P] = gl - cl[:, :, None]
        t[M, P, M] = gl + cl[:, None, :]
        t[M, M, M] = gmm
        glift.append(t)
    g = []
    for v in range(cx.n_vertices):
        labs = adm[0][v]
        w = inv[0][v]
        lw = loc[0][w, neg[labs]]
        gv, ch = e.g[v], e.chi[v]
        n = len(labs)
        t = np.empty((2 * n,) * 3, dtype=complex)
        P, M = slice(0, n), slice(n, 2 * n)
        t[P, P, P] = gv
        t[P, P, M] = gv
        t[P, M, P] = gv
        t[M, P, P] = gv
        t[P, M, M] = gv * np.conj(ch)[None, :, :]
        t[M, M, P] = gv * np.conj(ch)[:, :, None]
        t[M, P, M] = gv * ch[:, None, :]
        t[M, M, M] = e.g[w][np.ix_(lw, lw, lw)]
        g.append(t)
    action = []
    for v in range(cx.n_vertices):
        n = len(adm[0][v])
        ch, fv = e.chi[v], e.f[v]
        F = np.ones((2 * n, 2 * n), dtype=complex)
        F[:n, n:] = ch * fv[:, None]
        F[n:, :n] = ch * np.conj(fv)[None, :]
        action.append(F)
    return GradedTable(DeligneSample(gcov, B, A, g, glift), cov.n_labels, action)


def structure_from_extension(t: GradedTable) -> dict:
    """Recover ``(Pi, chi, f)`` from graded data.

    ``Pi_i = A~^{+-}_{ii}``, ``chi_{ij} = g~^{-+-}_{iij}`` and
    ``f_i = F_{(i,+)(i,-)}`` from the recorded action phases.
    """
    d = t.sample
    cx = d.complex
    L = t.n_base
    base_adm = [[s[s < L] for s in adm_p] for adm_p in d.cover.adm]
    Pi, chi = [], []
    for b in range(cx.count(1)):
        n = len(base_adm[1][b])
        Pi.append(np.diagonal(d.A[b][:n, n:]).copy())
    for v in range(cx.n_vertices):
        n = len(base_adm[0][v])
        gm = d.g[v]
        idx = np.arange(n)
        chi.append(gm[n + idx[:, None], idx[:, None], n + idx[None, :]])
    f = [np.diagonal(F[:len(F) // 2, len(F) // 2:]).copy() for F in t.action]
    return {"Pi": Pi, "chi": chi, "f": f}


# ----------------------------------------------------------------------
# square root of the holonomy

def _action_phase(e: EquivariantSample, v: int, x: tuple, y: tuple) -> complex:
    """Phase ``F_{xy}(v)`` by which the involution fails to fix graded data.

    ``F_{(i,+)(j,-)} = chi_ij f_i``, ``F_{(i,-)(j,+)} = chi_ij / f_j`` and
    ``F = 1`` for equal signs.
    """
    (i, zi), (j, zj) = x, y
    if zi == zj:
        return 1.0 + 0j
    li, lj = e.cover.loc[0][v, i], e.cover.loc[0][v, j]
    chi = e.chi[v][li, lj]
    return chi * e.f[v][li] if zi > 0 else chi * np.conj(e.f[v][lj])


def _sqrt_r(e: EquivariantSample, v0: int, x: tuple, i0: int) -> complex:
    """Square root of the seam factor at a fixed vertex for graded label ``x``.

    For ``x = (i, +)`` this is ``g_{i (-i) i0} / sqrt(l'_i)``; for
    ``x = (i, -)`` the inverse of the value at ``(-i, +)``.
    """
    i, z = x
    neg = e.cover.neg
    if z < 0:
        return 1.0 / _sqrt_r(e, v0, (int(neg[i]), 1), i0)
    loc = e.cover.loc[0][v0]
    gv = e.g[v0][loc[i], loc[neg[i]], loc[i0]]
    return gv / e.sqrt_lprime[v0][loc[i]]


def check_equivariant_assignment(e: EquivariantSample, a: Assignment) -> None:
    cx = e.complex
    neg = e.cover.neg
    for p, arr in enumerate(a.per_dim()):
        for k in range(cx.count(p)):
            _local(e.cover, p, k, arr[k])
            if cx.fixed[p][k]:
                continue
            if arr[cx.inv[p][k]] != neg[arr[k]]:
                raise InadmissibleAssignment(
                    f"assignment not equivariant on {p}-simplex {k}", dim=p, simplex=int(k))


def sqrt_holonomy_phase(e: EquivariantSample, a: Assignment) -> float:
    """Phase of the distinguished square root of the holonomy.

    The evaluator multiplies, over all flags ``v in b in c`` of *selected*
    faces, the graded local data with labels ``(i_s, +)`` on selected
    simplices (and fixed vertices) and ``(i_s, -)`` on their images; then
    it adds the vertex corrections:

    * for each non-fixed vertex orbit, at its selected lift ``v``, a factor
      ``(f_{i_v} / chi_{i_b i_v})^{+-1}`` for every flag at ``v`` whose
      edge is not selected;
    * at each fixed vertex ``v0`` one square-root seam factor
      ``(g_{i (-i) i0} / sqrt(l'_i))^{+-1}`` per edge orbit with odd
      selected incidence count (see :func:`_sqrt_r`).

    The assignment must be equivariant: ``i(inv s) = -i(s)``.
    """
    cx = e.complex
    if cx.dim != 2:
        raise InputError("square root needs an involutive surface complex")
    for v in cx.fixed_vertices():
        if int(v) not in e.sqrt_lprime:
            raise InputError(f"missing sqrt(l') data at fixed vertex {int(v)}")
    check_equivariant_assignment(e, a)
    t = extension_from_structure(e, check=False)
    d, cov = t.sample, t.sample.cover
    sel = cx.selected
    fixed0 = cx.fixed[0]

    def ext(p, k, lab):
        z = 1 if (sel[p][k] or cx.fixed[p][k]) else -1
        return (int(lab), z)

    def gid(x):
        return t.ext(*x)

    total = 0.0
    seam: dict = {}
    flags = _flags(cx)
    for c in np.flatnonzero(sel[2]):
        xc = (int(a.face[c]), 1)
        total += d.B[c][_local(cov, 2, c, gid(xc))]
        for b, o, v, ex in flags[c]:
            xb = ext(1, b, a.edge[b])
            xv = ext(0, v, a.vertex[v])
            if ex == o:
                total += o * d.A[b][_local(cov, 1, b, gid(xc)), _local(cov, 1, b, gid(xb))]
            gv = d.g[v][_local(cov, 0, v, gid(xc)), _local(cov, 0, v, gid(xb)),
                        _local(cov, 0, v, gid(xv))]
            total += ex * np.angle(gv)
            if fixed0[v]:
                bs = cx.lift_of(1, b)
                seam.setdefault((int(v), bs), 0)
                seam[(int(v), bs)] += (1 if sel[1][b] else -1) * ex
            elif sel[0][v] and not sel[1][b]:
                total -= ex * np.angle(_action_phase(e, v, xb, xv))
    for (v0, bs), n in seam.items():
        if n % 2:
            raise InputError("odd seam count at a fixed vertex; lift selection inconsistent")
        if n:
            x = (int(a.edge[bs]), 1)
            total += (n // 2) * np.angle(_sqrt_r(e, v0, x, int(a.vertex[v0])))
    return float(total)


def sqrt_holonomy(e: EquivariantSample, a: Assignment) -> complex:
    """Distinguished square root of the holonomy of an equivariant structure."""
    return complex(np.exp(1j * sqrt_holonomy_phase(e, a)))


# ----------------------------------------------------------------------
# transport of samples

def _with_cover(e: DeligneSample, cover: Cover) -> DeligneSample:
    out = type(e).__new__(type(e))
    out.__dict__.update(e.__dict__)
    out.cover = cover
    return out


def reselect(e: DeligneSample, cx: InvolutiveComplex) -> DeligneSample:
    """Same data on a copy of the carrier with a different lift selection."""
    return _with_cover(e, Cover(cx, e.cover.neg, e.cover.vertex_sets))


def pullback_sample(e: EquivariantSample, vmap) -> EquivariantSample:
    """Data of ``phi o alpha`` for a simplicial automorphism ``alpha``.

    ``vmap`` is the vertex permutation of ``alpha``; it must commute with
    the involution.  Fields on a simplex are read off its image, with the
    orientation sign of the image tuple on edges and faces.
    """
    cx = e.complex
    vmap = np.asarray(vmap, dtype=np.int64)
    if np.any(vmap[cx.vinv] != cx.vinv[vmap]):
        raise InputError("automorphism does not commute with the involution")
    cov = Cover(cx, e.cover.neg, [e.cover.vertex_sets[vmap[v]] for v in range(cx.n_vertices)])
    img, sgn = [], []
    for p in range(3):
        im = np.empty(cx.count(p), dtype=np.int64)
        sg = np.ones(cx.count(p), dtype=np.int64)
        for k, tup in enumerate(cx.simplices[p]):
            t = tuple(int(vmap[v]) for v in tup)
            j = cx.index[p].get(tuple(sorted(t)))
            if j is None:
                raise InputError("vertex map is not simplicial")
            im[k] = j
            if p:
                from .simplicial import tuple_sign
                sg[k] = tuple_sign(t, cx.simplices[p][j])
        img.append(im)
        sgn.append(sg)
    i0, i1, i2 = img
    s1, s2 = sgn[1], sgn[2]
    out = EquivariantSample(
        cov,
        [s2[c] * e.B[i2[c]] for c in range(cx.count(2))],
        [s1[b] * e.A[i1[b]] for b in range(cx.count(1))],
        [e.g[i0[v]] for v in range(cx.n_vertices)],
        [s1[b] * e.glift[i1[b]] for b in range(cx.count(1))],
        {}, None,
        [s1[b] * e.Pi[i1[b]] for b in range(cx.count(1))],
        [e.chi[i0[v]] for v in range(cx.n_vertices)],
        [s1[b] * e.chilift[i1[b]] for b in range(cx.count(1))],
        [e.f[i0[v]] for v in range(cx.n_vertices)],
        [s1[b] * e.flift[i1[b]] for b in range(cx.count(1))],
    )
    for v in cx.fixed_vertices():
        out.sqrt_lprime[int(v)] = e.sqrt_lprime[int(i0[v])]
    fill_boundary_data(out)
    return out


def refine_sample(e: DeligneSample, ref: Refinement, seed: int = 0) -> DeligneSample:
    """Generated data restricted to a refinement of its carrier.

    Needs the generating potentials.  Face fields of split faces are
    divided among the children (equivariantly), edge potentials of split
    edges are divided between the halves, and new vertices and interior
    edges receive fresh random potentials.
    """
    if e.potentials is None:
        raise InputError("refinement needs a generated sample (potentials missing)")
    rng = np.random.default_rng(seed)
    old, new = e.complex, ref.complex
    cov = e.cover.refine(ref)
    pot = e.potentials
    beta = np.zeros(new.count(2))
    done = np.zeros(new.count(2), dtype=bool)
    for k, kids in sorted(ref.top_children.items()):
        if done[kids[0]]:
            continue
        if len(kids) == 1:
            parts = [pot["beta"][k]]
        else:
            noise = rng.normal(size=len(kids))
            parts = pot["beta"][k] / len(kids) + noise - noise.mean()
        for kid, val in zip(kids, parts):
            beta[kid] = val
            done[kid] = True
            if pot["equivariant"]:
                j = new.inv[2][kid]
                beta[j] = new.inv_sign[2][kid] * val
                done[j] = True
    lam = []
    for b, (u, w) in enumerate(new.edges):
        labs = cov.adm[1][b]
        ob = old.index[1].get((int(u), int(w))) if w < old.n_vertices else None
        if ob is not None:
            lam.append(pot["lam"][ob].copy())
            continue
        lam.append(rng.uniform(-np.pi, np.pi, len(labs)))
    # halves of a split edge must add up to the old edge potential
    for x, p, s in ref.new_vertices:
        if p != 1:
            continue
        u, w = (int(v) for v in old.edges[s])
        b1 = new.index[1][(u, x)]
        b2 = new.index[1][(w, x)]
        lo = pot["lam"][s]
        l1 = lam[b1][cov.loc[1][b1, e.cover.adm[1][s]]]
        lam[b2][cov.loc[1][b2, e.cover.adm[1][s]]] = l1 - lo
    theta = list(pot["theta"])
    kappa = list(pot["kappa"])
    for v in range(old.n_vertices, new.n_vertices):
        n = len(cov.adm[0][v])
        t = rng.uniform(-4 * np.pi, 4 * np.pi, (n, n))
        theta.append(t - t.T)
        kappa.append(rng.uniform(-4 * np.pi, 4 * np.pi, n))
    new_pot = dict(pot, beta=beta, lam=lam, theta=theta, kappa=kappa)
    return sample_from_potentials(cov, new_pot)


# ----------------------------------------------------------------------
# 3d index

def restrict_to_surface(e: EquivariantSample, bs) -> EquivariantSample:
    """Restriction of a sample on a 3-complex to a boundary surface."""
    surf = bs.surface
    vp, ep, es, fp, fs = bs.vertex_parent, bs.edge_parent, bs.edge_sign, bs.face_parent, bs.face_sign
    cov = Cover(surf, e.cover.neg, [e.cover.vertex_sets[vp[v]] for v in range(surf.n_vertices)])
    out = EquivariantSample(
        cov,
        [fs[c] * e.B[fp[c]] for c in range(surf.count(2))],
        [es[b] * e.A[ep[b]] for b in range(surf.count(1))],
        [e.g[vp[v]] for v in range(surf.n_vertices)],
        [es[b] * e.glift[ep[b]] for b in range(surf.count(1))],
        {}, None,
        [es[b] * e.Pi[ep[b]] for b in range(surf.count(1))],
        [e.chi[vp[v]] for v in range(surf.n_vertices)],
        [es[b] * e.chilift[ep[b]] for b in range(surf.count(1))],
        [e.f[vp[v]] for v in range(surf.n_vertices)],
        [es[b] * e.flift[ep[b]] for b in range(surf.count(1))],
    )
    for v in surf.fixed_vertices():
        out.sqrt_lprime[int(v)] = e.sqrt_lprime[int(vp[v])]
    fill_boundary_data(out)
    return out


def curvature_per_tet(d: DeligneSample) -> np.ndarray:
    """Integrated curvature of every tetrahedron (boundary sum of ``B``)."""
    cx = d.complex
    out = np.zeros(cx.count(3))
    for h in range(cx.count(3)):
        faces = cx.bnd[3][h]
        common = d.cover.adm[2][faces[0]]
        for fk in faces[1:]:
            common = np.intersect1d(common, d.cover.adm[2][fk])
        if len(common) == 0:
            raise InputError(f"tetrahedron {h} has no common label on its faces")
        i = common[0]
        out[h] = sum(s * d.B[fk][d.cover.loc[2][fk, i]] for fk, s in zip(faces, cx.bsign[3][h]))
    return out


@dataclass
class Index3dResult:
    sign: int
    phase: float
    distance: float
    boundary_phases: list


def index3d(e: EquivariantSample, dd, H_per_tet, a: Assignment, tol: float = 1e-9) -> Index3dResult:
    """``exp(-(i/2) sum_F H) * prod sqrt-holonomy(boundary tori)`` as a sign.

    Raises
    ------
    NotQuantized
        If the phase is farther than ``tol`` from ``0`` or ``pi``.
    """
    H = np.asarray(H_per_tet, dtype=float)
    phase = -0.5 * H[dd.in_F].sum()
    parts = []
    for bs in dd.boundary:
        es = restrict_to_surface(e, bs)
        ab = Assignment(a.vertex[bs.vertex_parent], a.edge[bs.edge_parent], a.face[bs.face_parent])
        ph = sqrt_holonomy_phase(es, ab)
        parts.append(ph)
        phase += ph
    z = np.exp(1j * phase)
    sign = 1 if z.real >= 0 else -1
    dist = float(abs(z - sign))
    if dist > tol:
        raise NotQuantized(f"3d index phase {np.angle(z):.3e} not in {{0, pi}}", phase=float(phase))
    return Index3dResult(sign, float(np.angle(z)), dist, parts)


# ----------------------------------------------------------------------
# JSON persistence ("deligne-v1")

_REAL_FIELDS = {"B": (2, 1), "A": (1, 2), "glift": (1, 3)}
_EQ_REAL_FIELDS = {"Pi": (1, 1), "chilift": (1, 2), "flift": (1, 1)}
_COMPLEX_FIELDS = {"g": (0, 3)}
_EQ_COMPLEX_FIELDS = {"chi": (0, 2), "f": (0, 1)}


def _cplx(a) -> dict:
    a = np.asarray(a)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def sample_to_json(d: DeligneSample) -> dict:
    """Serializable document holding complex, cover and all field tables."""
    eq = isinstance(d, EquivariantSample)
    doc = {"format": "deligne-v1", "kind": "equivariant" if eq else "plain",
           "complex": d.complex.to_json(), "cover": d.cover.to_json()}
    fields = dict(_REAL_FIELDS, **(_EQ_REAL_FIELDS if eq else {}))
    for name in fields:
        doc[name] = [np.asarray(x).tolist() for x in getattr(d, name)]
    for name in dict(_COMPLEX_FIELDS, **(_EQ_COMPLEX_FIELDS if eq else {})):
        doc[name] = [_cplx(x) for x in getattr(d, name)]
    if eq:
        doc["sqrt_lprime"] = {str(v): _cplx(x) for v, x in d.sqrt_lprime.items()}
    doc["oracle"] = {k: [complex(v).real, complex(v).imag] for k, v in d.oracle.items()}
    return doc


def _array(doc, ptr: str, shape: tuple, complex_: bool) -> np.ndarray:
    try:
        if complex_:
            if not isinstance(doc, dict) or set(doc) != {"re", "im"}:
                raise InputError(f"{ptr}: expected object with 're' and 'im'", pointer=ptr)
            a = np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc["im"], dtype=float)
        else:
            a = np.asarray(doc, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{ptr}: not a numeric array ({exc})", pointer=ptr) from None
    if a.shape != shape:
        raise InputError(f"{ptr}: shape {a.shape}, expected {shape}", pointer=ptr)
    if not np.all(np.isfinite(a)):
        raise InputError(f"{ptr}: non-finite entry", pointer=ptr)
    return a


def sample_from_json(doc: dict) -> DeligneSample:
    """Inverse of :func:`sample_to_json` with shape validation.

    Raises
    ------
    InputError
        With ``payload['pointer']`` a JSON pointer to the offending entry.
    """
    if not isinstance(doc, dict) or doc.get("format") != "deligne-v1":
        raise InputError("document is not deligne-v1", pointer="/format")
    for key in ("complex", "cover", "kind"):
        if key not in doc:
            raise InputError(f"missing key {key!r}", pointer=f"/{key}")
    cx = InvolutiveComplex.from_json(doc["complex"])
    try:
        cov = Cover(cx, doc["cover"]["neg"], doc["cover"]["vertex_sets"])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InputError(f"/cover: malformed ({exc})", pointer="/cover") from None
    eq = doc["kind"] == "equivariant"
    vals = {}
    specs = [(_REAL_FIELDS, False), (_COMPLEX_FIELDS, True)]
    if eq:
        specs += [(_EQ_REAL_FIELDS, False), (_EQ_COMPLEX_FIELDS, True)]
    for table, cplx in specs:
        for name, (p, rank) in table.items():
            if name not in doc:
                raise InputError(f"missing field {name!r}", pointer=f"/{name}")
            items = doc[name]
            if not isinstance(items, list) or len(items) != cx.count(p):
                raise InputError(f"/{name}: expected {cx.count(p)} entries", pointer=f"/{name}")
            vals[name] = [_array(x, f"/{name}/{k}", (len(cov.adm[p][k]),) * rank, cplx)
                          for k, x in enumerate(items)]
    oracle = {k: complex(*v) for k, v in doc.get("oracle", {}).items()}
    base = (cov, vals["B"], vals["A"], vals["g"], vals["glift"], oracle, None)
    if not eq:
        return DeligneSample(*base)
    e = EquivariantSample(*base, vals["Pi"], vals["chi"], vals["chilift"], vals["f"], vals["flift"])
    for key, x in doc.get("sqrt_lprime", {}).items():
        v = int(key)
        if v < 0 or v >= cx.n_vertices or not cx.fixed[0][v]:
            raise InputError(f"/sqrt_lprime/{key}: not a fixed vertex", pointer=f"/sqrt_lprime/{key}")
        e.sqrt_lprime[v] = _array(x, f"/sqrt_lprime/{key}", (len(cov.adm[0][v]),), True)
    fill_boundary_data(e)
    return e


def save_sample(d: DeligneSample, path) -> None:
    with open(path, "w") as fh:
        json.dump(sample_to_json(d), fh)


def load_sample(path) -> DeligneSample:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc}", pointer="") from None
    return sample_from_json(doc)


# ----------------------------------------------------------------------
# invariance fuzzing

def _mutate_label(cover: Cover, a: Assignment, rng, equivariant: bool) -> Assignment:
    """Change the label of one random simplex (and of its image, if equivariant)."""
    cx = cover.complex
    out = a.copy()
    p = int(rng.integers(3))
    k = int(rng.integers(cx.count(p)))
    if equivariant and cx.fixed[p][k]:
        return out
    arr = out.per_dim()[p]
    arr[k] = rng.choice(cover.adm[p][k])
    if equivariant:
        arr[cx.inv[p][k]] = cover.neg[arr[k]]
    return out


def fuzz_invariance(n: int = 6, iterations: int = 100, seed: int = 0,
                    equivariant: bool = True) -> dict:
    """Random mutations that must leave (square-root) holonomy unchanged.

    Each iteration draws a fresh generated sample and applies one of:
    a label change, a lift-selection swap (square root only), or a
    Pachner move with naturally restricted data.  The squaring identity
    ``sqrt_hol**2 == hol`` and agreement with the closed-form oracle are
    checked on every evaluation.

    Returns
    -------
    dict
        ``max_residual``, per-kind counts and a list of ``failures``.
    """
    rng = np.random.default_rng(seed)
    cx0 = build_torus2(n)
    worst = 0.0
    counts: dict = {}
    failures = []

    def value(s, a):
        h = holonomy(s, a)
        out = [abs(h - s.oracle["holonomy"])]
        if equivariant:
            r = sqrt_holonomy(s, a)
            out += [abs(r - s.oracle["sqrt_holonomy"]), abs(r * r - h)]
            return r, max(out)
        return h, max(out)

    for it in range(iterations):
        cov = star_cover(cx0, doubled=bool(rng.integers(2)))
        e = generate_exact(cx0, cov, seed=int(rng.integers(2**31)), equivariant=equivariant)
        a = default_assignment(cov, seed=int(rng.integers(2**31)), equivariant=equivariant)
        v0, r0 = value(e, a)
        kinds = ["label", "pachner"] + (["lift-swap"] if equivariant else [])
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind == "label":
            e2, a2 = e, _mutate_label(cov, a, rng, equivariant)
        elif kind == "lift-swap":
            p = int(rng.integers(3))
            k = int(rng.integers(cx0.count(p)))
            if cx0.fixed[p][k]:
                p, k = 2, 0
            e2 = reselect(e, cx0.swap_lift(p, k))
            a2 = a
        else:
            move = ("face-split", "edge-split")[int(rng.integers(2))]
            target = int(rng.integers(cx0.count(2 if move == "face-split" else 1)))
            ref = pachner_refine(cx0, move, target)
            e2 = refine_sample(e, ref, seed=int(rng.integers(2**31)))
            a2 = default_assignment(e2.cover, seed=int(rng.integers(2**31)),
                                    equivariant=equivariant)
        v1, r1 = value(e2, a2)
        res = max(r0, r1, abs(v1 - v0))
        counts[kind] = counts.get(kind, 0) + 1
        worst = max(worst, res)
        if res > EXACT * 100:
            failures.append({"iteration": it, "kind": kind, "residual": res})
    return {"iterations": iterations, "max_residual": worst, "counts": counts,
            "failures": failures}
