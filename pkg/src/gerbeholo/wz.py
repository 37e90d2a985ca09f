"""Wess-Zumino 3-form quadrature for sampled maps into U(N).

The density of ``(1/12pi) tr (u^-1 du)^3`` is ``(1/4pi) tr(L1 [L2, L3])``
with ``L_a`` the left logarithmic derivative along axis ``a``.  On a grid,
``L_a`` is estimated from principal logarithms of neighbour transitions
``F_a(x) = log(u(x)^-1 u(x + e_a))``:

* periodic axes: ``(F_a(x) + F_a(x - e_a)) / 2h``;
* open axes: the same in the interior, ``(3 F_0 - F_1) / 2h`` style
  one-sided extrapolation at the ends, and trapezoid weights.

Grid conventions: a periodic axis with ``n`` nodes has coordinates
``2 pi j / n``, so the involution ``k -> -k`` is ``j -> -j mod n``.  The
radial axis of a disc-times-circle domain runs over ``[0, 1]`` with
``nr + 1`` nodes, the disc angle being the next axis.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NotEquivariant, NotQuantized, UnderResolved
from .numerics import TOL, dagger, principal_log

TWO_PI = 2.0 * np.pi

DOMAINS = ("T2", "T3", "DxS", "F")
_DOMAIN_TAG = {name: k for k, name in enumerate(DOMAINS)}


@dataclass
class GridMap:
    """Unitary samples on a rectangular grid.

    Attributes
    ----------
    samples : ndarray, shape ``(*grid, N, N)``
    domain : one of ``'T2', 'T3', 'DxS', 'F'``
    periodic : per-axis flag
    spacing : per-axis step
    """

    samples: np.ndarray
    domain: str
    periodic: tuple
    spacing: tuple

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.domain not in DOMAINS:
            raise InputError(f"unknown domain {self.domain!r}")
        if len(self.periodic) != self.ndim or len(self.spacing) != self.ndim:
            raise InputError("axis metadata does not match grid rank")

    @property
    def shape(self) -> tuple:
        return self.samples.shape[:-2]

    @property
    def ndim(self) -> int:
        return self.samples.ndim - 2

    @property
    def N(self) -> int:
        return self.samples.shape[-1]

    # constructors -------------------------------------------------------
    @classmethod
    def torus(cls, samples) -> "GridMap":
        """Samples on ``T^d`` at ``k_j = 2 pi j / n`` (``d`` = 2 or 3)."""
        samples = np.asarray(samples, dtype=complex)
        d = samples.ndim - 2
        if d not in (2, 3):
            raise InputError(f"torus grid must be 2d or 3d, got {d}d")
        if any(n % 2 for n in samples.shape[:d]):
            raise InputError("torus grid sizes must be even")
        return cls(samples, f"T{d}", (True,) * d, tuple(TWO_PI / n for n in samples.shape[:d]))

    @classmethod
    def disc_times_circle(cls, samples) -> "GridMap":
        """Samples on ``D x S``: axes ``(r, disc angle, circle)``, ``r`` in ``[0, 1]``."""
        samples = np.asarray(samples, dtype=complex)
        nr, n1, n2 = samples.shape[:3]
        if nr < 2:
            raise InputError("radial axis needs at least two nodes")
        return cls(samples, "DxS", (False, True, True), (1.0 / (nr - 1), TWO_PI / n1, TWO_PI / n2))

    @classmethod
    def slab(cls, samples, extent: float = np.pi) -> "GridMap":
        """Samples on ``[0, extent] x T^2`` (axis 0 open)."""
        samples = np.asarray(samples, dtype=complex)
        ns, n1, n2 = samples.shape[:3]
        return cls(samples, "F", (False, True, True), (extent / (ns - 1), TWO_PI / n1, TWO_PI / n2))

    # helpers --------------------------------------------------------------
    def unitarity_residual(self) -> float:
        u = self.samples
        return float(np.abs(u @ dagger(u) - np.eye(self.N)).max(initial=0.0))

    def check_unitary(self, tol: float = TOL.unitary) -> None:
        res = self.unitarity_residual()
        if res > tol:
            raise InputError(f"samples are not unitary (residual {res:.2e})", residual=res)

    def involution_index(self) -> tuple:
        """Per-axis index arrays of the domain involution (identity on open axes)."""
        out = []
        for n, per in zip(self.shape, self.periodic):
            j = np.arange(n)
            out.append((-j) % n if per else j)
        return tuple(out)

    def reflected(self) -> np.ndarray:
        """Samples pulled back along the involution: ``m(iota x)``."""
        idx = np.ix_(*self.involution_index())
        return self.samples[idx]

    def permuted(self, axes) -> "GridMap":
        """Relabel grid axes (``axes`` as for ``np.transpose``)."""
        axes = tuple(int(a) for a in axes)
        s = np.transpose(self.samples, axes + (self.ndim, self.ndim + 1))
        return GridMap(s, self.domain, tuple(self.periodic[a] for a in axes),
                       tuple(self.spacing[a] for a in axes))


@dataclass
class QuadratureResult:
    value: float
    shape: tuple
    residue: float
    quantum: float = TWO_PI
    worst_angle: float = 0.0
    history: list = field(default_factory=list)

    @property
    def integer(self) -> int:
        return int(np.rint(self.value / self.quantum))


# ----------------------------------------------------------------------
# quadrature

def _take(a, axis, sl):
    idx = [slice(None)] * a.ndim
    idx[axis] = sl
    return a[tuple(idx)]


def log_derivatives(m: GridMap, max_angle: float = 0.5 * np.pi):
    """Left logarithmic derivatives ``L_a`` at every node, and the worst angle."""
    u = m.samples
    out, worst = [], 0.0
    for ax in range(m.ndim):
        h = m.spacing[ax]
        if m.periodic[ax]:
            w = dagger(u) @ np.roll(u, -1, axis=ax)
            F, wa = _log_checked(w, max_angle, ax)
            D = (F + np.roll(F, 1, axis=ax)) / (2 * h)
        else:
            n = u.shape[ax]
            w = dagger(_take(u, ax, slice(0, n - 1))) @ _take(u, ax, slice(1, n))
            F, wa = _log_checked(w, max_angle, ax)
            D = np.empty_like(u)
            idx = [slice(None)] * m.ndim
            idx[ax] = slice(1, n - 1)
            D[tuple(idx)] = (_take(F, ax, slice(1, None)) + _take(F, ax, slice(0, -1))) / (2 * h)
            if n >= 3:
                idx[ax] = 0
                D[tuple(idx)] = (3 * _take(F, ax, 0) - _take(F, ax, 1)) / (2 * h)
                idx[ax] = n - 1
                D[tuple(idx)] = (3 * _take(F, ax, n - 2) - _take(F, ax, n - 3)) / (2 * h)
            else:
                idx[ax] = slice(None)
                D[tuple(idx)] = np.broadcast_to(F / h, D.shape)
        out.append(D)
        worst = max(worst, wa)
    return out, worst


def neighbour_angles(m: GridMap) -> list[tuple[float, tuple]]:
    """Per axis: largest eigenphase modulus of ``u(x)^-1 u(x + e_a)`` and where it occurs."""
    u = m.samples
    out = []
    for ax in range(m.ndim):
        if m.periodic[ax]:
            w = dagger(u) @ np.roll(u, -1, axis=ax)
        else:
            n = u.shape[ax]
            w = dagger(_take(u, ax, slice(0, n - 1))) @ _take(u, ax, slice(1, n))
        ang = np.abs(np.angle(np.linalg.eigvals(w))).max(axis=-1)
        k = int(np.argmax(ang))
        out.append((float(ang.flat[k]), tuple(int(x) for x in np.unravel_index(k, ang.shape))))
    return out


def _log_checked(w, max_angle, ax):
    try:
        return principal_log(w, max_angle)
    except UnderResolved as exc:
        raise UnderResolved(f"axis {ax}: {exc}", axis=ax, **exc.payload) from None


def wz_density(m: GridMap) -> tuple[np.ndarray, float]:
    """Node-wise ``(1/4pi) tr(L1 [L2, L3])`` and the worst neighbour angle."""
    if m.ndim != 3:
        raise InputError("the 3-form density needs a 3-dimensional grid")
    (L1, L2, L3), worst = log_derivatives(m)
    c = L2 @ L3 - L3 @ L2
    dens = np.einsum("...ij,...ji->...", L1, c).real / (4 * np.pi)
    return dens, worst


def _weights(m: GridMap, region=None) -> np.ndarray:
    ws = []
    for ax, (n, per, h) in enumerate(zip(m.shape, m.periodic, m.spacing)):
        w = np.full(n, h)
        if not per:
            w[0] = w[-1] = 0.5 * h
        ws.append(w)
    if region is not None:
        ax, lo, hi = region
        n = m.shape[ax]
        if not m.periodic[ax]:
            raise InputError("region windows are only supported on periodic axes")
        w = np.zeros(n)
        idx = np.arange(lo, hi + 1) % n
        w[idx] = m.spacing[ax]
        w[lo % n] = w[hi % n] = 0.5 * m.spacing[ax]
        ws[ax] = w
    return ws


def subsample(m: GridMap) -> GridMap:
    """Every other node along every axis (the same map on a grid twice as coarse)."""
    for n, per in zip(m.shape, m.periodic):
        if (per and n % 4) or (not per and (n - 1) % 2):
            raise InputError(f"grid {m.shape} cannot be halved evenly")
    s = m.samples[(slice(None, None, 2),) * m.ndim]
    return GridMap(s, m.domain, m.periodic, tuple(2 * h for h in m.spacing))


def _riemann(m: GridMap, region):
    dens, worst = wz_density(m)
    w0, w1, w2 = _weights(m, region)
    # fixed-order reduction: contract the two inner axes, then the outer one
    return float(np.einsum("i,ijk,j,k->", w0, dens, w1, w2, optimize=False)), worst


def wz_integral(m: GridMap, region=None, quantum: float = TWO_PI,
                richardson: bool = False) -> QuadratureResult:
    """Riemann sum of the 3-form density.

    Parameters
    ----------
    m : GridMap over a 3-dimensional domain
    region : optional ``(axis, lo, hi)``; restricts the sum to nodes
        ``lo..hi`` of a periodic axis with half weights at both ends, so
        that complementary windows add up to the full integral.
    quantum : value defining the residue ``|value/quantum - round|``
    richardson : if set, also evaluate on the 2x subsampled grid and
        return ``(4 I_fine - I_coarse) / 3``, which removes the leading
        ``h^2`` error; both raw values are kept in ``history``.

    Raises
    ------
    UnderResolved
        If a neighbour transition has an eigenphase of modulus ``>= pi/2``.
    """
    value, worst = _riemann(m, region)
    hist = []
    if richardson:
        c = subsample(m)
        creg = None if region is None else (region[0], region[1] // 2, region[2] // 2)
        if region is not None and (region[1] % 2 or region[2] % 2):
            raise InputError("region bounds must be even for extrapolation")
        coarse, _ = _riemann(c, creg)
        hist = [(c.shape, coarse), (m.shape, value)]
        value = (4.0 * value - coarse) / 3.0
    resid = abs(value / quantum - np.rint(value / quantum))
    return QuadratureResult(value, m.shape, float(resid), quantum, worst, hist)


def wz_convergence(build, sizes) -> QuadratureResult:
    """Evaluate ``wz_integral(build(n))`` for increasing ``n``.

    The returned result is the finest one, with coarser values in
    ``history`` as ``(n, value)`` pairs.
    """
    hist = []
    res = None
    for n in sorted(sizes):
        res = wz_integral(build(n))
        hist.append((int(n), res.value))
    res.history = hist
    return res


# ----------------------------------------------------------------------
# holonomy formulas

def holonomy_via_extension(m: GridMap, residue_tol: float = TOL.quantum_residue):
    """``exp(1j * integral)`` and, on closed domains, the quantized integer.

    Returns
    -------
    (complex, int | None, QuadratureResult)
    """
    q = wz_integral(m)
    closed = all(m.periodic)
    n = None
    if closed:
        if q.residue > residue_tol:
            raise NotQuantized(f"closed-domain integral/2pi = {q.value / TWO_PI:.4f} not near an integer",
                               value=q.value, residue=q.residue)
        n = q.integer
    return complex(np.exp(1j * q.value)), n, q


@dataclass
class SqrtHolonomyResult:
    value: complex
    parity: int | None
    residue: float
    integral: float


def _theta_conj(T, u):
    return T @ np.conj(u) @ np.linalg.inv(T)


def equivariance_residual(m: GridMap, T: np.ndarray) -> float:
    """``max |m(iota x) - T conj(m(x)) T^-1|`` over the grid."""
    return float(np.abs(m.reflected() - _theta_conj(T, m.samples)).max(initial=0.0))


def extension_integral(pieces, richardson: bool = False) -> QuadratureResult:
    """Sum of the integrals of the pieces of a (possibly glued) extension."""
    if isinstance(pieces, GridMap):
        pieces = [pieces]
    total, worst = 0.0, 0.0
    for p in pieces:
        q = wz_integral(p, richardson=richardson)
        total += q.value
        worst = max(worst, q.worst_angle)
    res = abs(total / TWO_PI - np.rint(total / TWO_PI))
    return QuadratureResult(total, pieces[-1].shape, float(res), TWO_PI, worst)


def sqrt_holonomy_via_extension(pieces, T: np.ndarray | None = None,
                                boundary_trivial: bool = True,
                                residue_tol: float = TOL.quantum_residue,
                                equiv_tol: float = TOL.equivariance,
                                richardson: bool = False) -> SqrtHolonomyResult:
    """``exp((i/2) * integral)`` over an equivariant disc-times-circle extension.

    ``pieces`` is a GridMap or a list of them (inner disc first, then
    collars) whose integrals add.  When ``boundary_trivial`` the full
    holonomy of the boundary map is 1, so the integral is a multiple of
    ``2 pi`` and its parity is returned.

    Raises
    ------
    NotEquivariant
        If ``T`` is given and some piece violates ``psi(iota x) = T conj(psi) T^-1``.
    NotQuantized
        If ``boundary_trivial`` and the residue exceeds ``residue_tol``.
    """
    if isinstance(pieces, GridMap):
        pieces = [pieces]
    if T is not None:
        for p in pieces:
            r = equivariance_residual(p, T)
            if r > equiv_tol:
                raise NotEquivariant(f"extension equivariance residual {r:.2e}", residual=r)
    q = extension_integral(pieces, richardson)
    parity = None
    if boundary_trivial:
        if q.residue > residue_tol:
            raise NotQuantized(f"extension integral/2pi = {q.value / TWO_PI:.4f} not near an integer",
                               value=q.value, residue=q.residue)
        parity = q.integer % 2
    return SqrtHolonomyResult(complex(np.exp(0.5j * q.value)), parity, q.residue, q.value)


@dataclass
class Index3dResult:
    sign: int
    phase: float
    distance: float
    integral_F: float
    integral_pi: float
    integral_0: float
    residue: float


def boundary_torus(m: GridMap, axis: int, index: int) -> GridMap:
    """Slice of a T^3 map at node ``index`` of ``axis``, axes in cyclic order.

    The remaining axes are ``(axis+1, axis+2) mod 3``, which is the
    orientation induced on the face where ``axis`` is the outward normal.
    """
    if m.domain != "T3":
        raise InputError("boundary tori are cut from T3 grids")
    rest = [(axis + 1) % 3, (axis + 2) % 3]
    s = np.take(m.samples, index, axis=axis)
    # np.take drops the axis; reorder remaining ones cyclically
    remaining = [a for a in range(3) if a != axis]
    order = [remaining.index(a) for a in rest]
    s = np.transpose(s, order + [2, 3])
    return GridMap.torus(s)


def index3d_un(m: GridMap, axis: int, ext_pi, ext_0=None, T: np.ndarray | None = None,
               tol: float = 1e-2, residue_tol: float = TOL.quantum_residue,
               match_tol: float = 1e-10, richardson: bool = True) -> Index3dResult:
    """3d index ``exp(-(i/2) int_F H) * sqrt-holonomy of the boundary``.

    ``F`` is the half ``0 <= k_axis <= pi`` of the torus; its boundary is
    the torus at ``k_axis = pi`` minus the torus at ``k_axis = 0``.
    ``ext_pi`` / ``ext_0`` are disc-times-circle extensions (GridMaps or
    lists of pieces) of those tori, with coordinates ordered as in
    :func:`boundary_torus`.  ``ext_0=None`` means the boundary map at
    ``k_axis = 0`` is constant and contributes a trivial factor.

    Raises
    ------
    NotQuantized
        If the total phase is farther than ``tol`` from ``{0, pi}`` or the
        glued closed integral is not quantized.
    """
    if m.domain != "T3":
        raise InputError("index3d_un needs a T3 grid")
    n = m.shape[axis]
    qF = wz_integral(m, region=(axis, 0, n // 2), richardson=richardson)
    parts = {}
    for key, ext, idx in (("pi", ext_pi, n // 2), ("0", ext_0, 0)):
        face = boundary_torus(m, axis, idx)
        if ext is None:
            if np.abs(face.samples - face.samples[0, 0]).max() > match_tol:
                raise InputError(f"boundary torus at k={key} is not constant; extension required")
            parts[key] = 0.0
            continue
        pieces = [ext] if isinstance(ext, GridMap) else list(ext)
        outer = pieces[-1].samples[-1]
        if outer.shape != face.samples.shape or np.abs(outer - face.samples).max() > match_tol:
            raise InputError(f"extension does not restrict to the boundary torus at k={key}")
        parts[key] = sqrt_holonomy_via_extension(pieces, T, boundary_trivial=False,
                                                 richardson=richardson).integral
    closed = qF.value - parts["pi"] + parts["0"]
    residue = abs(closed / TWO_PI - np.rint(closed / TWO_PI))
    if residue > residue_tol:
        raise NotQuantized(f"glued integral/2pi = {closed / TWO_PI:.4f} not near an integer",
                           value=closed, residue=residue)
    phase = -0.5 * closed
    z = np.exp(1j * phase)
    sign = 1 if z.real >= 0 else -1
    dist = float(abs(np.angle(z * sign)))
    if dist > tol:
        raise NotQuantized(f"3d index phase {np.angle(z):.3e} not near 0 or pi", phase=phase)
    return Index3dResult(sign, float(np.angle(z)), dist, qF.value, parts["pi"], parts["0"],
                         float(residue))


# ----------------------------------------------------------------------
# GRB1 binary grids

_MAGIC = b"GRB1"
_HEADER = struct.Struct("<4sB4II")


def write_grb1(m: GridMap, path) -> None:
    """Write ``m`` as magic, domain tag, four dims, N and interleaved f64 re/im."""
    dims = list(m.shape) + [0] * (4 - m.ndim)
    head = _HEADER.pack(_MAGIC, _DOMAIN_TAG[m.domain], *dims, m.N)
    data = np.ascontiguousarray(m.samples, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(data.tobytes())


def read_grb1(path) -> GridMap:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise InputError("GRB1 file truncated in header")
    magic, tag, d0, d1, d2, d3, N = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise InputError("not a GRB1 file")
    if tag >= len(DOMAINS):
        raise InputError(f"unknown GRB1 domain tag {tag}")
    dims = [d for d in (d0, d1, d2, d3) if d]
    count = int(np.prod(dims)) * N * N
    body = raw[_HEADER.size:]
    if len(body) != 16 * count:
        raise InputError(f"GRB1 payload has {len(body)} bytes, expected {16 * count}")
    s = np.frombuffer(body, dtype="<c16").reshape(*dims, N, N).astype(complex)
    domain = DOMAINS[tag]
    if domain in ("T2", "T3"):
        return GridMap.torus(s)
    if domain == "DxS":
        return GridMap.disc_times_circle(s)
    return GridMap.slab(s)


# ----------------------------------------------------------------------
# fixtures

def chern_winding_map(n: int, mass: float = 1.0) -> GridMap:
    """``u(k) = exp(i k3 P(k1, k2)) exp(-i k3)`` with ``P`` a two-band Bloch projector.

    ``P`` is the lower-band projector of ``sin k1 sx + sin k2 sy +
    (mass - cos k1 - cos k2) sz``; the map has 3-degree equal (up to the
    orientation convention) to that band's Chern number.
    """
    k = TWO_PI * np.arange(n) / n
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    d = np.stack([np.sin(K1), np.sin(K2), mass - np.cos(K1) - np.cos(K2)], axis=-1)
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    sig = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]])
    P = 0.5 * (np.eye(2) - np.einsum("...a,aij->...ij", d, sig))
    ph = np.exp(1j * k)[None, None, :, None, None]
    # exp(i k3 P) = I - P + e^{i k3} P, times e^{-i k3}
    Q = (np.eye(2) - P)[:, :, None]
    u = (Q + ph * P[:, :, None]) / ph
    return GridMap.torus(u)


def su2_degree_map(n: int, mass: float = 2.0) -> GridMap:
    """``u(k) = (d0 - i sum_a sin k_a sigma_a) / |d|`` with ``d0 = mass - sum_a cos k_a``.

    A map ``T^3 -> SU(2)``; its degree is ``+1`` for ``1 < |mass| < 3``,
    ``-2`` for ``|mass| < 1`` and ``0`` for ``|mass| > 3``.
    """
    k = TWO_PI * np.arange(n) / n
    K = np.meshgrid(k, k, k, indexing="ij")
    d = np.stack([mass - sum(np.cos(x) for x in K)] + [np.sin(x) for x in K], axis=-1)
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    sig = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]])
    u = d[..., 0, None, None] * np.eye(2) - 1j * np.einsum("...a,aij->...ij", d[..., 1:], sig)
    return GridMap.torus(u)
