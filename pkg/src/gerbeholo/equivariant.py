"""Time-reversal structures and equivariant extensions over a solid torus.

An extension of an equivariant torus map ``u(k1, k2)`` is a map ``psi`` on
``D x S`` (axes ``(r, k1, k2)``, ``k1`` the disc angle) with
``psi(1, k) = u(k)``, ``psi(0, k1, k2)`` independent of ``k1`` and
``psi(r, -k) = Theta psi(r, k)`` where ``Theta(u) = T conj(u) T^-1``.

Extensions are returned as lists of GridMap *pieces* (inner disc first,
then optional collars ending at ``r = 1``); their 3-form integrals add.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (CutCollision, ExtensionUnavailable, GapClosure, InputError,
                     NotEquivariant, OddWinding)
from .numerics import TOL, dagger, det_phase_winding, unitary_eig
from .wz import GridMap, equivariance_residual, neighbour_angles

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class AntiUnitary:
    """``theta(v) = T conj(v)`` with ``T conj(T) = sign * I``."""

    T: np.ndarray
    sign: int

    def __post_init__(self):
        T = np.asarray(self.T, dtype=complex)
        object.__setattr__(self, "T", T)
        n = T.shape[0]
        if np.abs(T @ dagger(T) - np.eye(n)).max() > 1e-12:
            raise InputError("time-reversal matrix is not unitary")
        if self.sign not in (1, -1):
            raise InputError("sign must be +1 or -1")
        if np.abs(T @ np.conj(T) - self.sign * np.eye(n)).max() > 1e-12:
            raise InputError(f"T conj(T) != {self.sign:+d} I")

    @property
    def N(self) -> int:
        return self.T.shape[0]

    def apply(self, v):
        return self.T @ np.conj(v)

    def conj_map(self, u):
        """``Theta(u) = theta u theta^-1`` for a matrix or stack."""
        return self.T @ np.conj(u) @ dagger(self.T)

    def require_fermionic(self) -> None:
        if self.sign != -1:
            raise InputError("invariant pipelines need theta^2 = -I; no equivariant "
                             "extension of the basic gerbe exists for theta^2 = +I")

    @classmethod
    def spin_half(cls, n_orbitals: int = 1) -> "AntiUnitary":
        """``(i sigma_y tensor I_n) K``."""
        return cls(np.kron(np.array([[0, 1], [-1, 0]]), np.eye(n_orbitals)), -1)


def check_equivariance(m: GridMap, th: AntiUnitary) -> float:
    """Maximal deviation ``|m(iota x) - Theta m(x)|`` over the grid."""
    for n, per in zip(m.shape, m.periodic):
        if per and n % 2:
            raise InputError("periodic axes need an even number of nodes")
    return equivariance_residual(m, th.T)


@dataclass
class ExtensionMap:
    """Extension pieces plus diagnostics."""

    pieces: list
    strategy: str
    margin: float
    info: dict = field(default_factory=dict)

    @property
    def outer(self) -> GridMap:
        return self.pieces[-1]

    def boundary_residual(self, m: GridMap) -> float:
        return float(np.abs(self.outer.samples[-1] - m.samples).max())

    def equivariance_residual(self, th: AntiUnitary) -> float:
        return max(check_equivariance(p, th) for p in self.pieces)


def _validate_input(m: GridMap, th: AntiUnitary, tol: float = TOL.equivariance) -> None:
    if m.domain != "T2":
        raise InputError("extensions are built for maps on T2")
    if th.N != m.N:
        raise InputError("time reversal and map sizes differ")
    res = check_equivariance(m, th)
    if res > tol:
        raise NotEquivariant(f"input map equivariance residual {res:.2e}", residual=res)


def _radii(nr: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, nr + 1)


def _midgap_projector(b: np.ndarray, level: float):
    """Projector on eigenvalues above ``level`` (cluster sum) and the smallest distance to it."""
    w, v = np.linalg.eigh(b)
    up = (w > level).astype(float)
    proj = (v * up[..., None, :]) @ dagger(v)
    return proj, np.abs(w - level).min(axis=-1)


def extend_involutive(m: GridMap, th: AntiUnitary, nr: int = 24,
                      mid_tol: float = TOL.mid_tol) -> ExtensionMap:
    """Extension through involutions: ``I - 2 P_mid(r p(k) + (1-r) p(0, k2))``.

    ``p = (I - u)/2``; ``P_mid`` keeps eigenvalues above 1/2.  Every slice
    is involutive, so this route only succeeds when the interpolation
    stays gapped at 1/2.

    A crossing of 1/2 between grid nodes is detected as a jump of the
    projector: a neighbour transition with eigenphase ``>= pi/2``.

    Raises
    ------
    GapClosure
        With the offending ``(r, k1, k2)`` indices in the payload.
    """
    _validate_input(m, th)
    u = m.samples
    N = m.N
    if np.abs(u @ u - np.eye(N)).max() > 1e-9:
        raise InputError("involutive extension needs u^2 = I")
    p = 0.5 * (np.eye(N) - u)
    p0 = np.broadcast_to(p[0:1], p.shape)
    r = _radii(nr)[:, None, None, None, None]
    interp = r * p[None] + (1 - r) * p0[None]
    proj, dist = _midgap_projector(interp, 0.5)
    margin = float(dist.min())
    if margin < mid_tol:
        at = np.unravel_index(int(np.argmin(dist)), dist.shape)
        raise GapClosure(f"interpolant eigenvalue within {margin:.2e} of 1/2",
                         at=tuple(int(x) for x in at), margin=margin)
    psi = np.eye(N) - 2 * proj
    out = GridMap.disc_times_circle(psi)
    _require_continuous(out, margin)
    return ExtensionMap([out], "S1-involutive", margin)


def _require_continuous(m: GridMap, margin: float) -> None:
    for ax, (ang, at) in enumerate(neighbour_angles(m)):
        if ang >= 0.5 * np.pi:
            raise GapClosure(f"extension jumps along axis {ax} (neighbour angle {ang:.2f}); "
                             "the gap closes between grid nodes", at=at, axis=ax, margin=margin)


def _odd_profiles(n1: int, n2: int) -> dict:
    k1 = TWO_PI * np.arange(n1) / n1
    k2 = TWO_PI * np.arange(n2) / n2
    K1, K2 = np.meshgrid(k1, k2, indexing="ij")
    return {"sin k2": np.sin(K2), "sin k1": np.sin(K1), "sin(k1+k2)": np.sin(K1 + K2),
            "sin(k1-k2)": np.sin(K1 - K2)}


def _kramers_projector(th: AntiUnitary, rank: int, rng) -> np.ndarray:
    x = rng.normal(size=(th.N, th.N)) + 1j * rng.normal(size=(th.N, th.N))
    x = x + dagger(x)
    x = 0.5 * (x + th.conj_map(x))
    w, v = np.linalg.eigh(x)
    vo = v[:, :rank]
    return vo @ dagger(vo)


def extend_regularized(m: GridMap, th: AntiUnitary, nr: int = 24, strength: float = 1.0,
                       seed: int = 0, tries: int = 4, mid_tol: float = TOL.mid_tol) -> ExtensionMap:
    """Extension of an involutive map leaving the involutive locus inside the disc.

    ``psi = -polar(B + i w)`` with ``B = 2 (r p(k) + (1-r) Q) - I`` and
    ``w = strength * sin(pi r) g(k)``, where ``Q`` is a constant projector
    commuting with ``Theta`` and ``g`` an odd function of ``k``.  Since
    ``Theta(B + i w) = B(-k) + i w(-k)``, ``psi`` is equivariant; at
    ``r = 1`` it equals ``u``, at ``r = 0`` the constant ``I - 2Q``.  The
    construction needs ``B + i w`` invertible; several ``(Q, g)``
    candidates are tried and the best-conditioned one is kept.

    Raises
    ------
    GapClosure
        If no candidate keeps the smallest singular value above ``mid_tol``.
    """
    _validate_input(m, th)
    u = m.samples
    N = m.N
    if np.abs(u @ u - np.eye(N)).max() > 1e-9:
        raise InputError("regularized extension needs u^2 = I")
    p = 0.5 * (np.eye(N) - u)
    rank = int(round(np.trace(p[0, 0]).real))
    rng = np.random.default_rng(seed)
    r = _radii(nr)
    best = None
    for attempt in range(tries):
        Q = _kramers_projector(th, rank, rng)
        for name, g in _odd_profiles(*m.shape).items():
            b = 2 * (r[:, None, None, None, None] * p[None]
                     + (1 - r)[:, None, None, None, None] * Q) - np.eye(N)
            lam, v = np.linalg.eigh(b)
            w = strength * np.sin(np.pi * r)[:, None, None, None] * g[None, :, :, None]
            z = lam + 1j * w
            margin = float(np.abs(z).min())
            if best is None or margin > best[0]:
                best = (margin, v, z, name, attempt)
        if best[0] > 0.1:
            break
    margin, v, z, name, attempt = best
    if margin < mid_tol:
        raise GapClosure(f"regularized interpolant nearly singular (margin {margin:.2e})",
                         margin=margin)
    psi = -(v * (z / np.abs(z))[..., None, :]) @ dagger(v)
    psi[0] = psi[0, 0, 0]  # exact k1 independence of the centre
    psi[-1] = u
    return ExtensionMap([GridMap.disc_times_circle(psi)], "S1-regularized", margin,
                        {"profile": name, "projector_attempt": attempt, "strength": strength})


def extend_gapped(m: GridMap, th: AntiUnitary, cut: int, nr: int = 24,
                  gap_tol: float = TOL.cut_gap_tol) -> ExtensionMap:
    """Eigenphase contraction away from a cut at ``-1`` or ``+1``.

    ``cut=-1``: ``psi_r = sum_j exp(i r phi_j) P_j``, ``phi_j in (-pi, pi)``;
    ``cut=+1``: ``psi_r = sum_j exp(i (pi + r (phi_j - pi))) P_j``,
    ``phi_j in (0, 2pi)``.  The centre is ``+I`` resp. ``-I``.

    Raises
    ------
    CutCollision
        With the offending node and eigenphase when the spectrum comes
        within ``gap_tol`` of the cut point.
    """
    _validate_input(m, th)
    if cut not in (1, -1):
        raise InputError("cut must be +1 or -1")
    phi, z = unitary_eig(m.samples)
    if cut == -1:
        dist = np.pi - np.abs(phi)
    else:
        phi = np.mod(phi, TWO_PI)
        dist = np.minimum(phi, TWO_PI - phi)
    margin = float(dist.min())
    if margin < gap_tol:
        at = np.unravel_index(int(np.argmin(dist)), dist.shape)
        raise CutCollision(f"eigenphase within {margin:.2e} of the cut at {cut:+d}",
                           at=tuple(int(x) for x in at[:2]), eigenphase=float(phi[at]),
                           distance=margin)
    r = _radii(nr)[:, None, None, None]
    ph = r * phi[None] if cut == -1 else np.pi + r * (phi[None] - np.pi)
    psi = (z[None] * np.exp(1j * ph)[..., None, :]) @ dagger(z)[None]
    psi[0] = psi[0, 0, 0]
    psi[-1] = m.samples
    # an eigenphase that hops over the cut between two nodes shows up as a
    # jump of about pi in the half-contracted slice
    for ax, (ang, at) in enumerate(neighbour_angles(GridMap.torus(psi[len(psi) // 2]))):
        if ang >= 0.5 * np.pi:
            raise CutCollision(f"eigenphase crosses the cut at {cut:+d} between grid nodes "
                               f"(axis {ax})", at=tuple(int(x) for x in at[:2]), axis=ax,
                               distance=0.0)
    return ExtensionMap([GridMap.disc_times_circle(psi)], f"S2-gapped{cut:+d}", margin)


def symmetric_gap(m: GridMap, min_width: float = 0.05):
    """Half-angle ``alpha`` of a conjugation-symmetric gap pair ``exp(+-i alpha)``.

    Returns the ``alpha`` in ``(0, pi)`` at the centre of the widest
    spectral gap of the upper half circle, with its half width, or
    ``None`` if no gap wider than ``min_width`` exists.
    """
    phi = np.sort(np.abs(np.angle(np.linalg.eigvals(m.samples))).ravel())
    pts = np.concatenate([[0.0], phi, [np.pi]])
    gaps = np.diff(pts)
    k = int(np.argmax(gaps[1:-1])) + 1 if len(gaps) > 2 else 0
    if len(gaps) <= 2 or gaps[k] < min_width:
        return None
    return 0.5 * (pts[k] + pts[k + 1]), 0.5 * gaps[k]


def flatten(u: np.ndarray, alpha: float, s: float) -> np.ndarray:
    """Move eigenphases ``|phi| < alpha`` toward 0 and the others toward ``pi`` by fraction ``s``."""
    phi, z = unitary_eig(u)
    tgt = np.where(np.abs(phi) < alpha, 0.0, np.pi * np.sign(phi + 1e-300))
    ph = (1 - s) * phi + s * tgt
    return (z * np.exp(1j * ph)[..., None, :]) @ dagger(z)


def extend_flatten_glue(m: GridMap, th: AntiUnitary, nr: int = 24, ncollar: int = 12,
                        alpha: float | None = None) -> ExtensionMap:
    """Extension of a map with a gap pair at ``exp(+-i alpha)``.

    A collar ``r in [1/2, 1]`` flattens the spectrum to ``{+1, -1}``
    equivariantly (phases move monotonically toward their targets and
    never cross the gaps); the resulting involutive map is then extended
    over the inner disc by :func:`extend_regularized`.
    """
    _validate_input(m, th)
    if alpha is None:
        found = symmetric_gap(m)
        if found is None:
            raise ExtensionUnavailable("no conjugation-symmetric spectral gap pair")
        alpha, half = found
    s = np.linspace(1.0, 0.0, ncollar + 1)
    collar = np.stack([flatten(m.samples, alpha, si) for si in s])
    collar[-1] = m.samples
    flat = GridMap.torus(collar[0])
    inner = extend_regularized(flat, th, nr)
    pieces = [GridMap(inner.outer.samples, "DxS", (False, True, True),
                      (0.5 / nr, *inner.outer.spacing[1:])),
              GridMap(collar, "DxS", (False, True, True), (0.5 / ncollar, *m.spacing))]
    return ExtensionMap(pieces, "flatten-glue", inner.margin,
                        dict(inner.info, alpha=float(alpha)))


def _unimodular_completion(a: int, c: int) -> np.ndarray:
    """Integer matrix ``[[a, b], [c, d]]`` with determinant 1 (needs ``gcd(a, c) = 1``)."""
    # extended Euclid on (a, c): x a + y c = 1
    r0, r1, x0, x1, y0, y1 = a, c, 1, 0, 0, 1
    while r1:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if r0 < 0:
        x0, y0 = -x0, -y0
    return np.array([[a, -y0], [c, x0]])


def sl2_precompose(m: GridMap) -> tuple[GridMap, np.ndarray]:
    """Relabel a square T2 grid by an SL(2, Z) matrix so that ``det u`` does not wind along ``k1``.

    The new node ``(i, j)`` is the old node ``M (i, j) mod n``.  Linear
    relabelings commute with ``k -> -k`` and preserve orientation, so
    equivariance and the extension integral are unchanged.  Returns the
    map itself and the identity when the winding along ``k1`` is already 0.
    """
    w1 = det_phase_winding(m.samples[:, 0])
    w2 = det_phase_winding(m.samples[0, :])
    if w1 == 0:
        return m, np.eye(2, dtype=int)
    n1, n2 = m.shape
    if n1 != n2:
        raise InputError("relabeling needs a square grid")
    g = int(np.gcd(w1, w2))
    M = _unimodular_completion(w2 // g, -w1 // g)
    i, j = np.meshgrid(np.arange(n1), np.arange(n1), indexing="ij")
    src_i = (M[0, 0] * i + M[0, 1] * j) % n1
    src_j = (M[1, 0] * i + M[1, 1] * j) % n1
    out = GridMap(m.samples[src_i, src_j], m.domain, m.periodic, m.spacing)
    return out, M


def extend_auto(m: GridMap, th: AntiUnitary, nr: int = 24, cut: int | None = None,
                seed: int = 0) -> ExtensionMap:
    """First applicable strategy for ``m``.

    A map whose determinant winds along ``k1`` is first relabeled with
    :func:`sl2_precompose`.  Involutive maps use the involutive
    construction and fall back to the regularized one on gap closure.  Otherwise gapped contraction with
    the requested cut (or both cuts), then flatten-and-glue.

    Raises
    ------
    ExtensionUnavailable
        With the diagnostics of every attempted strategy.
    """
    th.require_fermionic()
    if m.domain == "T2":
        m2, M = sl2_precompose(m)
        if m2 is not m:
            ext = extend_auto(m2, th, nr, cut, seed)
            ext.info["relabeling"] = M.tolist()
            ext.strategy += "+relabeled"
            return ext
    u = m.samples
    tried = {}
    if np.abs(u @ u - np.eye(m.N)).max() < 1e-9:
        try:
            return extend_involutive(m, th, nr)
        except GapClosure as exc:
            tried["S1-involutive"] = str(exc)
        return extend_regularized(m, th, nr, seed=seed)
    for c in ((cut,) if cut else (-1, 1)):
        try:
            return extend_gapped(m, th, c, nr)
        except CutCollision as exc:
            tried[f"S2-gapped{c:+d}"] = str(exc)
    try:
        return extend_flatten_glue(m, th, nr)
    except (ExtensionUnavailable, GapClosure) as exc:
        tried["flatten-glue"] = str(exc)
    raise ExtensionUnavailable("no extension strategy applies; supply a user extension (GRB1)",
                               attempts=tried)


def lift_double_cover(m: GridMap):
    """Continuous ``omega`` with ``omega^2 = det u`` on a T2 grid.

    Phases are accumulated from node ``(0, 0)`` along the ``k1`` axis and
    then along every ``k2`` column; the closing steps of all loops are
    verified.  The other lift is ``-omega``.

    Raises
    ------
    OddWinding
        If ``det u`` winds an odd number of times along a cycle.
    """
    if m.domain != "T2":
        raise InputError("double-cover lifts are built on T2 grids")
    d = np.linalg.det(m.samples)
    d = d / np.abs(d)
    w1 = det_phase_winding(m.samples[:, 0])
    w2 = det_phase_winding(m.samples[0, :])
    if w1 % 2 or w2 % 2:
        raise OddWinding(f"det winding ({w1}, {w2}) is not even", windings=(w1, w2))
    n1, n2 = d.shape
    ph = np.empty((n1, n2))
    ph[0, 0] = np.angle(d[0, 0])
    for i in range(1, n1):
        ph[i, 0] = ph[i - 1, 0] + np.angle(d[i, 0] / d[i - 1, 0])
    for j in range(1, n2):
        ph[:, j] = ph[:, j - 1] + np.angle(d[:, j] / d[:, j - 1])
    omega = np.exp(0.5j * ph)
    # cycle consistency: continuing one more step must return to the start
    close1 = np.exp(0.5j * (ph[-1, :] + np.angle(d[0, :] / d[-1, :])))
    close2 = np.exp(0.5j * (ph[:, -1] + np.angle(d[:, 0] / d[:, -1])))
    if np.abs(close1 - omega[0, :]).max() > 1e-6 or np.abs(close2 - omega[:, 0]).max() > 1e-6:
        raise OddWinding("square root of det u is not single valued on the grid")
    return m, omega
