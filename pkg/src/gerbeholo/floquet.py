"""Periodically driven Bloch Hamiltonians with period ``2 pi``.

``h(t, k) = sum_n exp(i n t) h_n(k)`` with ``h_{-n} = h_n^dagger``; the
static part ``h_0`` is a :class:`BlochModel`.  Documents use format
``model-v2``: a model-v1 document plus ``"harmonics": [{"n": 1,
"hoppings": [...]}]`` (positive ``n`` only).

Quasienergies: eigenvalues of ``u(2 pi, k)`` are written ``exp(-i e)``.
A gap is described by ``epsilon`` in ``[-2 pi, 0)`` with the branch cut of
the logarithm at ``exp(-i epsilon)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bands import BlochModel, _matrix, kgrid
from .errors import InputError, NoGap
from .numerics import TOL, dagger, unitary_eig, unitary_log_branch
from .wz import GridMap

TWO_PI = 2.0 * np.pi


@dataclass
class DrivenModel:
    static: BlochModel
    harmonics: dict = field(default_factory=dict)  # n > 0 -> {R: matrix}
    name: str = ""

    @property
    def N(self) -> int:
        return self.static.N

    @property
    def dim(self) -> int:
        return self.static.dim

    @property
    def theta(self):
        return self.static.theta

    @classmethod
    def from_json(cls, doc: dict) -> "DrivenModel":
        static = BlochModel.from_json(dict(doc, format="model-v1"))
        harm = {}
        for j, h in enumerate(doc.get("harmonics", [])):
            n = int(h["n"])
            if n <= 0:
                raise InputError("harmonic orders must be positive", pointer=f"/harmonics/{j}/n")
            tab = harm.setdefault(n, {})
            for q, hop in enumerate(h.get("hoppings", [])):
                R = tuple(int(x) for x in hop["R"])
                if len(R) != static.dim:
                    raise InputError("displacement dimension mismatch",
                                     pointer=f"/harmonics/{j}/hoppings/{q}/R")
                tab[R] = tab.get(R, 0) + _matrix(hop, f"/harmonics/{j}/hoppings/{q}", static.N)
        return cls(static, harm, doc.get("name", ""))

    @classmethod
    def load(cls, path) -> "DrivenModel":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    @classmethod
    def undriven(cls, model: BlochModel) -> "DrivenModel":
        return cls(model, {}, model.name)

    def with_parameter(self, key: str, value: float) -> "DrivenModel":
        return DrivenModel(self.static.with_parameter(key, value), self.harmonics, self.name)

    def plane(self, axis: int, value: float) -> "DrivenModel":
        harm = {}
        rest = [(axis + 1) % 3, (axis + 2) % 3]
        for n, tab in self.harmonics.items():
            out = {}
            for R, t in tab.items():
                R2 = (R[rest[0]], R[rest[1]])
                out[R2] = out.get(R2, 0) + np.exp(1j * value * R[axis]) * t
            harm[n] = out
        return DrivenModel(self.static.plane(axis, value), harm, f"{self.name}|plane")

    def harmonic_k(self, tab: dict, ks) -> np.ndarray:
        out = 0
        for R, t in tab.items():
            ph = np.exp(1j * sum(k * r for k, r in zip(ks, R)))
            out = out + ph[..., None, None] * t
        return out

    def h(self, t: float, *ks) -> np.ndarray:
        """``h(t, k)`` on broadcastable momentum arrays."""
        ks = np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in ks])
        out = self.static.h(*ks)
        for n, tab in self.harmonics.items():
            hn = self.harmonic_k(tab, ks)
            term = np.exp(1j * n * t) * hn
            out = out + term + dagger(term)
        return out

    def symmetry_residual(self, n: int = 8, times=(0.3, 1.7)) -> float:
        """``max |Theta h(t, k) - h(-t, -k)|`` on a small grid."""
        ks = np.meshgrid(*([kgrid(n)] * self.dim), indexing="ij")
        idx = np.ix_(*([(-np.arange(n)) % n] * self.dim))
        res = 0.0
        for t in times:
            a = self.theta.conj_map(self.h(t, *ks))
            b = self.h(-t, *ks)[idx]
            res = max(res, float(np.abs(a - b).max()))
        return res


@dataclass
class EvolutionGrid:
    """Evolution operators ``u(t_j, k)`` at ``t_j = 2 pi j / nt``, ``j = 0..nt``."""

    u: np.ndarray          # (nt + 1, *kgrid, N, N)
    steps: int
    model: DrivenModel
    drift: float

    @property
    def nt(self) -> int:
        return self.u.shape[0] - 1

    @property
    def floquet(self) -> np.ndarray:
        return self.u[-1]

    def at(self, t_index: int) -> np.ndarray:
        return self.u[t_index]


def _exp_step(h: np.ndarray, dt: float) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (h + dagger(h)))
    return (v * np.exp(-1j * dt * w)[..., None, :]) @ dagger(v)


def evolve(dm: DrivenModel, n: int, steps: int = 256, nt: int = 32, kslice=None) -> EvolutionGrid:
    """Midpoint exponential integration of ``i du/dt = h u`` over one period.

    Steps are centred at ``(j + 1/2) dt``, a grid symmetric under
    ``t -> -t``; each step is an exact unitary.  Snapshots are stored at
    ``nt + 1`` equally spaced times (``nt`` must divide ``steps``).

    ``kslice`` optionally fixes the momentum grid as a tuple of arrays
    (default: the full ``n^d`` grid).
    """
    if steps < 64:
        raise InputError("at least 64 steps per period are required")
    if steps % nt:
        raise InputError("snapshot count must divide the step count")
    if kslice is None:
        ks = np.meshgrid(*([kgrid(n)] * dm.dim), indexing="ij")
    else:
        ks = np.broadcast_arrays(*kslice)
    shape = ks[0].shape
    N = dm.N
    dt = TWO_PI / steps
    u = np.broadcast_to(np.eye(N, dtype=complex), shape + (N, N)).copy()
    out = np.empty((nt + 1,) + shape + (N, N), dtype=complex)
    out[0] = u
    every = steps // nt
    for s in range(steps):
        u = _exp_step(dm.h((s + 0.5) * dt, *ks), dt) @ u
        if (s + 1) % every == 0:
            out[(s + 1) // every] = u
    drift = float(np.abs(u @ dagger(u) - np.eye(N)).max())
    if drift > 1e-9:
        raise InputError(f"unitarity drift {drift:.2e}")
    return EvolutionGrid(out, steps, dm, drift)


@dataclass(frozen=True)
class GapSpec:
    epsilon: float
    margin: float

    def __post_init__(self):
        if not (-TWO_PI <= self.epsilon < 0):
            raise InputError(f"epsilon={self.epsilon} outside [-2pi, 0)")


def quasienergy_phases(u: np.ndarray) -> np.ndarray:
    """``e`` in ``[0, 2 pi)`` with eigenvalues ``exp(-i e)``."""
    return np.mod(-np.angle(np.linalg.eigvals(u)), TWO_PI)


def find_gaps(e: EvolutionGrid, min_width: float = 0.05) -> list[GapSpec]:
    """Open arcs of the circle avoided by every quasienergy, widest first.

    Arcs narrower than ``min_width`` are treated as band interiors.

    Raises
    ------
    NoGap
        If no arc is wider than ``min_width``.
    """
    ph = np.sort(quasienergy_phases(e.floquet).ravel())
    ext = np.concatenate([ph, [ph[0] + TWO_PI]])
    widths = np.diff(ext)
    gaps = []
    for k in np.argsort(-widths):
        if widths[k] < min_width:
            break
        mid = ext[k] + 0.5 * widths[k]
        eps = np.mod(mid, TWO_PI) - TWO_PI  # in [-2pi, 0)
        gaps.append(GapSpec(float(eps), float(0.5 * widths[k])))
    if not gaps:
        raise NoGap(f"no quasienergy gap wider than {min_width}")
    return gaps


def gap_margin(e: EvolutionGrid, epsilon: float) -> float:
    """Smallest angular distance of the quasienergies to ``epsilon``."""
    d = np.mod(quasienergy_phases(e.floquet) - epsilon, TWO_PI)
    return float(np.minimum(d, TWO_PI - d).min())


def effective_h(e: EvolutionGrid, g: GapSpec, gap_tol: float = TOL.gap_tol) -> np.ndarray:
    """``h_eps(k)`` with ``u(2 pi, k) = exp(-2 pi i h_eps(k))``, spectrum in ``(eps, eps + 2pi)/2pi``."""
    u = e.floquet
    flat = u.reshape(-1, e.model.N, e.model.N)
    out = np.stack([unitary_log_branch(x, g.epsilon, gap_tol) for x in flat])
    return out.reshape(u.shape)


def periodized(e: EvolutionGrid, g: GapSpec, heff: np.ndarray | None = None,
               tol: float = 1e-8) -> GridMap:
    """``v_eps(t, k) = u(t, k) exp(i t h_eps(k))`` as a map on ``T^(d+1)``.

    The ``t = 2 pi`` snapshot is dropped after checking that it equals the
    ``t = 0`` one; the time axis comes first.
    """
    if heff is None:
        heff = effective_h(e, g)
    w, v = np.linalg.eigh(heff)
    ts = TWO_PI * np.arange(e.nt + 1) / e.nt
    ph = np.exp(1j * ts.reshape((-1,) + (1,) * (w.ndim)) * w[None])
    expo = (v[None] * ph[..., None, :]) @ dagger(v)[None]
    vt = e.u @ expo
    per = float(np.abs(vt[-1] - vt[0]).max())
    if per > tol:
        raise InputError(f"periodized evolution not periodic (residual {per:.2e})", residual=per)
    samples = vt[:-1]
    if samples.ndim - 2 == 3:
        return GridMap.torus(samples)
    return samples  # 4d (t, k1, k2, k3): returned raw, only slices are used


def band_projector(e: EvolutionGrid, g1: GapSpec, g2: GapSpec, tol: float = 1e-9) -> np.ndarray:
    """``h_{eps'} - h_eps``: projector on quasienergies between the two cuts.

    Verified idempotent and equal to the eigenprojector of ``u(2 pi, k)``
    on phases in ``(eps, eps')``.
    """
    if g2.epsilon < g1.epsilon:
        g1, g2 = g2, g1
    p = effective_h(e, g2) - effective_h(e, g1)
    idem = float(np.abs(p @ p - p).max())
    if idem > tol:
        raise InputError(f"band projector not idempotent ({idem:.2e})")
    phi, z = unitary_eig(e.floquet)
    q = np.mod(-phi - g1.epsilon, TWO_PI)  # phase above the first cut
    inside = (q < g2.epsilon - g1.epsilon).astype(float)
    direct = (z * inside[..., None, :]) @ dagger(z)
    dev = float(np.abs(direct - p).max())
    if dev > 1e-8:
        raise InputError(f"band projector differs from eigenprojector ({dev:.2e})")
    return p
