"""Tight-binding Bloch models, flattened Fermi unitaries and a Wilson-loop Z2 oracle.

``h(k) = sum_R exp(i k.R) t_R`` with ``t_{-R} = t_R^dagger``.  Models are
read from declarative JSON documents (format ``model-v1``):

.. code-block:: json

    {"format": "model-v1", "name": "...", "bands": 4, "dimension": 2,
     "fermi_energy": 0.0,
     "hoppings": [{"R": [0, 0], "re": [[...]], "im": [[...]]}, ...],
     "parameters": {"m": {"value": 1.0, "re": [[...]], "im": [[...]]}},
     "theta": {"re": [[...]], "im": [[...]], "sign": -1},
     "symmetric": true}

A parameter adds ``value * matrix`` to the on-site term.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .equivariant import AntiUnitary
from .errors import AxisInconsistent, GapClosedAtFermi, InputError, UnstableFlow
from .numerics import TOL, dagger
from .wz import GridMap

TWO_PI = 2.0 * np.pi
ZOO_DIR = Path(__file__).parent / "zoo"


def _matrix(doc, ptr: str, n: int) -> np.ndarray:
    try:
        re = np.asarray(doc["re"], dtype=float)
        im = np.asarray(doc.get("im", np.zeros((n, n))), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{ptr}: malformed matrix ({exc})", pointer=ptr) from None
    # check both parts, broadcasting would hide a scalar-shaped block
    for part in (re, im):
        if part.shape != (n, n):
            raise InputError(f"{ptr}: shape {part.shape}, expected {(n, n)}", pointer=ptr)
    return re + 1j * im


def _matrix_doc(a) -> dict:
    a = np.asarray(a)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def kgrid(n: int) -> np.ndarray:
    return TWO_PI * np.arange(n) / n


@dataclass
class BlochModel:
    """Hopping table with Fermi energy and time reversal."""

    N: int
    dim: int
    hoppings: dict
    fermi_energy: float
    theta: AntiUnitary
    symmetric: bool = True
    name: str = ""
    parameters: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)

    def __post_init__(self):
        self.hoppings = {tuple(int(x) for x in R): np.asarray(t, dtype=complex)
                         for R, t in self.hoppings.items()}
        for R, t in self.hoppings.items():
            if len(R) != self.dim:
                raise InputError(f"displacement {R} does not have dimension {self.dim}")
            mR = tuple(-x for x in R)
            partner = self.hoppings.get(mR)
            if partner is None or np.abs(partner - dagger(t)).max() > TOL.hermitian:
                raise InputError(f"hopping at {mR} must be the adjoint of the one at {R}")

    # construction -----------------------------------------------------
    @classmethod
    def from_json(cls, doc: dict) -> "BlochModel":
        if doc.get("format") not in ("model-v1", "model-v2"):
            raise InputError("not a model-v1 document", pointer="/format")
        try:
            n, dim = int(doc["bands"]), int(doc["dimension"])
        except (KeyError, TypeError, ValueError):
            raise InputError("bands and dimension are required", pointer="/bands") from None
        hop = {}
        for j, h in enumerate(doc.get("hoppings", [])):
            R = tuple(h["R"])
            hop[R] = hop.get(R, 0) + _matrix(h, f"/hoppings/{j}", n)
        params = {}
        for key, p in doc.get("parameters", {}).items():
            params[key] = (float(p["value"]), _matrix(p, f"/parameters/{key}", n))
        th = doc.get("theta")
        if th is None:
            raise InputError("theta is required", pointer="/theta")
        theta = AntiUnitary(_matrix(th, "/theta", n), int(th.get("sign", -1)))
        return cls(n, dim, hop, float(doc.get("fermi_energy", 0.0)), theta,
                   bool(doc.get("symmetric", True)), doc.get("name", ""), params,
                   doc.get("expected", {}))

    def to_json(self) -> dict:
        return {
            "format": "model-v1", "name": self.name, "bands": self.N, "dimension": self.dim,
            "fermi_energy": self.fermi_energy,
            "hoppings": [dict(R=list(R), **_matrix_doc(t)) for R, t in sorted(self.hoppings.items())],
            "parameters": {k: dict(value=v, **_matrix_doc(a)) for k, (v, a) in self.parameters.items()},
            "theta": dict(sign=self.theta.sign, **_matrix_doc(self.theta.T)),
            "symmetric": self.symmetric, "expected": self.expected,
        }

    @classmethod
    def load(cls, path) -> "BlochModel":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def with_parameter(self, key: str, value: float) -> "BlochModel":
        out = copy.copy(self)
        out.parameters = dict(self.parameters)
        if key not in out.parameters:
            raise InputError(f"model has no parameter {key!r}")
        out.parameters[key] = (float(value), self.parameters[key][1])
        return out

    def onsite(self) -> np.ndarray:
        t = self.hoppings.get((0,) * self.dim, np.zeros((self.N, self.N), complex)).copy()
        for v, a in self.parameters.values():
            t = t + v * a
        return t

    # evaluation -------------------------------------------------------
    def h(self, *k) -> np.ndarray:
        """``h(k)`` for broadcastable momentum arrays ``k_1, ..., k_d``."""
        if len(k) != self.dim:
            raise InputError(f"expected {self.dim} momenta")
        k = np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in k])
        out = np.zeros(k[0].shape + (self.N, self.N), dtype=complex) + self.onsite()
        for R, t in self.hoppings.items():
            if not any(R):
                continue
            ph = np.exp(1j * sum(ki * Ri for ki, Ri in zip(k, R)))
            out = out + ph[..., None, None] * t
        return out

    def h_grid(self, n: int) -> np.ndarray:
        ks = np.meshgrid(*([kgrid(n)] * self.dim), indexing="ij")
        return self.h(*ks)

    def symmetry_residual(self, n: int = 8) -> float:
        h = self.h_grid(n)
        idx = np.ix_(*([(-np.arange(n)) % n] * self.dim))
        return float(np.abs(self.theta.conj_map(h) - h[idx]).max())

    def plane(self, axis: int, value: float) -> "BlochModel":
        """2d model on the plane ``k_axis = value`` (remaining axes in cyclic order)."""
        if self.dim != 3:
            raise InputError("planes are cut from 3d models")
        rest = [(axis + 1) % 3, (axis + 2) % 3]
        hop = {}
        for R, t in self.hoppings.items():
            R2 = (R[rest[0]], R[rest[1]])
            hop[R2] = hop.get(R2, 0) + np.exp(1j * value * R[axis]) * t
        name = f"{self.name}|k{axis + 1}={value:.4g}"
        return BlochModel(self.N, 2, hop, self.fermi_energy, self.theta, self.symmetric,
                          name, dict(self.parameters))


def load_zoo(name: str) -> dict:
    """Raw JSON document of a shipped model."""
    path = ZOO_DIR / f"{name}.json"
    if not path.exists():
        raise InputError(f"no shipped model named {name!r}")
    with open(path) as fh:
        return json.load(fh)


def zoo_model(name: str) -> BlochModel:
    return BlochModel.from_json(load_zoo(name))


def zoo_names() -> list[str]:
    return sorted(p.stem for p in ZOO_DIR.glob("*.json"))


# ----------------------------------------------------------------------
# flattened maps

@dataclass
class FlattenedMap:
    grid: GridMap
    rank: int
    gap: float


def fermi_projector(h: np.ndarray, fermi: float, gap_min: float = TOL.gap_tol):
    """Projector on states below ``fermi`` (cluster sums), rank and minimal distance to ``fermi``.

    Raises
    ------
    GapClosedAtFermi
        If an eigenvalue is within ``gap_min`` of ``fermi`` or the rank varies.
    """
    w, v = np.linalg.eigh(h)
    dist = np.abs(w - fermi).min(axis=-1)
    gap = float(dist.min())
    if gap < gap_min:
        at = np.unravel_index(int(np.argmin(dist)), dist.shape)
        raise GapClosedAtFermi(f"spectrum within {gap:.2e} of the Fermi energy",
                               at=tuple(int(x) for x in at), gap=gap)
    occ = (w < fermi)
    ranks = occ.sum(axis=-1)
    if ranks.min() != ranks.max():
        raise GapClosedAtFermi("occupied rank varies over the grid")
    p = (v * occ[..., None, :]) @ dagger(v)
    return p, int(ranks.flat[0]), gap


def sample_up(model: BlochModel, n: int, gap_min: float = TOL.gap_tol) -> FlattenedMap:
    """``u_p(k) = I - 2 p(k)`` on the ``n^d`` grid."""
    p, rank, gap = fermi_projector(model.h_grid(n), model.fermi_energy, gap_min)
    u = np.eye(model.N) - 2 * p
    return FlattenedMap(GridMap.torus(u), rank, gap)


# ----------------------------------------------------------------------
# Wilson-loop oracle

def occupied_frames(p: np.ndarray, rank: int) -> np.ndarray:
    """Orthonormal frames of a projector field (top ``rank`` eigenvectors)."""
    w, v = np.linalg.eigh(p)
    return v[..., -rank:]


def wilson_centres(frames: np.ndarray) -> np.ndarray:
    """Wannier-centre phases in ``[0, 1)`` of loops along axis 0.

    ``frames`` has shape ``(n_loop, n_lines, N, m)``; the loop is closed
    back to its first frame.  Gauge choices cancel in the product of
    overlap matrices.
    """
    n = frames.shape[0]
    W = np.broadcast_to(np.eye(frames.shape[-1], dtype=complex), frames.shape[1:2] + (frames.shape[-1],) * 2).copy()
    for j in range(n):
        M = dagger(frames[j]) @ frames[(j + 1) % n]
        u, s, vh = np.linalg.svd(M)
        W = W @ (u @ vh)
    ph = np.angle(np.linalg.eigvals(W)) / TWO_PI
    return np.sort(np.mod(ph, 1.0), axis=-1)


def _largest_gap_mid(x: np.ndarray) -> float:
    xs = np.sort(x)
    ext = np.concatenate([xs, [xs[0] + 1.0]])
    g = np.diff(ext)
    k = int(np.argmax(g))
    return float(np.mod(xs[k] + 0.5 * g[k], 1.0))


def z2_from_flow(wcc: np.ndarray) -> int:
    """Parity of Wannier-centre jumps over the largest-gap reference line.

    ``wcc`` has shape ``(n_lines, m)`` for lines from ``k2 = 0`` to ``pi``.
    At each step the centres of the new line lying between the old and
    new gap midpoints are counted; with an even number of centres the
    parity of that count does not depend on which arc is used.
    """
    mids = [_largest_gap_mid(w) for w in wcc]
    count = 0
    for i in range(len(wcc) - 1):
        lo, hi = sorted((mids[i], mids[i + 1]))
        x = wcc[i + 1]
        count += int(np.sum((x >= lo) & (x < hi)))
    return count % 2


def _wcc_bit(model: BlochModel, n: int) -> int:
    p, rank, _ = fermi_projector(model.h_grid(n), model.fermi_energy)
    if rank % 2:
        raise InputError("Kramers pairs need an even occupied rank")
    frames = occupied_frames(p[:, : n // 2 + 1], rank)
    return z2_from_flow(wilson_centres(frames))


def wcc_z2_oracle(model: BlochModel, n: int = 48, check_doubling: bool = True) -> int:
    """Z2 bit of a 2d model from the flow of Wilson-loop eigenphases over half the zone.

    Raises
    ------
    UnstableFlow
        If the bit changes when the grid is doubled.
    """
    if model.dim != 2:
        raise InputError("wcc oracle needs a 2d model")
    if model.theta.sign != -1:
        raise InputError("wcc oracle needs theta^2 = -I")
    bit = _wcc_bit(model, n)
    if check_doubling and _wcc_bit(model, 2 * n) != bit:
        raise UnstableFlow("Z2 bit changes under grid doubling", n=n)
    return bit


def z2_of_projector(p: np.ndarray, rank: int) -> int:
    """Wilson-loop Z2 bit of a projector field sampled on an ``n x n`` grid."""
    n = p.shape[0]
    frames = occupied_frames(p[:, : n // 2 + 1], rank)
    return z2_from_flow(wilson_centres(frames))


@dataclass
class StrongZ2:
    bit: int
    planes: dict


def strong_z2_oracle(model: BlochModel, n: int = 32, axes=(1, 2, 3)) -> StrongZ2:
    """Strong bit ``nu(k_a = 0) + nu(k_a = pi) mod 2``, compared over axes.

    Raises
    ------
    AxisInconsistent
        If different axes give different bits.
    """
    if model.dim != 3:
        raise InputError("strong oracle needs a 3d model")
    planes, bits = {}, {}
    for a in axes:
        b0 = wcc_z2_oracle(model.plane(a - 1, 0.0), n)
        bp = wcc_z2_oracle(model.plane(a - 1, np.pi), n)
        planes[a] = (b0, bp)
        bits[a] = (b0 + bp) % 2
    if len(set(bits.values())) != 1:
        raise AxisInconsistent(f"strong bits differ between axes: {bits}", bits=bits)
    return StrongZ2(next(iter(bits.values())), planes)
