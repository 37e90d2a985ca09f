"""End-to-end invariant computations used by the command line.

Each function returns a plain dict (later wrapped into a ``report-v1``
document) and raises a :class:`GerbeholoError` subclass on failure.  An
optional :class:`GridCache` persists the sampled unitary grids.
"""
from __future__ import annotations

import hashlib
import json
import os
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .bands import BlochModel, sample_up, strong_z2_oracle, wcc_z2_oracle, z2_of_projector
from .equivariant import check_equivariance, extend_auto, lift_double_cover
from .errors import InputError, NotQuantized, OracleMismatch, RelationViolation
from .floquet import (DrivenModel, GapSpec, band_projector, effective_h, evolve, find_gaps,
                      gap_margin, periodized)
from .numerics import TOL, dagger, det_phase_winding
from .wz import GridMap, boundary_torus, index3d_un, read_grb1, sqrt_holonomy_via_extension, write_grb1

TWO_PI = 2.0 * np.pi


# ----------------------------------------------------------------------
# cache

def config_hash(doc) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


class GridCache:
    """GRB1 files keyed by a content hash of (model, grid parameters, stage).

    A small JSON sidecar holds scalar metadata (gap, rank) of each grid.
    Writes go through a temporary file under an exclusive lock.
    """

    def __init__(self, root=None):
        root = root or os.environ.get("GERBEHOLO_CACHE", ".gerbeholo-cache")
        self.root = Path(root)

    def path(self, key: dict) -> Path:
        return self.root / f"{config_hash(key)}.grb1"

    @contextmanager
    def _lock(self):
        import fcntl
        self.root.mkdir(parents=True, exist_ok=True)
        fd = os.open(self.root / ".lock", os.O_CREAT | os.O_RDWR)
        try:
            fcntl.flock(fd, fcntl.LOCK_EX)
            yield
        finally:
            os.close(fd)

    def get_or_compute(self, key: dict, compute):
        """``(GridMap, meta)`` from disk, or from ``compute()`` and then stored."""
        p = self.path(key)
        side = p.with_suffix(".json")
        if p.exists() and side.exists():
            with open(side) as fh:
                return read_grb1(p), json.load(fh)
        m, meta = compute()
        with self._lock():
            tmp = p.with_suffix(".tmp")
            write_grb1(m, tmp)
            os.replace(tmp, p)
            with open(side, "w") as fh:
                json.dump(meta, fh)
        return m, meta


def _cached(cache, key, compute):
    return compute() if cache is None else cache.get_or_compute(key, compute)


def _sampled_up(model: BlochModel, n: int, cache):
    def compute():
        fm = sample_up(model, n)
        return fm.grid, {"fermi_gap": fm.gap, "rank": fm.rank}
    return _cached(cache, {"stage": "u_p", "model": model.to_json(), "n": n}, compute)


# ----------------------------------------------------------------------
# 2d Fu-Kane-Mele bit

def _bit(integral: float, tol: float = TOL.quantum_residue):
    x = integral / TWO_PI
    res = abs(x - np.rint(x))
    if res > tol:
        raise NotQuantized(f"integral/2pi = {x:.4f} not near an integer", value=integral, residue=res)
    return int(np.rint(x)) % 2, float(res)


def km_of_map(u: GridMap, theta, nr: int = 24, richardson: bool = True, seed: int = 0) -> dict:
    """Parity of ``(1/2pi) int psi^* H`` over an equivariant extension of an involutive T2 map."""
    ext = extend_auto(u, theta, nr, seed=seed)
    r = sqrt_holonomy_via_extension(ext.pieces, theta.T, boundary_trivial=False,
                                    richardson=richardson)
    bit, res = _bit(r.integral)
    return {"bit": bit, "integral": r.integral, "residue": res, "phase": float(np.angle(r.value)),
            "strategy": ext.strategy, "extension_margin": ext.margin}


def km2d(model: BlochModel, n: int = 48, nr: int = 24, oracle: bool = False,
         cache: GridCache | None = None, richardson: bool = True, seed: int = 0) -> dict:
    """2d bit from an extension of ``u_p``, optionally compared with the Wilson-loop oracle.

    Raises
    ------
    OracleMismatch
        If ``oracle`` is set and the two bits differ.
    """
    if model.dim != 2:
        raise InputError("km2d needs a 2d model")
    model.theta.require_fermionic()
    up, meta = _sampled_up(model, n, cache)
    eq = check_equivariance(up, model.theta)
    out = km_of_map(up, model.theta, nr, richardson, seed)
    out.update(grid={"n": n, "radial": nr}, equivariance=eq, **meta)
    if oracle:
        ob = wcc_z2_oracle(model, n)
        out["oracle"] = ob
        if ob != out["bit"]:
            raise OracleMismatch(f"extension bit {out['bit']} != Wilson-loop bit {ob}",
                                 bit=out["bit"], oracle=ob)
    return out


# ----------------------------------------------------------------------
# 3d strong bit from the 3d index

def _is_constant(m: GridMap, tol: float = 1e-12) -> bool:
    return float(np.abs(m.samples - m.samples[(0,) * m.ndim]).max()) < tol


def index_on_axis(u: GridMap, theta, axis: int, nr: int = 24, richardson: bool = True,
                  seed: int = 0, cut=None) -> dict:
    """3d index of an equivariant T3 map with ``F`` the half ``0 <= k_axis <= pi`` (0-based axis)."""
    n = u.shape[axis]
    exts = {}
    for key, idx in (("pi", n // 2), ("0", 0)):
        face = boundary_torus(u, axis, idx)
        exts[key] = None if _is_constant(face) else extend_auto(face, theta, nr, cut, seed)
    r = index3d_un(u, axis, None if exts["pi"] is None else exts["pi"].pieces,
                   None if exts["0"] is None else exts["0"].pieces, theta.T,
                   richardson=richardson)
    return {"sign": r.sign, "bit": 0 if r.sign > 0 else 1, "phase": r.phase,
            "distance": r.distance, "residue": r.residue, "integral_F": r.integral_F,
            "integral_pi": r.integral_pi, "integral_0": r.integral_0,
            "strategies": {k: (None if e is None else e.strategy) for k, e in exts.items()}}


def km3d(model: BlochModel, n: int = 32, nr: int = 24, axes=(1, 3), oracle: bool = False,
         cache: GridCache | None = None, richardson: bool = True, seed: int = 0) -> dict:
    """Strong bit as a 3d index of ``u_p``.

    For every cut axis the bit is compared with the sum of the 2d bits of
    the planes ``k_axis = 0`` and ``k_axis = pi``, and all axes must agree.

    Raises
    ------
    RelationViolation
        If a plane relation fails or two cut axes disagree.
    OracleMismatch
        If ``oracle`` is set and the strong Wilson-loop bit differs.
    """
    if model.dim != 3:
        raise InputError("km3d needs a 3d model")
    model.theta.require_fermionic()
    up, meta = _sampled_up(model, n, cache)
    per_axis = {}
    for a in axes:
        res = index_on_axis(up, model.theta, a - 1, nr, richardson, seed)
        planes = {}
        for label, idx in (("0", 0), ("pi", n // 2)):
            face = boundary_torus(up, a - 1, idx)
            planes[label] = km_of_map(face, model.theta, nr, richardson, seed)["bit"]
        res["planes"] = planes
        rel = (planes["0"] + planes["pi"]) % 2
        if rel != res["bit"]:
            raise RelationViolation(f"axis {a}: index bit {res['bit']} != plane sum {rel}",
                                    axis=a, planes=planes)
        per_axis[str(a)] = res
    bits = {a: r["bit"] for a, r in per_axis.items()}
    if len(set(bits.values())) != 1:
        raise RelationViolation(f"cut axes disagree: {bits}", bits=bits)
    out = {"bit": next(iter(bits.values())), "axes": per_axis,
           "grid": {"n": n, "radial": nr}, **meta}
    if oracle:
        s = strong_z2_oracle(model, n)
        out["oracle"] = s.bit
        if s.bit != out["bit"]:
            raise OracleMismatch(f"index bit {out['bit']} != oracle bit {s.bit}",
                                 bit=out["bit"], oracle=s.bit)
    return out


# ----------------------------------------------------------------------
# Floquet

def select_gaps(e, epsilon="auto") -> list[GapSpec]:
    """Requested gaps sorted by ``epsilon``; ``"auto"`` takes every detected gap midpoint."""
    if epsilon is None or epsilon == "auto":
        return sorted(find_gaps(e), key=lambda g: g.epsilon)
    eps = epsilon if isinstance(epsilon, (list, tuple)) else [epsilon]
    gaps = [GapSpec(float(x), gap_margin(e, float(x))) for x in eps]
    for g in gaps:
        if g.margin < TOL.cut_gap_tol:
            raise InputError(f"epsilon={g.epsilon} is not inside a quasienergy gap "
                             f"(margin {g.margin:.2e})")
    return sorted(gaps, key=lambda g: g.epsilon)


def floquet_index(e, g: GapSpec, nr: int = 24, cut=None, richardson: bool = True,
                  seed: int = 0) -> dict:
    """``K_eps`` of a 2d driven model from its periodized evolution on ``(t, k1, k2)``."""
    theta = e.model.theta
    v = periodized(e, g)
    eq = check_equivariance(v, theta)
    r = index_on_axis(v, theta, 0, nr, richardson, seed, cut)
    r.update(epsilon=g.epsilon, gap_margin=g.margin, equivariance=eq)
    return r


def _enclosed_band(e, a: GapSpec, b: GapSpec, nr, richardson, seed, oracle):
    p = band_projector(e, a, b)
    rank = int(round(np.trace(p[0, 0]).real))
    up = GridMap.torus(np.eye(e.model.N) - 2 * p)
    km = km_of_map(up, e.model.theta, nr, richardson, seed)
    entry = {"epsilon": a.epsilon, "epsilon_prime": b.epsilon, "rank": rank,
             "km": km["bit"], "km_residue": km["residue"], "km_strategy": km["strategy"]}
    if oracle and rank > 0 and rank % 2 == 0:
        entry["oracle"] = z2_of_projector(p, rank)
        if entry["oracle"] != km["bit"]:
            raise OracleMismatch("band-projector bit disagrees with the Wilson-loop oracle",
                                 entry=entry)
    return entry


def floquet2d(dm: DrivenModel, n: int = 32, steps: int = 256, nt: int = 32, nr: int = 24,
              epsilon="auto", cut=None, oracle: bool = True, richardson: bool = True,
              seed: int = 0) -> dict:
    """``K_eps`` for every requested gap, and ``K_eps' - K_eps`` against the enclosed bands.

    Raises
    ------
    RelationViolation
        If the difference of two adjacent ``K`` differs from the bit of the
        bands between the two gaps.
    """
    if dm.dim != 2:
        raise InputError("floquet2d needs a 2d driven model")
    dm.theta.require_fermionic()
    e = evolve(dm, n, steps, nt)
    gaps = select_gaps(e, epsilon)
    ks = [floquet_index(e, g, nr, cut, richardson, seed) for g in gaps]
    pairs = []
    for (a, ka), (b, kb) in zip(zip(gaps, ks), zip(gaps[1:], ks[1:])):
        entry = _enclosed_band(e, a, b, nr, richardson, seed, oracle)
        entry["difference"] = (kb["bit"] - ka["bit"]) % 2
        if entry["difference"] != entry["km"]:
            raise RelationViolation(f"K difference {entry['difference']} != enclosed-band bit "
                                    f"{entry['km']} for gaps {a.epsilon:.4f}, {b.epsilon:.4f}",
                                    entry=entry)
        pairs.append(entry)
    return {"gaps": ks, "pairs": pairs, "drift": e.drift,
            "grid": {"n": n, "steps": steps, "nt": nt, "radial": nr}}


def half_period_map(e, g: GapSpec) -> GridMap:
    """``v_eps(pi, k) = u(pi, k) exp(i pi h_eps(k))`` on ``T^3``; ``e`` needs an even ``nt``."""
    if e.nt % 2:
        raise InputError("the half-period snapshot needs an even snapshot count")
    w, v = np.linalg.eigh(effective_h(e, g))
    half = (v * np.exp(1j * np.pi * w)[..., None, :]) @ dagger(v)
    return GridMap.torus(e.at(e.nt // 2) @ half)


def floquet3d(dm: DrivenModel, n: int = 32, steps: int = 256, nr: int = 24, epsilon="auto",
              axis: int = 3, n2: int | None = None, nt: int = 32, cut=None,
              cache: GridCache | None = None, richardson: bool = True, seed: int = 0) -> dict:
    """Strong ``K^s_eps`` from ``v_eps(pi, .)`` and the weak bits of the planes ``k_axis = 0, pi``.

    Raises
    ------
    RelationViolation
        If the strong bit differs from the difference of the two weak bits.
    """
    if dm.dim != 3:
        raise InputError("floquet3d needs a 3d driven model")
    dm.theta.require_fermionic()
    e = evolve(dm, n, steps, nt=2)
    gaps = select_gaps(e, epsilon)
    out = {"gaps": [], "grid": {"n": n, "plane_n": n2 or n, "steps": steps, "nt": nt,
                                "radial": nr, "axis": axis}}
    harm = {str(k): {str(R): [np.asarray(t).real.tolist(), np.asarray(t).imag.tolist()]
                     for R, t in tab.items()} for k, tab in dm.harmonics.items()}
    for g in gaps:
        key = {"stage": "v_half", "model": dm.static.to_json(), "harmonics": harm,
               "n": n, "steps": steps, "epsilon": g.epsilon}
        vpi, _ = _cached(cache, key, lambda: (half_period_map(e, g), {}))
        strong = index_on_axis(vpi, dm.theta, axis - 1, nr, richardson, seed, cut)
        weak = {}
        for label, val in (("0", 0.0), ("pi", np.pi)):
            ep = evolve(dm.plane(axis - 1, val), n2 or n, steps, nt)
            weak[label] = floquet_index(ep, GapSpec(g.epsilon, gap_margin(ep, g.epsilon)),
                                        nr, cut, richardson, seed)["bit"]
        rel = (weak["pi"] - weak["0"]) % 2
        entry = {"epsilon": g.epsilon, "gap_margin": g.margin, "strong": strong["bit"],
                 "weak": weak, "strong_detail": strong}
        if rel != strong["bit"]:
            raise RelationViolation(f"strong bit {strong['bit']} != weak difference {rel}",
                                    entry=entry)
        out["gaps"].append(entry)
    return out


# ----------------------------------------------------------------------
# evenness of determinant windings

def det_windings(u: GridMap) -> tuple[int, int]:
    """Determinant winding along the ``k1`` and ``k2`` cycles through the origin."""
    return det_phase_winding(u.samples[:, 0]), det_phase_winding(u.samples[0, :])


def _lift_character(omega: np.ndarray) -> tuple[complex, float]:
    """``c = omega(-k) / conj(omega(k))`` and its spread over the grid.

    For an equivariant map ``det u(-k) = conj(det u(k))``, so ``c`` is a
    constant sign.
    """
    n1, n2 = omega.shape
    neg = omega[np.ix_((-np.arange(n1)) % n1, (-np.arange(n2)) % n2)]
    c = neg / np.conj(omega)
    return complex(c[0, 0]), float(np.abs(c - c[0, 0]).max())


def lift_parity_check(u: GridMap, theta, nr: int = 24, seed: int = 0) -> dict:
    """Even determinant windings, both double-cover lifts, and the bit.

    Each lift ``+-omega`` reports its square residual against ``det u`` and
    its time-reversal character.  The bit is computed once: the 3-form
    and the extension live on ``U(N)``, and both lifts project to ``u``.
    """
    _, omega = lift_double_cover(u)
    det = np.linalg.det(u.samples)
    det = det / np.abs(det)
    lifts = []
    for sign in (1, -1):
        w = sign * omega
        c, spread = _lift_character(w)
        lifts.append({"sign": sign, "character": [c.real, c.imag], "character_spread": spread,
                      "square_residual": float(np.abs(w * w - det).max())})
    agree = (abs(complex(*lifts[0]["character"]) - complex(*lifts[1]["character"])) < 1e-9
             and max(x["character_spread"] for x in lifts) < 1e-9)
    km = km_of_map(u, theta, nr, seed=seed)
    return {"windings": list(det_windings(u)), "bit": km["bit"], "residue": km["residue"],
            "lifts": lifts, "lift_independent": agree}
