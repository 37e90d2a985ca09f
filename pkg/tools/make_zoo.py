"""Regenerate the shipped model documents in src/gerbeholo/zoo.

Models are written as plain hopping tables; this script only exists so
the matrices are reproducible.  Run from the repository root.
"""
import json
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "gerbeholo" / "zoo"

s0 = np.eye(2)
sx = np.array([[0, 1], [1, 0]], complex)
sy = np.array([[0, -1j], [1j, 0]])
sz = np.diag([1.0, -1.0]).astype(complex)
TR_SPIN = np.kron(1j * sy, s0)  # spin (x) orbital


def mat(a):
    a = np.asarray(a, complex)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def hop_table(terms):
    """terms: dict R -> matrix; adds the adjoint partners."""
    out = {}
    for R, t in terms.items():
        out[R] = out.get(R, 0) + t
        mR = tuple(-x for x in R)
        if mR != R:
            out[mR] = out.get(mR, 0) + t.conj().T
    return [dict(R=list(R), **mat(t)) for R, t in sorted(out.items())]


def sin_term(axis, dim, g, scale=1.0):
    R = tuple(1 if a == axis else 0 for a in range(dim))
    return R, scale * g / 2j


def cos_term(axis, dim, g, scale=1.0):
    R = tuple(1 if a == axis else 0 for a in range(dim))
    return R, scale * g / 2


def doc(name, n, dim, hops, params, theta, expected, extra=None):
    d = {"format": "model-v1", "name": name, "bands": n, "dimension": dim,
         "fermi_energy": 0.0, "hoppings": hops,
         "parameters": {k: dict(value=v, **mat(a)) for k, (v, a) in params.items()},
         "theta": dict(sign=-1, **mat(theta)), "symmetric": True, "expected": expected}
    if extra:
        d.update(extra)
    return d


def add(terms, R, t):
    terms[R] = terms.get(R, 0) + t


def bhz_terms(scale=1.0, rashba=0.0):
    G1, G2, G3 = np.kron(sz, sx), np.kron(s0, sy), np.kron(s0, sz)
    t = {}
    for R, m in (sin_term(0, 2, G1, scale), sin_term(1, 2, G2, scale),
                 cos_term(0, 2, -G3, scale), cos_term(1, 2, -G3, scale)):
        add(t, R, m)
    if rashba:
        add(t, (0, 0), rashba * scale * np.kron(sx, sy))
    return t, scale * G3


def dirac3_terms(scale=1.0):
    G = [np.kron(s, sx) for s in (sx, sy, sz)]
    G0 = np.kron(s0, sz)
    t = {}
    for a in range(3):
        for R, m in (sin_term(a, 3, G[a], scale), cos_term(a, 3, -G0, scale)):
            add(t, R, m)
    return t, scale * G0


def kane_mele_terms(t1=1.0, lso=0.06, lv=0.1):
    # basis spin (x) sublattice (A, B); lattice vectors a1, a2 with B = A + delta
    sA, sB = np.diag([1.0, 0]), np.diag([0, 1.0])
    AB = np.array([[0, 1], [0, 0]], complex)  # |A><B|
    t = {}
    for R in ((0, 0), (1, 0), (0, 1)):
        # A(0) <- B(R): amplitude t1; hop_table supplies the reverse
        m = np.kron(s0, t1 * AB)
        add(t, R, m + m.conj().T if R == (0, 0) else m)
    # spin-orbit next-nearest neighbours: i lso nu sz, nu = +1 for a1, -a2, a2 - a1 on A
    for R, nu in (((1, 0), 1), ((0, -1), 1), ((-1, 1), 1)):
        add(t, R, 1j * lso * nu * (np.kron(sz, sA) - np.kron(sz, sB)))
    onsite = np.kron(s0, np.diag([1.0, -1.0]))
    return t, onsite, lv


def generic_even(scale, seed=0):
    """Fixed Hermitian 4x4 matrix commuting with time reversal, breaking accidental symmetries."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    x = x + x.conj().T
    x = 0.5 * (x + TR_SPIN @ x.conj() @ TR_SPIN.conj().T)
    return scale * x / np.abs(np.linalg.eigvalsh(x)).max()


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    models = {}
    G3 = np.kron(s0, sz)
    models["atomic"] = doc("atomic", 4, 2, hop_table({(0, 0): 0.5 * G3}), {}, TR_SPIN,
                           {"km": 0})
    models["atomic3d"] = doc("atomic3d", 4, 3, hop_table({(0, 0, 0): 0.5 * G3}), {}, TR_SPIN,
                             {"strong": 0})
    t, g3 = bhz_terms(rashba=0.2)
    models["bhz"] = doc("bhz", 4, 2, hop_table(t), {"m": (1.0, g3)}, TR_SPIN,
                        {"km": 1, "note": "inverted for 0 < |m| < 2 at zero coupling"})
    z4 = np.zeros((4, 4))
    blk = {R: np.block([[m, z4], [z4, m]]) for R, m in t.items()}
    models["bhz_double"] = doc("bhz_double", 8, 2, hop_table(blk),
                               {"m": (1.0, np.block([[g3, z4], [z4, g3]]))},
                               np.block([[TR_SPIN, z4], [z4, TR_SPIN]]), {"km": 0})
    t, on, lv = kane_mele_terms()
    models["kane_mele"] = doc("kane_mele", 4, 2, hop_table(t), {"lv": (lv, on)}, TR_SPIN,
                              {"km": 1})
    t, g0 = dirac3_terms()
    models["layered3d"] = doc("layered3d", 4, 3, hop_table(t), {"m": (2.0, g0)}, TR_SPIN,
                              {"strong": 1, "planes": {"k3=0": 1, "k3=pi": 0}})
    # driven models: scaled static part plus one harmonic drive
    X = np.kron(sz, s0)
    s = 0.12
    t, g3 = bhz_terms(scale=s, rashba=0.2)
    # each harmonic coefficient is itself time-reversal symmetric: Theta(h_1(k)) = h_1(-k)
    G1 = np.kron(sz, sx)
    h1 = 0.5 * (0.4 * s * G3 - 1j * 0.4 * s * X) + generic_even(0.2 * s)
    h1x = 0.3 * s * G3 + 0.3j * s * G1
    models["driven_bhz"] = doc("driven_bhz", 4, 2, hop_table(t), {"m": (1.0, g3)}, TR_SPIN, {},
                               {"format": "model-v2",
                                "harmonics": [{"n": 1, "hoppings": [dict(R=[0, 0], **mat(h1)),
                                                                    dict(R=[1, 0], **mat(h1x))]}]})
    models["static_bhz"] = doc("static_bhz", 4, 2, hop_table(t), {"m": (1.0, g3)}, TR_SPIN, {},
                               {"format": "model-v2", "harmonics": []})
    s3 = 0.1
    t, g0 = dirac3_terms(scale=s3)
    h1 = 0.5 * (0.25 * s3 * np.kron(s0, sz) - 1j * 0.25 * s3 * X) + generic_even(0.2 * s3, 1)
    models["driven_layered3d"] = doc("driven_layered3d", 4, 3, hop_table(t), {"m": (2.0, g0)},
                                     TR_SPIN, {},
                                     {"format": "model-v2",
                                      "harmonics": [{"n": 1, "hoppings": [dict(R=[0, 0, 0], **mat(h1))]}]})
    for name, d in models.items():
        with open(OUT / f"{name}.json", "w") as fh:
            json.dump(d, fh, indent=1)
        print("wrote", name)


if __name__ == "__main__":
    main()
