"""Synthetic equivariant maps shared by several test modules."""
import numpy as np

from gerbeholo.equivariant import AntiUnitary
from gerbeholo.wz import GridMap

SIGMA = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
GAMMA = {(a, b): np.kron(SIGMA[a], SIGMA[b]) for a in range(4) for b in range(4)}
THETA = AntiUnitary.spin_half(2)


def _split_by_parity():
    even, odd = [], []
    for key, g in GAMMA.items():
        if key == (0, 0):
            continue
        (even if np.allclose(THETA.conj_map(g), g) else odd).append(key)
    return even, odd


EVEN, ODD = _split_by_parity()


def equivariant_exp_map(n: int, seed: int = 0, noise: float = 0.15, split: float = 0.0) -> GridMap:
    """``exp(i h(k))`` with ``Theta h(k) Theta^-1 = -h(-k)``, so that ``u(-k) = Theta u(k)``.

    Theta-odd matrices get even coefficient functions and Theta-even
    matrices odd ones; the spectrum of ``h`` stays away from 0 and pi.
    ``split`` adds a constant spin term commuting with the clean part,
    which separates the eigenphases into two conjugate band pairs.
    """
    rng = np.random.default_rng(seed)
    k = 2 * np.pi * np.arange(n) / n
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    h = (0.9 * GAMMA[(0, 2)] + 0.7 * np.sin(K1)[..., None, None] * GAMMA[(0, 1)]
         + 0.7 * np.sin(K2)[..., None, None] * GAMMA[(0, 3)] + split * GAMMA[(3, 0)])
    for key in ODD:
        h = h + noise * rng.normal() * np.cos(K1 + rng.integers(2) * K2)[..., None, None] * GAMMA[key]
    for key in EVEN:
        h = h + noise * rng.normal() * np.sin(K2 - rng.integers(2) * K1)[..., None, None] * GAMMA[key]
    w, v = np.linalg.eigh(h)
    return GridMap.torus((v * np.exp(1j * w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2)))
