"""Dense complex linear algebra for small matrices.

Hermitian eigensystems, unitary logarithms with a chosen branch cut, the
Pfaffian and determinant-phase winding along sampled loops.  Functions
accept single matrices or stacks (``(..., n, n)``) where noted.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from .errors import CutCollision, InputError, UnderResolved

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Tolerances:
    """Central record of numerical tolerances used across the package."""

    hermitian: float = 1e-10
    antisymmetric: float = 1e-9
    unitary: float = 1e-10
    gap_tol: float = 1e-6          # branch-cut distance for unitary_log_branch
    winding_residue: float = 0.05  # det_phase_winding rounding residue
    quantum_residue: float = 0.05  # quantization of wz integrals
    mid_tol: float = 1e-3          # involutive extension midgap distance
    cut_gap_tol: float = 1e-3      # gapped extension cut distance
    equivariance: float = 1e-8
    exact: float = 1e-12           # combinatorial identities


TOL = Tolerances()


class EigenSystem(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


def dagger(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2).conj()


def is_hermitian(a, tol: float = TOL.hermitian) -> bool:
    a = np.asarray(a)
    return bool(np.all(np.abs(a - dagger(a)) <= tol))


def is_unitary(a, tol: float = TOL.unitary) -> bool:
    a = np.asarray(a)
    eye = np.eye(a.shape[-1])
    return bool(np.all(np.abs(a @ dagger(a) - eye) <= tol))


def is_antisymmetric(a, tol: float = TOL.antisymmetric) -> bool:
    a = np.asarray(a)
    return bool(np.all(np.abs(a + np.swapaxes(a, -1, -2)) <= tol))


def _square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise InputError(f"expected square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError("matrix has non-finite entries")
    return a


def hermitian_eig(h, tol: float = TOL.hermitian) -> EigenSystem:
    """Eigen-decomposition of a Hermitian matrix (or stack).

    The input is symmetrized before LAPACK ``heevd`` is called, so the
    result is deterministic for identical input bits.

    Raises
    ------
    InputError
        If the input is not square or deviates from Hermitian by more
        than ``tol`` (relative to its largest entry).
    """
    h = _square(np.asarray(h, dtype=complex))
    scale = max(1.0, float(np.abs(h).max(initial=0.0)))
    dev = np.abs(h - dagger(h)).max(initial=0.0)
    if dev > tol * scale:
        raise InputError(f"matrix is not Hermitian (deviation {dev:.3e})")
    w, v = np.linalg.eigh(0.5 * (h + dagger(h)))
    return EigenSystem(w, v)


def expm_hermitian(h, t: complex = 1.0) -> np.ndarray:
    """``exp(-i t h)`` for Hermitian ``h`` via its eigensystem (exactly unitary for real t)."""
    w, v = hermitian_eig(h)
    return (v * np.exp(-1j * t * w)[..., None, :]) @ dagger(v)


def unitary_eig(u) -> tuple[np.ndarray, np.ndarray]:
    """Eigenphases and an orthonormal eigenbasis of a unitary matrix.

    Returns ``(phi, z)`` with ``u = z diag(exp(1j*phi)) z^dagger`` and
    ``phi`` in ``(-pi, pi]``.  Uses the complex Schur form, which is
    diagonal for normal matrices and well conditioned under degeneracy.
    """
    u = _square(np.asarray(u, dtype=complex))
    if u.ndim == 2:
        t, z = scipy.linalg.schur(u, output="complex")
        return np.angle(np.diag(t)), z
    flat = u.reshape(-1, *u.shape[-2:])
    phis = np.empty(flat.shape[:2])
    zs = np.empty_like(flat)
    for n, m in enumerate(flat):
        t, z = scipy.linalg.schur(m, output="complex")
        phis[n] = np.angle(np.diag(t))
        zs[n] = z
    return phis.reshape(u.shape[:-1]), zs.reshape(u.shape)


def eigenphases(u) -> np.ndarray:
    """Eigenphases in ``(-pi, pi]`` of a unitary matrix or stack (unsorted)."""
    u = np.asarray(u, dtype=complex)
    return np.angle(np.linalg.eigvals(u))


def unitary_log_branch(u, epsilon: float, gap_tol: float = TOL.gap_tol) -> np.ndarray:
    """Effective Hamiltonian of ``u`` with the branch cut at ``exp(-1j*epsilon)``.

    Every eigenvalue of ``u`` is written as ``exp(-1j*phi)`` with
    ``phi`` in ``(epsilon, epsilon + 2*pi)``; the returned Hermitian ``h``
    has eigenvalue ``phi / 2pi`` on that eigenvector, so that
    ``expm(-2j*pi*h) == u``.

    Parameters
    ----------
    u : unitary matrix
    epsilon : float in ``[-2pi, 0)``
    gap_tol : minimal angular distance (radians) of the spectrum to the cut

    Raises
    ------
    CutCollision
        If an eigenphase lies within ``gap_tol`` of the cut.
    """
    if not (-TWO_PI <= epsilon < 0.0):
        raise InputError(f"epsilon={epsilon} outside [-2pi, 0)")
    theta, z = unitary_eig(u)
    phi = epsilon + np.mod(-theta - epsilon, TWO_PI)
    off = np.mod(phi - epsilon, TWO_PI)
    dist = np.minimum(off, TWO_PI - off)
    if dist.min() < gap_tol:
        k = int(np.argmin(dist))
        raise CutCollision(
            f"eigenphase {phi.flat[k]:.6g} within {gap_tol:g} of the cut at {epsilon:.6g}",
            eigenphase=float(phi.flat[k]), epsilon=float(epsilon), distance=float(dist.min()))
    h = (z * (phi / TWO_PI)[..., None, :]) @ dagger(z)
    return 0.5 * (h + dagger(h))


def principal_log(w: np.ndarray, max_angle: float = 0.5 * np.pi) -> tuple[np.ndarray, float]:
    """Principal logarithm of a stack of unitaries near the identity.

    Uses the Cayley transform ``K = (W - I)(W + I)^-1``, which is
    anti-Hermitian for unitary ``W``; its eigenvalues ``i t`` give the
    eigenphases ``2 arctan t``.  This stays stable when eigenvalues are
    degenerate.

    Returns
    -------
    log : ndarray
        Anti-Hermitian ``log(W)``.
    worst : float
        Largest absolute eigenphase encountered.

    Raises
    ------
    UnderResolved
        If any eigenphase reaches ``max_angle``.
    """
    n = w.shape[-1]
    eye = np.eye(n)
    try:
        k = np.linalg.solve(dagger(w + eye), dagger(w - eye))
    except np.linalg.LinAlgError:
        raise UnderResolved("neighbour transition has an eigenphase at pi",
                            worst_angle=float(np.pi)) from None
    k = dagger(k)
    herm = -1j * k
    t, v = np.linalg.eigh(0.5 * (herm + dagger(herm)))
    ph = 2.0 * np.arctan(t)
    worst = float(np.abs(ph).max(initial=0.0))
    if not np.isfinite(worst) or worst >= max_angle:
        raise UnderResolved(f"neighbour eigenphase {worst:.3f} exceeds {max_angle:.3f}",
                            worst_angle=worst)
    log = (v * (1j * ph)[..., None, :]) @ dagger(v)
    return log, worst


def pfaffian(a) -> complex:
    """Pfaffian of an antisymmetric matrix by skew LTL^T elimination with pivoting.

    Parlett-Reid style: at step k the largest entry of column k below the
    sub-diagonal is pivoted into position (k+1, k), then rows and columns
    k+2.. are updated by a rank-2 skew correction.
    """
    a = _square(np.array(a, dtype=complex))
    n = a.shape[0]
    if n % 2:
        raise InputError("Pfaffian of an odd-dimensional matrix")
    if not is_antisymmetric(a, TOL.antisymmetric * max(1.0, np.abs(a).max(initial=0.0))):
        raise InputError("matrix is not antisymmetric")
    a = 0.5 * (a - a.T)
    pf = 1.0 + 0j
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.abs(a[k + 1:, k]).argmax())
        if kp != k + 1:
            a[[k + 1, kp], k:] = a[[kp, k + 1], k:]
            a[k:, [k + 1, kp]] = a[k:, [kp, k + 1]]
            pf = -pf
        if a[k + 1, k] == 0:
            return 0j
        pf *= a[k, k + 1]
        if k + 2 < n:
            tau = a[k, k + 2:] / a[k, k + 1]
            col = a[k + 2:, k + 1].copy()
            a[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return complex(pf)


def det_phase_winding(loop: Sequence[np.ndarray] | np.ndarray,
                      residue_tol: float = TOL.winding_residue) -> int:
    """Winding number of ``det u`` along a closed sampled loop.

    ``loop`` lists the samples once; the step from the last sample back
    to the first is included.

    Raises
    ------
    UnderResolved
        If consecutive determinants differ too much for a principal phase
        increment to be trusted, or the summed increments are not close
        to a multiple of 2pi.
    """
    mats = np.asarray(loop, dtype=complex)
    if mats.ndim == 1:
        mats = mats[:, None, None]
    d = np.linalg.det(mats)
    d = d / np.abs(d)
    ratio = np.roll(d, -1) / d
    if np.any(np.abs(ratio - 1.0) >= 1.0):
        raise UnderResolved("determinant jumps between consecutive loop samples")
    total = np.angle(ratio).sum() / TWO_PI
    w = int(np.rint(total))
    if abs(total - w) > residue_tol:
        raise UnderResolved(f"winding residue {abs(total - w):.3g}", value=float(total))
    return w
