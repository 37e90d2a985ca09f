import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from gerbeholo.errors import CutCollision, InputError, UnderResolved
from gerbeholo.numerics import (dagger, det_phase_winding, expm_hermitian, hermitian_eig,
                                pfaffian, principal_log, unitary_eig, unitary_log_branch)


def random_unitary(rng, n):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (a + dagger(a))


seeds = st.integers(0, 2**31 - 1)


def test_hermitian_eig_reconstructs():
    h = random_hermitian(np.random.default_rng(0), 5)
    w, v = hermitian_eig(h)
    assert np.allclose(v @ np.diag(w) @ dagger(v), h, atol=1e-12)
    assert np.all(np.diff(w) >= 0)


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(InputError):
        hermitian_eig(np.array([[0, 1], [0, 0]], dtype=complex))


def test_expm_hermitian_matches_scipy():
    h = random_hermitian(np.random.default_rng(1), 4)
    assert np.allclose(expm_hermitian(h, 0.7), expm(-0.7j * h), atol=1e-12)


def test_unitary_eig_degenerate():
    u = np.diag(np.exp(1j * np.array([0.3, 0.3, -1.0])))
    phi, z = unitary_eig(u)
    assert np.allclose(z @ np.diag(np.exp(1j * phi)) @ dagger(z), u, atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 6))
def test_log_branch_inverts_exponential(seed, n):
    rng = np.random.default_rng(seed)
    u = random_unitary(rng, n)
    phases = -np.angle(np.linalg.eigvals(u))
    # a cut in the widest spectral gap
    s = np.sort(np.mod(phases, 2 * np.pi))
    gaps = np.diff(np.concatenate([s, [s[0] + 2 * np.pi]]))
    k = int(np.argmax(gaps))
    eps = np.mod(s[k] + gaps[k] / 2, 2 * np.pi) - 2 * np.pi
    h = unitary_log_branch(u, eps)
    assert np.allclose(expm(-2j * np.pi * h), u, atol=1e-10)
    w = np.linalg.eigvalsh(h) * 2 * np.pi
    assert np.all(w > eps) and np.all(w < eps + 2 * np.pi)


def test_log_branch_cut_collision():
    u = np.diag(np.exp(-1j * np.array([-np.pi, 0.5])))
    with pytest.raises(CutCollision) as err:
        unitary_log_branch(u, -np.pi)
    assert "eigenphase" in err.value.payload


def test_log_branch_rejects_epsilon_range():
    with pytest.raises(InputError):
        unitary_log_branch(np.eye(2), 0.5)


def test_principal_log_small_rotation():
    rng = np.random.default_rng(3)
    h = random_hermitian(rng, 3)
    h *= 0.4 / np.abs(np.linalg.eigvalsh(h)).max()
    log, worst = principal_log(expm(1j * h)[None])
    assert np.allclose(log[0], 1j * h, atol=1e-12)
    assert worst == pytest.approx(0.4)


def test_principal_log_under_resolved():
    with pytest.raises(UnderResolved):
        principal_log(np.diag([1.0, -1.0]).astype(complex)[None])


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 4))
def test_pfaffian_squares_to_determinant(seed, half):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2 * half,) * 2) + 1j * rng.normal(size=(2 * half,) * 2)
    a = a - a.T
    pf = pfaffian(a)
    assert abs(pf ** 2 - np.linalg.det(a)) < 1e-9 * max(1.0, abs(np.linalg.det(a)))


def pfaffian_expansion(a):
    """Row expansion along the first row; exponential cost, small inputs only."""
    n = a.shape[0]
    if n == 0:
        return 1.0
    total = 0
    for j in range(1, n):
        rest = [k for k in range(n) if k not in (0, j)]
        total += (-1) ** (j - 1) * a[0, j] * pfaffian_expansion(a[np.ix_(rest, rest)])
    return total


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3))
def test_pfaffian_matches_expansion(seed, half):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2 * half,) * 2) + 1j * rng.normal(size=(2 * half,) * 2)
    a = a - a.T
    assert abs(pfaffian(a) - pfaffian_expansion(a)) < 1e-10 * max(1.0, abs(pfaffian_expansion(a)))


def test_pfaffian_standard_form():
    j = np.array([[0, 1], [-1, 0]], dtype=complex)
    assert pfaffian(j) == pytest.approx(1.0)
    assert pfaffian(np.kron(np.eye(3), j)) == pytest.approx(1.0)


def test_pfaffian_congruence():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(4, 4))
    a = a - a.T
    b = rng.normal(size=(4, 4))
    assert pfaffian(b @ a @ b.T) == pytest.approx(np.linalg.det(b) * pfaffian(a))


def test_pfaffian_rejects_odd_and_symmetric():
    with pytest.raises(InputError):
        pfaffian(np.zeros((3, 3)))
    with pytest.raises(InputError):
        pfaffian(np.eye(2))


@pytest.mark.parametrize("w", [-2, 0, 1, 3])
def test_det_phase_winding(w):
    k = 2 * np.pi * np.arange(64) / 64
    loop = np.exp(1j * w * k)[:, None, None] * np.eye(1)
    assert det_phase_winding(loop) == w


def test_det_phase_winding_under_resolved():
    k = 2 * np.pi * np.arange(4) / 4
    with pytest.raises(UnderResolved):
        det_phase_winding(np.exp(3j * k))
