import numpy as np
import pytest

from _maps import THETA, equivariant_exp_map
from gerbeholo.bands import sample_up, zoo_model
from gerbeholo.equivariant import (AntiUnitary, check_equivariance, extend_auto,
                                   extend_flatten_glue, extend_gapped, extend_involutive,
                                   extend_regularized, flatten, lift_double_cover, symmetric_gap)
from gerbeholo.errors import (CutCollision, GapClosure, InputError, NotEquivariant, OddWinding)
from gerbeholo.wz import GridMap, sqrt_holonomy_via_extension

FOUR_PI = 4 * np.pi


def integral(ext, T):
    return sqrt_holonomy_via_extension(ext.pieces, T, boundary_trivial=False,
                                       richardson=True).integral


@pytest.fixture(scope="module")
def trivial():
    m = zoo_model("atomic")
    return m, sample_up(m, 24).grid


@pytest.fixture(scope="module")
def inverted():
    m = zoo_model("bhz")
    return m, sample_up(m, 24).grid


def test_antiunitary_validation():
    assert AntiUnitary.spin_half().sign == -1
    with pytest.raises(InputError):
        AntiUnitary(np.eye(2), -1)
    with pytest.raises(InputError):
        AntiUnitary(np.array([[1, 1], [0, 1]]), 1)
    with pytest.raises(InputError):
        AntiUnitary(np.eye(2), 1).require_fermionic()


def test_flattened_unitaries_are_equivariant(trivial, inverted):
    for m, u in (trivial, inverted):
        assert check_equivariance(u, m.theta) < 1e-12


def test_involutive_extension_trivial_phase(trivial):
    m, u = trivial
    ext = extend_involutive(u, m.theta)
    assert ext.boundary_residual(u) == 0.0
    assert ext.equivariance_residual(m.theta) < 1e-8
    # the centre is constant along the disc angle
    centre = ext.outer.samples[0]
    assert np.abs(centre - centre[0, 0]).max() < 1e-12
    assert abs(integral(ext, m.theta.T)) < 1e-10


def test_involutive_extension_detects_gap_closure(inverted):
    m, u = inverted
    with pytest.raises(GapClosure):
        extend_involutive(u, m.theta)


def test_regularized_extension_inverted_phase(inverted):
    m, u = inverted
    ext = extend_regularized(u, m.theta)
    assert ext.boundary_residual(u) == 0.0
    assert ext.equivariance_residual(m.theta) < 1e-8
    x = integral(ext, m.theta.T) / (2 * np.pi)
    assert abs(abs(x) - 1) < 0.05


def test_auto_falls_back_to_regularized(inverted):
    m, u = inverted
    assert extend_auto(u, m.theta).strategy == "S1-regularized"


def test_non_equivariant_input_rejected(trivial):
    m, u = trivial
    bad = GridMap.torus(u.samples * np.exp(0.2j * np.arange(24))[:, None, None, None])
    with pytest.raises(NotEquivariant):
        extend_involutive(bad, m.theta)


def test_both_gapped_cuts_agree_modulo_four_pi():
    u = equivariant_exp_map(24, seed=1)
    assert check_equivariance(u, THETA) < 1e-12
    a = integral(extend_gapped(u, THETA, -1), THETA.T)
    b = integral(extend_gapped(u, THETA, +1), THETA.T)
    assert abs(a) > 1e-3   # a non-trivial value
    d = (a - b) / FOUR_PI
    assert abs(d - round(d)) < 0.01


def test_gapped_cut_collision_payload(inverted):
    m, u = inverted
    with pytest.raises(CutCollision) as err:
        extend_gapped(u, m.theta, -1)
    assert "eigenphase" in err.value.payload and "at" in err.value.payload


def test_flatten_endpoints():
    u = equivariant_exp_map(8, seed=2).samples
    assert np.allclose(flatten(u, 1.0, 0.0), u, atol=1e-12)
    f = flatten(u, 1.0, 1.0)
    assert np.allclose(f @ f, np.eye(4), atol=1e-12)


def test_flatten_glue_on_two_band_spectrum():
    # eigenphases |phi| in [0.3, 0.74] and [1.5, 1.94]: a gap pair near +-1.1
    u = equivariant_exp_map(24, seed=0, noise=0.0, split=0.6)
    alpha, half = symmetric_gap(u)
    assert 0.74 < alpha < 1.5 and half > 0.3
    ext = extend_flatten_glue(u, THETA)
    assert ext.strategy == "flatten-glue"
    assert ext.boundary_residual(u) < 1e-12
    assert ext.equivariance_residual(THETA) < 1e-8
    # the gapped contraction applies as well and agrees modulo 4 pi
    d = (integral(ext, THETA.T) - integral(extend_gapped(u, THETA, -1), THETA.T)) / FOUR_PI
    assert abs(d - round(d)) < 0.05


def test_double_cover_lift(inverted):
    _, u = inverted
    lifted, omega = lift_double_cover(u)
    assert np.allclose(omega ** 2, np.linalg.det(u.samples), atol=1e-10)


def test_double_cover_rejects_odd_winding():
    k = 2 * np.pi * np.arange(8) / 8
    s = np.zeros((8, 8, 2, 2), dtype=complex)
    s[..., 0, 0] = np.exp(1j * k)[:, None]
    s[..., 1, 1] = 1
    with pytest.raises(OddWinding):
        lift_double_cover(GridMap.torus(s))


def _winding_map(n, p, q):
    # multiply a Kramers pair by exp(i (p k1 + q k2)): det winds by (2p, 2q)
    from _maps import EVEN, GAMMA
    k = 2 * np.pi * np.arange(n) / n
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    P = (np.eye(4) + GAMMA[EVEN[0]]) / 2
    w = np.exp(1j * (p * K1 + q * K2))[..., None, None] * P + (np.eye(4) - P)
    return GridMap.torus(equivariant_exp_map(n, seed=1).samples @ w)


@pytest.mark.parametrize("p, q", [(1, 0), (1, 1), (1, -2)])
def test_relabeling_removes_winding_along_first_cycle(p, q):
    from gerbeholo.equivariant import sl2_precompose
    from gerbeholo.numerics import det_phase_winding
    u = _winding_map(48, p, q)
    v, M = sl2_precompose(u)
    assert round(np.linalg.det(M)) == 1
    assert check_equivariance(v, THETA) < 1e-12
    assert det_phase_winding(v.samples[:, 0]) == 0
    # the total winding class is preserved up to the relabeling
    assert abs(det_phase_winding(v.samples[0, :])) == 2 * np.gcd(p, q)


def test_gapped_contraction_rejects_hops_over_the_cut():
    u = _winding_map(24, 1, 1)
    for cut in (-1, 1):
        with pytest.raises(CutCollision):
            extend_gapped(u, THETA, cut)
