import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gerbeholo.errors import InputError, UnderResolved
from gerbeholo.wz import (GridMap, chern_winding_map, holonomy_via_extension, read_grb1,
                          su2_degree_map, subsample, wz_convergence, wz_integral, write_grb1)


def const_map(n, N=2):
    u = np.linalg.qr(np.arange(1, N * N + 1).reshape(N, N) + 1j)[0]
    return GridMap.torus(np.broadcast_to(u, (n, n, n, N, N)))


def abelian_map(n):
    k = 2 * np.pi * np.arange(n) / n
    K = np.meshgrid(k, k, k, indexing="ij")
    d = np.stack([np.exp(1j * K[0]), np.exp(1j * (K[1] - 2 * K[2])), np.exp(1j * K[2])], -1)
    return GridMap.torus(d[..., :, None] * np.eye(3))


def test_constant_map_integrates_to_zero():
    assert abs(wz_integral(const_map(8)).value) < 1e-12


def test_abelian_map_integrates_to_zero():
    assert abs(wz_integral(abelian_map(12)).value) < 1e-12


def test_su2_degree_converges_under_doubling():
    errs = [abs(wz_integral(su2_degree_map(n)).value / (2 * np.pi) - 1) for n in (12, 24)]
    assert errs[1] < errs[0] / 3
    assert errs[1] < 0.03


@pytest.mark.parametrize("mass, degree", [(0.5, -2), (4.0, 0), (-2.0, 1)])
def test_su2_degree_phases(mass, degree):
    q = wz_integral(su2_degree_map(24, mass))
    assert q.integer == degree


def test_chern_fixture_degree():
    assert wz_integral(chern_winding_map(24)).integer == 1
    assert wz_integral(chern_winding_map(24, mass=3.0)).integer == 0


def test_axis_permutations_and_orientation():
    m = su2_degree_map(16)
    v = wz_integral(m).value
    assert wz_integral(m.permuted((1, 2, 0))).value == pytest.approx(v, abs=1e-12)
    assert wz_integral(m.permuted((1, 0, 2))).value == pytest.approx(-v, abs=1e-12)


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_half_domains_add_up(axis):
    m = su2_degree_map(16)
    total = wz_integral(m).value
    a = wz_integral(m, region=(axis, 0, 8)).value
    b = wz_integral(m, region=(axis, 8, 16)).value
    assert a + b == pytest.approx(total, abs=1e-12)


def test_point_reflection_reverses_sign():
    # k -> -k reverses the orientation of T^3
    m = su2_degree_map(16)
    r = GridMap.torus(m.reflected())
    assert wz_integral(r).value == pytest.approx(-wz_integral(m).value, abs=1e-12)


def test_richardson_improves():
    m = su2_degree_map(24)
    plain = wz_integral(m).value / (2 * np.pi)
    rich = wz_integral(m, richardson=True)
    assert abs(rich.value / (2 * np.pi) - 1) < abs(plain - 1)
    assert len(rich.history) == 2


def test_convergence_history():
    q = wz_convergence(su2_degree_map, (8, 16))
    assert [n for n, _ in q.history] == [8, 16]


def test_under_resolved():
    with pytest.raises(UnderResolved):
        wz_integral(su2_degree_map(4, 0.5))


def test_subsample_requires_divisible_grid():
    with pytest.raises(InputError):
        subsample(su2_degree_map(6))


def test_closed_holonomy():
    hol, n, _ = holonomy_via_extension(su2_degree_map(24))
    assert n == 1
    assert abs(hol - 1) < 0.2


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([(4, 6), (2, 4, 6), (3, 4, 2)]),
       st.integers(1, 3))
def test_grb1_round_trip(tmp_path_factory, seed, shape, N):
    rng = np.random.default_rng(seed)
    s = rng.normal(size=shape + (N, N)) + 1j * rng.normal(size=shape + (N, N))
    if len(shape) == 2:
        m = GridMap.torus(s)
    elif shape[0] == 3:
        m = GridMap.disc_times_circle(s)
    else:
        m = GridMap.torus(s)
    path = tmp_path_factory.mktemp("grb") / "m.grb1"
    write_grb1(m, path)
    back = read_grb1(path)
    assert back.domain == m.domain
    assert np.array_equal(back.samples, m.samples)
    assert back.spacing == m.spacing


def test_grb1_rejects_truncated(tmp_path):
    path = tmp_path / "m.grb1"
    write_grb1(su2_degree_map(4), path)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(InputError):
        read_grb1(path)
    path.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(InputError):
        read_grb1(path)
