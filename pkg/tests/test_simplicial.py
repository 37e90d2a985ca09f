import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gerbeholo.errors import InputError
from gerbeholo.simplicial import (InvolutiveComplex, build_torus2, build_torus3,
                                  build_torus3_with_domain, grid_automorphism, pachner_refine,
                                  tuple_sign, validate)


@pytest.mark.parametrize("pattern", ["diagonal", "crossed"])
@pytest.mark.parametrize("n", [4, 6])
def test_torus2_is_valid(n, pattern):
    c = build_torus2(n, pattern)
    assert validate(c) == []
    assert c.euler() == 0
    # four time-reversal invariant momenta
    assert len(c.fixed_vertices()) == 4


def test_torus2_counts():
    c = build_torus2(6)
    assert c.count(2) == 2 * 36
    assert c.count(1) == 3 * 36
    assert c.orbit_count(2) == 36


def test_torus2_rejects_odd_grid():
    with pytest.raises(InputError):
        build_torus2(5)


def test_torus3_is_valid():
    c = build_torus3(4)
    assert validate(c) == []
    assert c.euler() == 0
    assert len(c.fixed_vertices()) == 8
    assert c.count(3) == 6 * 64


@pytest.mark.parametrize("axis", [1, 2, 3])
def test_domain_is_half_the_torus(axis):
    dd = build_torus3_with_domain(4, axis)
    assert int(dd.in_F.sum()) * 2 == dd.parent.count(3)
    assert len(dd.boundary) == 2
    for bs in dd.boundary:
        assert validate(bs.surface) == []
        assert len(bs.surface.fixed_vertices()) == 4


def test_tuple_sign():
    assert tuple_sign((0, 1, 2), (0, 1, 2)) == 1
    assert tuple_sign((1, 0, 2), (0, 1, 2)) == -1
    assert tuple_sign((1, 2, 0), (0, 1, 2)) == 1


def test_validate_reports_broken_involution():
    c = build_torus2(4)
    vinv = c.vinv.copy()
    vinv[[1, 2]] = vinv[[2, 1]]
    broken = InvolutiveComplex(c.coords, c.faces, vinv, preserving=True)
    assert any("involution" in msg for msg in validate(broken))


def test_json_round_trip():
    c = build_torus2(4, "crossed")
    d = InvolutiveComplex.from_json(json.loads(json.dumps(c.to_json())))
    assert np.array_equal(d.faces, c.faces)
    assert all(np.array_equal(a, b) for a, b in zip(d.selected, c.selected))


def test_swap_lift_keeps_validity():
    c = build_torus2(4)
    k = int(np.flatnonzero(~c.fixed[2])[0])
    d = c.swap_lift(2, k)
    assert validate(d) == []
    assert d.selected[2][k] != c.selected[2][k]


@pytest.mark.parametrize("kind", ["half-shift", "swap"])
def test_automorphisms_commute_with_involution(kind):
    c = build_torus2(6)
    perm = grid_automorphism(c, kind)
    assert np.array_equal(perm[c.vinv], c.vinv[perm])
    assert sorted(perm.tolist()) == list(range(c.n_vertices))


def test_quarter_turn_on_crossed_pattern():
    c = build_torus2(4, "crossed")
    perm = grid_automorphism(c, "quarter-turn")
    faces = {tuple(sorted(f)) for f in c.faces.tolist()}
    assert {tuple(sorted(perm[f])) for f in c.faces} == faces


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["face-split", "edge-split"]))
def test_pachner_refinement_stays_valid(seed, move):
    c = build_torus2(4)
    p = 2 if move == "face-split" else 1
    free = np.flatnonzero(~c.fixed[p])
    target = int(free[seed % len(free)])
    ref = pachner_refine(c, move, target)
    new = ref.complex
    assert validate(new) == []
    assert new.euler() == 0
    assert new.n_vertices == c.n_vertices + 2
    # both moves add two triangles per simplex of the orbit
    assert new.count(2) == c.count(2) + 4
