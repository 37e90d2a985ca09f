import json

import numpy as np
import pytest

from gerbeholo.bands import (BlochModel, fermi_projector, load_zoo, sample_up, strong_z2_oracle,
                             wcc_z2_oracle, z2_from_flow, zoo_model, zoo_names)
from gerbeholo.errors import GapClosedAtFermi, InputError

STATIC_2D = ["atomic", "bhz", "bhz_double", "kane_mele"]


@pytest.mark.parametrize("name", zoo_names())
def test_zoo_models_are_time_reversal_symmetric(name):
    doc = load_zoo(name)
    m = BlochModel.from_json(doc)
    assert m.symmetry_residual() < 1e-12


@pytest.mark.parametrize("name", STATIC_2D)
def test_oracle_matches_recorded_bit(name):
    m = zoo_model(name)
    assert wcc_z2_oracle(m, 24) == m.expected["km"]


def test_json_round_trip():
    m = zoo_model("bhz")
    back = BlochModel.from_json(json.loads(json.dumps(m.to_json())))
    assert np.allclose(back.h_grid(6), m.h_grid(6), atol=0)
    assert back.parameters.keys() == m.parameters.keys()


def test_parameter_override_changes_phase():
    m = zoo_model("bhz")
    assert wcc_z2_oracle(m.with_parameter("m", 3.0), 24) == 0
    with pytest.raises(InputError):
        m.with_parameter("nope", 1.0)


def test_missing_theta_pointer():
    doc = load_zoo("atomic")
    doc.pop("theta")
    with pytest.raises(InputError) as err:
        BlochModel.from_json(doc)
    assert err.value.payload["pointer"] == "/theta"


def test_bad_matrix_shape_pointer():
    doc = load_zoo("atomic")
    doc["hoppings"][0]["re"] = [[0.0]]
    with pytest.raises(InputError) as err:
        BlochModel.from_json(doc)
    assert err.value.payload["pointer"] == "/hoppings/0"


def test_hoppings_must_pair_with_adjoints():
    doc = load_zoo("bhz")
    doc["hoppings"] = [h for h in doc["hoppings"] if h["R"] != [-1, 0]]
    with pytest.raises(InputError):
        BlochModel.from_json(doc)


def test_flattened_unitary_is_an_involution():
    fm = sample_up(zoo_model("bhz"), 12)
    u = fm.grid.samples
    assert np.abs(u @ u - np.eye(4)).max() < 1e-12
    assert fm.rank == 2 and fm.gap > 0.1


def test_fermi_level_on_a_band_is_rejected():
    # the atomic levels sit at +-0.5
    doc = dict(load_zoo("atomic"), fermi_energy=0.5)
    with pytest.raises(GapClosedAtFermi):
        sample_up(BlochModel.from_json(doc), 8)
    with pytest.raises(GapClosedAtFermi):
        fermi_projector(np.zeros((2, 2, 4, 4)), 0.0)


def test_z2_from_flow_counts_crossings():
    # one pair of centres winding once across the reference line
    s = np.linspace(0, 0.5, 9)
    wcc = np.stack([np.mod(s, 1.0), np.mod(-s, 1.0)], axis=1)
    assert z2_from_flow(np.sort(wcc, axis=1)) == 1
    assert z2_from_flow(np.full((9, 2), 0.25)) == 0


def test_planes_of_layered_model():
    m = zoo_model("layered3d")
    assert wcc_z2_oracle(m.plane(2, 0.0), 24) == 1
    assert wcc_z2_oracle(m.plane(2, np.pi), 24) == 0


def test_strong_oracle():
    assert strong_z2_oracle(zoo_model("layered3d"), 16).bit == 1
    assert strong_z2_oracle(zoo_model("atomic3d"), 8).bit == 0
