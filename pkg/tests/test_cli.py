import json

import numpy as np
import pytest
from click.testing import CliRunner

from gerbeholo.bands import zoo_model
from gerbeholo.cli import main
from gerbeholo.pipelines import GridCache, km2d, km3d
from gerbeholo.wz import GridMap, write_grb1


@pytest.fixture
def run(tmp_path):
    runner = CliRunner()

    def go(*args):
        res = runner.invoke(main, [str(a) for a in args], catch_exceptions=False)
        out = res.stdout if res.exit_code == 0 else res.stderr
        return res.exit_code, json.loads(out)
    return go


def test_models_lists_zoo(run):
    code, doc = run("models")
    assert code == 0
    assert "bhz" in json.dumps(doc)


def test_km2d_atomic(run, tmp_path):
    code, rep = run("km2d", "--model", "atomic", "--grid", 16, "--cache-dir", tmp_path, "--oracle")
    assert code == 0
    assert rep["format"] == "report-v1"
    assert rep["result"]["bit"] == 0 and rep["result"]["oracle"] == 0
    assert rep["provenance"]["/oracle"] == "oracle"
    assert rep["provenance"]["/bit"] == "computed"


def test_unknown_model_is_an_input_error(run, tmp_path):
    code, err = run("km2d", "--model", "no_such_model", "--cache-dir", tmp_path)
    assert code == 4
    assert err["error"]["type"] == "InputError"


def test_unknown_parameter_is_an_input_error(run, tmp_path):
    code, _ = run("km2d", "--model", "bhz", "--param", "zz=1", "--cache-dir", tmp_path)
    assert code == 4


def test_coarse_grid_is_a_numerical_failure(run, tmp_path):
    code, err = run("km2d", "--model", "bhz", "--grid", 4, "--cache-dir", tmp_path)
    assert code == 2
    assert err["pipeline"] == "km2d"


def test_reports_are_reproducible(run, tmp_path):
    args = ("km2d", "--model", "bhz", "--grid", 24, "--cache-dir", tmp_path)
    _, a = run(*args)
    _, b = run(*args)
    a.pop("wall_time"), b.pop("wall_time")
    assert a == b
    assert a["result"]["bit"] == 1


def test_cache_round_trip(tmp_path):
    cache = GridCache(tmp_path)
    m = zoo_model("bhz")
    fresh = km2d(m, n=24, cache=cache)
    assert list(tmp_path.glob("*.grb1")) and list(tmp_path.glob("*.json"))
    hit = km2d(m, n=24, cache=cache)
    assert abs(hit["integral"] - fresh["integral"]) <= 1e-12
    for f in tmp_path.glob("*.grb1"):
        f.unlink()
    again = km2d(m, n=24, cache=cache)
    assert abs(again["integral"] - fresh["integral"]) <= 1e-12


def test_cache_keys_separate_parameters(tmp_path):
    cache = GridCache(tmp_path)
    m = zoo_model("bhz")
    assert km2d(m, n=24, cache=cache)["bit"] == 1
    assert km2d(m.with_parameter("m", 3.0), n=24, cache=cache)["bit"] == 0


def test_km3d_trivial(tmp_path):
    r = km3d(zoo_model("atomic3d"), n=8, oracle=True, cache=GridCache(tmp_path))
    assert r["bit"] == 0 and r["oracle"] == 0


def test_deligne_generate_check_and_sqrt(run, tmp_path):
    path = tmp_path / "s.json"
    code, _ = run("deligne", "generate", "--grid", 6, "--seed", 3, path)
    assert code == 0 and path.exists()
    code, rep = run("deligne", "check", path)
    assert code == 0
    code, h = run("deligne", "holonomy", path, "--seed", 1)
    assert code == 0
    assert h["result"]["oracle_residual"] < 1e-12
    code, s = run("deligne", "sqrt", path, "--seed", 2)
    assert code == 0
    assert s["result"]["square_residual"] < 1e-12
    hol = complex(*s["result"]["holonomy"])
    assert abs(hol - complex(*h["result"]["holonomy"])) < 1e-12


def test_deligne_check_reports_tampering(run, tmp_path):
    path = tmp_path / "s.json"
    run("deligne", "generate", "--grid", 6, "--seed", 3, "--plain", path)
    doc = json.loads(path.read_text())
    _tamper(doc)
    path.write_text(json.dumps(doc))
    code, err = run("deligne", "check", path)
    assert code == 2
    assert err["error"]["type"] == "RelationViolation"


def _tamper(doc):
    # rotate one transition function on the first face by a constant phase
    g = doc["g"][5]
    re, im = np.array(g["re"]), np.array(g["im"])
    z = (re + 1j * im) * np.exp(0.1j)
    g["re"], g["im"] = z.real.tolist(), z.imag.tolist()


def test_deligne_fuzz(run):
    code, rep = run("deligne", "fuzz", "--seed", 7, "--iterations", 100)
    assert code == 0
    assert not rep["result"]["failures"]


def test_wz_integral_of_constant_grid(run, tmp_path):
    path = tmp_path / "c.grb1"
    u = np.broadcast_to(np.diag([1j, -1j]), (6, 6, 6, 2, 2)).copy()
    write_grb1(GridMap.torus(u), path)
    code, rep = run("wz", "integral", path)
    assert code == 0
    assert abs(rep["result"]["integral"]) < 1e-12


def test_wz_winding_table(run):
    code, rep = run("wz", "winding", "--grid", 16, "--grid", 32)
    assert code == 0
    assert rep["result"]["integer"] == 1
    assert len(rep["result"]["history"]) == 2


def test_floquet2d_undriven_trivial(run, tmp_path):
    code, rep = run("floquet2d", "--model", "atomic", "--grid", 8, "--steps", 128,
                    "--cache-dir", tmp_path)
    assert code == 0
    assert all(g["bit"] == 0 for g in rep["result"]["gaps"])
