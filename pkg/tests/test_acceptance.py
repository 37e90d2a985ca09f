"""End-to-end acceptance checks, one test per criterion.

Every test records a PASS/FAIL line through ``record_criterion`` before
asserting, so the summary at the end of the run lists all nine.
"""
import json
import time

import numpy as np
import pytest
from click.testing import CliRunner

from _maps import THETA, equivariant_exp_map
from gerbeholo.bands import load_zoo, sample_up, wcc_z2_oracle, zoo_model
from gerbeholo.cli import main
from gerbeholo.deligne import (check_cocycle, check_equivariant, extension_from_structure,
                               fuzz_invariance, generate_exact, star_cover,
                               structure_from_extension)
from gerbeholo.equivariant import (extend_flatten_glue, extend_gapped, extend_involutive,
                                   extend_regularized)
from gerbeholo.errors import GerbeholoError
from gerbeholo.floquet import DrivenModel, evolve, find_gaps, periodized
from gerbeholo.pipelines import floquet2d, floquet3d, lift_parity_check
from gerbeholo.simplicial import build_torus2
from gerbeholo.wz import GridMap, sqrt_holonomy_via_extension, su2_degree_map, wz_integral

pytestmark = pytest.mark.slow

FOUR_PI = 4 * np.pi


def _cli(*args):
    res = CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)
    text = res.stdout if res.exit_code == 0 else res.stderr
    return res.exit_code, json.loads(text)


def _mod_four_pi(a: float, b: float) -> float:
    """Distance of ``a - b`` to the nearest multiple of ``4 pi``, in units of ``4 pi``."""
    d = (a - b) / FOUR_PI
    return abs(d - round(d))


def _extension_integral(ext, T=None) -> float:
    return sqrt_holonomy_via_extension(ext.pieces, T, boundary_trivial=False,
                                       richardson=True).integral


def test_criterion_1_combinatorial_invariance(record_criterion):
    t0 = time.perf_counter()
    r = fuzz_invariance(6, 100, seed=2024)
    dt = time.perf_counter() - t0
    kinds = set(r["counts"])
    ok = (not r["failures"] and r["max_residual"] < 1e-12
          and kinds == {"label", "lift-swap", "pachner"} and dt < 30)
    record_criterion(1, ok, f"max residual {r['max_residual']:.1e}, moves {r['counts']}, "
                            f"{len(r['failures'])} failures, {dt:.1f}s")
    assert ok


def test_criterion_2_structure_round_trip(record_criterion):
    t0 = time.perf_counter()
    cx = build_torus2(6)
    bad = []
    for seed in range(12):
        for doubled in (False, True):
            e = generate_exact(cx, star_cover(cx, doubled), seed=seed)
            if check_cocycle(e) or check_equivariant(e):
                bad.append((seed, doubled, "identities"))
                continue
            t = extension_from_structure(e)
            if check_cocycle(t.sample):
                bad.append((seed, doubled, "graded cocycle"))
            back = structure_from_extension(t)
            for name in ("Pi", "chi", "f"):
                if not all(np.array_equal(x, y) for x, y in zip(back[name], getattr(e, name))):
                    bad.append((seed, doubled, name))
    dt = time.perf_counter() - t0
    ok = not bad and dt < 10
    record_criterion(2, ok, f"24 samples, {len(bad)} failures {bad[:3]}, {dt:.1f}s")
    assert ok


def _constant(n):
    u = np.linalg.qr(np.arange(1, 5).reshape(2, 2) + 1j)[0]
    return GridMap.torus(np.broadcast_to(u, (n, n, n, 2, 2)))


def _abelian(n):
    k = 2 * np.pi * np.arange(n) / n
    K = np.meshgrid(k, k, k, indexing="ij")
    d = np.stack([np.exp(1j * K[0]), np.exp(1j * (K[1] - 2 * K[2])), np.exp(1j * K[2])], -1)
    return GridMap.torus(d[..., :, None] * np.eye(3))


def test_criterion_3_wz_quantization(record_criterion):
    t0 = time.perf_counter()
    err = {n: abs(wz_integral(su2_degree_map(n)).value / (2 * np.pi) - 1) for n in (24, 48)}
    flat = max(abs(wz_integral(_constant(12)).value), abs(wz_integral(_abelian(12)).value))
    dt = time.perf_counter() - t0
    ok = err[48] < 0.02 and err[48] < err[24] and flat < 1e-10 and dt < 60
    record_criterion(3, ok, f"|I/2pi - 1| 24^3 {err[24]:.4f}, 48^3 {err[48]:.4f}; "
                            f"constant/abelian {flat:.1e}; {dt:.1f}s")
    assert ok


def test_criterion_4_bhz_mass_scan(record_criterion, tmp_path):
    t0 = time.perf_counter()
    model = zoo_model("bhz")
    rows = []
    for m in np.linspace(0.25, 3.75, 12):
        code, rep = _cli("km2d", "--model", "bhz", "--grid", 48, "--radial", 24,
                         "--param", f"m={float(m)!r}", "--cache-dir", tmp_path)
        oracle = wcc_z2_oracle(model.with_parameter("m", m), 48)
        if code:
            rows.append((m, None, oracle, None))
        else:
            rows.append((m, rep["result"]["bit"], oracle, rep["result"]["residue"]))
    dt = time.perf_counter() - t0
    bits = [r[1] for r in rows]
    agree = all(b == o for _, b, o, _ in rows)
    quantized = all(r is not None and r < 0.05 for *_, r in rows)
    flips = sum(1 for a, b in zip(bits, bits[1:]) if a != b)
    ok = agree and quantized and flips >= 1 and dt < 300
    worst = max((r for *_, r in rows if r is not None), default=float("nan"))
    record_criterion(4, ok, f"{len(rows)} masses, bits {bits}, oracle agrees {agree}, "
                            f"worst residue {worst:.3f}, {dt:.0f}s")
    assert ok


def test_criterion_5_layered_strong_bit(record_criterion, tmp_path):
    t0 = time.perf_counter()
    code, rep = _cli("km3d", "--model", "layered3d", "--grid", 48, "--oracle",
                     "--axis", 1, "--axis", 2, "--axis", 3, "--cache-dir", tmp_path)
    dt = time.perf_counter() - t0
    if code:
        record_criterion(5, False, f"exit {code}: {rep['error']['message']}")
        pytest.fail(rep["error"]["message"])
    r = rep["result"]
    axes = r["axes"]
    planes_ok = all((a["planes"]["0"] + a["planes"]["pi"]) % 2 == a["bit"] for a in axes.values())
    same = len({a["bit"] for a in axes.values()}) == 1
    ok = r["bit"] == r["oracle"] and planes_ok and same and dt < 600
    detail = ", ".join(f"axis {k}: {a['bit']} (planes {a['planes']['0']}+{a['planes']['pi']}, "
                       f"distance {a['distance']:.4f})" for k, a in sorted(axes.items()))
    record_criterion(5, ok, f"bit {r['bit']}, oracle {r['oracle']}; {detail}; {dt:.0f}s")
    assert ok


def _driven(name):
    return DrivenModel.from_json(load_zoo(name))


def test_criterion_6_gap_difference(record_criterion):
    t0 = time.perf_counter()
    try:
        r = floquet2d(_driven("driven_bhz"), n=48, oracle=True)
    except GerbeholoError as exc:
        record_criterion(6, False, f"{type(exc).__name__}: {exc}")
        raise
    dt = time.perf_counter() - t0
    bits = {g["epsilon"]: g["bit"] for g in r["gaps"]}
    checks = []
    for p in r["pairs"]:
        diff = (bits[p["epsilon_prime"]] - bits[p["epsilon"]]) % 2
        checks.append(diff == p["km"] and p.get("oracle") == p["km"])
    ok = len(r["pairs"]) >= 1 and all(checks) and dt < 600
    desc = "; ".join(f"K({p['epsilon']:.3f})={bits[p['epsilon']]}, "
                     f"K({p['epsilon_prime']:.3f})={bits[p['epsilon_prime']]}, "
                     f"band bit {p['km']} ({p['km_strategy']}), oracle {p.get('oracle')}"
                     for p in r["pairs"])
    record_criterion(6, ok, f"{desc}; {dt:.0f}s")
    assert ok


def test_criterion_7_driven_weak_strong(record_criterion):
    t0 = time.perf_counter()
    try:
        r = floquet3d(_driven("driven_layered3d"), n=32)
    except GerbeholoError as exc:
        record_criterion(7, False, f"{type(exc).__name__}: {exc}")
        raise
    dt = time.perf_counter() - t0
    rel = [g["strong"] == (g["weak"]["pi"] - g["weak"]["0"]) % 2 for g in r["gaps"]]
    ok = bool(rel) and all(rel) and dt < 900
    desc = "; ".join(f"eps {g['epsilon']:.3f}: strong {g['strong']}, "
                     f"planes 0/pi {g['weak']['0']}/{g['weak']['pi']}" for g in r["gaps"])
    record_criterion(7, ok, f"{desc}; {dt:.0f}s")
    assert ok


def test_criterion_8_extensions_agree_modulo_four_pi(record_criterion):
    groups = {}
    bhz = zoo_model("bhz")
    up = sample_up(bhz, 48).grid
    groups["bhz u_p, regularized variants"] = [
        _extension_integral(extend_regularized(up, bhz.theta, 24, seed=0)),
        _extension_integral(extend_regularized(up, bhz.theta, 24, seed=3)),
        _extension_integral(extend_regularized(up, bhz.theta, 24, strength=0.5, seed=0)),
    ]
    atomic = zoo_model("atomic")
    ua = sample_up(atomic, 24).grid
    groups["atomic u_p, involutive vs regularized"] = [
        _extension_integral(extend_involutive(ua, atomic.theta, 24)),
        _extension_integral(extend_regularized(ua, atomic.theta, 24)),
    ]
    u = equivariant_exp_map(24, seed=1)
    groups["generic map, both gapped cuts"] = [
        _extension_integral(extend_gapped(u, THETA, -1), THETA.T),
        _extension_integral(extend_gapped(u, THETA, +1), THETA.T),
    ]
    u2 = equivariant_exp_map(24, seed=5, split=0.6)
    groups["split map, gapped vs flatten-glue"] = [
        _extension_integral(extend_gapped(u2, THETA, -1), THETA.T),
        _extension_integral(extend_flatten_glue(u2, THETA), THETA.T),
    ]
    worst = {k: max(_mod_four_pi(a, v[0]) for a in v) for k, v in groups.items()}
    ok = max(worst.values()) < 0.05
    record_criterion(8, ok, "; ".join(f"{k}: {w:.1e}" for k, w in worst.items())
                     + " (spread mod 4pi, units of 4pi)")
    assert ok


def _half_period_faces(name, n):
    dm = _driven(name)
    e = evolve(dm, n, 256, 32)
    for g in find_gaps(e):
        v = periodized(e, g)
        yield f"{name} eps={g.epsilon:.2f}", GridMap.torus(v.samples[e.nt // 2]), dm.theta


def test_criterion_9_even_windings_and_lifts(record_criterion):
    maps = []
    for name in ("atomic", "bhz", "bhz_double", "kane_mele"):
        m = zoo_model(name)
        maps.append((name, sample_up(m, 24).grid, m.theta))
    for name in ("layered3d", "atomic3d"):
        m = zoo_model(name)
        for label, val in (("0", 0.0), ("pi", np.pi)):
            maps.append((f"{name} k3={label}", sample_up(m.plane(2, val), 24).grid, m.theta))
    for name in ("driven_bhz", "static_bhz"):
        maps.extend(_half_period_faces(name, 32))
    bad = []
    for label, u, theta in maps:
        try:
            r = lift_parity_check(u, theta)
        except GerbeholoError as exc:
            bad.append(f"{label}: {type(exc).__name__}")
            continue
        if any(w % 2 for w in r["windings"]) or not r["lift_independent"]:
            bad.append(f"{label}: windings {r['windings']}")
    ok = not bad
    record_criterion(9, ok, f"{len(maps)} maps, {len(bad)} failures {bad[:3]}")
    assert ok
