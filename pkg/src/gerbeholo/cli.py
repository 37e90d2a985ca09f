"""Command line front end.

Every command prints one ``report-v1`` JSON document (keys sorted) on
stdout, and optionally writes it to ``--json``.  Failures print an error
document on stderr and exit with the error's code: 2 for quantization,
relation or oracle failures, 3 when no extension is available, 4 for
invalid input.
"""
from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import pipelines as P
from .bands import BlochModel, load_zoo, zoo_names
from .errors import GerbeholoError, InputError
from .floquet import DrivenModel
from .wz import chern_winding_map, read_grb1, su2_degree_map, wz_convergence, wz_integral

REPORT_FORMAT = "report-v1"


# ----------------------------------------------------------------------
# helpers

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _provenance(result) -> dict:
    """``oracle`` for fields produced by an independent oracle, ``computed`` otherwise."""
    out = {}

    def walk(d, prefix):
        for k, v in d.items():
            path = f"{prefix}/{k}"
            if isinstance(v, dict):
                walk(v, path)
            elif isinstance(v, (int, float)) and not isinstance(v, bool):
                out[path] = "oracle" if "oracle" in k else "computed"
    walk(result, "")
    return out


def _model_doc(source: str) -> dict:
    """Model document from a file path or a shipped model name."""
    p = Path(source)
    if p.exists():
        try:
            with open(p) as fh:
                return json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{source}: invalid JSON ({exc})", pointer="") from None
    if source in zoo_names():
        return load_zoo(source)
    raise InputError(f"{source!r} is neither a file nor a shipped model ({', '.join(zoo_names())})")


def _epsilon(value: str):
    if value == "auto":
        return "auto"
    try:
        return [float(x) for x in value.split(",")]
    except ValueError:
        raise InputError(f"--epsilon expects 'auto' or comma-separated numbers, got {value!r}") from None


def _cut(value):
    return {None: None, "plus": 1, "minus": -1}[value]


def _cache(ctx_dir):
    return P.GridCache(ctx_dir) if ctx_dir else P.GridCache()


def _fail(pipeline: str, config, exc: GerbeholoError):
    err = {"format": REPORT_FORMAT, "pipeline": pipeline, "config": _jsonable(config),
           "error": {"type": type(exc).__name__, "message": str(exc),
                     "payload": _jsonable(exc.payload)}}
    click.echo(json.dumps(err, sort_keys=True, indent=2, default=str), err=True)
    sys.exit(exc.exit_code)


class _Group(click.Group):
    """Turns errors raised while reading inputs into error reports and exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except GerbeholoError as exc:
            name = ctx.invoked_subcommand or ctx.info_name
            _fail(str(name), {"argv": sys.argv[1:]}, exc)


def _emit(pipeline: str, config: dict, run, out_path=None):
    """Run ``run()``, wrap its result into a report and print it."""
    t0 = time.perf_counter()
    try:
        result = _jsonable(run())
    except GerbeholoError as exc:
        _fail(pipeline, config, exc)
    report = {
        "format": REPORT_FORMAT,
        "pipeline": pipeline,
        "config": _jsonable(config),
        "config_hash": P.config_hash(config),
        "result": result,
        "provenance": _provenance(result),
        "wall_time": time.perf_counter() - t0,
    }
    text = json.dumps(report, sort_keys=True, indent=2)
    if out_path:
        Path(out_path).write_text(text + "\n")
    click.echo(text)
    return report


# shared options
def _common(f):
    f = click.option("--json", "json_out", type=click.Path(dir_okay=False), default=None,
                     help="Also write the report to this file.")(f)
    f = click.option("--seed", type=int, default=0, show_default=True,
                     help="Seed for randomized extension candidates.")(f)
    f = click.option("--cache-dir", type=click.Path(file_okay=False), default=None,
                     help="Grid cache directory (default $GERBEHOLO_CACHE or .gerbeholo-cache).")(f)
    f = click.option("--radial", type=int, default=24, show_default=True,
                     help="Radial nodes of disc extensions.")(f)
    f = click.option("--grid", type=int, default=None, help="Momentum grid size per axis.")(f)
    f = click.option("--model", required=True, help="Model JSON file or shipped model name.")(f)
    return f


# ----------------------------------------------------------------------
# commands

@click.group(cls=_Group)
@click.version_option(package_name="artifact")
def main():
    """Z2 invariants of time-reversal symmetric band structures via gerbe holonomy."""


@main.command()
def models():
    """List the shipped models."""
    out = {}
    for name in zoo_names():
        doc = load_zoo(name)
        out[name] = {"dimension": doc["dimension"], "bands": doc["bands"],
                     "driven": bool(doc.get("harmonics")), "expected": doc.get("expected", {})}
    click.echo(json.dumps(out, sort_keys=True, indent=2))


@main.command()
@_common
@click.option("--oracle", is_flag=True, help="Compare with the Wilson-loop bit.")
@click.option("--param", multiple=True, help="Override a model parameter, as key=value.")
def km2d(model, grid, radial, cache_dir, seed, json_out, oracle, param):
    """2d bit from an equivariant extension of the flattened Fermi unitary."""
    n = grid or 48
    config = {"model": _model_doc(model), "grid": n, "radial": radial, "seed": seed,
              "oracle": oracle, "param": list(param)}

    def run():
        m = BlochModel.from_json(config["model"])
        for kv in param:
            k, _, v = kv.partition("=")
            m = m.with_parameter(k, float(v))
        return P.km2d(m, n, radial, oracle, _cache(cache_dir), seed=seed)
    _emit("km2d", config, run, json_out)


@main.command()
@_common
@click.option("--oracle", is_flag=True, help="Compare with the strong Wilson-loop bit.")
@click.option("--axis", "axes", type=click.IntRange(1, 3), multiple=True,
              help="Cut axes to compare (repeatable, default 1 and 3).")
def km3d(model, grid, radial, cache_dir, seed, json_out, oracle, axes):
    """Strong 3d bit from the 3d index of the flattened Fermi unitary."""
    n = grid or 32
    axes = tuple(axes) or (1, 3)
    config = {"model": _model_doc(model), "grid": n, "radial": radial, "seed": seed,
              "oracle": oracle, "axes": list(axes)}

    def run():
        m = BlochModel.from_json(config["model"])
        return P.km3d(m, n, radial, axes, oracle, _cache(cache_dir), seed=seed)
    _emit("km3d", config, run, json_out)


@main.command()
@_common
@click.option("--steps", type=int, default=256, show_default=True, help="Time steps per period.")
@click.option("--snapshots", type=int, default=32, show_default=True,
              help="Stored time slices per period (must divide --steps).")
@click.option("--epsilon", default="auto", show_default=True,
              help="Gap position(s): 'auto' or comma-separated values in [-2pi, 0).")
@click.option("--cut", type=click.Choice(["plus", "minus"]), default=None,
              help="Branch of the gapped contraction (default: try both).")
@click.option("--oracle/--no-oracle", default=True, show_default=True,
              help="Cross-check enclosed-band bits with the Wilson-loop oracle.")
def floquet2d(model, grid, radial, cache_dir, seed, json_out, steps, snapshots, epsilon, cut,
              oracle):
    """Dynamical bits of a 2d driven model and their gap-difference relation."""
    n = grid or 32
    config = {"model": _model_doc(model), "grid": n, "radial": radial, "seed": seed,
              "steps": steps, "snapshots": snapshots, "epsilon": epsilon, "cut": cut,
              "oracle": oracle}

    def run():
        dm = DrivenModel.from_json(config["model"])
        return P.floquet2d(dm, n, steps, snapshots, radial, _epsilon(epsilon), _cut(cut),
                           oracle, seed=seed)
    _emit("floquet2d", config, run, json_out)


@main.command()
@_common
@click.option("--steps", type=int, default=256, show_default=True, help="Time steps per period.")
@click.option("--snapshots", type=int, default=32, show_default=True,
              help="Stored time slices for the plane evolutions.")
@click.option("--plane-grid", type=int, default=None, help="Grid of the weak-plane evolutions.")
@click.option("--epsilon", default="auto", show_default=True,
              help="Gap position(s): 'auto' or comma-separated values in [-2pi, 0).")
@click.option("--axis", type=click.IntRange(1, 3), default=3, show_default=True,
              help="Momentum axis normal to the weak planes.")
@click.option("--cut", type=click.Choice(["plus", "minus"]), default=None)
def floquet3d(model, grid, radial, cache_dir, seed, json_out, steps, snapshots, plane_grid,
              epsilon, axis, cut):
    """Strong and weak dynamical bits of a 3d driven model."""
    n = grid or 32
    config = {"model": _model_doc(model), "grid": n, "radial": radial, "seed": seed,
              "steps": steps, "snapshots": snapshots, "plane_grid": plane_grid,
              "epsilon": epsilon, "axis": axis, "cut": cut}

    def run():
        dm = DrivenModel.from_json(config["model"])
        return P.floquet3d(dm, n, steps, radial, _epsilon(epsilon), axis, plane_grid, snapshots,
                           _cut(cut), _cache(cache_dir), seed=seed)
    _emit("floquet3d", config, run, json_out)


# ----------------------------------------------------------------------
# deligne

@main.group(cls=_Group)
def deligne():
    """Local gerbe data: generate, check, evaluate and fuzz."""


def _sample(path):
    from .deligne import load_sample
    return load_sample(path)


@deligne.command("generate")
@click.option("--grid", type=int, default=6, show_default=True)
@click.option("--dimension", type=click.IntRange(2, 3), default=2, show_default=True)
@click.option("--axis", type=click.IntRange(1, 3), default=3, show_default=True,
              help="Selection axis of a 3-torus.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--doubled", is_flag=True, help="Use the doubled label set.")
@click.option("--plain", is_flag=True, help="Generate non-equivariant data.")
@click.argument("out", type=click.Path(dir_okay=False))
def deligne_generate(grid, dimension, axis, seed, doubled, plain, out):
    """Write a generated deligne-v1 sample with closed-form oracle values."""
    from .deligne import generate_exact, save_sample, star_cover
    from .simplicial import build_torus2, build_torus3
    config = {"grid": grid, "dimension": dimension, "axis": axis, "seed": seed,
              "doubled": doubled, "plain": plain, "out": str(out)}

    def run():
        cx = build_torus2(grid) if dimension == 2 else build_torus3(grid, axis)
        e = generate_exact(cx, star_cover(cx, doubled), seed=seed, equivariant=not plain)
        save_sample(e, out)
        return {"path": str(out), "oracle": e.oracle, "vertices": cx.n_vertices}
    _emit("deligne-generate", config, run)


@deligne.command("check")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
def deligne_check(path):
    """Cocycle (and equivariance) diagnostics; empty lists mean the data are consistent."""
    from .deligne import EquivariantSample, check_cocycle, check_equivariant
    config = {"path": str(path)}

    def run():
        e = _sample(path)
        out = {"cocycle": check_cocycle(e)}
        if isinstance(e, EquivariantSample):
            out["equivariant"] = check_equivariant(e)
        bad = sum(len(v) for v in out.values())
        if bad:
            from .errors import RelationViolation
            raise RelationViolation(f"{bad} identity violations", diagnostics=out)
        return out
    _emit("deligne-check", config, run)


@deligne.command("holonomy")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Random admissible labels.")
def deligne_holonomy(path, seed):
    """Holonomy of the sample on its complex."""
    from .deligne import default_assignment, holonomy
    config = {"path": str(path), "seed": seed}

    def run():
        e = _sample(path)
        h = holonomy(e, default_assignment(e.cover, seed))
        out = {"holonomy": h, "phase": float(np.angle(h))}
        if "holonomy" in e.oracle:
            out["oracle"] = e.oracle["holonomy"]
            out["oracle_residual"] = abs(h - e.oracle["holonomy"])
        return out
    _emit("deligne-holonomy", config, run)


@deligne.command("sqrt")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Random admissible equivariant labels.")
def deligne_sqrt(path, seed):
    """Square root of the holonomy, its square and the holonomy itself."""
    from .deligne import EquivariantSample, default_assignment, holonomy, sqrt_holonomy
    config = {"path": str(path), "seed": seed}

    def run():
        e = _sample(path)
        if not isinstance(e, EquivariantSample):
            raise InputError("sqrt needs an equivariant sample", pointer="/kind")
        a = default_assignment(e.cover, seed, equivariant=True)
        r, h = sqrt_holonomy(e, a), holonomy(e, a)
        out = {"sqrt_holonomy": r, "squared": r * r, "holonomy": h,
               "square_residual": abs(r * r - h)}
        if "sqrt_holonomy" in e.oracle:
            out["oracle"] = e.oracle["sqrt_holonomy"]
            out["oracle_residual"] = abs(r - e.oracle["sqrt_holonomy"])
        return out
    _emit("deligne-sqrt", config, run)


@deligne.command("index3d")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--axis", type=click.IntRange(1, 3), default=3, show_default=True)
@click.option("--seed", type=int, default=None)
def deligne_index3d(path, axis, seed):
    """3d index of an equivariant sample on a 3-torus cut along ``axis``."""
    from .deligne import EquivariantSample, curvature_per_tet, default_assignment, index3d
    from .simplicial import build_torus3_with_domain
    config = {"path": str(path), "axis": axis, "seed": seed}

    def run():
        e = _sample(path)
        cx = e.complex
        if not isinstance(e, EquivariantSample) or cx.dim != 3:
            raise InputError("index3d needs an equivariant sample on a 3-torus")
        n = int(round(cx.n_vertices ** (1 / 3)))
        dd = build_torus3_with_domain(n, axis)
        if (dd.parent.count(3) != cx.count(3)
                or not np.array_equal(dd.parent.tets, cx.tets)
                or not all(np.array_equal(a, b) for a, b in zip(dd.parent.selected, cx.selected))):
            raise InputError(f"sample complex is not the {n}^3 torus with selection axis {axis}")
        r = index3d(e, dd, curvature_per_tet(e), default_assignment(e.cover, seed, equivariant=True))
        return {"sign": r.sign, "phase": r.phase, "distance": r.distance,
                "boundary_phases": r.boundary_phases}
    _emit("deligne-index3d", config, run)


@deligne.command("fuzz")
@click.option("--grid", type=int, default=6, show_default=True)
@click.option("--iterations", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--plain", is_flag=True, help="Fuzz non-equivariant holonomy only.")
def deligne_fuzz(grid, iterations, seed, plain):
    """Random label changes, lift swaps and Pachner moves that must not change the values."""
    from .deligne import fuzz_invariance
    from .errors import RelationViolation
    config = {"grid": grid, "iterations": iterations, "seed": seed, "plain": plain}

    def run():
        r = fuzz_invariance(grid, iterations, seed, equivariant=not plain)
        if r["failures"]:
            raise RelationViolation(f"{len(r['failures'])} invariance violations", **r)
        return r
    _emit("deligne-fuzz", config, run)


# ----------------------------------------------------------------------
# wz

@main.group(cls=_Group)
def wz():
    """Wess-Zumino integrals of unitary grids."""


@wz.command("integral")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--richardson", is_flag=True, help="Extrapolate with the 2x subsampled grid.")
def wz_integral_cmd(path, richardson):
    """Integral of the 3-form over a GRB1 grid, with its residue to the nearest quantum."""
    config = {"path": str(path), "richardson": richardson}

    def run():
        q = wz_integral(read_grb1(path), richardson=richardson)
        return {"integral": q.value, "winding": q.value / (2 * np.pi), "residue": q.residue,
                "shape": list(q.shape), "worst_angle": q.worst_angle}
    _emit("wz-integral", config, run)


@wz.command("winding")
@click.option("--grid", "grids", type=int, multiple=True,
              help="Grid sizes of the convergence table (default 12, 24, 48).")
@click.option("--fixture", type=click.Choice(["su2", "chern"]), default="su2", show_default=True,
              help="Built-in T3 map: SU(2) degree map or band-projector loop.")
@click.option("--mass", type=float, default=None,
              help="Mass parameter (default 2 for su2, 1 for chern).")
def wz_winding(grids, fixture, mass):
    """Degree of a built-in T3 map, with a convergence table."""
    grids = tuple(grids) or (12, 24, 48)
    if mass is None:
        mass = 2.0 if fixture == "su2" else 1.0
    build = su2_degree_map if fixture == "su2" else chern_winding_map
    config = {"grids": list(grids), "fixture": fixture, "mass": mass}

    def run():
        q = wz_convergence(lambda n: build(n, mass), grids)
        return {"integral": q.value, "winding": q.value / (2 * np.pi), "residue": q.residue,
                "integer": q.integer, "history": q.history}
    _emit("wz-winding", config, run)


if __name__ == "__main__":  # pragma: no cover
    main()
