"""Command line entry point.

Exit codes: 0 all checks passed, 1 a check failed, 2 configuration or schema
error.  All JSON output carries the top-level tag "cr-orient/1"; reports are
byte-identical for identical inputs and seed (add --timings for wall clock).
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from .errors import SchemaError, ToolkitError
from .operators import (Discretization, assemble, fredholm_index_estimate,
                        numerical_kernel, constant_field, rotation_homotopy_field)
from .oracles import cylinder_rotation_unitary, identity_unitary, small_rotation_unitary
from .orientation import OperatorPath, conjugation_sign, predict_sign, transport_orientation
from .schemas import (load_json, parse_discretization, parse_operator_field,
                      parse_so_loop, parse_symmetric_loop, tagged, validate_file)
from .spin import lift_sign, lifts_to_spin, winding_number
from .suite import SUITE_NAMES, SuiteConfig, report_json, report_text, run_suite
from .sympath import (conley_zehnder_index, integrate_symplectic_path,
                      is_nondegenerate, nondegeneracy_margin)

EXIT_FAIL = 1
EXIT_CONFIG = 2


def _plain(obj):
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _emit(payload: dict, json_path: str | None):
    text = json.dumps(tagged(payload), indent=2, sort_keys=True, default=_plain)
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


def _fail_config(messages):
    for m in messages:
        click.echo(f"error: {m}", err=True)
    sys.exit(EXIT_CONFIG)


def _load_with(parser, path):
    doc, errors = load_json(path)
    if errors:
        _fail_config(errors)
    obj, errors = parser(doc)
    if errors:
        _fail_config(errors)
    return obj


def _resolution(spec: str | None, default: Discretization) -> Discretization:
    if spec is None:
        return default
    try:
        k, l, ns = spec.split(",")
        return Discretization(K=int(k), L=float(l), Ns=int(ns),
                              boundary_rule=default.boundary_rule)
    except (ValueError, ToolkitError) as exc:
        _fail_config([f"--resolution: {exc}"])


@click.group()
def main():
    """Numerical verification toolkit for half-cylinder operator orientations,
    double-cover lifting of rotation loops, and twisted chain complexes."""


@main.command()
@click.option("--loop", "loop_path", type=str, required=True,
              help="JSON file with a symmetric coefficient loop")
@click.option("--steps", type=int, default=1024, show_default=True)
@click.option("--json", "json_path", type=str, default=None)
def cz(loop_path, steps, json_path):
    """Integrate the linear flow of a symmetric loop and report its
    nondegeneracy and Conley-Zehnder index."""
    loop = _load_with(parse_symmetric_loop, loop_path)
    try:
        path = integrate_symplectic_path(loop, steps=steps)
        nondeg = is_nondegenerate(path)
        payload = {
            "n": loop.n,
            "steps": steps,
            "symplecticity_defect": path.symplecticity_defect(),
            "nondegenerate": bool(nondeg),
            "degeneracy_margin": nondegeneracy_margin(path.endpoint()),
        }
        if nondeg:
            idx = conley_zehnder_index(path)
            payload["conley_zehnder"] = idx.value
            payload["convention"] = idx.convention
        _emit(payload, json_path)
    except ToolkitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAIL)


def _field_and_disc(field_path, named, r, n, resolution, boundary):
    default = Discretization(K=8, L=6.0, Ns=120, boundary_rule=boundary)
    disc = _resolution(resolution, default)
    if field_path:
        fld = _load_with(parse_operator_field, field_path)
    elif named:
        doc = {"n": n, "domain": "half", "field": {"kind": "named", "name": named}}
        if r is not None:
            doc["field"]["r"] = r
        fld, errors = parse_operator_field(doc)
        if errors:
            _fail_config(errors)
    else:
        _fail_config(["one of --field or --named is required"])
    return fld, disc


@main.command()
@click.option("--field", "field_path", type=str, default=None,
              help="JSON file with an operator field")
@click.option("--named", type=str, default=None,
              help="built-in field name (minus_pi_I, T_r, W, scalar_interpolation)")
@click.option("--r", type=float, default=None, help="offset for the T_r family")
@click.option("--n", type=int, default=2)
@click.option("--resolution", type=str, default=None, help="K,L,Ns")
@click.option("--boundary", type=click.Choice(["spectral", "dirichlet"]),
              default="spectral", show_default=True)
@click.option("--json", "json_path", type=str, default=None)
def kernel(field_path, named, r, n, resolution, boundary, json_path):
    """Numerical kernel of a discretized cylinder operator."""
    fld, disc = _field_and_disc(field_path, named, r, n, resolution, boundary)
    try:
        op = assemble(fld, disc)
        kf = numerical_kernel(op)
        _emit({
            "field": fld.name, "domain": fld.domain,
            "resolution": {"K": disc.K, "L": disc.L, "Ns": disc.Ns,
                           "boundary": disc.boundary_rule},
            "kernel_dim": kf.dim,
            "gap_ratio": float(kf.gap_ratio),
            "sigma_next": float(kf.sigma_next),
            "sigma_max": float(kf.sigma_max),
            "structural_index": op.structural_index,
        }, json_path)
    except ToolkitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAIL)


@main.command()
@click.option("--field", "field_path", type=str, default=None)
@click.option("--named", type=str, default=None)
@click.option("--r", type=float, default=None)
@click.option("--n", type=int, default=1)
@click.option("--resolution", type=str, default=None, help="K,L,Ns")
@click.option("--json", "json_path", type=str, default=None)
def index(field_path, named, r, n, resolution, json_path):
    """Fredholm index estimate of a discretized cylinder operator."""
    fld, disc = _field_and_disc(field_path, named, r, n, resolution, "spectral")
    try:
        op = assemble(fld, disc)
        _emit({
            "field": fld.name,
            "index": fredholm_index_estimate(op),
            "structural_index": op.structural_index,
        }, json_path)
    except ToolkitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAIL)


@main.group()
def orient():
    """Determinant-line orientation transport and conjugation signs."""


@orient.command()
@click.option("--field", type=click.Choice(["T_r"]), default="T_r", show_default=True)
@click.option("--grid", type=int, default=16, show_default=True,
              help="number of parameter steps from offset 1 to 0")
@click.option("--resolution", type=str, default=None, help="K,L,Ns")
@click.option("--json", "json_path", type=str, default=None)
def transport(field, grid, resolution, json_path):
    """Transport the kernel orientation along the slid-rotation family."""
    disc = _resolution(resolution, Discretization(K=6, L=6.0, Ns=120))
    try:
        rs = np.linspace(1.0, 0.0, grid + 1)
        path = OperatorPath(fields=[rotation_homotopy_field(r) for r in rs],
                            disc=disc, params=tuple(rs))
        res = transport_orientation(path)
        _emit({
            "family": field, "grid": grid,
            "sign": res.sign.value,
            "kernel_dims": list(res.dims),
            "step_dets": [round(d, 6) for d in res.sign.step_dets],
        }, json_path)
    except ToolkitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAIL)


_UNITARIES = {
    "I": lambda: [identity_unitary(2)],
    "W": lambda: [cylinder_rotation_unitary()],
    "W2": lambda: [cylinder_rotation_unitary(), cylinder_rotation_unitary()],
    "WplusI": lambda: [cylinder_rotation_unitary().block_sum(1)],
    "VW": lambda: [small_rotation_unitary(1.0), cylinder_rotation_unitary()],
}


@orient.command()
@click.option("--u", "u_name", type=click.Choice(sorted(_UNITARIES)), required=True)
@click.option("--base", type=click.Choice(["minus_pi_I"]), default="minus_pi_I",
              show_default=True)
@click.option("--n", type=int, default=2, show_default=True)
@click.option("--steps", type=int, default=16, show_default=True)
@click.option("--resolution", type=str, default=None, help="K,L,Ns")
@click.option("--json", "json_path", type=str, default=None)
def conjugation(u_name, base, n, steps, resolution, json_path):
    """Orientation sign of conjugating a base operator by a unitary field."""
    disc = _resolution(resolution, Discretization(K=6, L=6.0, Ns=120))
    factors = _UNITARIES[u_name]()
    if factors[0].n != n:
        if u_name == "WplusI" and n != 3:
            _fail_config(["--u WplusI requires --n 3"])
        _fail_config([f"--u {u_name} requires --n {factors[0].n}"])
    try:
        sign = conjugation_sign(factors, constant_field(-np.pi, n=n), disc, steps=steps)
        _emit({
            "u": u_name, "base": base, "n": n,
            "sign": sign.value,
            "predicted": predict_sign(factors),
            "note": sign.note,
            "step_dets": [round(d, 6) for d in sign.step_dets],
        }, json_path)
    except ToolkitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAIL)


@main.command()
@click.option("--r", type=float, required=True, help="offset of the kernel pair in [0, 1]")
@click.option("--s-max", type=float, default=6.0, show_default=True)
@click.option("--s-count", type=int, default=60, show_default=True)
@click.option("--t-count", type=int, default=24, show_default=True)
@click.option("--json", "json_path", type=str, default=None)
def pair(r, s_max, s_count, t_count, json_path):
    """Export the closed-form kernel pair of the slid-rotation field as sampled
    grids (for cross-module comparison)."""
    from .oracles import kernel_pair

    try:
        p = kernel_pair(r)
    except ToolkitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    s_grid = np.linspace(0.0, s_max, s_count)
    t_grid = np.arange(t_count) / t_count
    u = np.stack([p.u(s, t_grid) for s in s_grid])
    v = np.stack([p.v(s, t_grid) for s in s_grid])
    _emit({
        "r": r, "branch": p.branch,
        "s": s_grid.tolist(), "t": t_grid.tolist(),
        "u_real": u.real.tolist(), "u_imag": u.imag.tolist(),
        "v_real": v.real.tolist(), "v_imag": v.imag.tolist(),
        "coefficients": {
            "u0": [[p.u0.real.tolist()], [p.u0.imag.tolist()]],
            "u1": [[p.u1.real.tolist()], [p.u1.imag.tolist()]],
            "v0": [[p.v0.real.tolist()], [p.v0.imag.tolist()]],
            "v1": [[p.v1.real.tolist()], [p.v1.imag.tolist()]],
        },
    }, json_path)


@main.command()
@click.option("--loop", "loop_path", type=str, default=None,
              help="JSON file with an SO(n) loop")
@click.option("--named", type=str, default=None,
              help="built-in loop: rotation | axis_rotation | constant")
@click.option("--turns", type=int, default=1)
@click.option("--axis", type=str, default="0,0,1")
@click.option("--json", "json_path", type=str, default=None)
def spin(loop_path, named, turns, axis, json_path):
    """Winding number, double-cover lifting and the resulting sign of a loop."""
    if loop_path:
        loop = _load_with(parse_so_loop, loop_path)
    elif named:
        doc = {"named": named, "turns": turns,
               "axis": [float(x) for x in axis.split(",")]}
        loop, errors = parse_so_loop(doc)
        if errors:
            _fail_config(errors)
    else:
        _fail_config(["one of --loop or --named is required"])
    try:
        res = lifts_to_spin(loop)
        payload = {"n": loop.n, "lifts": bool(res.lifts), "sign": lift_sign(loop),
                   "certificate": res.certificate}
        if loop.n == 2:
            payload["winding"] = winding_number(loop)
        _emit(payload, json_path)
    except ToolkitError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAIL)


@main.command("complex")
@click.option("--input", "input_path", type=str, required=True,
              help="JSON file with a graded complex datum")
@click.option("--json", "json_path", type=str, default=None)
def complex_cmd(input_path, json_path):
    """Validate a complex datum and report both homology flavors."""
    from .complexes import check_boundary_squared, homology
    from .schemas import parse_complex_datum

    datum = _load_with(parse_complex_datum, input_path)
    ok_std, _ = check_boundary_squared(datum, False)
    ok_tw, _ = check_boundary_squared(datum, True)
    payload = {
        "generators": len(datum.generators),
        "edges": len(datum.edges),
        "quadruple_identity": datum.check_quadruples(),
        "boundary_squared": {"standard": ok_std, "twisted": ok_tw},
    }
    for flavor, ok in (("standard", ok_std), ("twisted", ok_tw)):
        if ok:
            h = homology(datum, flavor == "twisted")
            payload[f"homology_{flavor}"] = [
                {"degree": k, "free_rank": free, "torsion": list(tor)}
                for k, free, tor in h.degrees]
    _emit(payload, json_path)
    if not (ok_std and ok_tw):
        sys.exit(EXIT_FAIL)


@main.command()
@click.option("--name", type=click.Choice(SUITE_NAMES), default="all", show_default=True)
@click.option("--config", "config_path", type=str, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--json", "json_path", type=str, default=None)
@click.option("--timings", is_flag=True, default=False,
              help="include wall-clock timings in the JSON report")
def suite(name, config_path, seed, json_path, timings):
    """Run a named verification battery; exit 0 iff every check passes."""
    cfg = SuiteConfig()
    if config_path:
        doc, errors = load_json(config_path)
        if errors:
            _fail_config(errors)
        try:
            cfg = SuiteConfig.from_document(doc)
        except SchemaError as exc:
            _fail_config(exc.errors)
    checks = run_suite(name, cfg, seed)
    click.echo(report_text(checks))
    _emit(report_json(checks, name, seed, timings=timings), json_path)
    sys.exit(0 if all(c.passed for c in checks) else EXIT_FAIL)


@main.command()
@click.argument("path", type=str)
def validate(path):
    """Validate a JSON input file of any supported kind."""
    try:
        kind, _, errors = validate_file(path)
    except OSError as exc:
        click.echo(f"io error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if errors:
        for e in errors:
            click.echo(f"schema error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    click.echo(f"ok: valid {kind} document")
    sys.exit(0)


if __name__ == "__main__":
    main()
