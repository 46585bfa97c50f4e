"""JSON ingestion and validation for the toolkit's data types.

Every reader returns (object, errors): a non-empty error list means the input
was rejected; messages carry the JSON path of the offending element.  All
emitted documents carry the top-level tag {"schema": "cr-orient/1"}.
"""

from __future__ import annotations

import json

import numpy as np

from . import SCHEMA_TAG
from .complexes import ComplexDatum, Edge, Generator
from .errors import InputError, RefinementError, SchemaError
from .operators import Discretization, OperatorField, constant_field, sampled_field
from .spin import SOLoop, axis_rotation_loop, constant_so_loop, rotation_loop, so_loop
from .sympath import SymmetricLoop, constant_loop, sampled_loop

__all__ = ["load_json", "validate_document", "validate_file", "sniff_kind",
           "parse_symmetric_loop", "parse_operator_field", "parse_discretization",
           "parse_so_loop", "parse_complex_datum", "tagged"]


def tagged(payload: dict) -> dict:
    out = {"schema": SCHEMA_TAG}
    out.update(payload)
    return out


def load_json(path: str):
    """Parse a JSON file; IO errors propagate as OSError, syntax errors are
    reported with their line number."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text), []
    except json.JSONDecodeError as exc:
        return None, [f"line {exc.lineno}, column {exc.colno}: {exc.msg}"]


def _matrix(obj, path, errors, square_even=True):
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError):
        errors.append(f"{path}: not a numeric matrix")
        return None
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        errors.append(f"{path}: expected a square matrix, got shape {arr.shape}")
        return None
    if square_even and arr.shape[0] % 2:
        errors.append(f"{path}: matrix size must be even (2n x 2n)")
        return None
    return arr


def parse_symmetric_loop(doc, path="$"):
    errors = []
    if not isinstance(doc, dict):
        return None, [f"{path}: expected an object"]
    kind = doc.get("kind")
    if kind == "constant":
        mat = _matrix(doc.get("matrix"), f"{path}.matrix", errors)
        if errors:
            return None, errors
        try:
            return constant_loop(mat), []
        except InputError as exc:
            return None, [f"{path}.matrix: {exc}"]
    if kind == "sampled":
        samples = doc.get("samples")
        try:
            return sampled_loop(samples), []
        except (InputError, ValueError, TypeError) as exc:
            return None, [f"{path}.samples: {exc}"]
    return None, [f"{path}.kind: expected 'constant' or 'sampled', got {kind!r}"]


def _named_field(spec, n, domain, path, errors):
    from .operators import rotation_homotopy_field, scalar_interpolation_field

    name = spec.get("name")
    if name == "minus_pi_I":
        if n is None:
            errors.append(f"{path}: named field 'minus_pi_I' needs top-level n")
            return None
        return constant_field(-np.pi, n=n, domain=domain, name="minus_pi_I")
    if name == "T_r":
        r = spec.get("r")
        if not isinstance(r, (int, float)) or not 0 <= r <= 1:
            errors.append(f"{path}.r: offset must be a number in [0, 1]")
            return None
        extra = int(spec.get("extra_dims", 0))
        return rotation_homotopy_field(float(r), extra_dims=extra)
    if name == "W":
        # coefficient field of the operator conjugated by the boundary-rotation
        # unitary; equals the r = 0 member of the slide family
        return rotation_homotopy_field(0.0, extra_dims=int(spec.get("extra_dims", 0)))
    if name == "scalar_interpolation":
        try:
            return scalar_interpolation_field(float(spec["c_minus"]), float(spec["c_plus"]))
        except (KeyError, TypeError, ValueError):
            errors.append(f"{path}: scalar_interpolation needs numeric c_minus and c_plus")
            return None
    errors.append(f"{path}.name: unknown named field {name!r}")
    return None


def parse_operator_field(doc, path="$"):
    errors = []
    if not isinstance(doc, dict):
        return None, [f"{path}: expected an object"]
    domain = doc.get("domain", "half")
    if domain not in ("half", "full"):
        errors.append(f"{path}.domain: expected 'half' or 'full', got {domain!r}")
    n = doc.get("n")
    spec = doc.get("field")
    if not isinstance(spec, dict):
        return None, errors + [f"{path}.field: expected an object"]
    kind = spec.get("kind", "named" if "name" in spec else None)
    if kind == "constant":
        if "scalar" in spec:
            if n is None:
                return None, errors + [f"{path}: scalar constant field needs top-level n"]
            try:
                return constant_field(float(spec["scalar"]), n=int(n), domain=domain), errors
            except InputError as exc:
                return None, errors + [f"{path}.field: {exc}"]
        mat = _matrix(spec.get("matrix"), f"{path}.field.matrix", errors)
        if mat is None:
            return None, errors
        try:
            return constant_field(mat, domain=domain), errors
        except InputError as exc:
            return None, errors + [f"{path}.field: {exc}"]
    if kind == "named":
        fld = _named_field(spec, n, domain, f"{path}.field", errors)
        return (fld, errors) if fld is not None else (None, errors)
    if kind == "sampled":
        try:
            return sampled_field(spec["s"], spec["samples"], domain=domain), errors
        except (KeyError, InputError, ValueError, TypeError) as exc:
            return None, errors + [f"{path}.field: {exc}"]
    return None, errors + [f"{path}.field.kind: unknown kind {kind!r}"]


def parse_discretization(doc, path="$"):
    if not isinstance(doc, dict):
        return None, [f"{path}: expected an object"]
    try:
        disc = Discretization(K=int(doc["K"]), L=float(doc["L"]), Ns=int(doc["Ns"]),
                              boundary_rule=doc.get("boundary", "spectral"))
        return disc, []
    except KeyError as exc:
        return None, [f"{path}: missing key {exc}"]
    except (InputError, TypeError, ValueError) as exc:
        return None, [f"{path}: {exc}"]


def parse_so_loop(doc, path="$"):
    if not isinstance(doc, dict):
        return None, [f"{path}: expected an object"]
    if "named" in doc:
        name = doc["named"]
        count = int(doc.get("count", 128))
        try:
            if name == "rotation":
                return rotation_loop(int(doc.get("turns", 1)), count=count), []
            if name == "axis_rotation":
                return axis_rotation_loop(doc["axis"], int(doc.get("turns", 1)),
                                          count=count), []
            if name == "constant":
                return constant_so_loop(int(doc.get("n", 2)), count=count), []
        except (KeyError, InputError, RefinementError, ValueError) as exc:
            return None, [f"{path}: {exc}"]
        return None, [f"{path}.named: unknown loop {name!r}"]
    samples = doc.get("samples")
    if samples is None:
        return None, [f"{path}: expected 'samples' or 'named'"]
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        return None, [f"{path}.samples: expected shape (m, n, n), got {arr.shape}"]
    eye = np.eye(arr.shape[1])
    errors = []
    for i, r in enumerate(arr):
        if np.max(np.abs(r.T @ r - eye)) > 1e-10:
            errors.append(f"{path}.samples[{i}]: not orthogonal to 1e-10")
        elif abs(np.linalg.det(r) - 1.0) > 1e-8:
            errors.append(f"{path}.samples[{i}]: determinant is not +1")
    if errors:
        return None, errors
    try:
        return so_loop(arr), []
    except RefinementError as exc:
        return None, [f"{path}.samples: {exc}"]


def parse_complex_datum(doc, path="$"):
    errors = []
    if not isinstance(doc, dict):
        return None, [f"{path}: expected an object"]
    gens = []
    for i, g in enumerate(doc.get("generators", [])):
        gp = f"{path}.generators[{i}]"
        if not isinstance(g, dict) or "id" not in g or "grade" not in g:
            errors.append(f"{gp}: needs 'id' and 'grade'")
            continue
        loop = None
        if g.get("loop") is not None:
            loop, lerr = parse_so_loop(g["loop"], f"{gp}.loop")
            errors.extend(lerr)
        gens.append(Generator(id=str(g["id"]), grade=int(g["grade"]), loop=loop))
    edges = []
    for i, e in enumerate(doc.get("edges", [])):
        ep = f"{path}.edges[{i}]"
        if not isinstance(e, dict) or "src" not in e or "tgt" not in e:
            errors.append(f"{ep}: needs 'src' and 'tgt'")
            continue
        eps = e.get("eps", 1)
        if eps not in (1, -1):
            errors.append(f"{ep}.eps: must be 1 or -1")
            continue
        delta = e.get("delta", 1)
        if isinstance(delta, dict):
            loop_doc = delta.get("loop", delta)
            delta, lerr = parse_so_loop(loop_doc, f"{ep}.delta")
            errors.extend(lerr)
            if lerr:
                continue
        elif delta not in (1, -1):
            errors.append(f"{ep}.delta: must be 1, -1 or a loop object")
            continue
        edges.append(Edge(src=str(e["src"]), tgt=str(e["tgt"]), epsilon=int(eps),
                          delta=delta))
    quads = []
    for i, q in enumerate(doc.get("quadruples", [])):
        if (not isinstance(q, (list, tuple)) or len(q) != 4
                or any(not isinstance(j, int) for j in q)):
            errors.append(f"{path}.quadruples[{i}]: expected four edge indices")
            continue
        quads.append(tuple(q))
    if errors:
        return None, errors
    try:
        datum = ComplexDatum(generators=tuple(gens), edges=tuple(edges),
                             quadruples=tuple(quads))
    except InputError as exc:
        return None, [f"{path}: {exc}"]
    return datum, []


_PARSERS = {
    "symmetric_loop": parse_symmetric_loop,
    "operator_field": parse_operator_field,
    "discretization": parse_discretization,
    "so_loop": parse_so_loop,
    "complex": parse_complex_datum,
}


def sniff_kind(doc) -> str | None:
    if not isinstance(doc, dict):
        return None
    if doc.get("type") in _PARSERS:
        return doc["type"]
    if "generators" in doc or "edges" in doc:
        return "complex"
    if "field" in doc:
        return "operator_field"
    if "named" in doc or ("samples" in doc and "kind" not in doc):
        return "so_loop"
    if doc.get("kind") in ("constant", "sampled"):
        return "symmetric_loop"
    if "K" in doc and "Ns" in doc:
        return "discretization"
    return None


def validate_document(doc):
    """Validate a parsed document of any supported kind; returns
    (kind, object, errors)."""
    kind = sniff_kind(doc)
    if kind is None:
        return None, None, ["$: unrecognized document; expected one of "
                            + ", ".join(sorted(_PARSERS))]
    obj, errors = _PARSERS[kind](doc)
    return kind, obj, errors


def validate_file(path: str):
    """(kind, object, errors) for a JSON file; never partially accepts."""
    doc, errors = load_json(path)
    if errors:
        return None, None, errors
    return validate_document(doc)
