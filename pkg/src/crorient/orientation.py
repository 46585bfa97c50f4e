"""Transport of determinant-line orientations along paths of surjective
discretized operators, and the sign of unitary conjugation actions.

The orientation of a surjective operator is an ordered kernel frame up to a
positive-determinant change.  Transport aligns consecutive numerical kernel
frames by orthogonal projection and multiplies the signs of the alignment
determinants.  The conjugation sign compares two orientations of the kernel
of U D U^{-1}: the push-forward of a base frame through pointwise
multiplication by U, against parallel transport along the slide homotopy
U_r(s,t) = U(r+s, t), whose coefficient fields interpolate the conjugated
operator (r = 0) back to the base operator (r = support).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InputError, RefinementError, TransportError
from .operators import (DEFAULT_POLICY, Discretization, DiscretizedOperator,
                        GapPolicy, KernelFrame, OperatorField, assemble,
                        conjugation_field, numerical_kernel)
from .oracles import UnitaryField
from .spin import lift_sign, so_loop

__all__ = ["OperatorPath", "OrientationSign", "TransportResult",
           "transport_orientation", "conjugation_sign", "predict_sign",
           "boundary_loop_of"]

_ALIGNMENT_FLOOR = 0.5
_ANGLE_CAP = np.pi / 4
# smallest admissible nonkernel singular value along a transport path, in
# operator units (grid norms make it resolution independent); paths whose
# margin collapses are approaching a kernel-dimension jump and must fail
# loudly instead of transporting through the wall
_SURJECTIVITY_MARGIN = 0.5


@dataclass(frozen=True)
class OperatorPath:
    """Finite path of half-cylinder fields sharing one asymptotic loop."""

    fields: list
    disc: Discretization
    params: tuple = ()

    def __post_init__(self):
        if len(self.fields) < 2:
            raise InputError("a path needs at least two fields")
        ref = self.fields[0]
        t = np.arange(7) / 7.0
        for fld in self.fields[1:]:
            if fld.n != ref.n or fld.domain != ref.domain:
                raise InputError("path fields must share dimension and domain")
            for tv in t:
                if np.max(np.abs(fld.splus(tv) - ref.splus(tv))) > 1e-10:
                    raise InputError("path fields must share the asymptotic loop")


@dataclass(frozen=True)
class OrientationSign:
    value: int
    step_dets: tuple
    note: str = ""


@dataclass(frozen=True)
class TransportResult:
    frame: KernelFrame            # raw canonical frame at the endpoint
    sign: OrientationSign         # transported orientation relative to the start frame
    dims: tuple
    start_frame: KernelFrame


def _aligned_det(prev: np.ndarray, cur: np.ndarray) -> float:
    m = prev.T @ cur
    return float(np.linalg.det(m))


def transport_orientation(path: OperatorPath, policy: GapPolicy = DEFAULT_POLICY,
                          surjectivity_margin: float = _SURJECTIVITY_MARGIN) -> TransportResult:
    """Transport the kernel orientation from the first field to the last.

    Every operator on the path must be surjective (no tiny singular values
    beyond the structural count, and the smallest nonkernel singular value
    above the margin) with a constant kernel dimension, and consecutive
    kernels must overlap well; otherwise this fails loudly rather than
    regularize.
    """
    frames = []
    dims = []
    for fld in path.fields:
        op = assemble(fld, path.disc)
        kf = numerical_kernel(op, policy)
        if path.disc.boundary_rule == "spectral" and kf.dim != op.structural_index:
            raise TransportError(
                f"path leaves the surjective stratum: kernel dim {kf.dim} != "
                f"structural index {op.structural_index}")
        if kf.sigma_next < surjectivity_margin:
            raise TransportError(
                f"path leaves the surjective stratum: nonkernel singular value "
                f"{kf.sigma_next:.3f} below the margin {surjectivity_margin:g}")
        frames.append(kf)
        dims.append(kf.dim)
    if len(set(dims)) != 1:
        raise TransportError(f"path leaves the surjective stratum: kernel dims {dims}")
    dets = []
    sign = 1
    for prev, cur in zip(frames[:-1], frames[1:]):
        angles = scipy.linalg.subspace_angles(prev.vectors, cur.vectors)
        if angles.size and np.max(angles) > _ANGLE_CAP:
            raise RefinementError(
                f"refine parameter grid: principal angle {np.max(angles):.3f} > pi/4")
        det = _aligned_det(prev.vectors, cur.vectors)
        if abs(det) < _ALIGNMENT_FLOOR:
            raise RefinementError(
                f"refine parameter grid: alignment determinant {det:.3f} below 0.5")
        dets.append(det)
        sign *= 1 if det > 0 else -1
    return TransportResult(frame=frames[-1],
                           sign=OrientationSign(value=sign, step_dets=tuple(dets)),
                           dims=tuple(dims), start_frame=frames[0])


def _slide_fields(u: UnitaryField, base: OperatorField, steps: int):
    """Fields of the slide homotopy, ordered from the base (r = support) to the
    conjugated operator (r = 0)."""
    support = max(u.support, 1e-6)
    rs = np.linspace(support, 0.0, steps + 1)
    return [conjugation_field(u.shifted(r), base) for r in rs]


def _push_frame(op_from: DiscretizedOperator, op_to: DiscretizedOperator,
                frame: np.ndarray, u: UnitaryField) -> np.ndarray:
    """Multiply a kernel frame pointwise by the unitary and express it in the
    target operator's columns, orthonormalized without changing the
    orientation."""
    t = op_from.t_grid
    uvals = np.stack([u.value(s, t) for s in op_from.s_grid])  # (Ns, Nt, n, n)
    cols = []
    for j in range(frame.shape[1]):
        grid = op_from.reconstruct(frame[:, j])
        pushed = np.einsum("stij,stj->sti", uvals, grid)
        x, defect = op_to.inject(pushed)
        if defect > 1e-6:
            raise TransportError(f"pushed frame violates the boundary conditions ({defect:.2e})")
        cols.append(x)
    g = np.column_stack(cols)
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))[None, :]
    return q


def _product_unitary(factors) -> UnitaryField:
    if isinstance(factors, UnitaryField):
        return factors
    if not factors:
        raise InputError("at least one unitary factor is required")
    u = factors[0]
    for f in factors[1:]:
        u = u @ f
    return u


def conjugation_sign(factors, base: OperatorField, disc: Discretization,
                     steps: int = 16, policy: GapPolicy = DEFAULT_POLICY,
                     splus=None, max_steps: int = 256) -> OrientationSign:
    """Sign of the conjugation D -> U D U^{-1} on the determinant line.

    ``factors`` is a UnitaryField or a list [U_1, ..., U_k] standing for the
    product U = U_1 ... U_k.  The connecting path is the slide homotopy of the
    total unitary, U_r(s,t) = U(r+s, t); the parameter grid is refined
    automatically when frame alignment is too coarse, while a surjectivity
    failure along the path aborts (no path is invented through a stratum
    wall).
    """
    u = _product_unitary(factors)
    if u.n != base.n:
        raise InputError("unitary factors must match the base dimension")
    u.check()
    if splus is not None:
        t = np.arange(5) / 5.0
        for tv in t:
            if np.max(np.abs(base.splus(tv) - splus(tv))) > 1e-10:
                raise InputError("declared asymptotic loop differs from the base field's")

    result = None
    while True:
        fields = [base] + _slide_fields(u, base, steps)[1:]
        try:
            result = transport_orientation(OperatorPath(fields=fields, disc=disc), policy)
            break
        except RefinementError:
            if 2 * steps > max_steps:
                raise
            steps *= 2

    op_base = assemble(base, disc)
    op_conj = assemble(fields[-1], disc)
    pushed = _push_frame(op_base, op_conj, result.start_frame.vectors, u)
    det = _aligned_det(result.frame.vectors, pushed)
    if abs(det) < _ALIGNMENT_FLOOR:
        raise TransportError(f"push/transport comparison ill conditioned (det {det:.3f})")
    value = result.sign.value * (1 if det > 0 else -1)
    return OrientationSign(value=value,
                           step_dets=result.sign.step_dets + (det,),
                           note=f"transport sign {result.sign.value}, comparison det {det:.3f}, "
                                f"steps {steps}")


def boundary_loop_of(factors, count: int = 256):
    """SO(n) loop traced by the product of the factors at s = 0."""
    if isinstance(factors, UnitaryField):
        factors = [factors]
    t = np.arange(count) / count
    vals = None
    for f in factors:
        b = f.value(0.0, t)
        vals = b if vals is None else np.einsum("tij,tjk->tik", vals, b)
    if np.max(np.abs(vals.imag)) > 1e-10:
        raise InputError("boundary loop is not real orthogonal")
    return so_loop(vals.real)


def predict_sign(factors, count: int = 256) -> int:
    """Theory-side prediction: +1 iff the boundary loop of U lifts to the double
    cover of SO(n) (always for n = 1; even winding for n = 2)."""
    loop = boundary_loop_of(factors, count)
    return lift_sign(loop)
