"""Homotopy invariants of loops in SO(n): winding number for n = 2, the
double-cover lifting bit for n >= 3 via even Clifford algebra arithmetic, and
the resulting sign used by the twisted complexes.

A loop is a list of samples R(i/m) on the uniform grid of the circle; the
closing step from the last sample back to the first is part of the loop.
Consecutive samples must be close enough (operator norm distance <= 0.5) so
that each incremental rotation has a unique principal logarithm and the
double-cover lift of each step is unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import InputError, RefinementError

__all__ = ["SOLoop", "so_loop", "rotation_loop", "axis_rotation_loop", "constant_so_loop",
           "winding_number", "lifts_to_spin", "lift_sign", "LiftResult", "so_log"]

_FINENESS = 0.5
_MAX_DIM = 8
_HOLONOMY_TOL = 0.1


@dataclass(frozen=True)
class SOLoop:
    """Sampled loop in SO(n)."""

    n: int
    samples: np.ndarray  # (m, n, n)

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    def step(self, i: int) -> np.ndarray:
        """Incremental rotation from sample i to sample i+1 (cyclically)."""
        return self.samples[(i + 1) % self.count] @ self.samples[i].T

    def reversed(self) -> "SOLoop":
        rev = np.concatenate([self.samples[:1], self.samples[1:][::-1]], axis=0)
        return SOLoop(n=self.n, samples=rev)

    def pointwise_product(self, other: "SOLoop") -> "SOLoop":
        if other.n != self.n or other.count != self.count:
            raise InputError("loops must share dimension and sample count")
        return so_loop(np.einsum("kij,kjl->kil", self.samples, other.samples))

    def block_sum_identity(self, extra: int) -> "SOLoop":
        m = self.count
        out = np.tile(np.eye(self.n + extra), (m, 1, 1))
        out[:, :self.n, :self.n] = self.samples
        return SOLoop(n=self.n + extra, samples=out)


def so_loop(samples) -> SOLoop:
    """Validated loop: every sample orthogonal with det +1 to 1e-10, steps fine enough."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise InputError("samples must have shape (m, n, n)")
    n = arr.shape[1]
    eye = np.eye(n)
    for i, r in enumerate(arr):
        if np.max(np.abs(r.T @ r - eye)) > 1e-10:
            raise InputError(f"sample {i} is not orthogonal to 1e-10")
        if abs(np.linalg.det(r) - 1.0) > 1e-8:
            raise InputError(f"sample {i} does not have determinant +1")
    loop = SOLoop(n=n, samples=arr)
    for i in range(loop.count):
        gap = np.linalg.norm(loop.step(i) - eye, 2)
        if gap > _FINENESS:
            raise RefinementError(
                f"refine sampling: step {i} has size {gap:.3f} > {_FINENESS}")
    return loop


def rotation_loop(turns: int, count: int = 128) -> SOLoop:
    """Loop t -> plane rotation by 2 pi * turns * t in SO(2)."""
    t = np.arange(count) / count
    a = 2 * np.pi * turns * t
    out = np.empty((count, 2, 2))
    out[:, 0, 0] = np.cos(a)
    out[:, 0, 1] = -np.sin(a)
    out[:, 1, 0] = np.sin(a)
    out[:, 1, 1] = np.cos(a)
    return so_loop(out)


def axis_rotation_loop(axis, turns: int, count: int = 128) -> SOLoop:
    """Loop of rotations by 2 pi * turns * t about a fixed axis in SO(3)."""
    ax = np.asarray(axis, dtype=float)
    ax = ax / np.linalg.norm(ax)
    k = np.array([[0, -ax[2], ax[1]], [ax[2], 0, -ax[0]], [-ax[1], ax[0], 0]])
    t = np.arange(count) / count
    out = np.stack([np.eye(3) + np.sin(a) * k + (1 - np.cos(a)) * (k @ k)
                    for a in 2 * np.pi * turns * t])
    return so_loop(out)


def constant_so_loop(n: int, count: int = 16) -> SOLoop:
    return SOLoop(n=n, samples=np.tile(np.eye(n), (count, 1, 1)))


def so_log(r: np.ndarray) -> np.ndarray:
    """Principal logarithm of a rotation close to the identity (skew matrix)."""
    n = r.shape[0]
    if n == 2:
        theta = np.arctan2(r[1, 0], r[0, 0])
        return np.array([[0.0, -theta], [theta, 0.0]])
    if n == 3:
        c = 0.5 * (np.trace(r) - 1.0)
        theta = np.arccos(np.clip(c, -1.0, 1.0))
        skew = 0.5 * (r - r.T)
        if theta < 1e-8:
            return skew
        return (theta / np.sin(theta)) * skew
    a = scipy.linalg.logm(r)
    a = np.real(a)
    a = 0.5 * (a - a.T)
    if np.max(np.abs(scipy.linalg.expm(a) - r)) > 1e-8:
        raise InputError("rotation logarithm failed; sample is too far from the identity")
    return a


@lru_cache(maxsize=None)
def clifford_generators(n: int):
    """Anticommuting generators e_i with e_i^2 = +1 in the tensor-product
    (Pauli) representation on C^(2^ceil(n/2))."""
    if n > _MAX_DIM:
        raise InputError(f"dimension {n} exceeds the Clifford cap {_MAX_DIM}")
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    m = (n + 1) // 2
    gens = []
    for i in range(n):
        site, which = divmod(i, 2)
        factors = [sz] * site + [sx if which == 0 else sy] + [np.eye(2, dtype=complex)] * (m - site - 1)
        g = factors[0]
        for f in factors[1:]:
            g = np.kron(g, f)
        gens.append(g)
    return tuple(gens)


def _rotor(a: np.ndarray):
    """Double-cover lift exp((1/2) sum_{i<j} A_ij e_i e_j) of the rotation exp(A)."""
    n = a.shape[0]
    gens = clifford_generators(n)
    c = np.zeros_like(gens[0])
    for i in range(n):
        for j in range(i + 1, n):
            if a[i, j] != 0.0:
                c = c + (0.5 * a[i, j]) * (gens[i] @ gens[j])
    return scipy.linalg.expm(c)


@dataclass(frozen=True)
class LiftResult:
    lifts: bool
    winding: int | None
    certificate: float  # distance of the accumulated lift to the nearest of +-1


def winding_number(loop: SOLoop) -> int:
    """Degree of a loop in SO(2) via continuous angle lifting."""
    if loop.n != 2:
        raise InputError("winding number is defined for n = 2 only")
    angles = np.arctan2(loop.samples[:, 1, 0], loop.samples[:, 0, 0])
    closed = np.append(angles, angles[0])
    steps = np.diff(closed)
    steps = (steps + np.pi) % (2 * np.pi) - np.pi
    total = float(np.sum(steps)) / (2 * np.pi)
    k = int(np.round(total))
    if abs(total - k) > 0.05:
        raise RefinementError(f"winding total {total:.4f} is not close to an integer")
    return k


def lifts_to_spin(loop: SOLoop) -> LiftResult:
    """Whether the loop lifts to a closed loop in the double cover of SO(n).

    n = 1 always lifts; n = 2 lifts iff the winding is even; n >= 3 accumulates
    the even-Clifford lift of each incremental rotation and reads off whether
    the closed-loop holonomy is +1 or -1.
    """
    if loop.n == 1:
        return LiftResult(lifts=True, winding=None, certificate=0.0)
    if loop.n == 2:
        w = winding_number(loop)
        return LiftResult(lifts=w % 2 == 0, winding=w, certificate=0.0)
    gens = clifford_generators(loop.n)
    q = np.eye(gens[0].shape[0], dtype=complex)
    for i in range(loop.count):
        q = _rotor(so_log(loop.step(i))) @ q
    eye = np.eye(q.shape[0])
    d_plus = np.linalg.norm(q - eye, 2)
    d_minus = np.linalg.norm(q + eye, 2)
    cert = min(d_plus, d_minus)
    if cert > _HOLONOMY_TOL:
        raise RefinementError(
            f"refine sampling: holonomy is {cert:.3f} away from +-1")
    return LiftResult(lifts=bool(d_plus < d_minus), winding=None, certificate=float(cert))


def lift_sign(loop: SOLoop) -> int:
    """+1 if the loop lifts to the double cover, -1 otherwise."""
    return 1 if lifts_to_spin(loop).lifts else -1
