"""Closed-form analytic objects used as ground truth for the numerical modules.

Everything here is evaluated exactly (symbolic derivatives per branch, never
finite differences): the polynomial cutoff, the explicit unitary field that
unwinds a full boundary rotation into the half-cylinder, the one-parameter
slide of that unitary together with the coefficient fields it generates, the
two closed-form kernel families of those fields, and the decay-weighted
rotation integral that certifies the contractible case.

Complex conventions match :mod:`crorient.sympath`: C^n is R^{2n} with
z = q + i p and J0 = multiplication by i.  The half-cylinder operator reads
D_S u = d_s u - i d_t u - S(s,t) u with boundary values u(0, .) in i R^n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import InputError

__all__ = [
    "smoothstep", "smoothstep_derivative", "UnitaryField",
    "cylinder_rotation_unitary", "small_rotation_unitary", "identity_unitary",
    "KernelPair", "kernel_pair", "kernel_pair_two_mode", "kernel_pair_one_mode",
    "rotation_decay_integral",
]


def smoothstep(s):
    """Polynomial cutoff: 0 for s <= 0, 1 for s >= 1/2, C^2 and non-decreasing."""
    x = np.clip(2.0 * np.asarray(s, dtype=float), 0.0, 1.0)
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))


def smoothstep_derivative(s):
    x = np.clip(2.0 * np.asarray(s, dtype=float), 0.0, 1.0)
    return 2.0 * 30.0 * x * x * (1.0 - x) ** 2


@dataclass(frozen=True)
class UnitaryField:
    """Smooth map [0, +inf] x T -> U(n) with closed-form s- and t-derivatives.

    ``value``, ``ds`` and ``dt`` take scalar s and a 1d array of t values and
    return arrays of shape (len(t), n, n).  ``support`` is an s beyond which
    the field is identically the identity (all fields here become I at finite
    s, which also settles continuity at the compactified end).
    """

    n: int
    value: callable
    ds: callable
    dt: callable
    support: float
    name: str = ""

    def __matmul__(self, other: "UnitaryField") -> "UnitaryField":
        if self.n != other.n:
            raise InputError("unitary fields of different sizes cannot be composed")
        return UnitaryField(
            n=self.n,
            value=lambda s, t: self.value(s, t) @ other.value(s, t),
            ds=lambda s, t: self.ds(s, t) @ other.value(s, t) + self.value(s, t) @ other.ds(s, t),
            dt=lambda s, t: self.dt(s, t) @ other.value(s, t) + self.value(s, t) @ other.dt(s, t),
            support=max(self.support, other.support),
            name=f"{self.name}*{other.name}",
        )

    def block_sum(self, m: int) -> "UnitaryField":
        """Extend by the identity on m extra complex dimensions."""
        n, nn = self.n, self.n + m

        def pad(block, s, t, deriv):
            out = np.zeros((len(np.atleast_1d(t)), nn, nn), dtype=complex)
            out[:, :n, :n] = block(s, t)
            if not deriv:
                out[:, n:, n:] = np.eye(m)
            return out

        return UnitaryField(
            n=nn,
            value=lambda s, t: pad(self.value, s, t, False),
            ds=lambda s, t: pad(self.ds, s, t, True),
            dt=lambda s, t: pad(self.dt, s, t, True),
            support=self.support,
            name=f"{self.name}+I{m}",
        )

    def shifted(self, r: float) -> "UnitaryField":
        """Slide toward the boundary: U_r(s, t) = U(r + s, t)."""
        return UnitaryField(
            n=self.n,
            value=lambda s, t: self.value(r + s, t),
            ds=lambda s, t: self.ds(r + s, t),
            dt=lambda s, t: self.dt(r + s, t),
            support=max(self.support - r, 0.0),
            name=f"{self.name}@{r:g}",
        )

    def boundary_loop(self, t):
        """Samples of the boundary loop U(0, .); real orthogonal for admissible fields."""
        vals = self.value(0.0, np.asarray(t, dtype=float))
        if np.max(np.abs(vals.imag)) > 1e-10:
            raise InputError("boundary values are not real; the field does not preserve iR^n")
        return vals.real

    def check(self, t_count: int = 64, tol: float = 1e-10) -> None:
        """Pointwise unitarity, identity beyond the support, real rotation boundary."""
        t = np.arange(t_count) / t_count
        eye = np.eye(self.n)
        for s in (0.0, 0.2, 0.45, 0.5, 0.7, self.support, self.support + 3.0):
            vals = self.value(s, t)
            defect = np.max(np.abs(np.einsum("tij,tkj->tik", vals.conj(), vals) - eye))
            if defect > 1e-12:
                raise InputError(f"field is not unitary at s={s} (defect {defect:.2e})")
        far = self.value(self.support + 1.0, t)
        if np.max(np.abs(far - eye)) > tol:
            raise InputError("field is not the identity beyond its support")
        b = self.boundary_loop(t)
        orth = np.max(np.abs(np.einsum("tij,tkj->tik", b, b) - eye))
        dets = np.linalg.det(b)
        if orth > tol or np.max(np.abs(dets - 1.0)) > 1e-8:
            raise InputError("boundary loop is not special orthogonal")


def identity_unitary(n: int) -> UnitaryField:
    def const(s, t):
        return np.broadcast_to(np.eye(n, dtype=complex), (len(np.atleast_1d(t)), n, n)).copy()

    def zero(s, t):
        return np.zeros((len(np.atleast_1d(t)), n, n), dtype=complex)

    return UnitaryField(n=n, value=const, ds=zero, dt=zero, support=0.0, name="I")


def _rotation_branch(s, t, deriv):
    """Inner branch (s <= 1/2): normalized blend of the boundary rotation with diag(-i, i)."""
    t = np.asarray(t, dtype=float)
    phi = float(smoothstep(s))
    dphi = float(smoothstep_derivative(s))
    c, sn = np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)
    g = 1.0 - phi
    omega = 1.0 / np.sqrt(phi * phi + g * g)
    m = np.empty((len(t), 2, 2), dtype=complex)
    m[:, 0, 0] = g * c - 1j * phi
    m[:, 0, 1] = -g * sn
    m[:, 1, 0] = g * sn
    m[:, 1, 1] = g * c + 1j * phi
    if deriv == "none":
        return omega * m
    if deriv == "t":
        dm = np.empty_like(m)
        dm[:, 0, 0] = -2 * np.pi * g * sn
        dm[:, 0, 1] = -2 * np.pi * g * c
        dm[:, 1, 0] = 2 * np.pi * g * c
        dm[:, 1, 1] = -2 * np.pi * g * sn
        return omega * dm
    # s-derivative: product rule through phi and omega
    domega = -omega ** 3 * (phi - g) * dphi
    dm = np.empty_like(m)
    dm[:, 0, 0] = -dphi * c - 1j * dphi
    dm[:, 0, 1] = dphi * sn
    dm[:, 1, 0] = -dphi * sn
    dm[:, 1, 1] = -dphi * c + 1j * dphi
    return domega * m + omega * dm


def _diagonal_branch(s, t, deriv):
    """Outer branch (s >= 1/2): diag(-i e^{i pi/2 phi(s-1/2)}, i e^{-i pi/2 phi(s-1/2)})."""
    t = np.asarray(t, dtype=float)
    phi = float(smoothstep(s - 0.5))
    dphi = float(smoothstep_derivative(s - 0.5))
    a = -1j * np.exp(0.5j * np.pi * phi)
    b = 1j * np.exp(-0.5j * np.pi * phi)
    m = np.zeros((len(t), 2, 2), dtype=complex)
    if deriv == "none":
        m[:, 0, 0] = a
        m[:, 1, 1] = b
    elif deriv == "s":
        m[:, 0, 0] = a * 0.5j * np.pi * dphi
        m[:, 1, 1] = -b * 0.5j * np.pi * dphi
    return m


def cylinder_rotation_unitary() -> UnitaryField:
    """The U(2)-valued field equal to the full rotation loop at s = 0 and to the
    identity for s >= 1.

    Its boundary loop generates pi_1(SO(2)); conjugating a constant-coefficient
    half-cylinder operator by it is the model case of an orientation-reversing
    unitary conjugation.
    """

    def pick(s, t, deriv):
        if s <= 0.5:
            return _rotation_branch(s, t, deriv)
        return _diagonal_branch(s, t, deriv)

    return UnitaryField(
        n=2,
        value=lambda s, t: pick(s, t, "none"),
        ds=lambda s, t: pick(s, t, "s"),
        dt=lambda s, t: pick(s, t, "t"),
        support=1.0,
        name="W",
    )


def small_rotation_unitary(amplitude: float = 1.0) -> UnitaryField:
    """SO(2)-valued field R(amplitude * (1 - phi(s)) * sin 2 pi t); its boundary
    loop is contractible.  Identity for s >= 1/2."""

    def angle(s, t):
        return amplitude * (1.0 - float(smoothstep(s))) * np.sin(2 * np.pi * t)

    def rot(a):
        m = np.empty(a.shape + (2, 2), dtype=complex)
        m[..., 0, 0] = np.cos(a)
        m[..., 0, 1] = -np.sin(a)
        m[..., 1, 0] = np.sin(a)
        m[..., 1, 1] = np.cos(a)
        return m

    def gen_times(vals, a_dot):
        # d/dx R(a) = R(a) G with G the rotation generator
        g = np.array([[0.0, -1.0], [1.0, 0.0]])
        return a_dot[:, None, None] * (vals @ g)

    def value(s, t):
        return rot(angle(s, np.asarray(t, dtype=float)))

    def ds(s, t):
        t = np.asarray(t, dtype=float)
        a_dot = -amplitude * float(smoothstep_derivative(s)) * np.sin(2 * np.pi * t)
        return gen_times(rot(angle(s, t)), a_dot)

    def dt(s, t):
        t = np.asarray(t, dtype=float)
        a_dot = amplitude * (1.0 - float(smoothstep(s))) * 2 * np.pi * np.cos(2 * np.pi * t)
        return gen_times(rot(angle(s, t)), a_dot)

    return UnitaryField(n=2, value=value, ds=ds, dt=dt, support=0.5, name="V")


@dataclass(frozen=True)
class KernelPair:
    """Closed-form basis (u, v) of the two-dimensional kernel of the slid-rotation
    coefficient field at offset r, with the mode coefficients that define it."""

    r: float
    branch: str  # "two_mode" for r <= 1/2, "one_mode" for r >= 1/2
    u0: np.ndarray  # coefficient of e^{-pi s}
    u1: np.ndarray  # coefficient of e^{2 pi i t} e^{-3 pi s}
    v0: np.ndarray
    v1: np.ndarray

    def u(self, s, t):
        return self._eval(self.u0, self.u1, s, t)

    def v(self, s, t):
        return self._eval(self.v0, self.v1, s, t)

    def _eval(self, c0, c1, s, t):
        w = cylinder_rotation_unitary().shifted(self.r)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s = float(s)
        inner = (c0[None, :] * np.exp(-np.pi * s)
                 + c1[None, :] * np.exp(2j * np.pi * t)[:, None] * np.exp(-3 * np.pi * s))
        return np.einsum("tij,tj->ti", w.value(s, t), inner)


def kernel_pair_two_mode(r: float) -> KernelPair:
    """Kernel basis for offsets 0 <= r <= 1/2 (two Fourier modes)."""
    if not 0.0 <= r <= 0.5 + 1e-12:
        raise InputError("two-mode kernel family requires r in [0, 1/2]")
    phi = float(smoothstep(r))
    g = 1.0 - phi
    u0 = phi ** 2 * np.array([1, -1], dtype=complex) + g ** 2 * np.array([1j, 1j])
    v0 = phi ** 2 * np.array([1, 1], dtype=complex) + g ** 2 * np.array([-1j, 1j])
    u1 = phi * g * np.array([-1 - 1j, 1 - 1j])
    v1 = phi * g * np.array([1 - 1j, 1 + 1j])
    return KernelPair(r=float(r), branch="two_mode", u0=u0, u1=u1, v0=v0, v1=v1)


def kernel_pair_one_mode(r: float) -> KernelPair:
    """Kernel basis for offsets 1/2 <= r <= 1 (a single decaying mode)."""
    if not 0.5 - 1e-12 <= r <= 1.0:
        raise InputError("one-mode kernel family requires r in [1/2, 1]")
    phi = float(smoothstep(r - 0.5))
    e_minus = np.exp(-0.5j * np.pi * phi)
    e_plus = np.exp(0.5j * np.pi * phi)
    u0 = np.array([e_minus, -e_plus])
    v0 = np.array([e_minus, e_plus])
    zero = np.zeros(2, dtype=complex)
    return KernelPair(r=float(r), branch="one_mode", u0=u0, u1=zero, v0=v0, v1=zero)


def kernel_pair(r: float) -> KernelPair:
    if r < 0.0 or r > 1.0:
        raise InputError("kernel family offset must lie in [0, 1]")
    return kernel_pair_two_mode(r) if r <= 0.5 else kernel_pair_one_mode(r)


def rotation_decay_integral(theta, r: float, abserr: float = 1e-8) -> float:
    """2 pi * integral over [0, inf) of e^{-2 pi sigma} (cos 2 pi theta(sigma/r)
    - sin 2 pi theta(sigma/r)) d sigma.

    Measures the coefficient with which a slow unitary twist maps the decaying
    kernel generator to itself; tends to 1 as r grows.  ``theta`` must take
    integer values at 0 and at infinity.
    """
    if r <= 0:
        raise InputError("scale r must be positive")
    th0 = float(theta(0.0))
    th_inf = float(theta(1e9))
    for name, val in (("theta(0)", th0), ("theta(inf)", th_inf)):
        if abs(val - round(val)) > 1e-9:
            raise InputError(f"{name} = {val} is not an integer")

    def integrand(sigma):
        a = 2 * np.pi * float(theta(sigma / r))
        return np.exp(-2 * np.pi * sigma) * (np.cos(a) - np.sin(a))

    val, err = quad(integrand, 0.0, np.inf, epsabs=abserr / (4 * np.pi), limit=400)
    return 2 * np.pi * val
