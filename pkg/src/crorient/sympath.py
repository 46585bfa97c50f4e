"""Linear Hamiltonian systems: symplectic paths and their Conley-Zehnder index.

Conventions.  R^{2n} carries coordinates (q, p) identified with C^n via
z = q + ip.  The standard complex structure J0 acts as multiplication by i,
i.e. the real matrix (0 -I; I 0), so exp(theta*J0) is the rotation by theta
and the linear flow of a constant coefficient loop S = c*I is
gamma(t) = exp(c*t*J0).

The Conley-Zehnder convention is pinned by the anchor case
mu(exp(-pi*t*J0)) = -1 for n = 1, which is the normalization under which the
half-cylinder operator of this package has Fredholm index -mu.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLoopError, InputError, RefinementError

CZ_CONVENTION = "rotation-anchored: mu(exp(-pi t J0)) = -1 in n=1"

_SYMMETRY_TOL = 1e-12
_DEGENERACY_THRESHOLD = 1e-8


def standard_j(n: int) -> np.ndarray:
    """Real 2n x 2n matrix of multiplication by i in (q, p) coordinates."""
    j = np.zeros((2 * n, 2 * n))
    j[:n, n:] = -np.eye(n)
    j[n:, :n] = np.eye(n)
    return j


@dataclass(frozen=True)
class SymmetricLoop:
    """Periodic loop of symmetric 2n x 2n real matrices, period 1.

    ``values(t)`` must accept a scalar in [0, 1).  Use the constructors
    below rather than calling this directly for the common cases.
    """

    n: int
    values: callable
    kind: str = "callable"

    def __post_init__(self):
        if self.n < 1:
            raise InputError("dimension n must be >= 1")
        for t in (0.0, 0.31, 0.77):
            s = np.asarray(self.values(t), dtype=float)
            if s.shape != (2 * self.n, 2 * self.n):
                raise InputError(f"loop values must be {2*self.n}x{2*self.n}, got {s.shape}")
            if np.max(np.abs(s - s.T)) > _SYMMETRY_TOL:
                raise InputError("loop values must be symmetric to 1e-12")

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.values(t % 1.0), dtype=float)


def constant_loop(matrix, n: int | None = None) -> SymmetricLoop:
    """Constant symmetric loop; ``matrix`` may be a scalar (multiple of I) or a 2n x 2n array."""
    if np.isscalar(matrix):
        if n is None:
            raise InputError("scalar constant loop needs an explicit n")
        mat = float(matrix) * np.eye(2 * n)
    else:
        mat = np.asarray(matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] % 2:
            raise InputError("constant loop matrix must be square of even size")
        n = mat.shape[0] // 2
    return SymmetricLoop(n=n, values=lambda t, m=mat: m, kind="constant")


def sampled_loop(samples) -> SymmetricLoop:
    """Loop from uniform samples S(k/m); evaluated anywhere by trigonometric interpolation."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2] or arr.shape[1] % 2:
        raise InputError("samples must have shape (m, 2n, 2n)")
    n = arr.shape[1] // 2
    coeffs = np.fft.fft(arr, axis=0) / arr.shape[0]
    freqs = np.fft.fftfreq(arr.shape[0], 1.0 / arr.shape[0])

    def values(t, c=coeffs, f=freqs):
        phases = np.exp(2j * np.pi * f * t)
        return np.real(np.tensordot(phases, c, axes=(0, 0)))

    return SymmetricLoop(n=n, values=values, kind="sampled")


def block_sum(*loops: SymmetricLoop) -> SymmetricLoop:
    """Direct sum of loops, acting on the concatenated (q, p) coordinates."""
    ntot = sum(lp.n for lp in loops)

    def values(t):
        out = np.zeros((2 * ntot, 2 * ntot))
        off = 0
        for lp in loops:
            s = lp(t)
            m = lp.n
            out[off:off + m, off:off + m] = s[:m, :m]
            out[off:off + m, ntot + off:ntot + off + m] = s[:m, m:]
            out[ntot + off:ntot + off + m, off:off + m] = s[m:, :m]
            out[ntot + off:ntot + off + m, ntot + off:ntot + off + m] = s[m:, m:]
            off += m
        return out

    return SymmetricLoop(n=ntot, values=values, kind="blocksum")


@dataclass(frozen=True)
class SymplecticPath:
    """Samples gamma(t_i) of a symplectic path on a uniform grid of [0, 1], gamma(0) = I."""

    n: int
    samples: np.ndarray  # (steps+1, 2n, 2n)
    times: np.ndarray

    @classmethod
    def from_samples(cls, samples, check: bool = True, tol: float = 1e-6) -> "SymplecticPath":
        arr = np.asarray(samples, dtype=float)
        n = arr.shape[1] // 2
        path = cls(n=n, samples=arr, times=np.linspace(0.0, 1.0, arr.shape[0]))
        if check:
            if np.max(np.abs(arr[0] - np.eye(2 * n))) > 1e-12:
                raise InputError("path must start at the identity")
            defect = path.symplecticity_defect()
            if defect > tol:
                raise InputError(f"samples are not symplectic (defect {defect:.2e})")
        return path

    def endpoint(self) -> np.ndarray:
        return self.samples[-1]

    def symplecticity_defect(self) -> float:
        j = standard_j(self.n)
        vals = np.einsum("kji,jl,klm->kim", self.samples, j, self.samples) - j
        return float(np.max(np.abs(vals)))


def integrate_symplectic_path(loop: SymmetricLoop, steps: int = 1024) -> SymplecticPath:
    """Solve d/dt gamma = J0 S(t) gamma, gamma(0) = I with the implicit midpoint rule.

    The midpoint (Cayley) step preserves the symplectic form exactly, so the
    symplecticity defect of the result is at round-off level.
    """
    if steps < 16:
        raise InputError("steps must be >= 16")
    n = loop.n
    j = standard_j(n)
    h = 1.0 / steps
    eye = np.eye(2 * n)
    gam = np.empty((steps + 1, 2 * n, 2 * n))
    gam[0] = eye
    for m in range(steps):
        a = j @ loop((m + 0.5) * h)
        gam[m + 1] = np.linalg.solve(eye - 0.5 * h * a, (eye + 0.5 * h * a) @ gam[m])
    return SymplecticPath(n=n, samples=gam, times=np.linspace(0.0, 1.0, steps + 1))


def nondegeneracy_margin(endpoint: np.ndarray) -> float:
    """|det(A - I)| normalized by the 2n-th power of the operator norm of A."""
    a = np.asarray(endpoint, dtype=float)
    scale = max(1.0, np.linalg.norm(a, 2))
    return float(abs(np.linalg.det(a - np.eye(a.shape[0]))) / scale ** a.shape[0])


def is_nondegenerate(path: SymplecticPath) -> bool:
    """True iff gamma(1) has no eigenvalue 1, up to the fixed numerical threshold."""
    return nondegeneracy_margin(path.endpoint()) > _DEGENERACY_THRESHOLD


@dataclass(frozen=True)
class CZIndex:
    value: int
    convention: str = CZ_CONVENTION
    certificate: float = field(default=0.0)  # distance of the raw winding total to the integer


def _unit_circle_clusters(g: np.ndarray, n: int):
    """Unit-circle eigenvalue clusters of g in the open upper half plane.

    Yields (phi, p, q): the angle in (0, pi) and the signature of the Krein
    form v* (-i J0) v on the cluster's eigenspace.  Eigenvalues off the circle
    have a null Krein form, so borderline hyperbolic pairs drop out with
    (p, q) = (0, 0) instead of corrupting the count.
    """
    h = -1j * standard_j(n)
    w, vecs = np.linalg.eig(g)
    scale = max(1.0, float(np.max(np.abs(w))))
    upper = [k for k in range(len(w))
             if w[k].imag > 1e-9 * scale and abs(abs(w[k]) - 1.0) < 1e-3 * (1 + abs(w[k]))]
    used = set()
    out = []
    for k in upper:
        if k in used:
            continue
        cluster = [m for m in upper if m not in used and abs(w[m] - w[k]) < 1e-5 * scale]
        used.update(cluster)
        basis = vecs[:, cluster]
        gram = basis.conj().T @ h @ basis
        gram = 0.5 * (gram + gram.conj().T)
        eigs = np.linalg.eigvalsh(gram)
        zeta = 1e-8 * max(1.0, float(np.max(np.abs(eigs))) if eigs.size else 1.0)
        p = int(np.sum(eigs > zeta))
        q = int(np.sum(eigs < -zeta))
        out.append((float(np.angle(w[k])), p, q))
    return out, w


def _krein_determinant(g: np.ndarray, n: int) -> complex:
    """Normalized determinant on the symplectic group: the continuous circle map
    that equals det_C on unitaries.

    Value: (-1)^(m/2) * prod over upper unit-circle clusters of w^(p - q),
    where m counts negative real eigenvalues and (p, q) is the cluster's Krein
    signature.  Multiplicative under direct sums and invariant under symplectic
    conjugation.
    """
    clusters, w = _unit_circle_clusters(g, n)
    scale = max(1.0, float(np.max(np.abs(w))))
    m_negative = int(np.sum((np.abs(w.imag) <= 1e-9 * scale) & (w.real < 0)))
    rho = complex(-1.0 if (m_negative // 2) % 2 else 1.0)
    for phi, p, q in clusters:
        rho *= np.exp(1j * phi) ** (p - q)
    return rho / abs(rho)


def conley_zehnder_index(path: SymplecticPath) -> CZIndex:
    """Integer index of a nondegenerate symplectic path.

    Computed as the continuous winding of the normalized (Krein-weighted)
    determinant along gamma(t), plus the endpoint correction
    sum (p - q)(pi - phi) that rotates every elliptic eigenvalue pair of
    gamma(1) to -1; the total is an integer multiple of pi up to a certified
    tolerance.  Anchored so that mu(exp(-pi t J0)) = -1 in n = 1.
    """
    if not is_nondegenerate(path):
        raise DegenerateLoopError("gamma(1) has eigenvalue 1; index undefined")
    n = path.n
    angles = np.empty(path.samples.shape[0])
    for k, g in enumerate(path.samples):
        angles[k] = np.angle(_krein_determinant(g, n))
    steps = np.diff(angles)
    steps = (steps + np.pi) % (2 * np.pi) - np.pi
    if np.max(np.abs(steps)) > 0.9 * np.pi:
        raise RefinementError("path sampling too coarse for winding lift; increase steps")
    delta = float(np.sum(steps))
    correction = 0.0
    for phi, p, q in _unit_circle_clusters(path.endpoint(), n)[0]:
        correction += (p - q) * (np.pi - phi)
    ratio = (delta + correction) / np.pi
    k = int(np.round(ratio))
    cert = abs(ratio - k)
    if cert > 0.1:
        raise RefinementError(
            f"winding total {ratio:.4f} is not within 0.1 of an integer; refine the path")
    return CZIndex(value=k, certificate=cert)
