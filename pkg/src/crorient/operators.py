"""Finite-dimensional realizations of the Cauchy-Riemann-type operators
D_S u = d_s u - i d_t u - S(s,t) u on the half-cylinder [0,L] x T (boundary
values in the vertical Lagrangian iR^n at s = 0) and on the full cylinder.

Discretization: Fourier collocation in t with modes |k| <= K (2K+1 points),
box/midpoint differencing in s (second order, no spurious modes for first
order systems).  At the truncation end the trace is constrained to the
decaying invariant subspace of the asymptotic operator i d_t + S^+, which is
what makes the column/row count of the matrix carry the analytic Fredholm
index; plain homogeneous Dirichlet remains available as an option (kernels
are still found, the index is not structural there).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateLoopError, GapError, InputError
from .sympath import (SymmetricLoop, constant_loop, integrate_symplectic_path,
                      is_nondegenerate, standard_j)

__all__ = [
    "OperatorField", "constant_field", "field_from_complex", "conjugation_field",
    "rotation_homotopy_field", "scalar_interpolation_field", "sampled_field",
    "Discretization", "DiscretizedOperator", "assemble_half_cylinder",
    "assemble_full_cylinder", "assemble", "GapPolicy", "KernelFrame",
    "numerical_kernel", "fredholm_index_estimate", "embed_complex",
]

_ASYMPTOTIC_DEFECT_TOL = 1e-9


def embed_complex(c: np.ndarray) -> np.ndarray:
    """Real 2n x 2n form of a complex-linear map on C^n, batched over leading axes."""
    c = np.asarray(c)
    n = c.shape[-1]
    out = np.empty(c.shape[:-2] + (2 * n, 2 * n))
    out[..., :n, :n] = c.real
    out[..., :n, n:] = -c.imag
    out[..., n:, :n] = c.imag
    out[..., n:, n:] = c.real
    return out


@dataclass(frozen=True)
class OperatorField:
    """Coefficient field S(s, t) of a cylinder operator.

    ``values(s, t_array)`` returns real matrices of shape (len(t), 2n, 2n).
    ``splus`` (and ``sminus`` on the full cylinder) are the asymptotic
    symmetric loops; fields used here reach them exactly at finite s.
    """

    n: int
    domain: str  # "half" | "full"
    values: callable
    splus: SymmetricLoop
    sminus: SymmetricLoop | None = None
    name: str = ""

    def __post_init__(self):
        if self.domain not in ("half", "full"):
            raise InputError("domain must be 'half' or 'full'")
        if self.domain == "full" and self.sminus is None:
            raise InputError("full-cylinder field needs both asymptotic loops")

    def __call__(self, s: float, t: np.ndarray) -> np.ndarray:
        return self.values(float(s), np.atleast_1d(np.asarray(t, dtype=float)))


def constant_field(matrix, n: int | None = None, domain: str = "half",
                   name: str = "") -> OperatorField:
    loop = constant_loop(matrix, n=n)
    mat = loop(0.0)

    def values(s, t):
        return np.broadcast_to(mat, (len(t),) + mat.shape).copy()

    return OperatorField(n=loop.n, domain=domain, values=values, splus=loop,
                         sminus=loop if domain == "full" else None,
                         name=name or "constant")


def field_from_complex(n, domain, cfun, splus, sminus=None, name=""):
    """Field from a complex-linear coefficient map ``cfun(s, t_array) -> (T, n, n)``."""

    def values(s, t):
        return embed_complex(cfun(s, t))

    return OperatorField(n=n, domain=domain, values=values, splus=splus,
                         sminus=sminus, name=name)


def conjugation_field(u, base: OperatorField) -> OperatorField:
    """Coefficient field of U D_base U^{-1}:
    S' = (d_s U) U^* - i (d_t U) U^* + U S U^*.

    ``u`` is a :class:`crorient.oracles.UnitaryField` with U = I beyond its
    support, so the asymptotic loop is unchanged.
    """
    if u.n != base.n:
        raise InputError("unitary field and base field dimensions differ")

    def values(s, t):
        uval = u.value(s, t)
        uh = np.conj(np.transpose(uval, (0, 2, 1)))
        cplx = u.ds(s, t) @ uh - 1j * (u.dt(s, t) @ uh)
        out = embed_complex(cplx)
        ur = embed_complex(uval)
        out += ur @ base(s, t) @ np.transpose(ur, (0, 2, 1))
        return out

    return OperatorField(n=base.n, domain=base.domain, values=values,
                         splus=base.splus, sminus=base.sminus,
                         name=f"conj[{u.name}]{base.name}")


def rotation_homotopy_field(r: float, extra_dims: int = 0) -> OperatorField:
    """The slid-rotation coefficient field at offset r in [0, 1] on C^2,
    optionally extended by identity directions: the field of the operator
    conjugated by the boundary-rotation unitary slid to depth r.  Equals the
    constant -pi*I for r + s >= 1; at r = 1 it is constantly -pi*I."""
    from .oracles import cylinder_rotation_unitary  # local import avoids a cycle

    if not 0.0 <= r <= 1.0:
        raise InputError("offset r must lie in [0, 1]")
    u = cylinder_rotation_unitary().shifted(r)
    if extra_dims:
        u = u.block_sum(extra_dims)
    base = constant_field(-np.pi, n=2 + extra_dims, name="minus_pi_I")
    fld = conjugation_field(u, base)
    return OperatorField(n=fld.n, domain="half", values=fld.values,
                         splus=fld.splus, name=f"T_r[{r:g}]")


def scalar_interpolation_field(c_minus: float, c_plus: float) -> OperatorField:
    """Full-cylinder scalar field interpolating c_minus*I (s <= 0) to c_plus*I
    (s >= 1/2) through the smooth cutoff."""
    from .oracles import smoothstep

    def values(s, t):
        c = c_minus + (c_plus - c_minus) * float(smoothstep(s))
        return np.broadcast_to(c * np.eye(2), (len(t), 2, 2)).copy()

    return OperatorField(n=1, domain="full", values=values,
                         splus=constant_loop(c_plus, n=1),
                         sminus=constant_loop(c_minus, n=1),
                         name=f"interp[{c_minus:g}->{c_plus:g}]")


def sampled_field(s_points, samples, domain: str = "half", name: str = "sampled") -> OperatorField:
    """Field from samples on an s grid and a uniform t grid (odd count);
    linear interpolation in s, trigonometric interpolation in t, constant
    extension beyond the s range."""
    s_points = np.asarray(s_points, dtype=float)
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 4 or arr.shape[0] != len(s_points):
        raise InputError("samples must have shape (len(s), mt, 2n, 2n)")
    mt = arr.shape[1]
    if mt % 2 == 0:
        raise InputError("t sample count must be odd")
    n = arr.shape[2] // 2
    coeffs = np.fft.fft(arr, axis=1) / mt
    freqs = np.fft.fftfreq(mt, 1.0 / mt)

    def eval_t(slice_coeffs, t):
        phases = np.exp(2j * np.pi * np.outer(t, freqs))
        return np.real(np.tensordot(phases, slice_coeffs, axes=(1, 0)))

    def values(s, t):
        s = float(np.clip(s, s_points[0], s_points[-1]))
        k = int(np.searchsorted(s_points, s, side="right") - 1)
        k = min(max(k, 0), len(s_points) - 2)
        w = (s - s_points[k]) / (s_points[k + 1] - s_points[k])
        c = (1 - w) * coeffs[k] + w * coeffs[k + 1]
        return eval_t(c, t)

    splus = SymmetricLoop(n=n, values=lambda t: eval_t(coeffs[-1], np.atleast_1d(t))[0],
                          kind="sampled")
    sminus = None
    if domain == "full":
        sminus = SymmetricLoop(n=n, values=lambda t: eval_t(coeffs[0], np.atleast_1d(t))[0],
                               kind="sampled")
    return OperatorField(n=n, domain=domain, values=values, splus=splus,
                         sminus=sminus, name=name)


@dataclass(frozen=True)
class Discretization:
    """Resolution parameters: Fourier modes |k| <= K, s-truncation L, Ns grid points."""

    K: int
    L: float
    Ns: int
    boundary_rule: str = "spectral"  # "spectral" | "dirichlet"

    def __post_init__(self):
        if self.K < 4:
            raise InputError("K must be >= 4")
        if self.Ns < 8 * self.K:
            raise InputError("Ns must be >= 8K")
        if self.L < 4:
            raise InputError("L must be >= 4")
        if self.boundary_rule not in ("spectral", "dirichlet"):
            raise InputError("boundary_rule must be 'spectral' or 'dirichlet'")

    @property
    def nt(self) -> int:
        return 2 * self.K + 1


def fourier_diff_matrix(nt: int) -> np.ndarray:
    """Dense differentiation matrix for period-1 trigonometric interpolants."""
    freqs = np.fft.fftfreq(nt, 1.0 / nt)
    return np.real(np.fft.ifft(2j * np.pi * freqs[:, None] * np.fft.fft(np.eye(nt), axis=0),
                               axis=0))


def _level_operator_base(n: int, nt: int) -> np.ndarray:
    # matrix of i d_t on the collocated real coordinates
    return np.kron(fourier_diff_matrix(nt), standard_j(n))


def _block_diag_add(m: np.ndarray, blocks: np.ndarray, size: int) -> np.ndarray:
    out = m.copy()
    for tau in range(blocks.shape[0]):
        sl = slice(tau * size, (tau + 1) * size)
        out[sl, sl] += blocks[tau]
    return out


def _asymptotic_matrix(loop: SymmetricLoop, nt: int) -> np.ndarray:
    t = np.arange(nt) / nt
    blocks = np.stack([loop(tv) for tv in t])
    return _block_diag_add(_level_operator_base(loop.n, nt), blocks, 2 * loop.n)


def _invariant_basis(m: np.ndarray, side: str) -> np.ndarray:
    """Orthonormal basis of the stable ('lhp') or unstable ('rhp') invariant
    subspace of the asymptotic operator; rejects non-hyperbolic input."""
    eigs = np.linalg.eigvals(m)
    if np.min(np.abs(eigs.real)) < 1e-8 * max(1.0, np.max(np.abs(eigs))):
        raise DegenerateLoopError("asymptotic operator has a near-imaginary eigenvalue")
    _, z, sdim = scipy.linalg.schur(m, output="real", sort=side)
    return z[:, :sdim]


def _check_asymptotics(fld: OperatorField, s_end: float, loop: SymmetricLoop, nt: int):
    t = np.arange(nt) / nt
    want = np.stack([loop(tv) for tv in t])
    got = fld(s_end, t)
    defect = float(np.max(np.abs(got - want)))
    if defect > _ASYMPTOTIC_DEFECT_TOL:
        raise InputError(
            f"field has not reached its asymptotic loop at s={s_end:g} (defect {defect:.2e})")


def _require_nondegenerate(loop: SymmetricLoop):
    path = integrate_symplectic_path(loop, steps=512)
    if not is_nondegenerate(path):
        raise DegenerateLoopError("asymptotic loop is degenerate")


@dataclass
class DiscretizedOperator:
    """Sparse real matrix realizing D_S with boundary conditions eliminated,
    plus the bookkeeping to move between column vectors and grid functions."""

    matrix: sp.csr_matrix
    n: int
    domain: str
    disc: Discretization
    field: OperatorField
    s_grid: np.ndarray
    t_grid: np.ndarray
    start_basis: np.ndarray  # level-0 parametrization, (B, d0)
    end_basis: np.ndarray    # last-level parametrization, (B, d1)
    _norm: float | None = dc_field(default=None, repr=False)

    @property
    def level_size(self) -> int:
        return 2 * self.n * self.t_grid.size

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def structural_index(self) -> int:
        return self.matrix.shape[1] - self.matrix.shape[0]

    def column_layout(self):
        """(d0, interior_offset, B, levels, d1): columns are the level-0
        parameters, then full interior levels, then the end parameters."""
        d0 = self.start_basis.shape[1]
        return d0, d0, self.level_size, self.s_grid.size, self.end_basis.shape[1]

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        """Column vector -> complex grid function of shape (Ns, Nt, n)."""
        d0, off, b, levels, d1 = self.column_layout()
        n, nt = self.n, self.t_grid.size
        grid = np.empty((levels, nt, n), dtype=complex)

        def to_complex(w):
            w = w.reshape(nt, 2 * n)
            return w[:, :n] + 1j * w[:, n:]

        grid[0] = to_complex(self.start_basis @ x[:d0])
        for j in range(1, levels - 1):
            grid[j] = to_complex(x[off + (j - 1) * b: off + j * b])
        grid[-1] = to_complex(self.end_basis @ x[off + (levels - 2) * b:])
        return grid

    def inject(self, grid: np.ndarray):
        """Complex grid function -> (column vector, boundary projection defect)."""
        d0, off, b, levels, d1 = self.column_layout()
        n, nt = self.n, self.t_grid.size
        scale = max(float(np.max(np.abs(grid))), 1e-300)

        def to_real(z):
            w = np.empty((nt, 2 * n))
            w[:, :n] = z.real
            w[:, n:] = z.imag
            return w.ravel()

        x = np.empty(self.matrix.shape[1])
        w0 = to_real(grid[0])
        x[:d0] = self.start_basis.T @ w0
        defect = float(np.linalg.norm(w0 - self.start_basis @ x[:d0])) / scale
        for j in range(1, levels - 1):
            x[off + (j - 1) * b: off + j * b] = to_real(grid[j])
        wl = to_real(grid[-1])
        x[off + (levels - 2) * b:] = self.end_basis.T @ wl
        defect = max(defect,
                     float(np.linalg.norm(wl - self.end_basis @ x[off + (levels - 2) * b:])) / scale)
        return x, defect

    def grid_eval(self, fn) -> np.ndarray:
        """Sample a callable fn(s, t_array) -> (Nt, n) complex on the grid."""
        return np.stack([np.asarray(fn(s, self.t_grid)) for s in self.s_grid])

    def operator_norm(self) -> float:
        if self._norm is None:
            ncols = self.matrix.shape[1]
            v = np.ones(ncols) / np.sqrt(ncols)
            for _ in range(40):
                w = self.matrix @ v
                v = self.matrix.T @ w
                nv = np.linalg.norm(v)
                if nv == 0:
                    break
                v /= nv
            self._norm = float(np.linalg.norm(self.matrix @ v))
        return self._norm

    def relative_residual(self, x: np.ndarray) -> float:
        """Scale-free residual |A x| / (|A| |x|) of a candidate kernel vector."""
        nx = np.linalg.norm(x)
        if nx == 0:
            raise InputError("zero vector has no relative residual")
        return float(np.linalg.norm(self.matrix @ x) / (self.operator_norm() * nx))


def _boundary_injection(n: int, nt: int) -> np.ndarray:
    """Injection of the free boundary parameters at s=0: values in iR^n."""
    e = np.zeros((2 * n * nt, n * nt))
    for tau in range(nt):
        for comp in range(n):
            e[tau * 2 * n + n + comp, tau * n + comp] = 1.0
    return e


def _assemble(fld: OperatorField, disc: Discretization, s_grid: np.ndarray,
              start_basis: np.ndarray, end_basis: np.ndarray) -> DiscretizedOperator:
    n, nt = fld.n, disc.nt
    b = 2 * n * nt
    t_grid = np.arange(nt) / nt
    h = s_grid[1] - s_grid[0]
    base = _level_operator_base(n, nt)
    eye = np.eye(b)
    levels = s_grid.size

    d0 = start_basis.shape[1]
    cols = d0 + (levels - 2) * b + end_basis.shape[1]
    # column offset of the parameter block feeding each level
    col_off = [0] + [d0 + (j - 1) * b for j in range(1, levels)]

    data, rows, colidx = [], [], []
    for j in range(levels - 1):
        m_mid = _block_diag_add(base, fld(0.5 * (s_grid[j] + s_grid[j + 1]), t_grid), 2 * n)
        left = -eye / h - 0.5 * m_mid
        right = eye / h - 0.5 * m_mid
        if j == 0:
            left = left @ start_basis
        if j == levels - 2:
            right = right @ end_basis
        r0 = j * b
        for blk, c0 in ((left, col_off[j]), (right, col_off[j + 1])):
            nr, nc = blk.shape
            data.append(blk.ravel())
            rows.append(r0 + np.repeat(np.arange(nr), nc))
            colidx.append(c0 + np.tile(np.arange(nc), nr))
    a = sp.coo_matrix((np.concatenate(data),
                       (np.concatenate(rows), np.concatenate(colidx))),
                      shape=((levels - 1) * b, cols)).tocsr()
    return DiscretizedOperator(matrix=a, n=n, domain=fld.domain, disc=disc, field=fld,
                               s_grid=s_grid, t_grid=t_grid,
                               start_basis=start_basis, end_basis=end_basis)


def assemble_half_cylinder(fld: OperatorField, disc: Discretization) -> DiscretizedOperator:
    """Discretize D_S on [0, L] x T with boundary values in iR^n at s = 0 and
    the truncation rule of ``disc`` at s = L."""
    if fld.domain != "half":
        raise InputError("field is not a half-cylinder field")
    _require_nondegenerate(fld.splus)
    _check_asymptotics(fld, disc.L, fld.splus, disc.nt)
    n, nt = fld.n, disc.nt
    s_grid = np.linspace(0.0, disc.L, disc.Ns)
    start = _boundary_injection(n, nt)
    if disc.boundary_rule == "spectral":
        end = _invariant_basis(_asymptotic_matrix(fld.splus, nt), "lhp")
    else:
        end = np.zeros((2 * n * nt, 0))
    return _assemble(fld, disc, s_grid, start, end)


def assemble_full_cylinder(fld: OperatorField, disc: Discretization) -> DiscretizedOperator:
    """Discretize D_S on [-L, L] x T with the truncation rule of ``disc`` at
    both ends (decay toward s = -inf constrains the trace at -L to the
    unstable subspace of the asymptotic operator there)."""
    if fld.domain != "full":
        raise InputError("field is not a full-cylinder field")
    _require_nondegenerate(fld.splus)
    _require_nondegenerate(fld.sminus)
    _check_asymptotics(fld, disc.L, fld.splus, disc.nt)
    _check_asymptotics(fld, -disc.L, fld.sminus, disc.nt)
    n, nt = fld.n, disc.nt
    s_grid = np.linspace(-disc.L, disc.L, disc.Ns)
    if disc.boundary_rule == "spectral":
        start = _invariant_basis(_asymptotic_matrix(fld.sminus, nt), "rhp")
        end = _invariant_basis(_asymptotic_matrix(fld.splus, nt), "lhp")
    else:
        start = np.zeros((2 * n * nt, 0))
        end = np.zeros((2 * n * nt, 0))
    return _assemble(fld, disc, s_grid, start, end)


def assemble(fld: OperatorField, disc: Discretization) -> DiscretizedOperator:
    if fld.domain == "half":
        return assemble_half_cylinder(fld, disc)
    return assemble_full_cylinder(fld, disc)


@dataclass(frozen=True)
class GapPolicy:
    """Adaptive threshold for splitting the singular spectrum: values below
    tiny_rel * sigma_max count as kernel, and the split must be certified by a
    ratio of at least ``gap`` between the neighbors across it."""

    gap: float = 1e3
    tiny_rel: float = 1e-4
    dense_cutoff: int = 900
    probe: int = 8
    probe_cap: int = 40


DEFAULT_POLICY = GapPolicy()


@dataclass(frozen=True)
class KernelFrame:
    """Ordered orthonormal basis of a numerical kernel with its gap certificate."""

    dim: int
    vectors: np.ndarray          # (cols, dim)
    sigmas: np.ndarray           # the dim smallest singular values
    sigma_next: float
    sigma_max: float
    gap_ratio: float


def _canonical_frame(v: np.ndarray) -> np.ndarray:
    if v.shape[1] == 0:
        return v
    q, _ = np.linalg.qr(v)
    key_len = min(q.shape[0], 256)
    keys = np.round(np.abs(q[:key_len, :]).T, 9)
    order = sorted(range(q.shape[1]), key=lambda i: tuple(-keys[i]))
    q = q[:, order]
    for i in range(q.shape[1]):
        idx = int(np.argmax(np.abs(q[:, i])))
        if q[idx, i] < 0:
            q[:, i] = -q[:, i]
    return q


def _sigma_max_estimate(a: sp.csr_matrix) -> float:
    ncols = a.shape[1]
    v = np.ones(ncols) / np.sqrt(ncols)
    for _ in range(40):
        w = a @ v
        v = a.T @ w
        nv = np.linalg.norm(v)
        if nv == 0:
            return 0.0
        v /= nv
    return float(np.linalg.norm(a @ v))


def _smallest_singular(a: sp.csr_matrix, policy: GapPolicy, hint: int):
    """Ascending smallest singular values of ``a`` with right singular vectors.

    Returns (sigmas, vectors, sigma_max); len(sigmas) always exceeds the tiny
    count so the certificate neighbor is available.
    """
    m, ncols = a.shape
    if max(m, ncols) <= policy.dense_cutoff:
        _, s, vt = np.linalg.svd(a.toarray(), full_matrices=True)
        pad = ncols - len(s)  # exact structural null directions when cols > rows
        sig = np.concatenate([np.zeros(pad), s[::-1]])
        order = list(range(len(s), ncols)) + list(range(len(s) - 1, -1, -1))
        vecs = vt.T[:, order]
        return sig, vecs, float(s[0]) if len(s) else 0.0

    sigma_max = _sigma_max_estimate(a)
    gram = (a.T @ a).tocsc()
    shift = -max((1e-3 * sigma_max) ** 2, 1e-12)
    k = max(policy.probe, hint + 3)
    v0 = np.ones(ncols)
    while True:
        k = min(k, ncols - 2)
        vals, vecs = spla.eigsh(gram, k=k, sigma=shift, which="LM", v0=v0, maxiter=5000)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        sig = np.sqrt(np.clip(vals, 0.0, None))
        tiny = int(np.sum(sig < policy.tiny_rel * sigma_max)) if sigma_max else 0
        if tiny < k - 1 or k >= min(policy.probe_cap, ncols - 2):
            return sig, vecs, sigma_max
        k += 8


def _split_spectrum(sig: np.ndarray, sigma_max: float, policy: GapPolicy):
    """(kernel count, sigma_next, certified gap ratio); raises on an uncertified split."""
    cut = policy.tiny_rel * sigma_max
    d = int(np.sum(sig < cut))
    floor = 1e-10 * max(sigma_max, 1e-300)
    if d == 0:
        ratio = float(sig[0] / cut) if len(sig) else np.inf
        return 0, float(sig[0]) if len(sig) else np.inf, ratio
    if d >= len(sig):
        raise GapError("all probed singular values are tiny; enlarge the probe")
    ratio = float(sig[d] / max(sig[d - 1], floor))
    if ratio < policy.gap:
        raise GapError(
            f"no clear spectral gap: sigma_{d+1}/sigma_{d} = {ratio:.1f} < {policy.gap:g}")
    return d, float(sig[d]), ratio


def numerical_kernel(op: DiscretizedOperator, policy: GapPolicy = DEFAULT_POLICY) -> KernelFrame:
    """Orthonormal frame of all right singular vectors below the adaptive
    threshold, with the gap certificate recorded; deterministic ordering."""
    hint = max(op.structural_index, 0)
    sig, vecs, sigma_max = _smallest_singular(op.matrix, policy, hint)
    if sigma_max == 0.0:
        raise InputError("zero operator")
    d, sigma_next, ratio = _split_spectrum(sig, sigma_max, policy)
    frame = _canonical_frame(vecs[:, :d])
    return KernelFrame(dim=d, vectors=frame, sigmas=sig[:d].copy(),
                       sigma_next=sigma_next, sigma_max=sigma_max, gap_ratio=ratio)


def _kernel_dim(a: sp.csr_matrix, policy: GapPolicy, hint: int):
    sig, _, sigma_max = _smallest_singular(a, policy, hint)
    return _split_spectrum(sig, sigma_max, policy)[0]


def fredholm_index_estimate(op: DiscretizedOperator, policy: GapPolicy = DEFAULT_POLICY) -> int:
    """dim ker A - dim ker A^T, both sides certified by the gap policy.

    With the spectral truncation rule both counts are exact rank data and the
    result reproduces the analytic index of the cylinder operator.
    """
    d_ker = _kernel_dim(op.matrix, policy, max(op.structural_index, 0))
    d_coker = _kernel_dim(sp.csr_matrix(op.matrix.T), policy, max(-op.structural_index, 0))
    return d_ker - d_coker
