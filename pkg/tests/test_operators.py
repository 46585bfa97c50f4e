import numpy as np
import pytest
import scipy.linalg

from crorient.errors import DegenerateLoopError, GapError, InputError
from crorient.operators import (
    Discretization,
    GapPolicy,
    assemble_full_cylinder,
    assemble_half_cylinder,
    constant_field,
    embed_complex,
    fredholm_index_estimate,
    fourier_diff_matrix,
    numerical_kernel,
    rotation_homotopy_field,
    sampled_field,
    scalar_interpolation_field,
    _split_spectrum,
)
from crorient.oracles import kernel_pair

DISC = Discretization(K=6, L=6.0, Ns=96)


def half_cylinder_kernel_count(c: float, n: int = 1) -> int:
    """Independent mode-count oracle for the constant scalar field c*I (c < 0,
    c not an even multiple of pi): solutions decay like e^{-(2 pi k - c) s} and
    the boundary trace pairs mode k with mode -k.

    Mode 0 contributes one real dimension per complex coordinate (imaginary
    axis); a pair (k, -k) contributes two iff both modes decay, i.e.
    2 pi k < -c; a decaying mode whose partner grows is forced to vanish.
    """
    count = 1
    k = 1
    while 2 * np.pi * k < -c:
        count += 2
        k += 1
    return n * count


def test_fourier_diff_matrix_is_exact_on_low_modes():
    nt = 9
    d = fourier_diff_matrix(nt)
    t = np.arange(nt) / nt
    for k in range(-4, 5):
        f = np.exp(2j * np.pi * k * t)
        assert np.max(np.abs(d @ f - 2j * np.pi * k * f)) < 1e-10


def test_embed_complex_represents_multiplication():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    z = rng.normal(size=3) + 1j * rng.normal(size=3)
    w = a @ z
    zr = np.concatenate([z.real, z.imag])
    wr = embed_complex(a) @ zr
    assert np.allclose(wr[:3] + 1j * wr[3:], w)


@pytest.mark.parametrize("c,n", [(-np.pi, 1), (-3 * np.pi, 1), (-np.pi, 2)])
def test_kernel_dimension_matches_mode_count_oracle(c, n):
    op = assemble_half_cylinder(constant_field(c, n=n), DISC)
    kf = numerical_kernel(op)
    assert kf.dim == half_cylinder_kernel_count(c, n)
    assert kf.gap_ratio >= 1e3
    # surjective: no tiny singular values beyond the structural count
    assert kf.dim == op.structural_index
    gram = kf.vectors.T @ kf.vectors
    assert np.max(np.abs(gram - np.eye(kf.dim))) < 1e-12


def test_kernel_vector_matches_decaying_exponential():
    op = assemble_half_cylinder(constant_field(-np.pi, n=1), DISC)
    kf = numerical_kernel(op)
    grid = op.reconstruct(kf.vectors[:, 0])
    target = op.grid_eval(lambda s, t: 1j * np.exp(-np.pi * s) * np.ones((len(t), 1)))
    v, w = grid.ravel(), target.ravel()
    alpha = np.real(np.vdot(w, v)) / np.real(np.vdot(w, w))
    assert np.linalg.norm(v - alpha * w) / np.linalg.norm(alpha * w) < 3e-3


def test_boundary_trace_exactness():
    op = assemble_half_cylinder(constant_field(-3 * np.pi, n=1), DISC)
    kf = numerical_kernel(op)
    for j in range(kf.dim):
        grid = op.reconstruct(kf.vectors[:, j])
        assert np.max(np.abs(grid[0].real)) < 1e-10


@pytest.mark.parametrize("c,n,expected", [(-np.pi, 1, 1), (-3 * np.pi, 1, 3), (-np.pi, 2, 2)])
def test_index_estimate(c, n, expected):
    op = assemble_half_cylinder(constant_field(c, n=n), DISC)
    assert fredholm_index_estimate(op) == expected


def test_full_cylinder_constant_is_invertible():
    op = assemble_full_cylinder(constant_field(-np.pi, n=1, domain="full"), DISC)
    kf = numerical_kernel(op)
    assert kf.dim == 0
    assert fredholm_index_estimate(op) == 0


def test_full_cylinder_interpolation_index_two():
    fld = scalar_interpolation_field(-np.pi, -3 * np.pi)
    op = assemble_full_cylinder(fld, DISC)
    assert op.structural_index == 2
    assert fredholm_index_estimate(op) == 2


def test_degenerate_asymptotics_rejected():
    with pytest.raises(DegenerateLoopError):
        assemble_half_cylinder(constant_field(0.0, n=1), DISC)
    with pytest.raises(DegenerateLoopError):
        assemble_full_cylinder(constant_field(-2 * np.pi, n=1, domain="full"), DISC)


def test_domain_mismatch_rejected():
    with pytest.raises(InputError):
        assemble_full_cylinder(constant_field(-np.pi, n=1), DISC)
    with pytest.raises(InputError):
        assemble_half_cylinder(constant_field(-np.pi, n=1, domain="full"), DISC)


def test_resolution_floor_rejected():
    with pytest.raises(InputError):
        Discretization(K=3, L=6.0, Ns=96)
    with pytest.raises(InputError):
        Discretization(K=6, L=3.0, Ns=96)
    with pytest.raises(InputError):
        Discretization(K=6, L=6.0, Ns=40)


def test_resolution_stability_of_dims_and_index():
    fld = rotation_homotopy_field(0.3)
    coarse = Discretization(K=6, L=6.0, Ns=96)
    fine = Discretization(K=12, L=8.0, Ns=192)
    for disc in (coarse, fine):
        op = assemble_half_cylinder(fld, disc)
        assert numerical_kernel(op).dim == 2
        assert fredholm_index_estimate(op) == 2


def test_oracle_residual_and_refinement_halving():
    """Discretizing a closed-form kernel element gives a small scale-free
    residual that at least halves when K and Ns double."""
    pair = kernel_pair(0.4)
    res = []
    for disc in (Discretization(K=6, L=6.0, Ns=400),
                 Discretization(K=12, L=6.0, Ns=800)):
        op = assemble_half_cylinder(rotation_homotopy_field(0.4), disc)
        x, defect = op.inject(op.grid_eval(pair.u))
        assert defect < 1e-8
        res.append(op.relative_residual(x))
    assert res[0] <= 1e-4
    assert res[1] <= 0.5 * res[0]


def test_rotation_family_kernel_angles():
    disc = Discretization(K=8, L=6.0, Ns=240)
    for r in (0.0, 0.5, 0.9):
        op = assemble_half_cylinder(rotation_homotopy_field(r), disc)
        kf = numerical_kernel(op)
        pair = kernel_pair(r)
        gu, _ = op.inject(op.grid_eval(pair.u))
        gv, _ = op.inject(op.grid_eval(pair.v))
        q, _ = np.linalg.qr(np.column_stack([gu, gv]))
        assert kf.dim == 2
        assert np.max(scipy.linalg.subspace_angles(kf.vectors, q)) < 1e-2


def test_dirichlet_rule_finds_the_same_kernel():
    spectral = assemble_half_cylinder(constant_field(-np.pi, n=1), DISC)
    dirichlet = assemble_half_cylinder(
        constant_field(-np.pi, n=1),
        Discretization(K=6, L=6.0, Ns=96, boundary_rule="dirichlet"))
    k1 = numerical_kernel(spectral)
    k2 = numerical_kernel(dirichlet)
    assert k1.dim == k2.dim == 1
    g1 = spectral.reconstruct(k1.vectors[:, 0]).ravel()
    g2 = dirichlet.reconstruct(k2.vectors[:, 0]).ravel()
    corr = abs(np.vdot(g1, g2)) / (np.linalg.norm(g1) * np.linalg.norm(g2))
    assert corr > 1 - 1e-4


def test_gap_policy_flags_unresolved_spectra():
    # values straddling the threshold without a certified ratio across it
    with pytest.raises(GapError):
        _split_spectrum(np.array([1e-5, 8e-4, 1.0]), 1.0, GapPolicy())
    with pytest.raises(GapError):
        _split_spectrum(np.array([1e-5, 2e-5, 3e-5]), 1.0, GapPolicy())
    d, nxt, ratio = _split_spectrum(np.array([1e-9, 0.02, 0.5]), 1.0, GapPolicy())
    assert d == 1 and ratio >= 1e3
    d, _, _ = _split_spectrum(np.array([0.02, 0.5]), 1.0, GapPolicy())
    assert d == 0


def test_sampled_field_roundtrip():
    s_pts = np.linspace(0.0, 6.0, 25)
    t_count = 9
    t = np.arange(t_count) / t_count
    base = -np.pi * np.eye(2)
    samples = np.broadcast_to(base, (len(s_pts), t_count, 2, 2)).copy()
    fld = sampled_field(s_pts, samples)
    assert np.max(np.abs(fld(2.5, t) - base)) < 1e-12
    op = assemble_half_cylinder(fld, DISC)
    assert numerical_kernel(op).dim == 1


def test_inject_reconstruct_roundtrip():
    op = assemble_half_cylinder(constant_field(-np.pi, n=2), DISC)
    rng = np.random.default_rng(3)
    x = rng.normal(size=op.shape[1])
    grid = op.reconstruct(x)
    x2, defect = op.inject(grid)
    assert defect < 1e-12
    assert np.max(np.abs(x - x2)) < 1e-12
