import numpy as np
import pytest
import scipy.linalg

from crorient.errors import InputError, RefinementError
from crorient.spin import (
    SOLoop,
    axis_rotation_loop,
    clifford_generators,
    constant_so_loop,
    lift_sign,
    lifts_to_spin,
    rotation_loop,
    so_log,
    so_loop,
    winding_number,
)


def quaternion_lift_oracle(loop) -> bool:
    """Independent double cover arithmetic for SO(3) through unit quaternions.

    Each incremental rotation near the identity has a unique quaternion with
    positive real part; the loop lifts iff the accumulated product is +1."""
    assert loop.n == 3

    def to_quat(r):
        w = 0.5 * np.sqrt(max(1.0 + np.trace(r), 0.0))
        return np.array([w,
                         (r[2, 1] - r[1, 2]) / (4 * w),
                         (r[0, 2] - r[2, 0]) / (4 * w),
                         (r[1, 0] - r[0, 1]) / (4 * w)])

    def qmul(a, b):
        w1, x1, y1, z1 = a
        w2, x2, y2, z2 = b
        return np.array([
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ])

    q = np.array([1.0, 0.0, 0.0, 0.0])
    for i in range(loop.count):
        q = qmul(to_quat(loop.step(i)), q)
    assert min(np.linalg.norm(q - [1, 0, 0, 0]), np.linalg.norm(q + [1, 0, 0, 0])) < 1e-6
    return bool(q[0] > 0)


def test_winding_numbers():
    assert winding_number(rotation_loop(1)) == 1
    assert winding_number(rotation_loop(2)) == 2
    assert winding_number(rotation_loop(-3)) == -3
    assert winding_number(constant_so_loop(2)) == 0


def test_winding_requires_n2():
    with pytest.raises(InputError):
        winding_number(constant_so_loop(3))


def test_winding_sample_independence():
    for count in (64, 128, 256):
        assert winding_number(rotation_loop(2, count=count)) == 2


def test_lift_battery():
    emb1 = rotation_loop(1).block_sum_identity(1)
    emb2 = rotation_loop(2).block_sum_identity(1)
    assert lifts_to_spin(emb1).lifts is False
    assert lifts_to_spin(emb2).lifts is True
    assert lifts_to_spin(constant_so_loop(5)).lifts is True
    assert lift_sign(rotation_loop(1)) == -1
    assert lift_sign(rotation_loop(2)) == 1
    assert lift_sign(constant_so_loop(1, count=8)) == 1


def test_axis_rotation_against_quaternion_oracle():
    rng = np.random.default_rng(4)
    for _ in range(6):
        axis = rng.normal(size=3)
        turns = int(rng.integers(1, 3))
        loop = axis_rotation_loop(axis, turns, count=96)
        assert lifts_to_spin(loop).lifts == quaternion_lift_oracle(loop)
        assert lifts_to_spin(loop).lifts == (turns % 2 == 0)


def test_random_so3_loop_against_quaternion_oracle():
    rng = np.random.default_rng(11)
    count = 128
    t = np.arange(count) / count
    for trial in range(4):
        turns = int(rng.integers(0, 3))
        base = axis_rotation_loop([0, 0, 1], turns, count=count)
        # conjugate by a smoothly varying rotation: same homotopy class
        wobble = []
        amp = rng.uniform(0.2, 0.8)
        for tv, r in zip(t, base.samples):
            a = amp * np.sin(2 * np.pi * tv)
            g = scipy.linalg.expm(a * np.array([[0, -1, 0], [1, 0, 0], [0, 0, 0]])
                                  + 0.3 * a * np.array([[0, 0, 1], [0, 0, 0], [-1, 0, 0]]))
            wobble.append(g @ r @ g.T)
        loop = so_loop(np.stack(wobble))
        assert lifts_to_spin(loop).lifts == quaternion_lift_oracle(loop)


def test_clifford_generators_anticommute():
    for n in (3, 5, 8):
        gens = clifford_generators(n)
        eye = np.eye(gens[0].shape[0])
        for i in range(n):
            for j in range(n):
                anti = gens[i] @ gens[j] + gens[j] @ gens[i]
                expect = 2 * eye if i == j else 0 * eye
                assert np.max(np.abs(anti - expect)) < 1e-14


def test_dimension_cap():
    with pytest.raises(InputError):
        clifford_generators(9)


def test_block_embedding_matches_winding_parity():
    for n in (3, 4, 5):
        for turns in (1, 2, 3):
            loop = rotation_loop(turns).block_sum_identity(n - 2)
            assert lifts_to_spin(loop).lifts == (turns % 2 == 0)


def test_concatenation_and_reversal():
    rng = np.random.default_rng(8)
    for _ in range(5):
        k1, k2 = int(rng.integers(-2, 3)), int(rng.integers(-2, 3))
        a, b = rotation_loop(k1), rotation_loop(k2)
        assert winding_number(a.pointwise_product(b)) == k1 + k2
        assert winding_number(a.reversed()) == -k1
    loop = axis_rotation_loop([1, 2, 0.5], 1, count=96)
    assert lifts_to_spin(loop.pointwise_product(loop)).lifts is True
    assert lifts_to_spin(loop.reversed()).lifts == lifts_to_spin(loop).lifts


def test_homotopy_invariance_under_perturbation():
    rng = np.random.default_rng(17)
    loop2 = rotation_loop(1, count=96)
    loop3 = axis_rotation_loop([0.3, 1.0, 0.2], 1, count=96)
    for _ in range(20):
        for loop, invariant in ((loop2, lambda l: winding_number(l)),
                                (loop3, lambda l: lifts_to_spin(l).lifts)):
            ref = invariant(loop)
            pert = []
            for r in loop.samples:
                g = rng.normal(size=r.shape)
                g *= 0.05 / np.linalg.norm(g, 2)
                u, _, vt = np.linalg.svd(r + g)
                p = u @ vt
                if np.linalg.det(p) < 0:
                    u[:, -1] = -u[:, -1]
                    p = u @ vt
                pert.append(p)
            assert invariant(so_loop(np.stack(pert))) == ref


def test_fineness_violation_raises():
    coarse = np.stack([np.eye(2), -np.eye(2)])  # a half-turn jump per step
    with pytest.raises(RefinementError):
        so_loop(coarse)


def test_non_orthogonal_sample_rejected():
    bad = np.tile(np.eye(2), (8, 1, 1))
    bad[3, 0, 0] = 1.1
    with pytest.raises(InputError):
        so_loop(bad)


def test_so_log_inverts_exp():
    rng = np.random.default_rng(5)
    for n in (2, 3, 4, 6):
        a = rng.normal(size=(n, n))
        a = 0.15 * (a - a.T)
        r = scipy.linalg.expm(a)
        assert np.max(np.abs(so_log(r) - a)) < 1e-8
