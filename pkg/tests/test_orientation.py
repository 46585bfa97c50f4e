import numpy as np
import pytest
import scipy.linalg

from crorient.errors import InputError, TransportError
from crorient.operators import (Discretization, assemble_half_cylinder,
                                constant_field, conjugation_field, numerical_kernel,
                                rotation_homotopy_field)
from crorient.oracles import (cylinder_rotation_unitary, identity_unitary,
                              kernel_pair, small_rotation_unitary)
from crorient.orientation import (OperatorPath, _aligned_det, boundary_loop_of,
                                  conjugation_sign, predict_sign,
                                  transport_orientation)

DISC = Discretization(K=4, L=4.0, Ns=48)
BASE2 = constant_field(-np.pi, n=2)


def rotation_path(steps, disc=DISC):
    rs = np.linspace(1.0, 0.0, steps + 1)
    return OperatorPath(fields=[rotation_homotopy_field(r) for r in rs],
                        disc=disc, params=tuple(rs))


def test_constant_path_transports_trivially():
    fields = [constant_field(-np.pi, n=2) for _ in range(5)]
    res = transport_orientation(OperatorPath(fields=fields, disc=DISC))
    assert res.sign.value == 1
    assert all(d > 0.99 for d in res.sign.step_dets)


def test_transport_matches_analytic_pair_orientation():
    """Starting from the (u, v) orientation at offset 1, the transported frame
    at offset 0 is positively oriented with respect to (u_0, v_0)."""
    res = transport_orientation(rotation_path(12))
    ops = {r: assemble_half_cylinder(rotation_homotopy_field(r), DISC) for r in (1.0, 0.0)}

    def pair_frame(op, r):
        p = kernel_pair(r)
        gu, _ = op.inject(op.grid_eval(p.u))
        gv, _ = op.inject(op.grid_eval(p.v))
        q, rr = np.linalg.qr(np.column_stack([gu, gv]))
        return q * np.sign(np.diag(rr))[None, :]

    start_rel = _aligned_det(res.start_frame.vectors, pair_frame(ops[1.0], 1.0))
    end_rel = _aligned_det(res.frame.vectors, pair_frame(ops[0.0], 0.0))
    # transported (u_1, v_1) lands on +(u_0, v_0)
    total = np.sign(start_rel) * res.sign.value * np.sign(end_rel)
    assert total == 1
    # and the kernel subspaces match the analytic pair (coarse resolution here;
    # the 1e-2 bound at reference resolution is an acceptance check)
    angles = scipy.linalg.subspace_angles(res.frame.vectors, pair_frame(ops[0.0], 0.0))
    assert np.max(angles) < 5e-2


def test_transport_backwards_same_sign():
    fwd = transport_orientation(rotation_path(12))
    rs = np.linspace(0.0, 1.0, 13)
    back = transport_orientation(OperatorPath(
        fields=[rotation_homotopy_field(r) for r in rs], disc=DISC))
    assert fwd.sign.value == back.sign.value
    # brute force on random frame paths: reversing the chain preserves the sign
    rng = np.random.default_rng(0)
    for _ in range(20):
        frames = []
        q = np.linalg.qr(rng.normal(size=(12, 2)))[0]
        frames.append(q)
        for _ in range(6):
            step = rng.normal(size=(12, 2)) * 0.15
            q = np.linalg.qr(frames[-1] + step)[0]
            frames.append(q)
        sign_fwd = np.prod([np.sign(_aligned_det(a, b))
                            for a, b in zip(frames[:-1], frames[1:])])
        sign_back = np.prod([np.sign(_aligned_det(b, a))
                             for a, b in zip(frames[:-1], frames[1:])])
        assert sign_fwd == sign_back


def test_path_with_mixed_asymptotics_rejected():
    with pytest.raises(InputError):
        OperatorPath(fields=[constant_field(-np.pi, n=1),
                             constant_field(-3 * np.pi, n=1)], disc=DISC)


def test_conjugation_sign_battery_small():
    w = cylinder_rotation_unitary()
    assert conjugation_sign(identity_unitary(2), BASE2, DISC, steps=4).value == 1
    assert conjugation_sign(w, BASE2, DISC, steps=12).value == -1
    assert predict_sign(w) == -1
    assert predict_sign(identity_unitary(2)) == 1
    assert predict_sign([w, w]) == 1


def test_conjugation_sign_multiplicative():
    w = cylinder_rotation_unitary()
    v = small_rotation_unitary(1.0)
    s_w = conjugation_sign(w, BASE2, DISC, steps=12).value
    s_v = conjugation_sign(v, BASE2, DISC, steps=8).value
    s_vw = conjugation_sign([v, w], BASE2, DISC, steps=12).value
    s_ww = conjugation_sign([w, w], BASE2, DISC, steps=24).value
    assert s_v == 1
    assert s_vw == s_v * s_w == -1
    assert s_ww == s_w * s_w == 1


def test_conjugation_sign_blocksum_dimension_three():
    w3 = cylinder_rotation_unitary().block_sum(1)
    base3 = constant_field(-np.pi, n=3)
    assert conjugation_sign(w3, base3, DISC, steps=12).value == -1
    assert predict_sign(w3) == -1


def test_boundary_loop_windings():
    w = cylinder_rotation_unitary()
    from crorient.spin import winding_number
    assert winding_number(boundary_loop_of(w)) == 1
    assert winding_number(boundary_loop_of([w, w])) == 2
    assert winding_number(boundary_loop_of(small_rotation_unitary(1.0))) == 0


def test_dimension_mismatch_rejected():
    w = cylinder_rotation_unitary()
    with pytest.raises(InputError):
        conjugation_sign(w, constant_field(-np.pi, n=3), DISC)


def test_declared_asymptote_checked():
    w = cylinder_rotation_unitary()
    from crorient.sympath import constant_loop
    with pytest.raises(InputError):
        conjugation_sign(w, BASE2, DISC, splus=constant_loop(-3 * np.pi, n=2))


def test_transport_rejects_near_stratum_paths():
    """The factorwise homotopy for the squared rotation passes close to a
    non-surjective operator; the margin guard must refuse to transport
    through it."""
    disc = Discretization(K=6, L=6.0, Ns=96)
    w = cylinder_rotation_unitary()
    tzero = conjugation_field(w.shifted(0.0), BASE2)
    rs = np.linspace(1.0, 0.0, 13)
    fields = [conjugation_field(w.shifted(r), tzero) for r in rs]
    with pytest.raises(TransportError):
        transport_orientation(OperatorPath(fields=fields, disc=disc))
