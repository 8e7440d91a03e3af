import numpy as np
import pytest

from polynode import (
    DomainError,
    StructuralTensors,
    green_lagrange,
    invariants,
    plane_stress_deformation,
    right_cauchy_green,
    shift_invariants,
)
from polynode.kinematics import biaxial_arrays, cofactor


def explicit_adjugate(C):
    """Independent cofactor formula: entrywise signed minors."""
    adj = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(C, i, axis=0), j, axis=1)
            adj[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return adj  # cof C for symmetric C equals the adjugate transpose = adjugate


def random_rotation(rng):
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


class TestPlaneStressDeformation:
    def test_identity(self):
        assert np.array_equal(plane_stress_deformation(1, 1), np.eye(3))

    def test_det_one_forced(self):
        F = plane_stress_deformation(2, 1)
        assert np.allclose(np.diag(F), [2, 1, 0.5])

    def test_equibiaxial(self):
        F = plane_stress_deformation(1.1, 1.1)
        assert F[2, 2] == pytest.approx(1 / 1.21, abs=1e-15)

    def test_incompressible_over_grid(self):
        for lx in np.linspace(0.5, 2, 25):
            for ly in np.linspace(0.5, 2, 25):
                assert abs(np.linalg.det(plane_stress_deformation(lx, ly)) - 1) < 1e-12

    @pytest.mark.parametrize("bad", [(0, 1), (-1, 1), (1, -2)])
    def test_nonpositive_stretch_rejected(self, bad):
        with pytest.raises(DomainError):
            plane_stress_deformation(*bad)


class TestRightCauchyGreen:
    def test_identity(self):
        assert np.array_equal(right_cauchy_green(np.eye(3)), np.eye(3))

    def test_diagonal_square(self):
        assert np.allclose(right_cauchy_green(np.diag([2, 1, 0.5])),
                           np.diag([4, 1, 0.25]))

    def test_rotation_invariance(self):
        rng = np.random.default_rng(11)
        F = np.diag(rng.uniform(0.5, 2, 3))
        Q = random_rotation(rng)
        assert np.allclose(right_cauchy_green(Q @ F), right_cauchy_green(F))

    def test_negative_det_rejected(self):
        with pytest.raises(DomainError):
            right_cauchy_green(np.diag([-1.0, 1.0, 1.0]))


class TestInvariants:
    def test_identity_values(self):
        dirs = StructuralTensors.from_angles(0.3, 2.0)
        inv = invariants(np.eye(3), dirs)
        assert (inv.I1, inv.I2, inv.I4v, inv.I4w, inv.J) == (3, 3, 1, 1, 1)

    def test_diagonal_example(self):
        # direct evaluation on diag(4, 0.5, 0.5) with the x-axis fiber
        dirs = StructuralTensors.from_angles(0.0, np.pi / 2)
        inv = invariants(np.diag([4.0, 0.5, 0.5]), dirs)
        assert inv.I1 == pytest.approx(5.0, abs=1e-15)
        assert inv.I2 == pytest.approx(0.5 * (25 - 16.5), abs=1e-15)
        assert inv.I4v == pytest.approx(4.0, abs=1e-15)
        assert inv.J == pytest.approx(1.0, abs=1e-15)

    def test_equibiaxial_fiber_angle_independent(self):
        C = np.diag([1.21, 1.21, 1 / 1.4641])
        for theta in np.linspace(0, np.pi, 13):
            dirs = StructuralTensors.from_angles(theta, theta + 0.7)
            assert invariants(C, dirs).I4v == pytest.approx(1.21, rel=1e-14)

    def test_objectivity_thousand_rotations(self):
        rng = np.random.default_rng(7)
        dirs = StructuralTensors.from_angles(0.5, 1.8)
        for _ in range(1000):
            F = np.diag(rng.uniform(0.5, 2.0, 3))
            Q = random_rotation(rng)
            a = invariants(right_cauchy_green(F), dirs)
            b = invariants(right_cauchy_green(Q @ F), dirs)
            for name in ("I1", "I2", "I4v", "I4w", "J"):
                va, vb = getattr(a, name), getattr(b, name)
                assert abs(va - vb) <= 1e-12 * max(abs(va), 1.0)

    def test_lower_bounds_on_plane_stress_grid(self):
        dirs = StructuralTensors.from_angles(0.0, np.pi / 2)
        for lx in np.linspace(0.5, 2, 40):
            for ly in np.linspace(0.5, 2, 40):
                inv = invariants(
                    right_cauchy_green(plane_stress_deformation(lx, ly)), dirs)
                assert inv.I1 >= 3 - 1e-12
                assert inv.I2 >= 3 - 1e-12
                if abs(lx - 1) > 1e-9 or abs(ly - 1) > 1e-9:
                    assert inv.I1 > 3
        assert abs(inv.J - 1) < 1e-12

    def test_i2_equals_trace_of_cofactor(self):
        rng = np.random.default_rng(3)
        dirs = StructuralTensors.from_angles(0.0, np.pi / 2)
        for _ in range(200):
            A = rng.normal(size=(3, 3))
            C = A @ A.T + 0.5 * np.eye(3)
            i2 = invariants(C, dirs).I2
            i2_adj = np.trace(explicit_adjugate(C))
            assert abs(i2 - i2_adj) <= 1e-12 * max(abs(i2_adj), 1.0)
            assert np.allclose(cofactor(C), explicit_adjugate(C), rtol=1e-11)


class TestShiftAndStrain:
    def test_shift_examples(self):
        dirs = StructuralTensors.from_angles(0.0, np.pi / 2)
        s = shift_invariants(invariants(np.eye(3), dirs))
        assert (s.J1, s.J2, s.J4v, s.J4w) == (0, 0, 0, 0)
        from polynode import InvariantSet
        s = shift_invariants(InvariantSet(I1=5, I2=4.25, I4v=4, I4w=1, J=1))
        assert (s.J1, s.J2, s.J4v, s.J4w) == pytest.approx((2, 1.25, 3, 0))
        s = shift_invariants(InvariantSet(I1=3.1, I2=3.05, I4v=1.2, I4w=1.02, J=1))
        assert (s.J1, s.J2, s.J4v, s.J4w) == pytest.approx((0.1, 0.05, 0.2, 0.02))

    def test_shift_nonnegative_on_tensile_states(self):
        dirs = StructuralTensors.from_angles(0.4, 1.9)
        for lx in np.linspace(1.0, 2.0, 20):
            for ly in np.linspace(1.0, 2.0, 20):
                C = right_cauchy_green(plane_stress_deformation(lx, ly))
                s = shift_invariants(invariants(C, dirs))
                assert min(s.J1, s.J2, s.J4v, s.J4w) >= -1e-12

    def test_green_lagrange(self):
        assert np.allclose(green_lagrange(np.eye(3)), 0)
        assert np.allclose(green_lagrange(np.diag([4.0, 0.5, 0.5])),
                           np.diag([1.5, -0.25, -0.25]))
        C = np.diag([1.21, 1.21, 1 / 1.21**2])
        E = green_lagrange(C)
        assert E[0, 0] == pytest.approx(0.105, abs=1e-15)
        assert E[2, 2] == pytest.approx((1 / 1.4641 - 1) / 2, abs=1e-15)


class TestStructuralTensors:
    def test_unit_vectors_required(self):
        with pytest.raises(DomainError):
            StructuralTensors(v0=np.array([1.0, 1.0, 0.0]),
                              w0=np.array([0.0, 1.0, 0.0]))

    def test_rank_one_symmetric(self):
        dirs = StructuralTensors.from_angles(0.7, 2.1)
        for T in (dirs.V0, dirs.W0):
            assert np.allclose(T, T.T)
            assert np.linalg.matrix_rank(T) == 1
        assert dirs.in_plane

    def test_biaxial_arrays_match_scalar_path(self):
        lx = np.array([1.0, 1.1, 1.3])
        ly = np.array([1.0, 1.2, 0.9])
        cx, cy, cz, I1, I2 = biaxial_arrays(lx, ly)
        dirs = StructuralTensors.from_angles(0.0, np.pi / 2)
        for i in range(3):
            C = right_cauchy_green(plane_stress_deformation(lx[i], ly[i]))
            inv = invariants(C, dirs)
            assert I1[i] == pytest.approx(inv.I1, rel=1e-14)
            assert I2[i] == pytest.approx(inv.I2, rel=1e-14)
            assert cz[i] == pytest.approx(C[2, 2], rel=1e-14)
