"""Deformation-gradient algebra and invariants for biaxial membrane states.

All tensors are plain numpy arrays. Deformations are dimensionless; a
plane-stress incompressible state is a diagonal F with the through-thickness
stretch fixed by det F = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "StructuralTensors",
    "InvariantSet",
    "ShiftedInvariants",
    "plane_stress_deformation",
    "right_cauchy_green",
    "cofactor",
    "invariants",
    "shift_invariants",
    "green_lagrange",
    "biaxial_arrays",
]


@dataclass(frozen=True)
class StructuralTensors:
    """Two unit fiber directions and their rank-one structural tensors."""

    v0: np.ndarray
    w0: np.ndarray

    def __post_init__(self):
        for name, vec in (("v0", self.v0), ("w0", self.w0)):
            if abs(np.linalg.norm(vec) - 1.0) > 1e-12:
                raise DomainError(f"{name} must be a unit vector")

    @classmethod
    def from_angles(cls, angle_v: float, angle_w: float) -> "StructuralTensors":
        """In-plane fibers at the given angles from the x axis (radians)."""
        return cls(
            v0=np.array([np.cos(angle_v), np.sin(angle_v), 0.0]),
            w0=np.array([np.cos(angle_w), np.sin(angle_w), 0.0]),
        )

    @property
    def V0(self) -> np.ndarray:
        return np.outer(self.v0, self.v0)

    @property
    def W0(self) -> np.ndarray:
        return np.outer(self.w0, self.w0)

    @property
    def in_plane(self) -> bool:
        return abs(self.v0[2]) < 1e-12 and abs(self.w0[2]) < 1e-12


@dataclass(frozen=True)
class InvariantSet:
    """Isotropic and fiber invariants of one right Cauchy-Green state."""

    I1: float
    I2: float
    I4v: float
    I4w: float
    J: float


@dataclass(frozen=True)
class ShiftedInvariants:
    """Invariants shifted so that the identity map sits at the origin."""

    J1: float
    J2: float
    J4v: float
    J4w: float


def plane_stress_deformation(lam_xx: float, lam_yy: float) -> np.ndarray:
    """Diagonal deformation gradient with det F = 1.

    The out-of-plane stretch is 1/(lam_xx*lam_yy), which enforces
    incompressibility exactly.
    """
    if lam_xx <= 0 or lam_yy <= 0:
        raise DomainError(f"stretches must be positive, got ({lam_xx}, {lam_yy})")
    return np.diag([float(lam_xx), float(lam_yy), 1.0 / (lam_xx * lam_yy)])


def right_cauchy_green(F: np.ndarray) -> np.ndarray:
    """C = F^T F for a deformation gradient with positive determinant."""
    F = np.asarray(F, dtype=float)
    if np.linalg.det(F) <= 0:
        raise DomainError("deformation gradient must have positive determinant")
    return F.T @ F


def cofactor(C: np.ndarray) -> np.ndarray:
    """cof C = det(C) C^{-T}; for symmetric positive-definite C this is det(C) C^{-1}."""
    return np.linalg.det(C) * np.linalg.inv(C).T


def invariants(C: np.ndarray, dirs: StructuralTensors) -> InvariantSet:
    """Invariant set (I1, I2, I4v, I4w, J) of a symmetric positive-definite C."""
    C = np.asarray(C, dtype=float)
    I1 = np.trace(C)
    I2 = 0.5 * (I1**2 - np.trace(C @ C))
    detC = np.linalg.det(C)
    if detC <= 0:
        raise DomainError("C must be positive definite")
    return InvariantSet(
        I1=float(I1),
        I2=float(I2),
        I4v=float(np.tensordot(C, dirs.V0)),
        I4w=float(np.tensordot(C, dirs.W0)),
        J=float(np.sqrt(detC)),
    )


def shift_invariants(inv: InvariantSet) -> ShiftedInvariants:
    """Subtract the identity-map values (3, 3, 1, 1) componentwise."""
    return ShiftedInvariants(
        J1=inv.I1 - 3.0,
        J2=inv.I2 - 3.0,
        J4v=inv.I4v - 1.0,
        J4w=inv.I4w - 1.0,
    )


def green_lagrange(C: np.ndarray) -> np.ndarray:
    """Green-Lagrange strain E = (C - I)/2."""
    C = np.asarray(C, dtype=float)
    return 0.5 * (C - np.eye(C.shape[0]))


def biaxial_arrays(lam_x, lam_y):
    """Vectorized kinematic quantities along a biaxial stretch path.

    Returns (cx, cy, cz, I1, I2) where cx, cy, cz are the squared principal
    stretches of the incompressible plane-stress state.
    """
    lam_x = np.asarray(lam_x, dtype=float)
    lam_y = np.asarray(lam_y, dtype=float)
    if np.any(lam_x <= 0) or np.any(lam_y <= 0):
        raise DomainError("stretches must be positive")
    cx = lam_x**2
    cy = lam_y**2
    cz = 1.0 / (cx * cy)
    I1 = cx + cy + cz
    I2 = cx * cy + cx * cz + cy * cz
    return cx, cy, cz, I1, I2
